"""One-parameter sweep of the regular-fold scenario along alpha1."""

import argparse

from z2filippov import atlas
from z2filippov.model import load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=201)
    ap.add_argument("--half-width", type=float, default=1e-2)
    ap.add_argument("--out", default=None, help="CSV output path")
    args = ap.parse_args()

    model = load_scenario("s1")
    w = args.half_width
    grid = atlas.GridSpec("alpha", atlas.Axis(-w, w, args.n), atlas.Axis(0.0, 0.0, 1))
    dia = atlas.run_sweep(model, "codim1", grid)
    prev = None
    for c in dia.cells:
        name = c.label.name()
        if name != prev:
            print(f"alpha1 = {c.target[0]: .5e}  rho1 = {c.beta[0]: .5e}  {name}")
            prev = name
    print("rho1 = 0 at alpha1 =", dia.curves["CC"])
    print("misclassified:", len(dia.misclassified()))
    if args.out:
        atlas.emit(dia, "csv", args.out)


if __name__ == "__main__":
    main()
