"""Two-parameter sweep in measured coordinates with a region census."""

import argparse
import collections
import time

from z2filippov import atlas
from z2filippov.model import load_scenario, scenario_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", choices=["s2", "s3"])
    ap.add_argument("--n", type=int, default=101)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None, help="JSON or CSV output path")
    args = ap.parse_args()

    model = load_scenario(args.scenario)
    case = scenario_case(args.scenario)
    grid = atlas.default_grid(case, args.n)
    t0 = time.perf_counter()
    dia = atlas.run_sweep(model, case, grid, threads=args.threads,
                          progress=lambda k, n: print(f"\rcolumn {k}/{n}", end="", flush=True))
    print(f"\n{len(dia.cells)} cells in {time.perf_counter() - t0:.1f}s")
    print("resolved:", len(dia.resolved_cells()), " misclassified:", len(dia.misclassified()),
          " coverage violations:", len(dia.coverage_violations()))
    for name, n in collections.Counter(c.label.name() for c in dia.resolved_cells()).most_common():
        print(f"{n:6d}  {name}")
    if args.out:
        atlas.emit(dia, "csv" if args.out.endswith(".csv") else "json", args.out)


if __name__ == "__main__":
    main()
