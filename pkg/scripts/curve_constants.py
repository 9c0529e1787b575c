"""Extract bifurcation curves along rays and fit their leading constants.

For the cusp scenario the fits are printed at three cutoffs together with the
two-term intercept, which is the sharper estimate of the limit.
"""

import argparse
import time

from z2filippov import atlas
from z2filippov.model import load_scenario, scenario_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", choices=["s2", "s3"])
    ap.add_argument("--rays", type=int, default=None, help="rays per sign of beta1")
    ap.add_argument("--top", type=float, default=None, help="largest |beta1| of the ray fan")
    ap.add_argument("--out", default=None, help="JSON output with points and fits")
    args = ap.parse_args()

    model = load_scenario(args.scenario)
    case = scenario_case(args.scenario)
    t0 = time.perf_counter()
    rays = atlas.default_rays(case, args.rays, args.top)
    curves = atlas.extract_curves(model, case, rays, atlas.DEFAULT_RAY_WINDOW[case])
    fits = atlas.fit_curves(model, case, curves)
    print(f"{len(rays)} rays in {time.perf_counter() - t0:.1f}s")
    print(f"{'curve':6} {'cutoff':>8} {'n':>3} {'C':>10} {'intercept':>10} {'predicted':>10} {'exponent':>9}")
    for name, fs in fits.items():
        if not fs:
            print(f"{name:6} too few points for a fit (need 8 below the cutoff)")
        for f in fs:
            pred = "-" if f.predicted is None else f"{f.predicted:.5f}"
            print(f"{name:6} {f.cutoff:8.1e} {f.n_points:3d} {f.C:10.5f} {f.intercept:10.5f} "
                  f"{pred:>10} {f.exponent:9.4f}")
    if args.out:
        atlas.emit({"case": case, "curves": curves, "fits": fits}, "json", args.out)


if __name__ == "__main__":
    main()
