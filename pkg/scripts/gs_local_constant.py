"""Ratio beta2 / sqrt(beta1) on the GS curve as beta1 shrinks.

The sequence and its Richardson extrapolation show the limit of the GS
constant directly, without a regression model.
"""

import math

from z2filippov import atlas
from z2filippov.model import load_scenario


def main():
    model = load_scenario("s2")
    rays = atlas.default_rays("cusp", 14, 1e-4)
    curves = atlas.extract_curves(model, "cusp", rays, atlas.DEFAULT_RAY_WINDOW["cusp"])
    prev = None
    for p in sorted(curves["GS"], key=lambda p: -p.beta1):
        r = p.beta2 / math.sqrt(p.beta1)
        # corrections are O(sqrt(beta1)); halving beta1 shrinks them by sqrt(2)
        extra = "" if prev is None else f"  extrapolated {(math.sqrt(2) * r - prev) / (math.sqrt(2) - 1):.6f}"
        print(f"beta1 = {p.beta1:.3e}  ratio = {r:.6f}{extra}")
        prev = r


if __name__ == "__main__":
    main()
