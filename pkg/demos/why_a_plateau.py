"""
Why the surface is flat
=======================

With every variance coefficient large, each observation whose variance
covariates are not all zero contributes about ln(1/2), whatever beta is.
Compare the exact log-likelihood with that limit, then draw the profile over
two variance coefficients.
"""
import sys
from pathlib import Path

import numpy as np

from hetprobit import ParamVector, log_likelihood, plateau_approximation, preset, profile_grid, simulate
from hetprobit import svg
from hetprobit.model import benchmark_value

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "profile"
out.mkdir(parents=True, exist_ok=True)

sim = simulate(preset("het-paper", seed=7))
d = sim.data
for g in (2.0, 5.0, 10.0, 20.0):
    p = ParamVector(sim.beta0, [g, g])
    print(f"gamma = ({g:4.1f}, {g:4.1f}):  l = {log_likelihood(d, p).value:10.3f}   "
          f"limit = {plateau_approximation(d, sim.beta0).value:10.3f}")
print("-n ln 2 =", round(benchmark_value(d), 3))
print("l at the truth =", round(log_likelihood(d, sim.params).value, 3))

# %%
# Profile over (gamma_1, gamma_2) with beta held at the truth. Cells below
# -10000 are masked grey in the heatmap.
grid = profile_grid(d, sim.params, 0, 1, ((-5, 15), (-5, 15)), resolution=41)
print("cells below the clip floor:", int(grid.clipped.sum()))
print("value range over [5, 15]^2:", round(grid.value_range(5, 5, 15, 15), 3))
(out / "profile.svg").write_text(svg.heatmap_svg(grid))
