"""
Escaping the plateau in two stages
==================================

When a fit lands on the plateau, keep its beta, reset the variance
coefficients to zero and maximize over them alone. The refit is kept only if
it raises the likelihood.
"""
import numpy as np

from hetprobit import MultiStartConfig, OptimizerSpec, ParamVector, preset, simulate, two_stage_fit
from hetprobit.harness import draw_starts

sim = simulate(preset("het-paper", seed=7))
starts = draw_starts(MultiStartConfig(num_starts=200, seed=1), 5)
for s in starts[:40]:
    ts = two_stage_fit(sim.data, OptimizerSpec("BFGS"), ParamVector.from_flat(s, 3))
    if ts.triggered:
        n = sim.data.n
        print("stage 1: l/n =", round(ts.stage1.value / n, 4), " gamma =", np.round(ts.stage1.point.gamma, 2))
        print("stage 2: l/n =", round(ts.stage2.value / n, 4), " gamma =", np.round(ts.stage2.point.gamma, 2))
        print("kept:    l/n =", round(ts.result.value / n, 4))
        break
