"""
Four optimizers on the same starts
==================================

BFGS, Fletcher-Reeves conjugate gradients, Nelder-Mead and simulated
annealing from 20 shared starts. Annealing spends its whole evaluation budget
on every run, so this takes a minute or so.
"""
from hetprobit import MultiStartConfig, OptimizerSpec, preset, run_multistart, simulate

sim = simulate(preset("het-paper", seed=7))
methods = tuple(OptimizerSpec(m) for m in ("BFGS", "CG", "NelderMead", "SANN"))
cfg = MultiStartConfig(num_starts=20, seed=1, reference=sim.params, methods=methods)
report = run_multistart(sim.data, cfg)
print(f"{'method':12s} {'better':>7s} {'plateau':>8s}  terminated")
for label, mr in report.methods.items():
    s = mr.summary
    print(f"{label:12s} {s['better_than_reference']:7d} {s['plateau']:8d}  {s['terminated']}")
