"""
Checking published estimates on your own data
=============================================

The package ships published heteroskedastic probit estimates for an
abortion-attitudes survey model (8 choice and 6 variance coefficients,
1295 complete cases). The survey itself is not included. With a complete-case
CSV laid out as ``y, x1..x8, z1..z6`` you can compare those estimates with a
multistart search and with the -n ln 2 benchmark.

Usage: ``python demos/reanalysis.py survey.csv``
"""
import sys

from hetprobit import MultiStartConfig, log_likelihood, run_multistart
from hetprobit import formats as fm
from hetprobit.model import benchmark_value

ref_info = fm.reference_ab()
ref = fm.read_params("builtin:alvarez-brehm")
print("published normalized log-likelihood:", ref_info["normalized_loglik"])

if len(sys.argv) < 2:
    print("pass a complete-case CSV to evaluate the estimates on it")
    sys.exit(0)

d = fm.read_dataset(sys.argv[1])
print("normalized l at the published estimates:", log_likelihood(d, ref).normalized)
print("benchmark -ln 2:", benchmark_value(d) / d.n)
report = run_multistart(d, MultiStartConfig(num_starts=100, seed=1, reference=ref))
mr = report.methods["BFGS"]
print("runs better than the published estimates:", mr.summary["better_than_reference"])
print("plateau-flagged runs:", mr.summary["plateau"])
