"""Sensitivity of the MEM estimators to the spectral truncation level."""
import numpy as np

from memcalib.simulation import SimConfig, monte_carlo

for rcond in (1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-10):
    rows = {r.estimator: r.mse for r in monte_carlo(SimConfig(reps=50, rcond=rcond)).rows}
    print(f"rcond {rcond:.0e}: gauss/HT {rows['mem-gauss'] / rows['ht']:.3f}  "
          f"poisson/HT {rows['mem-poisson'] / rows['ht']:.3f}")
