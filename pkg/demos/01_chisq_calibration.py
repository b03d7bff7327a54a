"""Chi-square calibration of functional survey weights on a small sample."""
import numpy as np

from memcalib import (
    FunctionalSample, MeanTarget, calibrated_aux_mean, chisq_weights,
    ht_aux_mean, ht_functional_mean, srswor_design, weighted_mean,
)
from memcalib.simulation import SimConfig, generate_population, population_means

cfg = SimConfig(N=1000, L=80)
pop = generate_population(cfg, 7)
mu_x, mu_y = population_means(pop)

# draw 120 units without replacement
idx = np.random.default_rng(0).choice(cfg.N, cfg.n, replace=False)
sample = FunctionalSample(pop.y[idx], pop.x[idx])
design = srswor_design(cfg.N, cfg.n)

w = chisq_weights(sample, design, MeanTarget(mu_x, cfg.N))
print("weights shape:", w.w.shape, " negative weights:", w.negative_count)

# the weighted auxiliary mean hits the population mean at every t
print("HT aux error   :", np.abs(ht_aux_mean(sample, design) - mu_x).max())
print("calib aux error:", np.abs(calibrated_aux_mean(w, sample, cfg.N) - mu_x).max())

ht = ht_functional_mean(sample, design)
cal = weighted_mean(w, sample, cfg.N)
print("mean sq error HT   :", np.mean((ht - mu_y) ** 2))
print("mean sq error calib:", np.mean((cal - mu_y) ** 2))
