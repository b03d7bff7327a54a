"""Monte Carlo comparison of HT, MEM-Gaussian and MEM-Poisson mean curves."""
from memcalib.simulation import SimConfig, monte_carlo

res = monte_carlo(SimConfig(reps=100, seed=2024))
ht = {r.estimator: r for r in res.rows}["ht"].mse
print(f"{'estimator':12s} {'mse':>9s} {'bias2':>9s} {'variance':>9s} {'vs HT':>6s}")
for r in res.rows:
    print(f"{r.estimator:12s} {r.mse:9.5f} {r.bias2:9.2e} {r.variance:9.5f} {r.mse / ht:6.3f}")

# values are averaged over the 80 time points; multiply by L for sums over t
print("summed over t:", {r.estimator: round(r.mse * res.config.L, 4) for r in res.rows})
