import numpy as np
import pytest

from memcalib.simulation import (
    SimConfig,
    alpha,
    aux_shapes,
    beta,
    decompose,
    derive_seed,
    generate_population,
    monte_carlo,
    population_means,
    run_replication,
)

SMALL = SimConfig(N=200, J=10, L=16, reps=5)


def test_model_curves():
    assert alpha(0.0) == pytest.approx(3.5)
    t = np.linspace(0, 1, 7)
    assert beta(t).shape == (7, 2)
    assert aux_shapes(t).shape == (7, 2)
    np.testing.assert_allclose(beta(0.5), [np.cos(5), 0.5 * np.sin(7.5)])


def test_config_validation_and_roundtrip():
    cfg = SimConfig()
    assert cfg.n == 120
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        SimConfig.from_dict({"bogus": 1})
    for bad in ({"N": 0}, {"sampling_fraction": 0}, {"rcond": 1.0}, {"estimators": ("nope",)},
                {"seed": -1}, {"gamma": 0}):
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_population_shapes_and_determinism():
    cfg = SimConfig()
    pop = generate_population(cfg, 11)
    assert pop.y.shape == (1000, 80) and pop.x.shape == (1000, 80, 2)
    again = generate_population(cfg, 11)
    assert np.array_equal(pop.y, again.y) and np.array_equal(pop.x, again.x)
    assert not np.array_equal(pop.y, generate_population(cfg, 12).y)


def test_population_means_near_model():
    cfg = SimConfig()
    pop = generate_population(cfg, derive_seed(cfg.seed, 0))
    t = np.arange(1, cfg.L + 1) / cfg.L
    mu_x, mu_y = population_means(pop)
    # X_2 - f_2 is one U[-0.5, 0.5] draw per unit, constant in t
    dev2 = mu_x[:, 1] - aux_shapes(t)[:, 1]
    assert np.ptp(dev2) < 1e-12
    assert abs(dev2[0]) < 3 * np.sqrt(1 / 12) / np.sqrt(cfg.N)
    dev1 = mu_x[:, 0] - aux_shapes(t)[:, 0] - 0.15
    assert abs(dev1[0]) < 3 * 2.3 / np.sqrt(12) / np.sqrt(cfg.N)
    # the mean response follows the linear model up to noise averaging
    model = alpha(t) + np.einsum("lk,lk->l", mu_x, beta(t))
    assert np.abs(mu_y - model).max() < 5 * np.sqrt(0.2 / cfg.N)


def test_population_linear_structure_without_noise():
    cfg = SimConfig(N=50, L=12, J=5, sigma_eps2=1e-300)
    pop = generate_population(cfg, 3)
    t = np.arange(1, cfg.L + 1) / cfg.L
    np.testing.assert_allclose(pop.y, alpha(t) + np.einsum("ilk,lk->il", pop.x, beta(t)), atol=1e-12)


def test_replication_outputs():
    cfg = SimConfig(N=200, J=10, L=16, estimators=("ht", "mem-gauss", "mem-poisson", "chisq"))
    pop = generate_population(cfg, 1)
    rep = run_replication(pop, cfg, 7)
    for m in cfg.estimators:
        assert rep.estimates[m].shape == (16,)
    for m in ("mem-gauss", "mem-poisson", "chisq"):
        assert rep.calibrated_x[m].shape == (16, 2)
    mu_x, _ = population_means(pop)
    np.testing.assert_allclose(rep.calibrated_x["chisq"], mu_x, atol=1e-10)
    assert rep.diagnostics["poisson_stationary"]
    again = run_replication(pop, cfg, 7)
    for m in cfg.estimators:
        assert np.array_equal(rep.estimates[m], again.estimates[m])


def test_greg_identity_in_simulation():
    cfg = SimConfig(N=300, J=8, L=10, estimators=("ht", "chisq"))
    pop = generate_population(cfg, 2)
    from memcalib import FunctionalSample, pointwise_beta_hat, srswor_design, srswor_sample, ht_aux_mean

    seed = 5
    idx = srswor_sample(cfg.N, cfg.n, seed).indices - 1
    sample = FunctionalSample(pop.y[idx], pop.x[idx])
    design = srswor_design(cfg.N, cfg.n)
    mu_x, _ = population_means(pop)
    rep = run_replication(pop, cfg, seed)
    b = pointwise_beta_hat(sample, design)
    greg = rep.estimates["ht"] + np.einsum("lk,lk->l", mu_x - ht_aux_mean(sample, design), b)
    np.testing.assert_allclose(rep.estimates["chisq"], greg, atol=1e-10)


def test_decompose_identity():
    rng = np.random.default_rng(0)
    est = rng.normal(size=(40, 9))
    truth = rng.normal(size=9)
    mse, bias2, var = decompose(est, truth)
    assert mse == pytest.approx(bias2 + var, abs=1e-12)
    assert mse == pytest.approx(np.mean((est - truth) ** 2), rel=1e-12)
    _, _, var1 = decompose(est[:1], truth)
    assert var1 == 0.0
    per_rep = rng.normal(size=(40, 9))
    mse2, b2, v2 = decompose(est, per_rep)
    assert mse2 == pytest.approx(np.mean((est - per_rep) ** 2), rel=1e-12)


def test_monte_carlo_small_run():
    res = monte_carlo(SMALL)
    assert [r.estimator for r in res.rows] == list(SMALL.estimators)
    for row in res.rows:
        assert row.mse == pytest.approx(row.bias2 + row.variance, abs=1e-12)
        assert row.mse == pytest.approx(np.mean((res.estimates[row.estimator] - res.truth) ** 2), rel=1e-12)
    assert res.estimates["ht"].shape == (5, 16)
    again = monte_carlo(SMALL)
    for m in SMALL.estimators:
        assert np.array_equal(res.estimates[m], again.estimates[m])
    seen = []
    monte_carlo(SimConfig(N=200, J=10, L=16, reps=3, estimators=("ht",)), progress=seen.append)
    assert seen == [0, 1, 2]


def test_monte_carlo_regenerated_population():
    cfg = SimConfig(N=200, J=10, L=16, reps=4, fixed_population=False, estimators=("ht", "mem-gauss"))
    res = monte_carlo(cfg)
    assert res.truth.shape == (4, 16)
    assert not np.array_equal(res.truth[0], res.truth[1])
    row = res.rows[0]
    assert row.mse == pytest.approx(np.mean((res.estimates["ht"] - res.truth) ** 2), rel=1e-12)


def test_ht_bias_shrinks_with_more_replications():
    wins = 0
    for batch in range(10):
        small = monte_carlo(SimConfig(N=200, J=5, L=16, reps=25, seed=100 + batch, estimators=("ht",)))
        large = monte_carlo(SimConfig(N=200, J=5, L=16, reps=400, seed=100 + batch, estimators=("ht",)))
        wins += large.rows[0].bias2 <= small.rows[0].bias2
    assert wins >= 8
