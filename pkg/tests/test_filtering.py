import numpy as np
import pytest

from innovlab.core import AdaptedSamples, Path, RandomStream, TimeGrid, cumsum0
from innovlab.errors import DegeneracyError, ShapeError, StabilityError, UsageError
from innovlab.filtering import (
    BasisSpec,
    ensemble_conditional_drift,
    identity_feedback,
    innovation,
    kalman_bucy_filter,
    particle_conditional_drift,
    riccati_sequence,
    second_level_conditional,
    step_features,
    _truncnorm_mean01,
)
from innovlab.models import make_model, simulate, simulate_ensemble

STREAM = RandomStream(seed=909, substream=0)


# ---------------------------------------------------------------- kalman

def test_riccati_single_step_hand_value():
    g = TimeGrid(steps=10)
    P = riccati_sequence(beta=1.0, sigma=1.0, grid=g, p0=0.5)
    assert P[0] == 0.5
    assert P[1] == pytest.approx(0.5 + (1.0 - 1.0 - 0.25) * 0.1)  # 0.475


def test_riccati_negative_iterate_raises():
    with pytest.raises(StabilityError):
        riccati_sequence(beta=1.0, sigma=10.0, grid=TimeGrid(steps=2))


def test_kalman_zero_observation_gives_zero_estimate():
    g = TimeGrid(steps=16)
    U = Path(g, np.zeros((17, 1)))
    est = kalman_bucy_filter(U, beta=1.0, sigma=1.0)
    assert np.array_equal(est.values.values, np.zeros((16, 1)))
    assert est.method == "exact-kalman"


def test_kalman_filter_mse_matches_riccati():
    # Monte Carlo mean-square error of the filter at the last step should
    # reproduce the Riccati variance within 5%.
    M, N = 10_000, 64
    g = TimeGrid(steps=N)
    model = make_model("kalman-bucy", beta=1.0, sigma=1.0)
    sim = simulate_ensemble(model, g, M, RandomStream(seed=31, substream=0))
    filt = ensemble_conditional_drift(model, sim)
    err = sim.drift[:, N - 1, 0] - filt.values[:, N - 1, 0]
    P = riccati_sequence(1.0, 1.0, g)
    assert np.mean(err**2) == pytest.approx(P[N - 1], rel=0.05)


# ---------------------------------------------------------------- particle

def test_particle_filter_is_exact_for_deterministic_drift():
    g = TimeGrid(steps=8)
    model = make_model("deterministic", shape="linear", intercept=0.3, slope=0.5)
    out = simulate(model, g, STREAM)
    est = particle_conditional_drift(model, out.observation, 200, STREAM)
    assert np.allclose(est.values.values, out.drift.values, atol=1e-12)
    assert est.particle_count == 200
    assert np.all(est.ess > 0) and np.all(est.ess <= 200)


def test_particle_filter_matches_exact_kalman():
    # exact filter is the oracle: sup-norm gap below 0.05 at 1e4 particles
    g = TimeGrid(steps=128)
    model = make_model("kalman-bucy", beta=1.0, sigma=1.0)
    out = simulate(model, g, RandomStream(seed=77, substream=0))
    exact = kalman_bucy_filter(out.observation, 1.0, 1.0)
    part = particle_conditional_drift(model, out.observation, 10_000,
                                      RandomStream(seed=78, substream=0))
    gap = np.max(np.abs(part.values.values - exact.values.values))
    assert gap < 0.05


def test_particle_filter_error_shrinks_with_more_particles():
    g = TimeGrid(steps=64)
    model = make_model("kalman-bucy", beta=1.0, sigma=1.0)
    errs = {J: [] for J in (500, 2000, 8000)}
    for seed in range(4):
        out = simulate(model, g, RandomStream(seed=100 + seed, substream=0))
        exact = kalman_bucy_filter(out.observation, 1.0, 1.0).values.values
        for J in errs:
            part = particle_conditional_drift(model, out.observation, J,
                                              RandomStream(seed=500 + seed, substream=0))
            errs[J].append(np.max(np.abs(part.values.values - exact)))
    means = [np.mean(errs[J]) for J in (500, 2000, 8000)]
    assert means[0] > means[1] > means[2]


def test_particle_filter_matches_conjugate_posterior():
    g = TimeGrid(steps=32)
    model = make_model("independent")
    out = simulate(model, g, RandomStream(seed=5, substream=0))
    est = particle_conditional_drift(model, out.observation, 20_000,
                                     RandomStream(seed=6, substream=0))
    t = g.left_times
    closed = out.observation.values[:-1, 0] / (1.0 + t)
    assert np.max(np.abs(est.values.values[:, 0] - closed)) < 0.05


def test_particle_filter_rejects_feedback_models():
    g = TimeGrid(steps=8)
    model = make_model("linear-feedback")
    out = simulate(model, g, STREAM)
    with pytest.raises(UsageError):
        particle_conditional_drift(model, out.observation, 200, STREAM)


def test_particle_filter_requires_minimum_cloud():
    g = TimeGrid(steps=8)
    model = make_model("independent")
    out = simulate(model, g, STREAM)
    with pytest.raises(UsageError):
        particle_conditional_drift(model, out.observation, 50, STREAM)


# ---------------------------------------------------------------- exact filters

def test_independent_closed_form_matches_sufficient_statistic():
    g = TimeGrid(steps=16)
    model = make_model("independent")
    sim = simulate_ensemble(model, g, 32, STREAM)
    filt = ensemble_conditional_drift(model, sim)
    assert filt.method == "exact-gaussian"
    t = g.left_times
    closed = sim.U[:, :-1, 0] / (1.0 + t)
    assert np.allclose(filt.values[:, :, 0], closed, atol=1e-12)


def test_truncnorm_mean_against_quadrature():
    xi = np.linspace(0.0, 1.0, 200_001)
    for mu, sigma in [(0.3, 1.7), (-0.4, 2.0), (1.8, 0.9), (0.5, 5.0)]:
        like = np.exp(-0.5 * ((xi - mu) / sigma) ** 2)
        want = np.trapezoid(xi * like, xi) / np.trapezoid(like, xi)
        got = _truncnorm_mean01(np.array([mu]), sigma)[0]
        assert got == pytest.approx(want, abs=1e-6)


def test_tsirelson_filter_head_and_tail():
    g = TimeGrid(steps=32)
    model = make_model("tsirelson", levels=3)
    sim = simulate_ensemble(model, g, 16, STREAM)
    filt = ensemble_conditional_drift(model, sim)
    assert filt.method == "exact-head"
    n0 = round(model.level_times()[0] * g.steps)  # 4 steps on the seed segment
    # prior mean before any observation
    assert np.all(filt.values[:, 0, 0] == 0.5)
    # the seed segment estimate stays inside [0, 1]
    assert np.all((filt.values[:, :n0, 0] >= 0) & (filt.values[:, :n0, 0] <= 1))
    # beyond the seed segment the drift is observation-adapted: estimate == drift
    assert np.array_equal(filt.values[:, n0:, :], sim.drift[:, n0:, :])
    # head values against the truncated-normal posterior of the uniform seed
    for k in [1, 2, 3]:
        t = k * g.dt
        want = _truncnorm_mean01(sim.U[:, k, 0] / t, 1.0 / np.sqrt(t))
        assert np.allclose(filt.values[:, k, 0], want, atol=1e-12)


def test_identity_feedback_for_adapted_models():
    g = TimeGrid(steps=16)
    for name in ["zero", "deterministic", "linear-feedback"]:
        model = make_model(name)
        out = simulate(model, g, STREAM)
        est = identity_feedback(out.drift)
        assert np.array_equal(est.values.values, out.drift.values)
        sim = simulate_ensemble(model, g, 4, STREAM)
        filt = ensemble_conditional_drift(model, sim)
        assert filt.method == "identity-feedback"
        assert np.array_equal(filt.values, sim.drift)


# ---------------------------------------------------------------- innovation

def test_innovation_zero_drift_is_observation():
    g = TimeGrid(steps=16)
    out = simulate(make_model("zero"), g, STREAM)
    Z = innovation(out.observation, identity_feedback(out.drift))
    assert np.array_equal(Z.values, out.observation.values)
    assert Z.values[0, 0] == 0.0


@pytest.mark.parametrize("name", ["deterministic", "linear-feedback"])
def test_innovation_recovers_brownian_for_adapted_models(name):
    g = TimeGrid(steps=64)
    out = simulate(make_model(name), g, STREAM)
    Z = innovation(out.observation, identity_feedback(out.drift))
    assert np.allclose(Z.values, out.brownian.values, atol=1e-12)


def test_innovation_shape_mismatch():
    g = TimeGrid(steps=8)
    out = simulate(make_model("zero"), g, STREAM)
    bad = identity_feedback(AdaptedSamples(TimeGrid(steps=4), np.zeros((4, 1))))
    with pytest.raises(ShapeError):
        innovation(out.observation, bad)


# ---------------------------------------------------------------- regression

def _toy_paths(m, N, seed):
    rng = np.random.default_rng(seed)
    Z = cumsum0(rng.normal(0, 0.1, size=(m, N)).T).T  # not used; see below
    # build (m, N+1, 1) innovation-like paths
    inc = rng.normal(0.0, 0.3, size=(m, N, 1))
    Z = np.concatenate([np.zeros((m, 1, 1)), np.cumsum(inc, axis=1)], axis=1)
    return Z, rng


def test_second_level_reproduces_constants():
    Z, rng = _toy_paths(400, 6, seed=1)
    y = np.full((400, 6, 1), 3.25)
    w = rng.uniform(0.5, 1.5, size=400)
    fit = second_level_conditional(Z, y, w, k=4, basis=BasisSpec(window=3))
    assert np.allclose(fit.fitted, 3.25, atol=1e-10)


def test_second_level_is_fixed_point_on_linear_responses():
    Z, rng = _toy_paths(2000, 6, seed=2)
    y = np.zeros((2000, 6, 1))
    k = 4
    y[:, k, 0] = 2.0 + 3.0 * (Z[:, k, 0] - Z[:, k - 1, 0]) + 0.5 * Z[:, k, 0]
    w = rng.uniform(0.5, 1.5, size=2000)
    fit = second_level_conditional(Z, y, w, k=k, basis=BasisSpec(window=3))
    assert np.max(np.abs(fit.fitted[:, 0] - y[:, k, 0])) < 1e-4


def test_second_level_tower_property_and_jensen_ordering():
    Z, rng = _toy_paths(3000, 8, seed=3)
    y = np.sin(Z[:, :-1, :] * 2.0) + 0.2 * rng.normal(size=(3000, 8, 1))
    w = rng.uniform(0.1, 2.0, size=3000)
    wn = w / w.sum()
    for k in [0, 2, 7]:
        fit = second_level_conditional(Z, y, w, k=k, basis=BasisSpec(window=4))
        assert wn @ fit.fitted[:, 0] == pytest.approx(wn @ y[:, k, 0], abs=1e-10)
        assert wn @ fit.fitted[:, 0] ** 2 <= wn @ y[:, k, 0] ** 2 + 1e-10


def test_second_level_guards():
    Z, rng = _toy_paths(50, 4, seed=4)
    y = np.zeros((50, 4, 1))
    with pytest.raises(UsageError):
        second_level_conditional(Z, y, np.ones(50), k=3, basis=BasisSpec(window=8))
    with pytest.raises(DegeneracyError):
        second_level_conditional(Z, y, np.zeros(50), k=0, basis=BasisSpec(window=1))


def test_step_features_shapes():
    Z = np.zeros((10, 5, 1))
    spec = BasisSpec(window=3, include_squares=True)
    assert step_features(Z, 0, spec).shape == (10, 1 + 2 * 1)  # intercept, level, level^2
    assert step_features(Z, 4, spec).shape == (10, 1 + 2 * 4)  # + 3 increments
