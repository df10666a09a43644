import numpy as np
import pytest

from innovlab.core import RandomStream, TimeGrid
from innovlab.errors import ConfigurationError
from innovlab.models import (
    drift_given_histories,
    list_models,
    make_model,
    run_euler,
    simulate,
    simulate_ensemble,
)

STREAM = RandomStream(seed=606, substream=0)


def all_models():
    return [
        make_model("zero"),
        make_model("deterministic", shape="constant", value=1.0),
        make_model("deterministic", shape="sine", amplitude=0.7, frequency=2.0),
        make_model("linear-feedback", a=1.0),
        make_model("kalman-bucy", beta=1.0, sigma=1.0),
        make_model("independent"),
        make_model("tsirelson", levels=3),
    ]


def test_registry_contains_expected_names():
    names = {m["name"] for m in list_models()}
    assert {"zero", "kalman-bucy", "tsirelson"} <= names
    assert {"deterministic", "linear-feedback", "independent"} <= names


def test_unknown_model_rejected():
    with pytest.raises(ConfigurationError):
        make_model("brown")


def test_zero_drift_observation_equals_brownian():
    out = simulate(make_model("zero"), TimeGrid(steps=32), STREAM)
    assert np.array_equal(out.observation.values, out.brownian.values)


def test_deterministic_unit_drift_shifts_by_time():
    g = TimeGrid(steps=16)
    out = simulate(make_model("deterministic", shape="constant", value=1.0), g, STREAM)
    shift = out.observation.values[:, 0] - out.brownian.values[:, 0]
    assert shift == pytest.approx(g.times, abs=1e-12)


def test_linear_feedback_two_step_hand_computation():
    g = TimeGrid(steps=2)
    dB = np.array([[[1.0], [1.0]]])
    out = run_euler(make_model("linear-feedback", a=1.0), g, dB, np.empty((1, 0)))
    assert out.drift[0, :, 0] == pytest.approx([0.0, -1.0], abs=0)
    assert out.U[0, :, 0] == pytest.approx([0.0, 1.0, 1.5], abs=0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_consistency_identity_bit_exact_for_every_model(seed):
    g = TimeGrid(steps=8)
    for model in all_models():
        out = simulate_ensemble(model, g, 4, RandomStream(seed=seed, substream=0))
        assert np.array_equal(out.dU, out.drift * g.dt + out.dB), model.name


def test_simulation_is_reproducible():
    g = TimeGrid(steps=16)
    for model in all_models():
        a = simulate(model, g, RandomStream(seed=42, substream=3))
        b = simulate(model, g, RandomStream(seed=42, substream=3))
        assert np.array_equal(a.observation.values, b.observation.values), model.name
        assert np.array_equal(a.aux, b.aux), model.name


def test_ensemble_paths_match_single_path_runs():
    # path i of an ensemble is bit-identical to a lone run on substream i,
    # which is what makes results independent of worker partitioning
    g = TimeGrid(steps=8)
    for model in all_models():
        ens = simulate_ensemble(model, g, 5, RandomStream(seed=11, substream=0))
        lone = simulate(model, g, RandomStream(seed=11, substream=3))
        assert np.array_equal(ens.path(3).observation.values, lone.observation.values), model.name
        assert np.array_equal(ens.path(3).drift.values, lone.drift.values), model.name


def test_exogenous_models_ignore_observation_history():
    g = TimeGrid(steps=8)
    rng = np.random.default_rng(5)
    for model in all_models():
        if model.reads_observation:
            continue
        out = simulate_ensemble(model, g, 3, STREAM)
        tampered = out.U + rng.normal(size=out.U.shape)
        replay = drift_given_histories(model, g, tampered, out.B, out.aux, out.hidden)
        assert np.array_equal(replay, out.drift), model.name


def test_feedback_models_do_read_observation_history():
    g = TimeGrid(steps=8)
    model = make_model("linear-feedback", a=1.0)
    out = simulate_ensemble(model, g, 3, STREAM)
    tampered = out.U + 1.0
    replay = drift_given_histories(model, g, tampered, out.B, out.aux, out.hidden)
    assert not np.array_equal(replay, out.drift)


def test_tsirelson_drift_lies_in_unit_interval():
    g = TimeGrid(steps=64)
    out = simulate_ensemble(make_model("tsirelson", levels=4), g, 50, STREAM)
    assert np.all(out.drift >= 0.0)
    assert np.all(out.drift < 1.0)


def test_tsirelson_rejects_incompatible_grid():
    model = make_model("tsirelson", levels=4)
    with pytest.raises(ConfigurationError):
        simulate(model, TimeGrid(steps=100), STREAM)
    with pytest.raises(ConfigurationError):
        simulate(model, TimeGrid(steps=32, horizon=2.0), STREAM)


def test_tsirelson_slope_refresh_matches_definition():
    g = TimeGrid(steps=8)
    model = make_model("tsirelson", levels=2)
    out = simulate_ensemble(model, g, 7, STREAM)
    # levels K=2: t_0 = 1/4 (step 2), t_1 = 1/2 (step 4), t_2 = 1 (step 8)
    U = out.U[:, :, 0]
    slope1 = np.mod((U[:, 2] - U[:, 0]) / 0.25, 1.0)
    slope2 = np.mod((U[:, 4] - U[:, 2]) / 0.25, 1.0)
    assert out.drift[:, 2, 0] == pytest.approx(slope1, abs=0)
    assert out.drift[:, 3, 0] == pytest.approx(slope1, abs=0)
    assert out.drift[:, 4, 0] == pytest.approx(slope2, abs=0)
    assert out.drift[:, 7, 0] == pytest.approx(slope2, abs=0)


def test_kalman_bucy_hidden_signal_independent_of_brownian():
    M = 4000
    g = TimeGrid(steps=8)
    out = simulate_ensemble(make_model("kalman-bucy", beta=1.0, sigma=1.0), g, M, STREAM)
    # the drift record is the hidden path; correlate it with dB across paths
    for k in [0, 3, 7]:
        r = np.corrcoef(out.drift[:, k, 0], out.dB[:, k, 0])[0, 1]
        assert abs(r) < 4 / np.sqrt(M)


def test_kalman_bucy_parameter_validation():
    with pytest.raises(ConfigurationError):
        make_model("kalman-bucy", beta=-1.0, sigma=1.0)
    with pytest.raises(ConfigurationError):
        make_model("kalman-bucy", beta=1.0, sigma=0.0)
    with pytest.raises(ConfigurationError):
        make_model("kalman-bucy", beta=0.0, sigma=1.0)  # stationary prior undefined
    make_model("kalman-bucy", beta=0.0, sigma=1.0, x0_var=0.5)
