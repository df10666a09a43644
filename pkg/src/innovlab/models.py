"""Drift models defining adapted perturbations of identity U = B + int u' ds.

Each model produces, step by step, the drift rate u'_k from the histories
available at the left endpoint t_k (observation and Brownian values up to
and including t_k, auxiliary randomness independent of B, and any hidden
state).  One Euler recursion

    U_{k+1} = U_k + u'_k dt + dB_k

is shared by the Gaussian sampler, the quantized-noise sampler and the
exact enumeration oracle, so that all pipelines integrate the very same
discrete dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    LANE_AUX,
    LANE_BROWNIAN,
    LANE_HIDDEN,
    AdaptedSamples,
    Path,
    RandomStream,
    TimeGrid,
)
from .errors import ConfigurationError

__all__ = [
    "DriftModel",
    "SimulationOutput",
    "EnsembleSimulation",
    "simulate",
    "simulate_ensemble",
    "run_euler",
    "drift_given_histories",
    "make_model",
    "list_models",
    "time_function",
    "MODEL_NAMES",
]


def time_function(shape: str = "constant", **coef) -> Callable[[np.ndarray], np.ndarray]:
    """Small expression set for deterministic time profiles h(t)."""
    if shape == "constant":
        value = float(coef.get("value", 1.0))
        return lambda t: np.full_like(np.asarray(t, dtype=float), value)
    if shape == "linear":
        intercept = float(coef.get("intercept", 0.0))
        slope = float(coef.get("slope", 1.0))
        return lambda t: intercept + slope * np.asarray(t, dtype=float)
    if shape == "sine":
        amplitude = float(coef.get("amplitude", 1.0))
        frequency = float(coef.get("frequency", 1.0))
        return lambda t: amplitude * np.sin(2.0 * np.pi * frequency * np.asarray(t, dtype=float))
    raise ConfigurationError(f"unknown time profile {shape!r}")


class DriftModel:
    """Base class; subclasses fill in the per-step drift rule.

    Attributes:
        name: registry identifier.
        kind: one of "exogenous", "feedback", "hidden-signal".
        d: state dimension.
        aux_dim: number of auxiliary draws independent of B (0 if none).
        reads_observation: whether the drift rule looks at U's history.
        observation_adapted: whether u' is a function of U's history alone,
            in which case the conditional drift equals the drift itself.
    """

    name = "abstract"
    kind = "exogenous"
    d = 1
    aux_dim = 0
    reads_observation = False
    observation_adapted = False

    def parameters(self) -> dict:
        return {}

    def validate(self, grid: TimeGrid) -> None:
        pass

    def sample_aux(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Draw the auxiliary inputs, shape (m, aux_dim)."""
        return np.empty((m, 0))

    def needs_hidden(self) -> bool:
        return False

    def sample_hidden(self, rng: np.random.Generator, grid: TimeGrid, m: Optional[int] = None) -> np.ndarray:
        """Hidden driving noise, shape (N,) or (m, N); only if needs_hidden."""
        raise NotImplementedError

    def start(self, grid: TimeGrid, aux: np.ndarray, hidden: Optional[np.ndarray]) -> dict:
        """Initialize the per-ensemble mutable state for the Euler loop."""
        return {}

    def drift(self, k: int, grid: TimeGrid, U: np.ndarray, B: np.ndarray,
              aux: np.ndarray, hidden: Optional[np.ndarray], state: dict) -> np.ndarray:
        """Drift rate on [t_k, t_{k+1}), shape (m, d).

        U and B are the value arrays (m, N+1, d); only columns 0..k may be
        read (adaptedness by construction).
        """
        raise NotImplementedError


class ZeroDrift(DriftModel):
    """u' = 0: the observation is the Brownian motion itself."""

    name = "zero"
    kind = "exogenous"
    observation_adapted = True

    def drift(self, k, grid, U, B, aux, hidden, state):
        return np.zeros((U.shape[0], self.d))


class DeterministicDrift(DriftModel):
    """u'_t = h(t) for a deterministic profile h."""

    name = "deterministic"
    kind = "exogenous"
    observation_adapted = True

    def __init__(self, shape="constant", **coef):
        self._shape = shape
        self._coef = dict(coef)
        self._h = time_function(shape, **coef)

    def parameters(self):
        return {"shape": self._shape, **self._coef}

    def h(self, t):
        return self._h(t)

    def drift(self, k, grid, U, B, aux, hidden, state):
        return np.full((U.shape[0], self.d), self._h(grid.left_times[k]))


class LinearFeedback(DriftModel):
    """u'_t = -a U_t: mean-reverting feedback on the observation."""

    name = "linear-feedback"
    kind = "feedback"
    reads_observation = True
    observation_adapted = True

    def __init__(self, a=1.0):
        self.a = float(a)

    def parameters(self):
        return {"a": self.a}

    def drift(self, k, grid, U, B, aux, hidden, state):
        return -self.a * U[:, k, :]


class KalmanBucy(DriftModel):
    """Hidden Ornstein-Uhlenbeck signal: dX = -beta X dt + sigma dV, u' = X.

    V is a Brownian motion independent of B; X_0 is drawn from the
    stationary law N(0, sigma^2 / (2 beta)) unless `x0_var` is given.
    """

    name = "kalman-bucy"
    kind = "hidden-signal"
    aux_dim = 1

    def __init__(self, beta=1.0, sigma=1.0, x0_var=None):
        if beta < 0:
            raise ConfigurationError(f"kalman-bucy needs beta >= 0, got {beta}")
        if sigma <= 0:
            raise ConfigurationError(f"kalman-bucy needs sigma > 0, got {sigma}")
        if beta == 0 and x0_var is None:
            raise ConfigurationError("kalman-bucy with beta = 0 needs an explicit x0_var")
        self.beta = float(beta)
        self.sigma = float(sigma)
        self.x0_var = float(x0_var) if x0_var is not None else self.sigma**2 / (2 * self.beta)

    def parameters(self):
        return {"beta": self.beta, "sigma": self.sigma, "x0_var": self.x0_var}

    def sample_aux(self, rng, m):
        return rng.normal(size=(m, 1))

    def needs_hidden(self):
        return True

    def sample_hidden(self, rng, grid, m=None):
        shape = grid.steps if m is None else (m, grid.steps)
        return rng.normal(0.0, np.sqrt(grid.dt), size=shape)

    def start(self, grid, aux, hidden):
        x0 = np.sqrt(self.x0_var) * aux[:, 0]
        return {"X": x0.copy()}

    def drift(self, k, grid, U, B, aux, hidden, state):
        u = state["X"][:, None].copy()
        # propagate the hidden signal past t_k once its drift value is out
        state["X"] = state["X"] * (1.0 - self.beta * grid.dt) + self.sigma * hidden[:, k]
        return u


class IndependentDrift(DriftModel):
    """u'_t = theta * g(t) with theta a standard Gaussian independent of B."""

    name = "independent"
    kind = "hidden-signal"
    aux_dim = 1

    def __init__(self, g_shape="constant", **coef):
        self._g_shape = g_shape
        self._coef = dict(coef)
        self._g = time_function(g_shape, **coef)

    def parameters(self):
        return {"g_shape": self._g_shape, **self._coef}

    def g(self, t):
        return self._g(t)

    def sample_aux(self, rng, m):
        return rng.normal(size=(m, 1))

    def drift(self, k, grid, U, B, aux, hidden, state):
        return aux[:, :1] * self._g(grid.left_times[k])


class Tsirelson(DriftModel):
    """Iterated fractional-part feedback over geometric level times.

    Level times t_j = 2^{-(K-j)}, j = 0..K.  On (t_j, t_{j+1}] the drift is
    the fractional part of the previous segment's observed slope; on the
    first segment (0, t_0] it is an independent uniform seed, standing in
    for the infinite past of the classical construction.
    """

    name = "tsirelson"
    kind = "hidden-signal"
    aux_dim = 1
    reads_observation = True

    def __init__(self, levels=8):
        levels = int(levels)
        if levels < 1:
            raise ConfigurationError(f"tsirelson needs at least one level, got {levels}")
        self.levels = levels

    def parameters(self):
        return {"levels": self.levels}

    def level_times(self):
        return [2.0 ** -(self.levels - j) for j in range(self.levels + 1)]

    def validate(self, grid):
        if grid.horizon != 1.0:
            raise ConfigurationError("tsirelson is defined on horizon 1")
        if grid.steps % 2**self.levels != 0:
            raise ConfigurationError(
                f"grid with {grid.steps} steps cannot represent level times "
                f"2^-{self.levels}; use a multiple of {2**self.levels}"
            )

    def sample_aux(self, rng, m):
        return rng.uniform(size=(m, 1))

    def start(self, grid, aux, hidden):
        # segment boundaries as step indices; t_{-1} := 0
        bounds = [0] + [round(t * grid.steps) for t in self.level_times()]
        return {"bounds": bounds, "slope": np.mod(aux[:, 0], 1.0)}

    def drift(self, k, grid, U, B, aux, hidden, state):
        bounds = state["bounds"]
        # entering a new segment: refresh the slope from the finished one
        if k in bounds[1:-1]:
            j = bounds.index(k)
            lo, hi = bounds[j - 1], bounds[j]
            span = (hi - lo) * grid.dt
            state["slope"] = np.mod((U[:, hi, 0] - U[:, lo, 0]) / span, 1.0)
        return state["slope"][:, None].copy()


@dataclass(frozen=True)
class SimulationOutput:
    """One simulated path of the pair (B, U) with its drift record.

    The identity dU_k = drift_k * dt + dB_k holds bit-exactly on the stored
    increment arrays; the Path values are prefix sums of exactly those
    increments.
    """

    brownian: Path
    observation: Path
    drift: AdaptedSamples
    aux: np.ndarray
    brownian_increments: np.ndarray
    observation_increments: np.ndarray


@dataclass(frozen=True)
class EnsembleSimulation:
    """Stacked simulation of m paths: arrays indexed (path, step, coord)."""

    model_name: str
    grid: TimeGrid
    dB: np.ndarray
    dU: np.ndarray
    drift: np.ndarray
    aux: np.ndarray
    U: np.ndarray
    B: np.ndarray
    hidden: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.dB.shape[0]

    def path(self, i: int) -> SimulationOutput:
        g = self.grid
        return SimulationOutput(
            brownian=Path(g, self.B[i]),
            observation=Path(g, self.U[i]),
            drift=AdaptedSamples(g, self.drift[i]),
            aux=self.aux[i],
            brownian_increments=self.dB[i],
            observation_increments=self.dU[i],
        )


def run_euler(model: DriftModel, grid: TimeGrid, dB: np.ndarray,
              aux: np.ndarray, hidden: Optional[np.ndarray] = None) -> EnsembleSimulation:
    """Integrate U = B + int u' ds for given noise increments and aux draws.

    dB has shape (m, N, d); aux has shape (m, aux_dim); hidden, when the
    model needs it, has shape (m, N).
    """
    model.validate(grid)
    m, N, d = dB.shape
    if d != model.d:
        raise ConfigurationError(f"model {model.name} has dimension {model.d}, noise has {d}")
    if model.needs_hidden() and hidden is None:
        raise ConfigurationError(f"model {model.name} needs hidden driving noise")
    dt = grid.dt
    U = np.zeros((m, N + 1, d))
    B = np.zeros((m, N + 1, d))
    drift = np.empty((m, N, d))
    dU = np.empty((m, N, d))
    state = model.start(grid, aux, hidden)
    for k in range(N):
        u = model.drift(k, grid, U, B, aux, hidden, state)
        drift[:, k, :] = u
        dU[:, k, :] = u * dt + dB[:, k, :]
        U[:, k + 1, :] = U[:, k, :] + dU[:, k, :]
        B[:, k + 1, :] = B[:, k, :] + dB[:, k, :]
    return EnsembleSimulation(model.name, grid, dB, dU, drift, aux, U, B, hidden)


def drift_given_histories(model: DriftModel, grid: TimeGrid, U: np.ndarray,
                          B: np.ndarray, aux: np.ndarray,
                          hidden: Optional[np.ndarray] = None) -> np.ndarray:
    """Replay the drift rule against externally supplied histories.

    Used to check adaptedness: for models that never read the observation,
    tampering with U must leave the drift record unchanged.
    """
    m, _, d = U.shape
    drift = np.empty((m, grid.steps, d))
    state = model.start(grid, aux, hidden)
    for k in range(grid.steps):
        drift[:, k, :] = model.drift(k, grid, U, B, aux, hidden, state)
    return drift


def simulate_ensemble(model: DriftModel, grid: TimeGrid, size: int,
                      stream: RandomStream) -> EnsembleSimulation:
    """Simulate `size` paths; path i draws from substream stream.substream + i."""
    model.validate(grid)
    N, d = grid.steps, model.d
    dB = np.empty((size, N, d))
    aux = np.empty((size, model.aux_dim))
    hidden = np.empty((size, N)) if model.needs_hidden() else None
    root = np.sqrt(grid.dt)
    for i in range(size):
        s = RandomStream(stream.seed, stream.substream + i)
        dB[i] = root * s.lane(LANE_BROWNIAN).generator().standard_normal((N, d))
        if model.aux_dim:
            aux[i] = model.sample_aux(s.lane(LANE_AUX).generator(), 1)[0]
        if hidden is not None:
            hidden[i] = model.sample_hidden(s.lane(LANE_HIDDEN).generator(), grid)
    return run_euler(model, grid, dB, aux, hidden)


def simulate(model: DriftModel, grid: TimeGrid, stream: RandomStream) -> SimulationOutput:
    """Simulate a single path driven by the given stream."""
    return simulate_ensemble(model, grid, 1, stream).path(0)


_REGISTRY = {
    "zero": ZeroDrift,
    "deterministic": DeterministicDrift,
    "linear-feedback": LinearFeedback,
    "kalman-bucy": KalmanBucy,
    "independent": IndependentDrift,
    "tsirelson": Tsirelson,
}

MODEL_NAMES = tuple(_REGISTRY)


def make_model(name: str, **params) -> DriftModel:
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}"
        ) from None
    return cls(**params)


def list_models() -> list[dict]:
    """Descriptors of the built-in models (name, kind, default parameters)."""
    out = []
    for name, cls in _REGISTRY.items():
        inst = cls() if name != "kalman-bucy" else cls(beta=1.0, sigma=1.0)
        out.append(
            {
                "name": name,
                "kind": inst.kind,
                "dimension": inst.d,
                "aux_dimension": inst.aux_dim,
                "observation_adapted": inst.observation_adapted,
                "parameters": inst.parameters(),
            }
        )
    return out
