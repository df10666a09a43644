"""Exact finite oracle: quantized noise, atom enumeration, entropy identities.

Replacing Gaussian increments by a moment-matched finite quadrature makes
the whole pipeline exactly enumerable: every (noise sequence, auxiliary
value) combination is an atom with a known probability, conditional
expectations are probability-weighted group means, and relative entropies
are finite sums.  The enumeration validates every Monte Carlo estimator.

A structural fact shapes what the oracle can and cannot exhibit: on a
discrete grid the map from the observation to its innovation is always
invertible (reconstruct U step by step from Z and the known filter
functions), so systems built from exact filters always satisfy the
entropy equality, and they are asserted to.  Strict-gap instances need an
observation map that genuinely erases information; the bundled witness
erases the sign of the terminal innovation of a one-sided feedback drift,
the finite stand-in for the information loss that, in continuous time,
only pathological drifts can produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import LANE_AUX, LANE_NOISE, RandomStream, TimeGrid
from .errors import (
    AbsoluteContinuityError,
    ConfigurationError,
    DegeneracyError,
    UsageError,
)
from .filtering import EnsembleFilter
from .girsanov import log_weights_ensemble
from .models import DriftModel, EnsembleSimulation, run_euler

__all__ = [
    "ROUND_DECIMALS",
    "QuantizedNoise",
    "AtomSpace",
    "FiniteSystem",
    "DiscreteVerdict",
    "CrosscheckReport",
    "gauss_quantized",
    "canonical_labels",
    "enumerate_atoms",
    "estimator_crosscheck",
    "match_atoms",
    "exact_relative_entropy",
    "dpi_verdict",
    "conditional_energy_by_grouping",
    "sample_quantized_ensemble",
    "finite_bayes_filter",
    "base_entropy_mc",
    "pushforward_entropy_mc",
    "WitnessDrift",
    "witness_space",
    "witness_labels",
    "random_finite_system",
    "system_battery",
]

# rounding that defines trajectory-value equivalence classes
ROUND_DECIMALS = 12

MAX_ATOMS = 1_000_000


@dataclass(frozen=True)
class QuantizedNoise:
    """Finite stand-in for a Wiener increment: nodes and probabilities.

    The default constructor matches Gaussian moments up to order 2m-1 via
    Gauss-Hermite quadrature scaled by sqrt(dt).
    """

    nodes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if nodes.shape != probs.shape or nodes.ndim != 1:
            raise ConfigurationError("nodes and probabilities must be equal-length vectors")
        if np.any(probs <= 0):
            raise ConfigurationError("node probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ConfigurationError("node probabilities must sum to one")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "probs", probs)

    @property
    def count(self) -> int:
        return len(self.nodes)


def gauss_quantized(m: int, dt: float) -> QuantizedNoise:
    """Moment-matched m-point quantization of an N(0, dt) increment."""
    if m < 2:
        raise ConfigurationError(f"need at least two nodes, got {m}")
    x, w = np.polynomial.hermite_e.hermegauss(m)
    probs = w / w.sum()
    return QuantizedNoise(x * np.sqrt(dt), probs)


@dataclass(frozen=True)
class FiniteSystem:
    """A finite probability space with a density and an observation map.

    probs: base probabilities P(a); density: the normalized tilt dnu/dP;
    z_labels: observation classes; u_labels: trajectory classes of the
    quantity whose recoverability is being asked about; energy_terms:
    per-atom energy functional entering the energy field of the verdict.
    """

    probs: np.ndarray
    density: np.ndarray
    z_labels: np.ndarray
    u_labels: np.ndarray
    energy_terms: np.ndarray
    tag: str = ""

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        rho = np.asarray(self.density, dtype=float)
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ConfigurationError("atom probabilities must sum to one")
        if np.any(rho < 0):
            raise ConfigurationError("density must be nonnegative")
        mass = math.fsum(p * rho)
        if abs(mass - 1.0) > 1e-9:
            rho = rho / mass
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "density", rho)


@dataclass(frozen=True)
class DiscreteVerdict:
    """Exact entropies and measurability booleans of a finite system."""

    base_entropy: float
    pushforward_entropy: float
    energy: float
    density_z_measurable: bool
    u_recoverable_from_z: bool

    @property
    def gap(self) -> float:
        return self.base_entropy - self.pushforward_entropy

    @property
    def equality(self) -> bool:
        return abs(self.gap) <= 1e-12


@dataclass(frozen=True)
class AtomSpace:
    """Exhaustive pipeline enumeration over (noise sequence, aux) atoms."""

    grid: TimeGrid
    noise: QuantizedNoise
    model_name: str
    probs: np.ndarray
    sim: EnsembleSimulation
    uhat: np.ndarray
    Z: np.ndarray
    log_density: np.ndarray
    density: np.ndarray
    z_labels: np.ndarray
    u_labels: np.ndarray

    @property
    def atoms(self) -> int:
        return len(self.probs)

    def energy_terms(self) -> np.ndarray:
        return np.einsum("akd,akd->a", self.uhat, self.uhat) * self.grid.dt

    def system(self, relabel: Optional[Callable[[np.ndarray], np.ndarray]] = None,
               tag: str = "") -> FiniteSystem:
        """View as a FiniteSystem, optionally through a lossy observation map.

        relabel receives the stacked innovation values (atoms, N+1, d) and
        returns one label per atom; the default keeps the full innovation
        trajectory classes.
        """
        z_labels = self.z_labels if relabel is None else canonical_labels(relabel(self.Z))
        return FiniteSystem(self.probs, self.density, z_labels, self.u_labels,
                            self.energy_terms(), tag or self.model_name)


def canonical_labels(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys)
    if keys.ndim == 1:
        keys = keys[:, None]
    _, labels = np.unique(np.round(keys.reshape(len(keys), -1), ROUND_DECIMALS),
                          axis=0, return_inverse=True)
    return labels


def _refine_labels(labels: np.ndarray, column: np.ndarray) -> np.ndarray:
    """Refine a partition by one more (rounded) coordinate."""
    col = np.round(column, ROUND_DECIMALS)
    pairs = np.stack([labels.astype(float), col], axis=1)
    _, out = np.unique(pairs, axis=0, return_inverse=True)
    return out


def _group_mean(labels: np.ndarray, weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Probability-weighted group means, broadcast back onto members."""
    wsum = np.bincount(labels, weights=weights)
    vsum = np.bincount(labels, weights=weights * values)
    return (vsum / wsum)[labels]


def enumerate_atoms(model: DriftModel, grid: TimeGrid, noise: QuantizedNoise,
                    aux_values: Optional[Sequence[float]] = None,
                    aux_probs: Optional[Sequence[float]] = None,
                    max_atoms: int = MAX_ATOMS) -> AtomSpace:
    """Enumerate the quantized pipeline exactly.

    The model's auxiliary randomness, if any, is replaced by the finite
    variable (aux_values, aux_probs).  The filtered drift is the exact
    conditional expectation, computed by grouping atoms on identical
    observation prefixes and probability-averaging the drift.
    """
    if model.needs_hidden():
        raise ConfigurationError(f"model {model.name} has a continuous hidden signal; "
                                 "enumeration needs finitely many scenarios")
    if model.d != 1:
        raise ConfigurationError("enumeration handles dimension 1")
    if model.aux_dim and aux_values is None:
        raise ConfigurationError(f"model {model.name} needs finite aux values to enumerate")
    n_aux = len(aux_values) if model.aux_dim else 1
    N = grid.steps
    atoms = noise.count**N * n_aux
    if atoms > max_atoms:
        raise ConfigurationError(f"{atoms} atoms exceed the bound {max_atoms}")

    node_grids = np.meshgrid(*([noise.nodes] * N), indexing="ij")
    dB = np.stack([g.reshape(-1) for g in node_grids], axis=1)[:, :, None]
    prob_grids = np.meshgrid(*([noise.probs] * N), indexing="ij")
    p_noise = np.prod([g.reshape(-1) for g in prob_grids], axis=0)

    if model.aux_dim:
        if aux_probs is None:
            aux_probs = np.full(n_aux, 1.0 / n_aux)
        aux_probs = np.asarray(aux_probs, dtype=float)
        dB = np.repeat(dB, n_aux, axis=0)
        aux = np.tile(np.asarray(aux_values, dtype=float), noise.count**N)[:, None]
        probs = np.repeat(p_noise, n_aux) * np.tile(aux_probs, noise.count**N)
    else:
        aux = np.empty((atoms, 0))
        probs = p_noise

    sim = run_euler(model, grid, dB, aux)

    # exact filtered drift by observation-prefix grouping
    uhat = np.empty((atoms, N, 1))
    labels = np.zeros(atoms, dtype=np.int64)  # U_0 = 0 for all atoms
    for k in range(N):
        labels = _refine_labels(labels, sim.U[:, k, 0]) if k > 0 else labels
        uhat[:, k, 0] = _group_mean(labels, probs, sim.drift[:, k, 0])
    Z = sim.U - np.concatenate(
        [np.zeros((atoms, 1, 1)), np.cumsum(uhat * grid.dt, axis=1)], axis=1)

    log_density = log_weights_ensemble(uhat, Z, grid.dt)
    raw = np.exp(log_density)
    density = raw / math.fsum(probs * raw)

    z_labels = canonical_labels(Z[:, 1:, 0])
    u_labels = canonical_labels(sim.U[:, 1:, 0])
    return AtomSpace(grid, noise, model.name, probs, sim, uhat, Z,
                     log_density, density, z_labels, u_labels)


def exact_relative_entropy(p: np.ndarray, q: np.ndarray) -> float:
    """sum p log(p/q) over aligned finite laws, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise UsageError("laws must be aligned on the same support")
    if np.any((p > 0) & (q <= 0)):
        raise AbsoluteContinuityError("p puts mass where q vanishes")
    mask = p > 0
    return float(math.fsum(p[mask] * np.log(p[mask] / q[mask])))


def dpi_verdict(system: FiniteSystem) -> DiscreteVerdict:
    """Exact entropies of the tilt before and after the observation map.

    The pushforward entropy can never exceed the base entropy, with
    equality exactly when the density is constant on observation classes;
    both sides of that equivalence are computed independently and reported.
    """
    p, rho = system.probs, system.density
    nz = rho > 0
    base = float(math.fsum(p[nz] * rho[nz] * np.log(rho[nz])))

    labels = system.z_labels
    p_push = np.bincount(labels, weights=p)
    q_push = np.bincount(labels, weights=p * rho)
    push = exact_relative_entropy(q_push, p_push)

    energy = 0.5 * float(math.fsum(p * rho * system.energy_terms))

    cls_min = np.full(labels.max() + 1, np.inf)
    cls_max = np.full(labels.max() + 1, -np.inf)
    np.minimum.at(cls_min, labels, rho)
    np.maximum.at(cls_max, labels, rho)
    spread = cls_max - cls_min
    measurable = bool(np.all(spread <= 1e-9 * np.maximum(1.0, cls_max)))

    u_first = {}
    recoverable = True
    for lab, u in zip(labels.tolist(), system.u_labels.tolist()):
        if lab in u_first:
            if u_first[lab] != u:
                recoverable = False
                break
        else:
            u_first[lab] = u

    return DiscreteVerdict(base, push, energy, measurable, recoverable)


def conditional_energy_by_grouping(space: AtomSpace) -> float:
    """Exact half-energy of the innovation-conditional filtered drift.

    Conditions on the exact innovation-prefix classes under the tilted
    probabilities; for pipeline systems this equals the plain tilted
    energy, because the innovation prefix determines the observation
    prefix on a discrete grid.
    """
    nu = space.probs * space.density
    N = space.grid.steps
    total = 0.0
    labels = np.zeros(space.atoms, dtype=np.int64)
    for k in range(N):
        labels = _refine_labels(labels, space.Z[:, k, 0]) if k > 0 else labels
        if nu.sum() <= 0:
            raise DegeneracyError("tilted measure has no mass")
        cond = _group_mean_safe(labels, nu, space.uhat[:, k, 0])
        total += float(math.fsum(nu * cond**2)) * space.grid.dt
    return 0.5 * total


def _group_mean_safe(labels, weights, values):
    wsum = np.bincount(labels, weights=weights)
    vsum = np.bincount(labels, weights=weights * values)
    out = np.zeros_like(wsum)
    good = wsum > 0
    out[good] = vsum[good] / wsum[good]
    return out[labels]


# --------------------------------------------------------------------- MC side

def sample_quantized_ensemble(model: DriftModel, grid: TimeGrid, size: int,
                              stream: RandomStream, noise: QuantizedNoise,
                              aux_values: Optional[Sequence[float]] = None,
                              aux_probs: Optional[Sequence[float]] = None
                              ) -> EnsembleSimulation:
    """Monte Carlo sampling of the quantized pipeline (same Euler recursion)."""
    N = grid.steps
    dB = np.empty((size, N, 1))
    aux = np.empty((size, model.aux_dim))
    cum_noise = np.cumsum(noise.probs)
    if model.aux_dim:
        if aux_values is None:
            raise ConfigurationError("finite aux values required")
        aux_values = np.asarray(aux_values, dtype=float)
        aux_probs = (np.full(len(aux_values), 1.0 / len(aux_values))
                     if aux_probs is None else np.asarray(aux_probs, dtype=float))
        cum_aux = np.cumsum(aux_probs)
    for i in range(size):
        s = RandomStream(stream.seed, stream.substream + i)
        u = s.lane(LANE_NOISE).generator().random(N)
        dB[i, :, 0] = noise.nodes[np.searchsorted(cum_noise, u)]
        if model.aux_dim:
            ua = s.lane(LANE_AUX).generator().random()
            aux[i] = aux_values[np.searchsorted(cum_aux, ua)]
    return run_euler(model, grid, dB, aux)


def finite_bayes_filter(model: DriftModel, sim: EnsembleSimulation,
                        noise: QuantizedNoise, aux_values: Sequence[float],
                        aux_probs: Optional[Sequence[float]] = None) -> EnsembleFilter:
    """Exact per-path conditional drift for finite-aux exogenous models.

    The drift must be a function of (aux, time) alone; the posterior over
    the finite aux variable given the observation prefix then follows from
    the quantized-noise likelihood of the residual increments.
    """
    if model.reads_observation or model.needs_hidden():
        raise UsageError("finite Bayes filter needs an exogenous finite-aux drift")
    grid = sim.grid
    N, m = grid.steps, sim.size
    aux_values = np.asarray(aux_values, dtype=float)
    n_aux = len(aux_values)
    aux_probs = (np.full(n_aux, 1.0 / n_aux) if aux_probs is None
                 else np.asarray(aux_probs, dtype=float))

    # hypothesis drift tables (n_aux, N): exogenous, so path-independent
    zeros = np.zeros((n_aux, N + 1, 1))
    state = model.start(grid, aux_values[:, None], None)
    hypo = np.empty((n_aux, N))
    for k in range(N):
        hypo[:, k] = model.drift(k, grid, zeros, zeros, aux_values[:, None], None, state)[:, 0]

    log_pmf = {round(float(n), ROUND_DECIMALS): math.log(p)
               for n, p in zip(noise.nodes, noise.probs)}

    def loglik(residual):
        key = np.round(residual, ROUND_DECIMALS)
        out = np.full(residual.shape, -np.inf)
        for node, lp in log_pmf.items():
            out = np.where(np.isclose(key, node, rtol=0, atol=10.0**-ROUND_DECIMALS), lp, out)
        return out

    post = np.tile(np.log(aux_probs), (m, 1))  # log posterior per path
    out = np.empty((m, N, 1))
    for k in range(N):
        w = np.exp(post - post.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        out[:, k, 0] = w @ hypo[:, k]
        residual = sim.dU[:, k, 0][:, None] - hypo[:, k][None, :] * grid.dt
        post = post + loglik(residual)
        if not np.all(np.isfinite(post.max(axis=1))):
            raise DegeneracyError("no aux hypothesis explains an observed increment", step=k)
    return EnsembleFilter(grid, out, "finite-bayes")


def base_entropy_mc(log_weights: np.ndarray) -> tuple[float, float]:
    """Plug-in estimate of the base relative entropy E_nu[log density].

    The density is self-normalized: rho_i = exp(l_i) / mean exp(l).
    Returns (estimate, delta-method standard error).
    """
    lw = np.asarray(log_weights, dtype=float)
    M = len(lw)
    top = lw.max()
    r = np.exp(lw - top)
    rbar = r.mean()
    rho = r / rbar
    est = float(np.mean(rho * np.log(np.where(rho > 0, rho, 1.0))))
    # influence function of T = E[rho log rho] under the empirical measure
    infl = rho * np.log(np.where(rho > 0, rho, 1.0)) - est - (rho - 1.0) * (est + 1.0)
    se = float(np.std(infl, ddof=1) / np.sqrt(M))
    return est, se


def pushforward_entropy_mc(log_weights: np.ndarray, labels: np.ndarray
                           ) -> tuple[float, float]:
    """Plug-in estimate of the pushforward relative entropy over classes."""
    lw = np.asarray(log_weights, dtype=float)
    labels = np.asarray(labels)
    M = len(lw)
    top = lw.max()
    r = np.exp(lw - top)
    rho = r / r.mean()
    p_hat = np.bincount(labels) / M
    q_hat = np.bincount(labels, weights=rho) / M
    good = p_hat > 0
    ratio = np.zeros_like(p_hat)
    ratio[good] = q_hat[good] / p_hat[good]
    logratio = np.log(np.where(ratio > 0, ratio, 1.0))
    est = float(np.sum(q_hat * logratio))
    # influence: d/dF of sum_c q_c log(q_c / p_c)
    lr_i = logratio[labels]
    ratio_i = ratio[labels]
    infl = rho * (lr_i + 1.0) - ratio_i - rho * (est + 1.0) + 1.0
    se = float(np.std(infl, ddof=1) / np.sqrt(M))
    return est, se


def match_atoms(space: AtomSpace, sim: EnsembleSimulation,
                aux_values: Optional[Sequence[float]] = None) -> np.ndarray:
    """Atom index of each sampled quantized path (exact lattice lookup)."""
    noise = space.noise
    order = np.argsort(noise.nodes)
    node_idx = order[np.searchsorted(np.sort(noise.nodes), sim.dB[:, :, 0])]
    powers = noise.count ** np.arange(space.grid.steps - 1, -1, -1)
    flat = (node_idx * powers).sum(axis=1)
    if aux_values is not None and sim.aux.shape[1]:
        aux_values = np.asarray(aux_values, dtype=float)
        return flat * len(aux_values) + np.searchsorted(aux_values, sim.aux[:, 0])
    return flat


@dataclass(frozen=True)
class CrosscheckReport:
    """Monte Carlo estimates against their enumeration counterparts."""

    base_entropy_rel_error: float
    entropy_rel_error: float
    energy_rel_error: float
    filter_deviation: float
    tolerance: float
    passed: bool


def estimator_crosscheck(space: AtomSpace, sim: EnsembleSimulation,
                         uhat: np.ndarray, mc_base: float, mc_push: float,
                         mc_energy: float, tolerance: float = 0.05,
                         aux_values: Optional[Sequence[float]] = None
                         ) -> CrosscheckReport:
    """Deviation report of a quantized Monte Carlo run against enumeration.

    Compares the plug-in entropy estimates and the weighted energy with
    their exact values, and the per-path filter values with the grouped
    conditional expectations on matched atoms.
    """
    exact = dpi_verdict(space.system())
    atom = match_atoms(space, sim, aux_values)
    filter_dev = float(np.max(np.abs(uhat - space.uhat[atom])))
    rel = lambda got, want: abs(got - want) / max(abs(want), 1e-12)
    base_rel = rel(mc_base, exact.base_entropy)
    push_rel = rel(mc_push, exact.pushforward_entropy)
    energy_rel = rel(mc_energy, exact.energy)
    passed = bool(push_rel < tolerance and energy_rel < tolerance
                  and filter_dev < 1e-8)
    return CrosscheckReport(base_rel, push_rel, energy_rel, filter_dev,
                            tolerance, passed)


# --------------------------------------------------------------------- witness

class WitnessDrift(DriftModel):
    """One-sided feedback: no drift on the first step, a unit kick on the
    second step when the first observed increment was positive.

    Observation-adapted, so the filtered drift is the drift itself and the
    tilt density is a function of the observation path.
    """

    name = "witness-one-sided"
    kind = "feedback"
    reads_observation = True
    observation_adapted = True

    def __init__(self, kick=1.0):
        self.kick = float(kick)

    def parameters(self):
        return {"kick": self.kick}

    def drift(self, k, grid, U, B, aux, hidden, state):
        m = U.shape[0]
        if k == 0:
            return np.zeros((m, 1))
        return self.kick * (U[:, 1, 0] > 0).astype(float)[:, None]


def witness_labels(Z: np.ndarray) -> np.ndarray:
    """Information-erasing observation: keep only |Z(1)|, forget its sign."""
    return np.abs(Z[:, -1, 0])


def witness_grid() -> TimeGrid:
    return TimeGrid(steps=2)


def witness_space(kick: float = 1.0) -> tuple[AtomSpace, FiniteSystem]:
    """The bundled strict-gap witness: two-step one-sided feedback drift on
    two-point noise, observed only through the magnitude of the terminal
    innovation.

    Colliding atoms carry different densities (the one-sided kick breaks
    the symmetry), so the erased observation strictly loses entropy.
    """
    grid = witness_grid()
    noise = gauss_quantized(2, grid.dt)
    space = enumerate_atoms(WitnessDrift(kick), grid, noise)
    return space, space.system(relabel=witness_labels, tag="information-erasing")


# --------------------------------------------------------------------- battery

def random_finite_system(rng: np.random.Generator, kind: str) -> FiniteSystem:
    """One random instance for the data-processing battery.

    kind "pipeline": an enumerated drift model (density is an observation
    functional; equality must hold).  kind "erasure": the same but observed
    through a lossy map (strict gap unless symmetries align).  kind
    "abstract": random density and random observation classes.
    """
    if kind == "pipeline":
        space = _random_pipeline_space(rng)
        return space.system(tag="pipeline")
    if kind == "erasure":
        space = _random_pipeline_space(rng, force_drift=True)
        keep = rng.integers(1, space.grid.steps + 1)
        sign_blind = bool(rng.integers(0, 2))

        def relabel(Z, keep=keep, sign_blind=sign_blind):
            vals = Z[:, keep, 0]
            return np.abs(vals) if sign_blind else np.round(vals, 1)

        return space.system(relabel=relabel, tag="erasure")
    if kind == "abstract":
        atoms = int(rng.integers(6, 40))
        probs = rng.dirichlet(np.ones(atoms) * 2.0)
        classes = int(rng.integers(2, max(3, atoms // 2)))
        labels = rng.integers(0, classes, size=atoms)
        if rng.integers(0, 2):
            # density constant on classes: equality instance
            class_rho = rng.uniform(0.2, 3.0, size=classes)
            rho = class_rho[labels]
        else:
            rho = rng.uniform(0.2, 3.0, size=atoms)
        rho = rho / np.sum(probs * rho)
        u_labels = np.arange(atoms)
        return FiniteSystem(probs, rho, labels, u_labels, np.zeros(atoms), tag="abstract")
    raise UsageError(f"unknown battery kind {kind!r}")


def _random_pipeline_space(rng: np.random.Generator, force_drift: bool = False) -> AtomSpace:
    from .models import DeterministicDrift, LinearFeedback  # local to avoid cycle noise

    N = int(rng.integers(2, 4))
    grid = TimeGrid(steps=N)
    m = int(rng.integers(2, 4))
    noise = gauss_quantized(m, grid.dt)
    choice = rng.integers(0 if not force_drift else 1, 3)
    if choice == 0:
        model = DeterministicDrift(shape="constant", value=float(rng.uniform(-1.5, 1.5)))
    elif choice == 1:
        model = LinearFeedback(a=float(rng.uniform(0.2, 2.0)))
    else:
        model = WitnessDrift(kick=float(rng.uniform(0.5, 2.0)))
    return enumerate_atoms(model, grid, noise)


def system_battery(count: int = 100, seed: int = 7) -> list[FiniteSystem]:
    """Deterministic battery mixing equality and strict-gap instances."""
    rng = np.random.default_rng(seed)
    kinds = (["pipeline"] * (count * 2 // 5)
             + ["erasure"] * (count * 3 // 10)
             + ["abstract"] * (count - count * 2 // 5 - count * 3 // 10))
    return [random_finite_system(rng, k) for k in kinds]
