"""Closed-form Gaussian path laws for the linear model family.

For the linear models (zero, deterministic, linear-feedback, kalman-bucy,
independent) every discrete quantity of the pipeline -- drift, observation,
filtered drift, innovation -- is an affine function of a primitive Gaussian
vector, and the tilting exponential is the exponential of a quadratic form.
The innovation increments are therefore exactly Gaussian both under the
sampling measure and under the tilted measure, and relative entropies
against the reference law of independent N(0, dt) increments reduce to
finite-dimensional Gaussian algebra.

Everything here mirrors the *discrete* recursions of `models` and
`filtering` (same Euler steps, same filter gains), so the numbers are exact
for the simulated system rather than for its continuous-time limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import TimeGrid
from .errors import NumericalError, UnsupportedModelError
from .filtering import riccati_sequence
from .models import (
    DeterministicDrift,
    DriftModel,
    IndependentDrift,
    KalmanBucy,
    LinearFeedback,
    ZeroDrift,
)

__all__ = ["LinearGaussianSummary", "linear_gaussian_summary", "is_linear_model"]

LINEAR_MODELS = (ZeroDrift, DeterministicDrift, LinearFeedback, KalmanBucy, IndependentDrift)


def is_linear_model(model: DriftModel) -> bool:
    return isinstance(model, LINEAR_MODELS)


@dataclass(frozen=True)
class LinearGaussianSummary:
    """Exact Gaussian functionals of one linear model on one grid.

    innovation_kl: relative entropy of the innovation-increment law under
        the tilted measure against independent N(0, dt) increments.
    observation_kl: relative entropy of the observation-increment law under
        the sampling measure against the same reference.
    energy_under_nu: half the expected filtered-drift energy under the
        tilted measure.
    energy_under_p: the same under the sampling measure.
    drift_energy_under_p: half the expected raw-drift energy (sampling).
    rho_mean: expectation of the raw tilting exponential under sampling
        (exactly 1 in the continuum limit; finite grids leave an O(dt) gap).
    """

    innovation_kl: float
    observation_kl: float
    energy_under_nu: float
    energy_under_p: float
    drift_energy_under_p: float
    rho_mean: float


def _require_linear(model):
    if not is_linear_model(model):
        raise UnsupportedModelError(f"model {model.name} is not in the linear family")
    if getattr(model, "d", 1) != 1:
        raise UnsupportedModelError("linear Gaussian oracle handles dimension 1")


def _filter_rows(model, grid, dU_rows, dU_const):
    """Filtered drift as affine functions of whatever basis dU lives in.

    dU_rows: (N, n) coefficient rows of the observation increments over the
    basis; dU_const: (N,) constant offsets.  Mirrors the discrete filters
    of `filtering` gain for gain.
    """
    N, n = dU_rows.shape
    dt = grid.dt
    rows = np.zeros((N, n))
    const = np.zeros(N)
    if isinstance(model, ZeroDrift):
        return rows, const
    if isinstance(model, DeterministicDrift):
        const[:] = model.h(grid.left_times)
        return rows, const
    if isinstance(model, LinearFeedback):
        U_row, U_c = np.zeros(n), 0.0
        for k in range(N):
            rows[k] = -model.a * U_row
            const[k] = -model.a * U_c
            U_row = U_row + dU_rows[k]
            U_c = U_c + dU_const[k]
        return rows, const
    if isinstance(model, IndependentDrift):
        g = model.g(grid.left_times)
        num_row, num_c, den = np.zeros(n), 0.0, 1.0
        for k in range(N):
            rows[k] = g[k] * num_row / den
            const[k] = g[k] * num_c / den
            num_row = num_row + g[k] * dU_rows[k]
            num_c = num_c + g[k] * dU_const[k]
            den = den + g[k] ** 2 * dt
        return rows, const
    # KalmanBucy
    P = riccati_sequence(model.beta, model.sigma, grid, p0=model.x0_var)
    x_row, x_c = np.zeros(n), 0.0
    for k in range(N):
        rows[k] = x_row
        const[k] = x_c
        x_row = x_row * (1.0 - model.beta * dt - P[k] * dt) + P[k] * dU_rows[k]
        x_c = x_c * (1.0 - model.beta * dt - P[k] * dt) + P[k] * dU_const[k]
    return rows, const


def _primitive_rows(model, grid):
    """Drift and observation increments over the primitive Gaussian basis.

    The primitive vector G concatenates, depending on the model, auxiliary
    standard Gaussians, hidden driving noise, and the Brownian increments.
    Returns (dU_rows, dU_const, drift_rows, drift_const, variances).
    """
    N = grid.steps
    dt = grid.dt
    if isinstance(model, (ZeroDrift, DeterministicDrift, LinearFeedback)):
        n, iB = N, 0  # G = dB
        var = np.full(N, dt)
    elif isinstance(model, IndependentDrift):
        n, iB = 1 + N, 1  # G = (theta, dB)
        var = np.concatenate([[1.0], np.full(N, dt)])
    else:  # KalmanBucy
        n, iB = 1 + 2 * N, 1 + N  # G = (x0 unit, dV, dB)
        var = np.concatenate([[1.0], np.full(2 * N, dt)])

    drift_rows = np.zeros((N, n))
    drift_const = np.zeros(N)
    if isinstance(model, DeterministicDrift):
        drift_const[:] = model.h(grid.left_times)
    elif isinstance(model, IndependentDrift):
        drift_rows[:, 0] = model.g(grid.left_times)
    elif isinstance(model, KalmanBucy):
        x_row = np.zeros(n)
        x_row[0] = np.sqrt(model.x0_var)
        for k in range(N):
            drift_rows[k] = x_row
            x_row = x_row * (1.0 - model.beta * dt)
            x_row[1 + k] += model.sigma  # sigma * dV_k enters X_{k+1}
    elif isinstance(model, LinearFeedback):
        U_row = np.zeros(n)
        for k in range(N):
            drift_rows[k] = -model.a * U_row
            dU_row = drift_rows[k] * dt
            dU_row[iB + k] += 1.0
            U_row = U_row + dU_row

    dU_rows = drift_rows * dt
    dU_rows[:, iB:iB + N] += np.eye(N)
    dU_const = drift_const * dt
    return dU_rows, dU_const, drift_rows, drift_const, var


def _filter_rows_in_z(model, grid):
    """Filtered drift as affine functions of the innovation increments.

    Uses the triangular relation dU_k = dZ_k + uhat_k dt, where uhat_k
    depends only on earlier observation increments; the filter recursion is
    replayed with basis rows in place of numbers.
    """
    N = grid.steps
    dt = grid.dt
    if isinstance(model, (ZeroDrift, DeterministicDrift)):
        b = np.zeros(N)
        if isinstance(model, DeterministicDrift):
            b[:] = model.h(grid.left_times)
        return np.zeros((N, N)), b
    a_rows = np.zeros((N, N))
    if isinstance(model, LinearFeedback):
        U_row = np.zeros(N)
        for k in range(N):
            a_rows[k] = -model.a * U_row
            dU_row = a_rows[k] * dt
            dU_row[k] += 1.0
            U_row = U_row + dU_row
        return a_rows, np.zeros(N)
    if isinstance(model, IndependentDrift):
        g = model.g(grid.left_times)
        num_row, den = np.zeros(N), 1.0
        for k in range(N):
            a_rows[k] = g[k] * num_row / den
            dU_row = a_rows[k] * dt
            dU_row[k] += 1.0
            num_row = num_row + g[k] * dU_row
            den = den + g[k] ** 2 * dt
        return a_rows, np.zeros(N)
    # KalmanBucy
    P = riccati_sequence(model.beta, model.sigma, grid, p0=model.x0_var)
    x_row = np.zeros(N)
    for k in range(N):
        a_rows[k] = x_row
        dU_row = a_rows[k] * dt
        dU_row[k] += 1.0
        x_row = x_row * (1.0 - model.beta * dt) + P[k] * (dU_row - x_row * dt)
    return a_rows, np.zeros(N)


def _expected_square(rows, const, cov, mean):
    """E[(rows G + const)^2] rowwise for G ~ N(mean, cov)."""
    quad = np.einsum("ki,ij,kj->k", rows, cov, rows)
    lin = rows @ mean + const
    return quad + lin**2


def linear_gaussian_summary(model: DriftModel, grid: TimeGrid) -> LinearGaussianSummary:
    """Exact Gaussian functionals of the discretized linear model."""
    _require_linear(model)
    N = grid.steps
    dt = grid.dt

    dU_rows, dU_const, drift_rows, drift_const, var = _primitive_rows(model, grid)
    uhat_rows, uhat_const = _filter_rows(model, grid, dU_rows, dU_const)
    dZ_rows = dU_rows - dt * uhat_rows
    dZ_const = dU_const - dt * uhat_const

    V = np.diag(var)
    C = dZ_rows @ V @ dZ_rows.T
    C = 0.5 * (C + C.T)
    mean0 = dZ_const  # identically zero for the built-in linear models

    a_rows, b = _filter_rows_in_z(model, grid)

    # tilt: -log rho = 1/2 S'AS + c'S + r over S = innovation increments
    M = a_rows.T
    A = M + M.T + dt * (a_rows.T @ a_rows)
    c = b + dt * (a_rows.T @ b)
    r = 0.5 * dt * float(b @ b)

    try:
        Cf = cho_factor(C)
        Cinv = cho_solve(Cf, np.eye(N))
        Kf = cho_factor(Cinv + A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Gaussian algebra lost positivity: {exc}")
    Sigma_nu = cho_solve(Kf, np.eye(N))
    Sigma_nu = 0.5 * (Sigma_nu + Sigma_nu.T)
    m_nu = cho_solve(Kf, Cinv @ mean0 - c)

    sign, logdet_Sigma = np.linalg.slogdet(Sigma_nu)
    if sign <= 0:
        raise NumericalError("tilted covariance lost positivity")
    innovation_kl = 0.5 * (
        np.trace(Sigma_nu) / dt - N + N * np.log(dt) - logdet_Sigma
        + float(m_nu @ m_nu) / dt
    )

    C_U = dU_rows @ V @ dU_rows.T
    sign_u, logdet_CU = np.linalg.slogdet(C_U)
    if sign_u <= 0:
        raise NumericalError("observation covariance lost positivity")
    observation_kl = 0.5 * (
        np.trace(C_U) / dt - N + N * np.log(dt) - logdet_CU
        + float(dU_const @ dU_const) / dt
    )

    zero_mean = np.zeros(len(var))
    energy_under_nu = 0.5 * dt * float(np.sum(_expected_square(a_rows, b, Sigma_nu, m_nu)))
    energy_under_p = 0.5 * dt * float(np.sum(_expected_square(uhat_rows, uhat_const, V, zero_mean)))
    drift_energy_under_p = 0.5 * dt * float(
        np.sum(_expected_square(drift_rows, drift_const, V, zero_mean))
    )

    # E_P[rho] by the Gaussian integral of the quadratic tilt
    sign_k, logdet_IpCA = np.linalg.slogdet(np.eye(N) + C @ A)
    if sign_k <= 0:
        rho_mean = float("inf")
    else:
        shift = Cinv @ mean0 - c
        base = -0.5 * float(mean0 @ (Cinv @ mean0)) if np.any(mean0) else 0.0
        rho_mean = float(
            np.exp(-r - 0.5 * logdet_IpCA + 0.5 * float(shift @ (Sigma_nu @ shift)) + base)
        )

    return LinearGaussianSummary(
        innovation_kl=float(innovation_kl),
        observation_kl=float(observation_kl),
        energy_under_nu=float(energy_under_nu),
        energy_under_p=float(energy_under_p),
        drift_energy_under_p=float(drift_energy_under_p),
        rho_mean=rho_mean,
    )
