"""Unscented Transform Controller.

One controller step treats the reference as the "measurement" of a UKF
whose "state" is the control input: sigma points are drawn around the
prior control, each is held fixed while the plant is rolled forward
``N`` steps, and the resulting output spread yields a gain that pulls the
predicted output towards the reference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import NotPSD
from .linalg import (
    as_matrix,
    clamp_psd,
    default_psd_tol,
    eig_extrema_sym,
    psd_sqrt,
    solve_linear,
    spectral_norm,
    symmetrize,
)

log = logging.getLogger(__name__)

PropagationMode = Literal["hold", "noise", "feedback"]


@dataclass(frozen=True)
class UtcParams:
    """Controller tuning.

    ``Q_u`` plays three parts: prior noise covariance, the additive term
    of the predicted input covariance, and the initial ``P_{0|0}``.
    ``sigma_scale_dim`` is the dimension used in the sigma spread factor
    ``sqrt(d / (1 - W0))``; ``None`` means the input dimension ``m``.
    """

    Q_u: np.ndarray
    P_err: np.ndarray
    N: int = 1
    W0: float = 0.5
    sigma_scale_dim: int | None = None
    propagation: PropagationMode = "hold"
    feedback: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    input_bounds: tuple[np.ndarray, np.ndarray] | None = None
    rng_seed: int = 0
    psd_tol: float | None = None

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if not 0.0 < self.W0 < 1.0:
            raise ValueError(f"W0 must lie in (0,1), got {self.W0}")
        Q_u = as_matrix(self.Q_u, "Q_u")
        P_err = as_matrix(self.P_err, "P_err")
        for name, M in (("Q_u", Q_u), ("P_err", P_err)):
            if M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square, got {M.shape}")
            psd_sqrt(M)  # raises NotSymmetric / NotPSD
        object.__setattr__(self, "Q_u", Q_u)
        object.__setattr__(self, "P_err", P_err)
        if self.sigma_scale_dim is not None and self.sigma_scale_dim < 1:
            raise ValueError("sigma_scale_dim must be >= 1")
        if self.propagation not in ("hold", "noise", "feedback"):
            raise ValueError(f"unknown propagation mode {self.propagation!r}")
        if self.propagation == "feedback" and self.feedback is None:
            raise ValueError("feedback propagation needs a feedback callable")
        if self.input_bounds is not None:
            lo, hi = (np.asarray(b, dtype=float).ravel() for b in self.input_bounds)
            if lo.shape != (self.m,) or hi.shape != (self.m,):
                raise ValueError(f"input bounds must have length {self.m}")
            if np.any(lo > hi):
                raise ValueError("input bounds need lo <= hi")
            object.__setattr__(self, "input_bounds", (lo, hi))

    @property
    def m(self) -> int:
        return self.Q_u.shape[0]

    @property
    def scale_dim(self) -> int:
        return self.m if self.sigma_scale_dim is None else self.sigma_scale_dim

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


@dataclass
class UtcState:
    u: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray  # (2m+1, m)
    weights: np.ndarray  # (2m+1,)


@dataclass(frozen=True)
class UpdateResult:
    u_pred: np.ndarray
    y_pred: np.ndarray
    P_pred: np.ndarray
    P_y: np.ndarray
    P_uy: np.ndarray
    K: np.ndarray
    u_next: np.ndarray
    P_next: np.ndarray
    sigma: SigmaSet
    outputs: np.ndarray
    min_eig_raw: float
    clamp: float

    def state(self) -> UtcState:
        return UtcState(self.u_next, self.P_next)


@dataclass(frozen=True)
class NStepUnroll:
    F: np.ndarray
    G: np.ndarray
    g_bar: float


def initial_state(params: UtcParams, u0=None) -> UtcState:
    u0 = np.zeros(params.m) if u0 is None else np.asarray(u0, dtype=float).copy()
    return UtcState(u0, params.Q_u.copy())


def sigma_weights(m: int, W0: float) -> np.ndarray:
    w = np.full(2 * m + 1, (1.0 - W0) / (2 * m))
    w[0] = W0
    return w


def propagate_prior(state: UtcState, x, params: UtcParams, rng: np.random.Generator | None = None) -> np.ndarray:
    """Prior control for the coming step."""
    u = np.asarray(state.u, dtype=float)
    if params.propagation == "hold":
        return u.copy()
    if params.propagation == "feedback":
        return np.asarray(params.feedback(np.asarray(x, dtype=float), u), dtype=float)
    if rng is None:
        raise ValueError("noise propagation needs an rng")
    w = psd_sqrt(params.Q_u) @ rng.standard_normal(params.m)
    return u + w


def generate_sigma_points(u_minus, P, params: UtcParams) -> SigmaSet:
    u_minus = np.asarray(u_minus, dtype=float)
    m = u_minus.shape[0]
    S = psd_sqrt(P, params.psd_tol)
    c = np.sqrt(params.scale_dim / (1.0 - params.W0))
    pts = np.empty((2 * m + 1, m))
    pts[0] = u_minus
    for j in range(m):
        pts[2 * j + 1] = u_minus + c * S[:, j]
        pts[2 * j + 2] = u_minus - c * S[:, j]
    if params.input_bounds is not None:
        lo, hi = params.input_bounds
        pts = np.clip(pts, lo, hi)
    return SigmaSet(pts, sigma_weights(m, params.W0))


def unroll(A, N: int, f_bar: float = 0.0) -> NStepUnroll:
    """``F = A^N``, ``G = sum_{i<N} A^i`` and the accumulated bound ``g_bar``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    A = as_matrix(A, "A")
    n = A.shape[0]
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(powers[-1] @ A)
    G = sum(powers[:N])
    g_bar = f_bar * sum(spectral_norm(powers[N - i - 1]) for i in range(N))
    return NStepUnroll(F=powers[N], G=G, g_bar=float(g_bar))


def propagate_sigma_n_step(plant, x, U, N: int) -> np.ndarray:
    """Hold ``U`` for ``N`` plant steps from ``x``; return the final output."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x = np.asarray(x, dtype=float)
    U = np.asarray(U, dtype=float)
    for _ in range(N):
        x = plant.step(x, U)
    return plant.output(x)


def update(state: UtcState, x, r, plant, params: UtcParams, rng: np.random.Generator | None = None) -> UpdateResult:
    """One full controller step, returning every intermediate quantity."""
    r = np.asarray(r, dtype=float)
    u_minus = propagate_prior(state, x, params, rng)
    sigma = generate_sigma_points(u_minus, state.P, params)
    U, W = sigma.points, sigma.weights
    Y = np.array([propagate_sigma_n_step(plant, x, Ui, params.N) for Ui in U])

    y_pred = W @ Y
    u_pred = W @ U
    dU = U - u_pred
    dY = Y - y_pred
    P_pred = params.Q_u + (dU.T * W) @ dU
    P_y = params.P_err + (dY.T * W) @ dY
    P_uy = (dU.T * W) @ dY

    K = solve_linear(P_y, P_uy.T).T
    u_next = u_pred + K @ (r - y_pred)
    P_raw = symmetrize(P_pred - K @ P_y @ K.T)

    tol = params.psd_tol if params.psd_tol is not None else default_psd_tol(P_raw)
    lam_min, _ = eig_extrema_sym(P_raw)
    if lam_min < -tol:
        raise NotPSD(f"posterior covariance eigenvalue {lam_min:.3e} below -{tol:.3e}")
    P_next, clamp = clamp_psd(P_raw, tol)
    if clamp > 0.0:
        log.debug("clamped posterior covariance by %.3e", clamp)

    return UpdateResult(
        u_pred=u_pred,
        y_pred=y_pred,
        P_pred=P_pred,
        P_y=P_y,
        P_uy=P_uy,
        K=K,
        u_next=u_next,
        P_next=P_next,
        sigma=sigma,
        outputs=Y,
        min_eig_raw=lam_min,
        clamp=clamp,
    )
