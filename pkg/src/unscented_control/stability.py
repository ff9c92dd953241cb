"""Lyapunov certificate for the UTC in closed loop with a fixed gain.

For regulation (``r = 0``) with the gain frozen at ``K`` and a hold
prior, the controller collapses to

    u_k = u_{k-1} - K C (F x_k + G B u_{k-1} + g(x_k, N))

and stacking ``a_k = [x_k; u_{k-1}]`` gives ``a_{k+1} = Z a_k + D_k``.
If ``Z`` is Schur, ``V = a^T P a`` with ``Z^T P Z - P = -I`` decreases
whenever ``||a|| > R`` where

    R     = D_bar * (||Z|| p_max + sqrt(||Z||^2 p_max^2 + p_max))
    D_bar = sqrt((f_bar + ||BKC|| g_bar)^2 + (||KC|| g_bar)^2)
    g_bar = f_bar * sum_{i<N} ||A^(N-i-1)||

All norms are spectral norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import NStepUnroll, unroll
from .errors import NotSchur
from .linalg import (
    SCHUR_EPS,
    as_matrix,
    eig_extrema_sym,
    solve_stein,
    spectral_norm,
    spectral_radius,
    stein_residual,
)
from .plant import BoundedNonlinearity, LtiPlant


@dataclass(frozen=True)
class ClosedLoop:
    Z: np.ndarray
    K: np.ndarray
    unroll: NStepUnroll
    plant: LtiPlant
    N: int


@dataclass(frozen=True)
class StabilityCertificate:
    schur: bool
    spectral_radius: float
    P: np.ndarray | None = None
    p_min: float | None = None
    p_max: float | None = None
    Z_norm: float | None = None
    g_bar: float | None = None
    D_bar: float | None = None
    R: float | None = None
    stein_residual: float | None = None

    def report(self) -> str:
        """Flat ``key = value`` block; absent values print as ``none``."""

        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, bool):
                return str(v).lower()
            return f"{v:.12g}"

        keys = ("Z_norm", "p_max", "p_min", "g_bar", "D_bar", "R", "schur", "stein_residual", "spectral_radius")
        return "\n".join(f"{k} = {fmt(getattr(self, k))}" for k in keys) + "\n"


def build_closed_loop(plant: LtiPlant, K, N: int) -> ClosedLoop:
    K = as_matrix(K, "K")
    A, B, C = plant.A, plant.B, plant.C
    n, m, p = plant.n, plant.m, plant.p
    if K.shape != (m, p):
        raise ValueError(f"K must be {m}x{p}, got {K.shape}")
    un = unroll(A, N, plant.f.bound)
    F, G = un.F, un.G
    KC = K @ C
    Z = np.block(
        [
            [A - B @ KC @ F, (np.eye(n) - B @ KC @ G) @ B],
            [-KC @ F, np.eye(m) - KC @ G @ B],
        ]
    )
    return ClosedLoop(Z=Z, K=K, unroll=un, plant=plant, N=N)


def radius(D_bar: float, Z_norm: float, p_max: float) -> float:
    return D_bar * (Z_norm * p_max + math.sqrt(Z_norm**2 * p_max**2 + p_max))


def disturbance_bound(f_bar: float, g_bar: float, BKC_norm: float, KC_norm: float) -> float:
    return math.hypot(f_bar + BKC_norm * g_bar, KC_norm * g_bar)


def certify(cl: ClosedLoop, f_bar: float | None = None, eps_schur: float = SCHUR_EPS) -> StabilityCertificate:
    """Solve the Stein equation for ``cl.Z`` and compute the radius ``R``.

    ``f_bar`` defaults to the plant nonlinearity's own bound.
    """
    if f_bar is None:
        f_bar = cl.plant.f.bound
    if f_bar < 0:
        raise ValueError("f_bar must be >= 0")
    rho = spectral_radius(cl.Z)
    if rho >= 1.0 - eps_schur:
        return StabilityCertificate(schur=False, spectral_radius=rho)

    d = cl.Z.shape[0]
    P = solve_stein(cl.Z, np.eye(d), eps_schur)
    p_min, p_max = eig_extrema_sym(P)
    Z_norm = spectral_norm(cl.Z)
    g_bar = unroll(cl.plant.A, cl.N, f_bar).g_bar
    KC = cl.K @ cl.plant.C
    D_bar = disturbance_bound(f_bar, g_bar, spectral_norm(cl.plant.B @ KC), spectral_norm(KC))
    return StabilityCertificate(
        schur=True,
        spectral_radius=rho,
        P=P,
        p_min=p_min,
        p_max=p_max,
        Z_norm=Z_norm,
        g_bar=g_bar,
        D_bar=D_bar,
        R=radius(D_bar, Z_norm, p_max),
        stein_residual=stein_residual(cl.Z, P, np.eye(d)),
    )


def accumulated_nonlinearity(plant: LtiPlant, f: BoundedNonlinearity, x, v, N: int) -> np.ndarray:
    """``g(x, N) = sum_i A^(N-i-1) f(x_{k+i})`` along the open-loop run holding ``v``."""
    A, B = plant.A, plant.B
    g = np.zeros(plant.n)
    xi = np.asarray(x, dtype=float)
    for i in range(N):
        fi = f(xi)
        g = A @ g + fi
        if i < N - 1:
            xi = A @ xi + B @ v + fi
    return g


def disturbance(cl: ClosedLoop, f: BoundedNonlinearity, a) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(D_k, g(x_k, N))`` for augmented state ``a = [x; v]``."""
    n = cl.plant.n
    x, v = a[:n], a[n:]
    g = accumulated_nonlinearity(cl.plant, f, x, v, cl.N)
    KCg = cl.K @ (cl.plant.C @ g)
    D = np.concatenate([f(x) - cl.plant.B @ KCg, -KCg])
    return D, g


@dataclass
class FalsificationReport:
    trials: int
    steps: int
    limsup: np.ndarray  # per-trial max ||a_k|| over the last 10% of steps
    max_limsup: float
    R: float
    ball_violations: int  # trials whose tail leaves the R-ball
    lyapunov_checks: int  # steps with ||a_k|| > R
    lyapunov_violations: int
    max_D_ratio: float  # max ||D_k|| / D_bar
    max_g_ratio: float  # max ||g|| / g_bar
    bound_violations: int
    entered_ball: np.ndarray  # first step with ||a_k|| <= R, -1 if never

    @property
    def ok(self) -> bool:
        return self.ball_violations == 0 and self.lyapunov_violations == 0 and self.bound_violations == 0


def falsify(
    cert: StabilityCertificate,
    cl: ClosedLoop,
    f: BoundedNonlinearity,
    trials: int,
    steps: int,
    rng: np.random.Generator,
    init_radius: float | None = None,
    tail_fraction: float = 0.1,
    atol: float = 1e-8,
) -> FalsificationReport:
    """Simulate ``a_{k+1} = Z a_k + D_k`` from random starts and check the certificate.

    Initial conditions are uniform on the sphere of radius ``init_radius``
    (default ``10 R``, or 1 when ``R = 0``). ``atol`` is the absolute
    slack on the ball test, needed when ``R = 0``.
    """
    if not cert.schur:
        raise NotSchur("cannot falsify without a Schur-stable certificate")
    R, P = cert.R, cert.P
    d = cl.Z.shape[0]
    if init_radius is None:
        init_radius = 10.0 * R if R > 0 else 1.0
    tail = max(1, math.ceil(tail_fraction * steps))
    slack = atol + 1e-12 * R

    limsup = np.empty(trials)
    entered = np.full(trials, -1)
    lyap_checks = lyap_viol = bound_viol = ball_viol = 0
    max_D = max_g = 0.0
    for t in range(trials):
        a = rng.standard_normal(d)
        a *= init_radius / np.linalg.norm(a)
        norms = np.empty(steps + 1)
        norms[0] = np.linalg.norm(a)
        for k in range(steps):
            D, g = disturbance(cl, f, a)
            nD, ng = np.linalg.norm(D), np.linalg.norm(g)
            if cert.D_bar > 0:
                max_D = max(max_D, nD / cert.D_bar)
            if cert.g_bar > 0:
                max_g = max(max_g, ng / cert.g_bar)
            if nD > cert.D_bar * (1 + 1e-12) or ng > cert.g_bar * (1 + 1e-12):
                bound_viol += 1
            a_next = cl.Z @ a + D
            if norms[k] > R:
                lyap_checks += 1
                if a_next @ P @ a_next - a @ P @ a >= 0.0:
                    lyap_viol += 1
            a = a_next
            norms[k + 1] = np.linalg.norm(a)
        limsup[t] = norms[-tail:].max()
        if limsup[t] > R + slack:
            ball_viol += 1
        inside = np.nonzero(norms <= R + slack)[0]
        entered[t] = int(inside[0]) if inside.size else -1

    return FalsificationReport(
        trials=trials,
        steps=steps,
        limsup=limsup,
        max_limsup=float(limsup.max()),
        R=R,
        ball_violations=ball_viol,
        lyapunov_checks=lyap_checks,
        lyapunov_violations=lyap_viol,
        max_D_ratio=max_D,
        max_g_ratio=max_g,
        bound_violations=bound_viol,
        entered_ball=entered,
    )
