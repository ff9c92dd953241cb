"""Plant models.

Two flavours share the same duck-typed surface (``n``, ``m``, ``p``,
``step(x, u)``, ``output(x)``):

* :class:`LtiPlant` -- ``x+ = A x + B u + f(x)``, ``y = C x`` with a
  norm-bounded nonlinearity ``f``;
* :class:`NonlinearPlant` -- arbitrary step/output maps (the quadcopter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GimbalLock, NonPositiveStep
from .linalg import as_matrix

THETA_GUARD = 1e-3

# Attitude subsystem of the ADMIRE fighter model (continuous time),
# states p, q, r and inputs canard, right elevon, left elevon, rudder.
ADMIRE_A = np.array(
    [
        [-0.9967, 0.0, 0.6176],
        [0.0, -0.5057, 0.0],
        [-0.0939, 0.0, -0.2127],
    ]
)
ADMIRE_B = np.array(
    [
        [0.0, -4.2423, 4.2423, 1.4871],
        [1.6532, -1.2735, -1.2735, 0.0024],
        [0.0, -0.2805, 0.2805, -0.8823],
    ]
)


@dataclass(frozen=True)
class BoundedNonlinearity:
    """State nonlinearity with a global 2-norm bound ``||f(x)|| <= bound``."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    bound: float
    description: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)


def zero_nonlinearity(n: int) -> BoundedNonlinearity:
    return BoundedNonlinearity(lambda x: np.zeros(n), 0.0, "zero")


def sinusoidal_nonlinearity(beta, alpha, scale: float = 1.0) -> BoundedNonlinearity:
    """Componentwise ``scale * beta_i * sin(alpha_i * x_i)``.

    The bound ``|scale| * ||beta||_2`` is exact: every component can reach
    its amplitude simultaneously for a suitable ``x``.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    alpha = np.asarray(alpha, dtype=float).ravel()
    if beta.shape != alpha.shape:
        raise ValueError("beta and alpha must have the same length")
    amp = scale * beta

    def evaluate(x: np.ndarray) -> np.ndarray:
        return amp * np.sin(alpha * x)

    bound = float(np.linalg.norm(amp))
    desc = f"{scale:g} * beta*sin(alpha*x), beta={beta.tolist()}, alpha={alpha.tolist()}"
    return BoundedNonlinearity(evaluate, bound, desc)


@dataclass(frozen=True)
class LtiPlant:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    f: BoundedNonlinearity = None  # type: ignore[assignment]
    dt: float = 0.0

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        for name, arr in (("A", A), ("B", B), ("C", C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.f is None:
            object.__setattr__(self, "f", zero_nonlinearity(n))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def step(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A @ x + self.B @ np.asarray(u, dtype=float) + self.f(x)

    def output(self, x) -> np.ndarray:
        return self.C @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class NonlinearPlant:
    step_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    output_fn: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int
    p: int
    dt: float = 0.0
    name: str = ""

    def step(self, x, u) -> np.ndarray:
        return self.step_fn(np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    def output(self, x) -> np.ndarray:
        return self.output_fn(np.asarray(x, dtype=float))


def euler_discretize(A_c, B_c, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward-Euler discretization: ``(I + dt*A_c, dt*B_c)``."""
    if not dt > 0:
        raise NonPositiveStep(f"dt must be positive, got {dt}")
    A_c = as_matrix(A_c, "A_c")
    B_c = as_matrix(B_c, "B_c")
    return np.eye(A_c.shape[0]) + dt * A_c, dt * B_c


def make_admire(dt: float = 0.01, beta=(0.1, 0.1, 0.1), alpha=(5.0, 5.0, 5.0)) -> LtiPlant:
    """Discretized ADMIRE attitude model with sinusoidal state perturbations.

    The perturbation ``beta*sin(alpha*x)`` is a continuous-time disturbance,
    so it enters the discrete model multiplied by ``dt``.
    """
    A, B = euler_discretize(ADMIRE_A, ADMIRE_B, dt)
    f = sinusoidal_nonlinearity(beta, alpha, scale=dt)
    return LtiPlant(A, B, np.eye(3), f, dt)


@dataclass(frozen=True)
class QuadcopterParams:
    I_xx: float = 4.856e-3
    I_yy: float = 4.856e-3
    I_zz: float = 8.801e-3
    J_r: float = 3.357e-5
    k_t: float = 2.98e-6
    k_b: float = 1.14e-7
    L: float = 0.225
    dt: float = 0.01

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"quadcopter parameter {name} must be positive, got {value}")


def quad_torques(u, params: QuadcopterParams) -> np.ndarray:
    w1, w2, w3, w4 = np.asarray(u, dtype=float) ** 2
    return np.array(
        [
            params.L * params.k_t * (-w2 + w4),
            params.L * params.k_t * (-w1 + w3),
            params.k_b * (-w1 + w2 - w3 + w4),
        ]
    )


def quad_body_rates_deriv(v, u, params: QuadcopterParams) -> np.ndarray:
    """Body angular acceleration ``[p', q', r']`` for rotor speeds ``u``."""
    p, q, r = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    Ixx, Iyy, Izz = params.I_xx, params.I_yy, params.I_zz
    omega_r = -u[0] + u[1] - u[2] + u[3]
    tau = quad_torques(u, params)
    return np.array(
        [
            (Iyy - Izz) * q * r / Ixx - params.J_r * q / Ixx * omega_r + tau[0] / Ixx,
            (Izz - Ixx) * p * r / Iyy + params.J_r * p / Iyy * omega_r + tau[1] / Iyy,
            (Ixx - Iyy) * p * q / Izz + tau[2] / Izz,
        ]
    )


def quad_euler_rates(z, v, theta_guard: float = THETA_GUARD) -> np.ndarray:
    """Map body rates ``v`` to Euler-angle rates at attitude ``z``."""
    phi, theta, _ = np.asarray(z, dtype=float)
    if abs(theta) >= np.pi / 2 - theta_guard:
        raise GimbalLock(f"pitch {theta:.6f} rad within {theta_guard} of +/-pi/2")
    sp, cp = np.sin(phi), np.cos(phi)
    ct, tt = np.cos(theta), np.tan(theta)
    R = np.array(
        [
            [1.0, sp * tt, cp * tt],
            [0.0, cp, -sp],
            [0.0, sp / ct, cp / ct],
        ]
    )
    return R @ np.asarray(v, dtype=float)


def make_quadcopter(params: QuadcopterParams | None = None) -> NonlinearPlant:
    """Quadcopter attitude plant, state ``[phi, theta, psi, p, q, r]``, output ``[p, q, r]``.

    ``step`` is one forward-Euler step of the Euler-angle kinematics and
    body-rate dynamics. It is written with scalar math because it sits in
    the innermost sigma-point loop; the vector helpers above are the
    reference form it is tested against.
    """
    params = params or QuadcopterParams()
    dt = params.dt
    Ixx, Iyy, Izz, Jr = params.I_xx, params.I_yy, params.I_zz, params.J_r
    Lkt, kb = params.L * params.k_t, params.k_b
    limit = np.pi / 2 - THETA_GUARD

    def step(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        phi, theta, psi, p, q, r = x.tolist()
        w1, w2, w3, w4 = u.tolist()
        if abs(theta) >= limit:
            raise GimbalLock(f"pitch {theta:.6f} rad within {THETA_GUARD} of +/-pi/2")
        sp, cp = math.sin(phi), math.cos(phi)
        ct = math.cos(theta)
        tt = math.sin(theta) / ct
        omega_r = -w1 + w2 - w3 + w4
        s1, s2, s3, s4 = w1 * w1, w2 * w2, w3 * w3, w4 * w4
        dp = (Iyy - Izz) * q * r / Ixx - Jr * q / Ixx * omega_r + Lkt * (-s2 + s4) / Ixx
        dq = (Izz - Ixx) * p * r / Iyy + Jr * p / Iyy * omega_r + Lkt * (-s1 + s3) / Iyy
        dr = (Ixx - Iyy) * p * q / Izz + kb * (-s1 + s2 - s3 + s4) / Izz
        return np.array(
            [
                phi + dt * (p + sp * tt * q + cp * tt * r),
                theta + dt * (cp * q - sp * r),
                psi + dt * (sp / ct * q + cp / ct * r),
                p + dt * dp,
                q + dt * dq,
                r + dt * dr,
            ]
        )

    def output(x: np.ndarray) -> np.ndarray:
        return x[3:].copy()

    return NonlinearPlant(step, output, n=6, m=4, p=3, dt=dt, name="quadcopter")
