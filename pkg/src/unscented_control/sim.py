"""Closed-loop simulation of a plant driven by the UTC."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import controller
from .controller import UtcParams, UtcState
from .errors import SimulationError, UtcError


@dataclass(frozen=True)
class ZeroReference:
    p: int

    def __call__(self, k: int) -> np.ndarray:
        return np.zeros(self.p)


@dataclass(frozen=True)
class SinusoidReference:
    """``r_k[i] = amplitude[i] * sin(2*pi*frequency[i]*k*dt + phase[i])``."""

    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("amplitude", "frequency", "phase"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if np.any(self.frequency < 0):
            raise ValueError("sinusoid frequencies must be >= 0")
        if not (self.amplitude.shape == self.frequency.shape == self.phase.shape):
            raise ValueError("amplitude, frequency and phase must have equal length")

    def __call__(self, k: int) -> np.ndarray:
        return self.amplitude * np.sin(2 * np.pi * self.frequency * k * self.dt + self.phase)


@dataclass(frozen=True)
class Scenario:
    plant: object
    params: UtcParams
    horizon: int
    x0_halfwidth: np.ndarray
    seed: int = 0
    reference: object = None
    u0: np.ndarray | None = None
    x0_center: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        hw = np.broadcast_to(np.asarray(self.x0_halfwidth, dtype=float), (self.plant.n,)).copy()
        if np.any(hw < 0):
            raise ValueError("x0 half-widths must be >= 0")
        object.__setattr__(self, "x0_halfwidth", hw)
        if self.params.m != self.plant.m:
            raise ValueError(f"Q_u is {self.params.m}x{self.params.m} but plant has m={self.plant.m}")
        if self.params.P_err.shape[0] != self.plant.p:
            raise ValueError(f"P_err must be {self.plant.p}x{self.plant.p}")
        if self.reference is None:
            object.__setattr__(self, "reference", ZeroReference(self.plant.p))
        if self.u0 is not None:
            u0 = np.asarray(self.u0, dtype=float).ravel()
            if u0.shape != (self.plant.m,):
                raise ValueError(f"u0 must have length {self.plant.m}")
            object.__setattr__(self, "u0", u0)


@dataclass
class Trajectory:
    k: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    r: np.ndarray
    y_pred: np.ndarray
    err_norm: np.ndarray
    K_fro: np.ndarray
    P_trace: np.ndarray
    min_eig_raw: np.ndarray = field(repr=False)
    clamp: np.ndarray = field(repr=False)
    P: np.ndarray | None = field(default=None, repr=False)  # stored covariance per step
    final_K: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.k)


def initial_condition(scn: Scenario, rng: np.random.Generator) -> np.ndarray:
    x0 = rng.uniform(-scn.x0_halfwidth, scn.x0_halfwidth)
    if scn.x0_center is not None:
        x0 = x0 + np.asarray(scn.x0_center, dtype=float)
    return x0


def run(scn: Scenario) -> Trajectory:
    """Simulate ``scn.horizon`` steps; returns ``horizon + 1`` records.

    Each step applies ``u_k`` to the plant and then lets the controller
    compute ``u_{k+1}`` from the new state and ``r_{k+1}``.
    """
    plant, params, H = scn.plant, scn.params, scn.horizon
    rng = np.random.default_rng(scn.seed)
    x = initial_condition(scn, rng)
    state = controller.initial_state(params, scn.u0)

    xs = np.empty((H + 1, plant.n))
    us = np.empty((H + 1, plant.m))
    ys = np.empty((H + 1, plant.p))
    rs = np.empty((H + 1, plant.p))
    y_pred = np.empty((H + 1, plant.p))
    K_fro = np.zeros(H + 1)
    P_trace = np.empty(H + 1)
    Ps = np.empty((H + 1, plant.m, plant.m))
    min_eig = np.full(H + 1, np.nan)
    clamp = np.zeros(H + 1)

    xs[0], us[0] = x, state.u
    ys[0] = plant.output(x)
    rs[0] = scn.reference(0)
    y_pred[0] = ys[0]
    P_trace[0] = np.trace(state.P)
    Ps[0] = state.P
    K = None

    for k in range(1, H + 1):
        try:
            x = plant.step(x, state.u)
            r = scn.reference(k)
            res = controller.update(state, x, r, plant, params, rng)
        except (UtcError, FloatingPointError, ValueError) as exc:
            raise SimulationError(k, exc) from exc
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(res.u_next)):
            raise SimulationError(k, FloatingPointError("non-finite state or control"))
        state = res.state()
        K = res.K
        xs[k], us[k] = x, state.u
        ys[k] = plant.output(x)
        rs[k] = r
        y_pred[k] = res.y_pred
        K_fro[k] = np.linalg.norm(res.K)
        P_trace[k] = np.trace(state.P)
        Ps[k] = state.P
        min_eig[k] = res.min_eig_raw
        clamp[k] = res.clamp

    err = np.linalg.norm(rs - ys, axis=1)
    return Trajectory(
        k=np.arange(H + 1),
        x=xs,
        u=us,
        y=ys,
        r=rs,
        y_pred=y_pred,
        err_norm=err,
        K_fro=K_fro,
        P_trace=P_trace,
        min_eig_raw=min_eig,
        clamp=clamp,
        P=Ps,
        final_K=K,
    )


def settling_time(traj: Trajectory, band: float) -> int:
    """First index after which the tracking error stays within ``band``.

    Returns ``len(traj)`` (horizon + 1) if the error never settles.
    """
    if not band > 0:
        raise ValueError("band must be positive")
    outside = np.nonzero(traj.err_norm > band)[0]
    if outside.size == 0:
        return 0
    return int(outside[-1]) + 1


def _tail_start(n: int, tail_fraction: float) -> int:
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    return n - max(1, math.ceil(tail_fraction * n))


def error_limsup(traj: Trajectory, tail_fraction: float = 0.1) -> float:
    """Largest tracking error over the final ``tail_fraction`` of the run."""
    return float(np.max(traj.err_norm[_tail_start(len(traj), tail_fraction):]))


def transient_peak(traj: Trajectory, tail_fraction: float = 0.1) -> float:
    """Largest tracking error once the controller has acted (k >= 1), outside the tail."""
    stop = _tail_start(len(traj), tail_fraction)
    return float(np.max(traj.err_norm[1:max(stop, 2)]))


def csv_header(n: int, m: int, p: int) -> list[str]:
    return (
        ["k"]
        + [f"x_{i}" for i in range(n)]
        + [f"u_{i}" for i in range(m)]
        + [f"y_{i}" for i in range(p)]
        + [f"r_{i}" for i in range(p)]
        + ["err_norm", "K_fro", "P_trace"]
    )


def export_csv(traj: Trajectory, path) -> None:
    n, m, p = traj.x.shape[1], traj.u.shape[1], traj.y.shape[1]
    fmt = "{:.17g}".format
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(n, m, p))
        for i in range(len(traj)):
            row = [str(int(traj.k[i]))]
            row += [fmt(v) for v in traj.x[i]]
            row += [fmt(v) for v in traj.u[i]]
            row += [fmt(v) for v in traj.y[i]]
            row += [fmt(v) for v in traj.r[i]]
            row += [fmt(traj.err_norm[i]), fmt(traj.K_fro[i]), fmt(traj.P_trace[i])]
            writer.writerow(row)


def read_csv(path) -> dict[str, np.ndarray]:
    """Load an exported trajectory back as ``{column: values}``."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float)
    return {name: data[:, j] for j, name in enumerate(header)}
