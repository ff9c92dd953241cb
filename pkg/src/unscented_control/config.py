"""Scenario configuration files.

A config is a YAML document with these sections::

    plant:       model (admire | quadcopter | custom-lti), dt, beta, alpha, ...
    controller:  N, W0, Q_u, P_err, sigma_scale_dim, propagation, input_bounds
    scenario:    horizon, x0_halfwidth, seed, u0, reference, settle_band
    output:      dir, csv
    certify:     gain, f_bar            (optional)

Unknown keys are rejected. Matrices are lists of rows; a bare number for
``Q_u``/``P_err`` means that multiple of the identity.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import controller, plant, sim
from .errors import ConfigError, UtcError

Matrix = list[list[float]]
VecOrScalar = Union[float, list[float]]

FIXTURES = Path(__file__).parent / "fixtures"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuadcopterConstants(_Strict):
    I_xx: float = 4.856e-3
    I_yy: float = 4.856e-3
    I_zz: float = 8.801e-3
    J_r: float = 3.357e-5
    k_t: float = 2.98e-6
    k_b: float = 1.14e-7
    L: float = 0.225

    @model_validator(mode="after")
    def _positive(self):
        for name, value in self:
            if not value > 0:
                raise ValueError(f"{name} must be positive")
        return self


class PlantSection(_Strict):
    model: Literal["admire", "quadcopter", "custom-lti"]
    dt: float = 0.01
    beta: Optional[list[float]] = None
    alpha: Optional[list[float]] = None
    quadcopter: Optional[QuadcopterConstants] = None
    A: Optional[Matrix] = None
    B: Optional[Matrix] = None
    C: Optional[Matrix] = None

    @field_validator("dt")
    @classmethod
    def _dt(cls, v):
        if not v > 0:
            raise ValueError("dt must be positive")
        return v

    @model_validator(mode="after")
    def _model_fields(self):
        if self.model == "custom-lti":
            if self.A is None or self.B is None or self.C is None:
                raise ValueError("custom-lti needs A, B and C")
        elif any(v is not None for v in (self.A, self.B, self.C)):
            raise ValueError(f"A/B/C are only allowed for custom-lti, not {self.model}")
        if self.model == "quadcopter" and (self.beta is not None or self.alpha is not None):
            raise ValueError("beta/alpha perturbations apply to LTI plants only")
        if self.model != "quadcopter" and self.quadcopter is not None:
            raise ValueError("quadcopter constants given for a non-quadcopter plant")
        if (self.beta is None) != (self.alpha is None):
            raise ValueError("beta and alpha must be given together")
        return self


class InputBounds(_Strict):
    lo: list[float]
    hi: list[float]


class ControllerSection(_Strict):
    N: int = 1
    W0: float = 0.5
    Q_u: Union[float, Matrix] = 0.01
    P_err: Union[float, Matrix] = 0.01
    sigma_scale_dim: Optional[int] = None
    propagation: Literal["hold", "noise", "feedback"] = "hold"
    feedback_gain: Optional[Matrix] = None
    input_bounds: Optional[InputBounds] = None

    @field_validator("N")
    @classmethod
    def _n(cls, v):
        if v < 1:
            raise ValueError("N must be >= 1")
        return v

    @field_validator("W0")
    @classmethod
    def _w0(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("W0 must lie in (0,1)")
        return v

    @model_validator(mode="after")
    def _feedback(self):
        if (self.propagation == "feedback") != (self.feedback_gain is not None):
            raise ValueError("feedback_gain is required for, and only for, propagation: feedback")
        return self


class ZeroReferenceSpec(_Strict):
    kind: Literal["zero"] = "zero"


class SinusoidReferenceSpec(_Strict):
    kind: Literal["sinusoid"]
    amplitude: VecOrScalar
    frequency: VecOrScalar
    phase: VecOrScalar = 0.0


class ScenarioSection(_Strict):
    horizon: int = 1000
    x0_halfwidth: VecOrScalar = 0.0
    x0_center: Optional[list[float]] = None
    seed: int = 0
    u0: Optional[list[float]] = None
    reference: Union[ZeroReferenceSpec, SinusoidReferenceSpec] = Field(
        default_factory=ZeroReferenceSpec, discriminator="kind"
    )
    settle_band: float = 0.05
    tail_fraction: float = 0.1

    @field_validator("horizon")
    @classmethod
    def _horizon(cls, v):
        if v < 1:
            raise ValueError("horizon must be >= 1")
        return v

    @field_validator("settle_band")
    @classmethod
    def _band(cls, v):
        if not v > 0:
            raise ValueError("settle_band must be positive")
        return v

    @field_validator("tail_fraction")
    @classmethod
    def _tail(cls, v):
        if not 0 < v <= 1:
            raise ValueError("tail_fraction must lie in (0,1]")
        return v


class OutputSection(_Strict):
    dir: str = "out"
    csv: str = "trajectory.csv"


class CertifySection(_Strict):
    gain: Optional[Matrix] = None
    f_bar: Optional[float] = None


class Config(_Strict):
    plant: PlantSection
    controller: ControllerSection = Field(default_factory=ControllerSection)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    output: OutputSection = Field(default_factory=OutputSection)
    certify: CertifySection = Field(default_factory=CertifySection)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _yaml_line(text: str, loc: tuple) -> int | None:
    """Best-effort 1-based line number of the node at ``loc``."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == key:
                    line, node = k.start_mark.line + 1, v
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str, source: str = "<config>") -> Config:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        cfg = Config.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p in ("zero", "sinusoid")))
            key = ".".join(str(p) for p in loc) or "<root>"
            where = _yaml_line(text, loc)
            prefix = f"{source}:{where}" if where else source
            msg = err["msg"].removeprefix("Value error, ")
            lines.append(f"{prefix}: {key}: {msg}")
        raise ConfigError("\n".join(lines)) from exc
    # Cross-section checks need the actual objects.
    build_scenario(cfg)
    return cfg


def load_config(path) -> tuple[Config, str]:
    """Parse and validate a config file; returns the config and its sha256."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path)), hashlib.sha256(text.encode()).hexdigest()


def _square(value, dim: int, name: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        return float(value) * np.eye(dim)
    M = np.asarray(value, dtype=float)
    if M.shape != (dim, dim):
        raise ConfigError(f"{name} must be {dim}x{dim}, got shape {M.shape}")
    return M


def _vector(value, dim: int, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.ndim == 0:
        return np.full(dim, float(v))
    if v.shape != (dim,):
        raise ConfigError(f"{name} must have length {dim}, got {v.shape}")
    return v


def build_plant(sec: PlantSection):
    if sec.model == "admire":
        kwargs = {}
        if sec.beta is not None:
            kwargs = {"beta": _vector(sec.beta, 3, "plant.beta"), "alpha": _vector(sec.alpha, 3, "plant.alpha")}
        return plant.make_admire(sec.dt, **kwargs)
    if sec.model == "quadcopter":
        consts = sec.quadcopter or QuadcopterConstants()
        return plant.make_quadcopter(plant.QuadcopterParams(**consts.model_dump(), dt=sec.dt))
    try:
        A, B, C = (np.asarray(M, dtype=float) for M in (sec.A, sec.B, sec.C))
        f = None
        if sec.beta is not None:
            n = A.shape[0]
            f = plant.sinusoidal_nonlinearity(_vector(sec.beta, n, "plant.beta"), _vector(sec.alpha, n, "plant.alpha"))
        return plant.LtiPlant(A, B, C, f)
    except ValueError as exc:
        raise ConfigError(f"plant: {exc}") from exc


def build_params(sec: ControllerSection, pl, seed: int = 0) -> controller.UtcParams:
    m, p, n = pl.m, pl.p, pl.n
    feedback = None
    if sec.feedback_gain is not None:
        Kfb = np.asarray(sec.feedback_gain, dtype=float)
        if Kfb.shape != (m, n):
            raise ConfigError(f"controller.feedback_gain must be {m}x{n}, got {Kfb.shape}")

        def feedback(x, u, Kfb=Kfb):
            return u - Kfb @ x

    bounds = None
    if sec.input_bounds is not None:
        bounds = (_vector(sec.input_bounds.lo, m, "input_bounds.lo"), _vector(sec.input_bounds.hi, m, "input_bounds.hi"))
    try:
        return controller.UtcParams(
            Q_u=_square(sec.Q_u, m, "controller.Q_u"),
            P_err=_square(sec.P_err, p, "controller.P_err"),
            N=sec.N,
            W0=sec.W0,
            sigma_scale_dim=sec.sigma_scale_dim,
            propagation=sec.propagation,
            feedback=feedback,
            input_bounds=bounds,
            rng_seed=seed,
        )
    except (ValueError, UtcError) as exc:
        raise ConfigError(f"controller: {exc}") from exc


def build_reference(spec, pl, dt: float):
    if spec.kind == "zero":
        return sim.ZeroReference(pl.p)
    try:
        return sim.SinusoidReference(
            _vector(spec.amplitude, pl.p, "reference.amplitude"),
            _vector(spec.frequency, pl.p, "reference.frequency"),
            _vector(spec.phase, pl.p, "reference.phase"),
            dt,
        )
    except ValueError as exc:
        raise ConfigError(f"scenario.reference: {exc}") from exc


def build_scenario(cfg: Config) -> sim.Scenario:
    pl = build_plant(cfg.plant)
    sc = cfg.scenario
    params = build_params(cfg.controller, pl, sc.seed)
    if sc.u0 is not None:
        _vector(sc.u0, pl.m, "scenario.u0")
    if sc.x0_center is not None:
        _vector(sc.x0_center, pl.n, "scenario.x0_center")
    try:
        return sim.Scenario(
            plant=pl,
            params=params,
            horizon=sc.horizon,
            x0_halfwidth=_vector(sc.x0_halfwidth, pl.n, "scenario.x0_halfwidth"),
            seed=sc.seed,
            reference=build_reference(sc.reference, pl, cfg.plant.dt),
            u0=sc.u0,
            x0_center=sc.x0_center,
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def with_overrides(cfg: Config, seed=None, steps=None, n_steps=None, output=None) -> Config:
    data = cfg.model_dump(mode="json")
    if seed is not None:
        data["scenario"]["seed"] = seed
    if steps is not None:
        data["scenario"]["horizon"] = steps
    if n_steps is not None:
        data["controller"]["N"] = n_steps
    if output is not None:
        data["output"]["dir"] = str(output)
    return parse_config(yaml.safe_dump(data, sort_keys=False), "<overrides>")


def fixture_path(name: str) -> Path:
    """Path of a bundled scenario file, e.g. ``fixture_path("admire_regulation")``."""
    path = FIXTURES / f"{name}.yaml"
    if not path.exists():
        raise FileNotFoundError(f"no fixture named {name!r}")
    return path


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FIXTURES.glob("*.yaml"))
