import functools

import numpy as np
import pytest

from unscented_control.plant import LtiPlant, sinusoidal_nonlinearity

ACCEPTANCE_LINES: list[str] = []


def random_stable_lti(rng, n, m, p, radius=0.9, f_bar=0.0):
    """Random LTI plant with spectral radius of A equal to ``radius``."""
    A = rng.standard_normal((n, n))
    A *= radius / max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    f = None
    if f_bar > 0:
        beta = rng.uniform(0.5, 1.5, n)
        beta *= f_bar / np.linalg.norm(beta)
        f = sinusoidal_nonlinearity(beta, rng.uniform(0.5, 3.0, n))
    return LtiPlant(A, B, C, f)


def random_schur(rng, d, radius=None):
    Z = rng.standard_normal((d, d))
    if radius is None:
        radius = rng.uniform(0.05, 0.95)
    return Z * (radius / max(np.abs(np.linalg.eigvals(Z))))


def random_psd(rng, d, rank=None):
    rank = d if rank is None else rank
    X = rng.standard_normal((d, rank)) * rng.uniform(0.1, 3.0)
    return X @ X.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def fixture_config(name, **overrides):
    from unscented_control import config

    cfg, _ = config.load_config(config.fixture_path(name))
    return config.with_overrides(cfg, **overrides) if overrides else cfg


@functools.lru_cache(maxsize=None)
def fixture_run(name, n_steps=None):
    """Cached trajectory of a bundled fixture, optionally with N overridden."""
    from unscented_control import config, sim

    cfg = fixture_config(name, n_steps=n_steps)
    return cfg, sim.run(config.build_scenario(cfg))
