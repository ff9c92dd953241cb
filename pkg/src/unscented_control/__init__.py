"""Unscented Transform Controller for discrete-time plants with bounded nonlinearities."""

__version__ = "0.1.0"

from .controller import (  # noqa: E402
    NStepUnroll,
    SigmaSet,
    UpdateResult,
    UtcParams,
    UtcState,
    generate_sigma_points,
    initial_state,
    propagate_prior,
    propagate_sigma_n_step,
    unroll,
    update,
)
from .plant import (  # noqa: E402
    BoundedNonlinearity,
    LtiPlant,
    NonlinearPlant,
    QuadcopterParams,
    make_admire,
    make_quadcopter,
)
from .stability import StabilityCertificate, build_closed_loop, certify, falsify  # noqa: E402
from .sim import Scenario, Trajectory, run  # noqa: E402
