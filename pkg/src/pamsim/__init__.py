"""Simulator, UDP control service and analysis toolkits for an antagonistic
PAM-driven 4-DoF tendon arm."""

__version__ = "0.1.0"

from .config import SimConfig, load_config, parse_config_text  # noqa: F401
from .engine import ArmState, ControlMode, Session, SpringProbe  # noqa: F401
from .plant import JointParams, JointState, MuscleParams, MuscleState  # noqa: F401
