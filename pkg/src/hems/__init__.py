"""Go-Explore for residential appliance scheduling.

Snapshot-resettable household energy simulator, archive-based exploration,
policy cloning and robustification on top of a small numpy PPO, a DQN
baseline, and an exact dynamic-programming oracle.
"""

from hems.env import (
    ApplianceSpec,
    DayProfile,
    EnvState,
    HomeEnergyEnv,
    Snapshot,
    StepOutcome,
    force_action,
    hourly_reward,
    reset,
    step,
)
from hems.errors import HemsError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "ApplianceSpec",
    "DayProfile",
    "EnvState",
    "HomeEnergyEnv",
    "Snapshot",
    "StepOutcome",
    "force_action",
    "hourly_reward",
    "reset",
    "step",
    "HemsError",
    "NumericalError",
    "ValidationError",
]
