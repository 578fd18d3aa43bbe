"""Energy-harvesting receiver on a slotted random-access collision channel."""

from .channel import ChannelParams, ConfigError, SlotRealization, default_gamma_max, rate_of, sample_slot, sample_slots
from .collision import SubsetDensityTable, estimate_success_prob_mc, hypoexp_pdf, success_prob
from .controller import (
    ControllerState,
    DecisionRecord,
    EnergyConfig,
    battery_step,
    compute_B,
    compute_theta,
    decide,
)
from .policies import PolicyKind, always_harvest_decide, genie_decide, greedy_decide
from .sim import InvariantError, SimMetrics, run

__version__ = "0.1.0"
