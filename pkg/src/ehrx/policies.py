"""Reference decision rules sharing the controller's battery model."""

from __future__ import annotations

import enum

from .channel import SlotRealization
from .controller import EnergyConfig


class PolicyKind(enum.IntEnum):
    LYAPUNOV = 0
    GENIE = 1
    GREEDY = 2
    ALWAYS_HARVEST = 3

    @property
    def tag(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "PolicyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).strip().upper().replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown policy {value!r}; expected one of "
                             f"{[p.tag for p in cls]}") from None


def _affordable(energy, gamma, cfg: EnergyConfig) -> bool:
    return energy >= cfg.decode_cost(gamma) + cfg.fixed_drain


def genie_decide(energy: float, slot: SlotRealization, cfg: EnergyConfig) -> int:
    """Decode exactly the collision-free slots it can pay for."""
    return int(slot.success and _affordable(energy, slot.gamma, cfg))


def greedy_decide(energy: float, gamma: float, cfg: EnergyConfig) -> int:
    """Decode every busy slot it can pay for."""
    return int(gamma > 0 and _affordable(energy, gamma, cfg))


def always_harvest_decide(*_args, **_kwargs) -> int:
    return 0
