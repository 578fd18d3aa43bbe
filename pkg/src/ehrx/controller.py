"""Perturbed-Lyapunov decode/harvest index policy and the battery recursion.

The battery ``E`` is pushed towards the perturbation level ``theta``. Each
busy slot the receiver compares

    decode : V (1-tau) log(1+gamma) P_s + (E - theta) phi_de(gamma)
    harvest: -(E - theta) (1-tau) eta gamma

and decodes when the first is at least the second. With
``theta = V/eta + phi_de(gamma_max) + phi_se + phi_pi`` this keeps
``0 <= E < theta + gamma_max`` and never decodes below the threshold
``phi_de(gamma_max) + phi_se + phi_pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel import ConfigError


@dataclass(frozen=True)
class EnergyConfig:
    gamma_max: float
    v: float = 200.0
    tau: float = 0.01
    eta: float = 0.7
    phi_se: float = 0.01
    phi_pi: float = 0.01
    decode_cost_c: float = 1.0
    decode_cost_offset: float = 0.5
    log_base: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ConfigError("tau must lie in [0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if not self.v > 0:
            raise ConfigError("V must be positive")
        if not self.gamma_max > 0:
            raise ConfigError("gamma_max must be positive")
        if min(self.phi_se, self.phi_pi, self.decode_cost_c, self.decode_cost_offset) < 0:
            raise ConfigError("energy costs must be non-negative")
        if not (self.log_base > 1.0):
            raise ConfigError("log_base must exceed 1")

    def replace(self, **changes) -> "EnergyConfig":
        return replace(self, **changes)

    def log(self, gamma):
        return math.log1p(gamma) / math.log(self.log_base)

    def decode_cost(self, gamma):
        """``phi_de(gamma) = c * log(1 + gamma) + offset``."""
        return self.decode_cost_c * self.log(gamma) + self.decode_cost_offset

    @property
    def fixed_drain(self) -> float:
        return self.phi_se + self.phi_pi

    @property
    def harvest_threshold(self) -> float:
        """Battery level at or below which the policy always harvests."""
        return self.decode_cost(self.gamma_max) + self.fixed_drain


@dataclass
class ControllerState:
    energy: float
    theta: float

    @classmethod
    def initial(cls, cfg: EnergyConfig) -> "ControllerState":
        return cls(energy=cfg.harvest_threshold, theta=compute_theta(cfg))


@dataclass(frozen=True)
class DecisionRecord:
    rho: int
    index_decode: float
    index_harvest: float
    ps: float
    affordable: bool


def compute_theta(cfg: EnergyConfig) -> float:
    return cfg.v / cfg.eta + cfg.harvest_threshold


def compute_B(cfg: EnergyConfig) -> float:
    """Drift constant ``(gamma_max^2 + phi_de(gamma_max)^2 + (phi_se+phi_pi)^2) / 2``."""
    return 0.5 * (cfg.gamma_max**2 + cfg.decode_cost(cfg.gamma_max) ** 2 + cfg.fixed_drain**2)


def decide(state: ControllerState, gamma: float, ps: float, cfg: EnergyConfig) -> DecisionRecord:
    cost = cfg.decode_cost(gamma) if gamma > 0 else cfg.decode_cost_offset
    affordable = state.energy >= cost + cfg.fixed_drain
    if gamma <= 0:
        return DecisionRecord(0, 0.0, 0.0, ps, affordable)
    gap = state.energy - state.theta
    index_decode = cfg.v * (1.0 - cfg.tau) * cfg.log(gamma) * ps + gap * cost
    index_harvest = -gap * (1.0 - cfg.tau) * cfg.eta * gamma
    rho = int(index_decode >= index_harvest)
    return DecisionRecord(rho, index_decode, index_harvest, ps, affordable)


def battery_step(state: ControllerState, rho: int, gamma: float, cfg: EnergyConfig) -> float:
    """One step of ``E <- [E - rho phi_de - phi_se - phi_pi + (1-rho)(1-tau) eta gamma]^+``.

    Updates ``state.energy`` in place and returns the new level.
    """
    spent = rho * cfg.decode_cost(gamma) + cfg.fixed_drain
    gained = (1 - rho) * (1.0 - cfg.tau) * cfg.eta * gamma
    state.energy = max(0.0, state.energy - spent + gained)
    return state.energy
