"""Random-access collision channel with block Rayleigh fading.

Each slot, transmitter ``i`` is active with probability ``q_i`` and, when
active, its power gain is exponential with mean ``mu_i``. The receiver sees
``gamma = P * sum(active gains)``; a slot carries a decodable packet only
when exactly one transmitter is active.

Gains are drawn from the exponential truncated at its ``1 - eps`` quantile,
``mu_i * ln(1/eps)``, so the received power has a finite cap ``gamma_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_TRANSMITTERS = 20
# slots generated per batch; fixed so streams do not depend on the horizon split
CHUNK_SLOTS = 1 << 16


class ConfigError(ValueError):
    """Raised for parameter sets that violate a model invariant."""


@dataclass(frozen=True)
class ChannelParams:
    means: tuple[float, ...]
    access_probs: tuple[float, ...]
    power: float = 1.0
    gain_quantile_eps: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "access_probs", tuple(float(q) for q in self.access_probs))
        n = len(self.means)
        if n < 1:
            raise ConfigError("need at least one transmitter")
        if n > MAX_TRANSMITTERS:
            raise ConfigError(
                f"n={n} exceeds {MAX_TRANSMITTERS}: subset enumeration is 2^n - 1"
            )
        if len(self.access_probs) != n:
            raise ConfigError("means and access_probs must have the same length")
        if not all(m > 0 and math.isfinite(m) for m in self.means):
            raise ConfigError("mean gains must be positive and finite")
        if not all(0.0 <= q <= 1.0 for q in self.access_probs):
            raise ConfigError("access probabilities must lie in [0, 1]")
        if not self.power > 0:
            raise ConfigError("transmit power must be positive")
        if not 0.0 < self.gain_quantile_eps <= 0.01:
            raise ConfigError("gain_quantile_eps must lie in (0, 0.01]")

    @classmethod
    def homogeneous(cls, n, mean=1.0, q=0.1, power=1.0, eps=1e-6):
        return cls((mean,) * n, (q,) * n, power, eps)

    @property
    def n(self) -> int:
        return len(self.means)

    @property
    def gain_caps(self) -> np.ndarray:
        """Per-link gain cap ``mu_i * ln(1/eps)``."""
        return np.asarray(self.means) * math.log(1.0 / self.gain_quantile_eps)

    @property
    def received_means(self) -> tuple[float, ...]:
        """Per-link received-power means ``P * mu_i``."""
        return tuple(self.power * m for m in self.means)

    def with_access_prob(self, q: float) -> "ChannelParams":
        return ChannelParams(self.means, (q,) * self.n, self.power, self.gain_quantile_eps)


def default_gamma_max(params: ChannelParams) -> float:
    """Received-power cap implied by the per-link gain caps."""
    return float(params.power * params.gain_caps.sum())


@dataclass(frozen=True)
class SlotRealization:
    active_set: tuple[int, ...]
    gains: tuple[float, ...]
    gamma: float
    success: bool
    rate: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rate", rate_of(self.gamma))

    @property
    def n_active(self) -> int:
        return len(self.active_set)


def rate_of(gamma, base: float = 2.0):
    """Achievable rate ``log_base(1 + gamma)``; base 2 gives bits/channel use."""
    r = np.log1p(gamma)
    if base != math.e:
        r = r / math.log(base)
    return float(r) if np.ndim(r) == 0 else r


def _truncated_exponential(rng, means, eps):
    # inverse CDF of Exp(mean) conditioned on X <= mean * ln(1/eps)
    means = np.asarray(means, dtype=float)
    u = rng.random(means.shape)
    return -means * np.log1p(-u * (1.0 - eps))


def sample_slot(params: ChannelParams, gamma_max: float, rng: np.random.Generator) -> SlotRealization:
    active = rng.random(params.n) < np.asarray(params.access_probs)
    idx = np.flatnonzero(active)
    gains = _truncated_exponential(rng, np.asarray(params.means)[idx], params.gain_quantile_eps)
    gamma = min(params.power * float(gains.sum()), gamma_max)
    return SlotRealization(
        active_set=tuple(int(i) for i in idx),
        gains=tuple(float(g) for g in gains),
        gamma=gamma,
        success=idx.size == 1,
    )


@dataclass
class SlotStream:
    """Per-slot arrays for a whole horizon."""

    gamma: np.ndarray
    n_active: np.ndarray

    @property
    def success(self) -> np.ndarray:
        return self.n_active == 1

    def __len__(self):
        return self.gamma.size


def sample_slots(params: ChannelParams, gamma_max: float, size: int, rng: np.random.Generator) -> SlotStream:
    """Vectorised equivalent of ``size`` calls to :func:`sample_slot`.

    Draws are made in fixed-size chunks: per chunk one ``(chunk, n)`` block of
    access uniforms, then one truncated-exponential draw per active link in
    row-major order. Output is a deterministic function of the generator state.
    """
    q = np.asarray(params.access_probs)
    means = np.asarray(params.means)
    gamma = np.empty(size)
    n_active = np.empty(size, dtype=np.int8)
    for start in range(0, size, CHUNK_SLOTS):
        stop = min(start + CHUNK_SLOTS, size)
        active = rng.random((stop - start, params.n)) < q
        rows, cols = np.nonzero(active)
        gains = _truncated_exponential(rng, means[cols], params.gain_quantile_eps)
        total = np.bincount(rows, weights=gains, minlength=stop - start)
        np.minimum(params.power * total, gamma_max, out=gamma[start:stop])
        n_active[start:stop] = active.sum(axis=1)
    return SlotStream(gamma, n_active)
