"""Seeded slot-by-slot simulation of the energy-harvesting receiver.

Channel draws are vectorised up front (:func:`ehrx.channel.sample_slots`);
the battery chain is inherently sequential and runs in a compiled loop.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .channel import ChannelParams, ConfigError, SlotStream, sample_slots
from .collision import SuccessProbGrid, density_table
from .controller import EnergyConfig, compute_B, compute_theta
from .policies import PolicyKind

DEFAULT_WARMUP = 10_000

# accumulator layout of the compiled loop
_THR, _THR1, _DEC, _HARV, _IDLE, _COLL, _WASTE, _EMIN, _EMAX, _ESUM, _VIOL, _BREACH, _LOW, _SLOTS = range(14)
_NSTAT = 14


class InvariantError(RuntimeError):
    """The Lyapunov policy's battery left ``[0, theta + gamma_max)``."""


@numba.njit(cache=True)
def _simulate(gamma, n_active, ps, policy, v, tau, eta, drain, c, offset, inv_ln_base,
              theta, threshold, gamma_max, e0, warmup, energy_trace, rho_trace):
    stats = np.zeros((2, _NSTAT))
    for w in range(2):
        stats[w, _EMIN] = np.inf
        stats[w, _EMAX] = -np.inf
    upper = theta + gamma_max
    e = e0
    record = energy_trace.size > 0
    for t in range(gamma.size):
        if record:
            energy_trace[t] = e
        if e < 0.0 or e >= upper:
            stats[0, _BREACH] += 1
            if t >= warmup:
                stats[1, _BREACH] += 1
        g = gamma[t]
        k = n_active[t]
        lg = math.log1p(g) * inv_ln_base
        cost = c * lg + offset
        afford = e >= cost + drain
        rho = 0
        if g > 0.0:
            if policy == 0:
                gap = e - theta
                idx_dec = v * (1.0 - tau) * lg * ps[t] + gap * cost
                idx_harv = -gap * (1.0 - tau) * eta * g
                if idx_dec >= idx_harv:
                    rho = 1
            elif policy == 1:
                if k == 1 and afford:
                    rho = 1
            elif policy == 2:
                if afford:
                    rho = 1
        low = rho == 1 and e <= threshold
        viol = rho == 1 and not afford
        if viol:
            rho = 0
        if record:
            rho_trace[t] = rho
        for w in range(2):
            if w == 1 and t < warmup:
                continue
            s = stats[w]
            s[_SLOTS] += 1
            if rho == 1:
                s[_DEC] += 1
                if k == 1:
                    s[_THR] += (1.0 - tau) * lg
                    s[_THR1] += lg
                else:
                    s[_WASTE] += 1
            else:
                s[_HARV] += 1
            if k == 0:
                s[_IDLE] += 1
            elif k > 1:
                s[_COLL] += 1
            if viol:
                s[_VIOL] += 1
            if low:
                s[_LOW] += 1
            if e < s[_EMIN]:
                s[_EMIN] = e
            if e > s[_EMAX]:
                s[_EMAX] = e
            s[_ESUM] += e
        e = e - rho * cost - drain + (1 - rho) * (1.0 - tau) * eta * g
        if e < 0.0:
            e = 0.0
    if record:
        energy_trace[gamma.size] = e
    if e < 0.0 or e >= upper:
        stats[0, _BREACH] += 1
        stats[1, _BREACH] += 1
    return stats, e


@dataclass(frozen=True)
class SimMetrics:
    """Horizon aggregates. Counts and averages cover the post-warmup window of
    ``slots = horizon - warmup`` slots; ``*_full`` fields cover every slot."""

    policy: str
    horizon: int
    warmup: int
    slots: int
    theta: float
    throughput: float
    throughput_eq1: float
    decode_count: int
    harvest_count: int
    idle_count: int
    collision_count: int
    wasted_decodes: int
    energy_min: float
    energy_max: float
    energy_mean: float
    violations: int
    low_energy_decodes: int
    bound_breaches: int
    optimality_gap_bound: float
    throughput_full: float
    throughput_eq1_full: float
    violations_full: int
    energy_max_full: float
    energy_final: float

    def as_dict(self):
        return asdict(self)


@dataclass
class Trace:
    energy: np.ndarray  # E(0) .. E(T)
    rho: np.ndarray
    gamma: np.ndarray
    n_active: np.ndarray
    ps: np.ndarray


def success_probs(stream: SlotStream, params: ChannelParams, cfg: EnergyConfig, fast_ps=False):
    """P_s for every busy slot of ``stream``; 0 on idle slots."""
    ps = np.zeros(len(stream))
    busy = stream.gamma > 0
    if busy.any():
        if fast_ps:
            ps[busy] = SuccessProbGrid(params, cfg.gamma_max)(stream.gamma[busy])
        else:
            ps[busy] = density_table(params).success_prob(stream.gamma[busy])
    return ps


def resolve_warmup(horizon, warmup):
    if warmup is None:
        warmup = DEFAULT_WARMUP if horizon > DEFAULT_WARMUP else 0
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    if not 0 <= warmup < horizon:
        raise ConfigError("warmup must satisfy 0 <= warmup < horizon")
    return int(warmup)


def simulate_stream(policy, stream: SlotStream, params: ChannelParams, cfg: EnergyConfig,
                    warmup: int = 0, ps=None, fast_ps=False, trace=False, check_invariants=True):
    """Run one policy over a pre-drawn slot stream.

    Returns ``SimMetrics`` or ``(SimMetrics, Trace)`` when ``trace`` is set.
    """
    policy = PolicyKind.parse(policy)
    horizon = len(stream)
    warmup = resolve_warmup(horizon, warmup)
    if policy is PolicyKind.LYAPUNOV and ps is None:
        ps = success_probs(stream, params, cfg, fast_ps)
    if ps is None:
        ps = np.zeros(horizon)
    theta = compute_theta(cfg)
    e_trace = np.empty(horizon + 1 if trace else 0)
    r_trace = np.empty(horizon if trace else 0, dtype=np.int8)
    stats, e_final = _simulate(
        stream.gamma, stream.n_active, ps, int(policy),
        cfg.v, cfg.tau, cfg.eta, cfg.fixed_drain, cfg.decode_cost_c, cfg.decode_cost_offset,
        1.0 / math.log(cfg.log_base), theta, cfg.harvest_threshold, cfg.gamma_max,
        cfg.harvest_threshold, warmup, e_trace, r_trace,
    )
    full, win = stats
    if check_invariants and policy is PolicyKind.LYAPUNOV and full[_BREACH] > 0:
        raise InvariantError(
            f"battery left [0, theta + gamma_max) in {int(full[_BREACH])} slots"
        )
    n = win[_SLOTS]
    m = SimMetrics(
        policy=policy.tag,
        horizon=horizon,
        warmup=warmup,
        slots=int(n),
        theta=theta,
        throughput=win[_THR] / n,
        throughput_eq1=win[_THR1] / n,
        decode_count=int(win[_DEC]),
        harvest_count=int(win[_HARV]),
        idle_count=int(win[_IDLE]),
        collision_count=int(win[_COLL]),
        wasted_decodes=int(win[_WASTE]),
        energy_min=win[_EMIN],
        energy_max=win[_EMAX],
        energy_mean=win[_ESUM] / n,
        violations=int(win[_VIOL]),
        low_energy_decodes=int(win[_LOW]),
        bound_breaches=int(full[_BREACH]),
        optimality_gap_bound=compute_B(cfg) / cfg.v,
        throughput_full=full[_THR] / horizon,
        throughput_eq1_full=full[_THR1] / horizon,
        violations_full=int(full[_VIOL]),
        energy_max_full=full[_EMAX],
        energy_final=e_final,
    )
    if trace:
        return m, Trace(e_trace, r_trace, stream.gamma, stream.n_active, ps)
    return m


def run(policy, params: ChannelParams, cfg: EnergyConfig, horizon: int, seed: int,
        warmup=None, fast_ps=False, trace=False, check_invariants=True):
    """Simulate ``horizon`` slots from ``default_rng(seed)``."""
    warmup = resolve_warmup(horizon, warmup)
    stream = sample_slots(params, cfg.gamma_max, horizon, np.random.default_rng(seed))
    return simulate_stream(policy, stream, params, cfg, warmup, fast_ps=fast_ps,
                           trace=trace, check_invariants=check_invariants)
