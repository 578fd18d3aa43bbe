"""Success probability of a slot given its received power.

The received power conditioned on the active set ``A`` is a sum of
independent exponentials, i.e. hypo-exponential. Mixing over all non-empty
active sets with their Bernoulli priors gives the marginal density of gamma;
the share contributed by singleton sets is the probability that the slot is
collision-free.

Means that coincide (or nearly so) make the textbook product formula
singular, so close means are clustered and handled with the
generalized-Erlang (repeated-rate) density instead.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, default_gamma_max, sample_slots

CLUSTER_RTOL = 1e-4


def cluster_means(means, rtol=CLUSTER_RTOL):
    """Single-linkage clustering of positive means on relative gap.

    Returns ``(centres, labels)``: one arithmetic-mean centre per cluster
    (sorted ascending) and the cluster index of every input mean.
    """
    means = np.asarray(means, dtype=float)
    order = np.argsort(means, kind="stable")
    labels = np.empty(means.size, dtype=int)
    centres = []
    members = [order[0]]
    for prev, cur in zip(order[:-1], order[1:]):
        if (means[cur] - means[prev]) <= rtol * means[prev]:
            members.append(cur)
        else:
            centres.append(means[members].mean())
            labels[members] = len(centres) - 1
            members = [cur]
    centres.append(means[members].mean())
    labels[members] = len(centres) - 1
    return np.array(centres), labels


def _hypoexp_distinct(x, means):
    # sum_i mu_i^-1 exp(-x/mu_i) prod_{j != i} mu_i / (mu_i - mu_j)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i, mi in enumerate(means):
        w = 1.0 / mi
        for j, mj in enumerate(means):
            if j != i:
                w *= mi / (mi - mj)
        out += w * np.exp(-x / mi)
    return out


def gen_erlang_coeffs(rates, shapes):
    """Partial-fraction coefficients of a sum of Gamma(shape_j, rate_j) laws.

    Rates must be distinct. Returns a list ``coef`` with ``coef[j][m]`` the
    weight of ``x**m * exp(-rate_j * x)`` in the density.
    """
    rates = [float(r) for r in rates]
    shapes = [int(k) for k in shapes]
    scale = math.prod(r**k for r, k in zip(rates, shapes))
    coef = []
    for j, (lj, kj) in enumerate(zip(rates, shapes)):
        others = [(lj_other - lj, k) for t, (lj_other, k) in enumerate(zip(rates, shapes)) if t != j]
        # derivatives at s = -rate_j of g(s) = prod_{l != j} (rate_l + s)^(-k_l)
        g = [math.prod(d ** (-k) for d, k in others)]
        h = [
            sum(-k * (-1) ** r * math.factorial(r) / d ** (r + 1) for d, k in others)
            for r in range(kj)
        ]
        for n in range(1, kj):
            g.append(sum(math.comb(n - 1, r) * h[r] * g[n - 1 - r] for r in range(n)))
        row = np.empty(kj)
        for m in range(1, kj + 1):
            a = scale * g[kj - m] / math.factorial(kj - m)
            row[m - 1] = a / math.factorial(m - 1)
        coef.append(row)
    return coef


def _eval_terms(x, rates, coef, shift=0.0):
    """Evaluate ``sum_j exp(-(rate_j - shift) x) sum_m coef[j][m] x**m``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for lj, row in zip(rates, coef):
        poly = np.zeros_like(x)
        for c in row[::-1]:
            poly = poly * x + c
        out += poly * np.exp(-(lj - shift) * x)
    return out


def _hypoexp_grouped(x, centres, shapes):
    rates = 1.0 / np.asarray(centres)
    return _eval_terms(x, rates, gen_erlang_coeffs(rates, shapes))


def hypoexp_pdf(x, means):
    """Density at ``x`` of a sum of independent exponentials with the given means.

    Distinct means use the product formula; repeated or nearly repeated means
    (relative gap below ``CLUSTER_RTOL``) use the generalized-Erlang form on
    the clustered means. Negative ``x`` gives 0.
    """
    means = np.atleast_1d(np.asarray(means, dtype=float))
    if means.size == 0:
        raise ValueError("hypoexp_pdf needs at least one mean")
    if not np.all(means > 0):
        raise ValueError("means must be positive")
    x = np.asarray(x, dtype=float)
    centres, labels = cluster_means(means)
    xs = np.maximum(x, 0.0)
    if centres.size == means.size:
        val = _hypoexp_distinct(xs, centres)
    else:
        val = _hypoexp_grouped(xs, centres, np.bincount(labels, minlength=centres.size))
    val = np.where(x < 0, 0.0, np.maximum(val, 0.0))
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class SubsetDensityTable:
    """Every non-empty active set with its prior and received-power density.

    ``subsets`` is a boolean ``(2^n - 1, n)`` membership matrix ordered by
    bitmask. Mixture densities are stored collapsed as coefficients on the
    terms ``x**m * exp(-rate_j x)``, one rate per cluster of received means.
    """

    params: ChannelParams
    subsets: np.ndarray
    weights: np.ndarray
    empty_weight: float
    rates: np.ndarray
    labels: np.ndarray
    mixture_coef: tuple
    single_coef: tuple

    @classmethod
    def build(cls, params: ChannelParams) -> "SubsetDensityTable":
        n = params.n
        q = np.asarray(params.access_probs)
        masks = np.arange(1, 2**n, dtype=np.int64)
        subsets = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
        weights = np.where(subsets, q, 1.0 - q).prod(axis=1)
        empty_weight = float(np.prod(1.0 - q))

        centres, labels = cluster_means(params.received_means)
        rates = 1.0 / centres
        k = centres.size
        onehot = np.eye(k, dtype=np.int64)[labels]
        counts = subsets.astype(np.int64) @ onehot
        live = weights > 0
        uniq, inv = np.unique(counts[live], axis=0, return_inverse=True)
        group_w = np.zeros(len(uniq))
        np.add.at(group_w, inv.ravel(), weights[live])

        mix = [np.zeros(n + 1) for _ in range(k)]
        single = [np.zeros(n + 1) for _ in range(k)]
        for cnt, w in zip(uniq, group_w):
            present = np.flatnonzero(cnt)
            coef = gen_erlang_coeffs(rates[present], cnt[present])
            for j, row in zip(present, coef):
                mix[j][: row.size] += w * row
            if cnt.sum() == 1:
                single[present[0]][0] += w * coef[0][0]
        return cls(
            params=params,
            subsets=subsets,
            weights=weights,
            empty_weight=empty_weight,
            rates=rates,
            labels=labels,
            mixture_coef=tuple(np.trim_zeros(r, "b") if r.any() else r[:1] for r in mix),
            single_coef=tuple(r[:1] for r in single),
        )

    def subset_pdf(self, k: int, x):
        """Received-power density given the ``k``-th active set."""
        means = np.asarray(self.params.received_means)[self.subsets[k]]
        return hypoexp_pdf(x, means)

    def mixture_pdf(self, x):
        """Unnormalised density of gamma jointly with a non-idle slot."""
        return _eval_terms(x, self.rates, self.mixture_coef)

    def single_pdf(self, x):
        """Density of gamma jointly with exactly one active transmitter."""
        return _eval_terms(x, self.rates, self.single_coef)

    def success_prob(self, gamma):
        """Vectorised ratio of singleton to all-subset density; gamma > 0."""
        shift = self.rates.min()
        num = _eval_terms(gamma, self.rates, self.single_coef, shift)
        den = _eval_terms(gamma, self.rates, self.mixture_coef, shift)
        with np.errstate(divide="ignore", invalid="ignore"):
            ps = np.where(den > 0, num / den, 0.0)
        return np.clip(ps, 0.0, 1.0)


@functools.lru_cache(maxsize=64)
def density_table(params: ChannelParams) -> SubsetDensityTable:
    return SubsetDensityTable.build(params)


def success_prob(gamma, params: ChannelParams):
    """Probability that a slot with received power ``gamma`` is collision-free."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0):
        raise ValueError("success probability is conditioned on gamma > 0")
    if not any(q > 0 for q in params.access_probs):
        raise ValueError("all access probabilities are zero; no slot is ever busy")
    ps = density_table(params).success_prob(g)
    return float(ps) if ps.ndim == 0 else ps


class SuccessProbGrid:
    """Linear interpolation of the success probability on a uniform grid."""

    def __init__(self, params: ChannelParams, gamma_max: float, points: int = 10_000):
        self.grid = np.linspace(0.0, gamma_max, points)
        self.grid[0] = min(1e-12, gamma_max * 1e-12)
        self.values = density_table(params).success_prob(self.grid)

    def __call__(self, gamma):
        return np.interp(gamma, self.grid, self.values)


@dataclass(frozen=True)
class BinnedEstimate:
    edges: np.ndarray
    estimate: np.ndarray  # nan where the bin is empty
    counts: np.ndarray
    successes: np.ndarray

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def estimate_success_prob_mc(params: ChannelParams, bin_edges, n_samples: int, rng) -> BinnedEstimate:
    """Monte Carlo fraction of collision-free slots per received-power bin.

    Idle slots are discarded; sampling continues until ``n_samples`` busy
    slots have been drawn.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin_edges must be strictly increasing")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if not any(q > 0 for q in params.access_probs):
        raise ValueError("all access probabilities are zero; no slot is ever busy")
    nb = edges.size - 1
    counts = np.zeros(nb, dtype=np.int64)
    wins = np.zeros(nb, dtype=np.int64)
    gmax = default_gamma_max(params)
    p_busy = 1.0 - float(np.prod(1.0 - np.asarray(params.access_probs)))
    remaining = n_samples
    while remaining > 0:
        batch = int(min(max(remaining / p_busy * 1.02, 1024), 1 << 21))
        s = sample_slots(params, gmax, batch, rng)
        busy = s.n_active > 0
        g = s.gamma[busy][:remaining]
        ok = s.n_active[busy][:remaining] == 1
        remaining -= g.size
        idx = np.searchsorted(edges, g, side="right") - 1
        inside = (idx >= 0) & (idx < nb)
        counts += np.bincount(idx[inside], minlength=nb)
        wins += np.bincount(idx[inside], weights=ok[inside], minlength=nb).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.where(counts > 0, wins / np.maximum(counts, 1), np.nan)
    return BinnedEstimate(edges, est, counts, wins)
