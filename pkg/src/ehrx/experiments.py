"""Parameter sweeps, lemma validation and CSV output.

Seeding: replicate ``k`` of every sweep point draws its slots from
``default_rng(derive_seed(master_seed, k))``. Sweep points therefore share
common random numbers, and a one-point sweep reproduces :func:`ehrx.sim.run`
called with the derived seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ChannelParams, ConfigError, default_gamma_max, sample_slots
from .collision import density_table, estimate_success_prob_mc
from .controller import EnergyConfig, compute_B
from .policies import PolicyKind
from .sim import resolve_warmup, run, simulate_stream, success_probs

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_SCHEMA_VERSION = 1


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of replicate ``index``: first 64-bit word of SeedSequence([master, index])."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_axis(name, values):
    values = [float(v) for v in values]
    if not values:
        raise ConfigError(f"{name} must be non-empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name} must be strictly increasing")
    return tuple(values)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[float, ...]
    c_values: tuple[float, ...] = (0.5, 1.0, 2.0)
    v: float | None = None  # fixed V for q sweeps

    def __post_init__(self):
        if self.variable not in ("V", "q"):
            raise ConfigError(f"sweep variable must be 'V' or 'q', got {self.variable!r}")
        object.__setattr__(self, "values", _check_axis(f"{self.variable} values", self.values))
        object.__setattr__(self, "c_values", _check_axis("c values", self.c_values))
        if self.variable == "q" and not all(0 <= q <= 1 for q in self.values):
            raise ConfigError("q values must lie in [0, 1]")
        if self.variable == "V" and not all(v > 0 for v in self.values):
            raise ConfigError("V values must be positive")


@dataclass(frozen=True)
class LemmaSettings:
    n_samples: int = 10_000_000
    bins: int = 40
    tolerance: float = 0.02
    min_count: int = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    channel: ChannelParams
    energy: EnergyConfig
    horizon: int = 1_000_000
    warmup: int | None = 10_000
    seeds: int = 10
    master_seed: int = 2024
    policy: str = "lyapunov"
    fast_ps: bool = False
    jobs: int = 1
    sweep_v: SweepSpec | None = None
    sweep_q: SweepSpec | None = None
    lemma: LemmaSettings = field(default_factory=LemmaSettings)
    output_path: str | None = None

    def __post_init__(self):
        resolve_warmup(self.horizon, self.warmup)
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        PolicyKind.parse(self.policy)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        """Resolved settings; the output destination is not part of the experiment."""
        d = asdict(self)
        del d["output_path"]
        return d


def _broadcast(value, n, name):
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ConfigError(f"channel.{name} has {len(value)} entries, expected n={n}")
        return tuple(value)
    return (value,) * n


def _log_base(value):
    if isinstance(value, str):
        if value.strip().lower() == "e":
            return math.e
        value = float(value)
    return float(value)


def config_from_dict(raw: dict) -> ExperimentConfig:
    ch = dict(raw.get("channel", {}))
    means = ch.get("means", 1.0)
    n = int(ch.get("n", len(means) if isinstance(means, (list, tuple)) else 10))
    channel = ChannelParams(
        means=_broadcast(means, n, "means"),
        access_probs=_broadcast(ch.get("access_probs", 0.1), n, "access_probs"),
        power=float(ch.get("power", 1.0)),
        gain_quantile_eps=float(ch.get("gain_quantile_eps", 1e-6)),
    )
    en = dict(raw.get("energy", {}))
    en.setdefault("gamma_max", default_gamma_max(channel))
    if "log_base" in en:
        en["log_base"] = _log_base(en["log_base"])
    energy = EnergyConfig(**{k: float(v) for k, v in en.items()})

    rn = raw.get("run", {})
    sv = raw.get("sweep_v")
    sq = raw.get("sweep_q")
    lm = raw.get("lemma", {})
    return ExperimentConfig(
        channel=channel,
        energy=energy,
        horizon=int(rn.get("horizon", 1_000_000)),
        warmup=None if rn.get("warmup") is None else int(rn["warmup"]),
        seeds=int(rn.get("seeds", 10)),
        master_seed=int(rn.get("seed", 2024)),
        policy=str(rn.get("policy", "lyapunov")),
        fast_ps=bool(rn.get("fast_ps", False)),
        jobs=int(rn.get("jobs", 1)),
        sweep_v=None if sv is None else SweepSpec("V", sv["v_values"], sv.get("c_values", (0.5, 1.0, 2.0))),
        sweep_q=None if sq is None else SweepSpec(
            "q", sq["q_values"], sq.get("c_values", (0.5, 1.0, 2.0)), float(sq.get("v", 200.0))),
        lemma=LemmaSettings(
            n_samples=int(lm.get("n_samples", 10_000_000)),
            bins=int(lm.get("bins", 40)),
            tolerance=float(lm.get("tolerance", 0.02)),
            min_count=int(lm.get("min_count", 1000)),
        ),
        output_path=raw.get("output", {}).get("path"),
    )


def load_config(path=None) -> ExperimentConfig:
    """Read a TOML experiment file; ``None`` loads the shipped default setup."""
    if path is None:
        text = resources.files("ehrx").joinpath("data/defaults.toml").read_text()
    else:
        text = Path(path).read_text()
    return config_from_dict(tomllib.loads(text))


def shipped_config(name: str) -> Path:
    return Path(str(resources.files("ehrx").joinpath(f"data/{name}.toml")))


# --- running ---------------------------------------------------------------

def _mean_se(values):
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _stream_task(args):
    """All (c, V) runs that share one slot stream; returns {(c, V): throughput}."""
    params, energy, horizon, warmup, seed, points, fast_ps = args
    stream = sample_slots(params, energy.gamma_max, horizon, np.random.default_rng(seed))
    ps = success_probs(stream, params, energy, fast_ps)
    out = {}
    for c, v in points:
        cfg = energy.replace(decode_cost_c=c, v=v)
        out[(c, v)] = simulate_stream("lyapunov", stream, params, cfg, warmup, ps=ps).throughput
    return out


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_replicates(config: ExperimentConfig, policy=None):
    """One :class:`SimMetrics` per replicate, in replicate order."""
    policy = PolicyKind.parse(policy or config.policy)
    return [
        run(policy, config.channel, config.energy, config.horizon, derive_seed(config.master_seed, k),
            config.warmup, fast_ps=config.fast_ps)
        for k in range(config.seeds)
    ]


def sweep_v(config: ExperimentConfig):
    """Rows ``(c, V, mean_throughput, stderr, B_over_V)`` sorted by (c, V)."""
    spec = config.sweep_v
    if spec is None:
        raise ConfigError("config has no [sweep_v] section")
    points = [(c, v) for c in spec.c_values for v in spec.values]
    warmup = resolve_warmup(config.horizon, config.warmup)
    tasks = [
        (config.channel, config.energy, config.horizon, warmup,
         derive_seed(config.master_seed, k), points, config.fast_ps)
        for k in range(config.seeds)
    ]
    results = _map(_stream_task, tasks, config.jobs)
    rows = []
    for c, v in points:
        mean, se = _mean_se([r[(c, v)] for r in results])
        b = compute_B(config.energy.replace(decode_cost_c=c, v=v))
        rows.append({"c": c, "V": v, "mean_throughput": mean, "stderr": se, "B_over_V": b / v})
    return rows


def sweep_q(config: ExperimentConfig):
    """Rows ``(c, q, mean_throughput, stderr)`` and the maximising q per c."""
    spec = config.sweep_q
    if spec is None:
        raise ConfigError("config has no [sweep_q] section")
    v = spec.v if spec.v is not None else config.energy.v
    warmup = resolve_warmup(config.horizon, config.warmup)
    points = [(c, v) for c in spec.c_values]
    tasks, keys = [], []
    for q in spec.values:
        params = config.channel.with_access_prob(q)
        for k in range(config.seeds):
            tasks.append((params, config.energy, config.horizon, warmup,
                          derive_seed(config.master_seed, k), points, config.fast_ps))
            keys.append(q)
    results = _map(_stream_task, tasks, config.jobs)
    by_q = {q: [r for key, r in zip(keys, results) if key == q] for q in spec.values}
    rows = []
    for c in spec.c_values:
        for q in spec.values:
            mean, se = _mean_se([r[(c, v)] for r in by_q[q]])
            rows.append({"c": c, "q": q, "mean_throughput": mean, "stderr": se})
    return rows, argmax_q(rows)


def argmax_q(rows):
    best = {}
    for r in rows:
        if r["c"] not in best or r["mean_throughput"] > best[r["c"]]["mean_throughput"]:
            best[r["c"]] = r
    return {c: r["q"] for c, r in sorted(best.items())}


@dataclass
class LemmaReport:
    rows: list
    max_abs_dev: float
    tolerance: float
    min_count: int

    @property
    def offending(self):
        return [r for r in self.rows if r["checked"] and r["abs_dev"] > self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.offending


def default_bin_edges(params: ChannelParams, bins: int, tail=5e-3):
    """Equal-width bins from 0 to the busy-slot gamma quantile ``1 - tail``.

    The quantile comes from the closed-form mixture density integrated on a
    fine grid, so every bin is well populated at 1e7 samples.
    """
    table = density_table(params)
    p_busy = 1.0 - table.empty_weight
    grid = np.linspace(0.0, default_gamma_max(params), 200_001)
    pdf = table.mixture_pdf(grid) / p_busy
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
    hi = float(np.interp(1.0 - tail, cdf, grid))
    return np.linspace(0.0, hi, bins + 1)


def validate_lemma(config: ExperimentConfig, n_samples=None, bins=None, tolerance=None,
                   min_count=None, bin_edges=None) -> LemmaReport:
    """Binned Monte Carlo success frequency against the closed form at bin midpoints."""
    lm = config.lemma
    n_samples = lm.n_samples if n_samples is None else int(n_samples)
    bins = lm.bins if bins is None else int(bins)
    tolerance = lm.tolerance if tolerance is None else float(tolerance)
    min_count = lm.min_count if min_count is None else int(min_count)
    if n_samples < 100_000:
        raise ConfigError("validate-lemma needs at least 1e5 samples")
    params = config.channel
    edges = default_bin_edges(params, bins) if bin_edges is None else np.asarray(bin_edges, float)
    rng = np.random.default_rng(derive_seed(config.master_seed, 0))
    est = estimate_success_prob_mc(params, edges, n_samples, rng)
    mids = est.midpoints
    closed = density_table(params).success_prob(np.maximum(mids, 1e-300))
    rows = []
    max_dev = 0.0
    for lo, hi, mid, n, e, cf in zip(edges[:-1], edges[1:], mids, est.counts, est.estimate, closed):
        dev = abs(e - cf) if n > 0 else float("nan")
        checked = bool(n >= min_count)
        if checked:
            max_dev = max(max_dev, dev)
        rows.append({"bin_lo": lo, "bin_hi": hi, "midpoint": mid, "count": int(n),
                     "empirical": e, "closed_form": cf, "abs_dev": dev, "checked": checked})
    return LemmaReport(rows, max_dev, tolerance, min_count)


# --- CSV ---------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_csv(command: str, config: ExperimentConfig, rows, columns, trailer=()):
    """CSV text with a ``#`` header carrying schema version and resolved config."""
    buf = io.StringIO()
    buf.write(f"# ehrx-csv v{CSV_SCHEMA_VERSION} command={command}\n")
    buf.write("# config=" + json.dumps(config.to_dict(), sort_keys=True, default=float) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    for line in trailer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


SWEEP_V_COLUMNS = ["c", "V", "mean_throughput", "stderr", "B_over_V"]
SWEEP_Q_COLUMNS = ["c", "q", "mean_throughput", "stderr"]
LEMMA_COLUMNS = ["bin_lo", "bin_hi", "midpoint", "count", "empirical", "closed_form", "abs_dev", "checked"]
