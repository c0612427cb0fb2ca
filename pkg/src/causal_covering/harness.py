"""OR-tree benchmark family and the seeded regret-sweep runner."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial

import numpy as np
from scipy import stats

from .algorithms import AGENTS, Environment, as_arm_matrix, simple_regret
from .cbn import UNSET, CausalModel, format_intervention, load_model, true_mean
from .errors import ArmOutsideFamily, EmptyReport

log = logging.getLogger(__name__)

CSV_HEADER = ["agent", "T", "mean_regret", "stderr", "runs", "wall_ms"]
# stable ids: adding agents to a config must not reshuffle the seeds of others
AGENT_IDS = {"covering": 1, "direct": 2, "propinf": 3}
_MASK64 = (1 << 64) - 1


# -- OR tree -----------------------------------------------------------------

@dataclass(frozen=True)
class OrTreeSpec:
    h: int = 5
    pi: float = 0.001
    eps: float = 0.05
    w: int = 0

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("tree height must be at least 1")
        if not 0.0 < self.pi < 1.0:
            raise ValueError("pi must lie in (0, 1)")
        if not 0.0 < self.eps < 1.0 - self.pi:
            raise ValueError("eps must lie in (0, 1 - pi)")
        if not 0 <= self.w < 2 ** (self.h - 1):
            raise ValueError(f"w={self.w} is not a valid height-(h-1) vertex")

    @property
    def n_pairs(self) -> int:
        return 2 ** (self.h - 1)


def _level_offsets(h: int) -> list[int]:
    # level 0 = leaves (2^h vertices), level h = root
    offsets, acc = [], 0
    for k in range(h + 1):
        offsets.append(acc)
        acc += 2 ** (h - k)
    return offsets + [acc]


def build_or_tree(spec: OrTreeSpec):
    """Complete binary tree with edges toward the root; returns ``(model, arms)``.

    Leaves are 0 unless intervened.  Vertices just above the leaves fire with
    probability ``pi``, except the privileged one which fires with ``pi + eps``
    when both of its leaves are 1.  Every higher vertex is the OR of its
    parents.  Arms set one sibling leaf pair to each of the four values,
    grouped by pair.
    """
    h = spec.h
    off = _level_offsets(h)
    n = off[-1]
    edges, cpts = [], []
    for _ in range(2 ** h):
        cpts.append([0.0])
    for k in range(1, h + 1):
        for j in range(2 ** (h - k)):
            v = off[k] + j
            edges.append((off[k - 1] + 2 * j, v))
            edges.append((off[k - 1] + 2 * j + 1, v))
            if k == 1:
                top = spec.pi + spec.eps if j == spec.w else spec.pi
                cpts.append([spec.pi, spec.pi, spec.pi, top])
            else:
                cpts.append([0.0, 1.0, 1.0, 1.0])
    edges.sort(key=lambda e: (e[1], e[0]))
    model = CausalModel.build(n, edges, cpts, mean_oracle=partial(or_tree_true_mean, spec))
    arms = []
    for j in range(spec.n_pairs):
        for a0, a1 in ((0, 0), (0, 1), (1, 0), (1, 1)):
            arm = np.full(n, UNSET, dtype=np.int8)
            arm[2 * j], arm[2 * j + 1] = a0, a1
            arms.append(arm)
    return model, np.vstack(arms)


def or_tree_optimal_arm(spec: OrTreeSpec) -> int:
    return 4 * spec.w + 3


def or_tree_true_mean(spec: OrTreeSpec, a) -> float:
    """Closed-form P[root = 1 | do(a)] for an arm of the family (or no intervention)."""
    a = np.asarray(a)
    n = 2 ** (spec.h + 1) - 1
    if a.shape != (n,):
        raise ArmOutsideFamily(f"intervention length {a.shape} does not match the tree ({n})")
    forced = np.flatnonzero(a != UNSET)
    p_w = spec.pi
    if forced.size:
        pair = int(forced[0]) // 2
        if forced.size != 2 or forced[0] != 2 * pair or forced[1] != 2 * pair + 1:
            raise ArmOutsideFamily(f"{format_intervention(a)} is not a sibling-leaf-pair arm")
        if pair == spec.w and a[2 * pair] == 1 and a[2 * pair + 1] == 1:
            p_w = spec.pi + spec.eps
    return 1.0 - (1.0 - spec.pi) ** (spec.n_pairs - 1) * (1.0 - p_w)


# -- seeds ---------------------------------------------------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def run_seed(master: int, agent: str, horizon: int, run: int) -> int:
    """64-bit seed for one run, mixed from (master seed, agent id, T, run index)."""
    h = splitmix64(master & _MASK64)
    for part in (AGENT_IDS[agent], horizon, run):
        h = splitmix64(h ^ (part & _MASK64))
    return h


# -- config and report ---------------------------------------------------------

@dataclass
class ExperimentConfig:
    model: dict
    agents: list
    horizons: list
    repetitions: int = 200
    seed: int = 0
    output: str | None = None
    record_timing: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if list(self.horizons) != sorted(self.horizons):
            raise ValueError("horizons must be sorted ascending")
        for a in self.agents:
            if a not in AGENTS:
                raise ValueError(f"unknown agent {a!r}; choose from {sorted(AGENTS)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def desk_config(**overrides) -> ExperimentConfig:
    doc = dict(model={"or_tree": {"h": 5, "pi": 0.001, "eps": 0.05, "w": 0}},
               agents=["covering", "direct", "propinf"],
               horizons=[2 ** k for k in range(12, 18)], repetitions=200, seed=2024)
    doc.update(overrides)
    return ExperimentConfig(**doc)


def full_config(**overrides) -> ExperimentConfig:
    doc = dict(model={"or_tree": {"h": 7, "pi": 0.001, "eps": 0.05, "w": 0}},
               agents=["covering", "direct", "propinf"],
               horizons=[2 ** k for k in range(12, 18)], repetitions=1000, seed=2024)
    doc.update(overrides)
    return ExperimentConfig(**doc)


@dataclass
class ReportRow:
    agent: str
    T: int
    mean_regret: float
    stderr: float
    runs: int
    wall_ms: float


@dataclass
class RegretReport:
    rows: list = field(default_factory=list)
    per_run: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    gap: float | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.agent, r.T, _fmt(r.mean_regret), _fmt(r.stderr), r.runs, _fmt(r.wall_ms)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(x: float) -> str:
    return "nan" if x != x else repr(float(x))


@lru_cache(maxsize=8)
def _load_instance(model_key: str):
    doc = json.loads(model_key)
    if "or_tree" in doc:
        model, arms = build_or_tree(OrTreeSpec(**doc["or_tree"]))
    else:
        model = load_model(doc["path"])
        arms = as_arm_matrix(doc["arms"], model.n)
    means = np.array([true_mean(model, a) for a in arms])
    return model, arms, means


def instance_gap(model_doc: dict) -> float:
    """Best true mean minus the best strictly smaller one among the arms."""
    _, _, means = _load_instance(json.dumps(model_doc, sort_keys=True))
    distinct = np.unique(means)
    return float(distinct[-1] - distinct[-2]) if distinct.size > 1 else 0.0


def run_one(job):
    """Execute a single (agent, T, run) job. Top-level so it pickles for workers."""
    model_key, agent, horizon, run, seed = job
    model, arms, means = _load_instance(model_key)
    rng = np.random.Generator(np.random.PCG64(seed))
    env = Environment(model, budget=horizon)
    t0 = time.perf_counter()
    try:
        result = AGENTS[agent](env, arms, horizon, rng)
        if env.draws != horizon:
            raise RuntimeError(f"{agent} used {env.draws} draws, expected {horizon}")
        regret = simple_regret(model, result.chosen, arms, means)
        error = None
        chosen = result.chosen_index
    except Exception as exc:  # recorded per run; the sweep continues
        regret, chosen, error = float("nan"), -1, f"{type(exc).__name__}: {exc}"
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return agent, horizon, run, seed, chosen, regret, error, wall_ms


def run_experiment(config: ExperimentConfig, threads: int = 1, trace=None) -> RegretReport:
    """Run every (agent, T, repetition), aggregate and optionally write the CSV.

    Results are merged in job order, so the output does not depend on
    scheduling.  ``trace`` is an optional path for per-run JSON lines.
    """
    model_key = json.dumps(config.model, sort_keys=True)
    jobs = [(model_key, agent, int(t), r, run_seed(config.seed, agent, int(t), r))
            for agent in config.agents for t in config.horizons
            for r in range(config.repetitions)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, jobs, chunksize=max(1, len(jobs) // (threads * 8))))
    else:
        results = [run_one(j) for j in jobs]

    report = RegretReport(gap=instance_gap(config.model))
    grouped = {}
    for agent, t, run, seed, chosen, regret, error, wall_ms in results:
        grouped.setdefault((agent, t), []).append((regret, error, wall_ms))
        if error is not None:
            report.failures.append((agent, t, run, error))
            log.warning("run failed: agent=%s T=%d run=%d: %s", agent, t, run, error)
    for agent in config.agents:
        for t in config.horizons:
            entries = grouped[(agent, int(t))]
            regrets = np.array([e[0] for e in entries])
            ok = regrets[~np.isnan(regrets)]
            report.per_run[(agent, int(t))] = regrets
            mean = float(ok.mean()) if ok.size else float("nan")
            se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else (0.0 if ok.size else float("nan"))
            wall = float(sum(e[2] for e in entries)) if config.record_timing else 0.0
            report.rows.append(ReportRow(agent, int(t), mean, se, int(ok.size), wall))

    if trace is not None:
        with open(trace, "w") as fh:
            for agent, t, run, seed, chosen, regret, error, wall_ms in results:
                fh.write(json.dumps({"agent": agent, "T": t, "run": run, "seed": seed,
                                     "chosen": chosen, "regret": regret, "error": error}) + "\n")
    if config.output:
        report.write_csv(config.output)
    return report


# -- aggregation and checks ------------------------------------------------------

def trend(values) -> str:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return "flat"
    d = np.diff(v)
    if np.all(d == 0):
        return "flat"
    if np.all(d < 0):
        return "decreasing"
    if np.all(d <= 0):
        return "nonincreasing"
    if np.all(d > 0):
        return "increasing"
    if np.all(d >= 0):
        return "nondecreasing"
    return "mixed"


def aggregate(rows) -> dict:
    """Per-agent trend and final-horizon regret."""
    rows = list(rows.rows if isinstance(rows, RegretReport) else rows)
    if not rows:
        raise EmptyReport("no rows to aggregate")
    out = {}
    for agent in dict.fromkeys(r.agent for r in rows):
        mine = sorted((r for r in rows if r.agent == agent), key=lambda r: r.T)
        last = mine[-1]
        out[agent] = {"trend": trend([r.mean_regret for r in mine]), "final_T": last.T,
                      "final_regret": last.mean_regret, "final_stderr": last.stderr,
                      "runs": last.runs}
    return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def sign_test_worse(ours, theirs) -> tuple[float, int, int]:
    """One-sided paired sign test of 'ours has larger regret than theirs'.

    Returns ``(p_value, n_worse, n_better)``; ties are dropped.
    """
    d = np.asarray(ours) - np.asarray(theirs)
    worse, better = int(np.sum(d > 0)), int(np.sum(d < 0))
    if worse + better == 0:
        return 1.0, 0, 0
    p = stats.binomtest(worse, worse + better, 0.5, alternative="greater").pvalue
    return float(p), worse, better


def check_regret_curve(report: RegretReport, gap: float | None = None, agent: str = "covering",
                  baselines=("direct", "propinf"), min_horizon: int = 2 ** 14,
                  alpha: float = 0.05) -> list[CheckResult]:
    """Checks a regret curve against the gap and against the baselines.

    The curve may rise by at most two standard errors of the difference between
    consecutive horizons, and must end below half the gap.  At every horizon
    from ``min_horizon`` on, a paired sign test must not find ``agent`` worse
    than a baseline.
    """
    gap = report.gap if gap is None else gap
    mine = sorted((r for r in report.rows if r.agent == agent), key=lambda r: r.T)
    if not mine:
        raise EmptyReport(f"no rows for agent {agent!r}")
    checks = []
    bad = []
    for prev, cur in zip(mine, mine[1:]):
        slack = 2.0 * math.hypot(prev.stderr, cur.stderr)
        if cur.mean_regret > prev.mean_regret + slack:
            bad.append(f"T={cur.T}: {cur.mean_regret:.5f} > {prev.mean_regret:.5f} + {slack:.5f}")
    checks.append(CheckResult("nonincreasing within 2 stderr", not bad, "; ".join(bad) or "ok"))
    last = mine[-1]
    checks.append(CheckResult(f"final regret < gap/2 at T={last.T}", last.mean_regret < gap / 2,
                              f"{last.mean_regret:.5f} vs {gap / 2:.5f}"))
    for other in baselines:
        if not any(r.agent == other for r in report.rows):
            continue
        for r in mine:
            if r.T < min_horizon:
                continue
            p, worse, better = sign_test_worse(report.per_run[(agent, r.T)], report.per_run[(other, r.T)])
            theirs = next(x for x in report.rows if x.agent == other and x.T == r.T)
            checks.append(CheckResult(
                f"{agent} <= {other} at T={r.T}", p >= alpha,
                f"mean {r.mean_regret:.5f} vs {theirs.mean_regret:.5f}; sign test worse={worse} "
                f"better={better} p={p:.3g}"))
    return checks


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)
