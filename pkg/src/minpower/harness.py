"""Monte Carlo experiment driver.

Each trial owns a random stream derived from ``(seed, trial)`` alone, so a
sweep gives the same table whatever the worker count or execution order.
The stream of a trial is shared by all grid points (common random numbers).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import asympt, exact
from .model import (
    ChannelRealization,
    SystemConfig,
    draw_channel,
    make_users,
    sample_positions,
    trial_rng,
)

log = logging.getLogger(__name__)

SCHEMES = ("ZF", "RZF", "PA-RZF", "A-OLP", "OLP")
CSV_HEADER = (
    "sweep_param", "value", "scheme", "avg_power_watt", "std_power_watt",
    "trials", "infeasible", "violation_rate", "rate_mse",
)
# relative SINR shortfall that counts as a violated target
VIOLATION_SLACK = 1e-6

RateSpec = Union[float, tuple[float, float]]

_TRIAL_STREAM = 1
_FROZEN_STREAM = 0


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    sweep: str = "rate"
    grid: tuple[float, ...] = tuple(np.linspace(0.1, 5.0, 15))
    rate: RateSpec = (2.0, 3.0)
    trials: int = 500
    seed: int = 0
    schemes: tuple[str, ...] = SCHEMES
    freeze_positions: bool = False
    workers: int = 1
    solver: exact.SolverOptions = field(default_factory=exact.SolverOptions)

    def __post_init__(self):
        if self.sweep not in ("rate", "antennas"):
            raise ValueError(f"unknown sweep variable {self.sweep!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.grid) == 0:
            raise ValueError("grid must be nonempty")
        if not isinstance(self.rate, (int, float)):
            lo, hi = self.rate
            if lo > hi:
                raise ValueError("rate interval needs lo <= hi")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes: {sorted(unknown)}")
        if self.sweep == "antennas":
            for n in self.grid:
                if int(n) != n or n < self.system.K:
                    raise ValueError(f"antenna count {n} must be an integer >= K")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ResultRow:
    sweep_param: str
    value: float
    scheme: str
    avg_power_watt: float
    std_power_watt: float
    trials: int
    infeasible: int
    violation_rate: float
    rate_mse: float


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)
    # per-trial total powers, NaN where the scheme failed
    samples: dict = field(default_factory=dict, compare=False)

    def sorted(self) -> "ResultsTable":
        rows = sorted(self.rows, key=lambda r: (r.value, r.scheme))
        return ResultsTable(rows, self.samples)

    def get(self, value: float, scheme: str) -> ResultRow:
        for r in self.rows:
            if r.value == value and r.scheme == scheme:
                return r
        raise KeyError((value, scheme))


@dataclass
class TrialOutcome:
    power: float
    sinr: Optional[np.ndarray]
    gamma: np.ndarray
    rates: np.ndarray

    @property
    def feasible(self) -> bool:
        return self.sinr is not None


def draw_instance(cfg: ExperimentConfig, trial: int, N: int, rate=None) -> ChannelRealization:
    """Positions, rates and channel of one trial.

    The draw order is fixed (positions, rate uniforms, fading) and every
    draw always happens, so flags never shift the stream.
    """
    sc = cfg.system
    rng = trial_rng(cfg.seed, _TRIAL_STREAM, trial)
    pos = sample_positions(rng, sc.K, sc)
    u = rng.random(sc.K)
    if cfg.freeze_positions:
        pos = sample_positions(trial_rng(cfg.seed, _FROZEN_STREAM), sc.K, sc)
    spec = cfg.rate if rate is None else rate
    if isinstance(spec, (int, float)):
        rates = np.full(sc.K, float(spec))
    else:
        lo, hi = spec
        rates = lo + u * (hi - lo)
    users = make_users(pos, rates, sc)
    return draw_channel(rng, users, N)


def precode(scheme: str, ch: ChannelRealization, sigma2: float,
            opts: exact.SolverOptions = exact.SolverOptions()) -> exact.PrecoderSolution:
    """Build one of the named precoders. RZF and PA-RZF use their
    large-system optimal regularization; A-OLP uses the closed-form
    multipliers with the exact power allocation."""
    l = ch.attenuation
    if scheme == "OLP":
        return exact.olp(ch, sigma2=sigma2, opts=opts)
    if scheme == "ZF":
        return exact.zf(ch, sigma2=sigma2)
    if scheme == "A-OLP":
        lam = asympt.optimal_equivalents(ch.users, sigma2, ch.N).lambda_bar
        sol = exact.heuristic(ch, lam, 1.0, sigma2=sigma2)
        sol.lam = lam
        return sol
    if scheme == "RZF":
        rho = asympt.rzf_rho_star(ch.users, ch.N).rho_star
        return exact.heuristic(ch, 1.0, rho, sigma2=sigma2)
    if scheme == "PA-RZF":
        rho = asympt.parzf_rho_star(ch.gamma, ch.K / ch.N).rho_star
        return exact.heuristic(ch, 1.0 / l, rho, sigma2=sigma2)
    raise ValueError(f"unknown scheme {scheme!r}")


def run_trial(cfg: ExperimentConfig, value: float, trial: int) -> dict[str, TrialOutcome]:
    if cfg.sweep == "rate":
        ch = draw_instance(cfg, trial, cfg.system.N, rate=float(value))
    else:
        ch = draw_instance(cfg, trial, int(value))
    out = {}
    for scheme in cfg.schemes:
        try:
            sol = precode(scheme, ch, cfg.system.sigma2, cfg.solver)
            out[scheme] = TrialOutcome(sol.total_power, sol.sinr, ch.gamma, ch.rates)
        except (exact.PrecoderError, ValueError) as exc:
            log.debug("trial %d, %s at %g failed: %s", trial, scheme, value, exc)
            out[scheme] = TrialOutcome(math.nan, None, ch.gamma, ch.rates)
    return out


def _run_chunk(args):
    cfg, value, start, stop = args
    return [run_trial(cfg, value, t) for t in range(start, stop)]


def relative_rate_mse(sinr: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Per-user squared relative error between achieved and target rate."""
    rates = np.asarray(rates, dtype=float)
    achieved = np.log2(1.0 + np.asarray(sinr))
    with np.errstate(divide="ignore", invalid="ignore"):
        err = ((achieved - rates) / rates) ** 2
    return err[rates > 0]


def aggregate(param: str, value: float, scheme: str, outcomes: Sequence[TrialOutcome]) -> ResultRow:
    ok = [o for o in outcomes if o.feasible]
    powers = np.array([o.power for o in ok])
    if ok:
        sinr = np.concatenate([o.sinr for o in ok])
        gamma = np.concatenate([o.gamma for o in ok])
        viol = float(np.mean(sinr < gamma * (1 - VIOLATION_SLACK)))
        mse = float(np.mean(np.concatenate([relative_rate_mse(o.sinr, o.rates) for o in ok])))
        avg = float(np.mean(powers))
        std = float(np.std(powers, ddof=1)) if len(ok) > 1 else 0.0
    else:
        viol = mse = avg = std = math.nan
    return ResultRow(param, float(value), scheme, avg, std, len(ok),
                     len(outcomes) - len(ok), viol, mse)


def run_sweep(cfg: ExperimentConfig) -> ResultsTable:
    """Average exact transmit power of every scheme at every grid point."""
    edges = np.linspace(0, cfg.trials, cfg.workers + 1).astype(int)
    jobs = [(cfg, v, int(a), int(b)) for v in cfg.grid for a, b in zip(edges[:-1], edges[1:])]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_run_chunk, jobs))
    else:
        chunks = [_run_chunk(j) for j in jobs]
    # chunks come back in submission order, so trial order is preserved
    table = ResultsTable()
    n = cfg.workers
    for i, value in enumerate(cfg.grid):
        per_trial = [o for c in chunks[i * n:(i + 1) * n] for o in c]
        for scheme in cfg.schemes:
            outcomes = [t[scheme] for t in per_trial]
            table.rows.append(aggregate(cfg.sweep, value, scheme, outcomes))
            table.samples[(float(value), scheme)] = np.array([o.power for o in outcomes])
    return table.sorted()


def write_csv(table: ResultsTable, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in table.sorted().rows:
                w.writerow([
                    r.sweep_param, f"{r.value:.17e}", r.scheme,
                    f"{r.avg_power_watt:.17e}", f"{r.std_power_watt:.17e}",
                    r.trials, r.infeasible,
                    f"{r.violation_rate:.17e}", f"{r.rate_mse:.17e}",
                ])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_csv(path) -> ResultsTable:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for d in reader:
            rows.append(ResultRow(
                d["sweep_param"], float(d["value"]), d["scheme"],
                float(d["avg_power_watt"]), float(d["std_power_watt"]),
                int(d["trials"]), int(d["infeasible"]),
                float(d["violation_rate"]), float(d["rate_mse"]),
            ))
    return ResultsTable(rows)


_XLABEL = {"rate": "Rate per user r [bit/s/Hz]", "antennas": "N"}


def emit_plot(table: ResultsTable, path) -> Path:
    """Average power against the sweep value, log-scale, one line per scheme."""
    if not table.rows:
        raise ValueError("nothing to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    # keep labels as <text> so the SVG stays searchable
    with matplotlib.rc_context({"svg.fonttype": "none", "svg.hashsalt": "minpower"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        present = {r.scheme for r in table.rows}
        for scheme in [s for s in SCHEMES if s in present]:
            rows = sorted((r for r in table.rows if r.scheme == scheme), key=lambda r: r.value)
            (line,) = ax.plot([r.value for r in rows], [r.avg_power_watt for r in rows],
                              marker="o", ms=3, label=scheme)
            line.set_gid(f"series-{scheme}")
        ax.set_yscale("log")
        ax.set_xlabel(_XLABEL.get(table.rows[0].sweep_param, table.rows[0].sweep_param))
        ax.set_ylabel("Average transmit power [Watt]")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        try:
            fig.savefig(path, format=path.suffix.lstrip(".") or "svg")
        finally:
            plt.close(fig)
    return path


@dataclass(frozen=True)
class LadderPoint:
    N: int
    K: int
    median_power_gap: float
    median_lambda_gap: float


@dataclass
class ValidationReport:
    rate_mse: dict[str, float]
    infeasible: dict[str, int]
    ladder: list[LadderPoint]
    deteq_violation_rate: float
    deteq_rate_mse: float

    def lines(self) -> list[str]:
        out = ["scheme      rate_mse      infeasible"]
        for s, v in self.rate_mse.items():
            out.append(f"{s:<10}  {v:.4e}    {self.infeasible[s]}")
        out.append("N     K     median|P-Pbar|/Pbar   median max|lam-lambar|/lambar")
        for p in self.ladder:
            out.append(f"{p.N:<5} {p.K:<5} {p.median_power_gap:.4e}            {p.median_lambda_gap:.4e}")
        out.append(f"closed-form power allocation: violation rate {self.deteq_violation_rate:.4f}, "
                   f"rate mse {self.deteq_rate_mse:.4e}")
        return out


def deteq_gaps(cfg: ExperimentConfig, N: int, K: int, rate: RateSpec, trials: int):
    """Per-trial ``|P - P_bar| / P_bar`` and ``max_k |lam_k - lambar_k| / lambar_k``
    of the optimal precoder at size ``(N, K)``."""
    sub = replace(cfg, system=replace(cfg.system, N=N, K=K), rate=rate,
                  sweep="antennas", grid=(N,))
    s2 = cfg.system.sigma2
    pgap, lgap = [], []
    for t in range(trials):
        ch = draw_instance(sub, t, N)
        t1 = asympt.optimal_equivalents(ch.users, s2, N)
        try:
            sol = exact.olp(ch, sigma2=s2, opts=cfg.solver)
        except exact.PrecoderError:
            continue
        pgap.append(abs(sol.total_power - t1.P_bar) / t1.P_bar)
        lgap.append(np.max(np.abs(sol.lam - t1.lambda_bar) / t1.lambda_bar))
    return np.array(pgap), np.array(lgap)


def validate(cfg: ExperimentConfig, ladder: Sequence[int] = (16, 32, 64, 128),
             load: float = 0.5, ladder_trials: int = 200,
             ladder_rate: RateSpec = 1.0) -> ValidationReport:
    """Rate accuracy of every scheme at the configured operating point, the
    shrinking gap between exact and closed-form quantities as N grows, and
    how often the purely closed-form power allocation misses its targets."""
    sc = cfg.system
    outcomes = {s: [] for s in cfg.schemes}
    viol, mses = [], []
    for t in range(cfg.trials):
        ch = draw_instance(cfg, t, sc.N)
        for scheme in cfg.schemes:
            try:
                sol = precode(scheme, ch, sc.sigma2, cfg.solver)
                outcomes[scheme].append(TrialOutcome(sol.total_power, sol.sinr, ch.gamma, ch.rates))
            except (exact.PrecoderError, ValueError):
                outcomes[scheme].append(TrialOutcome(math.nan, None, ch.gamma, ch.rates))
        t1 = asympt.optimal_equivalents(ch.users, sc.sigma2, sc.N)
        V = exact.directions(ch, t1.lambda_bar, 1.0) * np.sqrt(t1.p_bar)
        sinr, _ = exact.evaluate(ch, V, sc.sigma2)
        viol.append(sinr < ch.gamma * (1 - VIOLATION_SLACK))
        mses.append(relative_rate_mse(sinr, ch.rates))
    rows = {s: aggregate("validate", 0.0, s, o) for s, o in outcomes.items()}
    points = []
    for n in ladder:
        k = max(1, int(round(load * n)))
        pg, lg = deteq_gaps(cfg, n, k, ladder_rate, ladder_trials)
        points.append(LadderPoint(n, k, float(np.median(pg)), float(np.median(lg))))
    return ValidationReport(
        rate_mse={s: r.rate_mse for s, r in rows.items()},
        infeasible={s: r.infeasible for s, r in rows.items()},
        ladder=points,
        deteq_violation_rate=float(np.mean(np.concatenate(viol))),
        deteq_rate_mse=float(np.mean(np.concatenate(mses))),
    )
