"""Statistical probes: regret audits, fluctuation sensitivity, oscillation
frequency, time-average convergence, martingale normality and stationarity."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .dynamics import (
    CheckpointSchedule,
    Ensemble,
    FeedbackMode,
    OpponentScript,
    RunConfig,
    Trajectory,
    mix_seed,
    monte_carlo,
    run_vs_script,
)
from .games import Equilibrium, Game2x2, nash_equilibrium
from .strategies import StrategySpec

Z95 = 1.959963984540054


@dataclass(frozen=True)
class RegretReport:
    t: int
    player: int
    regret: float
    normalized: float


def _counts_at(traj: Trajectory, t: int) -> np.ndarray:
    """Joint action counts n_ij after step t, exact."""
    if traj.mode is not FeedbackMode.REALIZATION:
        raise ValueError("realized regret needs realizations; telepathic runs carry none")
    if not 1 <= t <= traj.steps:
        raise ValueError(f"t={t} outside 1..{traj.steps}")
    times = traj.times
    k = np.searchsorted(times, t)
    if k < len(times) and times[k] == t:
        return np.array(traj.record(int(k)).counts, dtype=np.int64)
    tail = traj.tail
    if len(tail) and tail.start - 1 <= t <= tail.end:
        counts = np.array(traj.final.counts, dtype=np.int64)
        after = slice(t - tail.start + 1, None)
        np.subtract.at(counts, 2 * tail.i[after].astype(np.int64) + tail.j[after], 1)
        return counts
    raise ValueError(f"t={t} is neither a checkpoint nor inside the stored tail window")


def regret_from_counts(game: Game2x2, counts, player: int = 1) -> float:
    """Best fixed action in hindsight minus realized payoff, from joint counts n_00, n_01, n_10, n_11."""
    n = np.asarray(counts, dtype=float).reshape(2, 2)
    if player == 1:
        X, opp = game.G, n.sum(axis=0)  # opponent column totals
        best = max(X[0] @ opp, X[1] @ opp)
    elif player == 2:
        X, opp = game.H, n.sum(axis=1)
        best = max(X[:, 0] @ opp, X[:, 1] @ opp)
    else:
        raise ValueError("player must be 1 or 2")
    return float(best - (n * X).sum())


def realized_regret(traj: Trajectory, player: int = 1, t: int | None = None) -> RegretReport:
    t = traj.steps if t is None else t
    regret = regret_from_counts(traj.game, _counts_at(traj, t), player)
    return RegretReport(t, player, regret, regret / math.sqrt(t))


def regret_series(traj: Trajectory, player: int = 1) -> np.ndarray:
    """Normalized regret at every checkpoint."""
    return np.array([realized_regret(traj, player, int(t)).normalized for t in traj.times])


@dataclass(frozen=True)
class SensitivityReport:
    t: int
    s: int
    mean_response: float
    ci_halfwidth: float
    n_samples: int
    tail_value: int = 1

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean_response - self.ci_halfwidth, self.mean_response + self.ci_halfwidth


def sensitivity_responses(spec1: StrategySpec, game: Game2x2, t: int, s: int, n_samples: int,
                          master_seed: int = 0, tail_value: int = 1) -> np.ndarray:
    """Player 1's mixed strategy after observing t scripted steps (i.i.d. at q* then an s-long tail)."""
    if not 0 <= s < t:
        raise ValueError(f"need 0 <= s < t, got s={s}, t={t}")
    q_star = nash_equilibrium(game).q_star
    script = OpponentScript.piecewise(q_star, t, s, tail_value)
    sched = CheckpointSchedule(base=t + 1, ratio=2.0)
    out = np.empty(n_samples)
    for i in range(n_samples):
        traj = run_vs_script(game, spec1, script, t + 1, mix_seed(master_seed, i), sched, tail=0)
        out[i] = traj.final.p_t
    return out


def _summarize(t, s, x, tail_value) -> SensitivityReport:
    n = len(x)
    half = Z95 * x.std(ddof=1) / math.sqrt(n) if n >= 2 else float("inf")
    return SensitivityReport(t, s, float(x.mean()), float(half), n, tail_value)


def sensitivity_probe(spec1: StrategySpec, game: Game2x2, t: int, s: int, n_samples: int = 200,
                      master_seed: int = 0, tail_value: int = 1) -> SensitivityReport:
    x = sensitivity_responses(spec1, game, t, s, n_samples, master_seed, tail_value)
    return _summarize(t, s, x, tail_value)


@dataclass(frozen=True)
class ScanReport:
    best: SensitivityReport
    reports: tuple[SensitivityReport, ...]


def s_grid(t: int, alpha_coeff: float, points: int = 12) -> list[int]:
    s_max = math.floor(alpha_coeff * math.sqrt(t))
    if s_max < 1:
        raise ValueError("alpha_coeff * sqrt(t) must be at least 1")
    s_max = min(s_max, t - 1)
    return sorted({int(round(x)) for x in np.geomspace(1, s_max, points)})


def scan_sensitivity(spec1: StrategySpec, game: Game2x2, t: int, alpha_coeff: float, n_samples: int = 200,
                     master_seed: int = 0, points: int = 12) -> ScanReport:
    """Probe every s on a geometric grid in 1..floor(alpha_coeff*sqrt(t)); common seeds across s."""
    reports = tuple(sensitivity_probe(spec1, game, t, s, n_samples, master_seed) for s in s_grid(t, alpha_coeff, points))
    return ScanReport(max(reports, key=lambda r: r.mean_response), reports)


@dataclass(frozen=True)
class OscillationReport:
    checkpoints: tuple[int, ...]
    deviating: tuple[int, ...]
    n_runs: int
    delta: float
    p_star: float

    @property
    def fraction_deviating(self) -> tuple[float, ...]:
        return tuple(d / self.n_runs for d in self.deviating)

    def merge(self, other: "OscillationReport") -> "OscillationReport":
        if (self.checkpoints, self.delta, self.p_star) != (other.checkpoints, other.delta, other.p_star):
            raise ValueError("cannot merge reports with different settings")
        dev = tuple(a + b for a, b in zip(self.deviating, other.deviating))
        return OscillationReport(self.checkpoints, dev, self.n_runs + other.n_runs, self.delta, self.p_star)


def oscillation_estimate(ensemble: Ensemble, p_star: float, delta: float = 0.1,
                         checkpoints=None) -> OscillationReport:
    if not 0 < delta < min(p_star, 1 - p_star):
        raise ValueError(f"delta must lie in (0, min(p*, 1-p*)), got {delta}")
    cks = tuple(int(t) for t in (ensemble.times if checkpoints is None else checkpoints))
    dev = tuple(int(np.sum(np.abs(ensemble.values("p", t) - p_star) >= delta)) for t in cks)
    return OscillationReport(cks, dev, len(ensemble), delta, p_star)


def time_average_deviation(traj: Trajectory, equilibrium: Equilibrium, exponent: float = 0.5,
                           player: int = 2) -> np.ndarray:
    """t^exponent * |bar - star| at every checkpoint, for player 2's (default) or player 1's mixtures.

    Under an (r, c) no-regret pair the time average deviates at rate t^(r-1),
    so the rate-matched exponent is 1 - r."""
    if player == 2:
        bar, star = traj.column("q_bar"), equilibrium.q_star
    else:
        bar, star = traj.column("p_bar"), equilibrium.p_star
    return traj.times.astype(float) ** exponent * np.abs(bar - star)


class Normalization(enum.Enum):
    BY_SIGMA_HAT = "BySigmaHat"
    BY_SQRT_T = "BySqrtT"


@dataclass(frozen=True)
class MartingaleCheckReport:
    t: int
    ks_statistic: float | None
    n_runs: int
    normalization: Normalization
    sample_mean: float | None = None
    sample_var: float | None = None
    degenerate: bool = False
    p_value: float | None = None


def mclt_normality(ensemble: Ensemble, t: int, normalization: Normalization = Normalization.BY_SIGMA_HAT,
                   q_star: float = 0.5) -> MartingaleCheckReport:
    """KS distance of (Z_t - sum Q_s) / sqrt(sum Q_s(1-Q_s)) across replicas to N(0, 1).

    BySqrtT divides instead by sqrt(t q*(1-q*))."""
    n = len(ensemble)
    if n < 50:
        raise ValueError(f"need at least 50 replicas for a KS check, got {n}")
    drift = ensemble.values("z", t) - t * ensemble.values("q_bar", t)
    if normalization is Normalization.BY_SIGMA_HAT:
        var = ensemble.values("sig2_q", t)
    else:
        var = np.full(n, t * q_star * (1 - q_star))
    if np.any(var <= 0):
        return MartingaleCheckReport(t, None, n, normalization, degenerate=True)
    x = drift / np.sqrt(var)
    ks = stats.kstest(x, "norm")
    return MartingaleCheckReport(t, float(ks.statistic), n, normalization, float(x.mean()),
                                 float(x.var(ddof=1)), False, float(ks.pvalue))


@dataclass(frozen=True)
class StationarityReport:
    t: int
    n_runs: int
    mean_payoff: float
    se_payoff: float
    mean_z: float
    se_z: float
    r_star: float
    q_star: float

    def within(self, k: float = 3.0) -> bool:
        return (abs(self.mean_payoff - self.r_star) <= k * self.se_payoff
                and abs(self.mean_z - self.q_star) <= k * self.se_z)


def stationarity_check(game: Game2x2, spec1: StrategySpec, q_star: float, t: int, n_runs: int,
                       master_seed: int = 0, workers: int = 1) -> StationarityReport:
    """Monte Carlo means of (cumulative payoff of player 1)/t and Z_t/t against an i.i.d. Bernoulli(q*) opponent."""
    cfg = RunConfig(game, spec1, script=OpponentScript.iid(q_star), steps=t,
                    schedule=CheckpointSchedule(base=t, ratio=2.0))
    ens = monte_carlo(cfg, n_runs, master_seed, workers)
    pay = np.array([r.final.cum_payoff_1 for r in ens.runs]) / t
    z = ens.values("z", t) / t
    r_star = game.G[0] @ [1 - q_star, q_star]  # any action earns R* against q*
    se = lambda x: float(x.std(ddof=1) / math.sqrt(len(x)))
    return StationarityReport(t, n_runs, float(pay.mean()), se(pay), float(z.mean()), se(z), float(r_star), q_star)


def neighborhood_fraction(traj: Trajectory, q_star: float | None = None) -> float:
    """Exact fraction of all steps with Q_s in [q*/2, (q*+1)/2], from the online counter."""
    eq_q = nash_equilibrium(traj.game).q_star
    if q_star is not None and abs(q_star - eq_q) > 1e-12:
        raise ValueError("the online counter tracks the game's own equilibrium")
    return traj.final.nbhd_count / traj.steps


@dataclass(frozen=True)
class ClaimCheck:
    applicable: bool
    fraction: float


def near_equilibrium_claim(traj: Trajectory, tol: float = 0.05) -> ClaimCheck:
    """If both last iterates end within ``tol`` of equilibrium, report the neighborhood fraction."""
    eq = nash_equilibrium(traj.game)
    f = traj.final
    ok = abs(f.p_t - eq.p_star) <= tol and abs(f.q_t - eq.q_star) <= tol
    return ClaimCheck(ok, neighborhood_fraction(traj))


def report_dict(report) -> dict:
    d = asdict(report)
    for k, v in d.items():
        if isinstance(v, enum.Enum):
            d[k] = v.value
    if hasattr(report, "fraction_deviating"):
        d["fraction_deviating"] = list(report.fraction_deviating)
    if hasattr(report, "ci") and isinstance(report, SensitivityReport):
        d["ci"] = list(report.ci)
    return d
