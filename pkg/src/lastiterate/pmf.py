"""Exact pmfs of realization counts and the ratio certificates built on them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dynamics import RunConfig, monte_carlo
from .games import Game2x2, nash_equilibrium
from .strategies import (
    AdaptiveHedgeState,
    Family,
    HistorySummary,
    StrategySpec,
    adaptive_hedge_step,
    strategy_map,
)

TINY = 1e-300


@dataclass(frozen=True)
class Pmf:
    """Masses of an integer random variable on ``offset, offset+1, ...``."""

    offset: int
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or len(m) == 0:
            raise ValueError("masses must be a non-empty vector")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-10:
            raise ValueError(f"not a pmf: min {m.min()}, total {m.sum()}")
        object.__setattr__(self, "masses", m)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.masses))

    def __call__(self, z: int) -> float:
        k = z - self.offset
        return float(self.masses[k]) if 0 <= k < len(self.masses) else 0.0

    def mean(self) -> float:
        return float(self.support @ self.masses)

    def rows(self):
        return [(int(z), float(m)) for z, m in zip(self.support, self.masses)]


def binomial_pmf(t: int, q: float) -> Pmf:
    if t < 0 or not 0.0 <= q <= 1.0:
        raise ValueError(f"invalid binomial ({t}, {q})")
    z = np.arange(t + 1)
    try:
        return Pmf(0, stats.binom.pmf(z, t, q))
    except OverflowError:  # scipy's direct path fails for near-subnormal q
        return Pmf(0, np.exp(stats.binom.logpmf(z, t, q)))


def poisson_binomial_pmf(qs) -> Pmf:
    """Sequential convolution DP, one Bernoulli at a time."""
    qs = np.asarray(qs, dtype=float)
    if np.any((qs < 0) | (qs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    m = np.zeros(len(qs) + 1)
    m[0] = 1.0
    for k, q in enumerate(qs):
        m[1:k + 2] = m[1:k + 2] * (1 - q) + m[:k + 1] * q
        m[0] *= 1 - q
    return Pmf(0, m)


def poisson_binomial_enumeration(qs) -> Pmf:
    """Brute force over all 2^t outcomes (reference for small t)."""
    qs = np.asarray(qs, dtype=float)
    t = len(qs)
    bits = (np.arange(2 ** t)[:, None] >> np.arange(t)) & 1
    probs = np.prod(np.where(bits == 1, qs, 1 - qs), axis=1)
    m = np.zeros(t + 1)
    np.add.at(m, bits.sum(axis=1), probs)
    return Pmf(0, m)


def shifted_binomial_pmf(t: int, s: int, q: float) -> Pmf:
    """s + Binomial(t - s, q)."""
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    return Pmf(s, binomial_pmf(t - s, q).masses)


def mixture_binomial_pmf(n: int, t: int, q_bar: float, delta: float) -> Pmf:
    """Bin(n/2, q_bar+delta) + Bin(n/2, q_bar-delta) + Bin(t-n, q_bar)."""
    if n % 2 or not 0 <= n <= t:
        raise ValueError(f"n must be even with 0 <= n <= t, got n={n}, t={t}")
    if not (0.0 <= q_bar - delta and q_bar + delta <= 1.0 and delta >= 0):
        raise ValueError(f"q_bar +- delta leaves [0, 1]: q_bar={q_bar}, delta={delta}")
    m = np.convolve(binomial_pmf(n // 2, q_bar + delta).masses, binomial_pmf(n // 2, q_bar - delta).masses)
    m = np.convolve(m, binomial_pmf(t - n, q_bar).masses)
    return Pmf(0, m / m.sum())


def _window(center: float, halfwidth: float, lo: int = -(10 ** 18), hi: int = 10 ** 18) -> np.ndarray:
    return np.arange(max(lo, math.ceil(center - halfwidth)), min(hi, math.floor(center + halfwidth)) + 1)


def demoivre_ratio_certificate(t: int, q: float, window_coeff: float) -> float:
    """max |Bin(t,q)(z) / N(tq, tq(1-q)) density(z) - 1| over integers z within window_coeff*sqrt(t) of tq."""
    if not 0 < q < 1 or t < 1:
        raise ValueError("need 0 < q < 1 and t >= 1")
    z = _window(t * q, window_coeff * math.sqrt(t), 0, t)
    log_ratio = stats.binom.logpmf(z, t, q) - stats.norm.logpdf(z, t * q, math.sqrt(t * q * (1 - q)))
    return float(np.max(np.abs(np.expm1(log_ratio))))


@dataclass(frozen=True)
class RatioWindowReport:
    center: float
    halfwidth: float
    min_ratio: float
    argmin_z: int
    gamma: float | None = None
    underflow: bool = False


def min_pmf_ratio(numerator: Pmf, denominator: Pmf, center: float, halfwidth: float,
                  gamma: float | None = None) -> RatioWindowReport:
    """Smallest numerator/denominator over integers in [center - halfwidth, center + halfwidth].

    Masses below 1e-300 count as zero (and set ``underflow``); 0/0 points are
    skipped and x/0 counts as +inf."""
    zs = _window(center, halfwidth)
    best, arg, under = math.inf, None, False
    for z in zs:
        a, b = numerator(int(z)), denominator(int(z))
        if 0 < a < TINY or 0 < b < TINY:
            under = True
        a = a if a >= TINY else 0.0
        b = b if b >= TINY else 0.0
        if a == 0 and b == 0:
            continue
        r = math.inf if b == 0 else a / b
        if arg is None or r < best:
            best, arg = r, int(z)
    if arg is None:
        raise ValueError("window does not meet either support")
    return RatioWindowReport(center, halfwidth, best, arg, gamma, under)


@dataclass(frozen=True)
class ShiftRatioReport:
    measured: float
    bound: float
    corrected_bound: float
    argmin_z: int

    @property
    def holds(self) -> bool:
        return self.measured >= self.bound

    @property
    def corrected_holds(self) -> bool:
        return self.measured >= self.corrected_bound


def shift_ratio_bound_check(t: int, s: int, q: float, window_coeff: float) -> ShiftRatioReport:
    """Min of P(Bin(t,q) = z) / P(s + Bin(t-s,q) = z) over z in [max(s, tq - w sqrt t), q(t + b0 sqrt t)].

    ``bound`` is (1 + b0)^(-a) with a = s/sqrt(t), b0 = w/q. Each factor of the
    exact ratio q^s prod_k (t-k)/(z-k) is at least 1/(1 + b0/sqrt t) on the
    window, giving ``corrected_bound`` = exp(-a b0) <= (1 + b0/sqrt t)^(-s).
    Ratios are formed in log space, since both masses underflow for large t."""
    if not (0 <= s <= t and 0 < q < 1):
        raise ValueError("need 0 <= s <= t and 0 < q < 1")
    a, b0 = s / math.sqrt(t), window_coeff / q
    z = _window(t * q, window_coeff * math.sqrt(t), s, t)
    if len(z) == 0:
        raise ValueError("empty window")
    log_ratio = stats.binom.logpmf(z, t, q) - stats.binom.logpmf(z - s, t - s, q)
    k = int(np.argmin(log_ratio))
    return ShiftRatioReport(float(np.exp(log_ratio[k])), (1 + b0) ** (-a), math.exp(-a * b0), int(z[k]))


@dataclass(frozen=True)
class ExtremizerReport:
    min_value: float
    minimizers: tuple[tuple[float, ...], ...]
    three_point: bool


def extremizer_oracle(t: int, q_bar: float, delta: float, z: int, grid_levels: int = 9,
                      rtol: float = 1e-12) -> ExtremizerReport:
    """Exhaustive minimizer of P(Y = z), Y = sum Ber(q_bar + eta_s), over zero-sum grid vectors eta.

    The objective is symmetric in the coordinates, so vectors are enumerated
    up to permutation (sorted multisets). ``three_point`` says whether every
    minimizer has coordinates in {-delta, 0, delta}."""
    if not 1 <= t <= 8:
        raise ValueError("exhaustive search is limited to t <= 8")
    if grid_levels < 1 or grid_levels % 2 == 0:
        raise ValueError("grid_levels must be odd so that the zero-sum constraint is feasible with 0 on the grid")
    if not (delta >= 0 and 0 <= q_bar - delta and q_bar + delta <= 1):
        raise ValueError("q_bar +- delta must stay in [0, 1]")
    if not 0 <= z <= t:
        raise ValueError("z must lie in 0..t")
    grid = np.linspace(-delta, delta, grid_levels) if grid_levels > 1 else np.zeros(1)
    mid = (grid_levels - 1) // 2
    vals, vecs = [], []
    for idx in itertools.combinations_with_replacement(range(grid_levels), t):
        if sum(idx) != t * mid:
            continue
        eta = grid[list(idx)]
        vals.append(poisson_binomial_pmf(q_bar + eta)(z))
        vecs.append(tuple(float(x) for x in eta))
    vals = np.array(vals)
    lo = vals.min()
    keep = np.nonzero(vals <= lo + rtol * max(lo, 1e-300))[0]
    mins = tuple(dict.fromkeys(vecs[k] for k in keep))  # delta = 0 collapses the grid
    allowed = (-delta, 0.0, delta)
    ok = all(min(abs(x - a) for a in allowed) <= 1e-12 for v in mins for x in v)
    return ExtremizerReport(float(lo), mins, ok)


def _first_action(spec: StrategySpec) -> float:
    return spec.fixed_q if spec.family is Family.FIXED_MIXTURE else spec.init


class _Replayer:
    """Recomputes a player's mixed action from scratch along an opponent bit history."""

    def __init__(self, spec: StrategySpec, game: Game2x2, role: int):
        self.spec, self.game, self.role = spec, game, role

    def prob(self, opp_bits) -> float:
        if self.spec.family is Family.ADAPTIVE_HEDGE:
            state = AdaptiveHedgeState(self.spec.schedule.c_floor)
            p = None
            for t in range(1, len(opp_bits) + 2):
                if t == 1:
                    p = self.spec.init
                    state = AdaptiveHedgeState(state.c_floor, last_prob=p)
                    continue
                p, state = adaptive_hedge_step(state, self.game, self.role,
                                               HistorySummary.from_history(opp_bits[:t - 1]))
            return p
        if not opp_bits:
            return _first_action(self.spec)
        return strategy_map(self.spec, self.game, self.role, HistorySummary.from_history(opp_bits))


def exact_count_pmf(game: Game2x2, spec1: StrategySpec, spec2: StrategySpec, t: int) -> Pmf:
    """Exact pmf of Z_t (player 2's action-1 count) by enumerating all 4^t joint play paths."""
    if t > 8:
        raise ValueError("path enumeration is limited to t <= 8")
    p1, p2 = _Replayer(spec1, game, 1), _Replayer(spec2, game, 2)
    out = np.zeros(t + 1)

    def walk(i_bits, j_bits, prob):
        if len(i_bits) == t:
            out[sum(j_bits)] += prob
            return
        p, q = p1.prob(j_bits), p2.prob(i_bits)
        for i, pi in ((0, 1 - p), (1, p)):
            for j, pj in ((0, 1 - q), (1, q)):
                if pi * pj > 0:
                    walk(i_bits + [i], j_bits + [j], prob * pi * pj)

    walk([], [], 1.0)
    return Pmf(0, out)


@dataclass(frozen=True)
class ShakyHandsReport:
    t: int
    n_runs: int
    gamma: float
    vs_poisson_binomial: RatioWindowReport
    vs_binomial: RatioWindowReport
    ci_poisson_binomial: tuple[float, float]
    ci_binomial: tuple[float, float]
    empirical: Pmf


def empirical_count_pmf(config: RunConfig, t: int, n_runs: int, master_seed: int = 0, workers: int = 1):
    """Histogram of Z_t over replicas, plus the ensemble mean of each Q_s, s = 1..t."""
    from dataclasses import replace as _replace

    from .dynamics import CheckpointSchedule

    cfg = _replace(config, steps=t, tail=t, schedule=CheckpointSchedule(base=t, ratio=2.0))
    ens = monte_carlo(cfg, n_runs, master_seed, workers)
    z = ens.values("z", t).astype(np.int64)
    hist = np.bincount(z, minlength=t + 1) / n_runs
    mean_q = np.mean([r.tail.q for r in ens.runs], axis=0)
    return Pmf(0, hist / hist.sum()), mean_q


def shaky_hands_estimate(config: RunConfig, t: int, gamma: float, n_runs: int, master_seed: int = 0,
                         workers: int = 1, min_expected: float = 20.0) -> ShakyHandsReport:
    """Empirical pmf of t*Q_hat_t against Poisson-binomial(E[Q_s]) and Binomial(t, q*) on tq* +- gamma sqrt t."""
    q_star = nash_equilibrium(config.game).q_star
    center, half = t * q_star, gamma * math.sqrt(t)
    zs = _window(center, half, 0, t)
    ref = binomial_pmf(t, q_star)
    need = min_expected / min(ref(int(z)) for z in zs)
    if n_runs < need:
        raise ValueError(f"window undersampled: need n_runs >= {math.ceil(need)} for {min_expected} expected counts per bin")
    emp, mean_q = empirical_count_pmf(config, t, n_runs, master_seed, workers)
    pb = poisson_binomial_pmf(mean_q)

    def ci(report, model):
        m = emp(report.argmin_z)
        h = 1.959963984540054 * math.sqrt(m * (1 - m) / n_runs)
        d = model(report.argmin_z)
        return ((m - h) / d, (m + h) / d)

    r_pb = min_pmf_ratio(emp, pb, center, half, gamma)
    r_bin = min_pmf_ratio(emp, ref, center, half, gamma)
    return ShakyHandsReport(t, n_runs, gamma, r_pb, r_bin, ci(r_pb, pb), ci(r_bin, ref), emp)
