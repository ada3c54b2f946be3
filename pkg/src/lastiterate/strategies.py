"""Mean-based, recency-biased and adaptive no-regret strategy maps.

Descriptor grammar (comma-separated ``key=value`` after the family name)::

    hedge:r=0.5                     Hedge / multiplicative weights, eta_t = t^-r
    hedge:r=0.5,ell=2,w=2/1         Hedge on a recency-biased statistic
    optimistic-hedge:r=0.5,ell=1    shorthand for Hedge with ell=1, w=1
    logbarrier:r=0.5                mirror descent with the log-barrier regularizer
    adahedge:C=1.0                  doubling-trick Hedge with the floor eta_t >= C/sqrt(t)
    fixed:q=0.5                     fixed mixture, history ignored

Learning families accept ``p1=x`` (default 0.5), the mixture played at t = 1
before any history exists.

``r`` must lie in [0.5, 1); ``ell`` in [0, 16]; weights ``w`` are integers
in {1..ell} listed newest first (default all ones).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as K
from .games import Game2x2, make_matching_pennies


class Family(enum.Enum):
    HEDGE = "Hedge"
    LOG_BARRIER = "LogBarrier"
    FIXED_MIXTURE = "FixedMixture"
    ADAPTIVE_HEDGE = "AdaptiveHedge"


class ScheduleKind(enum.Enum):
    FIXED_POWER = "FixedPower"
    ADAPTIVE_WITH_FLOOR = "AdaptiveWithFloor"


class Monotonicity(enum.Enum):
    NON_DECREASING = "NonDecreasing"
    NON_INCREASING = "NonIncreasing"
    NON_MONOTONE = "NonMonotone"


_FAMILY_CODE = {
    Family.FIXED_MIXTURE: K.FAM_FIXED,
    Family.HEDGE: K.FAM_HEDGE,
    Family.LOG_BARRIER: K.FAM_LOGBARRIER,
    Family.ADAPTIVE_HEDGE: K.FAM_ADAHEDGE,
}


@dataclass(frozen=True)
class LearningRateSchedule:
    kind: ScheduleKind = ScheduleKind.FIXED_POWER
    r_exp: float = 0.5
    c_floor: float = 1.0

    def __post_init__(self):
        if self.kind is ScheduleKind.FIXED_POWER and not (0.5 <= self.r_exp < 1.0):
            raise ValueError(f"learning-rate power must lie in [0.5, 1), got {self.r_exp}")
        if self.kind is ScheduleKind.ADAPTIVE_WITH_FLOOR and not self.c_floor > 0:
            raise ValueError(f"floor constant must be positive, got {self.c_floor}")

    def eta(self, t: int) -> float:
        if self.kind is not ScheduleKind.FIXED_POWER:
            raise ValueError("adaptive schedules depend on the history; use adaptive_hedge_step")
        return float(t) ** (-self.r_exp)

    @classmethod
    def power(cls, r: float) -> "LearningRateSchedule":
        return cls(ScheduleKind.FIXED_POWER, r_exp=r)

    @classmethod
    def adaptive(cls, c_floor: float) -> "LearningRateSchedule":
        return cls(ScheduleKind.ADAPTIVE_WITH_FLOOR, c_floor=c_floor)


@dataclass(frozen=True)
class RecencySpec:
    ell: int = 0
    weights: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0 <= self.ell <= K.LMAX):
            raise ValueError(f"ell must lie in [0, {K.LMAX}], got {self.ell}")
        if len(self.weights) != self.ell:
            raise ValueError(f"need exactly ell={self.ell} weights, got {self.weights}")
        if any(not (1 <= w <= self.ell) or int(w) != w for w in self.weights):
            raise ValueError(f"weights must be integers in 1..{self.ell}, got {self.weights}")

    @classmethod
    def optimistic(cls, ell: int = 1) -> "RecencySpec":
        return cls(ell, (1,) * ell)


@dataclass(frozen=True)
class RegretRate:
    r: float
    c: float

    def __post_init__(self):
        if not (0.5 <= self.r < 1.0) or not self.c > 0:
            raise ValueError(f"invalid regret rate ({self.r}, {self.c})")

    @property
    def optimal(self) -> bool:
        return self.r == 0.5


@dataclass(frozen=True)
class StrategySpec:
    family: Family
    schedule: LearningRateSchedule = field(default_factory=LearningRateSchedule)
    recency: RecencySpec = field(default_factory=RecencySpec)
    fixed_q: float = 0.5
    init: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.init < 1.0:
            raise ValueError(f"initial mixture must lie in (0, 1), got {self.init}")
        if self.family is Family.FIXED_MIXTURE and not (0.0 <= self.fixed_q <= 1.0):
            raise ValueError(f"fixed mixture must lie in [0, 1], got {self.fixed_q}")
        if self.family is Family.ADAPTIVE_HEDGE:
            if self.schedule.kind is not ScheduleKind.ADAPTIVE_WITH_FLOOR:
                raise ValueError("AdaptiveHedge needs an AdaptiveWithFloor schedule")
            if self.recency.ell:
                raise ValueError("AdaptiveHedge does not take a recency bias")
        elif self.family is not Family.FIXED_MIXTURE and self.schedule.kind is not ScheduleKind.FIXED_POWER:
            raise ValueError(f"{self.family.value} needs a FixedPower schedule")

    @property
    def mean_based(self) -> bool:
        return self.family in (Family.HEDGE, Family.LOG_BARRIER, Family.FIXED_MIXTURE) and self.recency.ell == 0

    def descriptor(self) -> str:
        base = self._descriptor()
        if self.init != 0.5 and self.family is not Family.FIXED_MIXTURE:
            return f"{base},p1={self.init!r}"
        return base

    def _descriptor(self) -> str:
        if self.family is Family.FIXED_MIXTURE:
            return f"fixed:q={self.fixed_q!r}"
        if self.family is Family.ADAPTIVE_HEDGE:
            return f"adahedge:C={self.schedule.c_floor!r}"
        r = f"r={self.schedule.r_exp!r}"
        rec = self.recency
        if self.family is Family.HEDGE and rec.ell == 1:
            return f"optimistic-hedge:{r},ell=1"
        name = "hedge" if self.family is Family.HEDGE else "logbarrier"
        if rec.ell == 0:
            return f"{name}:{r}"
        if rec.weights == (1,) * rec.ell:
            return f"{name}:{r},ell={rec.ell}"
        return f"{name}:{r},ell={rec.ell},w=" + "/".join(str(w) for w in rec.weights)

    def __str__(self):
        return self.descriptor()

    def params(self, game: Game2x2, role: int) -> np.ndarray:
        """Flat parameter vector consumed by the jitted kernel."""
        par = np.zeros(K.NPAR)
        par[K.P_FAMILY] = _FAMILY_CODE[self.family]
        par[K.P_REXP] = self.schedule.r_exp
        par[K.P_FIXEDQ] = self.fixed_q
        par[K.P_CFLOOR] = self.schedule.c_floor
        par[K.P_ELL] = self.recency.ell
        par[K.P_A0], par[K.P_A1] = game.payoff_slopes(role)
        par[K.P_INIT] = self.init
        par[K.P_W0:K.P_W0 + self.recency.ell] = self.recency.weights
        return par


def hedge(r: float = 0.5, ell: int = 0, init: float = 0.5) -> StrategySpec:
    return StrategySpec(Family.HEDGE, LearningRateSchedule.power(r), RecencySpec.optimistic(ell), init=init)


def log_barrier(r: float = 0.5, ell: int = 0, init: float = 0.5) -> StrategySpec:
    return StrategySpec(Family.LOG_BARRIER, LearningRateSchedule.power(r), RecencySpec.optimistic(ell), init=init)


def adaptive_hedge(c_floor: float = 1.0, init: float = 0.5) -> StrategySpec:
    return StrategySpec(Family.ADAPTIVE_HEDGE, LearningRateSchedule.adaptive(c_floor), init=init)


def fixed(q: float) -> StrategySpec:
    return StrategySpec(Family.FIXED_MIXTURE, fixed_q=q)


_GRAMMAR = "hedge:r=R | optimistic-hedge:r=R,ell=L | logbarrier:r=R | adahedge:C=C | fixed:q=Q (R in [0.5,1))"


def parse_strategy(text: str) -> StrategySpec:
    s = text.strip()
    name, _, rest = s.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            if not eq:
                raise ValueError(f"malformed strategy {text!r}; expected {_GRAMMAR}")
            kv[k.strip()] = v.strip()

    def take(key, conv, default=None):
        if key not in kv:
            if default is None:
                raise ValueError(f"strategy {text!r} is missing '{key}'; expected {_GRAMMAR}")
            return default
        try:
            return conv(kv.pop(key))
        except ValueError:
            raise ValueError(f"bad value for '{key}' in strategy {text!r}; expected {_GRAMMAR}") from None

    init = take("p1", float, 0.5)
    if name == "fixed":
        spec = fixed(take("q", float))
    elif name == "adahedge":
        spec = adaptive_hedge(take("C", float, 1.0), init)
    elif name in ("hedge", "optimistic-hedge", "logbarrier"):
        r = take("r", float)
        if not (0.5 <= r < 1.0):
            raise ValueError(
                f"strategy {text!r}: r={r} outside [0.5, 1); rates below 0.5 are not attainable no-regret rates"
            )
        ell = take("ell", int, 1 if name == "optimistic-hedge" else 0)
        weights = take("w", lambda v: tuple(int(x) for x in v.split("/")), (1,) * ell)
        family = Family.LOG_BARRIER if name == "logbarrier" else Family.HEDGE
        spec = StrategySpec(family, LearningRateSchedule.power(r), RecencySpec(ell, weights), init=init)
    else:
        raise ValueError(f"unknown strategy family {name!r}; expected {_GRAMMAR}")
    if kv:
        raise ValueError(f"unknown keys {sorted(kv)} in strategy {text!r}; expected {_GRAMMAR}")
    return spec


@dataclass(frozen=True)
class HistorySummary:
    """What a mean-based player knows at step ``t``: the opponent's count of
    action-1 plays over the first t-1 steps and the most recent plays."""

    t: int
    z: float
    recent: tuple[float, ...] = ()

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if not (0 <= self.z <= self.t - 1):
            raise ValueError(f"count z={self.z} inconsistent with t={self.t}")

    @classmethod
    def from_history(cls, bits) -> "HistorySummary":
        bits = [float(b) for b in bits]
        return cls(len(bits) + 1, sum(bits), tuple(bits[-K.LMAX:]))

    @property
    def q_hat(self) -> float:
        return self.z / (self.t - 1) if self.t >= 2 else 0.5


def _kernel_state(summary: HistorySummary):
    st = np.zeros(K.NSTATE)
    ring = np.zeros(K.LMAX)
    st[K.S_OPP] = summary.z
    st[K.S_B] = 1.0
    for b in summary.recent[-K.LMAX:]:
        pos = int(st[K.S_RPOS])
        ring[pos] = b
        st[K.S_RPOS] = (pos + 1) % K.LMAX
        st[K.S_RCOUNT] = min(st[K.S_RCOUNT] + 1, K.LMAX)
    return st, ring


def hedge_map(game: Game2x2, role: int, t: int, statistic: float, schedule: LearningRateSchedule) -> float:
    """Probability of action 1 with weights proportional to exp(eta_t * cumulative payoff)."""
    a0, a1 = game.payoff_slopes(role)
    return K.hedge_prob(a0, a1, t, statistic, schedule.eta(t))


def log_barrier_from_advantage(d: float) -> float:
    """Maximizer of p*d + log p + log(1-p), i.e. the root in (0,1) of d p^2 + (2-d) p - 1."""
    return K.log_barrier_from_d(d)


def log_barrier_map(game: Game2x2, role: int, t: int, statistic: float, schedule: LearningRateSchedule) -> float:
    a0, a1 = game.payoff_slopes(role)
    return K.log_barrier_prob(a0, a1, t, statistic, schedule.eta(t))


def fixed_mixture_map(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return q


def apply_recency_bias(summary: HistorySummary, recency: RecencySpec) -> float:
    if summary.t < 2:
        raise ValueError("the statistic is undefined before any observation")
    par = np.zeros(K.NPAR)
    par[K.P_ELL] = recency.ell
    par[K.P_W0:K.P_W0 + recency.ell] = recency.weights
    st, ring = _kernel_state(summary)
    return K.biased_statistic(par, st, ring, summary.t)


def strategy_map(spec: StrategySpec, game: Game2x2, role: int, summary: HistorySummary) -> float:
    """Mixed action of a stateless (mean-based or recency-biased) strategy."""
    if spec.family is Family.ADAPTIVE_HEDGE:
        raise ValueError("AdaptiveHedge is stateful; use adaptive_hedge_step")
    st, ring = _kernel_state(summary)
    return K.strategy_prob(spec.params(game, role), st, ring, summary.t)


def map_on_statistic(spec: StrategySpec, game: Game2x2, role: int, t: int, statistic: float) -> float:
    """Evaluate the step-t map directly on an (unbiased) empirical average."""
    if spec.family is Family.FIXED_MIXTURE:
        return spec.fixed_q
    a0, a1 = game.payoff_slopes(role)
    if spec.family is Family.LOG_BARRIER:
        return K.log_barrier_prob(a0, a1, t, statistic, spec.schedule.eta(t))
    if spec.family is Family.ADAPTIVE_HEDGE:
        eta = max(math.sqrt(K.LN2), spec.schedule.c_floor / math.sqrt(t))
        return K.hedge_prob(a0, a1, t, statistic, eta)
    return K.hedge_prob(a0, a1, t, statistic, spec.schedule.eta(t))


@dataclass(frozen=True)
class AdaptiveHedgeState:
    """Doubling-trick bookkeeping: ``variance`` accumulates p(1-p)*advantage^2 of
    past plays, ``budget`` is the smallest power of two above it. ``last_prob``
    is the previous mixed action, folded in once its outcome is observed."""

    c_floor: float
    variance: float = 0.0
    budget: float = 1.0
    last_prob: float | None = None
    eta: float | None = None


def adaptive_hedge_step(state: AdaptiveHedgeState, game: Game2x2, role: int,
                        summary: HistorySummary) -> tuple[float, AdaptiveHedgeState]:
    """One decision of AdaptiveHedge at step ``summary.t``.

    The previous decision's variance term is folded in using the newest
    observation in ``summary.recent``; the proposed rate sqrt(ln 2 / budget)
    is then floored at c_floor/sqrt(t).
    """
    variance, budget = state.variance, state.budget
    if state.last_prob is not None:
        if not summary.recent:
            raise ValueError("summary lacks the outcome of the previous step")
        a0, a1 = game.payoff_slopes(role)
        d = K.advantage(a0, a1, summary.recent[-1])
        variance += state.last_prob * (1.0 - state.last_prob) * d * d
        while variance > budget:
            budget *= 2.0
    par = adaptive_hedge(state.c_floor).params(game, role)
    st, ring = _kernel_state(summary)
    st[K.S_B] = budget
    prob = K.strategy_prob(par, st, ring, summary.t)
    eta = st[K.S_ETA]
    assert eta >= state.c_floor / math.sqrt(summary.t)
    return prob, replace(state, variance=variance, budget=budget, last_prob=prob, eta=eta)


def adaptive_hedge_path(bits, c_floor: float = 1.0, game: Game2x2 | None = None, role: int = 1):
    """Mixed actions P_1..P_{n+1} of AdaptiveHedge along an opponent bit sequence of length n."""
    game = game or make_matching_pennies()
    state = AdaptiveHedgeState(c_floor)
    probs = []
    for t in range(1, len(bits) + 2):
        summary = HistorySummary.from_history(bits[: t - 1])
        p, state = adaptive_hedge_step(state, game, role, summary)
        probs.append(p)
    return probs


def counterfactual_hedge_iterate(summary: HistorySummary, c: float, game: Game2x2 | None = None,
                                 role: int = 1) -> float:
    """Hedge at rate exactly c/sqrt(t) on the unbiased empirical average."""
    if summary.t < 2:
        raise ValueError("counterfactual iterate needs t >= 2")
    if not c > 0:
        raise ValueError("c must be positive")
    game = game or make_matching_pennies()
    a0, a1 = game.payoff_slopes(role)
    return K.hedge_prob(a0, a1, summary.t, summary.q_hat, c / math.sqrt(summary.t))


def monotonicity_check(spec: StrategySpec, game: Game2x2, role: int, t: int, grid_size: int = 101) -> Monotonicity:
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    grid = np.linspace(0.0, 1.0, grid_size)
    vals = np.array([map_on_statistic(spec, game, role, t, x) for x in grid])
    steps = np.diff(vals)
    if np.all(steps >= 0):
        return Monotonicity.NON_DECREASING
    if np.all(steps <= 0):
        return Monotonicity.NON_INCREASING
    return Monotonicity.NON_MONOTONE
