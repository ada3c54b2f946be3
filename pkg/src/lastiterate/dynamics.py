"""Repeated play under realization or telepathic feedback, recorded at checkpoints."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernel as K
from .games import CompetitiveClass, Game2x2, competitiveness, nash_equilibrium
from .strategies import Family, StrategySpec, fixed

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
DEFAULT_TAIL = 10_000
CHUNK = 1 << 16


class FeedbackMode(enum.Enum):
    REALIZATION = "realization"
    TELEPATHIC = "telepathic"


def splitmix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed: int, index: int) -> int:
    """Replica seed: splitmix64 of master + (index+1) * golden-ratio constant (mod 2^64).

    splitmix64 is a bijection on 64-bit words, so distinct indices (below 2^64)
    always give distinct seeds."""
    if index < 0:
        raise ValueError("replica index must be non-negative")
    return splitmix64((master_seed + (index + 1) * GOLDEN) & MASK64)


def player_rng(seed: int, player: int) -> np.random.Generator:
    """Independent substream for one player of one run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed & MASK64, spawn_key=(player,))))


@dataclass(frozen=True)
class CheckpointSchedule:
    """Times floor(base * ratio^k), deduplicated, plus any ``extra`` times and the final step."""

    base: float = 10.0
    ratio: float = 1.25
    extra: tuple[int, ...] = ()

    def __post_init__(self):
        if not (self.base >= 1 and self.ratio > 1):
            raise ValueError("checkpoint schedule needs base >= 1 and ratio > 1")

    def times(self, steps: int) -> np.ndarray:
        out = set()
        k = 0
        while True:
            t = math.floor(self.base * self.ratio ** k)
            if t > steps:
                break
            out.add(t)
            k += 1
        out.update(t for t in self.extra if 1 <= t <= steps)
        out.add(steps)
        return np.array(sorted(out), dtype=np.int64)


def checkpoint_schedule(steps: int, base: float = 10.0, ratio: float = 1.25, extra=()) -> np.ndarray:
    return CheckpointSchedule(base, ratio, tuple(extra)).times(steps)


class ScriptKind(enum.Enum):
    IID = "iid"
    PIECEWISE = "piecewise"
    ANTI_PREVIOUS = "anti-previous"


@dataclass(frozen=True)
class OpponentScript:
    """Player 2's realization sequence, generated without a learning rule.

    ``PIECEWISE`` emits Bernoulli(q) for steps 1..t_total-s_tail and the
    constant ``tail_value`` afterwards. ``ANTI_PREVIOUS`` is the adaptive
    adversary that plays the opposite of player 1's previous realization.
    """

    kind: ScriptKind
    q: float = 0.5
    t_total: int = 0
    s_tail: int = 0
    tail_value: int = 1

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"script probability must lie in [0, 1], got {self.q}")
        if self.kind is ScriptKind.PIECEWISE:
            if not (0 <= self.s_tail <= self.t_total):
                raise ValueError("need 0 <= s_tail <= t_total")
            if self.tail_value not in (0, 1):
                raise ValueError("tail_value must be 0 or 1")

    @classmethod
    def iid(cls, q: float) -> "OpponentScript":
        return cls(ScriptKind.IID, q)

    @classmethod
    def piecewise(cls, q: float, t_total: int, s_tail: int, tail_value: int = 1) -> "OpponentScript":
        return cls(ScriptKind.PIECEWISE, q, t_total, s_tail, tail_value)

    @classmethod
    def anti_previous(cls) -> "OpponentScript":
        return cls(ScriptKind.ANTI_PREVIOUS)

    def array(self) -> np.ndarray:
        code = {ScriptKind.IID: K.SCRIPT_IID, ScriptKind.PIECEWISE: K.SCRIPT_PIECEWISE,
                ScriptKind.ANTI_PREVIOUS: K.SCRIPT_ANTI_PREVIOUS}[self.kind]
        return np.array([code, self.q, self.t_total, self.s_tail, self.tail_value], dtype=float)

    def descriptor(self) -> str:
        if self.kind is ScriptKind.IID:
            return f"iid:q={self.q!r}"
        if self.kind is ScriptKind.ANTI_PREVIOUS:
            return "anti-previous"
        return f"piecewise:q={self.q!r},t={self.t_total},s={self.s_tail},tail={self.tail_value}"


def parse_script(text: str) -> OpponentScript:
    name, _, rest = text.strip().partition(":")
    kv = dict(item.split("=", 1) for item in rest.split(",")) if rest else {}
    try:
        if name == "iid":
            return OpponentScript.iid(float(kv["q"]))
        if name == "anti-previous" and not kv:
            return OpponentScript.anti_previous()
        if name == "piecewise":
            return OpponentScript.piecewise(float(kv["q"]), int(kv["t"]), int(kv["s"]), int(kv.get("tail", 1)))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad opponent script {text!r}: {exc}") from None
    raise ValueError(f"unknown opponent script {text!r}; expected iid:q=Q, piecewise:q=Q,t=T,s=S[,tail=0|1], anti-previous")


@dataclass(frozen=True)
class CheckpointRecord:
    t: int
    p_t: float
    q_t: float
    p_hat: float
    q_hat: float
    p_bar: float
    q_bar: float
    cum_payoff_1: float
    cum_payoff_2: float
    z_t: float
    counts: tuple[int, int, int, int]
    nbhd_count: int
    sigma2_sum_q: float
    sigma2_sum_p: float
    eta1: float
    eta2: float


@dataclass
class TailWindow:
    """Full-resolution record of steps ``start..start+len-1``; bits are -1 in telepathic mode."""

    start: int
    p: np.ndarray
    q: np.ndarray
    i: np.ndarray
    j: np.ndarray

    def __len__(self):
        return len(self.p)

    @property
    def end(self) -> int:
        return self.start + len(self.p) - 1


_COL = {name: k for k, name in enumerate(K.REC_FIELDS)}


@dataclass
class Trajectory:
    game: Game2x2
    spec1: StrategySpec
    spec2: StrategySpec | None
    script: OpponentScript | None
    mode: FeedbackMode
    seed: int | None
    steps: int
    data: np.ndarray
    tail: TailWindow
    floor_violations: int = 0

    def column(self, name: str) -> np.ndarray:
        return self.data[:, _COL[name]]

    @property
    def times(self) -> np.ndarray:
        return self.data[:, 0].astype(np.int64)

    def _payoffs(self, row) -> tuple[float, float]:
        if self.mode is FeedbackMode.TELEPATHIC:
            return row[_COL["epay1"]], row[_COL["epay2"]]
        n = row[_COL["n00"]:_COL["n11"] + 1]
        g, h = self.game.G.ravel(), self.game.H.ravel()
        return float(n @ g), float(n @ h)

    def record(self, k: int) -> CheckpointRecord:
        row = self.data[k]
        c = _COL
        pay1, pay2 = self._payoffs(row)
        return CheckpointRecord(
            t=int(row[0]), p_t=row[c["p"]], q_t=row[c["q"]], p_hat=row[c["p_hat"]], q_hat=row[c["q_hat"]],
            p_bar=row[c["p_bar"]], q_bar=row[c["q_bar"]], cum_payoff_1=pay1, cum_payoff_2=pay2,
            z_t=row[c["z"]], counts=tuple(int(x) for x in row[c["n00"]:c["n11"] + 1]),
            nbhd_count=int(row[c["nbhd"]]), sigma2_sum_q=row[c["sig2_q"]], sigma2_sum_p=row[c["sig2_p"]],
            eta1=row[c["eta1"]], eta2=row[c["eta2"]],
        )

    @property
    def records(self) -> list[CheckpointRecord]:
        return [self.record(k) for k in range(len(self.data))]

    def at(self, t: int) -> CheckpointRecord:
        k = np.searchsorted(self.times, t)
        if k >= len(self.data) or self.times[k] != t:
            raise KeyError(f"t={t} is not a checkpoint")
        return self.record(int(k))

    @property
    def final(self) -> CheckpointRecord:
        return self.record(len(self.data) - 1)


def _neighborhood(game: Game2x2) -> tuple[float, float]:
    if competitiveness(game) is CompetitiveClass.NOT_COMPETITIVE:
        return 1.0, 0.0  # empty interval, counter stays at zero
    q = nash_equilibrium(game).q_star
    return q / 2.0, (q + 1.0) / 2.0


def _simulate(game, spec1, spec2, script, mode, steps, seed, schedule, tail, chunk=CHUNK) -> Trajectory:
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if tail < 0:
        raise ValueError("tail window must be non-negative")
    telepathic = mode is FeedbackMode.TELEPATHIC
    par1 = spec1.params(game, 1)
    par2 = (spec2 or fixed(0.5)).params(game, 2)
    scr = script.array() if script is not None else np.zeros(5)
    st1, st2 = np.zeros(K.NSTATE), np.zeros(K.NSTATE)
    st1[K.S_B] = st2[K.S_B] = 1.0
    ring1, ring2 = np.zeros(K.LMAX), np.zeros(K.LMAX)
    gs = np.zeros(K.NGLOBAL)
    pay = np.concatenate([game.G.ravel(), game.H.ravel()])
    nb_lo, nb_hi = _neighborhood(game)
    ckpts = (schedule or CheckpointSchedule()).times(steps)
    ck_idx = np.zeros(1, dtype=np.int64)
    rec = np.zeros((len(ckpts), K.NREC))
    w = min(tail, steps)
    tail_start = steps - w + 1
    tp, tq = np.zeros(w), np.zeros(w)
    ti, tj = np.zeros(w, dtype=np.int8), np.zeros(w, dtype=np.int8)

    if telepathic:
        dummy = np.zeros(1)
        K.advance(steps, par1, par2, scr, st1, ring1, st2, ring2, gs, dummy, dummy, True, pay,
                  nb_lo, nb_hi, ckpts, ck_idx, rec, tail_start, tp, tq, ti, tj)
    else:
        rng1, rng2 = player_rng(seed, 1), player_rng(seed, 2)
        done = 0
        while done < steps:
            n = min(chunk, steps - done)
            u1, u2 = rng1.random(n), rng2.random(n)
            K.advance(n, par1, par2, scr, st1, ring1, st2, ring2, gs, u1, u2, False, pay,
                      nb_lo, nb_hi, ckpts, ck_idx, rec, tail_start, tp, tq, ti, tj)
            done += n
    bad = int(st1[K.S_FLOOR_BAD] + st2[K.S_FLOOR_BAD])
    assert bad == 0, "adaptive learning rate fell below its floor"
    return Trajectory(game, spec1, spec2, script, mode, seed, steps, rec,
                      TailWindow(tail_start, tp, tq, ti, tj), bad)


def run_realization(game: Game2x2, spec1: StrategySpec, spec2: StrategySpec, steps: int, seed: int,
                    schedule: CheckpointSchedule | None = None, tail: int = DEFAULT_TAIL) -> Trajectory:
    return _simulate(game, spec1, spec2, None, FeedbackMode.REALIZATION, steps, seed, schedule, tail)


def run_telepathic(game: Game2x2, spec1: StrategySpec, spec2: StrategySpec, steps: int,
                   schedule: CheckpointSchedule | None = None, tail: int = DEFAULT_TAIL) -> Trajectory:
    return _simulate(game, spec1, spec2, None, FeedbackMode.TELEPATHIC, steps, None, schedule, tail)


def run_vs_script(game: Game2x2, spec1: StrategySpec, script: OpponentScript, steps: int, seed: int,
                  schedule: CheckpointSchedule | None = None, tail: int = DEFAULT_TAIL) -> Trajectory:
    return _simulate(game, spec1, None, script, FeedbackMode.REALIZATION, steps, seed, schedule, tail)


@dataclass(frozen=True)
class RunConfig:
    """Everything but the seed. Exactly one of ``spec2`` and ``script`` is set."""

    game: Game2x2
    spec1: StrategySpec
    spec2: StrategySpec | None = None
    script: OpponentScript | None = None
    mode: FeedbackMode = FeedbackMode.REALIZATION
    steps: int = 1000
    schedule: CheckpointSchedule = field(default_factory=CheckpointSchedule)
    tail: int = 0

    def __post_init__(self):
        if (self.spec2 is None) == (self.script is None):
            raise ValueError("set exactly one of spec2 and script")
        if self.script is not None and self.mode is FeedbackMode.TELEPATHIC:
            raise ValueError("scripted opponents only make sense under realization feedback")

    def run(self, seed: int | None) -> Trajectory:
        return _simulate(self.game, self.spec1, self.spec2, self.script, self.mode,
                         self.steps, seed, self.schedule, self.tail)


def _replica(args):
    config, seed = args
    return config.run(seed)


@dataclass
class Ensemble:
    config: RunConfig
    master_seed: int
    seeds: list[int]
    runs: list[Trajectory]

    def __len__(self):
        return len(self.runs)

    @property
    def times(self) -> np.ndarray:
        return self.runs[0].times

    def matrix(self, name: str) -> np.ndarray:
        """Replicas x checkpoints array of one recorded field."""
        return np.stack([r.column(name) for r in self.runs])

    def values(self, name: str, t: int) -> np.ndarray:
        k = np.searchsorted(self.times, t)
        if k >= len(self.times) or self.times[k] != t:
            raise KeyError(f"t={t} is not a checkpoint")
        return np.array([r.data[k, _COL[name]] for r in self.runs])


def monte_carlo(config: RunConfig, n_runs: int, master_seed: int = 0, workers: int = 1) -> Ensemble:
    """Independent replicas with seeds ``mix_seed(master_seed, i)``, returned in replica order."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    seeds = [mix_seed(master_seed, i) for i in range(n_runs)]
    jobs = [(config, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_replica, jobs, chunksize=max(1, n_runs // (4 * workers))))
    else:
        runs = [_replica(j) for j in jobs]
    return Ensemble(config, master_seed, seeds, runs)
