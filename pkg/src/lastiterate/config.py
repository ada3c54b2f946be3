"""Experiment configuration: a ``key = value`` document with validated fields.

Example::

    game = matching-pennies
    strategy1 = hedge:r=0.5
    strategy2 = hedge:r=0.5
    mode = realization
    steps = 1000000

Blank lines and ``#`` comments are ignored. Unknown keys are errors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .dynamics import CheckpointSchedule, FeedbackMode, OpponentScript, RunConfig, parse_script
from .games import Game2x2, parse_game
from .strategies import StrategySpec, parse_strategy


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    game: str = "matching-pennies"
    strategy1: str = "hedge:r=0.5"
    strategy2: str | None = "hedge:r=0.5"
    opponent: str | None = None
    mode: str = "realization"
    steps: int = 10_000
    n_runs: int = 1
    seed: int = 0
    checkpoint_base: float = 10.0
    checkpoint_ratio: float = 1.25
    tail: int = 10_000
    delta: float = 0.1
    gamma: float = 1.0
    window: float = 1.0
    probe_t: int = 100_000
    probe_s: tuple[int, ...] = ()
    alpha_coeff: float = 2.0
    s_points: int = 12
    tail_value: int = 1
    output_dir: str | None = None

    # fields that do not change any emitted number
    NON_SEMANTIC = ("output_dir",)

    def __post_init__(self):
        def bad(key, expected):
            raise ConfigError(f"invalid value for '{key}': {getattr(self, key)!r}; expected {expected}")

        for key in ("game", "strategy1", "strategy2", "opponent"):
            val = getattr(self, key)
            if val is None:
                continue
            try:
                parsed = {"game": parse_game, "opponent": parse_script}.get(key, parse_strategy)(val)
            except (ValueError, OSError) as exc:
                raise ConfigError(f"invalid value for '{key}': {exc}") from None
            if key != "game":  # store the canonical descriptor
                object.__setattr__(self, key, parsed.descriptor())
        if self.opponent is not None:
            object.__setattr__(self, "strategy2", None)
        if self.strategy2 is None and self.opponent is None:
            bad("strategy2", "a strategy descriptor, or set 'opponent'")
        if self.mode not in ("realization", "telepathic"):
            bad("mode", "realization | telepathic")
        if self.mode == "telepathic" and self.opponent is not None:
            bad("mode", "realization when a scripted opponent is used")
        for key in ("steps", "n_runs", "probe_t", "s_points"):
            if getattr(self, key) < 1:
                bad(key, "an integer >= 1")
        if self.tail < 0:
            bad("tail", "an integer >= 0")
        if not 0 <= self.seed < 2 ** 64:
            bad("seed", "an integer in [0, 2^64)")
        if self.checkpoint_base < 1 or self.checkpoint_ratio <= 1:
            bad("checkpoint_ratio", "base >= 1 and ratio > 1")
        if not 0 < self.delta < 0.5:
            bad("delta", "a real in (0, 0.5)")
        for key in ("gamma", "window", "alpha_coeff"):
            if not getattr(self, key) > 0:
                bad(key, "a positive real")
        if self.tail_value not in (0, 1):
            bad("tail_value", "0 or 1")
        if any(not 0 <= s < self.probe_t for s in self.probe_s):
            bad("probe_s", "integers s with 0 <= s < probe_t, separated by '/'")

    @property
    def game_obj(self) -> Game2x2:
        return parse_game(self.game)

    @property
    def spec1(self) -> StrategySpec:
        return parse_strategy(self.strategy1)

    @property
    def spec2(self) -> StrategySpec | None:
        return parse_strategy(self.strategy2) if self.strategy2 else None

    @property
    def script(self) -> OpponentScript | None:
        return parse_script(self.opponent) if self.opponent else None

    @property
    def feedback(self) -> FeedbackMode:
        return FeedbackMode(self.mode)

    def run_config(self) -> RunConfig:
        return RunConfig(self.game_obj, self.spec1, self.spec2, self.script, self.feedback, self.steps,
                         CheckpointSchedule(self.checkpoint_base, self.checkpoint_ratio), self.tail)

    def items(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None or (f.name == "probe_s" and not val):
                continue
            if f.name == "probe_s":
                val = "/".join(str(s) for s in val)
            elif isinstance(val, float):
                val = repr(val)
            yield f.name, str(val)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def config_hash(self) -> str:
        """sha256 of the sorted semantic ``key = value`` lines."""
        text = "".join(f"{k} = {v}\n" for k, v in sorted(self.items()) if k not in self.NON_SEMANTIC)
        return hashlib.sha256(text.encode()).hexdigest()


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INT = {"steps", "n_runs", "seed", "tail", "probe_t", "s_points", "tail_value"}
_FLOAT = {"checkpoint_base", "checkpoint_ratio", "delta", "gamma", "window", "alpha_coeff"}


def _convert(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown key '{key}'; known keys: {', '.join(sorted(_FIELDS))}")
    raw = raw.strip()
    try:
        if key in _INT:
            return int(float(raw)) if "e" in raw.lower() and float(raw).is_integer() else int(raw)
        if key in _FLOAT:
            return float(raw)
        if key == "probe_s":
            return tuple(int(x) for x in raw.split("/") if x.strip())
    except ValueError:
        kind = "an integer" if key in _INT else "a real" if key in _FLOAT else "integers separated by '/'"
        raise ConfigError(f"invalid value for '{key}': {raw!r}; expected {kind}") from None
    if raw.lower() == "none" and key in ("strategy2", "opponent", "output_dir"):
        return None
    return raw


def parse_pairs(pairs) -> dict:
    out = {}
    for n, line in enumerate(pairs, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        out[key.strip()] = _convert(key.strip(), val)
    return out


def parse_config_text(text: str, overrides=()) -> ExperimentConfig:
    values = parse_pairs(text.splitlines())
    values.update(parse_pairs(overrides))
    if "opponent" in values and "strategy2" not in values:
        values["strategy2"] = None
    return ExperimentConfig(**values)


def parse_config(path=None, overrides=()) -> ExperimentConfig:
    """Load a config file (optional) and apply ``key=value`` overrides on top."""
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config_text(text, overrides)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw)
