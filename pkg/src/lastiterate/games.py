"""2x2 games, competitiveness classes and the completely mixed equilibrium."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CompetitiveClass(enum.Enum):
    CONDITION_A = "ConditionA"
    CONDITION_B = "ConditionB"
    NOT_COMPETITIVE = "NotCompetitive"


@dataclass(frozen=True)
class Game2x2:
    """Payoff matrices indexed ``[action of player 1][action of player 2]``.

    ``g`` is player 1's payoff, ``h`` player 2's. Action 1 is the second
    row/column. ``name`` is the descriptor the game was built from, if any.
    """

    g: tuple[tuple[float, float], tuple[float, float]]
    h: tuple[tuple[float, float], tuple[float, float]]
    zero_sum: bool = False
    name: str | None = None

    def __post_init__(self):
        for m in (self.g, self.h):
            if len(m) != 2 or any(len(row) != 2 for row in m):
                raise ValueError("payoff matrices must be 2x2")
            if not all(math.isfinite(x) for row in m for x in row):
                raise ValueError("payoffs must be finite")
        if self.zero_sum and any(
            self.h[i][j] != -self.g[i][j] for i in (0, 1) for j in (0, 1)
        ):
            raise ValueError("zero-sum game must satisfy h = -g exactly")

    @classmethod
    def from_arrays(cls, g, h, zero_sum=False, name=None) -> "Game2x2":
        g = tuple(tuple(float(x) for x in row) for row in g)
        h = tuple(tuple(float(x) for x in row) for row in h)
        return cls(g, h, zero_sum=zero_sum, name=name)

    @classmethod
    def zero_sum_game(cls, g, name=None) -> "Game2x2":
        return cls.from_arrays(g, [[-x for x in row] for row in g], zero_sum=True, name=name)

    @property
    def G(self) -> np.ndarray:
        return np.array(self.g, dtype=float)

    @property
    def H(self) -> np.ndarray:
        return np.array(self.h, dtype=float)

    def payoff_slopes(self, role: int) -> tuple[float, float]:
        """Payoff advantage of action 1 over action 0 against each pure opponent action.

        For role 1 the advantage against a mixture q is ``a0*(1-q) + a1*q``;
        for role 2 the same form holds with the opponent mixture p.
        """
        if role == 1:
            return self.g[1][0] - self.g[0][0], self.g[1][1] - self.g[0][1]
        if role == 2:
            return self.h[0][1] - self.h[0][0], self.h[1][1] - self.h[1][0]
        raise ValueError(f"role must be 1 or 2, got {role}")

    def to_dict(self) -> dict:
        return {"g": [list(r) for r in self.g], "h": [list(r) for r in self.h]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, name=None) -> "Game2x2":
        g, h = d["g"], d["h"]
        zs = all(float(h[i][j]) == -float(g[i][j]) for i in (0, 1) for j in (0, 1))
        return cls.from_arrays(g, h, zero_sum=zs, name=name)

    def descriptor(self) -> str:
        return self.name if self.name is not None else self.to_json()


@dataclass(frozen=True)
class Equilibrium:
    p_star: float
    q_star: float
    r_star: float


def make_matching_pennies() -> Game2x2:
    return Game2x2.zero_sum_game([[1.0, 0.0], [0.0, 1.0]], name="matching-pennies")


def _check_positive(alpha, beta):
    if not (alpha > 0 and beta > 0) or not (math.isfinite(alpha) and math.isfinite(beta)):
        raise ValueError(f"alpha and beta must be positive and finite, got ({alpha}, {beta})")


def make_competitive_family(alpha: float, beta: float) -> Game2x2:
    """Non-zero-sum competitive game with equilibrium (beta/(1+beta), alpha/(1+alpha))."""
    _check_positive(alpha, beta)
    g = [[-alpha, 0.0], [0.0, -1.0]]
    h = [[beta, 0.0], [0.0, 1.0]]
    return Game2x2.from_arrays(g, h, name=f"family:{alpha!r},{beta!r}")


def make_zero_sum_equivalent(alpha: float, beta: float) -> Game2x2:
    """Zero-sum game sharing best responses (and the equilibrium) with the family game."""
    _check_positive(alpha, beta)
    g = [
        [(1.0 - alpha * beta) / (1.0 + beta), 1.0],
        [(1.0 + alpha) / (1.0 + beta), 0.0],
    ]
    return Game2x2.zero_sum_game(g, name=f"zs-equivalent:{alpha!r},{beta!r}")


def competitiveness(game: Game2x2) -> CompetitiveClass:
    G, H = game.g, game.h
    if G[0][0] > G[1][0] and G[0][1] < G[1][1] and H[0][0] < H[0][1] and H[1][0] > H[1][1]:
        return CompetitiveClass.CONDITION_A
    if G[0][0] < G[1][0] and G[0][1] > G[1][1] and H[0][0] > H[0][1] and H[1][0] < H[1][1]:
        return CompetitiveClass.CONDITION_B
    return CompetitiveClass.NOT_COMPETITIVE


def expected_payoff(game: Game2x2, p: float, q: float, player: int) -> float:
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"probabilities out of range: p={p}, q={q}")
    if player == 1:
        X = game.g
    elif player == 2:
        X = game.h
    else:
        raise ValueError(f"player must be 1 or 2, got {player}")
    return (
        (1 - p) * (1 - q) * X[0][0]
        + (1 - p) * q * X[0][1]
        + p * (1 - q) * X[1][0]
        + p * q * X[1][1]
    )


def nash_equilibrium(game: Game2x2) -> Equilibrium:
    """Unique completely mixed equilibrium of a competitive game (indifference conditions)."""
    cls = competitiveness(game)
    if cls is CompetitiveClass.NOT_COMPETITIVE:
        raise ValueError("game is not competitive; equilibrium may be pure or non-unique")
    G, H = game.g, game.h
    gq0 = G[0][0] - G[1][0]
    gq1 = G[1][1] - G[0][1]
    hp0 = H[0][0] - H[0][1]
    hp1 = H[1][1] - H[1][0]
    # strict inequalities give same-sign, nonzero brackets
    assert (gq0 + gq1 != 0) and (hp0 + hp1 != 0), "degenerate equilibrium denominator"
    q_star = gq0 / (gq0 + gq1)
    p_star = hp0 / (hp0 + hp1)
    assert 0.0 < p_star < 1.0 and 0.0 < q_star < 1.0
    return Equilibrium(p_star, q_star, expected_payoff(game, p_star, q_star, 1))


def relabel_actions(game: Game2x2, player: int) -> Game2x2:
    """Swap the action labels of one player (rows for player 1, columns for player 2)."""
    if player == 1:
        perm = lambda X: [[X[1 - i][j] for j in (0, 1)] for i in (0, 1)]
    elif player == 2:
        perm = lambda X: [[X[i][1 - j] for j in (0, 1)] for i in (0, 1)]
    else:
        raise ValueError(f"player must be 1 or 2, got {player}")
    return Game2x2.from_arrays(perm(game.g), perm(game.h), zero_sum=game.zero_sum)


def affine_transform(game: Game2x2, scale: float, shift: float) -> Game2x2:
    """Apply x -> scale*x + shift to player 1's payoffs (and the negation to player 2's
    in zero-sum games). Maps the {0,1} matching pennies to the {-1,1} variant with (2, -1)."""
    if scale <= 0:
        raise ValueError("scale must be positive to preserve preferences")
    g = [[scale * x + shift for x in row] for row in game.g]
    if game.zero_sum:
        return Game2x2.zero_sum_game(g)
    h = [[scale * x + shift for x in row] for row in game.h]
    return Game2x2.from_arrays(g, h)


def parse_game(text: str) -> Game2x2:
    """Parse ``matching-pennies``, ``family:alpha,beta``, ``zs-equivalent:alpha,beta``,
    an inline JSON object, or a path to a JSON file."""
    s = text.strip()
    if s == "matching-pennies":
        return make_matching_pennies()
    for prefix, ctor in (("family:", make_competitive_family), ("zs-equivalent:", make_zero_sum_equivalent)):
        if s.startswith(prefix):
            parts = s[len(prefix):].split(",")
            if len(parts) != 2:
                raise ValueError(f"expected '{prefix}alpha,beta', got {text!r}")
            try:
                a, b = (float(x) for x in parts)
            except ValueError:
                raise ValueError(f"expected '{prefix}alpha,beta' with reals, got {text!r}") from None
            return ctor(a, b)
    if s.startswith("{"):
        return Game2x2.from_dict(json.loads(s))
    path = Path(s)
    if path.is_file():
        return Game2x2.from_dict(json.loads(path.read_text()), name=s)
    raise ValueError(
        f"unknown game {text!r}; expected matching-pennies, family:alpha,beta, "
        "zs-equivalent:alpha,beta, or a JSON file path"
    )
