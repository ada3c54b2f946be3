import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lastiterate.games import (
    CompetitiveClass,
    Game2x2,
    affine_transform,
    competitiveness,
    expected_payoff,
    make_competitive_family,
    make_matching_pennies,
    make_zero_sum_equivalent,
    nash_equilibrium,
    parse_game,
    relabel_actions,
)

GRID = (0.1, 0.25, 0.5, 1, 2, 4)


def test_matching_pennies():
    g = make_matching_pennies()
    assert g.g == ((1, 0), (0, 1))
    assert g.h == ((-1, 0), (0, -1))
    assert competitiveness(g) is CompetitiveClass.CONDITION_A
    eq = nash_equilibrium(g)
    assert (eq.p_star, eq.q_star, eq.r_star) == (0.5, 0.5, 0.5)


@pytest.mark.parametrize("a,b,p,q", [
    (0.111, 4, 0.8, 0.111 / 1.111),
    (0.25, 0.429, 0.429 / 1.429, 0.2),
    (1, 1, 0.5, 0.5),
])
def test_family_equilibrium(a, b, p, q):
    game = make_competitive_family(a, b)
    assert competitiveness(game) is CompetitiveClass.CONDITION_B
    eq = nash_equilibrium(game)
    assert abs(eq.p_star - p) <= 1e-12 and abs(eq.q_star - q) <= 1e-12
    zs = nash_equilibrium(make_zero_sum_equivalent(a, b))
    assert abs(zs.p_star - p) <= 1e-12 and abs(zs.q_star - q) <= 1e-12


def test_caption_value():
    assert abs(nash_equilibrium(make_competitive_family(0.25, 0.429)).p_star - 0.3) < 5e-4


def test_zero_sum_equivalent_at_one():
    g = make_zero_sum_equivalent(1, 1)
    assert g.g == ((0, 1), (1, 0)) and g.zero_sum


@pytest.mark.parametrize("a,b", list(itertools.product(GRID, GRID)))
def test_family_grid(a, b):
    eq = nash_equilibrium(make_competitive_family(a, b))
    zs = nash_equilibrium(make_zero_sum_equivalent(a, b))
    assert abs(eq.p_star - b / (1 + b)) <= 1e-12
    assert abs(eq.q_star - a / (1 + a)) <= 1e-12
    assert abs(eq.p_star - zs.p_star) <= 1e-12 and abs(eq.q_star - zs.q_star) <= 1e-12


@pytest.mark.parametrize("game", [make_matching_pennies(), make_competitive_family(0.111, 4),
                                  make_zero_sum_equivalent(0.25, 0.429), make_competitive_family(2, 0.1)])
def test_equilibrium_invariants(game):
    eq = nash_equilibrium(game)
    assert 0 < eq.p_star < 1 and 0 < eq.q_star < 1
    assert abs(eq.r_star - expected_payoff(game, eq.p_star, eq.q_star, 1)) <= 1e-12
    assert abs(expected_payoff(game, 1, eq.q_star, 1) - expected_payoff(game, 0, eq.q_star, 1)) <= 1e-12
    assert abs(expected_payoff(game, eq.p_star, 1, 2) - expected_payoff(game, eq.p_star, 0, 2)) <= 1e-12


def test_not_competitive():
    zero = Game2x2.from_arrays([[0, 0], [0, 0]], [[0, 0], [0, 0]])
    assert competitiveness(zero) is CompetitiveClass.NOT_COMPETITIVE
    with pytest.raises(ValueError):
        nash_equilibrium(zero)
    dominant = Game2x2.zero_sum_game([[1, 1], [0, 0]])
    assert competitiveness(dominant) is CompetitiveClass.NOT_COMPETITIVE


def test_validation():
    with pytest.raises(ValueError):
        make_competitive_family(0, 1)
    with pytest.raises(ValueError):
        make_zero_sum_equivalent(1, -2)
    with pytest.raises(ValueError):
        Game2x2.from_arrays([[np.inf, 0], [0, 1]], [[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        Game2x2.from_arrays([[1, 0], [0, 1]], [[1, 0], [0, 1]], zero_sum=True)
    with pytest.raises(ValueError):
        expected_payoff(make_matching_pennies(), 1.2, 0.5, 1)
    with pytest.raises(ValueError):
        expected_payoff(make_matching_pennies(), 0.5, 0.5, 3)


def test_expected_payoff_examples():
    mp = make_matching_pennies()
    assert expected_payoff(mp, 0.5, 0.5, 1) == 0.5
    assert expected_payoff(mp, 1, 1, 1) == 1
    assert expected_payoff(make_competitive_family(1, 1), 0.5, 0.5, 2) == 0.5


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 2),
       st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_bilinear(p, q, player, entries):
    game = Game2x2.from_arrays(np.reshape(entries[:4], (2, 2)), np.reshape(entries[4:], (2, 2)))
    lhs = expected_payoff(game, p, q, player)
    rhs = (1 - p) * expected_payoff(game, 0, q, player) + p * expected_payoff(game, 1, q, player)
    assert abs(lhs - rhs) <= 1e-12 * (1 + max(map(abs, entries)))


def test_relabeling():
    # relabeling one player's actions swaps the competitive condition and mirrors that coordinate
    for game in (make_matching_pennies(), make_competitive_family(0.25, 0.429)):
        eq = nash_equilibrium(game)
        for player in (1, 2):
            r = relabel_actions(game, player)
            assert competitiveness(r) is not competitiveness(game)
            assert competitiveness(r) is not CompetitiveClass.NOT_COMPETITIVE
            er = nash_equilibrium(r)
            if player == 1:
                assert abs(er.p_star - (1 - eq.p_star)) <= 1e-12 and abs(er.q_star - eq.q_star) <= 1e-12
            else:
                assert abs(er.q_star - (1 - eq.q_star)) <= 1e-12 and abs(er.p_star - eq.p_star) <= 1e-12
        both = relabel_actions(relabel_actions(game, 1), 2)
        assert competitiveness(both) is competitiveness(game)
        eb = nash_equilibrium(both)
        assert abs(eb.p_star - (1 - eq.p_star)) <= 1e-12 and abs(eb.q_star - (1 - eq.q_star)) <= 1e-12


def test_affine_transform():
    pm = affine_transform(make_matching_pennies(), 2, -1)
    assert pm.g == ((1, -1), (-1, 1)) and pm.zero_sum
    assert nash_equilibrium(pm).p_star == 0.5
    with pytest.raises(ValueError):
        affine_transform(pm, -1, 0)


def test_parse_and_json(tmp_path):
    assert parse_game("matching-pennies") == make_matching_pennies()
    assert parse_game("family:0.111,4").g == make_competitive_family(0.111, 4).g
    assert parse_game("zs-equivalent:1,1").g == ((0, 1), (1, 0))
    game = make_competitive_family(0.5, 2)
    path = tmp_path / "g.json"
    path.write_text(game.to_json())
    back = parse_game(str(path))
    assert back.g == game.g and back.h == game.h
    assert parse_game(json.dumps(make_matching_pennies().to_dict())).zero_sum
    for bad in ("family:1", "family:a,b", "nonsense", "family:-1,1"):
        with pytest.raises(ValueError):
            parse_game(bad)
