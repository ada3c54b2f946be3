import math

import numpy as np
import pytest

from lastiterate import dynamics as D
from lastiterate.dynamics import (
    CheckpointSchedule,
    FeedbackMode,
    OpponentScript,
    RunConfig,
    checkpoint_schedule,
    mix_seed,
    monte_carlo,
    parse_script,
    run_realization,
    run_telepathic,
    run_vs_script,
    splitmix64,
)
from lastiterate.games import make_competitive_family, make_matching_pennies, nash_equilibrium
from lastiterate.probes import near_equilibrium_claim, time_average_deviation
from lastiterate.strategies import adaptive_hedge, fixed, hedge, log_barrier

MP = make_matching_pennies()


def test_splitmix_reference():
    # first outputs of the reference splitmix64 generator seeded with 0
    assert splitmix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
    assert splitmix64((2 * 0x9E3779B97F4A7C15) % 2 ** 64) == 0x6E789E6AA1B965F4


def test_mix_seed_distinct():
    seeds = {mix_seed(42, i) for i in range(10_000)}
    assert len(seeds) == 10_000
    assert mix_seed(0, 0) != mix_seed(0, 1) and mix_seed(0, 0) != mix_seed(1, 0)


def test_checkpoint_schedule():
    ts = checkpoint_schedule(1000)
    assert list(ts[:8]) == [10, 12, 15, 19, 24, 30, 38, 47]
    assert ts[-1] == 1000 and np.all(np.diff(ts) > 0)
    assert list(checkpoint_schedule(5)) == [5]
    assert 777 in checkpoint_schedule(1000, extra=(777,))


def test_degenerate_fixed():
    traj = run_realization(MP, fixed(1.0), fixed(1.0), 500, 3)
    assert np.all(traj.column("q_hat") == 1) and np.all(traj.column("p_hat") == 1)
    assert traj.final.counts == (0, 0, 0, 500)


def test_determinism_and_seed_dependence():
    a = run_realization(MP, hedge(), hedge(), 20_000, 5)
    b = run_realization(MP, hedge(), hedge(), 20_000, 5)
    c = run_realization(MP, hedge(), hedge(), 20_000, 6)
    assert np.array_equal(a.data, b.data) and np.array_equal(a.tail.i, b.tail.i)
    assert not np.array_equal(a.data, c.data)


def test_chunking_invariance():
    args = (MP, hedge(ell=1), log_barrier(0.7), None, FeedbackMode.REALIZATION, 5000, 9, None, 5000)
    a = D._simulate(*args)
    b = D._simulate(*args, chunk=97)
    assert np.array_equal(a.data, b.data) and np.array_equal(a.tail.j, b.tail.j)


def test_realization_invariants():
    traj = run_realization(MP, hedge(), hedge(), 50_000, 1)
    for r in traj.records:
        assert float(r.z_t).is_integer() and r.q_hat == r.z_t / r.t and 0 <= r.z_t <= r.t
        assert all(0 <= x <= 1 for x in (r.p_t, r.q_t, r.p_hat, r.q_hat, r.p_bar, r.q_bar))
        assert sum(r.counts) == r.t
        assert r.z_t == r.counts[1] + r.counts[3]


def test_payoff_matches_tail_window():
    steps, w = 30_000, 4000
    game = make_competitive_family(0.25, 0.429)
    traj = run_realization(game, hedge(), hedge(), steps, 2, CheckpointSchedule(extra=(steps - w,)), tail=w)
    before, after = traj.at(steps - w), traj.final
    i, j = traj.tail.i.astype(int), traj.tail.j.astype(int)
    assert len(i) == w and traj.tail.start == steps - w + 1
    assert math.isclose(after.cum_payoff_1 - before.cum_payoff_1, game.G[i, j].sum(), abs_tol=1e-9)
    assert math.isclose(after.cum_payoff_2 - before.cum_payoff_2, game.H[i, j].sum(), abs_tol=1e-9)


def test_telepathic_deterministic():
    a = run_telepathic(MP, hedge(init=0.7), log_barrier(), 20_000)
    b = run_telepathic(MP, hedge(init=0.7), log_barrier(), 20_000)
    assert np.array_equal(a.data, b.data)
    assert np.all(a.tail.i == -1)
    rec = a.final
    assert rec.z_t == pytest.approx(rec.t * rec.q_bar, abs=1e-6) and rec.p_hat == pytest.approx(rec.p_bar, abs=1e-12)


def test_telepathic_symmetric_fixed_point():
    traj = run_telepathic(MP, hedge(), fixed(0.5), 10_000, tail=10_000)
    assert np.all(traj.tail.p == 0.5)
    traj = run_telepathic(MP, fixed(0.5), hedge(), 10_000, tail=10_000)
    assert np.all(traj.tail.q == 0.5)


def test_fixed_opponent_concentration():
    traj = run_vs_script(MP, hedge(), OpponentScript.iid(0.2), 10 ** 6, 4, tail=0)
    assert abs(traj.final.q_hat - 0.2) <= 0.004


def test_piecewise_script():
    t, s = 5000, 300
    traj = run_vs_script(MP, hedge(), OpponentScript.piecewise(0.5, t, s, 1), t, 8, tail=s + 50)
    assert np.all(traj.tail.j[-s:] == 1)
    traj0 = run_vs_script(MP, hedge(), OpponentScript.piecewise(0.5, t, s, 0), t, 8, tail=s)
    assert np.all(traj0.tail.j == 0)
    a = run_vs_script(MP, hedge(), OpponentScript.piecewise(0.5, t, 0), t, 8, tail=t)
    b = run_vs_script(MP, hedge(), OpponentScript.iid(0.5), t, 8, tail=t)
    assert np.array_equal(a.data, b.data) and np.array_equal(a.tail.j, b.tail.j)


def test_anti_previous_script():
    traj = run_vs_script(MP, hedge(), OpponentScript.anti_previous(), 2000, 3, tail=2000)
    assert np.array_equal(traj.tail.j[1:], 1 - traj.tail.i[:-1])
    assert traj.tail.q[0] == 0.5


def test_substreams_independent_of_player_one():
    a = run_vs_script(MP, hedge(), OpponentScript.iid(0.5), 3000, 21, tail=3000)
    b = run_vs_script(MP, log_barrier(0.7), OpponentScript.iid(0.5), 3000, 21, tail=3000)
    assert np.array_equal(a.tail.j, b.tail.j) and not np.array_equal(a.tail.i, b.tail.i)


def test_script_parsing():
    for text in ("iid:q=0.3", "anti-previous", "piecewise:q=0.5,t=1000,s=10,tail=0"):
        assert parse_script(text).descriptor() == text
    for bad in ("iid", "piecewise:q=0.5,t=10,s=20", "coin:q=1"):
        with pytest.raises(ValueError):
            parse_script(bad)


def test_monte_carlo_single_equals_run():
    cfg = RunConfig(MP, hedge(), hedge(), steps=3000, tail=100)
    ens = monte_carlo(cfg, 1, 77)
    ref = run_realization(MP, hedge(), hedge(), 3000, mix_seed(77, 0), tail=100)
    assert np.array_equal(ens.runs[0].data, ref.data)


def test_monte_carlo_workers_ordered():
    cfg = RunConfig(MP, hedge(), hedge(), steps=2000)
    serial = monte_carlo(cfg, 6, 3)
    pooled = monte_carlo(cfg, 6, 3, workers=2)
    for a, b in zip(serial.runs, pooled.runs):
        assert np.array_equal(a.data, b.data)
    assert serial.seeds == pooled.seeds


def test_ensemble_mean_binomial():
    cfg = RunConfig(MP, hedge(), script=OpponentScript.iid(0.2), steps=10 ** 4)
    n = 60
    qh = monte_carlo(cfg, n, 0).values("q_hat", 10 ** 4)
    assert abs(qh.mean() - 0.2) <= 3 * math.sqrt(0.16 / (10 ** 4 * n))


def test_time_average_hedge_self_play():
    traj = run_realization(MP, hedge(), hedge(), 10 ** 5, 12)
    assert math.sqrt(10 ** 5) * abs(traj.final.q_bar - 0.5) <= 5


def test_adaptive_floor_never_violated():
    traj = run_realization(MP, adaptive_hedge(2.0), adaptive_hedge(0.5), 20_000, 1)
    assert traj.floor_violations == 0
    t = traj.times.astype(float)
    assert np.all(traj.column("eta1") >= 2.0 / np.sqrt(t)) and np.all(traj.column("eta2") >= 0.5 / np.sqrt(t))


def test_neighborhood_claim():
    hits = 0
    for seed in range(30):
        traj = run_realization(MP, hedge(), hedge(), 20_000, seed, tail=0)
        claim = near_equilibrium_claim(traj)
        if claim.applicable:
            hits += 1
            assert claim.fraction > 0.9
    traj = run_realization(MP, fixed(0.5), fixed(0.5), 1000, 0)
    assert near_equilibrium_claim(traj).applicable and near_equilibrium_claim(traj).fraction == 1


def test_fixed_opponent_time_average_exact():
    eq = nash_equilibrium(MP)
    traj = run_vs_script(MP, hedge(), OpponentScript.iid(0.5), 5000, 0)
    assert np.all(time_average_deviation(traj, eq) == 0)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(MP, hedge())
    with pytest.raises(ValueError):
        RunConfig(MP, hedge(), hedge(), OpponentScript.iid(0.5))
    with pytest.raises(ValueError):
        RunConfig(MP, hedge(), script=OpponentScript.iid(0.5), mode=FeedbackMode.TELEPATHIC)
    with pytest.raises(ValueError):
        run_realization(MP, hedge(), hedge(), 0, 1)
