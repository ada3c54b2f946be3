"""The acceptance criteria, each a function returning a ``CriterionResult``.

``FAST`` criteria finish in seconds; the rest run 10^5 to 10^6-step
ensembles and take minutes. In the fast tier, the regret criterion runs a
reduced horizon (10^4) and is labelled as such.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    CheckpointSchedule,
    OpponentScript,
    RunConfig,
    mix_seed,
    monte_carlo,
    run_telepathic,
    run_vs_script,
)
from .games import (
    make_competitive_family,
    make_matching_pennies,
    make_zero_sum_equivalent,
    nash_equilibrium,
)
from .pmf import (
    demoivre_ratio_certificate,
    extremizer_oracle,
    poisson_binomial_enumeration,
    poisson_binomial_pmf,
    shift_ratio_bound_check,
)
from .probes import (
    mclt_normality,
    oscillation_estimate,
    regret_series,
    scan_sensitivity,
    stationarity_check,
    time_average_deviation,
)
from .strategies import (
    AdaptiveHedgeState,
    HistorySummary,
    adaptive_hedge,
    adaptive_hedge_step,
    counterfactual_hedge_iterate,
    hedge,
    log_barrier,
)

MP = make_matching_pennies()


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    reduced: bool = False

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        note = " [reduced horizon]" if self.reduced else ""
        return f"criterion {self.number:2d} {tag}  {self.name}{note}: {self.detail}"


def ne_exactness(full=True, workers=1) -> CriterionResult:
    cases = [
        (MP, (0.5, 0.5)),
        (make_competitive_family(0.111, 4), (0.8, 0.111 / 1.111)),
        (make_competitive_family(0.25, 0.429), (0.429 / 1.429, 0.2)),
    ]
    err = 0.0
    for game, (p, q) in cases:
        eq = nash_equilibrium(game)
        err = max(err, abs(eq.p_star - p), abs(eq.q_star - q))
    for a, b in ((0.111, 4), (0.25, 0.429), (1, 1)):
        e1, e2 = nash_equilibrium(make_competitive_family(a, b)), nash_equilibrium(make_zero_sum_equivalent(a, b))
        err = max(err, abs(e1.p_star - e2.p_star), abs(e1.q_star - e2.q_star))
    p3 = nash_equilibrium(make_competitive_family(0.25, 0.429)).p_star
    ok = err <= 1e-12 and abs(p3 - 0.3) < 5e-4
    return CriterionResult(1, "NE exactness", ok, f"max error {err:.2e}; family(0.25,0.429) p* = {p3:.6f}")


def poisson_binomial_oracle(full=True, workers=1) -> CriterionResult:
    rng = np.random.default_rng(20240101)
    err = 0.0
    for k in range(100):
        qs = rng.random(1 + k % 16)
        err = max(err, float(np.abs(poisson_binomial_pmf(qs).masses - poisson_binomial_enumeration(qs).masses).max()))
    return CriterionResult(2, "Poisson-binomial DP vs enumeration", err <= 1e-12, f"100 cases, max abs error {err:.2e}")


def regret_certification(full=True, workers=1) -> CriterionResult:
    t = 10 ** 5 if full else 10 ** 4
    adversaries = {
        "fixed-0": OpponentScript.iid(0.0),
        "fixed-1": OpponentScript.iid(1.0),
        "iid-0.5": OpponentScript.iid(0.5),
        "anti-previous": OpponentScript.anti_previous(),
    }
    worst = {}
    for name, script in adversaries.items():
        worst[name] = max(
            regret_series(run_vs_script(MP, hedge(0.5), script, t, mix_seed(0, i), tail=0)).max() for i in range(20)
        )
    ok = all(v <= 3 for v in worst.values())
    detail = ", ".join(f"{k} {v:.3f}" for k, v in worst.items())
    return CriterionResult(3, "regret/sqrt(t) <= 3 up to t = %d, 20 seeds" % t, ok, "max " + detail, reduced=not full)


def time_average(full=True, workers=1) -> CriterionResult:
    eq = nash_equilibrium(MP)
    ens = monte_carlo(RunConfig(MP, hedge(), hedge(), steps=10 ** 6, tail=0), 20, 0, workers)
    worst = []
    for tr in ens.runs:
        d = time_average_deviation(tr, eq)
        worst.append(d[tr.times >= 1000].max())
    good = sum(w <= 5 for w in worst)
    return CriterionResult(4, "time-average sqrt(t)|q_bar - 1/2| <= 5 on [1e3, 1e6]", good >= 18,
                           f"{good}/20 seeds within bound, worst {max(worst):.3f}")


def _fraction(cfg, workers, t=10 ** 6):
    ens = monte_carlo(cfg, 200, 0, workers)
    return oscillation_estimate(ens, 0.5, 0.1, [t]).fraction_deviating[0]


def warmup_oscillation(full=True, workers=1) -> CriterionResult:
    f = _fraction(RunConfig(MP, hedge(), script=OpponentScript.iid(0.5), steps=10 ** 6), workers)
    return CriterionResult(5, "Hedge vs fixed 1/2: P(|P_t - 1/2| >= 0.1) >= 0.5 at 1e6", f >= 0.5,
                           f"fraction {f:.3f} over 200 seeds")


def both_oscillation(full=True, workers=1) -> CriterionResult:
    fr = {
        name: _fraction(RunConfig(MP, s, s, steps=10 ** 6), workers)
        for name, s in (("hedge", hedge()), ("optimistic-hedge", hedge(ell=1)), ("logbarrier", log_barrier()))
    }
    return CriterionResult(6, "self-play: P(|P_t - 1/2| >= 0.1) >= 0.5 at 1e6", all(v >= 0.5 for v in fr.values()),
                           ", ".join(f"{k} {v:.3f}" for k, v in fr.items()))


def telepathic_contrast(full=True, workers=1) -> CriterionResult:
    # both rules start player 1 away from equilibrium; from (1/2, 1/2) every rule stays there
    opt = run_telepathic(MP, hedge(ell=1, init=0.9), hedge(ell=1), 10 ** 5, tail=1)
    conv = abs(opt.final.p_t - 0.5)
    plain = run_telepathic(MP, hedge(init=0.9), hedge(), 10 ** 6, tail=9 * 10 ** 5 + 1)
    amp = float(np.abs(plain.tail.p - 0.5).max())
    ok = conv <= 0.01 and amp >= 0.25
    return CriterionResult(7, "telepathic: optimistic converges, plain Hedge cycles", ok,
                           f"optimistic |p - 1/2| at 1e5 = {conv:.2e} (<= 0.01); "
                           f"plain max |p - 1/2| on [1e5, 1e6] = {amp:.2e} (>= 0.25)")


def sensitivity(full=True, workers=1) -> CriterionResult:
    scan = scan_sensitivity(hedge(), MP, 10 ** 5, 2.0, 200, 0)
    b = scan.best
    lo = b.mean_response - b.ci_halfwidth
    return CriterionResult(8, "sensitivity probe, best s <= 2 sqrt(t)", b.mean_response >= 0.6 and lo > 0.55,
                           f"s = {b.s}, mean response {b.mean_response:.4f}, 95% CI [{lo:.4f}, {b.mean_response + b.ci_halfwidth:.4f}]")


def stationarity(full=True, workers=1) -> CriterionResult:
    r = stationarity_check(MP, hedge(), 0.5, 10 ** 4, 500, 0, workers)
    dp = abs(r.mean_payoff - r.r_star) / r.se_payoff
    dz = abs(r.mean_z - r.q_star) / r.se_z
    return CriterionResult(9, "stationarity vs i.i.d. q*", r.within(3.0),
                           f"payoff/t {r.mean_payoff:.5f} ({dp:.2f} SE from R*), Z/t {r.mean_z:.5f} ({dz:.2f} SE from q*)")


def martingale_clt(full=True, workers=1) -> CriterionResult:
    t = 10 ** 5
    sched = CheckpointSchedule(base=t, ratio=2.0)
    res = {}
    for name, cfg in (("fixed-NE", RunConfig(MP, hedge(), script=OpponentScript.iid(0.5), steps=t, schedule=sched)),
                      ("hedge-vs-hedge", RunConfig(MP, hedge(), hedge(), steps=t, schedule=sched))):
        res[name] = mclt_normality(monte_carlo(cfg, 500, 0, workers), t).ks_statistic
    return CriterionResult(10, "martingale CLT, KS <= 0.1", all(v <= 0.1 for v in res.values()),
                           ", ".join(f"{k} KS {v:.4f}" for k, v in res.items()))


def change_of_measure(full=True, workers=1) -> CriterionResult:
    bad = []
    for t in (100, 400, 10 ** 4):
        for s in (0, math.floor(math.sqrt(t) / 2), math.floor(math.sqrt(t))):
            for q in (0.2, 0.5, 0.8):
                r = shift_ratio_bound_check(t, s, q, 1.0)
                if not r.holds:
                    bad.append((t, s, q, r.measured, r.bound))
    detail = f"{27 - len(bad)}/27 grid points satisfy measured >= (1+b0)^-a"
    if bad:
        t, s, q, m, b = bad[0]
        detail += f"; e.g. (t,s,q)=({t},{s},{q}) measured {m:.4f} < {b:.4f}"
    return CriterionResult(11, "change-of-measure ratio bound", not bad, detail)


def demoivre(full=True, workers=1) -> CriterionResult:
    ladder = (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6)
    c = [demoivre_ratio_certificate(t, 0.5, 2.0) for t in ladder]
    mono = all(a > b for a, b in zip(c, c[1:]))
    ok = c[1] <= 0.1 and c[3] <= 0.01 and mono
    return CriterionResult(12, "de Moivre-Laplace certificate", ok,
                           ", ".join(f"t={t:g}: {v:.3e}" for t, v in zip(ladder, c)) + f"; monotone {mono}")


def extremizer(full=True, workers=1) -> CriterionResult:
    bad = []
    n = 0
    for t in range(1, 7):
        for z in range(t + 1):
            for qb in (0.3, 0.5):
                for d in (0.1, 0.2):
                    n += 1
                    r = extremizer_oracle(t, qb, d, z)
                    if not r.three_point:
                        bad.append((t, qb, d, z, r.minimizers[0]))
    detail = f"{n - len(bad)}/{n} cases have all minimizer coordinates in {{-d, 0, d}}"
    if bad:
        t, qb, d, z, v = bad[0]
        detail += f"; e.g. t={t}, q_bar={qb}, d={d}, z={z}: minimizer {tuple(round(x, 4) for x in v)}"
    return CriterionResult(13, "extremizer oracle: three-point minimizers", not bad, detail)


def dominance(full=True, workers=1) -> CriterionResult:
    c = 1.0
    checked = violations = 0
    worst = math.inf

    def walk(bits, state):
        nonlocal checked, violations, worst
        t = len(bits) + 1
        summary = HistorySummary.from_history(bits)
        p, state = adaptive_hedge_step(state, MP, 1, summary)
        if t >= 2:
            cf = counterfactual_hedge_iterate(summary, c)
            gap = abs(p - 0.5) - abs(cf - 0.5)
            worst = min(worst, gap)
            checked += 1
            violations += gap < 0
        if t < 12:
            walk(bits + [0], state)
            walk(bits + [1], state)

    walk([], AdaptiveHedgeState(c))
    exhaustive = checked

    t = 1000
    rng = np.random.default_rng(7)
    sched = CheckpointSchedule(base=t, ratio=2.0)
    for i in range(10 ** 4):
        theta = float(rng.random())
        tr = run_vs_script(MP, adaptive_hedge(c), OpponentScript.iid(theta), t, mix_seed(1, i), sched, tail=1)
        f = tr.final
        z_prev = f.z_t - tr.tail.j[-1]
        cf = counterfactual_hedge_iterate(HistorySummary(t, z_prev), c)
        gap = abs(f.p_t - 0.5) - abs(cf - 0.5)
        worst = min(worst, gap)
        violations += gap < 0
    return CriterionResult(14, "AdaptiveHedge dominates the counterfactual iterate", violations == 0,
                           f"{exhaustive} exhaustive histories (t <= 12) + 10^4 sampled at t = 1000, "
                           f"{violations} violations, min margin {worst:.3e}")


CRITERIA = (
    ne_exactness,
    poisson_binomial_oracle,
    regret_certification,
    time_average,
    warmup_oscillation,
    both_oscillation,
    telepathic_contrast,
    sensitivity,
    stationarity,
    martingale_clt,
    change_of_measure,
    demoivre,
    extremizer,
    dominance,
)
FAST = {1, 2, 3, 9, 11, 12, 13, 14}


def run_criterion(number: int, full: bool = True, workers: int = 1) -> CriterionResult:
    return CRITERIA[number - 1](full=full, workers=workers)


def run_all(full: bool = False, workers: int = 1, report=print):
    """Run every criterion in the selected tier; slow ones are skipped (not failed) in the fast tier."""
    results = []
    for k, fn in enumerate(CRITERIA, 1):
        if not full and k not in FAST:
            report(f"criterion {k:2d} SKIP  (full tier; rerun with --full)")
            continue
        r = fn(full=full, workers=workers)
        report(r.line())
        results.append(r)
    return results
