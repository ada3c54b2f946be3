"""Jitted inner loops shared by the strategy maps and the dynamics runners.

Strategies are packed into flat float64 parameter vectors (``P_*`` offsets),
per-player evolving state into float64 vectors (``S_*`` offsets) plus a ring
buffer of recent opponent observations, and run-wide accumulators into a
global vector (``G_*`` offsets). All loops are sequential in t.
"""

import math

import numpy as np
from numba import njit

LN2 = math.log(2.0)
LMAX = 16

FAM_FIXED, FAM_HEDGE, FAM_LOGBARRIER, FAM_ADAHEDGE = 0, 1, 2, 3

P_FAMILY, P_REXP, P_FIXEDQ, P_CFLOOR, P_ELL, P_A0, P_A1, P_INIT, P_W0 = 0, 1, 2, 3, 4, 5, 6, 7, 8
NPAR = P_W0 + LMAX

S_OPP, S_OPP_C, S_RPOS, S_RCOUNT, S_V, S_B, S_OWNP, S_OWNP_C, S_ONES, S_ETA, S_FLOOR_BAD = range(11)
NSTATE = 11

(G_T, G_N00, G_N01, G_N10, G_N11, G_NBHD, G_SIG2, G_SIG2_C, G_SIG1, G_SIG1_C,
 G_EPAY1, G_EPAY1_C, G_EPAY2, G_EPAY2_C, G_LAST_I) = range(15)
NGLOBAL = 15

SCRIPT_NONE, SCRIPT_IID, SCRIPT_PIECEWISE, SCRIPT_ANTI_PREVIOUS = 0, 1, 2, 3

REC_FIELDS = (
    "t", "p", "q", "p_hat", "q_hat", "p_bar", "q_bar", "n00", "n01", "n10", "n11",
    "z", "nbhd", "sig2_q", "sig2_p", "epay1", "epay2", "eta1", "eta2",
)
NREC = len(REC_FIELDS)


@njit(cache=True)
def logistic(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@njit(cache=True)
def advantage(a0, a1, stat):
    s = clamp01(stat)
    return a0 * (1.0 - s) + a1 * s


@njit(cache=True)
def hedge_prob(a0, a1, t, stat, eta):
    if t <= 1:
        return 0.5
    return logistic(eta * (t - 1) * advantage(a0, a1, stat))


@njit(cache=True)
def log_barrier_from_d(d):
    # interior root of d p^2 + (2 - d) p - 1 = 0, evaluated without cancellation
    if d <= 0.0:
        return 2.0 / ((2.0 - d) + math.sqrt(d * d + 4.0))
    return 1.0 - 2.0 / ((2.0 + d) + math.sqrt(d * d + 4.0))


@njit(cache=True)
def log_barrier_prob(a0, a1, t, stat, eta):
    if t <= 1:
        return 0.5
    return log_barrier_from_d(eta * (t - 1) * advantage(a0, a1, stat))


@njit(cache=True)
def kahan_add(st, i, ic, x):
    y = x - st[ic]
    s = st[i] + y
    st[ic] = (s - st[i]) - y
    st[i] = s


@njit(cache=True)
def biased_statistic(par, st, ring, t):
    ell = int(par[P_ELL])
    total = st[S_OPP]
    n = int(st[S_RCOUNT])
    pos = int(st[S_RPOS])
    for j in range(min(ell, n)):
        # ring[pos - 1] is the newest observation
        total += par[P_W0 + j] * ring[(pos - 1 - j) % LMAX]
    return total / (t - 1)


@njit(cache=True)
def adaptive_eta(par, st, t):
    proposed = math.sqrt(LN2 / st[S_B])
    floor = par[P_CFLOOR] / math.sqrt(t)
    return proposed if proposed > floor else floor


@njit(cache=True)
def strategy_prob(par, st, ring, t):
    fam = int(par[P_FAMILY])
    if fam == FAM_FIXED:
        st[S_ETA] = 0.0
        return par[P_FIXEDQ]
    if fam == FAM_ADAHEDGE:
        eta = adaptive_eta(par, st, t)
        if eta < par[P_CFLOOR] / math.sqrt(t):
            st[S_FLOOR_BAD] += 1.0
    else:
        eta = t ** (-par[P_REXP])
    st[S_ETA] = eta
    if t <= 1:
        return par[P_INIT]
    stat = biased_statistic(par, st, ring, t)
    if fam == FAM_LOGBARRIER:
        return log_barrier_prob(par[P_A0], par[P_A1], t, stat, eta)
    return hedge_prob(par[P_A0], par[P_A1], t, stat, eta)


@njit(cache=True)
def update_player(par, st, ring, own_prob, own_real, obs):
    kahan_add(st, S_OPP, S_OPP_C, obs)
    pos = int(st[S_RPOS])
    ring[pos] = obs
    st[S_RPOS] = (pos + 1) % LMAX
    if st[S_RCOUNT] < LMAX:
        st[S_RCOUNT] += 1.0
    kahan_add(st, S_OWNP, S_OWNP_C, own_prob)
    st[S_ONES] += own_real
    if int(par[P_FAMILY]) == FAM_ADAHEDGE:
        d = advantage(par[P_A0], par[P_A1], obs)
        st[S_V] += own_prob * (1.0 - own_prob) * d * d
        while st[S_V] > st[S_B]:
            st[S_B] *= 2.0


@njit(cache=True)
def script_prob(script, t, last_i):
    kind = int(script[0])
    if kind == SCRIPT_IID:
        return script[1]
    if kind == SCRIPT_PIECEWISE:
        if t <= script[2] - script[3]:
            return script[1]
        return script[4]
    # anti-previous: opposite of player 1's previous realization
    if t <= 1:
        return 0.5
    return 1.0 - last_i


@njit(cache=True)
def bilinear(pay, off, p, q):
    return ((1 - p) * (1 - q) * pay[off] + (1 - p) * q * pay[off + 1]
            + p * (1 - q) * pay[off + 2] + p * q * pay[off + 3])


@njit(cache=True)
def advance(n, par1, par2, script, st1, ring1, st2, ring2, gs, u1, u2,
            telepathic, pay, nb_lo, nb_hi, ckpts, ck_idx, rec,
            tail_start, tail_p, tail_q, tail_i, tail_j):
    """Play ``n`` further steps, continuing from the state in the arrays."""
    scripted = int(script[0]) != SCRIPT_NONE
    for k in range(n):
        t = int(gs[G_T]) + 1
        p = strategy_prob(par1, st1, ring1, t)
        if scripted:
            q = script_prob(script, t, gs[G_LAST_I])
            st2[S_ETA] = 0.0
        else:
            q = strategy_prob(par2, st2, ring2, t)
        if telepathic:
            update_player(par1, st1, ring1, p, p, q)
            update_player(par2, st2, ring2, q, q, p)
            i_bit = -1
            j_bit = -1
        else:
            i_bit = 1 if u1[k] < p else 0
            j_bit = 1 if u2[k] < q else 0
            update_player(par1, st1, ring1, p, float(i_bit), float(j_bit))
            update_player(par2, st2, ring2, q, float(j_bit), float(i_bit))
            gs[G_N00 + 2 * i_bit + j_bit] += 1.0
            gs[G_LAST_I] = i_bit
        kahan_add(gs, G_SIG2, G_SIG2_C, q * (1.0 - q))
        kahan_add(gs, G_SIG1, G_SIG1_C, p * (1.0 - p))
        kahan_add(gs, G_EPAY1, G_EPAY1_C, bilinear(pay, 0, p, q))
        kahan_add(gs, G_EPAY2, G_EPAY2_C, bilinear(pay, 4, p, q))
        if nb_lo <= q <= nb_hi:
            gs[G_NBHD] += 1.0
        gs[G_T] = t
        if t >= tail_start:
            w = t - tail_start
            tail_p[w] = p
            tail_q[w] = q
            tail_i[w] = i_bit
            tail_j[w] = j_bit
        ci = ck_idx[0]
        if ci < ckpts.shape[0] and ckpts[ci] == t:
            r = rec[ci]
            r[0] = t
            r[1] = p
            r[2] = q
            r[3] = st1[S_ONES] / t
            r[4] = st2[S_ONES] / t
            r[5] = st1[S_OWNP] / t
            r[6] = st2[S_OWNP] / t
            r[7] = gs[G_N00]
            r[8] = gs[G_N01]
            r[9] = gs[G_N10]
            r[10] = gs[G_N11]
            r[11] = st2[S_ONES]
            r[12] = gs[G_NBHD]
            r[13] = gs[G_SIG2]
            r[14] = gs[G_SIG1]
            r[15] = gs[G_EPAY1]
            r[16] = gs[G_EPAY2]
            r[17] = st1[S_ETA]
            r[18] = st2[S_ETA]
            ck_idx[0] = ci + 1
