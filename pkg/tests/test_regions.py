import itertools
import math

import numpy as np
import pytest
from hypothesis import given

from cranfront import _subsets as ss
from cranfront.model import (
    background_quantizer,
    q_from_b,
    random_instance,
    scalar_unit,
    zero_quantizer,
)
from cranfront.regions import (
    DecodingOrder,
    EnumerationCapExceeded,
    all_orders,
    check_caps,
    collapse,
    cutset_constraints,
    gsd_rates,
    jd_constraints,
    jd_sum_rate_fixed_b,
    k2_boundary,
    max_weighted_rate,
    membership,
    polymatroid_greedy_max,
    sd_constraints,
    sd_order,
)
from cranfront.submodular import SetFunction, greedy_extreme_point

from conftest import dims, make_pair, seeds, snrs

LOG2_15 = math.log2(1.5)


def q_joint(inst, b):
    """Covariance of (X_1..X_K, Y_1..Y_L, Yhat_1..Yhat_L) assembled directly from Q."""
    K, L, M, N = inst.K, inst.L, inst.M, inst.N
    Kx = np.zeros((K * M, K * M), dtype=complex)
    for k in range(K):
        Kx[k * M:(k + 1) * M, k * M:(k + 1) * M] = inst.Kx[k]
    H = np.block([[inst.H[l, k] for k in range(K)] for l in range(L)])
    Sig = np.zeros((L * N, L * N), dtype=complex)
    Q = np.zeros_like(Sig)
    for l in range(L):
        s = slice(l * N, (l + 1) * N)
        Sig[s, s] = inst.Sigma[l]
        Q[s, s] = q_from_b(b.B[l], inst.Sigma[l])
    yy = H @ Kx @ H.conj().T + Sig
    xy = Kx @ H.conj().T
    cov = np.block([[Kx, xy, xy], [xy.conj().T, yy, yy], [xy.conj().T, yy, yy + Q]])
    idx = {}
    for k in range(K):
        idx[("X", k)] = list(range(k * M, (k + 1) * M))
    for l in range(L):
        idx[("Y", l)] = list(range(K * M + l * N, K * M + (l + 1) * N))
        idx[("Q", l)] = list(range(K * M + L * N + l * N, K * M + L * N + (l + 1) * N))
    return cov, idx


def q_mi(cov, idx, A, B, C=()):
    """I(A;B|C) = h(A|C) + h(B|C) - h(A,B|C) - h(C-free) via log-dets of Schur complements."""
    def h(keys, given):
        a = sum((idx[k] for k in keys), [])
        if not a:
            return 0.0
        c = sum((idx[k] for k in given), [])
        m = cov[np.ix_(a, a)]
        if c:
            m = m - cov[np.ix_(a, c)] @ np.linalg.solve(cov[np.ix_(c, c)], cov[np.ix_(c, a)])
        return np.linalg.slogdet(m)[1] / math.log(2)
    return h(A, C) + h(B, C) - h(list(A) + list(B), C)


# ---------------------------------------------------------------- JD / SD

def test_scalar_jd_constraints(unit):
    cons = jd_constraints(unit, background_quantizer(unit))
    assert [(c.T, c.S) for c in cons] == [(1, 0), (1, 1)]
    assert abs(cons[0].rhs - LOG2_15) < 1e-12
    assert abs(cons[1].rhs - 1.0) < 1e-12


def test_zero_quantizer_jd_constraints_without_fronthaul_cut_are_zero():
    inst = random_instance(1, 2, 2, 1, 1, 10.0)
    for c in jd_constraints(inst, zero_quantizer(inst)):
        if c.S == 0:
            assert c.rhs == 0.0


def test_jd_constraint_count():
    inst = random_instance(1, 2, 1, 1, 1, 10.0)
    assert len(jd_constraints(inst, background_quantizer(inst))) == 6


def test_negative_rhs_is_clamped_and_flagged():
    inst = scalar_unit(0.5)
    c = jd_constraints(inst, background_quantizer(inst))[1]
    assert c.clamped and c.rhs == 0.0 and abs(c.raw + 0.5) < 1e-12


def test_scalar_sd_constraints(unit):
    sd = sd_constraints(unit, background_quantizer(unit))
    assert abs(sd.rates[0].rhs - LOG2_15) < 1e-12
    assert abs(sd.fronthaul[0].usage - math.log2(3)) < 1e-12
    assert sd.feasible
    tight = scalar_unit(1.0)
    assert not sd_constraints(tight, background_quantizer(tight)).feasible


def test_zero_quantizer_sd():
    inst = random_instance(2, 2, 2, 1, 1, 10.0)
    sd = sd_constraints(inst, zero_quantizer(inst))
    assert sd.feasible
    assert all(f.usage == 0.0 for f in sd.fronthaul)
    assert all(c.rhs == 0.0 for c in sd.rates)


def test_scalar_jd_sum_rate(unit):
    assert abs(jd_sum_rate_fixed_b(unit, background_quantizer(unit)) - LOG2_15) < 1e-12
    assert jd_sum_rate_fixed_b(scalar_unit(0.0), background_quantizer(unit)) == 0.0
    assert abs(jd_sum_rate_fixed_b(scalar_unit(1e6), background_quantizer(unit)) - LOG2_15) < 1e-12


# -------------------------------------------------------------------- GSD

def test_two_user_interleaved_order_matches_q_oracle():
    inst, b = make_pair(11, 2, 2, 1, 2)
    cov, idx = q_joint(inst, b)
    order = DecodingOrder.parse("Yhat1,X1,Yhat2,X2")
    t = gsd_rates(inst, b, order)
    want_R1 = q_mi(cov, idx, [("X", 0)], [("Q", 0)])
    want_R2 = q_mi(cov, idx, [("X", 1)], [("Q", 0), ("Q", 1)], [("X", 0)])
    want_C1 = q_mi(cov, idx, [("Y", 0)], [("Q", 0)])
    want_C2 = q_mi(cov, idx, [("Y", 1)], [("Q", 1)], [("Q", 0), ("X", 0)])
    assert np.allclose(t.R, [want_R1, want_R2], atol=1e-8)
    assert np.allclose(t.C, [want_C1, want_C2], atol=1e-8)


def test_messages_first_gives_zero_rates():
    inst, b = make_pair(3, 2, 2, 1, 1)
    order = DecodingOrder((("X", 0), ("X", 1), ("Q", 0), ("Q", 1)))
    assert np.all(gsd_rates(inst, b, order).R == 0.0)


@given(seeds, dims, snrs)
def test_sd_order_hits_sd_corner(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    K, L = inst.K, inst.L
    order = sd_order(K, L, user_order=range(K - 1, -1, -1), bs_order=range(L - 1, -1, -1))
    t = gsd_rates(inst, b, order)
    sd = sd_constraints(inst, b)
    rhs = collapse(sd.rates, K)
    # X_K first, X_1 last: greedy vertex along ordering 1..K
    f = SetFunction(K, lambda T: rhs[T])
    assert np.allclose(t.R, greedy_extreme_point(f, range(K)), atol=1e-8)
    assert abs(t.C.sum() - sd.fronthaul[-1].usage) < 1e-8


def test_order_parse_roundtrip_and_validation():
    o = DecodingOrder.parse("Yhat2,X1,Yhat1")
    assert str(o) == "Yhat2,X1,Yhat1"
    o.validate(1, 2)
    with pytest.raises(ValueError):
        o.validate(2, 2)
    with pytest.raises(ValueError):
        DecodingOrder.parse("Z1")


def test_all_orders_count_and_cap():
    assert len(list(all_orders(2, 2))) == math.factorial(4)
    with pytest.raises(EnumerationCapExceeded):
        list(all_orders(4, 4))


def test_caps():
    with pytest.raises(EnumerationCapExceeded):
        check_caps(random_instance(0, 7, 1, 1, 1, 0.0))


# ---------------------------------------------------------------- cut-set

def test_scalar_cutset(unit):
    cons = cutset_constraints(unit)
    assert abs(cons[0].rhs - 1.0) < 1e-12 and abs(cons[1].rhs - 2.0) < 1e-12


def test_cutset_zero_fronthaul_and_no_power():
    inst = random_instance(4, 2, 2, 1, 1, 10.0, fronthaul=0.0)
    full = ss.full(2)
    assert all(c.rhs < 1e-12 for c in cutset_constraints(inst) if c.S == full)
    quiet = inst.replace(Kx=np.zeros_like(inst.Kx), P=np.zeros(2))
    assert all(c.rhs < 1e-12 for c in cutset_constraints(quiet) if c.S == 0)


@given(seeds, dims, snrs)
def test_jd_region_inside_cutset(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    jd = collapse(jd_constraints(inst, b), inst.K)
    cut = collapse(cutset_constraints(inst), inst.K)
    assert np.all(jd[1:] <= cut[1:] + 1e-9)


# ------------------------------------------------------------- membership

def test_origin_is_member(unit):
    assert membership(np.zeros(1), jd_constraints(unit, background_quantizer(unit))).member


def test_violation_reports_cut():
    inst, b = make_pair(5, 2, 2, 1, 1)
    cons = jd_constraints(inst, b)
    c0 = next(c for c in cons if c.T == 3 and c.S == 0)
    # push the sum rate 0.1 beyond the (K, empty) cut; split by the individual bounds
    R = np.array([c0.rhs + 0.1, 0.0])
    res = membership(R, [c0])
    assert not res.member and abs(res.slack + 0.1) < 1e-12 and res.worst is c0


@given(seeds, dims, snrs)
def test_greedy_vertex_of_sd_region_is_member(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    sd = sd_constraints(inst, b)
    rhs = collapse(sd.rates, inst.K)
    v = greedy_extreme_point(SetFunction(inst.K, lambda T: rhs[T]), range(inst.K))
    res = membership(v, sd.rates)
    assert res.member and res.slack <= 1e-9


# -------------------------------------------------------------------- LPs

def _brute_force_lp(cons, K, mu):
    """Best vertex of {R >= 0, R(T) <= rhs} by enumerating K-subsets of tight rows."""
    rows = [(np.array([1.0 if k in ss.members(c.T) else 0.0 for k in range(K)]), c.rhs) for c in cons]
    rows += [(-np.eye(K)[k], 0.0) for k in range(K)]
    best = -np.inf
    for sub in itertools.combinations(rows, K):
        A = np.array([r[0] for r in sub])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, np.array([r[1] for r in sub]))
        if all(a @ x <= r + 1e-9 for a, r in rows):
            best = max(best, float(mu @ x))
    return best


@given(seeds, dims, snrs)
def test_rate_lp_matches_vertex_enumeration(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    mu = np.random.default_rng(seed).uniform(0, 2, inst.K)
    cons = jd_constraints(inst, b)
    lp = max_weighted_rate(cons, inst.K, mu, raw=False)
    assert abs(lp.value - _brute_force_lp(cons, inst.K, mu)) < 1e-7
    assert np.all(lp.duals >= -1e-9)


@given(seeds, dims, snrs)
def test_greedy_solves_polymatroid_lp(seed, d, snr):
    inst, b = make_pair(seed, *d, snr)
    mu = np.random.default_rng(seed).uniform(0, 2, inst.K)
    sd = sd_constraints(inst, b)
    val, _ = polymatroid_greedy_max(collapse(sd.rates, inst.K), inst.K, mu)
    assert abs(val - max_weighted_rate(sd.rates, inst.K, mu).value) < 1e-7


def test_zero_weights_give_zero(unit):
    assert max_weighted_rate(jd_constraints(unit, background_quantizer(unit)), 1, [0.0]).value == 0.0


def test_k2_boundary_monotone():
    inst, b = make_pair(6, 2, 2, 1, 1, background=True)
    pts = k2_boundary(jd_constraints(inst, b))
    assert np.all(np.diff(pts[:, 0]) >= 0) and np.all(np.diff(pts[:, 1]) <= 1e-12)
    assert pts[0, 0] == 0.0 and pts[-1, 1] == 0.0
