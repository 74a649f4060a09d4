"""Cut-set outer bound and constant-gap certificates.

The achievable side always uses the background-noise quantizer B = 1/2 Sigma^{-1}
(quantization noise at the level of the receiver noise). For every cut the
fronthaul penalty is then exactly N bits per BS and the air-interface loss is at
most M bits per user, which gives the per-cut bound (|S|/|T|) N + M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _subsets as ss
from .gaussinfo import i_x_yhat_cond, i_y_yhat_all
from .model import NetworkInstance, background_quantizer, full_resolution_quantizer
from .regions import (
    MEMBERSHIP_TOL,
    check_caps,
    cutset_constraints,
    jd_constraints,
    jd_sum_rate_fixed_b,
    max_weighted_rate,
    membership,
)
from .submodular import f_jd_sumfronthaul, polyhedron_slacks

GAP_TOL = 1e-9


@dataclass(frozen=True)
class CutGap:
    T: int
    S: int | None
    gap: float  # per user, bits per complex dimension
    bound: float  # per-cut bound for this (T, S)

    @property
    def ok(self) -> bool:
        return self.gap <= self.bound + GAP_TOL


@dataclass
class GapCertificate:
    kind: str
    eta: float
    cuts: list = field(default_factory=list)
    achievable: list = field(default_factory=list)  # points checked for membership
    membership_ok: bool = True
    notes: list = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max((c.gap for c in self.cuts), default=0.0)

    @property
    def per_cut_ok(self) -> bool:
        return all(c.ok for c in self.cuts)

    @property
    def passed(self) -> bool:
        return self.per_cut_ok and self.worst <= self.eta + GAP_TOL and self.membership_ok

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eta": self.eta,
            "worst_gap": self.worst,
            "per_cut_ok": self.per_cut_ok,
            "membership_ok": self.membership_ok,
            "passed": self.passed,
            "cuts": [{"T": ss.fmt(c.T), "S": None if c.S is None else ss.fmt(c.S),
                      "gap": c.gap, "bound": c.bound} for c in self.cuts],
            "notes": list(self.notes),
        }

    def csv_rows(self) -> list:
        head = ["T", "S", "gap_bits_per_user_per_complex_dim", "bound_bits_per_user_per_complex_dim", "ok"]
        rows = [[ss.fmt(c.T), "" if c.S is None else ss.fmt(c.S), f"{c.gap:.12g}",
                 f"{c.bound:.12g}", int(c.ok)] for c in self.cuts]
        return [head] + rows


def _directions(K: int):
    for T in range(1, ss.full(K) + 1):
        mu = np.zeros(K)
        mu[list(ss.members(T))] = 1.0
        yield T, mu


def _shift_down(R, eta: float) -> np.ndarray:
    return np.maximum(np.asarray(R, dtype=float) - eta, 0.0)


# ---------------------------------------------------------- joint decoding

def jd_gap_certificate(instance: NetworkInstance) -> GapCertificate:
    """Per-cut gap between the cut-set bound and JD at B = 1/2 Sigma^{-1}.

    gap(T, S) = [sum_{l in S} I(Y_l;Yhat_l|X) + I_full(T, S^c) - I(T, S^c)] / |T|,
    the fronthaul capacities cancel. Also checks that every vertex of the
    cut-set region in the 0/1 directions, lowered by eta per user, lies in the
    JD region.
    """
    check_caps(instance)
    K, L, M, N = instance.K, instance.L, instance.M, instance.N
    bh = background_quantizer(instance)
    bmax = full_resolution_quantizer(instance)
    iyy = i_y_yhat_all(instance, bh)
    cert = GapCertificate("jd", float(N * L + M))
    for T in range(1, ss.full(K) + 1):
        users = ss.members(T)
        nT = len(users)
        for S in range(ss.full(L) + 1):
            sc = ss.members(ss.complement(S, L))
            diff = (float(sum(iyy[l] for l in ss.members(S)))
                    + i_x_yhat_cond(instance, bmax, users, sc)
                    - i_x_yhat_cond(instance, bh, users, sc))
            cert.cuts.append(CutGap(T, S, diff / nT, ss.popcount(S) * N / nT + M))
    outer = cutset_constraints(instance)
    inner = jd_constraints(instance, bh)
    for _, mu in _directions(K):
        lp = max_weighted_rate(outer, K, mu)
        R = _shift_down(lp.R, cert.eta)
        cert.achievable.append(R)
        if not membership(R, inner, MEMBERSHIP_TOL).member:
            cert.membership_ok = False
    return cert


# ------------------------------------------------ successive decoding sum rate

def sd_sum_gap_certificate(instance: NetworkInstance) -> GapCertificate:
    """Cut-set sum-rate bound minus the SD sum rate at B = 1/2 Sigma^{-1}; bound NL + MK."""
    check_caps(instance)
    K, L, M, N = instance.K, instance.L, instance.M, instance.N
    bh = background_quantizer(instance)
    ach = jd_sum_rate_fixed_b(instance, bh)
    Kall = ss.full(K)
    bound = min(c.rhs for c in cutset_constraints(instance) if c.T == Kall)
    eta = float(N * L + M * K)
    cert = GapCertificate("sd-sum", eta)
    cert.cuts.append(CutGap(Kall, None, float(bound - ach), eta))
    cert.achievable.append(np.array([ach]))
    cert.membership_ok = ach >= 0.0 and ach <= bound + GAP_TOL
    return cert


# ------------------------------------------------------ sum-fronthaul budget

def cutset_sumfronthaul_lp(instance: NetworkInstance, mu, Csum: float) -> tuple[float, np.ndarray]:
    """max mu.R over the union of cut-set regions with sum_l C_l <= Csum."""
    K, L = instance.K, instance.L
    bmax = full_resolution_quantizer(instance)
    rows, ub = [], []
    for T in range(1, ss.full(K) + 1):
        for S in range(ss.full(L) + 1):
            row = np.zeros(K + L)
            row[list(ss.members(T))] = 1.0
            row[[K + l for l in ss.members(S)]] = -1.0
            rows.append(row)
            ub.append(i_x_yhat_cond(instance, bmax, ss.members(T), ss.members(ss.complement(S, L))))
    rows.append(np.concatenate([np.zeros(K), np.ones(L)]))
    ub.append(Csum)
    c = -np.concatenate([np.asarray(mu, dtype=float), np.zeros(L)])
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(ub), bounds=[(0, None)] * (K + L),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"cut-set LP failed: {res.message}")
    return float(-res.fun), res.x[:K]


def gsd_sumfronthaul_gap_certificate(instance: NetworkInstance, Csum: float) -> GapCertificate:
    """Support-function gap in every 0/1 direction under a sum-fronthaul budget.

    The achievable region at B = 1/2 Sigma^{-1} is the polyhedron of the
    submodular f(T) = min{Csum - sum_l I(Y_l;Yhat_l|X), I(X_T;Yhat_L|X_{T^c})},
    which GSD achieves; when Csum is below the quantization cost the region
    collapses to R = 0 (B = 0 is always available). The gap per direction
    1_T is divided by |T|.
    """
    if not (Csum >= 0 and math.isfinite(Csum)):
        raise ValueError(f"Csum must be finite and >= 0, got {Csum}")
    check_caps(instance)
    K, L, M, N = instance.K, instance.L, instance.M, instance.N
    bh = background_quantizer(instance)
    f = f_jd_sumfronthaul(instance, bh, Csum)
    empty = f(0) < 0
    cert = GapCertificate("gsd-sumfronthaul", float(N * L + M))
    if empty:
        cert.notes.append("sum fronthaul below the quantization cost; achievable side is R = 0")
    for T, mu in _directions(K):
        outer, R = cutset_sumfronthaul_lp(instance, mu, Csum)
        # f is monotone, so max of R(T) over its polyhedron is f(T)
        inner = 0.0 if empty else f(T)
        nT = ss.popcount(T)
        cert.cuts.append(CutGap(T, None, (outer - inner) / nT + 0.0, cert.eta))
        Rd = _shift_down(R, cert.eta)
        cert.achievable.append(Rd)
        if empty:
            ok = bool(np.all(Rd <= GAP_TOL))
        else:
            ok = polyhedron_slacks(f, Rd).min_slack >= -MEMBERSHIP_TOL
        cert.membership_ok = cert.membership_ok and ok
    return cert
