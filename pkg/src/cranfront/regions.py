"""Constraint systems of joint, successive and generalized successive decoding.

Subsets are bitmasks (bit i = user/BS i, 0-based). Constraint lists are always
in lexicographic (T mask, S mask) order so indices are stable across runs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import _subsets as ss
from .gaussinfo import (
    cond_mutual_info,
    i_x_yhat_cond,
    i_y_yhat_all,
    joint_covariance,
    sd_fronthaul_usage,
    xs,
    yhats,
    ys,
)
from .model import (
    NetworkInstance,
    QuantizerB,
    RateFronthaulTuple,
    check_quantizer,
    full_resolution_quantizer,
)

ENUM_CAP = 6
MEMBERSHIP_TOL = 1e-9
KINDS = ("JD", "SD-rate", "SD-fronthaul", "GSD-rate", "GSD-fronthaul", "cutset")


class EnumerationCapExceeded(ValueError):
    pass


def check_caps(instance: NetworkInstance, cap: int = ENUM_CAP) -> None:
    if instance.K > cap or instance.L > cap:
        raise EnumerationCapExceeded(
            f"K={instance.K}, L={instance.L} exceeds the enumeration cap {cap}")


@dataclass(frozen=True)
class SubsetConstraint:
    """sum_{k in T} R_k <= rhs. ``raw`` keeps the unclamped value."""

    kind: str
    T: int
    S: int
    rhs: float
    raw: float
    clamped: bool = False

    def label(self) -> str:
        return f"{self.kind} T={ss.fmt(self.T)} S={ss.fmt(self.S)}"


def _constraint(kind, T, S, raw) -> SubsetConstraint:
    if raw < 0 or (math.isinf(raw) and raw < 0):
        return SubsetConstraint(kind, T, S, 0.0, raw, True)
    return SubsetConstraint(kind, T, S, raw, raw, False)


# ------------------------------------------------------------- joint decoding

def jd_rhs(instance: NetworkInstance, b: QuantizerB, T: int, S: int,
           iyy: np.ndarray | None = None) -> float:
    """Unclamped sum_{l in S}(C_l - I(Y_l;Yhat_l|X)) + I(X_T; Yhat_{S^c} | X_{T^c})."""
    if iyy is None:
        iyy = i_y_yhat_all(instance, b)
    members = ss.members(S)
    pen = sum(instance.C[l] - iyy[l] for l in members)
    if math.isinf(pen):
        return pen
    sc = ss.members(ss.complement(S, instance.L))
    return float(pen + i_x_yhat_cond(instance, b, ss.members(T), sc))


def jd_constraints(instance: NetworkInstance, b: QuantizerB,
                   cap: int = ENUM_CAP) -> list[SubsetConstraint]:
    check_caps(instance, cap)
    check_quantizer(instance, b)
    iyy = i_y_yhat_all(instance, b)
    out = []
    for T in range(1, ss.full(instance.K) + 1):
        for S in range(ss.full(instance.L) + 1):
            out.append(_constraint("JD", T, S, jd_rhs(instance, b, T, S, iyy)))
    return out


def jd_sum_rate_fixed_b(instance: NetworkInstance, b: QuantizerB,
                        cap: int = ENUM_CAP) -> float:
    """max sum rate of the JD region at fixed B: min_S rhs(K, S), clamped at 0."""
    check_caps(instance, cap)
    check_quantizer(instance, b)
    iyy = i_y_yhat_all(instance, b)
    Kall = ss.full(instance.K)
    best = min(jd_rhs(instance, b, Kall, S, iyy) for S in range(ss.full(instance.L) + 1))
    return max(0.0, float(best))


# -------------------------------------------------------- successive decoding

@dataclass(frozen=True)
class FronthaulCheck:
    S: int
    usage: float
    capacity: float

    @property
    def ok(self) -> bool:
        return self.usage <= self.capacity + MEMBERSHIP_TOL


@dataclass(frozen=True)
class SDConstraints:
    rates: list
    fronthaul: list

    @property
    def feasible(self) -> bool:
        return all(f.ok for f in self.fronthaul)


def sd_constraints(instance: NetworkInstance, b: QuantizerB,
                   cap: int = ENUM_CAP) -> SDConstraints:
    check_caps(instance, cap)
    check_quantizer(instance, b)
    allL = range(instance.L)
    rates = [_constraint("SD-rate", T, 0, i_x_yhat_cond(instance, b, ss.members(T), allL))
             for T in range(1, ss.full(instance.K) + 1)]
    fr = []
    for S in range(1, ss.full(instance.L) + 1):
        cap_s = float(sum(instance.C[l] for l in ss.members(S)))
        fr.append(FronthaulCheck(S, sd_fronthaul_usage(instance, b, ss.members(S)), cap_s))
    return SDConstraints(rates, fr)


def sd_sum_rate_fixed_b(instance: NetworkInstance, b: QuantizerB,
                        cap: int = ENUM_CAP) -> float:
    """I(X_K; Yhat_L) if B is SD-feasible for the fronthaul, otherwise 0."""
    sd = sd_constraints(instance, b, cap)
    return sd.rates[-1].rhs if sd.feasible else 0.0


# --------------------------------------------------------------- GSD orders

@dataclass(frozen=True)
class DecodingOrder:
    """Permutation of ('Q', l) quantization and ('X', k) message items."""

    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((str(t), int(i)) for t, i in self.items))

    def validate(self, K: int, L: int) -> None:
        want = {("Q", l) for l in range(L)} | {("X", k) for k in range(K)}
        if len(self.items) != K + L or set(self.items) != want:
            raise ValueError(f"not a permutation of {K} messages and {L} quantizations: {self.items}")

    def __str__(self):
        names = {"Q": "Yhat", "X": "X"}
        return ",".join(f"{names[t]}{i + 1}" for t, i in self.items)

    @classmethod
    def parse(cls, text: str) -> "DecodingOrder":
        items = []
        for tok in text.split(","):
            tok = tok.strip()
            if tok.startswith("Yhat"):
                items.append(("Q", int(tok[4:]) - 1))
            elif tok.startswith("X"):
                items.append(("X", int(tok[1:]) - 1))
            else:
                raise ValueError(f"bad order token {tok!r}")
        return cls(tuple(items))


def sd_order(K: int, L: int, user_order=None, bs_order=None) -> DecodingOrder:
    """All quantizations first, then all messages."""
    bs_order = range(L) if bs_order is None else bs_order
    user_order = range(K) if user_order is None else user_order
    return DecodingOrder(tuple(("Q", l) for l in bs_order) + tuple(("X", k) for k in user_order))


def all_orders(K: int, L: int, limit: int = 7):
    if K + L > limit:
        raise EnumerationCapExceeded(f"K+L={K + L} exceeds order enumeration limit {limit}")
    base = [("Q", l) for l in range(L)] + [("X", k) for k in range(K)]
    for p in itertools.permutations(base):
        yield DecodingOrder(p)


def gsd_rates(instance: NetworkInstance, b: QuantizerB, order: DecodingOrder,
              jc=None) -> RateFronthaulTuple:
    """Rates and fronthaul requirements of generalized successive decoding."""
    order.validate(instance.K, instance.L)
    if jc is None:
        jc = joint_covariance(instance, b, include_y=True)
    R = np.zeros(instance.K)
    C = np.zeros(instance.L)
    done_x, done_q = [], []
    for kind, i in order.items:
        if kind == "X":
            R[i] = cond_mutual_info(jc, xs([i]), yhats(done_q), xs(done_x))
            done_x.append(i)
        else:
            C[i] = cond_mutual_info(jc, ys([i]), yhats([i]), yhats(done_q) + xs(done_x))
            done_q.append(i)
    return RateFronthaulTuple(np.maximum(R, 0.0), np.maximum(C, 0.0))


# ------------------------------------------------------------------- cut-set

def cutset_constraints(instance: NetworkInstance, cap: int = ENUM_CAP) -> list[SubsetConstraint]:
    check_caps(instance, cap)
    bmax = full_resolution_quantizer(instance)
    out = []
    for T in range(1, ss.full(instance.K) + 1):
        for S in range(ss.full(instance.L) + 1):
            sc = ss.members(ss.complement(S, instance.L))
            raw = float(sum(instance.C[l] for l in ss.members(S))
                        + i_x_yhat_cond(instance, bmax, ss.members(T), sc))
            out.append(_constraint("cutset", T, S, raw))
    return out


def collapse(constraints, K: int) -> np.ndarray:
    """Tightest rhs per user subset: out[T] = min over S (index 0 unused)."""
    out = np.full(ss.full(K) + 1, np.inf)
    out[0] = 0.0
    for c in constraints:
        out[c.T] = min(out[c.T], c.rhs)
    return out


# ---------------------------------------------------------------- membership

@dataclass(frozen=True)
class MembershipResult:
    member: bool
    slack: float
    worst: SubsetConstraint | None


def membership(point, constraints, tol: float = MEMBERSHIP_TOL) -> MembershipResult:
    R = np.asarray(point.R if hasattr(point, "R") else point, dtype=float)
    worst, wslack = None, math.inf
    for c in constraints:
        s = c.rhs - float(sum(R[k] for k in ss.members(c.T)))
        if s < wslack:
            worst, wslack = c, s
    return MembershipResult(wslack >= -tol, wslack, worst)


# ------------------------------------------------------------ rate LPs

@dataclass(frozen=True)
class RateLP:
    value: float
    R: np.ndarray
    duals: np.ndarray  # one multiplier per constraint, >= 0


def max_weighted_rate(constraints, K: int, weights, raw: bool = True) -> RateLP:
    """max sum_k mu_k R_k over {R >= 0 : sum_{k in T} R_k <= rhs(T,S)} by HiGHS.

    With ``raw`` the unclamped right-hand sides are used, so a negative one
    makes the LP infeasible (value -inf).
    """
    mu = np.asarray(weights, dtype=float)
    if np.all(mu == 0):
        return RateLP(0.0, np.zeros(K), np.zeros(len(constraints)))
    A = np.zeros((len(constraints), K))
    ub = np.zeros(len(constraints))
    for i, c in enumerate(constraints):
        A[i, list(ss.members(c.T))] = 1.0
        v = c.raw if raw else c.rhs
        ub[i] = v if math.isfinite(v) else -1.0
    if np.any(ub < 0):
        return RateLP(-math.inf, np.zeros(K), np.zeros(len(constraints)))
    res = linprog(-mu, A_ub=A, b_ub=ub, bounds=[(0, None)] * K, method="highs")
    if res.status != 0:
        raise RuntimeError(f"rate LP failed: {res.message}")
    return RateLP(float(mu @ res.x), res.x, -np.asarray(res.ineqlin.marginals))


def polymatroid_greedy_max(rhs_by_T: np.ndarray, K: int, weights) -> tuple[float, np.ndarray]:
    """max mu.R over the polymatroid {sum_T R <= rhs[T]} via the greedy vertex.

    Valid when rhs is (normalized, monotone) submodular, e.g. the SD rate
    region or the collapsed JD region at fixed B.
    """
    mu = np.asarray(weights, dtype=float)
    order = sorted(range(K), key=lambda k: (-mu[k], k))
    R = np.zeros(K)
    prev, mask = 0.0, 0
    for k in order:
        mask |= 1 << k
        R[k] = rhs_by_T[mask] - prev
        prev = rhs_by_T[mask]
    return float(mu @ R), R


def k2_boundary(constraints) -> np.ndarray:
    """Corner points of a 2-user rate region, (R1, R2) with R1 increasing."""
    a = collapse(constraints, 2)
    r1, r2, r12 = a[1], a[2], a[3]
    r1c, r2c = min(r1, r12), min(r2, r12)
    pts = [(0.0, r2c), (max(r12 - r2c, 0.0), r2c), (r1c, max(r12 - r1c, 0.0)), (r1c, 0.0)]
    out = []
    for p in pts:
        if not out or abs(p[0] - out[-1][0]) > 1e-12 or abs(p[1] - out[-1][1]) > 1e-12:
            out.append(p)
    return np.array(out)
