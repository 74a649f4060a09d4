"""Constructive domination certificates for the decoding-equivalence results.

* ``theorem1_certificate``: under a sum-fronthaul budget, every joint-decoding
  extreme point (greedy vertex of the submodular f) is dominated by a
  time-sharing of at most two generalized successive decoding orders.
* ``theorem2_certificate``: every extreme point of the fronthaul polyhedron
  {C : sum_S C >= g+(S)} at the joint-decoding sum rate is dominated by a
  time-sharing of two successive decoding schemes.

The targets come from the closed-form information quantities; the achieving
tuples are evaluated independently through the joint covariance.

Fronthaul of a time-sharing mix is the weighted average of its components, so
each BS is assumed free to vary its instantaneous fronthaul rate across the
time-sharing slots as long as the average meets C_l. Per-slot rates are not
modeled.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _subsets as ss
from .gaussinfo import (
    cond_mutual_info,
    i_x_yhat_cond,
    i_y_yhat_all,
    joint_covariance,
    xs,
    yhats,
    ys,
)
from .model import NetworkInstance, QuantizerB
from .regions import DecodingOrder, check_caps, gsd_rates, jd_sum_rate_fixed_b
from .submodular import f_jd_sumfronthaul, g_fronthaul, greedy_extreme_point

CERT_TOL = 1e-7
BOUNDARY_TOL = 1e-9
DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class Component:
    weight: float
    label: str
    R: np.ndarray
    C: np.ndarray


@dataclass
class DominationCertificate:
    """target vs. a convex combination of achievable (GSD or SD) tuples.

    Sum-fronthaul certificates compare per-user rates and the sum fronthaul
    (``target_C`` has one entry); per-BS certificates compare the sum rate
    (``target_R`` has one entry) and per-BS fronthaul.
    """

    case: str
    ordering: tuple
    target_R: np.ndarray
    target_C: np.ndarray
    components: list
    mixing: float | None
    boundary: bool = False
    notes: str = ""

    def mixed(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.components:
            return np.zeros_like(self.target_R), np.zeros_like(self.target_C)
        R = sum(c.weight * c.R for c in self.components)
        C = sum(c.weight * c.C for c in self.components)
        return np.asarray(R, dtype=float), np.asarray(C, dtype=float)

    @property
    def slack(self) -> np.ndarray:
        """Nonnegative iff dominated: achieved rates minus target, target fronthaul minus used."""
        R, C = self.mixed()
        return np.concatenate([R - self.target_R, self.target_C - C])

    @property
    def min_slack(self) -> float:
        s = self.slack
        return float(s.min()) if s.size else 0.0

    def weights_ok(self, tol: float = 1e-9) -> bool:
        w = np.array([c.weight for c in self.components])
        if w.size == 0:
            return True
        return bool(np.all(w >= -tol) and abs(w.sum() - 1.0) <= tol)

    def dominates(self, tol: float = CERT_TOL) -> bool:
        return self.weights_ok() and self.min_slack >= -tol

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "ordering": [i + 1 for i in self.ordering],
            "boundary": self.boundary,
            "mixing": self.mixing,
            "target": {"R": self.target_R.tolist(), "C": self.target_C.tolist()},
            "components": [
                {"weight": c.weight, "scheme": c.label, "R": c.R.tolist(), "C": c.C.tolist()}
                for c in self.components
            ],
            "slack": self.slack.tolist(),
            "min_slack": self.min_slack,
            "notes": self.notes,
        }


def _check_ordering(ordering, n, what):
    ordering = tuple(int(i) for i in ordering)
    if sorted(ordering) != list(range(n)):
        raise ValueError(f"{what} ordering {ordering} is not a permutation of range({n})")
    return ordering


# ------------------------------------------------- sum-fronthaul domination

def _gsd_component(instance, b, jc, order_items, weight, sum_only=True) -> Component:
    order = DecodingOrder(tuple(order_items))
    t = gsd_rates(instance, b, order, jc)
    return Component(float(weight), str(order), t.R.copy(), np.array([t.C.sum()]))


def theorem1_certificate(instance: NetworkInstance, b: QuantizerB, Csum: float,
                         user_ordering=None, jc=None) -> DominationCertificate:
    """Dominate the greedy JD extreme point along ``user_ordering`` by GSD orders.

    With F_j = I(X_{i_1..i_j}; Yhat_L | X_{i_{j+1}..i_K}) and C' = Csum - sum_l I(Y_l;Yhat_l|X):

    * C' >= F_K: the order Yhat_L, X_{i_K}, ..., X_{i_1} attains the vertex.
    * otherwise j is the first index with F_j >= C' and the vertex is the mix
      theta * [X_{i_K}..X_{i_{j+1}}, Yhat_L, X_{i_j}..X_{i_1}]
      + (1 - theta) * [X_{i_K}..X_{i_j}, Yhat_L, X_{i_{j-1}}..X_{i_1}],
      theta = (C' - F_{j-1}) / (F_j - F_{j-1}).
    """
    K, L = instance.K, instance.L
    check_caps(instance)
    ordering = _check_ordering(range(K) if user_ordering is None else user_ordering, K, "user")
    iyy = i_y_yhat_all(instance, b)
    if not np.all(np.isfinite(iyy)):
        raise ValueError("theorem1_certificate needs finite I(Y;Yhat|X) terms (B < Sigma^-1)")
    if jc is None:
        jc = joint_covariance(instance, b, include_y=True)
    cprime = float(Csum - iyy.sum())
    f = f_jd_sumfronthaul(instance, b, Csum)
    target = greedy_extreme_point(f, ordering)
    targetC = np.array([float(Csum)])

    allL = range(L)
    F = [0.0]
    for j in range(1, K + 1):
        F.append(i_x_yhat_cond(instance, b, ordering[:j], allL))
    q_items = [("Q", l) for l in allL]

    def x_items(idx):
        return [("X", ordering[i]) for i in idx]

    if cprime < -BOUNDARY_TOL:
        # every JD rate tuple is infeasible: the region is empty for this budget
        return DominationCertificate("empty", ordering, target, targetC, [], None,
                                     notes="C' < 0: joint-decoding region is empty")

    def case1():
        items = q_items + x_items(range(K - 1, -1, -1))
        return DominationCertificate("A-Case1", ordering, target, targetC,
                                     [_gsd_component(instance, b, jc, items, 1.0)], None)

    def case2(j):
        # j is 1-based: users i_{j+1}..i_K inactive in order 1, i_j..i_K in order 2
        order1 = x_items(range(K - 1, j - 1, -1)) + q_items + x_items(range(j - 1, -1, -1))
        order2 = x_items(range(K - 1, j - 2, -1)) + q_items + x_items(range(j - 2, -1, -1))
        den = F[j] - F[j - 1]
        if den < DEGENERATE_TOL:
            theta, note = 0.0, "degenerate theta denominator: order 2 alone"
        else:
            theta, note = (cprime - F[j - 1]) / den, ""
        theta_c = min(max(theta, 0.0), 1.0)
        comps = [_gsd_component(instance, b, jc, order1, theta_c),
                 _gsd_component(instance, b, jc, order2, 1.0 - theta_c)]
        return DominationCertificate("A-Case2", ordering, target, targetC, comps, theta,
                                     notes=note)

    if cprime >= F[K] + BOUNDARY_TOL:
        return case1()
    j = next(j for j in range(1, K + 1) if F[j] >= cprime - BOUNDARY_TOL)
    boundary = abs(cprime - F[K]) <= BOUNDARY_TOL or any(
        abs(cprime - F[i]) <= BOUNDARY_TOL for i in range(K))
    cert = case2(j)
    if boundary:
        alts = [cert]
        if abs(cprime - F[K]) <= BOUNDARY_TOL:
            alts.append(case1())
        if j < K:
            alts.append(case2(j + 1))
        cert = max(alts, key=lambda c: c.min_slack)
        cert.boundary = True
    return cert


# ----------------------------------------------------- per-BS domination

def _sd_scheme(jc, K, active, weight, L, label) -> Component:
    """All quantizations of ``active`` (last listed decoded first), then all messages."""
    C = np.zeros(L)
    for m, l in enumerate(active):
        later = list(active[m + 1:])
        C[l] = max(cond_mutual_info(jc, ys([l]), yhats([l]), yhats(later)), 0.0)
    R = max(cond_mutual_info(jc, xs(range(K)), yhats(active)), 0.0) if active else 0.0
    return Component(float(weight), label, np.array([R]), C)


def theorem2_certificate(instance: NetworkInstance, b: QuantizerB, bs_ordering=None,
                         jc=None) -> DominationCertificate:
    """Dominate (R_JD, C~) by two successive decoding schemes, C~ the g+ greedy vertex.

    j is the first index with g({i_1..i_j}) > 0. Scheme 1 activates
    i_{j+1}..i_L and scheme 2 activates i_j..i_L, each decoding Yhat_{i_L}
    first down to the lowest active index. The mix is (1 - alpha) scheme 1 +
    alpha scheme 2 with alpha = g(chain_j) / I(Y_{i_j}; Yhat_{i_j} | Yhat_{i_{j+1}..i_L}).
    """
    K, L = instance.K, instance.L
    check_caps(instance)
    ordering = _check_ordering(range(L) if bs_ordering is None else bs_ordering, L, "BS")
    iyy = i_y_yhat_all(instance, b)
    if not np.all(np.isfinite(iyy)):
        raise ValueError("theorem2_certificate needs finite I(Y;Yhat|X) terms (B < Sigma^-1)")
    if jc is None:
        jc = joint_covariance(instance, b, include_y=True)
    R_jd = jd_sum_rate_fixed_b(instance, b)
    g, gplus = g_fronthaul(instance, b, R_jd)
    ctilde = greedy_extreme_point(gplus, ordering)
    target_R = np.array([R_jd])

    chain = [g(ss.to_mask(ordering[:m])) for m in range(L + 1)]
    j = next((m for m in range(1, L + 1) if chain[m] > 0), None)
    if j is None:
        comp = _sd_scheme(jc, K, (), 1.0, L, "SD active={}")
        return DominationCertificate("C-degenerate", ordering, target_R, ctilde, [comp], None,
                                     notes="g <= 0 on the whole chain: no active BS needed")
    active1 = tuple(ordering[j:])
    active2 = tuple(ordering[j - 1:])
    lab1 = "SD active=" + ss.fmt(ss.to_mask(active1))
    lab2 = "SD active=" + ss.fmt(ss.to_mask(active2))
    lj = ordering[j - 1]
    den = cond_mutual_info(jc, ys([lj]), yhats([lj]), yhats(active1))
    if den < DEGENERATE_TOL:
        comp = _sd_scheme(jc, K, active2, 1.0, L, lab2)
        return DominationCertificate("C", ordering, target_R, ctilde, [comp], 1.0,
                                     notes="degenerate alpha denominator: scheme 2 alone")
    alpha = chain[j] / den
    alpha_c = min(max(alpha, 0.0), 1.0)
    comps = [_sd_scheme(jc, K, active1, 1.0 - alpha_c, L, lab1),
             _sd_scheme(jc, K, active2, alpha_c, L, lab2)]
    return DominationCertificate("C", ordering, target_R, ctilde, comps, alpha)


def sd_timesharing_sum_rate(instance: NetworkInstance, b: QuantizerB, jc=None) -> float:
    """max sum rate over time-sharing of SD schemes (active BS subset + order) within C.

    Each scheme keeps the quantizers of B on its active BSs and switches the
    others off; the LP picks weights with mixed fronthaul <= C componentwise.
    """
    K, L = instance.K, instance.L
    if jc is None:
        jc = joint_covariance(instance, b, include_y=True)
    comps = []
    for r in range(L + 1):
        for sub in itertools.combinations(range(L), r):
            for perm in itertools.permutations(sub):
                comps.append(_sd_scheme(jc, K, perm, 1.0, L, ""))
    n = len(comps)
    c = -np.array([cp.R[0] for cp in comps])
    A_ub = np.array([cp.C for cp in comps]).T
    res = linprog(c, A_ub=A_ub, b_ub=np.asarray(instance.C, dtype=float),
                  A_eq=np.ones((1, n)), b_eq=[1.0], bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"SD time-sharing LP failed: {res.message}")
    return float(-res.fun)


# ------------------------------------------------------------------ campaigns

@dataclass
class CampaignReport:
    theorem: str
    runs: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    cases: Counter = field(default_factory=Counter)
    mixing: list = field(default_factory=list)
    mixing_out_of_range: int = 0
    worst: dict | None = None

    def add(self, cert: DominationCertificate, tag: str, tol: float = CERT_TOL):
        self.runs += 1
        self.cases[cert.case] += 1
        s = cert.min_slack
        if s < self.worst_slack:
            self.worst_slack = s
            self.worst = {"run": tag, **cert.to_dict()}
        if not cert.dominates(tol):
            self.violations += 1
        if cert.mixing is not None and cert.case in ("A-Case2", "C") and not cert.notes:
            self.mixing.append(float(cert.mixing))
            if not (-1e-9 <= cert.mixing <= 1 + 1e-9):
                self.mixing_out_of_range += 1
                self.violations += 1

    def to_dict(self) -> dict:
        m = np.array(self.mixing)
        hist = np.histogram(np.clip(m, 0, 1), bins=10, range=(0, 1))[0].tolist() if m.size else []
        return {
            "theorem": self.theorem,
            "runs": self.runs,
            "violations": self.violations,
            "worst_slack": None if math.isinf(self.worst_slack) else self.worst_slack,
            "cases": dict(sorted(self.cases.items())),
            "mixing": {
                "count": int(m.size),
                "min": float(m.min()) if m.size else None,
                "max": float(m.max()) if m.size else None,
                "histogram_0_1_10bins": hist,
                "out_of_range": self.mixing_out_of_range,
            },
            "worst": self.worst,
        }


def csum_grid(instance: NetworkInstance, b: QuantizerB, points: int = 5) -> list[float]:
    """Sum-fronthaul budgets spanning case 2 (C' in [0, F_K)) and case 1 (C' > F_K)."""
    base = float(np.sum(i_y_yhat_all(instance, b)))
    fk = i_x_yhat_cond(instance, b, range(instance.K), range(instance.L))
    fracs = np.linspace(0.1, 0.9, max(points - 1, 1)).tolist() + [1.5]
    return [base + fr * fk for fr in fracs[:points]]


def theorem1_campaign(pairs, csum_points: int = 5, tol: float = CERT_TOL) -> CampaignReport:
    """``pairs``: iterable of (instance, quantizer). Runs every user ordering and budget."""
    rep = CampaignReport("theorem1")
    for n, (inst, b) in enumerate(pairs):
        jc = joint_covariance(inst, b, include_y=True)
        for Csum in csum_grid(inst, b, csum_points):
            for perm in itertools.permutations(range(inst.K)):
                cert = theorem1_certificate(inst, b, Csum, perm, jc)
                rep.add(cert, f"pair={n} Csum={Csum:.6f} ordering={[p + 1 for p in perm]}", tol)
    return rep


def theorem2_campaign(pairs, tol: float = CERT_TOL) -> CampaignReport:
    rep = CampaignReport("theorem2")
    for n, (inst, b) in enumerate(pairs):
        jc = joint_covariance(inst, b, include_y=True)
        for perm in itertools.permutations(range(inst.L)):
            cert = theorem2_certificate(inst, b, perm, jc)
            rep.add(cert, f"pair={n} ordering={[p + 1 for p in perm]}", tol)
    return rep
