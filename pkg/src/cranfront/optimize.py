"""Quantizer optimization over the Loewner box 0 <= B_l <= Sigma_l^{-1}.

All programs are concave maximizations in the whitened variables
B~_l = Sigma_l^{1/2} B_l Sigma_l^{1/2} (box 0 <= B~_l <= I) because every
constraint is affine in the auxiliary variables plus a sum of log-dets that
are affine in B~:

    rhs(T, S) = sum_{l in S} [C_l + log2 det(I - B~_l)]
                + log2 det(I + sum_{l not in S} G_{l,T}^H B~_l G_{l,T}),
    G_{l,T} = Sigma_l^{-1/2} H_{l,T} K_T^{1/2}.

Two solvers are provided:

* ``method="barrier"`` (default): log-barrier interior point with damped
  Newton steps on a Hermitian-basis parameterization of B~.
* ``method="supergradient"``: projected supergradient ascent on the value
  function of B (a / sqrt(t) or Polyak steps, iterate averaging); the rate LP
  at each iterate is solved exactly and its duals weight the constraint gradients.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _subsets as ss
from ._linalg import LN2, hermitian_basis, hermitize
from .gaussinfo import i_x_yhat_cond, i_y_yhat_all
from .model import (
    NetworkInstance,
    QuantizerB,
    full_resolution_quantizer,
    unwhiten,
    whitened,
    zero_quantizer,
)
from .regions import (
    check_caps,
    jd_constraints,
    jd_rhs,
    jd_sum_rate_fixed_b,
    max_weighted_rate,
)

OBJECTIVES = ("jd-weighted", "sd-sum", "sd-sum-sumfronthaul", "rate-fronthaul-tradeoff")
PROJ_EPS = 1e-9
MAX_ITERS = 20_000
CAPABILITY_TOL = 1e-12


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Objective:
    kind: str
    weights: tuple | None = None   # mu, one per user
    Csum: float | None = None      # sum-fronthaul budget
    nu: tuple | None = None        # fronthaul prices, one per BS
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}; expected one of {OBJECTIVES}")
        if self.weights is not None and any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ValueError(f"weights must be finite and >= 0, got {self.weights}")
        if self.nu is not None and any(w < 0 or not math.isfinite(w) for w in self.nu):
            raise ValueError(f"fronthaul prices must be finite and >= 0, got {self.nu}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.Csum is not None and not (self.Csum >= 0):
            raise ValueError("Csum must be >= 0")
        if self.kind == "sd-sum-sumfronthaul" and self.Csum is None:
            raise ValueError("sd-sum-sumfronthaul needs Csum")

    def mu(self, K: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(K)
        mu = np.asarray(self.weights, dtype=float)
        if mu.shape != (K,):
            raise ValueError(f"need {K} weights, got {mu.size}")
        return mu

    def nu_vec(self, L: int) -> np.ndarray:
        if self.nu is None:
            return np.ones(L)
        nu = np.asarray(self.nu, dtype=float)
        if nu.shape != (L,):
            raise ValueError(f"need {L} fronthaul prices, got {nu.size}")
        return nu


@dataclass
class SolveResult:
    b_star: QuantizerB
    value: float
    R: np.ndarray
    C: np.ndarray
    slacks: list
    iterations: int
    converged: bool
    gap_estimate: float
    method: str
    objective: Objective
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        from .model import quantizer_to_dict
        return {
            "objective": self.objective.kind,
            "method": self.method,
            "value_bits": self.value,
            "R_bits": self.R.tolist(),
            "C_bits": self.C.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "gap_estimate_bits": self.gap_estimate,
            "min_slack_bits": min((s for _, s in self.slacks), default=None),
            "slacks": [{"constraint": lab, "slack_bits": s} for lab, s in self.slacks],
            "quantizer": quantizer_to_dict(self.b_star),
        }


# ------------------------------------------------------ value functions at B

def fronthaul_cap(instance: NetworkInstance) -> float:
    """Upper bound on each fronthaul variable in the tradeoff program."""
    full = full_resolution_quantizer(instance)
    return 64.0 * instance.N + i_x_yhat_cond(instance, full, range(instance.K), range(instance.L))


def tradeoff_lp(instance: NetworkInstance, b: QuantizerB, mu, nu, gamma: float,
                Csum: float | None, cap: float | None = None):
    """max mu.R - gamma nu.C over (R, C) at fixed B. Returns (value, R, C)."""
    K, L = instance.K, instance.L
    cap = fronthaul_cap(instance) if cap is None else cap
    iyy = i_y_yhat_all(instance, b)
    rows, ub = [], []
    for T in range(1, ss.full(K) + 1):
        for S in range(ss.full(L) + 1):
            sm = ss.members(S)
            pen = float(sum(iyy[l] for l in sm))
            if math.isinf(pen):
                continue
            row = np.zeros(K + L)
            row[list(ss.members(T))] = 1.0
            row[[K + l for l in sm]] = -1.0
            rows.append(row)
            ub.append(i_x_yhat_cond(instance, b, ss.members(T), ss.members(ss.complement(S, L))) - pen)
    bounds = [(0, None)] * K + [(0, cap)] * L
    for l in range(L):
        if math.isinf(iyy[l]):
            bounds[K + l] = (cap, cap)
    if Csum is not None and math.isfinite(Csum) and np.any(np.asarray(nu) > 0):
        rows.append(np.concatenate([np.zeros(K), nu]))
        ub.append(Csum)
    c = -np.concatenate([mu, -gamma * np.asarray(nu, dtype=float)])
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(ub), bounds=bounds, method="highs")
    if res.status != 0:
        return -math.inf, np.zeros(K), np.zeros(L)
    return float(-res.fun), res.x[:K], res.x[K:]


def value_at(instance: NetworkInstance, b: QuantizerB, objective: Objective,
             clamp: bool = True) -> float:
    """Objective value at fixed B, evaluated through the region constraints.

    With ``clamp=False`` a negative right-hand side makes the value -inf
    (the extended-valued concave function); otherwise it is clamped at 0.
    """
    K, L = instance.K, instance.L
    kind = objective.kind
    if kind == "jd-weighted":
        mu = objective.mu(K)
        return max_weighted_rate(jd_constraints(instance, b), K, mu, raw=not clamp).value
    if kind == "sd-sum":
        if clamp:
            return jd_sum_rate_fixed_b(instance, b)
        iyy = i_y_yhat_all(instance, b)
        return min(jd_rhs(instance, b, ss.full(K), S, iyy) for S in range(ss.full(L) + 1))
    if kind == "sd-sum-sumfronthaul":
        v = min(i_x_yhat_cond(instance, b, range(K), range(L)),
                objective.Csum - float(np.sum(i_y_yhat_all(instance, b))))
        return max(v, 0.0) if clamp else v
    return tradeoff_lp(instance, b, objective.mu(K), objective.nu_vec(L), objective.gamma,
                       objective.Csum)[0]


def _g_matrices(instance: NetworkInstance, users):
    ks = instance.input_cov_sqrt(users)
    return [instance.sigma_inv_sqrt[l] @ instance.channel([l], users) @ ks for l in range(instance.L)]


def rhs_gradient(instance: NetworkInstance, b: QuantizerB, T: int, S: int) -> np.ndarray:
    """Gradient of rhs(T, S) w.r.t. the whitened B~ (shape (L, N, N), Hermitian)."""
    L, N = instance.L, instance.N
    bt = whitened(instance, b)
    users = ss.members(T)
    G = _g_matrices(instance, users)
    grad = np.zeros((L, N, N), dtype=complex)
    sc = ss.members(ss.complement(S, L))
    d = len(users) * instance.M
    Mx = np.eye(d, dtype=complex)
    for l in sc:
        Mx += G[l].conj().T @ bt[l] @ G[l]
    W = np.linalg.inv(hermitize(Mx))
    for l in sc:
        grad[l] = G[l] @ W @ G[l].conj().T / LN2
    for l in ss.members(S):
        grad[l] = -np.linalg.inv(np.eye(N) - bt[l]) / LN2
    return hermitize(grad)


def project_box(instance: NetworkInstance, b: QuantizerB, eps: float = PROJ_EPS) -> QuantizerB:
    """Frobenius projection of the whitened B~ onto {eps I <= B~ <= (1 - eps) I}."""
    bt = whitened(instance, b)
    w, v = np.linalg.eigh(bt)
    w = np.clip(w, eps, 1.0 - eps)
    return unwhiten(instance, np.einsum("lij,lj,lkj->lik", v, w, v.conj()))


# --------------------------------------------------------- problem assembly

class _LogDet:
    """log2 det(M0 + sum_p theta_p A_p) over a subset of the B parameters."""

    __slots__ = ("M0", "A", "pidx")

    def __init__(self, M0, A, pidx):
        self.M0, self.A, self.pidx = M0, A, np.asarray(pidx, dtype=int)

    def matrix(self, theta):
        if self.pidx.size == 0:
            return self.M0
        return self.M0 + np.tensordot(theta[self.pidx], self.A, axes=1)

    def eval(self, theta, order=2):
        M = hermitize(self.matrix(theta))
        try:
            c = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            return None
        val = 2.0 * float(np.sum(np.log(np.diag(c).real))) / LN2
        if order == 0 or self.pidx.size == 0:
            n = self.pidx.size
            return val, np.zeros(n), np.zeros((n, n))
        W = np.linalg.inv(M)
        X = np.einsum("ij,pjk->pik", W, self.A)
        grad = np.einsum("pii->p", X).real / LN2
        hess = -np.einsum("pij,qji->pq", X, X).real / LN2
        return val, grad, hess


@dataclass
class _Constraint:
    label: str
    lin: np.ndarray      # coefficients on the auxiliary variables
    const: float
    terms: list          # (weight, term key)


class _Program:
    """max c.r subject to concave constraints, in variables u = (theta, r)."""

    def __init__(self, instance, objective):
        self.inst = instance
        self.obj = objective
        K, L, N = instance.K, instance.L, instance.N
        self.basis = hermitian_basis(N)
        nb = N * N
        self.terms: dict = {}
        self.constraints: list[_Constraint] = []
        mu = objective.mu(K) if objective.kind in ("jd-weighted", "rate-fronthaul-tradeoff") else None

        full = full_resolution_quantizer(instance)
        C = np.asarray(instance.C, dtype=float)
        tradeoff = objective.kind == "rate-fronthaul-tradeoff"
        self.nu = objective.nu_vec(L) if tradeoff else None
        Csum = objective.Csum
        if tradeoff:
            self.cap = fronthaul_cap(instance)
            if Csum is not None and Csum == 0:
                zero_c = self.nu > 0
            else:
                zero_c = np.zeros(L, dtype=bool)
        else:
            zero_c = C <= 0
        # BSs with zero fronthaul keep B_l = 0 (every constraint through them only loses).
        self.free_bs = [l for l in range(L) if not zero_c[l]]
        self.fixed_zero_c = [l for l in range(L) if zero_c[l]]
        self.pstart = {l: i * nb for i, l in enumerate(self.free_bs)}
        self.ntheta = nb * len(self.free_bs)

        cap_users = [k for k in range(K)
                     if self.free_bs and i_x_yhat_cond(instance, full, [k], self.free_bs) > CAPABILITY_TOL]
        if objective.kind in ("jd-weighted", "rate-fronthaul-tradeoff"):
            self.users = [k for k in cap_users if mu[k] > 0]
        elif objective.kind == "sd-sum-sumfronthaul" and Csum == 0:
            self.users = []
        else:
            self.users = cap_users
        self.trivial = not self.users

        # auxiliary variables
        if objective.kind in ("jd-weighted", "rate-fronthaul-tradeoff"):
            self.rvars = {k: i for i, k in enumerate(self.users)}
        else:
            self.rvars = {"sum": 0}
        nr = len(self.rvars)
        self.cvars = {}
        if tradeoff:
            self.cvars = {l: nr + i for i, l in enumerate(self.free_bs)}
        self.naux = nr + len(self.cvars)
        self.c = np.zeros(self.naux)
        if objective.kind in ("jd-weighted", "rate-fronthaul-tradeoff"):
            for k, i in self.rvars.items():
                self.c[i] = mu[k]
        else:
            self.c[0] = 1.0
        if tradeoff:
            for l, i in self.cvars.items():
                self.c[i] = -objective.gamma * self.nu[l]
        if self.trivial:
            return

        if objective.kind == "sd-sum-sumfronthaul":
            self._add("rate", self._r_coef(self.users), 0.0, [(1.0, self._ix(self.users, self.free_bs))])
            lin = self._r_coef(self.users)
            self._add("sum-fronthaul", lin, float(Csum),
                      [(1.0, self._iyy(l)) for l in self.free_bs])
        else:
            Ts = [ss.to_mask(self.users)] if objective.kind == "sd-sum" else \
                [ss.to_mask(t) for r in range(1, len(self.users) + 1)
                 for t in itertools.combinations(self.users, r)]
            for T in sorted(Ts):
                for S in range(ss.full(L) + 1):
                    self._jd_row(T, S, C, tradeoff)
        if tradeoff and Csum is not None and math.isfinite(Csum) and np.any(self.nu[self.free_bs] > 0):
            lin = np.zeros(self.naux)
            for l, i in self.cvars.items():
                lin[i] = -self.nu[l]
            self._add("fronthaul-budget", lin, float(Csum), [])

    # helpers -------------------------------------------------------------
    def _add(self, label, lin, const, terms):
        self.constraints.append(_Constraint(label, lin, const, terms))

    def _r_coef(self, users):
        lin = np.zeros(self.naux)
        if "sum" in self.rvars:
            lin[0] = -1.0
        else:
            for k in users:
                lin[self.rvars[k]] = -1.0
        return lin

    def _ix(self, users, bss):
        key = ("ix", tuple(users), tuple(l for l in bss if l in self.pstart))
        if key not in self.terms:
            G = _g_matrices(self.inst, users)
            d = len(users) * self.inst.M
            As, pidx = [], []
            for l in key[2]:
                for e, E in enumerate(self.basis):
                    As.append(G[l].conj().T @ E @ G[l])
                    pidx.append(self.pstart[l] + e)
            A = np.array(As) if As else np.zeros((0, d, d), dtype=complex)
            self.terms[key] = _LogDet(np.eye(d, dtype=complex), A, pidx)
        return key

    def _iyy(self, l):
        """log2 det(I - B~_l) = -I(Y_l; Yhat_l | X)."""
        key = ("iyy", l)
        if key not in self.terms:
            N = self.inst.N
            pidx = [self.pstart[l] + e for e in range(N * N)]
            self.terms[key] = _LogDet(np.eye(N, dtype=complex), -self.basis, pidx)
        return key

    def _box_lo(self, l):
        key = ("box", l)
        if key not in self.terms:
            N = self.inst.N
            pidx = [self.pstart[l] + e for e in range(N * N)]
            self.terms[key] = _LogDet(np.zeros((N, N), dtype=complex), self.basis, pidx)
        return key

    def _jd_row(self, T, S, C, tradeoff):
        users = ss.members(T)
        lin = self._r_coef(users)
        const = 0.0
        terms = []
        for l in ss.members(S):
            if l in self.pstart:
                terms.append((1.0, self._iyy(l)))
                if tradeoff:
                    lin = lin.copy()
                    lin[self.cvars[l]] += 1.0
                else:
                    const += C[l]
            # fixed BSs: C_l = 0 and B_l = 0 contribute nothing
        sc = [l for l in ss.members(ss.complement(S, self.inst.L)) if l in self.pstart]
        if sc:
            terms.append((1.0, self._ix(users, sc)))
        self._add(f"T={ss.fmt(T)} S={ss.fmt(S)}", lin, const, terms)

    # parameter maps --------------------------------------------------------
    def theta_from_bt(self, bt):
        th = np.zeros(self.ntheta)
        for l, p0 in self.pstart.items():
            th[p0:p0 + len(self.basis)] = np.einsum("eij,ji->e", self.basis, bt[l]).real
        return th

    def bt_from_theta(self, th):
        L, N = self.inst.L, self.inst.N
        bt = np.zeros((L, N, N), dtype=complex)
        for l, p0 in self.pstart.items():
            bt[l] = np.tensordot(th[p0:p0 + len(self.basis)], self.basis, axes=1)
        return hermitize(bt)

    def quantizer(self, th) -> QuantizerB:
        return unwhiten(self.inst, self.bt_from_theta(th))

    # barrier ---------------------------------------------------------------
    @property
    def nu_barrier(self) -> float:
        n = len(self.constraints) + 2 * self.inst.N * len(self.free_bs) + len(self.rvars)
        if self.cvars:
            n += 2 * len(self.cvars)
        return float(n)

    def constraint_values(self, u):
        th, r = u[:self.ntheta], u[self.ntheta:]
        cache = {}
        out = []
        for con in self.constraints:
            v = con.lin @ r + con.const
            for w, key in con.terms:
                if key not in cache:
                    res = self.terms[key].eval(th, order=0)
                    cache[key] = -math.inf if res is None else res[0]
                v += w * cache[key]
            out.append(v)
        return np.array(out)

    def barrier(self, u, tau, order=2):
        """phi = -tau c.r - sum log g_i - box - aux bounds (natural logs)."""
        nt = self.ntheta
        th, r = u[:nt], u[nt:]
        n = u.size
        phi = -tau * float(self.c @ r)
        grad = np.zeros(n)
        grad[nt:] = -tau * self.c
        hess = np.zeros((n, n))
        cache = {}

        def term(key):
            if key not in cache:
                cache[key] = self.terms[key].eval(th, order)
            return cache[key]

        # box: B~ > 0 and I - B~ > 0
        for l in self.free_bs:
            for key in (self._box_lo(l), self._iyy(l)):
                res = term(key)
                if res is None:
                    return None
                v, g, h = res
                p = self.terms[key].pidx
                phi -= LN2 * v
                if order:
                    grad[p] -= LN2 * g
                    hess[np.ix_(p, p)] -= LN2 * h
        # aux bounds
        for i in self.rvars.values():
            if r[i] <= 0:
                return None
            phi -= math.log(r[i])
            grad[nt + i] -= 1.0 / r[i]
            hess[nt + i, nt + i] += 1.0 / r[i] ** 2
        for l, i in self.cvars.items():
            lo, hi = r[i], self.cap - r[i]
            if lo <= 0 or hi <= 0:
                return None
            phi -= math.log(lo) + math.log(hi)
            grad[nt + i] += -1.0 / lo + 1.0 / hi
            hess[nt + i, nt + i] += 1.0 / lo ** 2 + 1.0 / hi ** 2
        for con in self.constraints:
            gv = float(con.lin @ r + con.const)
            gg = np.zeros(n)
            gg[nt:] = con.lin
            gh = None
            for w, key in con.terms:
                res = term(key)
                if res is None:
                    return None
                v, g, h = res
                gv += w * v
                if order:
                    p = self.terms[key].pidx
                    gg[p] += w * g
                    if gh is None:
                        gh = []
                    gh.append((p, w * h))
            if gv <= 0:
                return None
            phi -= math.log(gv)
            if order:
                grad -= gg / gv
                hess += np.outer(gg, gg) / gv ** 2
                for p, h in gh or ():
                    hess[np.ix_(p, p)] -= h / gv
        return phi, grad, hess

    def initial_point(self):
        """Strictly feasible start: B~ = eps I (eps halved from 1/2), small aux variables.

        The first eps whose smallest constraint margin exceeds 1e-6 is used;
        failing that, the eps with the largest positive margin.
        """
        N = self.inst.N
        best = None
        eps = 0.5
        for _ in range(60):
            bt = np.zeros((self.inst.L, N, N), dtype=complex)
            for l in self.free_bs:
                bt[l] = eps * np.eye(N)
            th = self.theta_from_bt(bt)
            r = np.zeros(self.naux)
            if self.cvars:
                nu_sum = float(sum(self.nu[l] for l in self.cvars))
                Csum = self.obj.Csum
                cl = 0.5 * self.cap
                if Csum is not None and math.isfinite(Csum) and nu_sum > 0:
                    cl = min(cl, 0.5 * Csum / nu_sum)
                for i in self.cvars.values():
                    r[i] = cl
            g = self.constraint_values(np.concatenate([th, r]))
            margin = float(g.min()) if g.size else 1.0
            if margin > 0 and (best is None or margin > best[0]):
                share = 0.5 * margin / max(len(self.rvars), 1)
                for i in self.rvars.values():
                    r[i] = share
                u = np.concatenate([th, r])
                if self.barrier(u, 1.0, order=0) is not None:
                    best = (margin, u)
                    if margin > 1e-6:
                        break
            eps *= 0.5
        if best is None:
            raise SolverError("could not find a strictly feasible starting point")
        return best[1]


def _newton_barrier(prog: _Program, max_iters: int, gap_tol: float, trace: list):
    """Barrier path following: tau *= 10 until nu / tau <= gap_tol.

    Full Newton steps are taken once the decrement is below 1e-6, where the
    barrier decrease is below the rounding of its value. A centering step
    that cannot move more than 1e-10 of the Newton step, or more than 200
    Newton steps at one tau, counts as a stall; two consecutive stalls end
    the solve, converged iff the gap bound is within 1e3 gap_tol.
    """
    u = prog.initial_point()
    nu = prog.nu_barrier
    tau = max(1.0, nu / max(abs(float(prog.c @ u[prog.ntheta:])), 1.0))
    its = 0
    converged = False
    stalls = 0
    while its < max_iters:
        stalled = False
        inner = 0
        while its < max_iters:
            phi, grad, hess = prog.barrier(u, tau)
            try:
                cf = np.linalg.cholesky(hess)
                step = -np.linalg.solve(cf.conj().T, np.linalg.solve(cf, grad))
            except np.linalg.LinAlgError:
                reg = 1e-12 * max(1.0, float(np.abs(np.diag(hess)).max()))
                step = -np.linalg.lstsq(hess + reg * np.eye(len(u)), grad, rcond=None)[0]
            dec = -float(grad @ step)
            its += 1
            inner += 1
            if dec <= 2e-12:
                break
            t = 1.0
            while t >= 1e-10:
                cand = u + t * step
                r2 = prog.barrier(cand, tau, order=0)
                if r2 is not None and r2[0] <= phi - 0.25 * t * dec:
                    break
                # in the quadratic phase the decrease drowns in the rounding of phi
                if t == 1.0 and r2 is not None and dec <= 1e-6:
                    break
                t *= 0.5
            if t < 1e-10 or inner > 200:
                stalled = True
                break
            u = cand
            if trace is not None:
                g = prog.constraint_values(u)
                trace.append((its, float(prog.c @ u[prog.ntheta:]), t, float(g.min()) if g.size else 0.0))
            if dec / 2 <= 1e-11:
                break
        gap = nu / tau
        if gap <= gap_tol:
            converged = True
            break
        if stalled:
            stalls += 1
            if stalls >= 2:
                converged = gap <= 1e3 * gap_tol
                break
        else:
            stalls = 0
        tau *= 10.0
    return u, its, converged, nu / tau


def _result_from(prog, instance, objective, b, its, converged, gap, method, trace, R_hint=None):
    K, L = instance.K, instance.L
    kind = objective.kind
    C = np.asarray(instance.C, dtype=float).copy()
    slacks = []
    if kind == "jd-weighted":
        cons = jd_constraints(instance, b)
        lp = max_weighted_rate(cons, K, objective.mu(K))
        value, R = lp.value, lp.R
        for c in cons:
            slacks.append((c.label(), c.rhs - float(sum(R[k] for k in ss.members(c.T)))))
    elif kind == "sd-sum":
        value = jd_sum_rate_fixed_b(instance, b)
        iyy = i_y_yhat_all(instance, b)
        R = np.array([value])
        for S in range(ss.full(L) + 1):
            slacks.append((f"T={ss.fmt(ss.full(K))} S={ss.fmt(S)}",
                           jd_rhs(instance, b, ss.full(K), S, iyy) - value))
    elif kind == "sd-sum-sumfronthaul":
        ix = i_x_yhat_cond(instance, b, range(K), range(L))
        pen = float(np.sum(i_y_yhat_all(instance, b)))
        value = max(0.0, min(ix, objective.Csum - pen))
        R = np.array([value])
        slacks = [("rate", ix - value), ("sum-fronthaul", objective.Csum - pen - value)]
        C = i_y_yhat_all(instance, b)
    else:
        value, R, C = tradeoff_lp(instance, b, objective.mu(K), objective.nu_vec(L),
                                  objective.gamma, objective.Csum)
        if objective.Csum is not None and math.isfinite(objective.Csum):
            slacks.append(("fronthaul-budget", objective.Csum - float(objective.nu_vec(L) @ C)))
    return SolveResult(b, float(value), np.asarray(R, dtype=float), np.asarray(C, dtype=float),
                       slacks, its, converged, gap, method, objective, trace or [])


def solve(instance: NetworkInstance, objective: Objective, method: str = "barrier",
          max_iters: int = MAX_ITERS, tol: float = 1e-9, trace: bool = False,
          **kw) -> SolveResult:
    check_caps(instance)
    tr = [] if trace else None
    if method == "supergradient":
        return _supergradient(instance, objective, max_iters, tr, **kw)
    if method != "barrier":
        raise ValueError(f"unknown method {method!r}")
    prog = _Program(instance, objective)
    if prog.trivial:
        b = zero_quantizer(instance)
        return _result_from(prog, instance, objective, b, 0, True, 0.0, method, tr)
    u, its, converged, gap = _newton_barrier(prog, max_iters, tol, tr)
    b = prog.quantizer(u[:prog.ntheta])
    return _result_from(prog, instance, objective, b, its, converged, gap, method, tr)


# -------------------------------------------------------- projected supergradient

def _value_and_supergradient(instance, b, objective):
    K, L = instance.K, instance.L
    kind = objective.kind
    if kind == "jd-weighted":
        cons = jd_constraints(instance, b)
        lp = max_weighted_rate(cons, K, objective.mu(K))
        grad = np.zeros((L, instance.N, instance.N), dtype=complex)
        for lam, c in zip(lp.duals, cons):
            if lam > 1e-12:
                grad += lam * rhs_gradient(instance, b, c.T, c.S)
        return lp.value, grad
    if kind == "sd-sum":
        iyy = i_y_yhat_all(instance, b)
        Kall = ss.full(K)
        vals = [jd_rhs(instance, b, Kall, S, iyy) for S in range(ss.full(L) + 1)]
        S = int(np.argmin(vals))
        return vals[S], rhs_gradient(instance, b, Kall, S)
    if kind == "sd-sum-sumfronthaul":
        ix = i_x_yhat_cond(instance, b, range(K), range(L))
        pen = float(np.sum(i_y_yhat_all(instance, b)))
        if ix <= objective.Csum - pen:
            return ix, rhs_gradient(instance, b, ss.full(K), 0)
        bt = whitened(instance, b)
        g = np.array([-np.linalg.inv(np.eye(instance.N) - x) / LN2 for x in bt])
        return objective.Csum - pen, g
    raise ValueError("the supergradient method handles the B-only objectives")


def _supergradient(instance, objective, max_iters, trace, step: float = 0.1,
                   target: float | None = None, window: int = 50, rtol: float = 1e-9):
    """Projected supergradient ascent on the value function of B~ (whitened box)."""
    if objective.kind == "rate-fronthaul-tradeoff":
        raise ValueError("the supergradient method handles the B-only objectives")
    if objective.kind == "jd-weighted" and not np.any(objective.mu(instance.K) > 0):
        return _result_from(None, instance, objective, zero_quantizer(instance), 0, True, 0.0,
                            "supergradient", trace)
    fixed = np.asarray(instance.C) <= 0
    b = project_box(instance, QuantizerB(0.5 * np.asarray(instance.sigma_inv)))
    bt = whitened(instance, b)
    bt[fixed] = 0
    b = unwhiten(instance, bt)
    best_b, best_v = b, -math.inf
    avg = np.zeros_like(bt)
    hist = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        v, g = _value_and_supergradient(instance, b, objective)
        if v > best_v:
            best_v, best_b = v, b
        gn = float(np.sqrt(np.sum(np.abs(g) ** 2)))
        if gn == 0:
            converged = True
            break
        if target is not None:
            a = max(target - v, 0.0) / gn ** 2
        else:
            a = step / math.sqrt(it) / gn
        bt = whitened(instance, b) + a * g
        bt[fixed] = 0
        b = project_box(instance, unwhiten(instance, bt))
        bt = whitened(instance, b)
        bt[fixed] = 0
        b = unwhiten(instance, bt)
        avg += (bt - avg) / it
        if trace is not None:
            trace.append((it, v, a, best_v))
        hist.append(best_v)
        if len(hist) > window and abs(hist[-1] - hist[-1 - window]) <= rtol * max(1.0, abs(hist[-1])):
            converged = True
            break
    b_avg = unwhiten(instance, avg)
    if value_at(instance, b_avg, objective) > best_v:
        best_b = b_avg
    return _result_from(None, instance, objective, best_b, it, converged, math.nan,
                        "supergradient", trace)


# -------------------------------------------------------------- public API

def maximize_weighted_sum_jd(instance: NetworkInstance, weights, **kw) -> SolveResult:
    return solve(instance, Objective("jd-weighted", weights=tuple(float(w) for w in weights)), **kw)


def maximize_sum_sd_individual(instance: NetworkInstance, **kw) -> SolveResult:
    return solve(instance, Objective("sd-sum"), **kw)


def maximize_sum_sd_sumfronthaul(instance: NetworkInstance, Csum: float, **kw) -> SolveResult:
    return solve(instance, Objective("sd-sum-sumfronthaul", Csum=float(Csum)), **kw)


def weighted_rate_fronthaul_tradeoff(instance: NetworkInstance, mu, nu, gamma: float,
                                     Csum: float | None, **kw) -> SolveResult:
    obj = Objective("rate-fronthaul-tradeoff", weights=tuple(float(w) for w in mu),
                    nu=tuple(float(x) for x in nu), gamma=float(gamma),
                    Csum=None if Csum is None else float(Csum))
    return solve(instance, obj, **kw)


# ------------------------------------------------------------------ grid oracle

def _vector_values(instance, lam, objective):
    """Objective for N = 1 at whitened scalars ``lam`` (shape (P, L)), vectorized."""
    K, L, M = instance.K, instance.L, instance.M
    P = lam.shape[0]
    with np.errstate(divide="ignore"):
        iyy = -np.log2(1.0 - lam)
    ix_cache = {}

    def ix(T, S):
        key = (T, S)
        if key not in ix_cache:
            users = ss.members(T)
            G = _g_matrices(instance, users)
            d = len(users) * M
            Mx = np.broadcast_to(np.eye(d, dtype=complex), (P, d, d)).copy()
            for l in ss.members(ss.complement(S, L)):
                gg = G[l].conj().T @ G[l]
                Mx += lam[:, l, None, None] * gg
            ix_cache[key] = np.linalg.slogdet(Mx)[1] / LN2
        return ix_cache[key]

    def rhs(T, S):
        pen = sum(instance.C[l] - iyy[:, l] for l in ss.members(S)) if S else 0.0
        return pen + ix(T, S)

    kind = objective.kind
    if kind == "sd-sum":
        return np.min([rhs(ss.full(K), S) for S in range(ss.full(L) + 1)], axis=0)
    if kind == "sd-sum-sumfronthaul":
        return np.minimum(ix(ss.full(K), 0), objective.Csum - iyy.sum(axis=1))
    if kind == "jd-weighted":
        mu = objective.mu(K)
        if K == 1:
            return mu[0] * np.min([rhs(1, S) for S in range(ss.full(L) + 1)], axis=0)
        if K == 2:
            a = {T: np.min([rhs(T, S) for S in range(ss.full(L) + 1)], axis=0) for T in (1, 2, 3)}
            a1, a2, a12 = a[1], a[2], a[3]
            cands = [np.zeros(P),
                     mu[0] * np.minimum(a1, a12), mu[1] * np.minimum(a2, a12)]
            r2 = a12 - a1
            cands.append(np.where((r2 >= 0) & (r2 <= a2), mu[0] * a1 + mu[1] * r2, -np.inf))
            r1 = a12 - a2
            cands.append(np.where((r1 >= 0) & (r1 <= a1), mu[0] * r1 + mu[1] * a2, -np.inf))
            cands.append(np.where(a12 >= a1 + a2, mu[0] * a1 + mu[1] * a2, -np.inf))
            out = np.max(cands, axis=0)
            infeasible = np.minimum(np.minimum(a1, a2), a12) < 0
            return np.where(infeasible, -np.inf, out)
    if kind == "rate-fronthaul-tradeoff" and K == 1 and L == 1:
        mu, nu = objective.mu(1)[0], objective.nu_vec(1)[0]
        cap = fronthaul_cap(instance)
        cmax = cap
        if objective.Csum is not None and nu > 0:
            cmax = min(cmax, objective.Csum / nu)
        i0 = ix(1, 0)
        best = np.full(P, -np.inf)
        for cpt in (np.zeros(P), iyy[:, 0], iyy[:, 0] + i0, np.full(P, cmax)):
            c = np.clip(cpt, 0.0, cmax)
            r = np.minimum(i0, c - iyy[:, 0])
            val = np.where(r >= 0, mu * r - objective.gamma * nu * c, -np.inf)
            best = np.maximum(best, val)
        return best
    # generic fallback: one exact evaluation per grid point
    out = np.empty(P)
    for i in range(P):
        b = unwhiten(instance, lam[i][:, None, None].astype(complex))
        out[i] = value_at(instance, b, objective, clamp=False)
    return out


@dataclass(frozen=True)
class OracleResult:
    value: float
    lam: np.ndarray   # whitened scalar quantizer per BS at the best grid point
    evaluations: int


def _nested_zoom(f, lo, hi, points: int, levels: int):
    """max of a concave f over the box [lo, hi] by nested 1-D grid zooms.

    g(x_1) = max over the remaining coordinates of f is concave, and a concave
    function on a grid peaks within one cell of its best grid point, so each
    level keeps the two cells around the best point. All nested searches run
    in lockstep so that ``f`` is always called on a whole batch of points.
    Returns (value, argmax, evaluations).
    """
    D = len(lo)
    evals = 0

    def solve_dim(prefix):
        nonlocal evals
        P, d = prefix.shape
        if d == D:
            evals += P
            return f(prefix), np.zeros((P, 0))
        a = np.full(P, lo[d])
        b = np.full(P, hi[d])
        best_v = np.full(P, -np.inf)
        best_x = np.zeros((P, D - d))
        n = points if hi[d] > lo[d] else 1
        t = np.linspace(0.0, 1.0, n)
        for _ in range(levels if n > 1 else 1):
            grid = a[:, None] + (b - a)[:, None] * t[None, :]
            pts = np.concatenate([np.repeat(prefix, n, axis=0), grid.reshape(-1, 1)], axis=1)
            v, rest = solve_dim(pts)
            v = v.reshape(P, n)
            i = np.argmax(v, axis=1)
            rows = np.arange(P)
            vi = v[rows, i]
            better = vi > best_v
            best_v = np.where(better, vi, best_v)
            cand = np.concatenate([grid[rows, i][:, None],
                                   rest.reshape(P, n, -1)[rows, i]], axis=1)
            best_x[better] = cand[better]
            if n == 1:
                break
            # rows with no finite value keep their interval
            ok = np.isfinite(vi)
            a = np.where(ok, grid[rows, np.maximum(i - 1, 0)], a)
            b = np.where(ok, grid[rows, np.minimum(i + 1, n - 1)], b)
        return best_v, best_x

    v, x = solve_dim(np.zeros((1, 0)))
    return float(v[0]), x[0], evals


def grid_oracle(instance: NetworkInstance, objective: Objective, resolution: int = 400,
                eps: float = 1e-9, zoom_levels: int | None = None, lo=None, hi=None) -> OracleResult:
    """Brute-force grid over the whitened scalar quantizers (N = 1, at most 3 BSs).

    The objective is concave in the whitened scalars, so a nested grid zoom
    (``resolution`` points for one BS, 21 or 11 points per axis for two or
    three) converges to the maximum without any gradient information.
    Passing ``lo == hi`` evaluates a single point.
    """
    L, N = instance.L, instance.N
    if N != 1 or L > 3:
        raise ValueError(f"grid oracle needs N = 1 and at most 3 scalar DoF (got L={L}, N={N})")
    if resolution < 3 or resolution > 400:
        raise ValueError("resolution must be in [3, 400]")
    lo = np.full(L, eps if lo is None else lo, dtype=float)
    hi = np.full(L, 1.0 - eps if hi is None else hi, dtype=float)
    if objective.kind != "rate-fronthaul-tradeoff":
        off = np.asarray(instance.C) <= 0
        lo[off], hi[off] = 0.0, 0.0
    points = resolution if L == 1 else min(resolution, 21 if L == 2 else 11)
    if zoom_levels is None:
        # each level shrinks the interval by (points - 1) / 2; stop near 1e-8
        zoom_levels = int(math.ceil(8 * math.log(10) / math.log((points - 1) / 2)))
    best_v, best_x, evals = _nested_zoom(
        lambda x: _vector_values(instance, x, objective), lo, hi, points, max(zoom_levels, 1))
    if objective.kind != "rate-fronthaul-tradeoff":
        best_v = max(best_v, 0.0) if math.isfinite(best_v) else 0.0
    return OracleResult(best_v, best_x, evals)
