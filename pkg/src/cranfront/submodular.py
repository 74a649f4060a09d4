"""Set functions, sub/supermodularity checks and greedy extreme points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _subsets as ss
from .gaussinfo import i_x_yhat_cond, i_y_yhat_all
from .model import NetworkInstance, QuantizerB

SET_TOL = 1e-9
BRUTE_FORCE_MAX_N = 12


@dataclass
class SetFunction:
    """Memoized set function on subsets of {0..n-1}, keyed by bitmask."""

    n: int
    fn: Callable[[int], float]
    memo: dict = field(default_factory=dict, repr=False)

    def __call__(self, mask: int) -> float:
        v = self.memo.get(mask)
        if v is None:
            v = float(self.fn(mask))
            self.memo[mask] = v
        return v

    def of(self, items) -> float:
        return self(ss.to_mask(items))

    def table(self) -> np.ndarray:
        return np.array([self(m) for m in range(ss.full(self.n) + 1)])


@dataclass(frozen=True)
class ModularityResult:
    holds: bool
    witness: tuple | None = None  # (S, T) bitmasks
    violation: float = 0.0


def _pair_check(f: SetFunction, sign: float, tol: float) -> ModularityResult:
    if f.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"ground set of size {f.n} too large for brute force")
    vals = f.table()
    worst = ModularityResult(True)
    top = ss.full(f.n) + 1
    for S in range(top):
        for T in range(S + 1, top):
            # sign * (f(S) + f(T) - f(S|T) - f(S&T)) must be >= -tol
            d = sign * (vals[S] + vals[T] - vals[S | T] - vals[S & T])
            if d < -tol and -d > worst.violation:
                worst = ModularityResult(False, (S, T), float(-d))
    return worst


def is_submodular(f: SetFunction, tol: float = SET_TOL) -> ModularityResult:
    return _pair_check(f, 1.0, tol)


def is_supermodular(g: SetFunction, tol: float = SET_TOL) -> ModularityResult:
    return _pair_check(g, -1.0, tol)


def greedy_extreme_point(f: SetFunction, ordering) -> np.ndarray:
    """v_{i_j} = f({i_1..i_j}) - f({i_1..i_{j-1}}).

    For submodular f this is an extreme point of {x : x(S) <= f(S)}; for
    supermodular f the same increments give an extreme point of {x : x(S) >= f(S)}.
    """
    ordering = list(ordering)
    if sorted(ordering) != list(range(f.n)):
        raise ValueError(f"ordering {ordering} is not a permutation of range({f.n})")
    v = np.zeros(f.n)
    mask, prev = 0, f(0)
    for i in ordering:
        mask |= 1 << i
        cur = f(mask)
        v[i] = cur - prev
        prev = cur
    return v


@dataclass(frozen=True)
class PolyhedronCheck:
    min_slack: float
    tight: int  # number of chain constraints with |slack| <= tol
    chain_slacks: tuple


def polyhedron_slacks(f: SetFunction, x, ordering=None, upper: bool = True,
                      tol: float = SET_TOL) -> PolyhedronCheck:
    """Slacks of x in P(f) (upper=True: f(S) - x(S)) or the supermodular mirror."""
    x = np.asarray(x, dtype=float)
    sign = 1.0 if upper else -1.0
    slack = math.inf
    for S in range(1, ss.full(f.n) + 1):
        s = sign * (f(S) - float(sum(x[i] for i in ss.members(S))))
        slack = min(slack, s)
    chain = []
    if ordering is not None:
        mask = 0
        for i in ordering:
            mask |= 1 << i
            chain.append(sign * (f(mask) - float(sum(x[j] for j in ss.members(mask)))))
    tight = sum(1 for s in chain if abs(s) <= tol)
    return PolyhedronCheck(slack, tight, tuple(chain))


# --------------------------------------------- the two C-RAN set functions

def f_jd_sumfronthaul(instance: NetworkInstance, b: QuantizerB, Csum: float) -> SetFunction:
    """f(T) = min{Csum - sum_l I(Y_l;Yhat_l|X), I(X_T; Yhat_L | X_{T^c})}, f(empty) = min{C', 0}."""
    cprime = float(Csum - np.sum(i_y_yhat_all(instance, b)))
    allL = range(instance.L)

    def fn(T):
        if T == 0:
            return min(cprime, 0.0)
        return min(cprime, i_x_yhat_cond(instance, b, ss.members(T), allL))

    return SetFunction(instance.K, fn)


def g_fronthaul(instance: NetworkInstance, b: QuantizerB, R: float):
    """(g, g+) over BSs: g(S) = R + sum_{l in S} I(Y_l;Yhat_l|X) - I(X_K; Yhat_{S^c})."""
    iyy = i_y_yhat_all(instance, b)
    K, L = range(instance.K), instance.L

    def g(S):
        sc = ss.members(ss.complement(S, L))
        return R + float(sum(iyy[l] for l in ss.members(S))) - i_x_yhat_cond(instance, b, K, sc)

    gf = SetFunction(L, g)
    return gf, SetFunction(L, lambda S: max(gf(S), 0.0))
