"""Gaussian information quantities for compress-and-forward with Gaussian quantization.

Two independent code paths are provided on purpose:

* closed forms in terms of B (``i_y_yhat_given_x``, ``i_x_yhat_cond``,
  ``sd_fronthaul_usage``), used by the region and optimizer code;
* a joint covariance over (X, Yhat, Y) with Schur-complement conditioning
  (``joint_covariance``, ``cond_mutual_info``), used for GSD rates and as a
  cross-check of the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._linalg import LN2, hermitize, log2det_pd
from .model import NetworkInstance, QuantizerB, check_quantizer, whitened

# Whitened eigenvalue above which B is treated as the endpoint Sigma^{-1}.
ENDPOINT_TOL = 1e-14
# Below this whitened eigenvalue, Yhat is represented in scaled coordinates B(Y + q).
SCALED_COORD_TOL = 1e-6
# Relative eigenvalue threshold for pseudo-inverses and range reduction.
RANGE_TOL = 1e-10
RIDGE_FLOOR = 1e-12


# ------------------------------------------------------------- closed forms

def i_y_yhat_given_x(instance: NetworkInstance, b: QuantizerB, ell: int) -> float:
    """I(Y_l; Yhat_l | X_K) = -log2 det(I - Sigma^{1/2} B Sigma^{1/2}); +inf at B = Sigma^{-1}."""
    lam = np.linalg.eigvalsh(whitened(instance, b)[ell])
    if lam[-1] >= 1.0 - ENDPOINT_TOL:
        return math.inf
    lam = np.clip(lam, 0.0, None)
    return float(-np.sum(np.log1p(-lam)) / LN2)


def i_y_yhat_all(instance: NetworkInstance, b: QuantizerB) -> np.ndarray:
    return np.array([i_y_yhat_given_x(instance, b, l) for l in range(instance.L)])


def _gram(instance: NetworkInstance, b: QuantizerB, users, bss) -> np.ndarray:
    """K_T^{1/2} (sum_{l in bss} H_{l,T}^H B_l H_{l,T}) K_T^{1/2}."""
    users = list(users)
    n = len(users) * instance.M
    A = np.zeros((n, n), dtype=complex)
    for l in bss:
        h = instance.channel([l], users)
        A += h.conj().T @ b.B[l] @ h
    ks = instance.input_cov_sqrt(users)
    return hermitize(ks @ A @ ks)


def i_x_yhat_cond(instance: NetworkInstance, b: QuantizerB, users, bss) -> float:
    """I(X_T; Yhat_{S^c} | X_{T^c}) for user set T = ``users`` and BS set ``bss``.

    Evaluated as log2 det(I + K_T^{1/2} G K_T^{1/2}) so singular K_T is fine.
    """
    users = sorted(set(users))
    if not users:
        raise ValueError("user set T must be nonempty")
    bss = sorted(set(bss))
    if not bss:
        return 0.0
    g = _gram(instance, b, users, bss)
    return log2det_pd(np.eye(g.shape[0]) + g)


def sd_fronthaul_usage(instance: NetworkInstance, b: QuantizerB, bss) -> float:
    """I(Y_S; Yhat_S | Yhat_{S^c}) in closed form, for nonempty S = ``bss``."""
    S = sorted(set(bss))
    if not S:
        raise ValueError("BS set S must be nonempty")
    K = range(instance.K)
    Sc = [l for l in range(instance.L) if l not in S]
    pen = sum(i_y_yhat_given_x(instance, b, l) for l in S)
    if math.isinf(pen):
        return math.inf
    return i_x_yhat_cond(instance, b, K, range(instance.L)) - i_x_yhat_cond(instance, b, K, Sc) + pen


# ---------------------------------------------------------- joint covariance

Key = tuple  # ('X', k) | ('Yhat', l) | ('Y', l), 0-based


@dataclass(frozen=True, eq=False)
class JointCovariance:
    """Covariance of the stacked vector (X_1..X_K, Yhat_1..Yhat_L[, Y_1..Y_L]).

    ``scaled[l]`` is True when Yhat_l is stored as B_l (Y_l + q_l) instead of
    Y_l + q_l; this happens for nearly singular B_l (huge Q_l) and leaves every
    information quantity unchanged since the map is invertible on the range.
    """

    cov: np.ndarray
    index: dict
    scaled: tuple

    def idx(self, keys) -> np.ndarray:
        if not keys:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(*self.index[k]) for k in keys])

    def block(self, a, c=None) -> np.ndarray:
        ia = self.idx(a)
        ic = ia if c is None else self.idx(c)
        return self.cov[np.ix_(ia, ic)]


def xs(users) -> list:
    return [("X", int(k)) for k in users]


def yhats(bss) -> list:
    return [("Yhat", int(l)) for l in bss]


def ys(bss) -> list:
    return [("Y", int(l)) for l in bss]


def joint_covariance(instance: NetworkInstance, b: QuantizerB,
                     include_y: bool = False) -> JointCovariance:
    """Joint covariance built as G D G^H from independent sources (X, Z, q)."""
    check_quantizer(instance, b)
    K, L, M, N = instance.K, instance.L, instance.M, instance.N
    bt_eigs = np.linalg.eigvalsh(whitened(instance, b))
    scaled = tuple(bool(w[0] < SCALED_COORD_TOL) for w in bt_eigs)

    # Sources: X_1..X_K (M each), Z_1..Z_L (N each), q_1..q_L (N each).
    nsrc = K * M + 2 * L * N
    D = np.zeros((nsrc, nsrc), dtype=complex)
    for k in range(K):
        D[k * M:(k + 1) * M, k * M:(k + 1) * M] = instance.Kx[k]
    z0, q0 = K * M, K * M + L * N
    for l in range(L):
        sl = slice(z0 + l * N, z0 + (l + 1) * N)
        D[sl, sl] = instance.Sigma[l]
        Bl = b.B[l]
        if scaled[l]:
            qcov = Bl - Bl @ instance.Sigma[l] @ Bl
        else:
            qcov = np.linalg.inv(Bl) - instance.Sigma[l]
        w, v = np.linalg.eigh(hermitize(qcov))
        qcov = (v * np.clip(w, 0.0, None)) @ v.conj().T
        sq = slice(q0 + l * N, q0 + (l + 1) * N)
        D[sq, sq] = qcov

    rows, index, off = [], {}, 0

    def add(key, g):
        nonlocal off
        rows.append(g)
        index[key] = (off, off + g.shape[0])
        off += g.shape[0]

    y_maps = []
    for l in range(L):
        g = np.zeros((N, nsrc), dtype=complex)
        for k in range(K):
            g[:, k * M:(k + 1) * M] = instance.H[l, k]
        g[:, z0 + l * N:z0 + (l + 1) * N] = np.eye(N)
        y_maps.append(g)
    for k in range(K):
        g = np.zeros((M, nsrc), dtype=complex)
        g[:, k * M:(k + 1) * M] = np.eye(M)
        add(("X", k), g)
    for l in range(L):
        g = y_maps[l].copy()
        g[:, q0 + l * N:q0 + (l + 1) * N] = np.eye(N)
        if scaled[l]:
            g = b.B[l] @ g
        add(("Yhat", l), g)
    if include_y:
        for l in range(L):
            add(("Y", l), y_maps[l])
    G = np.vstack(rows)
    return JointCovariance(cov=hermitize(G @ D @ G.conj().T), index=index, scaled=scaled)


def _pinv_h(a: np.ndarray) -> np.ndarray:
    if a.shape[0] == 0:
        return a
    w, v = np.linalg.eigh(hermitize(a))
    cut = RANGE_TOL * max(1.0, float(np.max(np.abs(w))))
    inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
    return (v * inv) @ v.conj().T


def conditional_cov(jc: JointCovariance, a, given) -> np.ndarray:
    """cov(A | C) by Schur complement (pseudo-inverse on the C block)."""
    saa = jc.block(a)
    if not given:
        return hermitize(saa)
    sac = jc.block(a, given)
    scc = jc.block(given)
    return hermitize(saa - sac @ _pinv_h(scc) @ sac.conj().T)


@dataclass(frozen=True)
class MIInfo:
    value: float
    regularized: bool
    rank: int


def cond_mutual_info(jc: JointCovariance, A, B, C=(), return_info: bool = False):
    """I(A; B | C) in bits for disjoint lists of block keys.

    A is first reduced to the range of cov(A | C), so deterministic components
    (e.g. X_k with singular K_k) contribute nothing. If cov(A' | B, C) then
    has an eigenvalue below 1e-12 a ridge of 1e-12 trace/dim is added and the
    evaluation is flagged as regularized.
    """
    A, B, C = list(A), list(B), list(C)
    if set(A) & set(B) or set(A) & set(C) or set(B) & set(C):
        raise ValueError("A, B, C must be disjoint")
    if not A or not B:
        out = MIInfo(0.0, False, 0)
        return out if return_info else out.value
    m_c = conditional_cov(jc, A, C)
    w, v = np.linalg.eigh(m_c)
    keep = w > RANGE_TOL * max(1.0, float(np.max(np.abs(w))))
    if not np.any(keep):
        out = MIInfo(0.0, False, 0)
        return out if return_info else out.value
    u = v[:, keep]
    before = float(np.sum(np.log(w[keep])) / LN2)
    m_bc = u.conj().T @ conditional_cov(jc, A, B + C) @ u
    m_bc = hermitize(m_bc)
    regularized = False
    if np.linalg.eigvalsh(m_bc)[0] < RIDGE_FLOOR:
        n = m_bc.shape[0]
        tr = float(np.trace(m_bc).real) / n
        ridge = RIDGE_FLOOR * (tr if tr > 0 else 1.0)
        m_bc = m_bc + ridge * np.eye(n)
        regularized = True
    after = log2det_pd(m_bc)
    out = MIInfo(before - after, regularized, int(np.sum(keep)))
    return out if return_info else out.value
