"""Small Hermitian linear-algebra helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)

# Asymmetry accepted (and symmetrized away) when constructing Hermitian inputs.
HERMITIAN_TOL = 1e-12


def hermitize(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().swapaxes(-1, -2))


def asymmetry(a: np.ndarray) -> float:
    """Largest entrywise |A - A^H|, relative to max(1, |A|_max)."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - a.conj().swapaxes(-1, -2)))) / scale


def eigh_h(a: np.ndarray):
    return np.linalg.eigh(hermitize(a))


def min_eig(a: np.ndarray) -> float:
    if a.shape[-1] == 0:
        return math.inf
    return float(np.linalg.eigvalsh(hermitize(a))[0])


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = eigh_h(a)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_inv_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = eigh_h(a)
    if w.size and w[0] <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.conj().T


def log2det_pd(a: np.ndarray) -> float:
    """log2 det of a Hermitian positive-definite matrix.

    Cholesky first; if that fails, fall back to the eigenvalues (which must
    then all be positive, otherwise -inf is returned).
    """
    n = a.shape[-1]
    if n == 0:
        return 0.0
    a = hermitize(a)
    try:
        c = np.linalg.cholesky(a)
        return float(2.0 * np.sum(np.log(np.abs(np.diag(c).real))) / LN2)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(a)
        if w[0] <= 0:
            return -math.inf
        return float(np.sum(np.log(w)) / LN2)


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal (Frobenius) real basis of n x n Hermitian matrices, shape (n*n, n, n)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    s = 1.0 / math.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = s
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = -1j * s
            e[j, i] = 1j * s
            basis.append(e)
    return np.array(basis)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
