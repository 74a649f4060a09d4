"""Channel model for the uplink C-RAN: instances, quantizers, validation, I/O.

Indices are 0-based everywhere in code; reports and file comments use 1-based
labels. All information quantities are in bits per complex dimension.

Instance JSON schema (all complex entries are ``[re, im]`` pairs)::

    {
      "K": 2, "L": 2, "M": 1, "N": 2,
      "H":     [ell][k][row][col] -> [re, im]     (L x K blocks of N x M)
      "Sigma": [ell][row][col]    -> [re, im]     (L blocks of N x N)
      "Kx":    [k][row][col]      -> [re, im]     (K blocks of M x M)
      "P":     [P_1, ..., P_K],
      "C":     [C_1, ..., C_L]
    }

Quantizer JSON: ``{"B": [ell][row][col] -> [re, im]}`` or the same with key
``"Q"`` for quantization-noise covariances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._linalg import (
    HERMITIAN_TOL,
    asymmetry,
    hermitize,
    psd_inv_sqrt,
    psd_sqrt,
    random_unitary,
)

# Slack allowed on the Loewner-interval test for quantizers.
BOX_TOL = 1e-10


class InstanceError(ValueError):
    """Malformed instance: wrong shapes, non-Hermitian blocks, bad file."""


class InvalidQuantizer(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def _hermitian_stack(name: str, arr: np.ndarray) -> np.ndarray:
    for i, a in enumerate(arr):
        err = asymmetry(a)
        if err > HERMITIAN_TOL:
            raise InstanceError(f"{name}[{i + 1}] is not Hermitian (asymmetry {err:.3g})")
    return hermitize(arr)


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Uplink C-RAN channel: K users with M antennas, L BSs with N antennas.

    ``H[l, k]`` is the N x M channel from user k to BS l, ``Sigma[l]`` the
    noise covariance at BS l, ``Kx[k]`` the input covariance of user k,
    ``P[k]`` its power budget and ``C[l]`` the fronthaul capacity of BS l.
    """

    K: int
    L: int
    M: int
    N: int
    H: np.ndarray
    Sigma: np.ndarray
    Kx: np.ndarray
    P: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        K, L, M, N = (int(self.K), int(self.L), int(self.M), int(self.N))
        if min(K, L, M, N) < 1:
            raise InstanceError(f"dimensions must be >= 1, got K={K} L={L} M={M} N={N}")
        H = np.asarray(self.H, dtype=complex)
        Sigma = np.asarray(self.Sigma, dtype=complex)
        Kx = np.asarray(self.Kx, dtype=complex)
        P = np.asarray(self.P, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float).reshape(-1)
        if H.shape != (L, K, N, M):
            raise InstanceError(f"H has shape {H.shape}, expected {(L, K, N, M)}")
        if Sigma.shape != (L, N, N):
            raise InstanceError(f"Sigma has shape {Sigma.shape}, expected {(L, N, N)}")
        if Kx.shape != (K, M, M):
            raise InstanceError(f"Kx has shape {Kx.shape}, expected {(K, M, M)}")
        if P.shape != (K,):
            raise InstanceError(f"P has length {P.size}, expected {K}")
        if C.shape != (L,):
            raise InstanceError(f"C has length {C.size}, expected {L}")
        Sigma = _hermitian_stack("Sigma", Sigma)
        Kx = _hermitian_stack("Kx", Kx)
        for name, val in (("K", K), ("L", L), ("M", M), ("N", N)):
            object.__setattr__(self, name, val)
        for name, val in (("H", H), ("Sigma", Sigma), ("Kx", Kx), ("P", P), ("C", C)):
            object.__setattr__(self, name, _readonly(val))

    def replace(self, **changes) -> "NetworkInstance":
        kw = dict(K=self.K, L=self.L, M=self.M, N=self.N, H=self.H,
                  Sigma=self.Sigma, Kx=self.Kx, P=self.P, C=self.C)
        kw.update(changes)
        return NetworkInstance(**kw)

    def with_fronthaul(self, C) -> "NetworkInstance":
        C = np.broadcast_to(np.asarray(C, dtype=float), (self.L,))
        return self.replace(C=C)

    @cached_property
    def sigma_inv(self) -> np.ndarray:
        return _readonly(np.array([np.linalg.inv(s) for s in self.Sigma]))

    @cached_property
    def sigma_sqrt(self) -> np.ndarray:
        return _readonly(np.array([psd_sqrt(s) for s in self.Sigma]))

    @cached_property
    def sigma_inv_sqrt(self) -> np.ndarray:
        return _readonly(np.array([psd_inv_sqrt(s) for s in self.Sigma]))

    @cached_property
    def kx_sqrt(self) -> np.ndarray:
        return _readonly(np.array([psd_sqrt(k) for k in self.Kx]))

    def channel(self, bss, users) -> np.ndarray:
        """Stacked channel from ``users`` (columns) to ``bss`` (rows)."""
        bss, users = list(bss), list(users)
        out = np.zeros((len(bss) * self.N, len(users) * self.M), dtype=complex)
        for a, l in enumerate(bss):
            for b, k in enumerate(users):
                out[a * self.N:(a + 1) * self.N, b * self.M:(b + 1) * self.M] = self.H[l, k]
        return out

    def input_cov(self, users) -> np.ndarray:
        users = list(users)
        out = np.zeros((len(users) * self.M,) * 2, dtype=complex)
        for a, k in enumerate(users):
            out[a * self.M:(a + 1) * self.M, a * self.M:(a + 1) * self.M] = self.Kx[k]
        return out

    def input_cov_sqrt(self, users) -> np.ndarray:
        users = list(users)
        out = np.zeros((len(users) * self.M,) * 2, dtype=complex)
        for a, k in enumerate(users):
            out[a * self.M:(a + 1) * self.M, a * self.M:(a + 1) * self.M] = self.kx_sqrt[k]
        return out


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: int | None
    detail: str

    def __str__(self):
        where = "" if self.index is None else f"[{self.index + 1}]"
        return f"{self.invariant}{where}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def invariants(self) -> set[str]:
        return {v.invariant for v in self.violations}


def validate(instance: NetworkInstance, tol: float = 1e-12) -> ValidationReport:
    """Check every instance invariant; never raises."""
    rep = ValidationReport()
    inst = instance
    if inst.H.shape != (inst.L, inst.K, inst.N, inst.M):
        rep.violations.append(Violation("dimensions", None, f"H shape {inst.H.shape}"))
    for l, s in enumerate(inst.Sigma):
        w = np.linalg.eigvalsh(s)
        if w[0] <= tol:
            rep.violations.append(Violation(
                "sigma_positive_definite", l, f"min eigenvalue {w[0]:.6g} <= 0"))
    for k, kk in enumerate(inst.Kx):
        w = np.linalg.eigvalsh(kk)
        if w[0] < -tol:
            rep.violations.append(Violation(
                "input_psd", k, f"min eigenvalue {w[0]:.6g} < 0"))
        tr = float(np.trace(kk).real)
        if tr > inst.P[k] * (1 + 1e-12) + tol:
            rep.violations.append(Violation(
                "power", k, f"trace(Kx) = {tr:.6g} > P = {inst.P[k]:.6g}"))
        if inst.P[k] < 0:
            rep.violations.append(Violation("power", k, f"P = {inst.P[k]:.6g} < 0"))
    for l, c in enumerate(inst.C):
        if not (c >= 0) or not math.isfinite(c):
            rep.violations.append(Violation("fronthaul_nonnegative", l, f"C = {c!r}"))
    return rep


@dataclass(frozen=True, eq=False)
class RateFronthaulTuple:
    """Rates R (length K) and fronthaul usages C (length L), bits per complex dimension.

    Entries within ``tol`` below zero are rounded up to 0; anything more
    negative, or non-finite, is rejected.
    """

    R: np.ndarray
    C: np.ndarray

    def __post_init__(self, tol: float = 1e-9):
        for name in ("R", "C"):
            a = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} has non-finite entries: {a}")
            if np.any(a < -tol):
                raise ValueError(f"{name} has negative entries: {a}")
            object.__setattr__(self, name, _readonly(np.maximum(a, 0.0)))

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "C": self.C.tolist()}


# ----------------------------------------------------------------- quantizers

@dataclass(frozen=True, eq=False)
class QuantizerB:
    """Reparameterized quantizers B_l = (Sigma_l + Q_l)^{-1}, shape (L, N, N)."""

    B: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=complex)
        if B.ndim != 3 or B.shape[1] != B.shape[2]:
            raise InvalidQuantizer(f"B must have shape (L, N, N), got {B.shape}")
        B = _hermitian_stack("B", B)
        object.__setattr__(self, "B", _readonly(B))

    def __len__(self):
        return self.B.shape[0]


def b_from_q(Q: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    Q = hermitize(np.atleast_2d(np.asarray(Q, dtype=complex)))
    Sigma = hermitize(np.atleast_2d(np.asarray(Sigma, dtype=complex)))
    if np.linalg.eigvalsh(Q)[0] < -1e-12 * max(1.0, np.abs(Q).max()):
        raise InvalidQuantizer("Q is not positive semidefinite")
    S = Sigma + Q
    w = np.linalg.eigvalsh(S)
    if w[0] <= 1e-14 * max(1.0, w[-1]):
        raise InvalidQuantizer("Sigma + Q is numerically singular")
    return hermitize(np.linalg.inv(S))


def q_from_b(B: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    B = hermitize(np.atleast_2d(np.asarray(B, dtype=complex)))
    Sigma = hermitize(np.atleast_2d(np.asarray(Sigma, dtype=complex)))
    return hermitize(np.linalg.inv(B) - Sigma)


def quantizer_from_q(instance: NetworkInstance, Q) -> QuantizerB:
    Q = np.asarray(Q, dtype=complex).reshape(instance.L, instance.N, instance.N)
    return QuantizerB(np.array([b_from_q(q, s) for q, s in zip(Q, instance.Sigma)]))


def background_quantizer(instance: NetworkInstance) -> QuantizerB:
    """Quantization noise at the background noise level: Q = Sigma, B = Sigma^{-1}/2."""
    return QuantizerB(0.5 * np.asarray(instance.sigma_inv))


def full_resolution_quantizer(instance: NetworkInstance) -> QuantizerB:
    """Upper endpoint B = Sigma^{-1} (Q = 0, uncompressed forwarding)."""
    return QuantizerB(np.asarray(instance.sigma_inv))


def zero_quantizer(instance: NetworkInstance) -> QuantizerB:
    return QuantizerB(np.zeros((instance.L, instance.N, instance.N), dtype=complex))


def whitened(instance: NetworkInstance, b: QuantizerB) -> np.ndarray:
    """Sigma^{1/2} B Sigma^{1/2} per BS; its eigenvalues lie in [0, 1] for valid B."""
    s = instance.sigma_sqrt
    return hermitize(np.einsum("lij,ljk,lkm->lim", s, b.B, s))


def unwhiten(instance: NetworkInstance, bt: np.ndarray) -> QuantizerB:
    s = instance.sigma_inv_sqrt
    return QuantizerB(np.einsum("lij,ljk,lkm->lim", s, bt, s))


def whitened_eigs(instance: NetworkInstance, b: QuantizerB) -> np.ndarray:
    return np.linalg.eigvalsh(whitened(instance, b))


def check_quantizer(instance: NetworkInstance, b: QuantizerB, tol: float = BOX_TOL) -> None:
    if b.B.shape != (instance.L, instance.N, instance.N):
        raise InvalidQuantizer(
            f"quantizer shape {b.B.shape} does not match (L, N, N) = "
            f"{(instance.L, instance.N, instance.N)}")
    eigs = whitened_eigs(instance, b)
    for l, w in enumerate(eigs):
        if w[0] < -tol or w[-1] > 1 + tol:
            raise InvalidQuantizer(
                f"B[{l + 1}] outside [0, Sigma^-1]: whitened eigenvalues in "
                f"[{w[0]:.6g}, {w[-1]:.6g}]")


def random_quantizer(instance: NetworkInstance, rng: np.random.Generator,
                     low: float = 0.05, high: float = 0.95) -> QuantizerB:
    """Random B with whitened eigenvalues uniform in [low, high] and random eigenvectors."""
    bt = []
    for _ in range(instance.L):
        u = random_unitary(rng, instance.N)
        lam = rng.uniform(low, high, size=instance.N)
        bt.append((u * lam) @ u.conj().T)
    return unwhiten(instance, np.array(bt))


# ----------------------------------------------------------- random instances

def random_instance(seed, K: int, L: int, M: int, N: int, snr_db: float,
                    power: float = 1.0, fronthaul=None) -> NetworkInstance:
    """Random instance with unit noise and isotropic inputs Kx = (P/M) I.

    Each link matrix H[l, k] has i.i.d. circular Gaussian entries, rescaled so
    that the average per-receive-antenna SNR of that link, ||H||_F^2 (P/M) / N,
    equals ``snr_db`` exactly. ``fronthaul`` defaults to N log2(1 + snr) per BS.
    """
    if min(K, L, M, N) < 1:
        raise InstanceError("dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    snr = 10.0 ** (snr_db / 10.0)
    H = (rng.standard_normal((L, K, N, M)) + 1j * rng.standard_normal((L, K, N, M))) / math.sqrt(2)
    per_antenna = power / M
    for l in range(L):
        for k in range(K):
            fro2 = float(np.sum(np.abs(H[l, k]) ** 2))
            H[l, k] *= math.sqrt(snr * N / (fro2 * per_antenna))
    if fronthaul is None:
        fronthaul = N * math.log2(1.0 + snr)
    C = np.broadcast_to(np.asarray(fronthaul, dtype=float), (L,)).copy()
    return NetworkInstance(
        K=K, L=L, M=M, N=N, H=H,
        Sigma=np.broadcast_to(np.eye(N), (L, N, N)).copy(),
        Kx=np.broadcast_to(per_antenna * np.eye(M), (K, M, M)).copy(),
        P=np.full(K, float(power)), C=C)


def scalar_unit(C: float = 2.0) -> NetworkInstance:
    """K = L = M = N = 1 with h = 1, Sigma = 1, Kx = P = 1."""
    return NetworkInstance(K=1, L=1, M=1, N=1, H=np.ones((1, 1, 1, 1)),
                           Sigma=np.ones((1, 1, 1)), Kx=np.ones((1, 1, 1)),
                           P=[1.0], C=[C])


# ------------------------------------------------------------------------ I/O

def _encode(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _decode(name: str, data, shape: tuple[int, ...]) -> np.ndarray:
    """Parse nested [re, im] arrays, reporting the first offending index."""

    def walk(node, depth, path):
        if depth == len(shape):
            if (not isinstance(node, (list, tuple)) or len(node) != 2
                    or not all(isinstance(x, (int, float)) for x in node)):
                raise InstanceError(f"{name}{path}: expected [re, im] pair, got {node!r}")
            return complex(float(node[0]), float(node[1]))
        if not isinstance(node, (list, tuple)):
            raise InstanceError(f"{name}{path}: expected array of length {shape[depth]}")
        if len(node) != shape[depth]:
            raise InstanceError(
                f"{name}{path}: length {len(node)}, expected {shape[depth]}")
        return [walk(x, depth + 1, path + f"[{i}]") for i, x in enumerate(node)]

    return np.array(walk(data, 0, ""), dtype=complex).reshape(shape)


def instance_to_dict(instance: NetworkInstance) -> dict:
    return {
        "K": instance.K, "L": instance.L, "M": instance.M, "N": instance.N,
        "H": _encode(instance.H), "Sigma": _encode(instance.Sigma),
        "Kx": _encode(instance.Kx), "P": instance.P.tolist(), "C": instance.C.tolist(),
    }


def instance_from_dict(d: dict) -> NetworkInstance:
    try:
        K, L, M, N = (int(d[k]) for k in ("K", "L", "M", "N"))
    except KeyError as e:
        raise InstanceError(f"missing field {e.args[0]!r}") from None
    for key in ("H", "Sigma", "Kx", "P", "C"):
        if key not in d:
            raise InstanceError(f"missing field {key!r}")
    H = _decode("H", d["H"], (L, K, N, M))
    Sigma = _decode("Sigma", d["Sigma"], (L, N, N))
    Kx = _decode("Kx", d["Kx"], (K, M, M))
    P, C = list(d["P"]), list(d["C"])
    if len(P) != K:
        raise InstanceError(f"P: length {len(P)}, expected K={K}")
    if len(C) != L:
        raise InstanceError(f"C: length {len(C)}, expected L={L}")
    return NetworkInstance(K=K, L=L, M=M, N=N, H=H, Sigma=Sigma, Kx=Kx, P=P, C=C)


def load_instance(path) -> NetworkInstance:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise InstanceError(f"{path}: invalid JSON ({e})") from None
    return instance_from_dict(d)


def save_instance(instance: NetworkInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))


def quantizer_to_dict(b: QuantizerB) -> dict:
    return {"B": _encode(b.B)}


def load_quantizer(path, instance: NetworkInstance) -> QuantizerB:
    with open(path) as fh:
        d = json.load(fh)
    shape = (instance.L, instance.N, instance.N)
    if "B" in d:
        b = QuantizerB(_decode("B", d["B"], shape))
    elif "Q" in d:
        b = quantizer_from_q(instance, _decode("Q", d["Q"], shape))
    else:
        raise InstanceError(f"{path}: quantizer file needs a 'B' or 'Q' field")
    check_quantizer(instance, b)
    return b
