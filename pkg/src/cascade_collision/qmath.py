"""Dense complex linear algebra for small tensor-product Hilbert spaces.

Tensor ordering is fixed globally: the leftmost factor varies slowest, which
is the convention of ``numpy.kron``.  Carriers occupy the leftmost factors and
an attached sub-environment is always the rightmost one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, NotHermitianError

HERMITIAN_TOL = 1e-10
JACOBI_TOL = 1e-13
_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered subsystem dimensions (and optional names) of a product space."""

    factor_dims: tuple[int, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid factor dimensions {self.factor_dims}")
        object.__setattr__(self, "factor_dims", dims)
        labels = tuple(self.labels) or tuple(f"f{i}" for i in range(len(dims)))
        if len(labels) != len(dims):
            raise DimensionError("labels and factor_dims differ in length")
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return int(np.prod(self.factor_dims))

    def __len__(self):
        return len(self.factor_dims)


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermiticity_residual(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return float("inf")
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_residual(a) <= tol


def is_unitary(a: np.ndarray, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return float(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))) <= tol


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def kron(a, b) -> np.ndarray:
    """Kronecker product; the left factor varies slowest."""
    a = as_matrix(a)
    b = as_matrix(b)
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, None, :, None] * b[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = as_matrix(mats[0])
    for m in mats[1:]:
        out = kron(out, m)
    return out


def embed(op, layout: SpaceLayout, index: int) -> np.ndarray:
    """Lift ``op`` acting on factor ``index`` to the full space as I⊗…⊗op⊗…⊗I."""
    op = as_matrix(op)
    dims = layout.factor_dims
    if op.shape != (dims[index], dims[index]):
        raise DimensionError(
            f"operator shape {op.shape} does not match factor {index} of dim {dims[index]}"
        )
    left = int(np.prod(dims[:index]))
    right = int(np.prod(dims[index + 1:]))
    out = op
    if left > 1:
        out = kron(np.eye(left), out)
    if right > 1:
        out = kron(out, np.eye(right))
    return out


def embed_factors(op, layout: SpaceLayout, indices: Sequence[int]) -> np.ndarray:
    """Lift ``op`` acting on the factors ``indices`` (in that order) to the full space."""
    op = as_matrix(op)
    dims = layout.factor_dims
    n = len(dims)
    indices = [int(i) for i in indices]
    sub = int(np.prod([dims[i] for i in indices]))
    if op.shape != (sub, sub):
        raise DimensionError(f"operator shape {op.shape} does not match factors {indices}")
    rest = [i for i in range(n) if i not in indices]
    drest = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = kron(op, np.eye(drest))
    order = indices + rest
    shape = [dims[i] for i in order]
    t = full.reshape(shape + shape)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(layout.dim, layout.dim)


def partial_trace(x, layout: SpaceLayout, keep: Sequence[int]) -> np.ndarray:
    """Reduced matrix on the factors in ``keep`` (kept in their original order); empty ``keep`` gives the 1×1 trace."""
    x = as_matrix(x)
    dims = layout.factor_dims
    n = len(dims)
    if x.shape != (layout.dim, layout.dim):
        raise DimensionError(f"matrix shape {x.shape} does not match layout dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        return np.trace(x).reshape(1, 1)
    if keep[0] < 0 or keep[-1] >= n:
        raise DimensionError(f"invalid keep set {keep} for {n} factors")
    drop = [i for i in range(n) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    dd = int(np.prod([dims[i] for i in drop])) if drop else 1
    t = x.reshape(dims + dims)
    perm = keep + drop + [n + i for i in keep] + [n + i for i in drop]
    t = t.transpose(perm).reshape(dk, dd, dk, dd)
    return np.einsum("iaja->ij", t)


def _jacobi_sweep(a: np.ndarray, v: np.ndarray, n: int) -> None:
    for p in range(n - 1):
        for q in range(p + 1, n):
            b = a[p, q]
            mag = abs(b)
            if mag < 1e-300:
                continue
            phase = b / mag
            app = a[p, p].real
            aqq = a[q, q].real
            theta = (aqq - app) / (2.0 * mag)
            t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
            if theta < 0.0:
                t = -t
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # phase-fixing diag(1, conj(phase)) followed by a real plane rotation
            g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
            idx = [p, q]
            a[:, idx] = a[:, idx] @ g
            a[idx, :] = g.conj().T @ a[idx, :]
            a[p, q] = 0.0
            a[q, p] = 0.0
            a[p, p] = a[p, p].real
            a[q, q] = a[q, q].real
            v[:, idx] = v[:, idx] @ g


def _off_norm(a: np.ndarray) -> float:
    off = a[~np.eye(a.shape[0], dtype=bool)]
    return float(np.linalg.norm(off))


def eig_hermitian(h, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Returns ascending real eigenvalues and the matching orthonormal eigenvectors
    as columns.  Sweeps stop once the off-diagonal Frobenius norm drops below
    ``1e-13`` (scaled by the matrix norm when that exceeds one).
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise DimensionError(f"eig_hermitian needs a square matrix, got {h.shape}")
    res = hermiticity_residual(h)
    if res > tol:
        raise NotHermitianError(f"matrix is not Hermitian (residual {res:.3e})")
    n = h.shape[0]
    a = hermitize(h).copy()
    v = np.eye(n, dtype=complex)
    stop = JACOBI_TOL * max(1.0, float(np.linalg.norm(a)))
    for _ in range(_MAX_SWEEPS):
        if _off_norm(a) <= stop:
            break
        _jacobi_sweep(a, v, n)
    else:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvals_hermitian(h) -> np.ndarray:
    return eig_hermitian(h)[0]


def expm_unitary(h, theta: float) -> np.ndarray:
    """exp(-i·theta·h) for Hermitian ``h`` via its spectral decomposition."""
    w, v = eig_hermitian(h)
    return (v * np.exp(-1j * theta * w)) @ v.conj().T


def trace_distance(a, b) -> float:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return 0.5 * float(np.sum(np.abs(eigvals_hermitian(hermitize(a - b)))))


def min_eigenvalue(rho) -> float:
    return float(eigvals_hermitian(hermitize(as_matrix(rho)))[0])


def apply_kraus(kraus: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    """Σ_k K x K†.  Defined for any (not necessarily Hermitian) square ``x``."""
    out = np.zeros_like(x, dtype=complex)
    for k in kraus:
        out += k @ x @ k.conj().T
    return out


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    """(G + G†)/2 from a complex Gaussian G, scaled to unit Frobenius norm."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (g + g.conj().T)
    return h / np.linalg.norm(h)


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_kraus(rng: np.random.Generator, d: int, n_ops: int = 2) -> list[np.ndarray]:
    """Kraus operators of a random CPTP map, cut from a random isometry."""
    g = rng.standard_normal((d * n_ops, d)) + 1j * rng.standard_normal((d * n_ops, d))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return [q[k * d:(k + 1) * d, :] for k in range(n_ops)]
