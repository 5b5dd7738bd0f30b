"""Dense complex linear algebra used throughout the package.

Matrices and vectors are plain ``numpy`` arrays of dtype complex128 (row-major).
Functions here never mutate their inputs.
"""
import numpy as np

from . import kernels

HERMITIAN_TOL = 1e-12
MAX_KRON_ENTRIES = 2 ** 24
MAX_BIPARTITE_DIM = 4096


class DimensionError(ValueError):
    """Raised when operand shapes or declared subsystem sizes disagree."""


class NotHermitianError(ValueError):
    pass


def as_matrix(a):
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(
        np.max(np.abs(m - m.conj().T), initial=0.0) <= tol
    )


def check_hermitian(m, tol=HERMITIAN_TOL):
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got {m.shape}")
    if not is_hermitian(m, tol):
        dev = np.max(np.abs(m - m.conj().T))
        raise NotHermitianError(f"matrix is not Hermitian (max |M - M^H| = {dev:.3e})")
    return m


def kron(a, b):
    """Kronecker product with entry ((i,k),(j,l)) = a[i,j] * b[k,l]."""
    a = as_matrix(a)
    b = as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > MAX_KRON_ENTRIES:
        raise MemoryError(f"kron result {rows}x{cols} exceeds {MAX_KRON_ENTRIES} entries")
    return kernels.kron(a, b)


def partial_trace(m, which, d_a, d_b):
    """Trace out subsystem ``which`` ('A' or 'B') of an operator on C^d_a x C^d_b.

    ``which='B'`` returns the d_a x d_a reduced operator, ``which='A'`` the
    d_b x d_b one.
    """
    m = as_matrix(m)
    n = d_a * d_b
    if m.shape != (n, n):
        raise DimensionError(f"operator of shape {m.shape} does not act on {d_a}x{d_b}")
    if which not in ("A", "B"):
        raise ValueError("which must be 'A' or 'B'")
    return kernels.partial_trace(m, d_a, d_b, keep_a=(which == "B"))


def hermitian_expm(h, s, tol=HERMITIAN_TOL):
    """Return exp(i*s*H) for Hermitian ``h`` via its eigendecomposition."""
    h = check_hermitian(h, tol)
    # symmetrise so eigh sees an exactly Hermitian input
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(1j * s * w)) @ v.conj().T


def hs_inner(a, b):
    """Hilbert-Schmidt inner product Tr(A^H B)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def hs_norm(a):
    return float(np.sqrt(max(hs_inner(a, a).real, 0.0)))


def normalize(v):
    v = np.asarray(v, dtype=np.complex128)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("cannot normalise the zero vector")
    return v / nrm


def random_hermitian(d, rng, scale=1.0):
    """Gaussian Hermitian matrix (X + X^H)/2 with complex standard normal X."""
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (x + x.conj().T)


def random_state(d, rng):
    return normalize(rng.standard_normal(d) + 1j * rng.standard_normal(d))


def random_unitary(d, rng):
    """Haar-random unitary via QR with phase correction."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
