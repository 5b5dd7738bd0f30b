"""Bipartite states and operators on C^d_A x C^d_B.

Index convention: basis vector |i>_A x |j>_B sits at flat index ``i*d_B + j``,
so a state vector reshaped to ``(d_A, d_B)`` is its coefficient matrix.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import (
    MAX_BIPARTITE_DIM,
    DimensionError,
    check_hermitian,
    hs_norm,
    kron,
    partial_trace,
)

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class BipartiteState:
    d_a: int
    d_b: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.d_a < 1 or self.d_b < 1:
            raise DimensionError("subsystem dimensions must be positive")
        if self.d_a * self.d_b > MAX_BIPARTITE_DIM:
            raise DimensionError(f"d_A*d_B = {self.d_a * self.d_b} exceeds {MAX_BIPARTITE_DIM}")
        if amps.size != self.d_a * self.d_b:
            raise DimensionError(f"{amps.size} amplitudes do not fit {self.d_a}x{self.d_b}")
        if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (norm {np.linalg.norm(amps)!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, psi_a, psi_b):
        psi_a = np.asarray(psi_a, dtype=np.complex128)
        psi_b = np.asarray(psi_b, dtype=np.complex128)
        return cls(psi_a.size, psi_b.size, np.kron(psi_a, psi_b))

    @classmethod
    def from_vector(cls, v, d_a, d_b):
        """Build a state from an unnormalised vector, normalising it."""
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        return cls(d_a, d_b, v / np.linalg.norm(v))

    @property
    def matrix(self):
        return self.amplitudes.reshape(self.d_a, self.d_b)

    def projector(self):
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt form sum_i coefficients[i] * left_basis[i] x right_basis[i].

    ``left_basis`` is d_A x d_A and ``right_basis`` d_B x d_B, one basis vector
    per row; only the first ``len(coefficients)`` rows carry weight.
    """

    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray

    def reconstruct(self):
        k = len(self.coefficients)
        return np.einsum(
            "i,ia,ib->ab", self.coefficients, self.left_basis[:k], self.right_basis[:k]
        ).reshape(-1)


def _first_nonzero_phase(v, tiny=1e-12):
    idx = np.flatnonzero(np.abs(v) > tiny)
    if idx.size == 0:
        return 1.0 + 0j
    c = v[idx[0]]
    return c / abs(c)


def schmidt_decompose(state):
    """Schmidt decomposition by SVD of the coefficient matrix.

    The phase of every left vector is fixed so that its first nonzero
    component is real and positive; the matching right vector absorbs the
    compensating phase. Degenerate coefficients leave the basis choice to
    the SVD routine.
    """
    u, s, vh = np.linalg.svd(state.matrix, full_matrices=True)
    left = u.T.copy()
    right = vh.copy()
    for i in range(left.shape[0]):
        ph = _first_nonzero_phase(left[i])
        left[i] *= ph.conjugate()
        if i < right.shape[0]:
            right[i] *= ph
    return SchmidtDecomposition(s, left, right)


def reduced_density(state, keep="A"):
    """Reduced density matrix of subsystem ``keep`` computed from the coefficient matrix."""
    m = state.matrix
    if keep == "A":
        return m @ m.conj().T
    if keep == "B":
        return m.T @ m.conj()
    raise ValueError("keep must be 'A' or 'B'")


def purity(state):
    """Tr rho_A^2 computed from the Schmidt coefficients."""
    s = np.linalg.svd(state.matrix, compute_uv=False)
    return float(np.sum(s ** 4))


def purity_via_partial_trace(state, keep="A"):
    """Tr rho^2 of the reduced state, going through the full projector."""
    rho = partial_trace(state.projector(), "B" if keep == "A" else "A", state.d_a, state.d_b)
    return float(np.real(np.trace(rho @ rho)))


def linear_entropy(state):
    return 1.0 - purity(state)


def is_product(state, tol=1e-8):
    s = np.linalg.svd(state.matrix, compute_uv=False)
    return len(s) < 2 or bool(s[1] < tol)


@dataclass(frozen=True)
class HamiltonianDecomposition:
    """H = local_a x I + I x local_b + scalar * I + coupling.

    ``local_a`` and ``local_b`` are traceless and ``coupling`` has vanishing
    partial traces on both sides, which makes the split unique.
    """

    d_a: int
    d_b: int
    local_a: np.ndarray
    local_b: np.ndarray
    scalar: float
    coupling: np.ndarray
    coupling_norm: float

    def factorisable_part(self):
        i_a = np.eye(self.d_a)
        i_b = np.eye(self.d_b)
        return (
            kron(self.local_a, i_b)
            + kron(i_a, self.local_b)
            + self.scalar * np.eye(self.d_a * self.d_b)
        )

    def reconstruct(self):
        return self.factorisable_part() + self.coupling


def factorise_hamiltonian(h, d_a, d_b, tol=1e-12):
    """Split ``h`` by Hilbert-Schmidt orthogonal projection onto local terms."""
    h = check_hermitian(h, tol)
    n = d_a * d_b
    if h.shape != (n, n):
        raise DimensionError(f"H of shape {h.shape} does not act on {d_a}x{d_b}")
    scalar = float(np.real(np.trace(h))) / n
    local_a = partial_trace(h, "B", d_a, d_b) / d_b - scalar * np.eye(d_a)
    local_b = partial_trace(h, "A", d_a, d_b) / d_a - scalar * np.eye(d_b)
    coupling = (
        h
        - kron(local_a, np.eye(d_b))
        - kron(np.eye(d_a), local_b)
        - scalar * np.eye(n)
    )
    return HamiltonianDecomposition(
        d_a, d_b, local_a, local_b, scalar, coupling, hs_norm(coupling)
    )


def coupling_coefficient(h, psi_a, psi_b):
    """Weight with which ``h`` drives psi_a x psi_b into bi-orthogonal states.

    Returns ||(Q_A x Q_B) H (psi_a x psi_b)||^2 with Q = I - |psi><psi|.
    """
    psi_a = np.asarray(psi_a, dtype=np.complex128)
    psi_b = np.asarray(psi_b, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    d_a, d_b = psi_a.size, psi_b.size
    if h.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"H of shape {h.shape} does not act on {d_a}x{d_b}")
    m = (h @ np.outer(psi_a, psi_b).reshape(-1)).reshape(d_a, d_b)
    # project columns off psi_a, rows off psi_b
    m = m - np.outer(psi_a, psi_a.conj() @ m)
    m = m - np.outer(m @ psi_b.conj(), psi_b)
    return float(np.vdot(m, m).real)


class UnitaryTag(str, Enum):
    LOCAL = "Local"
    SWAP_LOCAL = "SwapLocal"
    ENTANGLING = "Entangling"


@dataclass(frozen=True)
class UnitaryClass:
    tag: UnitaryTag
    operator_schmidt_coefficients: np.ndarray


SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)


def operator_schmidt_coefficients(op, d_a, d_b):
    """Singular values of the realigned operator (operator-Schmidt spectrum)."""
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"operator of shape {op.shape} does not act on {d_a}x{d_b}")
    r = op.reshape(d_a, d_b, d_a, d_b).transpose(0, 2, 1, 3).reshape(d_a * d_a, d_b * d_b)
    return np.linalg.svd(r, compute_uv=False)


def _rank_one(s, tol):
    return len(s) < 2 or s[1] <= tol * s[0]


def classify_unitary_2q(u, tol=1e-8):
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (4, 4):
        raise DimensionError(f"expected a 4x4 unitary, got {u.shape}")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(4)))
    if dev > UNITARY_TOL:
        raise ValueError(f"matrix is not unitary (max |U^H U - I| = {dev:.3e})")
    s = operator_schmidt_coefficients(u, 2, 2)
    if _rank_one(s, tol):
        tag = UnitaryTag.LOCAL
    elif _rank_one(operator_schmidt_coefficients(u @ SWAP, 2, 2), tol):
        tag = UnitaryTag.SWAP_LOCAL
    else:
        tag = UnitaryTag.ENTANGLING
    return UnitaryClass(tag, s)
