"""Pure numpy implementations of the hot kernels (fallback backend)."""
import numpy as np


def kron(a, b):
    return np.kron(a, b)


def partial_trace(m, d_a, d_b, keep_a):
    t = m.reshape(d_a, d_b, d_a, d_b)
    if keep_a:
        return np.einsum("ikjk->ij", t)
    return np.einsum("ikil->kl", t)


def phase_kick(psi, v, factor):
    """In place: psi[i] *= exp(-1j * factor * v[i])."""
    psi *= np.exp(-1j * factor * v)


def abs2_sum(psi):
    return float(np.vdot(psi, psi).real)
