import importlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entfree import kernels

BACKENDS = kernels.backends()


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_compiled_backend_selected():
    # the build ships the extension; the fallback is only used if it is missing
    assert kernels.BACKEND in ("cython", "python")
    assert set(BACKENDS) >= {"python"}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 5))
def test_backends_agree(seed, d_a, d_b):
    rng = np.random.default_rng(seed)
    a, b = cplx(rng, d_a, d_b), cplx(rng, d_b, d_a)
    m = cplx(rng, d_a * d_b, d_a * d_b)
    psi = cplx(rng, 37)
    v = rng.standard_normal(37)
    ref = BACKENDS["python"]
    for name, k in BACKENDS.items():
        assert np.allclose(k.kron(a, b), ref.kron(a, b), rtol=0, atol=1e-14), name
        for keep in (True, False):
            assert np.allclose(k.partial_trace(m, d_a, d_b, keep),
                               ref.partial_trace(m, d_a, d_b, keep), atol=1e-12), name
        p1, p2 = psi.copy(), psi.copy()
        k.phase_kick(p1, v, 0.3)
        ref.phase_kick(p2, v, 0.3)
        assert np.allclose(p1, p2, atol=1e-14), name
        assert k.abs2_sum(psi) == pytest.approx(ref.abs2_sum(psi), rel=1e-13)


def test_phase_kick_wrapper_rejects_bad_buffers():
    with pytest.raises(TypeError):
        kernels.phase_kick(np.ones(4), np.zeros(4), 1.0)
    psi = np.ones((4, 4), dtype=complex)
    kernels.phase_kick(psi, np.full(4, np.pi), 1.0)  # broadcast along rows
    assert np.allclose(psi, -1.0)


def test_pure_python_fallback_selected_by_environment():
    env = dict(os.environ, ENTFREE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import entfree.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
