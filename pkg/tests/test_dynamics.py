import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entfree.bipartite import BipartiteState, coupling_coefficient
from entfree.dynamics import (
    EvolutionTrace,
    HamiltonianSchedule,
    InvalidDensityError,
    MeanFieldState,
    StepSizeError,
    effective_generators,
    fichtre_residual,
    necessary_direction_probe,
    overlap_fidelity,
    propagate_density,
    propagate_exact,
    propagate_mean_field,
    purity_rate_check,
    random_factorisable_hamiltonian,
    random_factorisable_schedule,
    random_product_state,
)
from entfree.numerics import DimensionError, kron, random_density, random_hermitian, random_state

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
seeds = st.integers(0, 2**32 - 1)


def zz_schedule(t=1.0):
    return HamiltonianSchedule.constant(kron(SZ, SZ), t)


def test_schedule_validation():
    with pytest.raises(ValueError):
        HamiltonianSchedule(())
    with pytest.raises(ValueError):
        HamiltonianSchedule(((0.0, np.eye(2)),))
    with pytest.raises(ValueError):
        HamiltonianSchedule(((1.0, np.eye(2)), (1.0, np.eye(3))))
    with pytest.raises(ValueError):
        list(zz_schedule(1.0).steps(0.3))


def test_sigma_zz_closed_form_state():
    tr = propagate_exact(zz_schedule(), BipartiteState.product(PLUS, PLUS), 0.01,
                         store_states=True)
    for t, psi in zip(tr.times[::10], tr.states[::10]):
        expect = np.cos(t) * np.kron(PLUS, PLUS) - 1j * np.sin(t) * np.kron(MINUS, MINUS)
        assert np.max(np.abs(psi - expect)) <= 1e-12
    assert np.max(np.abs(tr.purity - (1 - np.sin(2 * tr.times) ** 2 / 2))) <= 1e-8
    assert np.max(np.abs(tr.fidelity_vs_meanfield - np.cos(tr.times) ** 2)) <= 1e-8
    assert tr.coupling_C[0] == pytest.approx(1.0)


def test_hbar_rescales_time():
    psi0 = BipartiteState.product(PLUS, PLUS)
    tr = propagate_exact(zz_schedule(), psi0, 0.01, hbar=2.0)
    assert np.max(np.abs(tr.purity - (1 - np.sin(tr.times) ** 2 / 2))) <= 1e-8


def test_zero_hamiltonian_is_identity(rng):
    psi0 = random_product_state(2, 3, rng)
    tr = propagate_exact(HamiltonianSchedule.constant(np.zeros((6, 6)), 0.5), psi0, 0.05,
                         store_states=True)
    assert np.array_equal(tr.states[-1], psi0.amplitudes)


def test_trace_shape_and_rows(rng):
    tr = propagate_exact(zz_schedule(0.1), random_product_state(2, 2, rng), 0.01)
    assert len(tr.times) == 11
    rows = list(tr.rows())
    assert len(rows) == 11 and len(rows[0]) == len(EvolutionTrace.COLUMNS)
    assert np.all((tr.fidelity_vs_meanfield >= 0) & (tr.fidelity_vs_meanfield <= 1 + 1e-10))


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        propagate_exact(zz_schedule(), random_product_state(3, 2, rng), 0.01)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_factorisable_schedule_keeps_purity(seed):
    rng = np.random.default_rng(seed)
    sched = random_factorisable_schedule(2, 3, rng, n_segments=4, total=1.0)
    tr = propagate_exact(sched, random_product_state(2, 3, rng), 1e-3)
    assert tr.purity.min() >= 1 - 1e-10
    assert tr.fidelity_vs_meanfield.min() >= 1 - 1e-8
    assert np.nanmax(tr.coupling_C) <= 1e-12
    assert np.nanmax(tr.fichtre_residual) <= 1e-11


def test_purity_only_mode(rng):
    tr = propagate_exact(zz_schedule(0.1), random_product_state(2, 2, rng), 0.01,
                         observables="purity", meanfield=False)
    assert np.all(np.isnan(tr.coupling_C)) and np.all(np.isnan(tr.fidelity_vs_meanfield))
    with pytest.raises(ValueError):
        propagate_exact(zz_schedule(0.1), random_product_state(2, 2, rng), 0.01, observables="x")


def test_density_matches_pure_propagation(rng):
    h = random_hermitian(6, rng)
    sched = HamiltonianSchedule(((0.2, h), (0.3, random_hermitian(6, rng))))
    psi0 = random_product_state(2, 3, rng)
    tr = propagate_exact(sched, psi0, 0.01, store_states=True, meanfield=False)
    dens = propagate_density(sched, psi0.projector(), 0.01)
    for psi, rho in zip(tr.states, dens.rhos):
        assert np.linalg.norm(np.outer(psi, psi.conj()) - rho) <= 1e-9


def test_density_counterexample_and_mixed(rng):
    ra, rb = random_density(2, rng), random_density(3, rng)
    rho = kron(ra, rb)
    dens = propagate_density(HamiltonianSchedule.constant(rho, 1.0), rho, 0.01)
    assert max(np.linalg.norm(r - rho) for r in dens.rhos) <= 1e-10
    mixed = np.eye(6) / 6
    dens = propagate_density(HamiltonianSchedule.constant(random_hermitian(6, rng), 1.0), mixed, 0.1)
    assert max(np.linalg.norm(r - mixed) for r in dens.rhos) <= 1e-12
    for r in dens.rhos:
        assert abs(np.trace(r) - 1) <= 1e-10 and np.linalg.eigvalsh(r)[0] >= -1e-10


def test_invalid_density_rejected():
    with pytest.raises(InvalidDensityError):
        propagate_density(zz_schedule(), np.eye(4) / 2, 0.1)
    with pytest.raises(InvalidDensityError):
        propagate_density(zz_schedule(), np.diag([1.5, -0.5, 0, 0]), 0.1)


def test_effective_generators_factorisable(rng):
    h_a, h_b = random_hermitian(2, rng), random_hermitian(3, rng)
    h = kron(h_a, np.eye(3)) + kron(np.eye(2), h_b)
    pa, pb = random_state(2, rng), random_state(3, rng)
    va, vb = effective_generators(h, pa, pb)
    eb = np.vdot(pb, h_b @ pb)
    assert np.allclose(va, h_a @ pa + eb * pa, atol=1e-13)
    assert np.allclose(vb, h_b @ pb - eb * pb, atol=1e-13)
    assert np.max(np.abs(h @ np.kron(pa, pb) - np.kron(va, pb) - np.kron(pa, vb))) <= 1e-12
    za, zb = effective_generators(np.zeros((6, 6)), pa, pb)
    assert not np.any(za) and not np.any(zb)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_reconstruction_when_uncoupled(seed):
    """Coupled H that does not reach bi-orthogonal states from a chosen product."""
    rng = np.random.default_rng(seed)
    pa, pb = np.array([1, 0], dtype=complex), np.array([1, 0], dtype=complex)
    # sigma_z x sigma_z on |00> is an eigenvector: coupled H, C = 0
    h = kron(SZ, SZ) + kron(random_hermitian(2, rng), np.eye(2))
    if coupling_coefficient(h, pa, pb) > 1e-14:
        return
    va, vb = effective_generators(h, pa, pb)
    assert np.max(np.abs(h @ np.kron(pa, pb) - np.kron(va, pb) - np.kron(pa, vb))) <= 1e-10


def test_mean_field_frozen_for_sigma_zz():
    mf = propagate_mean_field(zz_schedule(), MeanFieldState(PLUS, PLUS), 0.01)
    assert np.allclose(np.abs(mf.psi_a @ PLUS.conj()), 1, atol=1e-14)
    assert np.allclose(np.abs(mf.psi_b @ PLUS.conj()), 1, atol=1e-14)


def test_mean_field_zero_h_constant(rng):
    pa, pb = random_state(3, rng), random_state(2, rng)
    mf = propagate_mean_field(HamiltonianSchedule.constant(np.zeros((6, 6)), 0.1),
                              MeanFieldState(pa, pb), 0.01)
    assert np.allclose(mf.psi_a[-1], pa) and np.allclose(mf.psi_b[-1], pb)


def test_mean_field_step_size_error(rng):
    h = 50 * random_hermitian(4, rng)
    with pytest.raises(StepSizeError):
        propagate_mean_field(HamiltonianSchedule.constant(h, 1.0),
                             MeanFieldState(random_state(2, rng), random_state(2, rng)), 0.5)


def test_overlap_fidelity(rng):
    s = random_product_state(2, 2, rng)
    sd = s.matrix
    pa = sd[:, 0] / np.linalg.norm(sd[:, 0])
    pb = sd[0] / np.linalg.norm(sd[0])
    assert overlap_fidelity(pa, pb, s) == pytest.approx(1.0)


def test_fichtre_examples(rng):
    h = random_factorisable_hamiltonian(2, 3, rng)
    assert fichtre_residual(h, random_density(2, rng), random_density(3, rng)) <= 1e-11
    ra, rb = random_density(2, rng), random_density(3, rng)
    assert fichtre_residual(kron(ra, rb), ra, rb) > 1e-3
    with pytest.raises(InvalidDensityError):
        fichtre_residual(h, np.eye(2), np.eye(3) / 3)


def test_fichtre_counterexample_closed_form(rng):
    ra, rb = random_density(2, rng), random_density(3, rng)
    pa, pb = np.trace(ra @ ra).real, np.trace(rb @ rb).real
    expect = np.linalg.norm(kron(ra @ ra - pa * ra, rb @ rb - pb * rb))
    assert fichtre_residual(kron(ra, rb), ra, rb) == pytest.approx(expect, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_fichtre_squared_equals_coupling_for_pure_products(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(6, rng)
    pa, pb = random_state(2, rng), random_state(3, rng)
    r = fichtre_residual(h, np.outer(pa, pa.conj()), np.outer(pb, pb.conj()))
    assert r ** 2 == pytest.approx(coupling_coefficient(h, pa, pb), rel=1e-9, abs=1e-13)


def test_rate_check_sigma_zz():
    rc = purity_rate_check(kron(SZ, SZ), PLUS, PLUS)
    assert rc.analytic_curvature == pytest.approx(-4.0)
    assert rc.curvature_estimate == pytest.approx(-4.0, rel=1e-6)


def test_rate_check_random():
    rng = np.random.default_rng(5)
    rc = purity_rate_check(random_hermitian(9, rng), random_state(3, rng), random_state(3, rng))
    assert abs(rc.curvature_estimate / rc.analytic_curvature - 1) <= 1e-4
    assert abs(rc.first_derivative_slope - 2) <= 0.2


def test_rate_check_factorisable(rng):
    rc = purity_rate_check(random_factorisable_hamiltonian(3, 3, rng), random_state(3, rng),
                           random_state(3, rng))
    assert rc.analytic_curvature == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(rc.first_derivative)) <= 1e-10
    assert abs(rc.curvature_estimate) <= 1e-10 / 0.005 ** 2 * 1e-4


def test_rate_check_validation():
    with pytest.raises(ValueError):
        purity_rate_check(kron(SZ, SZ), PLUS, PLUS, dts=(0.1,))
    with pytest.raises(ValueError):
        purity_rate_check(kron(SZ, SZ), PLUS, PLUS, dts=(0.1, 0.03))


def test_necessary_probe_finds_coupling():
    rng = np.random.default_rng(3)
    res = necessary_direction_probe(kron(SZ, SZ), 2, 2, rng)
    assert res.found and res.best_coupling > 1e-6
    res = necessary_direction_probe(random_factorisable_hamiltonian(2, 2, rng), 2, 2, rng,
                                    max_trials=20)
    assert not res.found and res.trials == 20
