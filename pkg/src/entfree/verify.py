"""Registry of verification checks run by ``entfree verify``.

Every entry is a named function returning a list of Check records. The
names are stable identifiers used by ``--filter``; check names are prefixed
with the entry name. All randomness comes from ``numpy.random.default_rng``
seeded with ``DEFAULT_SEED`` plus a fixed per-entry offset.
"""
import fnmatch
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import scenarios
from .bipartite import (
    CNOT,
    SWAP,
    BipartiteState,
    UnitaryTag,
    classify_unitary_2q,
    factorise_hamiltonian,
)
from .dynamics import (
    DEFAULT_SEED,
    HamiltonianSchedule,
    fichtre_residual,
    necessary_direction_probe,
    propagate_density,
    propagate_exact,
    purity_rate_check,
    random_factorisable_schedule,
    random_product_state,
)
from .numerics import hermitian_expm, kron, random_density, random_hermitian, random_state, random_unitary
from .report import Check, RunReport

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PLUS = np.array([1, 1], dtype=np.complex128) / np.sqrt(2)

REGISTRY = {}


def register(name):
    def deco(fn):
        REGISTRY[name] = fn
        return fn
    return deco


def _rng(offset):
    return np.random.default_rng(DEFAULT_SEED + offset)


# ---------------------------------------------------------------- finite checks


@register("purity_rate_law")
def check_purity_rate_law():
    rng = _rng(1)
    rel_errors, slopes = [], []
    for _ in range(20):
        h = random_hermitian(9, rng)
        rc = purity_rate_check(h, random_state(3, rng), random_state(3, rng))
        rel_errors.append(abs(rc.curvature_estimate - rc.analytic_curvature)
                          / abs(rc.analytic_curvature))
        slopes.append(rc.first_derivative_slope)
    worst_slope = max(slopes, key=lambda s: abs(s - 2.0))
    return [
        Check("purity_rate_law.max_curvature_rel_error", max(rel_errors), 1e-4, "<="),
        Check("purity_rate_law.worst_first_derivative_slope", worst_slope, 0.2, "abs<=", 2.0),
    ]


@register("factorisable_purity_invariance")
def check_factorisable_purity_invariance():
    rng = _rng(2)
    lowest = 1.0
    for _ in range(50):
        d_a, d_b = 3, 3
        sched = random_factorisable_schedule(d_a, d_b, rng, n_segments=4, total=1.0)
        tr = propagate_exact(sched, random_product_state(d_a, d_b, rng), 1e-3,
                             meanfield=False, observables="purity")
        lowest = min(lowest, float(tr.purity.min()))
    return [Check("factorisable_purity_invariance.min_purity", lowest, 1.0 - 1e-9, ">=")]


@register("coupling_probe")
def check_coupling_probe():
    rng = _rng(3)
    found, tested, worst = 0, 0, np.inf
    while tested < 20:
        h = random_hermitian(9, rng)
        if factorise_hamiltonian(h, 3, 3).coupling_norm <= 0.1:
            continue
        tested += 1
        res = necessary_direction_probe(h, 3, 3, rng, max_trials=200, threshold=1e-6)
        found += res.found
        worst = min(worst, res.best_coupling)
    return [
        Check("coupling_probe.cases_found", found, 20, "=="),
        Check("coupling_probe.min_best_coupling", worst, 1e-6, ">"),
    ]


@register("theorem0_classifier")
def check_theorem0_classifier():
    rng = _rng(4)
    wrong_local = 0
    for _ in range(100):
        h_a = random_hermitian(2, rng)
        h_b = random_hermitian(2, rng)
        s = rng.uniform(-3.0, 3.0)
        u = hermitian_expm(kron(h_a, np.eye(2)) + kron(np.eye(2), h_b), s)
        wrong_local += classify_unitary_2q(u).tag is not UnitaryTag.LOCAL
    wrong_comp = 0
    for _ in range(20):
        u = kron(random_unitary(2, rng), random_unitary(2, rng)) @ SWAP
        wrong_comp += classify_unitary_2q(u).tag is not UnitaryTag.SWAP_LOCAL
    return [
        Check("theorem0_classifier.local_misclassified", wrong_local, 0, "=="),
        Check("theorem0_classifier.swap_misclassified",
              int(classify_unitary_2q(SWAP).tag is not UnitaryTag.SWAP_LOCAL), 0, "=="),
        Check("theorem0_classifier.cnot_misclassified",
              int(classify_unitary_2q(CNOT).tag is not UnitaryTag.ENTANGLING), 0, "=="),
        Check("theorem0_classifier.local_swap_misclassified", wrong_comp, 0, "=="),
    ]


def sigma_zz_trace(t_final=1.0, dt=0.01):
    h = kron(SIGMA_Z, SIGMA_Z)
    psi0 = BipartiteState.product(PLUS, PLUS)
    return propagate_exact(HamiltonianSchedule.constant(h, t_final), psi0, dt)


@register("sigma_zz_closed_form")
def check_sigma_zz():
    tr = sigma_zz_trace()
    t = tr.times
    purity_err = np.max(np.abs(tr.purity - (1.0 - np.sin(2 * t) ** 2 / 2)))
    fid_err = np.max(np.abs(tr.fidelity_vs_meanfield - np.cos(t) ** 2))
    # frozen mean field: overlap of the ansatz with |++> stays 1
    from .dynamics import MeanFieldState, propagate_mean_field
    mf = propagate_mean_field(HamiltonianSchedule.constant(kron(SIGMA_Z, SIGMA_Z), 1.0),
                              MeanFieldState(PLUS, PLUS), 0.01)
    drift = max(np.max(1 - np.abs(mf.psi_a @ PLUS.conj()) ** 2),
                np.max(1 - np.abs(mf.psi_b @ PLUS.conj()) ** 2))
    return [
        Check("sigma_zz_closed_form.samples", len(t), 100, ">="),
        Check("sigma_zz_closed_form.purity_error", purity_err, 1e-8, "<="),
        Check("sigma_zz_closed_form.meanfield_drift", drift, 1e-12, "<="),
        Check("sigma_zz_closed_form.fidelity_error", fid_err, 1e-8, "<="),
    ]


def _nonuniform_mixed(d, rng):
    """Full-rank density matrix with clearly distinct eigenvalues."""
    w = np.sort(rng.uniform(0.1, 1.0, d))
    w = w / w.sum()
    u = random_unitary(d, rng)
    return (u * w) @ u.conj().T


@register("mixed_product_residual")
def check_mixed_product_residual():
    rng = _rng(6)
    worst = 0.0
    for _ in range(20):
        d_a, d_b = 3, 3
        h = (kron(random_hermitian(d_a, rng), np.eye(d_b))
             + kron(np.eye(d_a), random_hermitian(d_b, rng)))
        rho_a = random_density(d_a, rng)
        rho_b = random_density(d_b, rng)
        worst = max(worst, fichtre_residual(h, rho_a, rho_b))
    rho_a = _nonuniform_mixed(3, rng)
    rho_b = _nonuniform_mixed(3, rng)
    h = kron(rho_a, rho_b)
    rho = kron(rho_a, rho_b)
    dens = propagate_density(HamiltonianSchedule.constant(h, 1.0), rho, 0.01)
    drift = max(float(np.linalg.norm(r - rho)) for r in dens.rhos)
    return [
        Check("mixed_product_residual.factorisable_max_residual", worst, 1e-11, "<="),
        Check("mixed_product_residual.counterexample_stationary_drift", drift, 1e-10, "<="),
        Check("mixed_product_residual.counterexample_residual", fichtre_residual(h, rho_a, rho_b),
              1e-3, ">"),
    ]


# ---------------------------------------------------------------- continuum checks


@register("continuum_cm_separability")
def check_cm():
    res = scenarios.cm_scenario()
    return [
        Check("continuum_cm_separability.l2_error", res.l2_error, 5e-3, "<="),
        Check("continuum_cm_separability.final_entropy", res.entropy_ab[-1], 0.1, ">="),
    ]


@register("continuum_test_particle")
def check_test_particle():
    res = scenarios.test_particle_default()
    return [
        Check("continuum_test_particle.final_entropy_heavy", res.final_entropy, 0.05, "<="),
        Check("continuum_test_particle.entropy_gap_vs_equal_mass",
              res.equal_mass_final_entropy - res.final_entropy, 0.0, ">"),
    ]


@register("continuum_classical")
def check_classical():
    res = scenarios.classical_scenario()
    return [
        Check("continuum_classical.linearized_mean_deviation", res.linearized_deviation,
              2 * res.dx, "<="),
        Check("continuum_classical.exact_mean_deviation", res.exact_deviation, 2 * res.dx, "<="),
        Check("continuum_classical.exact_final_entropy", res.exact_final_entropy, 0.05, "<="),
    ]


@register("continuum_hartree")
def check_hartree():
    sweep = scenarios.hartree_sweep()
    fids = [r.fidelity for r in sweep]
    steps = np.diff(fids)
    res = scenarios.hartree_residuals()
    return [
        Check("continuum_hartree.weak_fidelity", fids[0], 0.99, ">="),
        Check("continuum_hartree.weak_exact_entropy", sweep[0].exact_entropy, 0.01, "<="),
        Check("continuum_hartree.largest_fidelity_step", float(np.max(steps)), 0.0, "<"),
        Check("continuum_hartree.max_energy_drift", max(r.energy_drift for r in sweep),
              1e-5, "<="),
        Check("continuum_hartree.max_norm_drift", max(r.norm_drift for r in sweep), 1e-8, "<="),
        Check("continuum_hartree.residual_separable", res["separable"], 1e-12, "<="),
        Check("continuum_hartree.residual_overlapping", res["overlapping"], 0.0, ">"),
        Check("continuum_hartree.residual_distant", res["distant"], 1e-8, "<="),
    ]


# ---------------------------------------------------------------- hygiene


@register("hygiene")
def check_hygiene():
    rng = _rng(11)
    # finite: unitary propagation keeps the norm
    h = random_hermitian(9, rng)
    psi = random_product_state(3, 3, rng).amplitudes
    u = hermitian_expm(h, -1e-3)
    finite_dev = 0.0
    for _ in range(1000):
        psi = u @ psi
        finite_dev = max(finite_dev, abs(np.linalg.norm(psi) - 1.0))
    grid_dev, e_drift = scenarios.grid_norm_and_energy()
    _, orders = scenarios.refinement_order()
    return [
        Check("hygiene.finite_norm_deviation", finite_dev, 1e-10, "<="),
        Check("hygiene.grid_norm_deviation", grid_dev, 1e-10, "<="),
        Check("hygiene.energy_drift_relative", e_drift, 1e-6, "<="),
        Check("hygiene.refinement_order", orders[-1], 0.3, "abs<=", 2.0),
        Check("hygiene.rerun_identical", int(not rerun_identical()), 0, "=="),
    ]


def rerun_identical():
    """Run a seeded finite preset twice and compare the CSV bytes."""
    from .cli import load_preset, run_scenario

    cfg = load_preset("factorisable_invariance")
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            out = os.path.join(tmp, str(k))
            rep = run_scenario(cfg, output_dir=out)
            csv_path = [p for p in rep.outputs if p.endswith(".csv")][0]
            with open(csv_path, "rb") as fh:
                blobs.append(fh.read())
    return blobs[0] == blobs[1]


# ---------------------------------------------------------------- driver


def select(pattern=None):
    """Entry names matching ``pattern`` (glob if it has wildcards, else substring)."""
    names = list(REGISTRY)
    if not pattern:
        return names
    if any(ch in pattern for ch in "*?["):
        return [n for n in names if fnmatch.fnmatchcase(n, pattern)]
    return [n for n in names if pattern in n]


def verify_suite(pattern=None, jobs=1):
    """Run the selected entries and assemble one report in registry order."""
    names = select(pattern)
    report = RunReport("verify" if not pattern else f"verify[{pattern}]")
    if not names:
        report.warnings.append(f"filter {pattern!r} matched no checks")
        return report
    t0 = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda n: REGISTRY[n](), names))
    else:
        results = [REGISTRY[n]() for n in names]
    for checks in results:
        report.checks.extend(checks)
    report.wall_time = time.perf_counter() - t0
    return report
