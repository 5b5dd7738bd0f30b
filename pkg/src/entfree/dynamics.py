"""Time evolution of finite bipartite systems and the instruments built on it.

All propagators use piecewise-constant Hamiltonian schedules, so each
segment's one-step propagator exp(-i dt H / hbar) is exact and computed once.
"""
from dataclasses import dataclass, field

import numpy as np

from .bipartite import (
    BipartiteState,
    coupling_coefficient,
    factorise_hamiltonian,
    reduced_density,
)
from .numerics import (
    DimensionError,
    check_hermitian,
    hermitian_expm,
    hs_norm,
    kron,
    normalize,
    partial_trace,
    random_hermitian,
    random_state,
)

DEFAULT_SEED = 20240611
SEGMENT_TOL = 1e-9


class StepSizeError(RuntimeError):
    """Integrator step too large for the requested accuracy."""


class InvalidDensityError(ValueError):
    pass


@dataclass(frozen=True)
class HamiltonianSchedule:
    """Piecewise-constant H(t): a list of ``(duration, H)`` segments."""

    segments: tuple

    def __post_init__(self):
        segs = []
        dim = None
        for duration, h in self.segments:
            if not duration > 0:
                raise ValueError(f"segment duration must be positive, got {duration}")
            h = check_hermitian(h)
            if dim is None:
                dim = h.shape[0]
            elif h.shape[0] != dim:
                raise DimensionError("all schedule segments must share one dimension")
            segs.append((float(duration), h))
        if not segs:
            raise ValueError("schedule needs at least one segment")
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def constant(cls, h, duration):
        return cls(((duration, h),))

    @property
    def dim(self):
        return self.segments[0][1].shape[0]

    @property
    def duration(self):
        return sum(d for d, _ in self.segments)

    def steps(self, dt):
        """Yield ``(n_steps, H)`` per segment, checking dt divides each duration."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        for duration, h in self.segments:
            n = int(round(duration / dt))
            if n < 1 or abs(n * dt - duration) > SEGMENT_TOL:
                raise ValueError(f"dt={dt} does not divide segment duration {duration}")
            yield n, h


@dataclass
class EvolutionTrace:
    times: np.ndarray
    purity: np.ndarray
    schmidt_top2: np.ndarray
    coupling_C: np.ndarray
    fichtre_residual: np.ndarray
    fidelity_vs_meanfield: np.ndarray
    states: np.ndarray = field(default=None, repr=False)

    COLUMNS = (
        "t",
        "purity",
        "schmidt1",
        "schmidt2",
        "coupling_C",
        "fichtre_residual",
        "fidelity_meanfield",
    )

    def rows(self):
        for k in range(len(self.times)):
            yield (
                self.times[k],
                self.purity[k],
                self.schmidt_top2[k, 0],
                self.schmidt_top2[k, 1],
                self.coupling_C[k],
                self.fichtre_residual[k],
                self.fidelity_vs_meanfield[k],
            )


@dataclass(frozen=True)
class MeanFieldState:
    psi_a: np.ndarray
    psi_b: np.ndarray
    time: float = 0.0

    def product(self):
        return np.kron(self.psi_a, self.psi_b)


@dataclass
class MeanFieldTrace:
    times: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray

    def state(self, k):
        return MeanFieldState(self.psi_a[k], self.psi_b[k], self.times[k])


@dataclass
class DensityTrace:
    times: np.ndarray
    rhos: np.ndarray


def effective_generators(h, psi_a, psi_b):
    """Mean-field drive vectors (v_A, v_B) for the product psi_a x psi_b.

    v_A contracts H(psi_a x psi_b) against psi_b; v_B contracts against psi_a
    and removes the total energy <H>, so that
    v_A x psi_b + psi_a x v_B = H (psi_a x psi_b) whenever H does not couple
    the product to bi-orthogonal states.
    """
    psi_a = np.asarray(psi_a, dtype=np.complex128)
    psi_b = np.asarray(psi_b, dtype=np.complex128)
    d_a, d_b = psi_a.size, psi_b.size
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"H of shape {h.shape} does not act on {d_a}x{d_b}")
    m = (h @ np.outer(psi_a, psi_b).reshape(-1)).reshape(d_a, d_b)
    v_a = m @ psi_b.conj()
    energy = psi_a.conj() @ v_a
    v_b = psi_a.conj() @ m - energy * psi_b
    return v_a, v_b


def _check_density(rho, dim=None, tol=1e-10):
    rho = check_hermitian(rho, tol)
    if dim is not None and rho.shape[0] != dim:
        raise DimensionError(f"density matrix of size {rho.shape[0]}, expected {dim}")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvalidDensityError(f"trace {np.trace(rho).real!r} != 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -tol:
        raise InvalidDensityError("density matrix is not positive semidefinite")
    return rho


def fichtre_residual(h, rho_a, rho_b):
    """Hilbert-Schmidt norm of the factorisation defect of H on rho_a x rho_b.

    Evaluates || H rho - (Tr_B H rho) x rho_b - rho_a x (Tr_A H rho - Tr(H rho) rho_b) ||
    with rho = rho_a x rho_b. Zero means the product form is preserved to
    first order by the mean-field generators.
    """
    rho_a = _check_density(rho_a)
    rho_b = _check_density(rho_b)
    d_a, d_b = rho_a.shape[0], rho_b.shape[0]
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (d_a * d_b, d_a * d_b):
        raise DimensionError(f"H of shape {h.shape} does not act on {d_a}x{d_b}")
    return _residual(h, rho_a, rho_b)


def _residual(h, rho_a, rho_b):
    d_a, d_b = rho_a.shape[0], rho_b.shape[0]
    x = h @ kron(rho_a, rho_b)
    eff_a = partial_trace(x, "B", d_a, d_b)
    eff_b = partial_trace(x, "A", d_a, d_b) - np.trace(x) * rho_b
    return hs_norm(x - kron(eff_a, rho_b) - kron(rho_a, eff_b))


def overlap_fidelity(psi_a, psi_b, state):
    """|<psi_a x psi_b | state>|^2."""
    amp = psi_a.conj() @ state.matrix @ psi_b.conj()
    return float(abs(amp) ** 2)


def _rk4_step(h, psi_a, psi_b, dt, hbar):
    c = -1j / hbar

    def f(a, b):
        va, vb = effective_generators(h, a, b)
        return c * va, c * vb

    k1a, k1b = f(psi_a, psi_b)
    k2a, k2b = f(psi_a + 0.5 * dt * k1a, psi_b + 0.5 * dt * k1b)
    k3a, k3b = f(psi_a + 0.5 * dt * k2a, psi_b + 0.5 * dt * k2b)
    k4a, k4b = f(psi_a + dt * k3a, psi_b + dt * k3b)
    a = psi_a + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
    b = psi_b + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
    return a, b


def propagate_mean_field(schedule, mf0, dt, hbar=1.0, max_norm_drift=1e-6):
    """Integrate i hbar d/dt psi_X = v_X with RK4, renormalising each factor.

    Raises StepSizeError when a factor's norm drifts by more than
    ``max_norm_drift`` within one step.
    """
    a = normalize(mf0.psi_a)
    b = normalize(mf0.psi_b)
    if a.size * b.size != schedule.dim:
        raise DimensionError("mean-field state does not match the schedule dimension")
    t = mf0.time
    times, traj_a, traj_b = [t], [a], [b]
    for n, h in schedule.steps(dt):
        for _ in range(n):
            a, b = _rk4_step(h, a, b, dt, hbar)
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            drift = max(abs(na - 1.0), abs(nb - 1.0))
            if drift > max_norm_drift:
                raise StepSizeError(
                    f"mean-field norm drift {drift:.2e} at t={t:.6g}; reduce dt"
                )
            a, b = a / na, b / nb
            t += dt
            times.append(t)
            traj_a.append(a)
            traj_b.append(b)
    return MeanFieldTrace(np.array(times), np.array(traj_a), np.array(traj_b))


def _observe(h, state):
    u, s, vh = np.linalg.svd(state.matrix)
    top = np.zeros(2)
    top[: min(2, s.size)] = s[:2]
    l1, r1 = u[:, 0], vh[0]
    rho_a = reduced_density(state, "A")
    rho_b = reduced_density(state, "B")
    return (
        float(np.sum(s ** 4)),
        top,
        coupling_coefficient(h, l1, r1),
        _residual(h, 0.5 * (rho_a + rho_a.conj().T), 0.5 * (rho_b + rho_b.conj().T)),
    )


def _observe_purity(h, state):
    s = np.linalg.svd(state.matrix, compute_uv=False)
    top = np.zeros(2)
    top[: min(2, s.size)] = s[:2]
    return float(np.sum(s ** 4)), top, np.nan, np.nan


def propagate_exact(schedule, psi0, dt, hbar=1.0, meanfield=True, store_states=False,
                    observables="full"):
    """Exact Schroedinger propagation of a bipartite pure state.

    Every step applies exp(-i dt H / hbar). Observables are sampled at
    t=0 and after every step. With ``meanfield`` the product ansatz seeded by
    the leading Schmidt pair of ``psi0`` is integrated alongside and its
    overlap with the exact state is recorded. ``observables="purity"``
    records only purity and Schmidt coefficients; the coupling and residual
    columns are then NaN.
    """
    if observables not in ("full", "purity"):
        raise ValueError("observables must be 'full' or 'purity'")
    observe = _observe if observables == "full" else _observe_purity
    if psi0.d_a * psi0.d_b != schedule.dim:
        raise DimensionError(
            f"state dimension {psi0.d_a * psi0.d_b} != schedule dimension {schedule.dim}"
        )
    d_a, d_b = psi0.d_a, psi0.d_b
    mf = None
    if meanfield:
        u, _, vh = np.linalg.svd(psi0.matrix)
        mf = propagate_mean_field(schedule, MeanFieldState(u[:, 0], vh[0]), dt, hbar)

    def fidelity(k, state):
        if mf is None:
            return np.nan
        return overlap_fidelity(mf.psi_a[k], mf.psi_b[k], state)

    psi = psi0.amplitudes.copy()
    times, states = [0.0], [psi.copy()]
    obs = [observe(schedule.segments[0][1], psi0) + (fidelity(0, psi0),)]
    t = 0.0
    for n, h in schedule.steps(dt):
        u_step = hermitian_expm(h, -dt / hbar)
        for _ in range(n):
            psi = u_step @ psi
            t += dt
            times.append(t)
            # norm drifts only at roundoff level; renormalise for the type check
            state = BipartiteState(d_a, d_b, psi / np.linalg.norm(psi))
            obs.append(observe(h, state) + (fidelity(len(times) - 1, state),))
            if store_states:
                states.append(psi.copy())

    pur, top2, cc, fr, fid = zip(*obs)
    return EvolutionTrace(
        np.array(times),
        np.array(pur),
        np.array(top2),
        np.array(cc),
        np.array(fr),
        np.array(fid),
        np.array(states) if store_states else None,
    )


def propagate_density(schedule, rho0, dt, hbar=1.0):
    """von Neumann propagation rho -> U rho U^H with U = exp(-i dt H / hbar)."""
    rho = _check_density(rho0, schedule.dim)
    times, rhos = [0.0], [rho.copy()]
    t = 0.0
    for n, h in schedule.steps(dt):
        u = hermitian_expm(h, -dt / hbar)
        ud = u.conj().T
        for _ in range(n):
            rho = u @ rho @ ud
            t += dt
            times.append(t)
            rhos.append(rho)
    return DensityTrace(np.array(times), np.array(rhos))


@dataclass
class RateCheck:
    dts: np.ndarray
    first_derivative: np.ndarray
    second_derivative: np.ndarray
    curvature_estimate: float
    analytic_curvature: float
    coupling: float
    first_derivative_slope: float


def _purity_after(h, psi, s, hbar, d_a, d_b):
    out = hermitian_expm(h, -s / hbar) @ psi
    sv = np.linalg.svd(out.reshape(d_a, d_b), compute_uv=False)
    return float(np.sum(sv ** 4) / np.sum(sv ** 2) ** 2)


def purity_rate_check(h, psi_a, psi_b, hbar=1.0, dts=(0.01, 0.005, 0.0025, 0.00125)):
    """Finite-difference probe of purity decay at a product state.

    Central differences of P(t) = Tr rho_A(t)^2 around t=0 at each step in
    ``dts`` (descending by factors of two) give the first derivative, which
    must vanish, and the curvature, whose two-level Richardson extrapolation
    over the two smallest steps is compared with -4 C / hbar^2.
    """
    dts = np.asarray(dts, dtype=float)
    if dts.size < 2 or np.any(dts <= 0):
        raise ValueError("need at least two positive step sizes")
    if not np.allclose(dts[:-1] / dts[1:], 2.0, rtol=1e-12, atol=0):
        raise ValueError("step sizes must descend by factors of two")
    psi_a = normalize(psi_a)
    psi_b = normalize(psi_b)
    d_a, d_b = psi_a.size, psi_b.size
    h = check_hermitian(h)
    psi = np.kron(psi_a, psi_b)
    p0 = 1.0
    d1, d2 = [], []
    for s in dts:
        pp = _purity_after(h, psi, s, hbar, d_a, d_b)
        pm = _purity_after(h, psi, -s, hbar, d_a, d_b)
        d1.append((pp - pm) / (2 * s))
        d2.append((pp - 2 * p0 + pm) / s ** 2)
    d1 = np.array(d1)
    d2 = np.array(d2)
    curvature = (4.0 * d2[-1] - d2[-2]) / 3.0
    c = coupling_coefficient(h, psi_a, psi_b)
    mag = np.abs(d1)
    if np.all(mag > 0):
        slope = float(np.polyfit(np.log(dts), np.log(mag), 1)[0])
    else:
        slope = float("nan")
    return RateCheck(dts, d1, d2, float(curvature), -4.0 * c / hbar ** 2, c, slope)


def random_factorisable_hamiltonian(d_a, d_b, rng, scale=1.0):
    h_a = random_hermitian(d_a, rng, scale)
    h_b = random_hermitian(d_b, rng, scale)
    return kron(h_a, np.eye(d_b)) + kron(np.eye(d_a), h_b)


def random_factorisable_schedule(d_a, d_b, rng, n_segments=4, total=1.0):
    """Piecewise-constant schedule whose every segment has the form H_A x I + I x H_B."""
    duration = total / n_segments
    return HamiltonianSchedule(
        tuple(
            (duration, random_factorisable_hamiltonian(d_a, d_b, rng))
            for _ in range(n_segments)
        )
    )


def random_product_state(d_a, d_b, rng):
    return BipartiteState.product(random_state(d_a, rng), random_state(d_b, rng))


@dataclass
class ProbeResult:
    found: bool
    trials: int
    best_coupling: float
    coupling_norm: float


def necessary_direction_probe(h, d_a, d_b, rng, max_trials=200, threshold=1e-6):
    """Random search for a product state that H couples to bi-orthogonal states."""
    norm = factorise_hamiltonian(h, d_a, d_b).coupling_norm
    best = 0.0
    for k in range(1, max_trials + 1):
        c = coupling_coefficient(h, random_state(d_a, rng), random_state(d_b, rng))
        best = max(best, c)
        if c > threshold:
            return ProbeResult(True, k, best, norm)
    return ProbeResult(False, max_trials, best, norm)
