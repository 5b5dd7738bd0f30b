"""Two distinguishable particles on a 1D grid.

Wavefunctions live on periodic grids and are propagated with second-order
Strang splitting: half potential kick, full kinetic step in Fourier space,
half potential kick. Amplitudes are normalised so that
``sum |psi|^2 * dx == 1`` (per axis for 2D arrays).

Besides the exact two-body solver this module provides the three product
approximations of the continuum regime: center-of-mass separation,
linearised (classical) interaction with a Newtonian reference, and
time-dependent Hartree.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy.signal import fftconvolve

from . import kernels

GRID_MIN_POINTS = 64
GRID_MAX_POINTS = 1024
CFL_LIMIT = 0.5
BOUNDARY_WIDTHS = 5.0

POTENTIAL_KINDS = ("gaussian_bump", "soft_coulomb", "harmonic", "linearized")


class PreconditionError(ValueError):
    """A numerical precondition (step size, resolution, geometry) is violated."""


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class Grid1D:
    n: int
    x_min: float
    dx: float

    def __post_init__(self):
        n = int(self.n)
        if n & (n - 1) or not GRID_MIN_POINTS <= n <= GRID_MAX_POINTS:
            raise ValueError(f"grid size must be a power of two in [64, 1024], got {n}")
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    @classmethod
    def centered(cls, n, length, center=0.0):
        return cls(n, center - 0.5 * length, length / n)

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def length(self):
        return self.n * self.dx

    @property
    def k(self):
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def k_max(self):
        return np.pi / self.dx


@dataclass
class Wave1D:
    """A single-particle wavefunction sampled on a grid."""

    grid: Grid1D
    values: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n,):
            raise ValueError("values do not match the grid")

    def norm(self):
        return float(np.sqrt(kernels.abs2_sum(self.values) * self.grid.dx))

    def density(self):
        return np.abs(self.values) ** 2

    def mean_x(self):
        return float(np.sum(self.density() * self.grid.x) * self.grid.dx / self.norm() ** 2)

    def width(self):
        x = self.grid.x
        rho = self.density() * self.grid.dx / self.norm() ** 2
        mu = np.sum(rho * x)
        return float(np.sqrt(max(np.sum(rho * (x - mu) ** 2), 0.0)))

    def mean_p(self, hbar=1.0):
        return spectral_mean_momentum(self.values, self.grid, hbar)

    def copy(self):
        return Wave1D(self.grid, self.values.copy(), self.mass)


def spectral_mean_momentum(values, grid, hbar=1.0):
    """<p> from the discrete Fourier transform of ``values``."""
    phi = np.fft.fft(values)
    w = np.abs(phi) ** 2
    return float(hbar * np.sum(w * grid.k) / np.sum(w))


def init_gaussian(grid, x0, p0, width, hbar=1.0):
    """Normalised Gaussian packet with position spread ``width`` and mean momentum ``p0``."""
    if width < 2 * grid.dx:
        raise PreconditionError(f"width {width} under-resolved (dx={grid.dx})")
    lo = grid.x_min + BOUNDARY_WIDTHS * width
    hi = grid.x_min + (grid.n - 1) * grid.dx - BOUNDARY_WIDTHS * width
    if not lo <= x0 <= hi:
        raise PreconditionError(
            f"packet at {x0} with width {width} is closer than {BOUNDARY_WIDTHS:g} widths to the boundary"
        )
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4 * width ** 2) + 1j * p0 * (x - x0) / hbar)
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)


# ---------------------------------------------------------------- potentials


def _profile(kind, strength, rng, r):
    if kind == "gaussian_bump":
        return strength * np.exp(-(r ** 2) / (2 * rng ** 2))
    if kind == "soft_coulomb":
        return strength / np.sqrt(r ** 2 + rng ** 2)
    if kind == "harmonic":
        return 0.5 * strength * (r / rng) ** 2
    raise ValueError(f"no radial profile for kind {kind!r}")


def _profile_derivative(kind, strength, rng, r):
    if kind == "gaussian_bump":
        return -strength * r / rng ** 2 * np.exp(-(r ** 2) / (2 * rng ** 2))
    if kind == "soft_coulomb":
        return -strength * r / (r ** 2 + rng ** 2) ** 1.5
    if kind == "harmonic":
        return strength * r / rng ** 2
    raise ValueError(f"no radial profile for kind {kind!r}")


@dataclass(frozen=True)
class PotentialSpec:
    """Interaction V_AB(x_A - x_B) plus optional external fields.

    ``external_a`` / ``external_b`` are themselves PotentialSpecs evaluated at
    ``x - center``. The ``linearized`` kind stores the expansion point
    ``(ref_a, ref_b)`` and the ``base`` potential it was expanded from.
    """

    kind: str = "gaussian_bump"
    strength: float = 0.0
    range: float = 1.0
    center: float = 0.0
    external_a: Optional["PotentialSpec"] = None
    external_b: Optional["PotentialSpec"] = None
    base: Optional["PotentialSpec"] = None
    ref_a: float = 0.0
    ref_b: float = 0.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not self.range > 0:
            raise ValueError("potential range must be positive")
        if self.kind == "linearized" and self.base is None:
            raise ValueError("linearized potential needs a base potential")

    @property
    def translation_invariant(self):
        return self.kind != "linearized"

    @property
    def is_zero(self):
        return self.kind != "linearized" and self.strength == 0.0

    def value(self, r):
        """V(r) for the pair separation (or position, for external fields) ``r``."""
        if self.kind == "linearized":
            raise ValueError("linearized potential is not a function of x_A - x_B")
        return _profile(self.kind, self.strength, self.range, np.asarray(r) - self.center)

    def derivative(self, r):
        if self.kind == "linearized":
            raise ValueError("linearized potential is not a function of x_A - x_B")
        return _profile_derivative(self.kind, self.strength, self.range, np.asarray(r) - self.center)

    def linearized_about(self, ref_a, ref_b):
        base = self.base if self.kind == "linearized" else self
        return replace(self, kind="linearized", base=base, ref_a=float(ref_a), ref_b=float(ref_b))

    def linear_terms(self):
        """(constant, slope_a, slope_b) of the linearised interaction."""
        d = self.ref_a - self.ref_b
        v0 = float(self.base.value(d))
        f = float(self.base.derivative(d))
        return v0, f, -f

    def pair(self, xa, xb):
        """Interaction matrix V_AB(xa[i], xb[j])."""
        xa = np.asarray(xa, dtype=float)
        xb = np.asarray(xb, dtype=float)
        if self.kind == "linearized":
            v0, fa, fb = self.linear_terms()
            return v0 + fa * (xa - self.ref_a)[:, None] + fb * (xb - self.ref_b)[None, :]
        return self.value(xa[:, None] - xb[None, :])

    def external(self, which, x):
        ext = self.external_a if which == "A" else self.external_b
        x = np.asarray(x, dtype=float)
        if ext is None:
            return np.zeros_like(x)
        return ext.value(x)

    def external_derivative(self, which, x):
        ext = self.external_a if which == "A" else self.external_b
        if ext is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return ext.derivative(x)

    def total(self, grid_a, grid_b):
        """Full potential on the product grid, interaction plus external fields."""
        return (
            self.pair(grid_a.x, grid_b.x)
            + self.external("A", grid_a.x)[:, None]
            + self.external("B", grid_b.x)[None, :]
        )


def absorbing_mask(grid, ramp):
    """Cosine ramp rising from 0 at the edges to 1 at distance ``ramp`` inside."""
    x = grid.x
    d = np.minimum(x - grid.x_min, grid.x_min + (grid.n - 1) * grid.dx - x)
    s = np.clip(d / ramp, 0.0, 1.0)
    return np.sin(0.5 * np.pi * s) ** 0.125


# ---------------------------------------------------------------- two-particle state


@dataclass
class TwoParticleWavefunction:
    grid_a: Grid1D
    grid_b: Grid1D
    amplitudes: np.ndarray
    m_a: float = 1.0
    m_b: float = 1.0

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.grid_a.n, self.grid_b.n):
            raise ValueError("amplitude array does not match the grids")

    @classmethod
    def product(cls, wa, wb):
        return cls(wa.grid, wb.grid, np.outer(wa.values, wb.values), wa.mass, wb.mass)

    @property
    def cell(self):
        return self.grid_a.dx * self.grid_b.dx

    def norm(self):
        return float(np.sqrt(kernels.abs2_sum(self.amplitudes) * self.cell))

    def density_a(self):
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1) * self.grid_b.dx

    def density_b(self):
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0) * self.grid_a.dx

    def mean_a(self):
        rho = self.density_a()
        return float(np.sum(rho * self.grid_a.x) / np.sum(rho))

    def mean_b(self):
        rho = self.density_b()
        return float(np.sum(rho * self.grid_b.x) / np.sum(rho))

    def copy(self):
        return replace(self, amplitudes=self.amplitudes.copy())


def _kinetic_energy_max(grids_masses, hbar):
    return sum((hbar * g.k_max) ** 2 / (2 * m) for g, m in grids_masses)


def check_step(dt, grids_masses, hbar):
    e_max = _kinetic_energy_max(grids_masses, hbar)
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    if dt * e_max / hbar >= CFL_LIMIT:
        raise PreconditionError(
            f"dt*E_max/hbar = {dt * e_max / hbar:.3f} >= {CFL_LIMIT} (E_max={e_max:.4g}); reduce dt"
        )


class SplitStepper2D:
    """Strang propagator for a fixed potential on a product grid.

    ``step`` mutates the array passed in; phases are precomputed once.
    """

    def __init__(self, grid_a, grid_b, m_a, m_b, potential, dt, hbar=1.0, mask=None):
        check_step(dt, [(grid_a, m_a), (grid_b, m_b)], hbar)
        self.dt = dt
        self.hbar = hbar
        self.potential = np.asarray(potential, dtype=float)
        self.half_phase = np.exp(-0.5j * dt / hbar * self.potential)
        ka = grid_a.k[:, None]
        kb = grid_b.k[None, :]
        self.kinetic = hbar ** 2 * (ka ** 2 / (2 * m_a) + kb ** 2 / (2 * m_b))
        self.kin_phase = np.exp(-1j * dt / hbar * self.kinetic)
        self.mask = mask

    def step(self, psi):
        psi *= self.half_phase
        phi = sfft.fft2(psi, overwrite_x=True)
        phi *= self.kin_phase
        psi[...] = sfft.ifft2(phi, overwrite_x=True)
        psi *= self.half_phase
        if self.mask is not None:
            psi *= self.mask
        return psi

    def energy(self, psi, cell):
        phi = sfft.fft2(psi)
        kin = np.sum(np.abs(phi) ** 2 * self.kinetic) / psi.size
        pot = np.sum(np.abs(psi) ** 2 * self.potential)
        nrm = np.sum(np.abs(psi) ** 2)
        return float((kin + pot) / nrm)


def two_body_energy(wf, potential_spec, hbar=1.0):
    """<T_A + T_B + V> of a two-particle state."""
    v = potential_spec.total(wf.grid_a, wf.grid_b)
    ka = wf.grid_a.k[:, None]
    kb = wf.grid_b.k[None, :]
    kinetic = hbar ** 2 * (ka ** 2 / (2 * wf.m_a) + kb ** 2 / (2 * wf.m_b))
    phi = sfft.fft2(wf.amplitudes)
    kin = np.sum(np.abs(phi) ** 2 * kinetic) / wf.amplitudes.size
    pot = np.sum(np.abs(wf.amplitudes) ** 2 * v)
    return float((kin + pot) / np.sum(np.abs(wf.amplitudes) ** 2))


def split_step(wf, potential_spec, dt, hbar=1.0):
    """One Strang step; returns a new TwoParticleWavefunction."""
    stepper = SplitStepper2D(
        wf.grid_a, wf.grid_b, wf.m_a, wf.m_b, potential_spec.total(wf.grid_a, wf.grid_b), dt, hbar
    )
    out = wf.copy()
    stepper.step(out.amplitudes)
    return out


# ---------------------------------------------------------------- entanglement


def schmidt_spectrum(wf):
    """Normalised squared Schmidt coefficients of a grid state (descending)."""
    lam = np.linalg.svd(wf.amplitudes * np.sqrt(wf.cell), compute_uv=False)
    p = lam ** 2
    return p / np.sum(p)


def entropy_from_probabilities(p):
    p = p[p > 0]
    return float(max(-np.sum(p * np.log(p)), 0.0))


def entanglement_entropy(wf):
    """von Neumann entropy (nats) of the A|B partition of ``wf``."""
    return entropy_from_probabilities(schmidt_spectrum(wf))


def matrix_entropy(amplitudes):
    lam = np.linalg.svd(amplitudes, compute_uv=False)
    p = lam ** 2
    return entropy_from_probabilities(p / np.sum(p))


# ---------------------------------------------------------------- exact evolution


@dataclass
class ContinuumTrace:
    """Time series written as the continuum CSV."""

    times: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    mean_xa: list = field(default_factory=list)
    mean_xb: list = field(default_factory=list)
    classical_xa: list = field(default_factory=list)
    classical_xb: list = field(default_factory=list)

    COLUMNS = (
        "t",
        "norm",
        "energy",
        "entropy",
        "mean_xA",
        "mean_xB",
        "classical_xA",
        "classical_xB",
    )

    def append(self, t, norm, energy, entropy, mean_xa, mean_xb, cl_a=np.nan, cl_b=np.nan):
        self.times.append(float(t))
        self.norm.append(float(norm))
        self.energy.append(float(energy))
        self.entropy.append(float(entropy))
        self.mean_xa.append(float(mean_xa))
        self.mean_xb.append(float(mean_xb))
        self.classical_xa.append(float(cl_a))
        self.classical_xb.append(float(cl_b))

    def rows(self):
        return zip(
            self.times,
            self.norm,
            self.energy,
            self.entropy,
            self.mean_xa,
            self.mean_xb,
            self.classical_xa,
            self.classical_xb,
        )

    def as_arrays(self):
        return {name: np.asarray(getattr(self, name)) for name in (
            "times", "norm", "energy", "entropy", "mean_xa", "mean_xb",
            "classical_xa", "classical_xb",
        )}


def n_steps_for(t_final, dt):
    n = int(round(t_final / dt))
    if n < 1 or abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise PreconditionError(f"dt={dt} does not divide t_final={t_final}")
    return n


def evolve(wf, potential_spec, dt, t_final, hbar=1.0, sample_every=None, mask=None,
           with_entropy=True, classical=None):
    """Propagate ``wf`` with the full two-body solver.

    Returns the final state and a ContinuumTrace sampled every
    ``sample_every`` steps (default: ~100 samples). ``classical`` is an
    optional NewtonTrajectory aligned with the same step grid whose
    positions are copied into the trace.
    """
    n = n_steps_for(t_final, dt)
    sample_every = sample_every or max(1, n // 100)
    stepper = SplitStepper2D(
        wf.grid_a, wf.grid_b, wf.m_a, wf.m_b,
        potential_spec.total(wf.grid_a, wf.grid_b), dt, hbar, mask,
    )
    out = wf.copy()
    psi = out.amplitudes
    trace = ContinuumTrace()

    def record(k):
        cl = (classical.xa[k], classical.xb[k]) if classical is not None else (np.nan, np.nan)
        trace.append(
            k * dt,
            out.norm(),
            stepper.energy(psi, out.cell),
            entanglement_entropy(out) if with_entropy else np.nan,
            out.mean_a(),
            out.mean_b(),
            *cl,
        )

    record(0)
    for k in range(1, n + 1):
        stepper.step(psi)
        if k % sample_every == 0 or k == n:
            record(k)
    return out, trace


# ---------------------------------------------------------------- 1D machinery


class SplitStepper1D:
    """Strang propagator for one particle with a potential that may change per step."""

    def __init__(self, grid, mass, dt, hbar=1.0, check=True):
        if check:
            check_step(dt, [(grid, mass)], hbar)
        self.grid = grid
        self.dt = dt
        self.hbar = hbar
        self.kinetic = hbar ** 2 * grid.k ** 2 / (2 * mass)
        self.kin_phase = np.exp(-1j * dt / hbar * self.kinetic)

    def kick(self, psi, potential, fraction=0.5):
        kernels.phase_kick(psi, potential, fraction * self.dt / self.hbar)

    def drift(self, psi):
        psi[...] = sfft.ifft(sfft.fft(psi) * self.kin_phase)

    def step(self, psi, potential):
        self.kick(psi, potential)
        self.drift(psi)
        self.kick(psi, potential)
        return psi

    def kinetic_energy(self, psi):
        phi = sfft.fft(psi)
        return float(np.sum(np.abs(phi) ** 2 * self.kinetic) / psi.size * self.grid.dx)


def propagate_1d(wave, potential, dt, t_final, hbar=1.0):
    """Propagate a Wave1D in a static potential array; returns a new Wave1D."""
    n = n_steps_for(t_final, dt)
    stepper = SplitStepper1D(wave.grid, wave.mass, dt, hbar)
    psi = wave.values.copy()
    half = np.exp(-0.5j * dt / hbar * np.asarray(potential, dtype=float))
    for _ in range(n):
        psi *= half
        stepper.drift(psi)
        psi *= half
    return Wave1D(wave.grid, psi, wave.mass)


# ---------------------------------------------------------------- center of mass


def interp_linear(values, grid, x):
    """Linear interpolation of grid samples at points ``x`` (zero outside the grid)."""
    s = (np.asarray(x, dtype=float) - grid.x_min) / grid.dx
    i0 = np.floor(s).astype(np.int64)
    w = s - i0
    ok = (i0 >= 0) & (i0 <= grid.n - 1)
    i0c = np.clip(i0, 0, grid.n - 1)
    i1c = np.clip(i0 + 1, 0, grid.n - 1)
    inside1 = (i0 + 1 >= 0) & (i0 + 1 <= grid.n - 1)
    v0 = np.where(ok, values[i0c], 0.0)
    v1 = np.where(inside1, values[i1c], 0.0)
    return (1.0 - w) * v0 + w * v1


def interp_bilinear(values, grid_x, grid_y, x, y):
    """Bilinear interpolation of a 2D grid array at scattered points (x, y)."""
    sx = (np.asarray(x, dtype=float) - grid_x.x_min) / grid_x.dx
    sy = (np.asarray(y, dtype=float) - grid_y.x_min) / grid_y.dx
    ix = np.floor(sx).astype(np.int64)
    iy = np.floor(sy).astype(np.int64)
    wx = sx - ix
    wy = sy - iy
    out = np.zeros(np.broadcast(sx, sy).shape, dtype=values.dtype)
    for dx_, fx in ((0, 1.0 - wx), (1, wx)):
        for dy_, fy in ((0, 1.0 - wy), (1, wy)):
            jx = ix + dx_
            jy = iy + dy_
            ok = (jx >= 0) & (jx < grid_x.n) & (jy >= 0) & (jy < grid_y.n)
            v = values[np.clip(jx, 0, grid_x.n - 1), np.clip(jy, 0, grid_y.n - 1)]
            out = out + np.where(ok & (fx * fy != 0), fx * fy * v, 0.0)
    return out


def cm_grids(grid_ab):
    """CM and relative grids whose nodes contain every (x_A, x_B) node pair exactly.

    With equal masses x_CM = (x_A + x_B)/2 lands on a half-spacing grid and
    x_rel = x_A - x_B on a full-spacing grid symmetric about 0.
    """
    n = grid_ab.n
    g_cm = Grid1D(2 * n, grid_ab.x_min, grid_ab.dx / 2)
    g_rel = Grid1D(2 * n, -n * grid_ab.dx, grid_ab.dx)
    return g_cm, g_rel


def from_cm_product(cm, rel, grid_a, grid_b):
    """Two-particle amplitudes of g_CM(X) g_rel(r) sampled on the (x_A, x_B) grid."""
    xa = grid_a.x[:, None]
    xb = grid_b.x[None, :]
    amp = interp_linear(cm.values, cm.grid, 0.5 * (xa + xb)) * interp_linear(rel.values, rel.grid, xa - xb)
    return amp


def to_cm_amplitudes(wf, grid_cm, grid_rel):
    """Sample an equal-mass two-particle state on the (X, r) grid by bilinear interpolation."""
    X = grid_cm.x[:, None]
    r = grid_rel.x[None, :]
    return interp_bilinear(wf.amplitudes, wf.grid_a, wf.grid_b, X + 0.5 * r, X - 0.5 * r)


@dataclass
class ComSeparabilityResult:
    l2_error: float
    times: np.ndarray
    entropy_ab: np.ndarray
    exact: TwoParticleWavefunction = field(repr=False)
    reconstructed: np.ndarray = field(repr=False)


def com_separability_check(cm, rel, potential_spec, t_final, dt, hbar=1.0,
                           grid_a=None, grid_b=None, sample_every=None):
    """Compare CM/relative separated propagation with the full two-body solver.

    ``cm`` and ``rel`` are Wave1D factors carrying masses M = m_A + m_B and
    mu = m_A m_B / M. Only equal masses are supported, where the coordinate
    change is a scaled rotation with unit Jacobian. The interaction acts on
    the relative coordinate only; external fields are not allowed.
    """
    m = 0.5 * cm.mass
    if not np.isclose(rel.mass, m / 2, rtol=1e-12):
        raise PreconditionError(
            f"equal masses required: M={cm.mass} implies mu={m / 2}, got mu={rel.mass}"
        )
    if potential_spec.external_a is not None or potential_spec.external_b is not None:
        raise PreconditionError("CM separation needs a purely relative interaction")
    if grid_a is None:
        grid_a = Grid1D(cm.grid.n // 2, cm.grid.x_min, 2 * cm.grid.dx)
    grid_b = grid_a if grid_b is None else grid_b

    amp0 = from_cm_product(cm, rel, grid_a, grid_b)
    amp0 = amp0 / np.sqrt(np.sum(np.abs(amp0) ** 2) * grid_a.dx * grid_b.dx)
    wf0 = TwoParticleWavefunction(grid_a, grid_b, amp0, m, m)
    exact, trace = evolve(wf0, potential_spec, dt, t_final, hbar, sample_every)

    cm_t = propagate_1d(cm, np.zeros(cm.grid.n), dt, t_final, hbar)
    rel_t = propagate_1d(rel, potential_spec.value(rel.grid.x), dt, t_final, hbar)
    rec = from_cm_product(cm_t, rel_t, grid_a, grid_b)
    diff = exact.amplitudes - rec
    l2 = float(np.sqrt(np.sum(np.abs(diff) ** 2) * exact.cell))
    return ComSeparabilityResult(l2, np.asarray(trace.times), np.asarray(trace.entropy), exact, rec)


# ---------------------------------------------------------------- Hartree


def _offset_kernel(potential_spec, grid_a, grid_b):
    """V at every offset x_A[i] - x_B[j] for i - j = -(n_b - 1) .. n_a - 1."""
    m = np.arange(-(grid_b.n - 1), grid_a.n)
    return potential_spec.value(grid_a.x_min - grid_b.x_min + m * grid_a.dx)


class MeanFieldPotential:
    """Partner-averaged interaction: U_A = int |psi_B|^2 V_AB db and vice versa.

    Uses FFT convolution when the interaction is translation invariant and
    both grids share one spacing, a dense matrix product otherwise.
    """

    def __init__(self, potential_spec, grid_a, grid_b):
        self.spec = potential_spec
        self.grid_a = grid_a
        self.grid_b = grid_b
        self.use_fft = potential_spec.translation_invariant and np.isclose(
            grid_a.dx, grid_b.dx, rtol=1e-12
        )
        if self.use_fft:
            self.kernel = _offset_kernel(potential_spec, grid_a, grid_b)
        else:
            self.matrix = potential_spec.pair(grid_a.x, grid_b.x)

    def on_a(self, rho_b):
        if self.use_fft:
            full = fftconvolve(self.kernel, rho_b)
            return full[self.grid_b.n - 1: self.grid_b.n - 1 + self.grid_a.n] * self.grid_b.dx
        return self.matrix @ rho_b * self.grid_b.dx

    def on_b(self, rho_a):
        if self.use_fft:
            full = fftconvolve(self.kernel[::-1], rho_a)
            return full[self.grid_a.n - 1: self.grid_a.n - 1 + self.grid_b.n] * self.grid_a.dx
        return rho_a @ self.matrix * self.grid_a.dx

    def interaction_energy(self, rho_a, rho_b):
        return float(np.sum(rho_a * self.on_a(rho_b)) * self.grid_a.dx)


@dataclass
class HartreeTrace:
    times: np.ndarray
    energy: np.ndarray
    norm_a: np.ndarray
    norm_b: np.ndarray
    mean_xa: np.ndarray
    mean_xb: np.ndarray
    psi_a: Wave1D = field(repr=False)
    psi_b: Wave1D = field(repr=False)

    def product(self):
        return TwoParticleWavefunction.product(self.psi_a, self.psi_b)


def hartree_energy(psi_a, psi_b, potential_spec, hbar=1.0, mean_field=None):
    mf = mean_field or MeanFieldPotential(potential_spec, psi_a.grid, psi_b.grid)
    sa = SplitStepper1D(psi_a.grid, psi_a.mass, 1.0, hbar, check=False)
    sb = SplitStepper1D(psi_b.grid, psi_b.mass, 1.0, hbar, check=False)
    rho_a = psi_a.density()
    rho_b = psi_b.density()
    e = sa.kinetic_energy(psi_a.values) + sb.kinetic_energy(psi_b.values)
    e += np.sum(rho_a * potential_spec.external("A", psi_a.grid.x)) * psi_a.grid.dx
    e += np.sum(rho_b * potential_spec.external("B", psi_b.grid.x)) * psi_b.grid.dx
    e += mf.interaction_energy(rho_a, rho_b)
    return float(e)


def hartree_propagate(psi_a, psi_b, potential_spec, dt, t_final, hbar=1.0, sample_every=None):
    """Time-dependent Hartree propagation of the product psi_a x psi_b.

    Each particle moves in its external field plus the interaction averaged
    over the partner density. Kicks leave densities unchanged, so each half
    kick is self-consistent; the scheme is symmetric and second order.
    """
    n = n_steps_for(t_final, dt)
    sample_every = sample_every or max(1, n // 100)
    check_step(dt, [(psi_a.grid, psi_a.mass), (psi_b.grid, psi_b.mass)], hbar)
    mf = MeanFieldPotential(potential_spec, psi_a.grid, psi_b.grid)
    sa = SplitStepper1D(psi_a.grid, psi_a.mass, dt, hbar, check=False)
    sb = SplitStepper1D(psi_b.grid, psi_b.mass, dt, hbar, check=False)
    va = potential_spec.external("A", psi_a.grid.x)
    vb = potential_spec.external("B", psi_b.grid.x)
    a = psi_a.values.copy()
    b = psi_b.values.copy()
    wa = Wave1D(psi_a.grid, a, psi_a.mass)
    wb = Wave1D(psi_b.grid, b, psi_b.mass)
    rows = []

    def record(k):
        rows.append((k * dt, hartree_energy(wa, wb, potential_spec, hbar, mf),
                     wa.norm(), wb.norm(), wa.mean_x(), wb.mean_x()))

    def kick():
        ra = np.abs(a) ** 2
        rb = np.abs(b) ** 2
        ua = va + mf.on_a(rb)
        ub = vb + mf.on_b(ra)
        sa.kick(a, ua)
        sb.kick(b, ub)

    record(0)
    for k in range(1, n + 1):
        kick()
        sa.drift(a)
        sb.drift(b)
        kick()
        if k % sample_every == 0 or k == n:
            record(k)
    cols = [np.array(c) for c in zip(*rows)]
    return HartreeTrace(*cols, wa, wb)


def hartree_consistency_residual(psi_a, psi_b, potential):
    """Density-weighted L2 norm of V - <V>_A - <V>_B + <V>_AB.

    ``potential`` is a PotentialSpec or an explicit (n_a, n_b) interaction
    array. Zero means the interaction splits into two effective one-body
    potentials on the support of the product state.
    """
    if isinstance(potential, PotentialSpec):
        v = potential.pair(psi_a.grid.x, psi_b.grid.x)
    else:
        v = np.asarray(potential, dtype=float)
    pa = psi_a.density() * psi_a.grid.dx
    pb = psi_b.density() * psi_b.grid.dx
    pa = pa / pa.sum()
    pb = pb / pb.sum()
    avg_over_a = pa @ v          # function of x_B
    avg_over_b = v @ pb          # function of x_A
    avg_all = pa @ v @ pb
    r = v - avg_over_b[:, None] - avg_over_a[None, :] + avg_all
    return float(np.sqrt(pa @ (r ** 2) @ pb))


# ---------------------------------------------------------------- classical limit


@dataclass
class NewtonTrajectory:
    times: np.ndarray
    xa: np.ndarray
    xb: np.ndarray
    va: np.ndarray
    vb: np.ndarray


def newton_trajectory(xa0, xb0, va0, vb0, m_a, m_b, potential_spec, dt, n_steps):
    """Velocity-Verlet point-mass trajectories under V_AB and the external fields."""

    def forces(xa, xb):
        f = float(potential_spec.derivative(xa - xb))
        fa = -f - float(potential_spec.external_derivative("A", xa))
        fb = f - float(potential_spec.external_derivative("B", xb))
        return fa, fb

    xa, xb, va, vb = float(xa0), float(xb0), float(va0), float(vb0)
    fa, fb = forces(xa, xb)
    out = [(0.0, xa, xb, va, vb)]
    for k in range(1, n_steps + 1):
        va += 0.5 * dt * fa / m_a
        vb += 0.5 * dt * fb / m_b
        xa += dt * va
        xb += dt * vb
        fa, fb = forces(xa, xb)
        va += 0.5 * dt * fa / m_a
        vb += 0.5 * dt * fb / m_b
        out.append((k * dt, xa, xb, va, vb))
    return NewtonTrajectory(*(np.array(c) for c in zip(*out)))


@dataclass
class ClassicalLimitResult:
    trace: ContinuumTrace
    newton: NewtonTrajectory
    max_deviation: float
    psi_a: Wave1D = field(repr=False)
    psi_b: Wave1D = field(repr=False)


def classical_limit_propagate(psi_a, psi_b, potential_spec, dt, t_final, hbar=1.0,
                              sample_every=None, width_fraction=0.2):
    """Product propagation under the interaction linearised about the packet means.

    Each step the interaction is replaced by its constant plus gradient terms
    at (<x_A>, <x_B>); point masses are integrated alongside with velocity
    Verlet from the initial means and mean momenta.
    """
    limit = width_fraction * potential_spec.range
    for w in (psi_a, psi_b):
        if w.width() > limit:
            raise PreconditionError(
                f"packet width {w.width():.4g} exceeds {width_fraction:g} x interaction range"
            )
    n = n_steps_for(t_final, dt)
    sample_every = sample_every or max(1, n // 100)
    check_step(dt, [(psi_a.grid, psi_a.mass), (psi_b.grid, psi_b.mass)], hbar)
    newton = newton_trajectory(
        psi_a.mean_x(), psi_b.mean_x(),
        psi_a.mean_p(hbar) / psi_a.mass, psi_b.mean_p(hbar) / psi_b.mass,
        psi_a.mass, psi_b.mass, potential_spec, dt, n,
    )
    sa = SplitStepper1D(psi_a.grid, psi_a.mass, dt, hbar, check=False)
    sb = SplitStepper1D(psi_b.grid, psi_b.mass, dt, hbar, check=False)
    xa_grid, xb_grid = psi_a.grid.x, psi_b.grid.x
    va_ext = potential_spec.external("A", xa_grid)
    vb_ext = potential_spec.external("B", xb_grid)
    wa, wb = psi_a.copy(), psi_b.copy()
    a, b = wa.values, wb.values
    trace = ContinuumTrace()
    dev = 0.0

    def potentials():
        lin = potential_spec.linearized_about(wa.mean_x(), wb.mean_x())
        v0, fa, fb = lin.linear_terms()
        return (va_ext + v0 + fa * (xa_grid - lin.ref_a),
                vb_ext + fb * (xb_grid - lin.ref_b), lin)

    def record(k):
        ua, ub, lin = potentials()
        e = (sa.kinetic_energy(a) + sb.kinetic_energy(b)
             + np.sum(wa.density() * ua) * wa.grid.dx
             + np.sum(wb.density() * ub) * wb.grid.dx)
        nrm = wa.norm() * wb.norm()
        trace.append(k * dt, nrm, e, 0.0, lin.ref_a, lin.ref_b, newton.xa[k], newton.xb[k])

    record(0)
    for k in range(1, n + 1):
        ua, ub, _ = potentials()
        sa.step(a, ua)
        sb.step(b, ub)
        dev = max(dev, abs(wa.mean_x() - newton.xa[k]), abs(wb.mean_x() - newton.xb[k]))
        if k % sample_every == 0 or k == n:
            record(k)
    return ClassicalLimitResult(trace, newton, dev, wa, wb)


# ---------------------------------------------------------------- test-particle limit


@dataclass
class TestParticleResult:
    mass_ratio: float
    times: np.ndarray
    entropy: np.ndarray
    final_entropy: float
    equal_mass_times: Optional[np.ndarray] = None
    equal_mass_entropy: Optional[np.ndarray] = None
    equal_mass_final_entropy: Optional[float] = None

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class TestParticleSetup:
    """Kinematics of the light projectile and the target's grid."""

    grid_a: Grid1D = Grid1D(128, -20.48, 0.32)
    grid_b: Grid1D = Grid1D(256, -6.4, 0.05)
    m_light: float = 1.0
    x0_light: float = -8.0
    p0_light: float = 4.0
    width_light: float = 2.0
    x0_heavy: float = 0.0

    __test__ = False


def _test_particle_run(setup, mass, heavy_width, potential_spec, dt, t_final, hbar, sample_every):
    wa = Wave1D(setup.grid_a, init_gaussian(setup.grid_a, setup.x0_light, setup.p0_light,
                                            setup.width_light, hbar), setup.m_light)
    wb = Wave1D(setup.grid_b, init_gaussian(setup.grid_b, setup.x0_heavy, 0.0, heavy_width, hbar),
                mass)
    _, trace = evolve(TwoParticleWavefunction.product(wa, wb), potential_spec, dt, t_final,
                      hbar, sample_every)
    return np.asarray(trace.times), np.asarray(trace.entropy)


def test_particle_scenario(mass_ratio, heavy_width, potential_spec, dt, t_final, hbar=1.0,
                           setup=TestParticleSetup(), compare=True, sample_every=None):
    """Light projectile scattering off a target ``mass_ratio`` times heavier.

    Runs the full two-body solver and, with ``compare``, repeats the run
    with an equal-mass target from the same initial state.
    """
    if mass_ratio < 1:
        raise PreconditionError("mass_ratio must be >= 1")
    if heavy_width > potential_spec.range / 5:
        raise PreconditionError("heavy packet must be narrower than range/5")
    t, s = _test_particle_run(setup, mass_ratio * setup.m_light, heavy_width, potential_spec,
                              dt, t_final, hbar, sample_every)
    res = TestParticleResult(mass_ratio, t, s, float(s[-1]))
    if compare:
        t1, s1 = _test_particle_run(setup, setup.m_light, heavy_width, potential_spec,
                                    dt, t_final, hbar, sample_every)
        res.equal_mass_times = t1
        res.equal_mass_entropy = s1
        res.equal_mass_final_entropy = float(s1[-1])
    return res


test_particle_scenario.__test__ = False
