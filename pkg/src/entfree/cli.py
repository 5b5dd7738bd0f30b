"""Command-line scenario runner and verification harness.

Subcommands::

    entfree run <config.ini | preset-name>
    entfree verify [--filter PAT] [--jobs N]
    entfree presets list
    entfree presets show <name>

Exit status: 0 all checks pass, 1 a check failed, 2 config error, 3 numerical
precondition violated, 4 I/O error. ``ENTFREE_OUTPUT_DIR`` overrides the
output directory of every run.

The config schema is documented in the README and enforced by ``SCHEMA``
below: every key is typed, unknown sections and keys are rejected, and all
validation happens before any computation or file output.
"""
import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import continuum as cont
from .bipartite import BipartiteState, SWAP, is_product, schmidt_decompose
from .dynamics import (
    DEFAULT_SEED,
    HamiltonianSchedule,
    StepSizeError,
    propagate_exact,
    purity_rate_check,
    random_factorisable_hamiltonian,
)
from .numerics import DimensionError, NotHermitianError, kron, random_hermitian, random_state
from .report import Check, RunReport, atomic_write, csv_text, report_json

OUTPUT_ENV = "ENTFREE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "entfree_out"

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_IO = 0, 1, 2, 3, 4

MODES = ("finite", "continuum", "verify")
HAMILTONIANS = ("sigma_zz", "swap", "heisenberg", "random", "random_factorisable", "file")
INITIAL_STATES = ("plus", "random_product", "random", "file")


class ConfigError(ValueError):
    pass


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _uint(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be non-negative")
    return v


def _pos(text):
    v = float(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _choice(options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return t
    return parse


_external = {
    f"external_{s}_{k}": (p, d)
    for s in ("a", "b")
    for k, p, d in (("kind", _choice(("none",) + cont.POTENTIAL_KINDS[:3]), "none"),
                    ("strength", float, 0.0), ("range", _pos, 1.0), ("center", float, 0.0))
}

# section -> key -> (parser, default); default REQUIRED marks mandatory keys
REQUIRED = object()
SCHEMA = {
    "scenario": {
        "id": (str, None),
        "mode": (_choice(MODES), REQUIRED),
        "seed": (_uint, DEFAULT_SEED),
        "hbar": (_pos, 1.0),
        "dt": (_pos, None),
        "t_final": (_pos, None),
    },
    "finite": {
        "d_a": (int, 2),
        "d_b": (int, 2),
        "hamiltonian": (_choice(HAMILTONIANS), "random"),
        "hamiltonian_file": (str, None),
        "hamiltonian_scale": (float, 1.0),
        "segments": (int, 1),
        "initial_state": (_choice(INITIAL_STATES), "random_product"),
        "initial_state_file": (str, None),
        "meanfield": (_bool, True),
        "rate_check": (_bool, False),
    },
    "continuum": {
        "n_a": (int, 128),
        "x_min_a": (float, -12.8),
        "dx_a": (_pos, 0.2),
        "n_b": (int, None),
        "x_min_b": (float, None),
        "dx_b": (_pos, None),
        "m_a": (_pos, 1.0),
        "m_b": (_pos, 1.0),
        "x0_a": (float, -3.0),
        "p0_a": (float, 2.0),
        "width_a": (_pos, 1.0),
        "x0_b": (float, 3.0),
        "p0_b": (float, -2.0),
        "width_b": (_pos, 1.0),
        "potential": (_choice(cont.POTENTIAL_KINDS[:3]), "gaussian_bump"),
        "strength": (float, 1.0),
        "range": (_pos, 1.0),
        **_external,
        "mask_ramp": (float, 0.0),
        "classical": (_bool, False),
        "entropy": (_bool, True),
        "sample_every": (_uint, 0),
    },
    "verify": {
        "filter": (str, None),
        "jobs": (int, 1),
    },
    "output": {
        "dir": (str, DEFAULT_OUTPUT_DIR),
        "csv": (str, None),
        "json": (str, None),
    },
    "tolerances": {
        "purity_min": (float, None),
        "curvature_expected": (float, None),
        "curvature_tol": (_pos, 1e-3),
        "curvature_rel": (_pos, 1e-4),
        "norm_tol": (_pos, 1e-10),
        "energy_drift": (_pos, 1e-6),
        "entropy_max": (float, None),
        "classical_dx": (_pos, 2.0),
    },
}


@dataclass
class ScenarioConfig:
    """Validated scenario parameters, one dict of typed values per section."""

    scenario: dict
    finite: dict = field(default_factory=dict)
    continuum: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    base_dir: str = "."

    @property
    def id(self):
        return self.scenario["id"]

    @property
    def mode(self):
        return self.scenario["mode"]


def parse_config(text, base_dir=".", default_id="scenario"):
    """Parse and validate INI text into a ScenarioConfig; raises ConfigError.

    ``;`` starts an inline comment. An empty value means the default.
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                   inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    values = {}
    for section, keys in SCHEMA.items():
        out = {}
        for key, (parse, default) in keys.items():
            raw = cp.get(section, key, fallback="").strip()
            if raw:
                try:
                    out[key] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {key!r} in [{section}]")
            else:
                out[key] = default
        values[section] = out
    cfg = ScenarioConfig(base_dir=base_dir, **values)
    if cfg.scenario["id"] is None:
        cfg.scenario["id"] = default_id
    _validate(cfg)
    return cfg


def _validate(cfg):
    s = cfg.scenario
    if not all(ch.isalnum() or ch in "-_." for ch in s["id"]):
        raise ConfigError(f"scenario id {s['id']!r} may only contain letters, digits, '-', '_', '.'")
    if cfg.mode == "verify":
        if cfg.verify["jobs"] < 1:
            raise ConfigError("[verify] jobs must be >= 1")
        return
    for key in ("dt", "t_final"):
        if s[key] is None:
            raise ConfigError(f"missing required key {key!r} in [scenario] for mode {cfg.mode}")
    n = s["t_final"] / s["dt"]
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"dt={s['dt']} does not divide t_final={s['t_final']}")
    if cfg.mode == "finite":
        f = cfg.finite
        if f["d_a"] < 1 or f["d_b"] < 1:
            raise ConfigError("[finite] d_a and d_b must be positive")
        if f["segments"] < 1:
            raise ConfigError("[finite] segments must be >= 1")
        seg = round(n) / f["segments"]
        if seg != int(seg):
            raise ConfigError("[finite] segments must divide the number of steps")
        if f["hamiltonian"] in ("sigma_zz", "swap", "heisenberg") and (f["d_a"], f["d_b"]) != (2, 2):
            raise ConfigError(f"hamiltonian {f['hamiltonian']} needs d_a = d_b = 2")
        if f["hamiltonian"] == "file" and not f["hamiltonian_file"]:
            raise ConfigError("hamiltonian = file needs hamiltonian_file")
        if f["initial_state"] == "file" and not f["initial_state_file"]:
            raise ConfigError("initial_state = file needs initial_state_file")
    if cfg.mode == "continuum":
        c = cfg.continuum
        for ax in ("a", "b"):
            nn = c[f"n_{ax}"]
            if nn is not None and (nn & (nn - 1) or not 64 <= nn <= 1024):
                raise ConfigError(f"[continuum] n_{ax} must be a power of two in [64, 1024]")
        if c["mask_ramp"] < 0:
            raise ConfigError("[continuum] mask_ramp must be >= 0")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_config(text, os.path.dirname(os.path.abspath(path)), stem)


# ---------------------------------------------------------------- presets


def preset_names():
    root = resources.files("entfree") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name):
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}")
    return (resources.files("entfree") / "presets" / f"{name}.ini").read_text(encoding="utf-8")


def load_preset(name):
    return parse_config(preset_text(name), ".", name)


# ---------------------------------------------------------------- finite mode

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def _load_array(cfg, name):
    path = name if os.path.isabs(name) else os.path.join(cfg.base_dir, name)
    try:
        if path.endswith(".npy"):
            return np.load(path)
        return np.loadtxt(path, dtype=np.complex128)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load {path}: {exc}") from None


def build_schedule(cfg, rng):
    """Piecewise-constant schedule; random segments draw from ``rng`` in order."""
    f = cfg.finite
    d_a, d_b = f["d_a"], f["d_b"]
    kind, scale = f["hamiltonian"], f["hamiltonian_scale"]
    duration = cfg.scenario["t_final"] / f["segments"]

    def one():
        if kind == "sigma_zz":
            return kron(SIGMA["z"], SIGMA["z"])
        if kind == "swap":
            return SWAP.copy()
        if kind == "heisenberg":
            return sum(kron(SIGMA[a], SIGMA[a]) for a in "xyz")
        if kind == "random":
            return random_hermitian(d_a * d_b, rng)
        if kind == "random_factorisable":
            return random_factorisable_hamiltonian(d_a, d_b, rng)
        h = _load_array(cfg, f["hamiltonian_file"])
        if h.shape != (d_a * d_b, d_a * d_b):
            raise ConfigError(f"Hamiltonian file has shape {h.shape}, expected {d_a * d_b} square")
        return h

    return HamiltonianSchedule(tuple((duration, scale * one()) for _ in range(f["segments"])))


def build_initial_state(cfg, rng):
    f = cfg.finite
    d_a, d_b = f["d_a"], f["d_b"]
    kind = f["initial_state"]
    if kind == "plus":
        return BipartiteState.product(np.ones(d_a) / np.sqrt(d_a), np.ones(d_b) / np.sqrt(d_b))
    if kind == "random_product":
        return BipartiteState.product(random_state(d_a, rng), random_state(d_b, rng))
    if kind == "random":
        return BipartiteState.from_vector(random_state(d_a * d_b, rng), d_a, d_b)
    v = _load_array(cfg, f["initial_state_file"]).reshape(-1)
    if v.size != d_a * d_b:
        raise ConfigError(f"state file has {v.size} amplitudes, expected {d_a * d_b}")
    return BipartiteState.from_vector(v, d_a, d_b)


def _run_finite(cfg, report):
    rng = np.random.default_rng(cfg.scenario["seed"])
    schedule = build_schedule(cfg, rng)
    psi0 = build_initial_state(cfg, rng)
    hbar = cfg.scenario["hbar"]
    trace = propagate_exact(schedule, psi0, cfg.scenario["dt"], hbar,
                            meanfield=cfg.finite["meanfield"])
    tol = cfg.tolerances
    if tol["purity_min"] is not None:
        report.checks.append(Check("purity_min", float(np.min(trace.purity)),
                                   tol["purity_min"], ">="))
    if cfg.finite["rate_check"]:
        if not is_product(psi0):
            raise cont.PreconditionError("rate_check needs a product initial state")
        sd = schmidt_decompose(psi0)
        rc = purity_rate_check(schedule.segments[0][1], sd.left_basis[0], sd.right_basis[0], hbar)
        if tol["curvature_expected"] is not None:
            report.checks.append(Check("purity_curvature", rc.curvature_estimate,
                                       tol["curvature_tol"], "abs<=", tol["curvature_expected"]))
        else:
            rel = abs(rc.curvature_estimate - rc.analytic_curvature) / max(
                abs(rc.analytic_curvature), np.finfo(float).tiny)
            report.checks.append(Check("purity_curvature_rel_error", rel,
                                       tol["curvature_rel"], "<="))
    return csv_text(trace.COLUMNS, trace.rows())


# ---------------------------------------------------------------- continuum mode


def _continuum_setup(cfg):
    c = cfg.continuum
    ga = cont.Grid1D(c["n_a"], c["x_min_a"], c["dx_a"])
    gb = cont.Grid1D(
        c["n_b"] if c["n_b"] is not None else c["n_a"],
        c["x_min_b"] if c["x_min_b"] is not None else c["x_min_a"],
        c["dx_b"] if c["dx_b"] is not None else c["dx_a"],
    )

    def external(side):
        if c[f"external_{side}_kind"] == "none":
            return None
        return cont.PotentialSpec(c[f"external_{side}_kind"], c[f"external_{side}_strength"],
                                  c[f"external_{side}_range"], c[f"external_{side}_center"])

    spec = cont.PotentialSpec(c["potential"], c["strength"], c["range"],
                              external_a=external("a"), external_b=external("b"))
    hbar = cfg.scenario["hbar"]
    wa = cont.Wave1D(ga, cont.init_gaussian(ga, c["x0_a"], c["p0_a"], c["width_a"], hbar), c["m_a"])
    wb = cont.Wave1D(gb, cont.init_gaussian(gb, c["x0_b"], c["p0_b"], c["width_b"], hbar), c["m_b"])
    return wa, wb, spec


def _run_continuum(cfg, report):
    c = cfg.continuum
    s = cfg.scenario
    wa, wb, spec = _continuum_setup(cfg)
    dt, t_final, hbar = s["dt"], s["t_final"], s["hbar"]
    n = cont.n_steps_for(t_final, dt)
    newton = None
    if c["classical"]:
        newton = cont.newton_trajectory(wa.mean_x(), wb.mean_x(), wa.mean_p(hbar) / wa.mass,
                                        wb.mean_p(hbar) / wb.mass, wa.mass, wb.mass, spec, dt, n)
    mask = None
    if c["mask_ramp"] > 0:
        mask = np.outer(cont.absorbing_mask(wa.grid, c["mask_ramp"]),
                        cont.absorbing_mask(wb.grid, c["mask_ramp"]))
    _, trace = cont.evolve(cont.TwoParticleWavefunction.product(wa, wb), spec, dt, t_final,
                           hbar, c["sample_every"] or None, mask, c["entropy"], newton)
    arr = trace.as_arrays()
    tol = cfg.tolerances
    if mask is None:
        report.checks.append(Check("norm_deviation", float(np.max(np.abs(arr["norm"] - 1))),
                                   tol["norm_tol"], "<="))
        e = arr["energy"]
        report.checks.append(Check("energy_drift_relative",
                                   float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300)),
                                   tol["energy_drift"], "<="))
    if tol["entropy_max"] is not None and c["entropy"]:
        report.checks.append(Check("final_entropy", float(arr["entropy"][-1]),
                                   tol["entropy_max"], "<="))
    if newton is not None:
        dev = np.maximum(np.abs(arr["mean_xa"] - arr["classical_xa"]),
                         np.abs(arr["mean_xb"] - arr["classical_xb"]))
        report.checks.append(Check("classical_deviation", float(np.max(dev)),
                                   tol["classical_dx"] * max(wa.grid.dx, wb.grid.dx), "<="))
    return csv_text(trace.COLUMNS, trace.rows())


# ---------------------------------------------------------------- dispatch


def resolve_output_dir(cfg, override=None):
    """Explicit override, then the environment variable, then [output] dir."""
    if override:
        return override
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return env
    d = cfg.output["dir"]
    return d if os.path.isabs(d) else os.path.join(cfg.base_dir, d)


def run_scenario(cfg, output_dir=None):
    """Run one validated scenario, write its CSV and JSON, return the RunReport."""
    if cfg.mode == "verify":
        from .verify import verify_suite

        report = verify_suite(cfg.verify["filter"], cfg.verify["jobs"])
        report.scenario_id = cfg.id
        csv_body = None
    else:
        report = RunReport(cfg.id)
        t0 = time.perf_counter()
        if cfg.mode == "finite":
            csv_body = _run_finite(cfg, report)
        else:
            csv_body = _run_continuum(cfg, report)
        report.wall_time = time.perf_counter() - t0
    out_dir = resolve_output_dir(cfg, output_dir)
    if csv_body is not None:
        csv_path = os.path.join(out_dir, cfg.output["csv"] or f"{cfg.id}.csv")
        atomic_write(csv_path, csv_body)
        report.outputs.append(csv_path)
    json_path = os.path.join(out_dir, cfg.output["json"] or f"{cfg.id}.json")
    report.outputs.append(json_path)
    atomic_write(json_path, report_json(report))
    return report


def _exit_code(report):
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _guarded(fn):
    """Map failures to exit codes, reporting them on stderr."""
    try:
        return fn()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (cont.PreconditionError, StepSizeError, DimensionError, NotHermitianError) as exc:
        print(f"numerical precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def cmd_run(args):
    def go():
        if os.path.exists(args.config):
            cfg = load_config(args.config)
        elif args.config in preset_names():
            cfg = load_preset(args.config)
        else:
            raise ConfigError(f"no config file or preset named {args.config!r}")
        report = run_scenario(cfg, args.output_dir)
        print(report.table())
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return _exit_code(report)
    return _guarded(go)


def cmd_verify(args):
    def go():
        from .verify import verify_suite

        report = verify_suite(args.filter, args.jobs)
        out_dir = args.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR
        path = os.path.join(out_dir, "verify.json")
        report.outputs.append(path)
        atomic_write(path, report_json(report))
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if report.checks:
            print(report.table())
        return _exit_code(report)
    return _guarded(go)


def cmd_presets(args):
    def go():
        if args.action == "list":
            for name in preset_names():
                print(name)
            return EXIT_OK
        if not args.name:
            raise ConfigError("presets show needs a preset name")
        sys.stdout.write(preset_text(args.name))
        return EXIT_OK
    return _guarded(go)


def build_parser():
    p = argparse.ArgumentParser(prog="entfree", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config or bundled preset")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None)
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run the registered verification checks")
    v.add_argument("--filter", default=None, help="substring or glob over check names")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--output-dir", default=None)
    v.set_defaults(func=cmd_verify)
    pr = sub.add_parser("presets", help="list or show bundled presets")
    pr.add_argument("action", choices=("list", "show"))
    pr.add_argument("name", nargs="?")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
