"""Command line entry point, run configuration and field/report output.

Layout of every ``--out`` directory::

    fields/           binary dumps (+ JSON sidecars, optional VTK)
    reports/          CSV and JSON reports
    provenance.json   configuration, overrides, version, timings, realised parameters
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .convex_step import (
    ConfigError,
    SolutionTriple,
    StepParams,
    perform_step,
    schedule_params,
    validate_exponents,
)
from .iteration_driver import (
    WindowFactor,
    demo_nonuniqueness,
    initial_triple,
    make_schedule,
    run_iterations,
    unit_profile,
)
from .mikado_flows import MikadoFamily, ResolutionError, build_bump, representable, verify_mikado
from .spectral_core import (
    Grid,
    Harmonic,
    SampledField,
    ScalarField,
    SeparableField,
    SpaceTimeField,
    VectorField,
    dump_field,
    load_field,
    time_quadrature,
    lp_norm_array,
    combine_time,
)
from .verification import GROUPS, run_verify_suite

log = logging.getLogger("artifact")

EXIT_OK, EXIT_IDENTITY, EXIT_RESOLUTION, EXIT_CONFIG = 0, 2, 3, 4

SECTIONS = {
    "exponents": ("p", "q", "s", "s_tilde", "d"),
    "grid": ("n_x", "n_t"),
    "scheduler": ("mode", "eps_mode", "mu", "kappa", "sigma", "lam", "nu", "delta", "mollify"),
    "run": ("eps", "M_cfg", "K", "out", "seed", "density"),
}


@dataclass
class RunConfig:
    p: float = 2.0
    q: float = 1.0
    s: float = 2.0
    s_tilde: float = 1.0
    d: int = 3
    n_x: int = 128
    n_t: int = 256
    mode: str = "assum"
    eps_mode: float = 0.05
    mu: float = 24.0
    kappa: float | None = None
    sigma: int | None = None
    lam: int | None = None
    nu: float = 1.0
    delta: float | None = None
    mollify: bool = False
    eps: float = 0.1
    M_cfg: float = 10.0
    K: int = 2
    out: str = "out"
    seed: int = 0
    density: str = "harmonic"
    overrides: dict = field(default_factory=dict)

    def exponents(self):
        return validate_exponents(self.p, self.q, self.s, self.s_tilde, self.d)

    def grid(self) -> Grid:
        return Grid(self.d, self.n_x, self.n_t)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("overrides")
        return out

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        data = self.to_dict()
        for sec, keys in SECTIONS.items():
            cp[sec] = {k: "" if data[k] is None else str(data[k]) for k in keys}
        buf = []

        class _W:
            def write(self, s):
                buf.append(s)

        cp.write(_W())
        return "".join(buf)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if value is None or value == "":
        return None
    kind = _TYPES[key]
    if "bool" in kind:
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if "int" in kind and "float" not in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return str(value)


def _read_file(path: Path) -> dict:
    text = path.read_text()
    if path.suffix == ".json":
        raw = json.loads(text)
        flat = {}
        for k, v in raw.items():
            if isinstance(v, dict):
                flat.update(v)
            else:
                flat[k] = v
        return flat
    cp = configparser.ConfigParser()
    cp.read_string(text)
    flat = {}
    for sec in cp.sections():
        flat.update(dict(cp[sec]))
    return flat


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read an INI (``[exponents] [grid] [scheduler] [run]``) or JSON file and apply flag overrides.

    Raises :class:`ConfigError` for unknown keys, malformed values or
    inadmissible exponents.
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            values = _read_file(path)
        except (json.JSONDecodeError, configparser.Error) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    alias = {"s~": "s_tilde", "stilde": "s_tilde", "lambda": "lam", "m": "M_cfg", "m_cfg": "M_cfg", "k": "K"}
    clean = {}
    for k, v in values.items():
        k = alias.get(k, k)
        if k not in _TYPES or k == "overrides":
            raise ConfigError(f"unknown config key {k!r}")
        try:
            clean[k] = _coerce(k, v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {v!r}") from exc
    applied = {}
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        k = alias.get(k, k)
        if k not in _TYPES:
            raise ConfigError(f"unknown override {k!r}")
        if k in clean and clean[k] != v:
            applied[k] = {"file": clean[k], "flag": v}
        elif k not in clean:
            applied[k] = {"file": None, "flag": v}
        clean[k] = _coerce(k, v)
    cfg = RunConfig(**{k: v for k, v in clean.items() if v is not None})
    cfg.overrides = applied
    cfg.exponents()
    try:
        cfg.grid()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.mu < 8 * cfg.d:
        raise ConfigError(f"mu must be >= 8d = {8 * cfg.d}, got {cfg.mu:g}")
    if cfg.mode not in ("assum", "assum-2", "manual"):
        raise ConfigError(f"mode must be assum, assum-2 or manual, got {cfg.mode!r}")
    return cfg


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_vtk(path, values: np.ndarray, grid: Grid, name: str) -> Path:
    """Legacy binary VTK ``STRUCTURED_POINTS`` file (3-d scalar or vector data)."""
    if grid.d != 3:
        raise ValueError("VTK export needs d = 3")
    path = Path(path)
    n = grid.n_x
    vector = values.ndim == 4
    # VTK point order is x fastest
    if vector:
        data = np.stack([values[k].transpose(2, 1, 0) for k in range(3)], axis=-1)
    else:
        data = values.transpose(2, 1, 0)
    head = (
        "# vtk DataFile Version 3.0\n"
        f"{name}\nBINARY\nDATASET STRUCTURED_POINTS\n"
        f"DIMENSIONS {n} {n} {n}\nORIGIN 0 0 0\nSPACING {grid.h} {grid.h} {grid.h}\n"
        f"POINT_DATA {n ** 3}\n"
    )
    head += f"VECTORS {name} double\n" if vector else f"SCALARS {name} double 1\nLOOKUP_TABLE default\n"
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype=">f8").tobytes())
    return path


def export_field(obj, name: str, directory, vtk: bool = False, times=None) -> list[Path]:
    """Write a field as ``.bin`` + ``.json``.

    Space-time fields are written one file per time node plus an
    ``<name>_index.json`` manifest.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if isinstance(obj, SpaceTimeField):
        grid = obj.grid
        times = list(grid.t) if times is None else list(times)
        entries = []
        for m, t in enumerate(times):
            stem = directory / f"{name}_{m:05d}"
            written += dump_field(stem, obj.at(t), grid, obj.kind, name)
            if vtk:
                written.append(write_vtk(stem.with_suffix(".vtk"), obj.at(t), grid, name))
            entries.append({"t": float(t), "stem": stem.name})
        manifest = directory / f"{name}_index.json"
        manifest.write_text(json.dumps({"name": name, "kind": obj.kind, "d": grid.d, "n_x": grid.n_x,
                                        "n_t": grid.n_t, "slices": entries}, indent=2))
        return written + [manifest]
    if isinstance(obj, (ScalarField, VectorField)):
        values, grid = obj.values, obj.grid
        kind = "scalar" if isinstance(obj, ScalarField) else "vector"
    else:
        raise TypeError("export_field expects a ScalarField, VectorField or SpaceTimeField")
    stem = directory / name
    written += dump_field(stem, values, grid, kind, name)
    if vtk:
        written.append(write_vtk(stem.with_suffix(".vtk"), values, grid, name))
    return written


def import_field(path_stem):
    """Inverse of :func:`export_field` for a single field."""
    values, meta = load_field(path_stem)
    grid = Grid(meta["d"], meta["n_x"], max(4, meta.get("n_t", 4)))
    return (ScalarField if meta["kind"] == "scalar" else VectorField)(grid, values)


def import_spacetime(manifest) -> SampledField:
    """Load a space-time dump written by :func:`export_field` (one slice per time node)."""
    manifest = Path(manifest)
    meta = json.loads(manifest.read_text())
    grid = Grid(meta["d"], meta["n_x"], meta["n_t"])
    slices = [load_field(manifest.parent / e["stem"])[0] for e in meta["slices"]]
    return SampledField(grid, np.stack(slices), meta["kind"], meta["name"])


# ---------------------------------------------------------------------------
# provenance
# ---------------------------------------------------------------------------


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


class Output:
    def __init__(self, root, cfg: RunConfig, command: str):
        self.root = Path(root)
        self.fields = self.root / "fields"
        self.reports = self.root / "reports"
        self.fields.mkdir(parents=True, exist_ok=True)
        self.reports.mkdir(parents=True, exist_ok=True)
        self.cfg, self.command = cfg, command
        self.start = time.time()
        self.realised: dict = {}

    def report(self, name: str, text: str) -> Path:
        path = self.reports / name
        path.write_text(text)
        return path

    def finish(self, status: int) -> Path:
        prov = {
            "command": self.command,
            "config": self.cfg.to_dict(),
            "overrides": self.cfg.overrides,
            "version": version_string(),
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(self.start)),
            "wall_clock_s": time.time() - self.start,
            "exit_code": status,
            "realised": self.realised,
        }
        path = self.root / "provenance.json"
        path.write_text(json.dumps(prov, indent=2, default=_json_default))
        return path


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return str(x)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def make_density(cfg: RunConfig, grid: Grid, source: str | None = None) -> SpaceTimeField:
    """``harmonic``: ``sin(2 pi t) cos(2 pi x_1)``; ``window``: ``chi(t) rho_bar(x)``; otherwise a dump manifest."""
    name = source or cfg.density
    if name == "harmonic":
        x = np.broadcast_to(np.cos(2 * np.pi * grid.coord(0)), grid.shape)
        return SeparableField(grid, [(Harmonic(1, -np.pi / 2), x)], "scalar", "rho_tilde")
    if name == "window":
        return SeparableField(grid, [(WindowFactor(), unit_profile(grid, cfg.p))], "scalar", "rho_tilde")
    field_ = import_spacetime(name)
    if field_.grid.n_x != grid.n_x or field_.grid.d != grid.d:
        raise ConfigError(f"input density on {field_.grid} does not match the configured grid")
    return field_


def _triple_l1(triple: SolutionTriple) -> float:
    nodes, weights = time_quadrature(triple.grid.n_t, triple.special_intervals())
    return combine_time([lp_norm_array(triple.R.at(t), 1, vector=True) for t in nodes], weights, 1.0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig, args) -> int:
    ex = cfg.exponents()
    info = ex.to_dict()
    if cfg.mode != "manual":
        par = schedule_params(ex, cfg.mu, cfg.nu, cfg.delta or 1.0, cfg.mode, cfg.eps_mode)
        info["schedule"] = par.to_dict()
    print(json.dumps(info, indent=2, default=_json_default))
    return EXIT_OK


def cmd_mikado(cfg: RunConfig, args) -> int:
    grid = Grid(cfg.d, cfg.n_x, 4)
    out = Output(cfg.out, cfg, "mikado")
    mus = [cfg.mu] + list(args.compare or [])
    for mu in mus:
        if not representable(grid, mu, 1):
            log.error("n_x = %d cannot represent mu = %g (need n_x >= %g)", grid.n_x, mu, 4 * mu)
            out.realised["resolution_guard"] = f"n_x = {grid.n_x} < 4 mu = {4 * mu:g}"
            return _finish(out, EXIT_RESOLUTION)
    bump = build_bump(cfg.d)
    fams = [MikadoFamily(bump, mu, cfg.p, grid) for mu in mus]
    rep = verify_mikado(fams[0], fams[1:], q=cfg.q)
    lines = ["check,j,value,tol,passed,hard"]
    for check, j, value, tol, ok, hard in rep.rows:
        lines.append(f"{check},{j},{value!r},{'' if tol is None else tol},{ok},{hard}")
    out.report("mikado.csv", "\n".join(lines) + "\n")
    out.realised.update(mu=mus, bandwidth=bump.bandwidth())
    if args.dump:
        for j, fam in enumerate(fams[:1]):
            for k in range(cfg.d):
                export_field(fam.Phi_field(k), f"Phi_{k}", out.fields, vtk=args.vtk)
                export_field(fam.W_field(k), f"W_{k}", out.fields, vtk=args.vtk)
    print(f"mikado: {sum(r[4] for r in rep.rows)}/{len(rep.rows)} rows pass")
    return _finish(out, EXIT_OK if rep.passed else EXIT_IDENTITY)


def _step_params(cfg: RunConfig, ex, delta: float) -> StepParams:
    if cfg.mode == "manual":
        if cfg.kappa is None or cfg.sigma is None or cfg.lam is None:
            raise ConfigError("manual mode needs kappa, sigma and lam")
        return StepParams(cfg.mu, cfg.kappa, cfg.sigma, cfg.lam, cfg.nu, delta, mode="manual")
    return schedule_params(ex, cfg.mu, cfg.nu, delta, cfg.mode, cfg.eps_mode)


def cmd_step(cfg: RunConfig, args) -> int:
    ex = cfg.exponents()
    grid = cfg.grid()
    out = Output(cfg.out, cfg, "step")
    triple = initial_triple(make_density(cfg, grid, args.input))
    R_l1 = _triple_l1(triple)
    delta = cfg.delta if cfg.delta is not None else 0.2 * R_l1
    params = _step_params(cfg, ex, delta)
    try:
        res = perform_step(triple, ex, params, mollify=cfg.mollify)
    except ResolutionError as exc:
        log.error("%s", exc)
        out.realised["resolution_guard"] = str(exc)
        return _finish(out, EXIT_RESOLUTION)
    rep = res.report
    out.report("step.json", rep.to_json())
    out.report("step.csv", rep.to_csv())
    out.realised.update(params.to_dict(), N=ex.N, R_in_l1=R_l1)
    if args.dump:
        for name, fld in (("rho", res.triple.rho), ("u", res.triple.u), ("R", res.triple.R)):
            export_field(fld, name, out.fields, vtk=args.vtk)
    print(f"step: ||R||={rep.R_in_l1:.4g} -> ||R1||={rep.R_out_l1:.4g} (delta {delta:.4g}), "
          f"residual {rep.residual_out:.3e}, pass={rep.passed}")
    hard_ok = rep.max_div_u_rel <= 1e-8 and rep.max_mean_theta <= 1e-9 and rep.theta_outside_Ir2 == 0.0
    return _finish(out, EXIT_OK if hard_ok else EXIT_IDENTITY)


def cmd_iterate(cfg: RunConfig, args) -> int:
    ex = cfg.exponents()
    grid = cfg.grid()
    out = Output(cfg.out, cfg, "iterate")
    rho = make_density(cfg, grid, args.input)
    sched = make_schedule(cfg.eps, cfg.p, cfg.M_cfg, cfg.K, mu_start=cfg.mu)
    run = run_iterations(rho, ex, sched, cfg.mode, cfg.eps_mode, cfg.mollify,
                         keep_iterates=args.keep_iterates, log=log.info)
    out.report("ledger.json", run.ledger.to_json())
    out.report("ledger.csv", run.ledger.to_csv())
    out.realised.update(deltas=sched.deltas, nus=sched.nus, N=ex.N)
    if args.keep_iterates:
        for n, tri in enumerate(run.triples, start=1):
            export_field(tri.rho, f"rho{n}", out.fields / f"iterate_{n}")
    print(f"iterate: {len(run.ledger.entries)} step(s), deviation {run.ledger.deviation:.4g} (eps {cfg.eps}), "
          f"halted={run.ledger.halted}")
    return _finish(out, EXIT_RESOLUTION if run.ledger.halted else EXIT_OK)


def cmd_demo(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    out = Output(cfg.out, cfg, "demo-nonuniqueness")
    rep = demo_nonuniqueness(cfg.p, cfg.s, grid, cfg.K, cfg.q, cfg.s_tilde, cfg.M_cfg, cfg.mode, log=log.info)
    out.report("demo.json", json.dumps(rep.to_dict(), indent=2, default=_json_default))
    print(f"demo: spread {rep.spread:.4f}, A = {rep.A:.4g}, B = {rep.B:.4g}, endpoints exact = {rep.endpoints_exact}")
    halted = bool(rep.ledger.get("halted")) if rep.ledger else False
    return _finish(out, EXIT_RESOLUTION if halted else EXIT_OK)


def cmd_verify(cfg: RunConfig, args) -> int:
    out = Output(cfg.out, cfg, "verify")
    res = run_verify_suite(cfg.n_x, min(cfg.n_t, 16), cfg.d, cfg.mu, cfg.p, cfg.q, args.only, cfg.seed)
    out.report("verify.csv", res.to_csv())
    failed = res.hard_failures
    for r in failed:
        print(f"FAIL {r.group}/{r.check}: {r.value!r} (tol {r.tol}) {r.note}")
    print(f"verify: {len(res.rows)} rows, {len(failed)} hard failure(s)")
    return _finish(out, res.exit_code())


def _finish(out: Output, status: int) -> int:
    out.finish(status)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI or JSON run configuration")
    common.add_argument("--out", help="output directory")
    for name in ("p", "q", "s", "s-tilde", "eps", "M-cfg", "nu", "delta", "mu", "eps-mode"):
        common.add_argument(f"--{name}", type=float)
    for name in ("d", "n-x", "n-t", "K", "seed"):
        common.add_argument(f"--{name}", type=int)
    common.add_argument("--mode", choices=("assum", "assum-2", "manual"))
    common.add_argument("--manual-kappa", dest="kappa", type=float)
    common.add_argument("--sigma", type=int)
    common.add_argument("--lambda", dest="lam", type=int)
    common.add_argument("--mollify", action="store_const", const=True)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate-params", parents=[common], help="check exponents and print derived quantities")
    p = sub.add_parser("mikado", parents=[common], help="build and verify a Mikado family")
    p.add_argument("--compare", type=float, nargs="*", help="extra mu values for the scaling checks")
    p.add_argument("--dump", action="store_true")
    p.add_argument("--vtk", action="store_true")
    for name, help_ in (("step", "one step from an initial density"), ("iterate", "run K - 1 steps")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--in", dest="input", help="'harmonic', 'window' or a space-time dump manifest")
        if name == "step":
            p.add_argument("--dump", action="store_true")
            p.add_argument("--vtk", action="store_true")
        else:
            p.add_argument("--keep-iterates", action="store_true")
    sub.add_parser("demo-nonuniqueness", parents=[common], help="norm profile of the iterated window density")
    p = sub.add_parser("verify", parents=[common], help="identity battery; CSV under reports/")
    p.add_argument("--only", nargs="+", choices=GROUPS)
    return parser


_FLAG_KEYS = ("p", "q", "s", "s_tilde", "d", "n_x", "n_t", "mode", "eps_mode", "mu", "kappa", "sigma", "lam",
              "nu", "delta", "mollify", "eps", "M_cfg", "K", "out", "seed")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(json.dumps({"error": "invalid config", "reason": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    handlers = {"validate-params": cmd_validate, "mikado": cmd_mikado, "step": cmd_step,
                "iterate": cmd_iterate, "demo-nonuniqueness": cmd_demo, "verify": cmd_verify}
    try:
        return handlers[args.command](cfg, args)
    except ConfigError as exc:
        print(json.dumps({"error": "invalid config", "reason": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except ResolutionError as exc:
        print(json.dumps({"error": "resolution", "reason": str(exc)}), file=sys.stderr)
        return EXIT_RESOLUTION


if __name__ == "__main__":
    sys.exit(main())
