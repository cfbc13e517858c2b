"""Command-line entry point: generate / gauge / hodge / decay / frame / pipeline.

One JSON config file holds the run parameters; every top-level key has a
mirror flag, and flags win over file values.  Exit codes: 0 all executed
clauses pass, 2 a clause failed its tolerance, 1 operational error (bad
config, missing or malformed file).  Every subcommand writes its artifacts
under the output directory together with a manifest.json listing path, size
and SHA-256 of each file; identical config and seed give byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import ConfigError, GaugelabError
from .fieldio import (load_json, read_field, write_csv, write_field,
                      write_json, write_pgm)
from .gauge import GaugeOptions, minimize
from .grid import Grid, ScalarField, VecField, grad
from .hodge import hodge_decompose
from .lie import SkewPotential, random_skew_potential
from .morrey import CSV_HEADER, MorreyConfig
from .pipeline import (Clause, _decay_section, _gauge_clauses, run_pipeline,
                       REPORT_VERSION)
from .problems import ProblemInstance, harmonic_map_s2

__all__ = ["RunConfig", "parse_config", "run", "main"]

SUBCOMMANDS = ("generate", "gauge", "hodge", "decay", "frame", "pipeline")

# key, type, default, range text, predicate, help text
_KEY_TABLE = [
    ("N", int, 64, "N >= 8",
     lambda v: v >= 8, "grid cells per side"),
    ("n", int, 3, "n >= 2",
     lambda v: v >= 2, "fiber dimension of rotations and potentials"),
    ("p", float, 4.0 / 3.0, "1 < p < 2",
     lambda v: 1.0 < v < 2.0, "integrability exponent of the decay scan"),
    ("gamma", float, 0.25, "0 < gamma < 1/2",
     lambda v: 0.0 < v < 0.5, "inner-to-outer radius fraction"),
    ("epsilon", float, 1e-3, "0 < epsilon < 1",
     lambda v: 0.0 < v < 1.0, "smallness threshold for the local potential energy"),
    ("stride", int, 4, "stride >= 1",
     lambda v: v >= 1, "cell stride of the ball-center lattice"),
    ("seed", int, 0, "seed >= 0",
     lambda v: v >= 0, "seed for randomized inputs"),
    ("degree", int, 1, "degree in {1, 2, 3}",
     lambda v: v in (1, 2, 3), "holomorphic degree of the generated map"),
    ("scale", float, 0.0, "scale >= 0 (0 = dilate until smallness holds)",
     lambda v: v >= 0.0, "dilation of the generated map"),
    ("amplitude", float, 0.5, "amplitude >= 0",
     lambda v: v >= 0.0, "L2 norm of the random potential (gauge subcommand)"),
    ("smoothness", int, 2, "smoothness >= 0",
     lambda v: v >= 0, "spectral weight exponent of the random potential"),
    ("max_iterations", int, 500, "max_iterations >= 1",
     lambda v: v >= 1, "descent iteration cap"),
    ("grad_tol", float, 1e-8, "grad_tol > 0",
     lambda v: v > 0.0, "gradient norm stopping threshold"),
    ("per_ball", bool, False, "true | false",
     lambda v: True, "re-gauge on every sampled ball (pipeline subcommand)"),
    ("pgm", bool, False, "true | false",
     lambda v: True, "also dump grayscale PGM images of scalar fields"),
    ("workers", int, 1, "workers >= 1",
     lambda v: v >= 1, "thread count for the per-ball stage (order-stable)"),
    ("metric", str, "euclidean", "euclidean | conformal | diagonal",
     lambda v: v in ("euclidean", "conformal", "diagonal"),
     "builtin metric family (frame subcommand)"),
    ("metric_params", dict, {}, "JSON object",
     lambda v: True, "parameters of the metric family"),
    ("input", str, "", "path or empty (empty = generate from config)",
     lambda v: True, "directory of field files to read"),
    ("output", str, "out", "path",
     lambda v: bool(v), "directory for output artifacts"),
]

_KEYS = {row[0]: row for row in _KEY_TABLE}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    N: int = 64
    n: int = 3
    p: float = 4.0 / 3.0
    gamma: float = 0.25
    epsilon: float = 1e-3
    stride: int = 4
    seed: int = 0
    degree: int = 1
    scale: float = 0.0
    amplitude: float = 0.5
    smoothness: int = 2
    max_iterations: int = 500
    grad_tol: float = 1e-8
    per_ball: bool = False
    pgm: bool = False
    workers: int = 1
    metric: str = "euclidean"
    metric_params: dict = None
    input: str = ""
    output: str = "out"

    def gauge_options(self) -> GaugeOptions:
        return GaugeOptions(max_iterations=self.max_iterations,
                            grad_tol=self.grad_tol)

    def morrey_config(self) -> MorreyConfig:
        return MorreyConfig(p=self.p, gamma=self.gamma, epsilon=self.epsilon,
                            stride=self.stride)

    def to_dict(self) -> dict:
        doc = {"subcommand": self.subcommand}
        for key, *_ in _KEY_TABLE:
            doc[key] = getattr(self, key)
        return doc


def _check_type(key: str, value, want: type):
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} = {value!r}: expected a number")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} = {value!r}: expected an integer")
        return int(value)
    if want is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} = {value!r}: expected true or false")
        return value
    if want is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{key} = {value!r}: expected a JSON object")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{key} = {value!r}: expected a string")
    return value


def _validated(subcommand: str, merged: dict) -> RunConfig:
    for key, want, _default, rng, pred, _help in _KEY_TABLE:
        val = _check_type(key, merged[key], want)
        if not pred(val):
            raise ConfigError(f"{key} = {val!r} out of range: {key} must satisfy {rng}")
        merged[key] = val
    if subcommand in ("generate", "decay", "pipeline", "frame") and not merged["input"]:
        if merged["n"] != 3:
            raise ConfigError(
                f"n = {merged['n']}: the builtin generator produces sphere-valued "
                f"maps with n = 3; load fields via 'input' for other n")
    return RunConfig(subcommand=subcommand, **merged)


class _Parser(argparse.ArgumentParser):
    # usage errors become ConfigError so main() maps them to exit 1,
    # keeping exit 2 reserved for clause failures
    def error(self, message):
        raise ConfigError(message)


def _json_flag(text: str) -> dict:
    try:
        val = json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"invalid JSON: {e.msg}") from e
    if not isinstance(val, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return val


def _build_parser() -> _Parser:
    lines = ["config keys (file and flag forms; flags override the file):"]
    for key, want, default, rng, _pred, helptext in _KEY_TABLE:
        shown = json.dumps(default) if not isinstance(default, float) else repr(default)
        lines.append(f"  {key:<14s} {helptext} [default: {shown}; range: {rng}]")
    epilog = "\n".join(lines)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="JSON config file with any of the keys below")
    for key, want, default, rng, _pred, helptext in _KEY_TABLE:
        flag = "--" + key.replace("_", "-")
        helpstr = f"{helptext} [default: {default!r}; range: {rng}]"
        if want is bool:
            common.add_argument(flag, dest=key, default=None,
                                action=argparse.BooleanOptionalAction, help=helpstr)
        elif want is dict:
            common.add_argument(flag, dest=key, default=None, type=_json_flag,
                                metavar="JSON", help=helpstr)
        else:
            common.add_argument(flag, dest=key, default=None, type=want,
                                metavar=key.upper(), help=helpstr)

    parser = _Parser(
        prog="gaugelab",
        description="gauge construction, Hodge split and decay experiments on grid fields",
        epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")
    descriptions = {
        "generate": "emit a problem instance as field files plus metadata",
        "gauge": "minimize the gauge energy for a potential and store the rotation",
        "hodge": "decompose planar fields into gradient, rotational and harmonic parts",
        "decay": "run the two-radius decay scan after gauging",
        "frame": "assemble the metric frame and transformed coefficients",
        "pipeline": "full chain: gauge, equation check, Hodge split, decay scan",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], description=descriptions[name],
                       epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, the optional config file, and flags into a RunConfig.

    Precedence: defaults < file < flags.  Unknown file keys, wrong types and
    out-of-range values raise ConfigError naming the key.
    """
    ns = _build_parser().parse_args(argv)
    if not ns.subcommand:
        raise ConfigError(f"missing subcommand (one of: {', '.join(SUBCOMMANDS)})")
    merged = {key: default for key, _w, default, *_ in _KEY_TABLE}
    if ns.config:
        try:
            doc = load_json(ns.config)
        except OSError as e:
            raise ConfigError(f"config file: {e}") from e
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if not isinstance(doc, dict):
            raise ConfigError(f"{ns.config}: config must be a JSON object")
        for key, val in doc.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = val
    for key in _KEYS:
        flag_val = getattr(ns, key)
        if flag_val is not None:
            merged[key] = flag_val
    return _validated(ns.subcommand, merged)


class _Workspace:
    """Output directory plus the artifact list for the manifest."""

    def __init__(self, out_dir: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts = []

    def path(self, rel: str) -> Path:
        return self.dir / rel

    def record(self, rel: str) -> None:
        p = self.dir / rel
        payload = p.read_bytes()
        self.artifacts.append({
            "path": rel,
            "bytes": len(payload),
            "sha256": hashlib.sha256(payload).hexdigest(),
        })

    def write_manifest(self, cfg: RunConfig) -> None:
        doc = {
            "tool": "gaugelab",
            "manifest_version": 1,
            "subcommand": cfg.subcommand,
            "config": cfg.to_dict(),
            "backend": K.BACKEND,
            "artifacts": sorted(self.artifacts, key=lambda a: a["path"]),
        }
        write_json(self.dir / "manifest.json", doc)


def _make_problem(cfg: RunConfig) -> ProblemInstance:
    if cfg.input:
        return _read_problem(cfg.input)
    grid = Grid(cfg.N)
    if cfg.scale > 0.0:
        return harmonic_map_s2(cfg.degree, grid, scale=cfg.scale)
    from .pipeline import dilate_to_smallness
    return dilate_to_smallness(cfg.degree, grid, cfg.morrey_config())


def _read_problem(dirpath: str) -> ProblemInstance:
    root = Path(dirpath)
    meta = load_json(root / "problem.json")
    if not isinstance(meta, dict) or "n" not in meta:
        raise ValueError(f"{root / 'problem.json'}: missing key 'n'")
    n = int(meta["n"])
    comps = []
    for i in range(n):
        kind, _, grid, data = read_field(root / f"u_{i}.json")
        if kind != "scalar":
            raise ValueError(f"{root / f'u_{i}.json'}: expected scalar field, got {kind}")
        comps.append(ScalarField(grid, data))
    kind, n_om, grid_om, data = read_field(root / "omega.json")
    if kind != "skew_potential":
        raise ValueError(f"{root / 'omega.json'}: expected skew_potential, got {kind}")
    omega = SkewPotential(grid_om, n_om, data)
    return ProblemInstance(tuple(comps), omega, dict(meta))


def _write_problem(ws: _Workspace, pb: ProblemInstance) -> None:
    for i, ui in enumerate(pb.u):
        name = f"u_{i}.json"
        write_field(ws.path(name), "scalar", ui.data)
        ws.record(name)
    write_field(ws.path("omega.json"), "skew_potential", pb.omega.data, n=pb.n)
    ws.record("omega.json")
    meta = {"n": pb.n, "N": pb.grid.n_cells}
    meta.update(pb.metadata)
    write_json(ws.path("problem.json"), meta)
    ws.record("problem.json")


def _write_report(ws: _Workspace, name: str, body: dict, clauses) -> None:
    body = dict(body)
    body["clauses"] = [c.to_dict() for c in clauses]
    body["overall_pass"] = all(c.status != "fail" for c in clauses)
    write_json(ws.path(name), body)
    ws.record(name)


def _cmd_generate(cfg: RunConfig, ws: _Workspace):
    pb = _make_problem(cfg)
    _write_problem(ws, pb)
    if cfg.pgm:
        _dump_pgm(ws, pb)
    return []


def _cmd_gauge(cfg: RunConfig, ws: _Workspace):
    if cfg.input:
        kind, n, grid, data = read_field(Path(cfg.input) / "omega.json")
        if kind != "skew_potential":
            raise ValueError(f"{Path(cfg.input) / 'omega.json'}: "
                             f"expected skew_potential, got {kind}")
        Om = SkewPotential(grid, n, data)
    else:
        Om = random_skew_potential(cfg.n, Grid(cfg.N), cfg.amplitude,
                                   cfg.smoothness, cfg.seed)
    res = minimize(Om, cfg.gauge_options())
    clauses = _gauge_clauses(res)
    write_field(ws.path("rotation.json"), "rotation", res.rotation.data, n=res.rotation.n)
    ws.record("rotation.json")
    write_field(ws.path("omega_p.json"), "skew_potential", res.omega_p.data, n=res.omega_p.n)
    ws.record("omega_p.json")
    write_csv(ws.path("energy_trace.csv"), ["iteration", "energy"],
              [(i, e) for i, e in enumerate(res.energies)])
    ws.record("energy_trace.csv")
    body = {
        "report_version": REPORT_VERSION,
        "status": res.status,
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "energy": res.energy,
        "norm_omega": res.norm_omega,
        "norm_omega_p": res.norm_omega_p,
        "norm_grad_p": res.norm_grad_p,
        "weak_residual": res.weak_residual,
        "orthogonality_defect": res.orthogonality_defect,
    }
    _write_report(ws, "gauge_report.json", body, clauses)
    return clauses


def _scan_vec2(dirpath: str):
    """All vec2 fields in a directory; non-field JSON files are skipped,
    malformed field files raise with the byte offset."""
    found = []
    for f in sorted(Path(dirpath).glob("*.json")):
        if f.name == "manifest.json" or f.name.endswith(".pgm.json"):
            continue
        doc = load_json(f)
        if not isinstance(doc, dict) or "kind" not in doc:
            continue
        kind, _, grid, data = read_field(f)
        if kind == "vec2":
            found.append((f.stem, VecField(grid, data)))
    return found


def _cmd_hodge(cfg: RunConfig, ws: _Workspace):
    if cfg.input:
        fields = _scan_vec2(cfg.input)
        if not fields:
            raise ValueError(f"{cfg.input}: no vec2 field files found")
    else:
        pb = _make_problem(cfg)
        fields = [(f"grad_u_{i}", VecField(pb.grid, grad(ui).data))
                  for i, ui in enumerate(pb.u)]
    clauses = []
    rows = []
    for name, V in fields:
        parts = hodge_decompose(V)
        write_field(ws.path(f"{name}_potential.json"), "scalar", parts.potential.data)
        ws.record(f"{name}_potential.json")
        write_field(ws.path(f"{name}_stream.json"), "scalar", parts.stream.data)
        ws.record(f"{name}_stream.json")
        write_field(ws.path(f"{name}_harmonic.json"), "vec2", parts.harmonic.data)
        ws.record(f"{name}_harmonic.json")
        rel = parts.residuals["reconstruction"] / max(parts.residuals["norm_input"], 1e-300)
        clauses.append(Clause(f"hodge_reconstruction:{name}",
                              "pass" if rel <= 1e-10 else "fail", rel, 1e-10))
        rows.append({"field": name, **parts.residuals})
    _write_report(ws, "hodge_report.json",
                  {"report_version": REPORT_VERSION, "fields": rows}, clauses)
    return clauses


def _cmd_decay(cfg: RunConfig, ws: _Workspace):
    pb = _make_problem(cfg)
    res = minimize(pb.omega, cfg.gauge_options())
    clauses = []
    decay = _decay_section(pb, res, cfg.morrey_config(), clauses)
    write_csv(ws.path("decay.csv"), CSV_HEADER,
              [[r["center"][0], r["center"][1], r["R"], r["J_gammaR"], r["M_2R"],
                r["ratio"], int(r["smallness_ok"]), r["omega_mass"]]
               for r in decay["rows"]])
    ws.record("decay.csv")
    _write_report(ws, "decay_report.json",
                  {"report_version": REPORT_VERSION, "problem": dict(pb.metadata),
                   "decay": decay}, clauses)
    return clauses


def _cmd_frame(cfg: RunConfig, ws: _Workspace):
    from .frames import assemble_transformed_system, builtin_metric
    pb = _make_problem(cfg)
    try:
        metric = builtin_metric(cfg.metric, pb.n, cfg.metric_params)
    except ValueError as e:
        raise ConfigError(f"metric_params: {e}") from e
    # equation convention: -div(2 g grad u) + dg(grad u, grad u) = Omega . grad u,
    # so the generated pair (u, Omega) enters with a factor -2
    om_eq = SkewPotential(pb.grid, pb.n, -2.0 * pb.omega.data)
    system = assemble_transformed_system(metric, om_eq, pb.u)

    U = np.stack([ui.data for ui in pb.u], axis=-1)
    gram = 0.0
    for i in range(0, pb.grid.n_cells, max(1, pb.grid.n_cells // 16)):
        for j in range(0, pb.grid.n_cells, max(1, pb.grid.n_cells // 16)):
            E = system.A[i, j]
            gram = max(gram, float(np.max(np.abs(E.T @ E - metric.g_at(U[i, j])))))
    om = system.omega.data
    omt = system.omega_tilde.data
    anti = max(float(np.max(np.abs(om + np.swapaxes(om, 2, 3)))),
               float(np.max(np.abs(omt + np.swapaxes(omt, 2, 3)))))

    clauses = [
        Clause("frame_factorization", "pass" if gram <= 1e-10 else "fail", gram, 1e-10),
        Clause("antisymmetry", "pass" if anti == 0.0 else "fail", anti, 0.0),
        Clause("inversion", "pass" if system.inversion_residual <= 1e-10 else "fail",
               system.inversion_residual, 1e-10),
    ]
    if cfg.metric == "euclidean":
        collapse = float(np.max(np.abs(system.omega_tilde.data - om_eq.data)))
        clauses.append(Clause("euclidean_collapse",
                              "pass" if collapse == 0.0 else "fail", collapse, 0.0))

    from .frames import transformed_residual
    body = {
        "report_version": REPORT_VERSION,
        "metric": cfg.metric,
        "metric_params": cfg.metric_params,
        "problem": dict(pb.metadata),
        "presym_defect_omega": system.presym_defect_omega,
        "presym_defect_omega_tilde": system.presym_defect_omega_tilde,
        "inversion_residual": system.inversion_residual,
        "transformed_residual": transformed_residual(system, pb.u),
    }
    norm_xi = np.sqrt(np.sum(system.xi ** 2, axis=(2, 3)))
    write_field(ws.path("xi_norm.json"), "scalar", norm_xi)
    ws.record("xi_norm.json")
    if cfg.pgm:
        write_pgm(ws.path("xi_norm.pgm"), norm_xi)
        ws.record("xi_norm.pgm")
        ws.record("xi_norm.pgm.json")
    _write_report(ws, "frame_report.json", body, clauses)
    return clauses


def _dump_pgm(ws: _Workspace, pb: ProblemInstance) -> None:
    gnorm = np.sqrt(sum(np.sum(grad(ui).data ** 2, axis=-1) for ui in pb.u))
    write_pgm(ws.path("grad_norm.pgm"), gnorm)
    ws.record("grad_norm.pgm")
    ws.record("grad_norm.pgm.json")
    write_pgm(ws.path("omega_norm.pgm"), pb.omega.pointwise_norm())
    ws.record("omega_norm.pgm")
    ws.record("omega_norm.pgm.json")


def _cmd_pipeline(cfg: RunConfig, ws: _Workspace):
    pb = _make_problem(cfg)
    rep = run_pipeline(pb, cfg.gauge_options(), cfg.morrey_config(),
                       per_ball=cfg.per_ball, workers=cfg.workers)
    write_json(ws.path("report.json"), rep.to_dict())
    ws.record("report.json")
    write_csv(ws.path("decay.csv"), CSV_HEADER,
              [[r["center"][0], r["center"][1], r["R"], r["J_gammaR"], r["M_2R"],
                r["ratio"], int(r["smallness_ok"]), r["omega_mass"]]
               for r in rep.decay["rows"]])
    ws.record("decay.csv")
    if cfg.pgm:
        _dump_pgm(ws, pb)
    for line in rep.summary_lines():
        print(line)
    return list(rep.clauses)


_HANDLERS = {
    "generate": _cmd_generate,
    "gauge": _cmd_gauge,
    "hodge": _cmd_hodge,
    "decay": _cmd_decay,
    "frame": _cmd_frame,
    "pipeline": _cmd_pipeline,
}


def run(config: RunConfig) -> int:
    """Execute the configured subcommand; returns the process exit code."""
    try:
        handler = _HANDLERS[config.subcommand]
        ws = _Workspace(config.output)
        clauses = handler(config, ws)
        ws.write_manifest(config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (GaugelabError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if any(c.status == "fail" for c in clauses):
        return 2
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
