"""Command-line entry point: config ingestion, the five workflows
(simulate, check, table, verify, steady) and all file emission.

Exit codes: 0 success, 1 usage/config failure, 2 check/verify found the
condition violated, 3 simulation ended with a suspected blow-up."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, solver
from .grid import GridSpec, ScalarField, osc, sample_cosine_field, write_field
from .model import DerivedBounds, ModelParams, ShortParams


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit 1 (not argparse's default 2) on bad flags
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------

_SECTIONS = {
    "model": {"kind", "eta", "psi", "omega", "atilde", "chi", "a0", "abar"},
    "grid": {"L", "n"},
    "time": {"t_end", "dt_init", "dt_min", "dt_max", "output_every"},
    "ic": {"recipe", "a0", "n0", "amplitude", "mode_j", "mode_k", "path_A", "path_N"},
    "numerics": {"flux_scheme", "cfl", "guard_tol"},
    "outputs": {"dir", "snapshots", "diagnostics"},
}


def _check_keys(section: str, doc: dict) -> None:
    unknown = set(doc) - _SECTIONS[section]
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in section '{section}'")


def load_config(path) -> tuple[solver.SimConfig, dict]:
    """Parse and validate the JSON run configuration; returns the SimConfig
    and the output options (dir, snapshots, diagnostics)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level section(s) {sorted(unknown)}")
    for sec in ("model", "grid", "time"):
        if sec not in doc:
            raise ConfigError(f"missing required section '{sec}'")
    for sec, body in doc.items():
        if not isinstance(body, dict):
            raise ConfigError(f"section '{sec}' must be a JSON object")
        _check_keys(sec, body)

    m = doc["model"]
    kind = m.get("kind", "main")
    try:
        if kind in ("main", "pitcher"):
            params = ModelParams(
                eta=float(m["eta"]),
                psi=float(m["psi"]),
                omega=float(m["omega"]),
                atilde=float(m["atilde"]),
                chi=float(m.get("chi", 2.0)),
            )
        elif kind == "short":
            params = ShortParams(
                eta=float(m["eta"]),
                a0=float(m["a0"]),
                abar=float(m["abar"]),
                chi=float(m.get("chi", 2.0)),
            )
        else:
            raise ConfigError(f"unknown model kind {kind!r}")
        grid = GridSpec(L=float(doc["grid"]["L"]), n=int(doc["grid"]["n"]))
        t = doc["time"]
        ic_doc = doc.get("ic", {"recipe": "perturbed_steady", "amplitude": 0.0})
        ic = solver.InitialCondition(
            recipe=ic_doc.get("recipe", "perturbed_steady"),
            a0=ic_doc.get("a0"),
            n0=ic_doc.get("n0"),
            amplitude=ic_doc.get("amplitude"),
            mode_j=int(ic_doc.get("mode_j", 1)),
            mode_k=int(ic_doc.get("mode_k", 1)),
            path_A=ic_doc.get("path_A"),
            path_N=ic_doc.get("path_N"),
        )
        num = doc.get("numerics", {})
        config = solver.SimConfig(
            grid=grid,
            params=params,
            t_end=float(t["t_end"]),
            dt_init=float(t.get("dt_init", 1e-3)),
            dt_min=float(t.get("dt_min", 1e-9)),
            dt_max=(None if t.get("dt_max") is None else float(t["dt_max"])),
            output_every=float(t.get("output_every", float(t["t_end"]) / 10.0)),
            ic=ic,
            cfl_advection=float(num.get("cfl", 0.5)),
            flux_scheme=num.get("flux_scheme", "centered"),
            guard_tol=float(num.get("guard_tol", 1e-6)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}")

    out = doc.get("outputs", {})
    out_opts = {
        "dir": os.environ.get("HOTSPOT_OUT", out.get("dir", "out")),
        "snapshots": bool(out.get("snapshots", True)),
        "diagnostics": bool(out.get("diagnostics", True)),
    }
    return config, out_opts


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------

def _write_pgm(path: Path, field: ScalarField) -> None:
    v = field.values
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi > lo:
        bytes_ = np.rint(255.0 * (v - lo) / (hi - lo)).astype(np.uint8)
    else:
        bytes_ = np.zeros_like(v, dtype=np.uint8)
    n = field.grid.n
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode())
        # one raster row per y value, matching the .field line layout
        fh.write(bytes_.T.tobytes())
    sidecar = {"min": lo, "max": hi, "levels": 255}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def _emit_outputs(result: solver.RunResult, out_opts: dict) -> None:
    out_dir = Path(out_opts["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if out_opts["diagnostics"]:
        with open(out_dir / "diagnostics.csv", "w", buffering=1) as fh:
            fh.write(",".join(analysis.CSV_COLUMNS) + "\n")
            for rec in result.records:
                fh.write(rec.csv_row() + "\n")
    if out_opts["snapshots"]:
        for t, A, N in result.snapshots:
            tag = f"{t:.6f}"
            write_field(out_dir / f"A_{tag}.field", A)
            write_field(out_dir / f"N_{tag}.field", N)
            _write_pgm(out_dir / f"A_{tag}.pgm", A)
            _write_pgm(out_dir / f"N_{tag}.pgm", N)
    doc = {
        "outcome": result.outcome.kind,
        "t_final": result.outcome.t,
        "reason": result.outcome.reason,
        "max_step_mass_residual": result.max_step_mass_residual,
    }
    (out_dir / "outcome.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        config, out_opts = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = solver.run(config)
    _emit_outputs(result, out_opts)
    print(f"outcome: {result.outcome.kind} at t={result.outcome.t:.6g}")
    if result.outcome.kind == "completed":
        return 0
    if result.outcome.kind == "blowup_suspected":
        return 3
    print(f"reason: {result.outcome.reason}", file=sys.stderr)
    return 1


def cmd_check(args) -> int:
    if args.amin > args.amax:
        print("error: --amin must not exceed --amax", file=sys.stderr)
        return 1
    try:
        params = ModelParams(
            eta=args.eta, psi=args.psi, omega=1.0, atilde=args.atilde, chi=args.chi
        )
        bounds = DerivedBounds(a_min=args.amin, a_max=args.amax, n1_max=args.n1max)
        domain = GridSpec(L=args.L, n=8)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    override = None
    if args.mu is not None or args.K is not None:
        if args.mu is None or args.K is None:
            print("error: --mu and --K must be given together", file=sys.stderr)
            return 1
        override = (args.mu, args.K)
    report = analysis.check_global_condition(params, bounds, domain, override)
    print(report.to_json())
    return 0 if report.any_route_holds else 2


def cmd_table(args) -> int:
    try:
        etas = [float(tok) for tok in args.eta_list.split(",") if tok]
        if not etas or any(e <= 0 for e in etas):
            raise ValueError("eta values must be positive")
        gamma, _ = analysis.critical_constants(etas[0], args.psi, args.area)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"# gamma = {gamma:.6f}")
    print("eta,atilde_minus")
    for eta in etas:
        _, atm = analysis.critical_constants(eta, args.psi, args.area)
        print(f"{eta:g},{atm:.6f}")
    return 0


def cmd_verify(args) -> int:
    if args.n < 32:
        print("error: --n must be at least 32", file=sys.stderr)
        return 1
    grid = GridSpec(L=1.0, n=args.n)
    worst_ratio_l1 = 0.0
    worst_ratio_k = 0.0
    worst_gap = 0.0
    worst_slack = math.inf
    skipped = 0
    for i in range(args.samples):
        field, coeffs = sample_cosine_field(args.seed + i, args.max_mode, args.amplitude, grid)
        if osc(field) <= 1e-13:
            skipped += 1
            print(f"sample {i}: degenerate constant field skipped")
            continue
        p = analysis.poincare_probe(field)
        worst_ratio_l1 = max(worst_ratio_l1, p.ratio_l1)
        k = analysis.interpolation_probe(field, coeffs)
        worst_ratio_k = max(worst_ratio_k, k.ratio_K)
        worst_gap = max(worst_gap, k.fourier_gap)
        shifted = ScalarField(grid, field.values + 1.0 + args.amplitude)
        if np.min(shifted.values) <= 0:
            shifted = ScalarField(
                grid, field.values - float(np.min(field.values)) + 1.0
            )
            print(f"sample {i}: shift raised to keep the field positive")
        ps = analysis.poincare_probe(shifted)
        worst_slack = min(worst_slack, ps.sobolev_slack)
    mu_bound = math.sqrt(analysis.MU_SQ_SQUARE)
    print(f"samples: {args.samples} (skipped {skipped})")
    print(f"worst ratio_l1: {worst_ratio_l1:.12g} (bound {mu_bound:.12g})")
    print(f"worst ratio_K: {worst_ratio_k:.12g} (bound {analysis.K_SQUARE:g})")
    print(f"worst fourier_gap (relative): {worst_gap:.3e}")
    print(f"worst sobolev_slack: {worst_slack:.3e} (must be >= -1e-10)")
    ok = (
        worst_ratio_l1 <= mu_bound + 1e-10
        and worst_ratio_k <= analysis.K_SQUARE + 1e-10
        and worst_gap <= 1e-10
        and worst_slack >= -1e-10
    )
    print(
        "no counterexample found at sampled fields"
        if ok
        else "COUNTEREXAMPLE: a sampled field exceeded a proven bound "
        "(red flag for the discretization)"
    )
    return 0 if ok else 2


def cmd_steady(args) -> int:
    try:
        params = ModelParams(
            eta=1.0, psi=args.psi, omega=1.0, atilde=args.atilde, chi=1.0
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    from .model import steady_state

    a_star, n_star = steady_state(params)
    residual = args.psi * a_star * (1.0 - a_star) + args.atilde - a_star
    print(f"A* = {a_star:.12g}")
    print(f"N* = {n_star:.12g}")
    print(f"residual = {residual:.3e}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="hotspot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="run a simulation from a JSON config")
    p_sim.add_argument("config")
    p_sim.set_defaults(fn=cmd_simulate)

    p_chk = sub.add_parser("check", help="evaluate the global-existence condition")
    for flag in ("eta", "psi", "chi", "atilde", "amin", "amax", "n1max", "L"):
        p_chk.add_argument(f"--{flag}", type=float, required=flag != "L", default=1.0)
    p_chk.add_argument("--mu", type=float, default=None)
    p_chk.add_argument("--K", type=float, default=None)
    p_chk.set_defaults(fn=cmd_check)

    p_tab = sub.add_parser("table", help="critical static attractiveness vs eta")
    p_tab.add_argument("--psi", type=float, required=True)
    p_tab.add_argument("--area", type=float, required=True)
    p_tab.add_argument("--eta-list", required=True)
    p_tab.set_defaults(fn=cmd_table)

    p_ver = sub.add_parser("verify", help="sampled functional-inequality probes")
    p_ver.add_argument("--n", type=int, default=64)
    p_ver.add_argument("--samples", type=int, default=100)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--max-mode", type=int, default=4)
    p_ver.add_argument("--amplitude", type=float, default=0.02)
    p_ver.set_defaults(fn=cmd_verify)

    p_std = sub.add_parser("steady", help="homogeneous steady state")
    p_std.add_argument("--psi", type=float, required=True)
    p_std.add_argument("--atilde", type=float, required=True)
    p_std.set_defaults(fn=cmd_steady)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.fn(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
