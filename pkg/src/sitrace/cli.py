"""Command-line front end.

    sitrace analyze    --system NAME [...]          trace profiles (exit 0, 2 config, 3 refusal)
    sitrace verify     {ntf,full-space,wavelet,scaling-match,mra} [...]   exit 0/1/4 = PASS/FAIL/INCONCLUSIVE
    sitrace properties [--seed N] [--perturb EPS]   identity harness
    sitrace catalog                                 list built-in systems
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import MRA_PAIRS, catalog_get, listing
from .config import ConfigError, RunConfig, parse_matrix, split_list
from .lattice import dilation as make_dilation
from .lattice import window
from .results import FAIL, INCONCLUSIVE, PASS, to_csv, to_json
from .spectra import GeneratorSystem, parse_piecewise, perturb, quasi_orthogonalize, sample_grid

EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 4, "UNTESTABLE": 4}
EXIT_CONFIG, EXIT_REFUSED = 2, 3
CHECKS = ("ntf", "full-space", "wavelet", "scaling-match", "mra")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI-style config file; flags override it")
    p.add_argument("--system", action="append", help="catalog name or [spectrum:NAME]; repeat or comma-separate")
    p.add_argument("--wavelet", help="wavelet system for wavelet checks")
    p.add_argument("--scaling", help="scaling system for scaling-match and mra")
    p.add_argument("--dilation", help="integer matrix, row-major comma list (e.g. 2 or 1,1,1,-1)")
    p.add_argument("--grid", type=int, help="grid points per axis (default 1024; 2D uses sqrt)")
    p.add_argument("--window", type=int, help="lattice window radius K (default 128 in 1D, 8 in 2D)")
    p.add_argument("--depth", type=int, help="scale depth J (default 30)")
    p.add_argument("--s-range", type=int, dest="s_range", help="|s|_inf range for cross equations (default 8)")
    p.add_argument("--tol", type=float, help="identity tolerance")
    p.add_argument("--seed", type=lambda v: int(v, 0), help="PRNG seed (default 0x5EED)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), help="profile output format")
    p.add_argument("--quasi-orthogonalize", action="store_true", default=None, dest="quasi_orthogonalize")
    p.add_argument("--unchecked", action="store_true", default=None, help="skip NTF certification")
    p.add_argument("--perturb", type=float, help="multiply one spectrum by 1 + eps sin(...)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sitrace", description="Local trace functions of shift-invariant spaces")
    parser.add_argument("--version", action="version", version=f"sitrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("analyze", help="dimension and spectral function profiles"))
    v = sub.add_parser("verify", help="run one certificate")
    v.add_argument("check", choices=CHECKS)
    _common(v)
    _common(sub.add_parser("properties", help="run the identity harness"))
    sub.add_parser("catalog", help="list catalog systems")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"config: {exc}") from None
        cfg = RunConfig.from_ini(text)
    if args.system:
        cfg.systems = [n for item in args.system for n in split_list(item)]
    for name in ("wavelet", "scaling", "grid", "window", "depth", "s_range", "tol", "seed", "out",
                 "format", "quasi_orthogonalize", "unchecked", "perturb"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if args.dilation is not None:
        cfg.dilation = parse_matrix(args.dilation, "--dilation")
    return cfg.validate()


def resolve(name: str, cfg: RunConfig) -> GeneratorSystem:
    if name in cfg.spectra:
        try:
            g = parse_piecewise(name, cfg.spectra[name])
        except ValueError as exc:
            raise ConfigError(f"spectrum:{name}: {exc}") from None
        return GeneratorSystem((g,), 1, "unverified", name)
    try:
        return catalog_get(name)
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from None


def build_system(names: list[str], cfg: RunConfig, qo: bool = False) -> GeneratorSystem:
    if not names:
        raise ConfigError("system: no system given (use --system)")
    parts = [resolve(n, cfg) for n in names]
    n = parts[0].dimension
    if any(p.dimension != n for p in parts):
        raise ConfigError("system: generators of different dimensions")
    gens = [g for p in parts for g in p.generators]
    W = window(n, cfg.window_for(n))
    if qo:
        gens = [quasi_orthogonalize(g, W) for g in gens]
    if cfg.perturb:
        gens[0] = perturb(gens[0], cfg.perturb, cfg.seed)
    return GeneratorSystem(tuple(gens), n, "unverified", "+".join(names))


def grid_for(n: int, M: int) -> np.ndarray:
    side = M if n == 1 else max(2, int(round(M ** (1.0 / n))))
    return sample_grid(n, side)


def _dilation(cfg: RunConfig, n: int):
    entries = cfg.dilation if cfg.dilation is not None else (np.eye(n, dtype=int) * 2).tolist()
    try:
        A = make_dilation(entries)
    except ValueError as exc:
        raise ConfigError(f"dilation: {exc}") from None
    if A.dimension != n:
        raise ConfigError(f"dilation: matrix is {A.dimension}x{A.dimension} but the system has dimension {n}")
    return A


def _emit(cfg: RunConfig, report: dict, files: dict[str, str], stem: str):
    text = to_json(report)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.json").write_text(text, encoding="utf-8", newline="\n")
        for fname, body in files.items():
            (out / fname).write_text(body, encoding="utf-8", newline="\n")
    elif cfg.format == "json":
        sys.stdout.write(text)


def _config_echo(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out", None)
    return d


def cmd_analyze(cfg: RunConfig) -> int:
    from .trace import CertificationError, certify, dimension_function, spectral_function
    gs = build_system(cfg.systems, cfg, cfg.quasi_orthogonalize)
    n = gs.dimension
    W = window(n, cfg.window_for(n))
    grid = grid_for(n, cfg.grid)
    try:
        cs = certify(gs, W, tol=cfg.rank_tol, unchecked=cfg.unchecked)
    except CertificationError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    dim = dimension_function(cs, grid, W)
    sig = spectral_function(cs, grid, W)
    report = {
        "version": __version__,
        "command": "analyze",
        "config": _config_echo(cfg),
        "certificate": cs.certificate.to_dict(),
        "dimension_function": {"max": float(dim.values.max()), "min": float(dim.values.min()),
                               "max_error_bar": float(dim.truncation_error.max()), "flags": dim.flags},
        "spectral_function": {"max": float(sig.values.max()), "min": float(sig.values.min())},
    }
    files = {}
    if cfg.format == "csv":
        files = {"dimension_function.csv": dim.to_csv(), "spectral_function.csv": sig.to_csv()}
    else:
        report["profiles"] = {"points": dim.points, "dimension": dim.values, "dimension_error": dim.truncation_error,
                              "spectral": sig.values}
    _emit(cfg, report, files, "analyze")
    print(f"analyze {gs.name}: certificate {cs.certificate.verdict}, dim in "
          f"[{dim.values.min():.12g}, {dim.values.max():.12g}], {grid.shape[0]} points", file=sys.stderr)
    if cfg.format == "csv" and not cfg.out:
        sys.stdout.write(dim.to_csv())
    return 0


def _wavelet_inputs(cfg: RunConfig):
    from .wavelet import WaveletSystem
    name = cfg.wavelet or (cfg.systems[0] if cfg.systems else None)
    if name is None:
        raise ConfigError("wavelet: no wavelet given (use --wavelet or --system)")
    psis = build_system([name] if cfg.wavelet else cfg.systems, cfg)
    A = _dilation(cfg, psis.dimension)
    try:
        ws = WaveletSystem(psis, A, cfg.depth)
    except ValueError as exc:
        raise ConfigError(f"dilation: {exc}") from None
    return ws


def cmd_verify(cfg: RunConfig, check: str) -> int:
    from .gramian import certify_ntf, frame_bounds, full_space_check
    from .wavelet import characterize_ntf_wavelet, full_space_system, mra_consistency, scaling_wavelet_match
    files: dict[str, str] = {}
    extra: dict = {}
    if check == "ntf":
        gs = build_system(cfg.systems, cfg, cfg.quasi_orthogonalize)
        W = window(gs.dimension, cfg.window_for(gs.dimension))
        grid = grid_for(gs.dimension, cfg.grid)
        cert = certify_ntf(gs, grid, W, cfg.rank_tol)
        fb = frame_bounds(gs, grid, W, cfg.rank_tol)
        extra["frame_bounds"] = {"A": fb.A, "B": fb.B, "degenerate": fb.degenerate}
        header = [f"xi_{i + 1}" for i in range(gs.dimension)] if gs.dimension > 1 else ["xi"]
        files["frame_extremes.csv"] = to_csv(header + ["min_nonzero_eig", "max_eig"], fb.csv_rows())
    elif check == "full-space":
        if cfg.wavelet:
            ws = _wavelet_inputs(cfg)
            K = cfg.window if cfg.window is not None else 8
            W = window(ws.dimension, K)
            gs = full_space_system(ws, W=W)
        else:
            gs = build_system(cfg.systems, cfg, cfg.quasi_orthogonalize)
            W = window(gs.dimension, cfg.window_for(gs.dimension))
        cert = full_space_check(gs, grid_for(gs.dimension, cfg.grid), W, cfg.tol)
    elif check == "wavelet":
        ws = _wavelet_inputs(cfg)
        rep = characterize_ntf_wavelet(ws, grid_for(ws.dimension, cfg.grid), cfg.s_range, cfg.tol)
        cert = rep.certificate
        if cfg.format == "csv":
            files["wavelet_residuals.csv"] = to_csv(["xi", "eq_id", "residual", "tail_bound"], rep.csv_rows())
    else:
        ws = _wavelet_inputs(cfg)
        scaling = cfg.scaling or MRA_PAIRS.get(cfg.wavelet or "")
        if scaling is None:
            raise ConfigError("scaling: no scaling system given (use --scaling)")
        phis = build_system([scaling], cfg)
        grid = grid_for(ws.dimension, cfg.grid)
        if check == "scaling-match":
            cert = scaling_wavelet_match(ws, phis, grid, cfg.s_range, cfg.tol)
        else:
            cert = mra_consistency(ws, phis, grid, cfg.s_range, cfg.tol)
    report = {"version": __version__, "command": f"verify {check}", "config": _config_echo(cfg),
              "verdict": cert.verdict, "certificate": cert.to_dict()}
    report.update(extra)
    _emit(cfg, report, files, f"verify-{check}")
    print(f"{check}: {cert.verdict} residual={cert.residual!r} error_bar={cert.error_bar!r}")
    return EXIT[cert.verdict]


def cmd_properties(cfg: RunConfig) -> int:
    from .harness import run_properties
    report = run_properties(cfg.grid, cfg.tol, cfg.seed, cfg.perturb)
    _emit(cfg, report, {}, "properties")
    for c in report["checks"]:
        print(f"{c['verdict']:<13} {c['name']}  residual={c['residual']!r}")
    print(f"properties: {report['verdict']} {report['summary']}")
    return EXIT[report["verdict"]]


def cmd_catalog() -> int:
    for name, dim, note in listing():
        print(f"{name:<18} {'n' if dim == 0 else dim}  {note}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = os.environ.get("SITRACE_THREADS")
    if threads is not None and (not threads.isdigit() or int(threads) < 1):
        print("error: SITRACE_THREADS must be a positive integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "catalog":
        return cmd_catalog()
    try:
        cfg = load_config(args)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.check)
        return cmd_properties(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
