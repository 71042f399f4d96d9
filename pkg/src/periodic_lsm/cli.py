"""Command-line driver: ``periodic-lsm {forward,synth,invert,selftest}``.

Exit codes: 0 success, 1 self-test failure, 2 invalid input (config,
matrix file, sampling), 3 solver failure (Wood anomaly, singular system).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, InsufficientSampling, LSMError, MatrixFormatError
from .forward import assemble, solve_plane_wave
from .greens import WaveParams
from .inverse import (NearFieldMatrix, add_noise, build_matrix, extract_surface, frobenius_ratio,
                      indicator_grid)
from .rayleigh import efficiencies, to_csv
from .selftest import run_selftest

log = logging.getLogger("periodic_lsm")

EXIT_OK, EXIT_SELFTEST, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
_INPUT_ERRORS = (ConfigError, InsufficientSampling, MatrixFormatError)


def _blob_sha1(data: bytes) -> str:
    """Content address in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _write(out: Path, name: str, text: str, record: dict) -> None:
    data = text.encode()
    (out / name).write_bytes(data)
    record[name] = {"git_sha1": _blob_sha1(data), "bytes": len(data)}


def _write_manifest(out: Path, command: str, cfg: ExperimentConfig, outputs: dict, extra: dict) -> None:
    manifest = {"command": command, "version": __version__, "config_sha256": cfg.digest(),
                "outputs": outputs, **extra}
    (out / "manifest.json").write_bytes((json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(n: int) -> int:
    return os.cpu_count() or 1 if n == 0 else max(1, n)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _setup(cfg: ExperimentConfig):
    profile = cfg.build_profile()
    params = WaveParams(cfg.wave.k, cfg.wave.alpha_value, cfg.wave.period, cfg.wave.trunc_value)
    solver = assemble(params, profile, cfg.build_dissection(), cfg.solver.n_nodes, cfg.b_value(profile))
    return params, profile, solver


def cmd_forward(cfg: ExperimentConfig, args) -> int:
    if cfg.wave.theta is None:
        raise ConfigError("forward needs wave.theta (incidence angle)")
    params, profile, solver = _setup(cfg)
    field = solve_plane_wave(solver, cfg.wave.theta)
    seq = field.rayleigh()
    eff, total = efficiencies(seq, cfg.wave.k * np.sin(cfg.wave.theta))
    res = field.boundary_residual()
    out = _out_dir(args, cfg)
    outputs: dict = {}
    _write(out, "rayleigh.csv", to_csv(seq), outputs)
    lines = ["n,efficiency"] + [f"{n[0]},{_fmt(e)}" for n, e in eff.items()] + [f"total,{_fmt(total)}"]
    _write(out, "efficiencies.csv", "\n".join(lines) + "\n", outputs)
    lines = ["quantity,value", f"dirichlet_residual,{_fmt(res['dirichlet'])}",
             f"impedance_residual,{_fmt(res['impedance'])}",
             f"factorization_residual,{_fmt(solver.factorization_residual())}"]
    _write(out, "residuals.csv", "\n".join(lines) + "\n", outputs)
    _write_manifest(out, "forward", cfg, outputs, {"efficiency_total": total})
    print(f"efficiency total = {total:.12f}")
    print(f"boundary residual: dirichlet {res['dirichlet']:.2e}, impedance {res['impedance']:.2e}")
    return EXIT_OK


def cmd_synth(cfg: ExperimentConfig, args) -> int:
    params, profile, solver = _setup(cfg)
    clean = build_matrix(solver, cfg.M_value())
    noisy = add_noise(clean, cfg.data.noise, cfg.data.seed)
    ratio = frobenius_ratio(noisy, clean)
    out = _out_dir(args, cfg)
    outputs: dict = {}
    _write(out, "matrix.csv", noisy.to_csv(), outputs)
    _write_manifest(out, "synth", cfg, outputs, {"noise_frobenius_ratio": ratio, "seed": cfg.data.seed})
    print(f"near-field matrix M={noisy.M}, noise ratio {ratio:.12g}, sigma_max {noisy.s[0]:.4e}")
    return EXIT_OK


def _load_matrix(path) -> NearFieldMatrix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MatrixFormatError(f"cannot read matrix file: {exc}") from None
    return NearFieldMatrix.from_csv(text)


def cmd_invert(cfg: ExperimentConfig, args) -> int:
    if not args.matrix:
        raise ConfigError("invert needs --matrix PATH")
    matrix = _load_matrix(args.matrix)
    profile = cfg.build_profile()
    b = cfg.b_value(profile)
    for key, want in (("k", cfg.wave.k), ("alpha", cfg.wave.alpha_value), ("b", b)):
        got = getattr(matrix, key)
        if abs(got - want) > 1e-12 * max(1.0, abs(want)):
            raise ConfigError(f"matrix {key}={got} does not match config {key}={want}")
    grid = indicator_grid(matrix, cfg.region(b), cfg.inversion.resolution, _threads(args.threads))
    est = extract_surface(grid, cfg.inversion.level)
    out = _out_dir(args, cfg)
    outputs: dict = {}
    _write(out, "indicator.csv", grid.to_csv(), outputs)
    _write(out, "surface.csv", est.to_csv(), outputs)
    Z1, Z2 = np.meshgrid(grid.z1, grid.z2)
    fz = profile.f(Z1)
    above, below = grid.indicator[Z2 > fz], grid.indicator[Z2 < fz]
    contrast = float(np.median(above) / np.median(below)) if above.size and below.size else float("nan")
    err = est.max_error(profile)
    flags = {f: int(np.sum(grid.flag == f)) for f in ("ok", "floor", "unsolvable")}
    _write_manifest(out, "invert", cfg, outputs,
                    {"contrast_ratio": contrast, "surface_max_error": err, "flags": flags})
    print(f"indicator contrast (median above / below) = {contrast:.4g}")
    print(f"surface max vertical error = {err:.4g} ({int(np.sum(est.missing))} columns missing)")
    print(f"points: {flags}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    checks = run_selftest(args.samples, args.seed)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print("selftest: " + ("all invariants pass" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="periodic-lsm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("forward", "synth", "invert"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None, help="output directory (default: config 'output')")
        sp.add_argument("--threads", type=int, default=1, help="0 = one per CPU; never changes results")
        if name == "invert":
            sp.add_argument("--matrix", required=True)
    st = sub.add_parser("selftest")
    st.add_argument("--samples", type=int, default=20)
    st.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        cfg = load_config(args.config)
        return {"forward": cmd_forward, "synth": cmd_synth, "invert": cmd_invert}[args.command](cfg, args)
    except _INPUT_ERRORS as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LSMError as exc:
        print(f"solver failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
