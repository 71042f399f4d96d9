"""Acceptance criteria 1-7; each test records a PASS/FAIL line for the terminal summary."""
import time
from pathlib import Path

import numpy as np
import pytest

from periodic_lsm import cli
from periodic_lsm.config import load_config
from periodic_lsm.forward import (ModalField, assemble, incident_from_density, near_trace,
                                  representation_check, scattered_downgoing, scattered_for_density,
                                  solve_boundary_data, solve_incident, solve_plane_wave, split_data,
                                  upgoing_part)
from periodic_lsm.geometry import Dissection, Profile, classify
from periodic_lsm.greens import WaveParams, greens_qp, mode_split
from periodic_lsm.inverse import (NearFieldMatrix, add_noise, build_matrix, morozov_alpha,
                                  rhs_for_point, tikhonov_solve)
from periodic_lsm.rayleigh import efficiencies
from periodic_lsm.selftest import run_selftest

ROOT = Path(__file__).resolve().parents[1]
K = 1.5
FLAT = Profile("flat", height=1.0)
SINE = Profile("sinusoidal", height=1.0, amplitude=0.3)
HALF = Dissection(((0.0, np.pi),), 1.0)
E2E = {"flat": ("flat_mixed.yaml", 0.05), "sinusoidal": ("sinusoidal_mixed.yaml", 0.15),
       "triangle": ("triangle_mixed.yaml", 0.15)}


def test_criterion_1_greens_invariants(criterion):
    t0 = time.perf_counter()
    checks = {c.name: c for c in run_selftest(100, seed=2024)}
    elapsed = time.perf_counter() - t0
    want = {"quasi_periodicity": 1e-10, "reciprocity": 1e-12, "mode_split_identity": 1e-12,
            "helmholtz_fd": 1e-4}
    ok = all(checks[n].residual < tol for n, tol in want.items()) and elapsed < 30
    detail = ", ".join(f"{n}={checks[n].residual:.1e}" for n in want) + f"; {elapsed:.1f}s for 100 configs"
    assert criterion("1 green-function suite", ok, detail), detail


def test_criterion_2_forward_oracles(criterion):
    t0 = time.perf_counter()
    p = WaveParams(K, 0.0)
    i0 = p.mode_position(0)
    r_dir = solve_plane_wave(assemble(p, FLAT, Dissection.dirichlet()), np.pi / 2).rayleigh().physical()[i0]
    err_dir = abs(abs(r_dir) - 1)
    r_imp = solve_plane_wave(assemble(p, FLAT, Dissection(((0.0, 2 * np.pi),), 1.0)),
                             np.pi / 2).rayleigh().physical()[i0]
    err_imp = abs(r_imp - (K - 1.0) / (K + 1.0) * np.exp(-2j * K))
    theta = 1.2
    q = WaveParams(K, K * np.cos(theta))
    energy = []
    for n in (256, 512):
        field = solve_plane_wave(assemble(q, SINE, Dissection.dirichlet(), n), theta)
        energy.append(efficiencies(field.rayleigh(), K * np.sin(theta))[1])
    elapsed = time.perf_counter() - t0
    ok = (err_dir < 1e-8 and err_imp < 1e-8 and abs(energy[0] - 1) < 1e-3 and abs(energy[1] - 1) < 1e-6
          and elapsed < 60)
    detail = (f"flat Dirichlet ||R0|-1|={err_dir:.1e}, flat impedance |R0-oracle|={err_imp:.1e}, "
              f"energy-1: n=256 {energy[0] - 1:.1e}, n=512 {energy[1] - 1:.1e}; {elapsed:.1f}s")
    assert criterion("2 forward oracles", ok, detail), detail


def test_criterion_3_representation(criterion):
    solver = assemble(WaveParams(K, 0.0), SINE, HALF, 256)
    z0 = np.array([1.0, 0.3])
    pts, nu = solver.mesh.points, solver.mesh.normals
    val, gx, gy = solver.kernel.evaluate(pts[:, 0] - z0[0], pts[:, 1] - z0[1], grad=True)
    data = val.copy()
    imp = solver.mesh.impedance
    data[imp] = (gx * nu[:, 0] + gy * nu[:, 1])[imp] + 1j * val[imp]
    field = solve_boundary_data(solver, *split_data(solver, data))
    rng = np.random.default_rng(7)
    x = []
    while len(x) < 10:
        cand = rng.uniform([0, 1.0], [2 * np.pi, solver.b - 0.01])
        if classify(SINE, cand).distance >= 0.1:
            x.append(cand)
    x = np.array(x)
    exact = solver.kernel.evaluate(x[:, 0] - z0[0], x[:, 1] - z0[1])
    recon = float(np.max(np.abs(field.scattered(x) - exact) / np.abs(exact)))
    rep = max(representation_check(solver, field, xi) for xi in x)
    ok = recon < 1e-6 and rep < 1e-6
    detail = f"planted point source: field error {recon:.1e}, representation residual {rep:.1e} (n=256)"
    assert criterion("3 representation formula", ok, detail), detail


def test_criterion_4_synthesis(criterion):
    solver = assemble(WaveParams(K, 0.0), SINE, HALF, 256)
    p, b = solver.params, solver.b
    M = 2 * p.trunc + 1
    rng = np.random.default_rng(11)
    g = rng.standard_normal((M, 3)) + 1j * rng.standard_normal((M, 3))
    res = {"dirichlet": 0.0, "impedance": 0.0}
    for j in range(g.shape[1]):
        r = scattered_for_density(solver, g[:, j]).boundary_residual()
        res = {key: max(res[key], r[key]) for key in res}
    # the closed-form incident and upgoing pieces against direct Green-function quadrature
    y = np.stack([np.arange(M) * p.period[0] / M, np.full(M, b)], axis=1)
    w = p.period[0] / M
    nodes = solver.mesh.points[::16]
    u_in = incident_from_density(p, b, g[:, 0])(nodes)
    u_up = upgoing_part(p, b, g[:, 0])(nodes)
    direct_in = np.array([np.sum(w * np.conj(g[:, 0] * greens_qp(p, y, x))) for x in nodes])
    direct_up = np.array([np.sum(w * np.conj(g[:, 0]) * mode_split(p, x, y)[0]) for x in nodes])
    pieces = max(np.max(np.abs(u_in - direct_in)), np.max(np.abs(u_up - direct_up)))
    # factorization route: radiating solve with the incident boundary data, no mode split
    synth = near_trace(scattered_for_density(solver, g), M)
    data = solver.boundary_data(incident_from_density(p, b, g))
    direct = near_trace(solve_boundary_data(solver, *split_data(solver, data)), M)
    factor = float(np.max(np.abs(synth + direct)) / np.max(np.abs(synth)))

    dsolver = assemble(p, SINE, Dissection.dirichlet(), 256)
    h = g[:, 1]
    route_a = near_trace(scattered_downgoing(dsolver, h), M)
    hc = np.conj(h)
    x_b = y
    s = np.exp(-1j * np.outer(p.alpha_n[:, 0], x_b[:, 0])) @ (h * w)
    amp = np.where(p.propagating, p.prefactor / (1j * p.beta), 0.0)
    corr = solve_incident(dsolver, ModalField(p, amp * s, -p.beta, b))
    route_b = (near_trace(scattered_for_density(dsolver, hc), M) - upgoing_part(p, b, hc)(x_b)
               + near_trace(corr, M))
    two_route = float(np.max(np.abs(route_a - route_b)) / np.max(np.abs(route_a)))
    ok = (res["dirichlet"] < 1e-7 and res["impedance"] < 1e-7 and two_route < 1e-7 and pieces < 1e-10
          and factor < 1e-7)
    detail = (f"node residual D={res['dirichlet']:.1e}, I={res['impedance']:.1e}; "
              f"closed-form pieces vs quadrature {pieces:.1e}; NH+F {factor:.1e}; "
              f"two-route (Dirichlet) {two_route:.1e}")
    assert criterion("4 synthesis identity", ok, detail), detail


def test_criterion_5_regularization(criterion):
    rng = np.random.default_rng(5)
    # closed forms: diagonal operators give g_i = s_i b_i / (s_i^2 + a) in the singular basis
    worst_closed = 0.0
    for _ in range(20):
        n = 6
        Q1, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        Q2, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        s = np.sort(rng.uniform(0.1, 2.0, n))[::-1]
        A = NearFieldMatrix(Q1 @ np.diag(s) @ Q2.conj().T, 1.0, 0.1, 2.0)
        rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        a = rng.uniform(0.01, 1.0)
        h = Q2 @ (s / (s**2 + a) * (Q1.conj().T @ rhs))
        g, _ = tikhonov_solve(A, rhs, a)
        worst_closed = max(worst_closed, np.max(np.abs(g - np.conj(h))))
    g, r = tikhonov_solve(NearFieldMatrix(np.eye(3, dtype=complex), 1.0, 0.1, 2.0), np.eye(3)[0], 1.0)
    worst_closed = max(worst_closed, np.max(np.abs(g - np.eye(3)[0] / 2)), abs(r - 0.5))

    solver = assemble(WaveParams(K, 0.0), SINE, HALF, 256)
    clean = build_matrix(solver)
    noisy = add_noise(clean, 0.01, 0)
    worst_disc = 0.0
    for z in ([1.0, 0.4], [3.0, 0.8], [5.0, 1.1], [2.0, 1.6]):
        rhs = rhs_for_point(noisy.params, noisy.b, noisy.M, np.array(z))
        a = morozov_alpha(noisy, rhs)
        _, res = tikhonov_solve(noisy, rhs, a)
        worst_disc = max(worst_disc, abs(res - 0.01 * np.linalg.norm(rhs)) / np.linalg.norm(rhs))
    h = rng.standard_normal(clean.M) + 1j * rng.standard_normal(clean.M)
    consistent = clean.apply(h)
    alphas = [morozov_alpha(clean, consistent, d) for d in (1e-1, 1e-2, 1e-3)]
    monotone = alphas[0] > alphas[1] > alphas[2] > 0
    ok = worst_closed < 1e-12 and worst_disc < 1e-8 and monotone
    detail = (f"closed forms {worst_closed:.1e}, discrepancy equation {worst_disc:.1e}, "
              f"alpha(delta) = " + ", ".join(f"{a:.2e}" for a in alphas))
    assert criterion("5 regularization", ok, detail), detail


def _pipeline(cfg_path: Path, out: Path):
    assert cli.main(["synth", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert cli.main(["invert", "--config", str(cfg_path), "--matrix", str(out / "matrix.csv"),
                     "--out", str(out)]) == 0


@pytest.fixture(scope="module")
def e2e_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("e2e")
    runs = {}
    for name, (cfg, _) in E2E.items():
        t0 = time.perf_counter()
        _pipeline(ROOT / "configs" / cfg, base / name / "run1")
        runs[name] = (base / name, time.perf_counter() - t0)
    return runs


def _read_grid(path: Path):
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    return data["z1"], data["z2"], data["indicator"]


def test_criterion_6_end_to_end(criterion, e2e_runs):
    parts, ok = [], True
    for name, (cfg, tol) in E2E.items():
        cfg_obj = load_config(ROOT / "configs" / cfg)
        assert cfg_obj.wave.k == K and cfg_obj.data.noise == 0.01 and cfg_obj.M_value() == 61
        assert cfg_obj.inversion.resolution == (64, 64)
        assert cfg_obj.dissection.impedance_intervals == [(0.0, np.pi)] and cfg_obj.dissection.lam == 1.0
        profile = cfg_obj.build_profile()
        run_dir, elapsed = e2e_runs[name]
        z1, z2, ind = _read_grid(run_dir / "run1" / "indicator.csv")
        above, below = ind[z2 > profile.f(z1)], ind[z2 < profile.f(z1)]
        contrast = float(np.median(above) / np.median(below))
        est = np.genfromtxt(run_dir / "run1" / "surface.csv", delimiter=",", names=True)
        f_est = est["f_est"]
        err = float(np.max(np.abs(f_est - profile.f(est["t"])))) if np.all(np.isfinite(f_est)) else np.inf
        good = contrast >= 10 and err < tol and elapsed < 300
        ok &= good
        parts.append(f"{name}: contrast {contrast:.1f}, surface error {err:.3f} (tol {tol}), {elapsed:.0f}s")
    detail = "; ".join(parts)
    assert criterion("6 end-to-end LSM", ok, detail), detail


def test_criterion_7_determinism(criterion, e2e_runs):
    mismatched = []
    for name, (cfg, _) in E2E.items():
        run_dir, _ = e2e_runs[name]
        _pipeline(ROOT / "configs" / cfg, run_dir / "run2")
        for csv in sorted((run_dir / "run1").glob("*.csv")) + [run_dir / "run1" / "manifest.json"]:
            if csv.read_bytes() != (run_dir / "run2" / csv.name).read_bytes():
                mismatched.append(f"{name}/{csv.name}")
    ok = not mismatched
    detail = "all CSVs and manifests byte-identical across reruns" if ok else "differ: " + ", ".join(mismatched)
    assert criterion("7 determinism", ok, detail), detail
