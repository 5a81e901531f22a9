"""Desk-scale acceptance criteria; each test records one pass/fail line."""
import itertools
import math
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from gkvcs import assembly, cli, model, vcs, verify
from gkvcs.fock import TruncationSpec, hermiticity_defect
from gkvcs.model import ModelParams
from gkvcs.vcs import GKParams
from gkvcs.verify import QuadratureRule

DESK = ("desk-n1m1", "desk-n2m2", "desk-cm", "desk-extradiag")


def record(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def closed_form_lowest(params, k, count, cm_levels=None, span=16):
    n_grid = itertools.product(range(span), repeat=params.N)
    if cm_levels is None:
        vals = [model.energy_diag(params, k, n) for n in n_grid]
    else:
        vals = [model.energy_cm_diag(params, k, m, n) for n in n_grid for m in range(cm_levels)]
    return np.sort(vals)[:count]


def diag_cases():
    for N, M in itertools.product((1, 2), (1, 2, 3)):
        omegas = [(1.0,)] if N == 1 else [(1.0, 1.0), (1.0, 1.7)]
        for omega in omegas:
            eps = tuple(0.3 + 0.25 * i for i in range(M))
            g = tuple(np.linspace(0.1, 0.4, M))
            yield ModelParams(N=N, M=M, omega=omega, epsilon=eps, g_diag=g)


def test_criterion_1_diag_spectrum():
    start = time.perf_counter()
    worst = 0.0
    for params in diag_cases():
        for cut in (40, 60):
            spec = TruncationSpec((cut,) * params.N, None, params.M)
            bundle = assembly.build("diag", params, spec)
            for sec in model.all_sectors(params.M):
                numeric = bundle.sector(sec).eigenvalues()[:15]
                worst = max(worst, float(np.max(np.abs(numeric - closed_form_lowest(params, sec, 15)))))
                if params.N == 1:
                    d = model.sector_scalars(params, sec)
                    dense = np.linalg.eigvalsh(oracles.diag_sector_matrix(params.omega, spec.boson_cutoffs, d.eps_k, d.g_k))
                    worst = max(worst, float(np.max(np.abs(dense[:15] - numeric))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed <= 30
    record(1, ok, f"diag spectra: max abs error {worst:.2e} (<= 1e-6), {elapsed:.1f} s (<= 30 s)")
    assert ok


def test_criterion_2_cm_diag_spectrum():
    start = time.perf_counter()
    worst = 0.0
    for base in diag_cases():
        for Omega, gp in ((1.0, 0.4), (2.0, 0.25)):
            params = model.replace_params(base, Omega=Omega, g_prime=gp)
            spec = TruncationSpec((40,) * params.N, 40, params.M)
            bundle = assembly.build("cm_diag", params, spec)
            for sec in model.all_sectors(params.M):
                numeric = bundle.sector(sec).eigenvalues()[:15]
                analytic = closed_form_lowest(params, sec, 15, cm_levels=16)
                worst = max(worst, float(np.max(np.abs(numeric - analytic))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed <= 60
    record(2, ok, f"c.m. diagonal spectra: max abs error {worst:.2e} (<= 1e-6), {elapsed:.1f} s (<= 60 s)")
    assert ok


def test_criterion_3_degeneracy():
    exact = all(model.degeneracy(n, N) == oracles.count_compositions(n, N) for N in range(1, 6) for n in range(21))
    mismatches = []
    p2 = ModelParams(N=2, M=1, omega=1.0, epsilon=(0.4,), g_diag=(0.3,))
    d = model.sector_scalars(p2, 1)
    dense = np.linalg.eigvalsh(oracles.diag_sector_matrix(p2.omega, (40, 40), d.eps_k, d.g_k))
    p3 = ModelParams(N=3, M=1, omega=1.0, epsilon=(0.4,), g_diag=(0.3,))
    sep = assembly.build("diag", p3, TruncationSpec((40, 40, 40), None, 1)).sector(1).eigenvalues()
    for params, values, top in ((p2, dense, 15), (p3, sep[:400], 10)):
        clusters = verify.cluster_multiplicities(values, 1e-8)
        for n, (_, mult) in enumerate(clusters[: top + 1]):
            if mult != model.degeneracy(n, params.N):
                mismatches.append((params.N, n, mult))
    ok = exact and not mismatches
    record(3, ok, f"d(n, N) exact for N <= 5, n <= 20; truncated multiplicities {'match' if not mismatches else mismatches}")
    assert ok


CM1 = ModelParams(N=1, M=2, omega=1.0, epsilon=(0.2, 0.45), g_diag=(0.15, 0.3), Omega=2.0, g_prime=0.3)
CM2 = ModelParams(N=2, M=2, omega=1.0, epsilon=(0.2, 0.45), g_diag=(0.15, 0.3), Omega=2.0, g_prime=0.3)
DIAG1 = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.5,), g_diag=(0.2,))
DIAG2 = ModelParams(N=2, M=2, omega=(1.0, 1.7), epsilon=(0.5, 0.8), g_diag=(0.2, 0.4))
DIAG2EQ = ModelParams(N=2, M=1, omega=1.0, epsilon=(0.3,), g_diag=(0.25,))


def _extradiag(N):
    ge = np.zeros((N, 2, 2))
    ge[:, 0, 1] = ge[:, 1, 0] = 0.15
    return ModelParams(N=N, M=2, omega=1.0, epsilon=(0.3, 0.6), g_extra=ge, Omega=2.0, g_prime=0.25)


def family_setups(J):
    """(family, params, spec, gk) over every family at action J (and J' = J)."""
    c = vcs.default_cutoff(J)
    out = []
    for family, fs in vcs.FAMILIES.items():
        if fs.variant == "diag":
            params = DIAG2EQ if fs.degenerate else (DIAG1 if fs.single_mode else DIAG2)
            spec = TruncationSpec((c,) * params.N, None, params.M)
        elif fs.variant == "cm_diag":
            params = CM2 if fs.degenerate else CM1
            spec = TruncationSpec((c,) * params.N, c, params.M)
        else:
            params = _extradiag(2 if fs.degenerate else 1)
            spec = TruncationSpec((c,) * params.N, c, params.M)
        nJ = 1 if (fs.degenerate or fs.single_mode) else params.N
        cm = fs.cm is not None
        gk = GKParams((J,) * nJ, (0.3,) * nJ, 0.4 if fs.degenerate else 0.0, J if cm else None, 0.2 if cm else None,
                      sector=2**params.M - 1)
        out.append((family, params, spec, gk))
    return out


def test_criterion_4_normalization_and_continuity():
    failures = []
    count = 0
    for J in (0.5, 1.0, 2.0, 4.0):
        for family, params, spec, gk in family_setups(J):
            rep = verify.check_norm(family, params, spec, gk)
            count += 1
            if not rep.passed:
                failures.append((family, J, "norm", rep.metric))
            if J in (0.5, 2.0):
                for direction in ("J", "gamma"):
                    rep = verify.check_continuity(family, params, spec, gk, (1e-2, 1e-3, 1e-4), direction)
                    count += 1
                    if not rep.passed:
                        failures.append((family, J, direction, rep.metric))
    ok = not failures
    record(4, ok, f"normalization and continuity: {count} checks over {len(vcs.FAMILIES)} families, failures {failures or 'none'}")
    assert ok


def test_criterion_5_temporal_stability():
    failures, worst_fid, worst_ctrl = [], 0.0, 0.0
    times = list(np.linspace(0.0, 2 * math.pi, 10))
    for family, params, spec, gk in family_setups(1.0):
        rep = verify.check_temporal_stability(family, params, spec, gk, times, "family")
        worst_fid = max(worst_fid, rep.metric)
        if not rep.passed:
            failures.append((family, "stability", rep.metric))
        ctrl = verify.check_negative_control(family, params, spec, gk, times[1:4])
        worst_ctrl = max(worst_ctrl, ctrl.metric)
        if not ctrl.passed:
            failures.append((family, "negative control", ctrl.metric))
    ok = not failures
    record(5, ok, f"temporal stability: max infidelity {worst_fid:.1e}; negative-control max fidelity {worst_ctrl:.4f} (< 0.999)")
    assert ok


def test_criterion_6_action_identity():
    failures, worst = [], 0.0
    for J in (0.5, 2.0):
        for family, params, spec, gk in family_setups(J):
            rep = verify.check_action_identity(family, params, spec, gk)
            worst = max(worst, rep.metric)
            if not rep.passed:
                failures.append((family, J, rep.metric))
    # multidimensional families at equal frequencies: Omega J' + omega * sum J
    gk = GKParams((0.7, 1.3), (0.0, 0.0), J_prime=0.9, gamma_prime=0.0, sector=1)
    rhs = 2.0 * 0.9 + 1.0 * (0.7 + 1.3)
    exact = verify.action_rhs("cm_multidim", CM2, gk) == pytest.approx(rhs)
    rep = verify.check_action_identity("cm_multidim", CM2, TruncationSpec((25, 25), 25, 2), gk)
    ok = not failures and exact and rep.passed
    record(6, ok, f"action identity: max |<H'> - rhs| {max(worst, rep.metric):.1e}, failures {failures or 'none'}")
    assert ok


def test_criterion_7_resolution():
    start = time.perf_counter()
    results = {}
    main = QuadratureRule.gauss_laguerre(40, 21)
    results["single"] = verify.check_resolution("single", DIAG1, TruncationSpec((10,)), main).report
    results["multimode"] = verify.check_resolution("multimode", DIAG2, TruncationSpec((10, 10), None, 2), main).report
    rule8 = QuadratureRule.gauss_laguerre(40, 17, 19, point_mass=-1.0)
    two = {
        "degenerate": (DIAG2EQ, TruncationSpec((8, 8), None, 1)),
        "cm_fixed_n": (CM1, TruncationSpec((8,), 8, 2)),
        "cm_fixed_m": (CM1, TruncationSpec((8,), 8, 2)),
        "cm_deg_fixed_n": (CM2, TruncationSpec((8, 8), 8, 2)),
        "cm_deg_fixed_m": (CM2, TruncationSpec((8, 8), 8, 2)),
        "cm_multidim": (CM1, TruncationSpec((8,), 8, 2)),
        "cm_deg_multidim": (CM2, TruncationSpec((8, 8), 8, 2)),
        "extra_fixed_n": (_extradiag(1), TruncationSpec((8,), 8, 2)),
        "extra_fixed_m": (_extradiag(1), TruncationSpec((8,), 8, 2)),
        "extra_deg_fixed_n": (_extradiag(2), TruncationSpec((8, 8), 8, 2)),
        "extra_deg_fixed_m": (_extradiag(2), TruncationSpec((8, 8), 8, 2)),
    }
    vacuum = {}
    for family, (params, spec) in two.items():
        degenerate = vcs.family_spec(family).degenerate
        res = verify.check_resolution(family, params, spec, rule8, exclude_degenerate_vacuum=degenerate)
        results[family] = res.report
        if degenerate:
            vacuum[family] = verify.check_resolution(family, params, spec, rule8).report.metric
    elapsed = time.perf_counter() - start
    failing = {f: r.metric for f, r in results.items() if not r.passed}
    ok = not failing and elapsed <= 300 and results["single"].metric <= 1e-8 and results["multimode"].metric <= 1e-8
    worst = max(r.metric for r in results.values())
    record(7, ok, f"resolution: max |O - P| {worst:.1e} over {len(results)} families, {elapsed:.1f} s; "
                  f"degenerate n = 0 weight 0 documented ({min(vacuum.values()):.2f} deficit)")
    # the literal degenerate measure leaves the n = 0 labels with weight 0
    assert all(v == pytest.approx(1.0, abs=1e-8) for v in vacuum.values())
    assert ok


def test_criterion_8_moments():
    reps = cli.moment_reports(16, (2, 3, 5), 15)
    asserted = [r for r in reps if not r.report_only]
    documented = [r for r in reps if r.report_only]
    zero_found = all(r.metric == pytest.approx(1.0) and not r.passed for r in documented)
    ok = all(r.passed for r in asserted) and len(documented) == 3 and zero_found
    worst = max(r.metric for r in asserted)
    record(8, ok, f"moments: e^-J and c.m. n <= 31, degenerate n!d(n) for 1 <= n <= 15 (max rel {worst:.1e}); "
                  "n = 0 measured 0 vs required 1 reported as documented FAIL")
    assert ok


def test_criterion_9_level_changing_models():
    herm = 0.0
    ge = np.zeros((2, 3, 3))
    ge[:, 0, 1] = ge[:, 1, 0] = 0.2
    ge[:, 1, 2] = ge[:, 2, 1] = 0.1
    params = ModelParams(N=2, M=3, omega=(1.0, 1.3), epsilon=(0.3, 0.6, 0.9), g_diag=(0.1, 0.2, 0.3), g_extra=ge,
                         Omega=1.7, g_prime=0.25)
    spec = TruncationSpec((3, 3), 3, 3)
    for variant in ("extradiag", "general"):
        herm = max(herm, hermiticity_defect(assembly.build(variant, params, spec).full.matrix))
    diag_limit = model.replace_params(params, x_mode="diagonal", g_extra=None)
    d1 = np.max(np.abs(assembly.build("general", diag_limit, spec).full.matrix
                       - assembly.build("cm_diag", diag_limit, spec).block_diagonal().matrix))
    extra_limit = model.replace_params(params, x_mode="extradiagonal", g_diag=None)
    d2 = np.max(np.abs(assembly.build("general", extra_limit, spec).full.matrix
                       - assembly.build("extradiag", extra_limit, spec).full.matrix))
    cfg = cli.parse_config(cli.load_raw("desk-extradiag"))
    reports = [r for v in ("extradiag", "general") for r in cli.spectrum_reports(cfg, v, None)]
    tables = [r for r in reports if r.property == "spectrum"]
    emitted = bool(tables) and all(r.report_only and r.table for r in tables)
    emitted = emitted and all(r.passed for r in reports if r.property == "hermiticity")
    ok = herm <= 1e-12 and d1 <= 1e-12 and d2 <= 1e-12 and emitted
    record(9, ok, f"level-changing models: hermiticity {herm:.1e}, degenerations {max(d1, d2):.1e}, "
                  f"{len(tables)} report-only comparison tables")
    assert ok


def test_criterion_10_determinism(tmp_path, capsys):
    same = {}
    for name in DESK:
        outs = []
        for run, workers in (("a", "1"), ("b", "2")):
            out = tmp_path / f"{name}-{run}"
            cli.main(["run", "--config", name, "--out", str(out), "--format", "both", "--parallel", workers])
            outs.append(out)
        same[name] = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
                         for f in ("reports.ndjson", "summary.txt", "spectrum.csv"))
    ok = all(same.values())
    record(10, ok, f"determinism: {sum(same.values())}/{len(DESK)} desk configs byte-identical across runs")
    assert ok
