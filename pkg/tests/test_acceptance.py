"""Acceptance suite: one test per criterion, each printing a [PASS]/[FAIL] line."""

import math
import subprocess
import sys
import warnings

import numpy as np

from robinlab.boundary_ops import Multiplication, parse_spec, plane_wave_form
from robinlab.eigen import counting_function, inertia_count, richardson
from robinlab.geometry import build_domain, mesh_at_level
from robinlab.harness import (
    coercivity_kappa,
    dirichlet_spectrum,
    filonov_trial_check,
    level_data,
    robin_spectrum,
    trace_beta,
    verify_counting,
    verify_interlacing,
)
from robinlab.oracles import bessel_zero, rectangle_spectrum

PI2 = math.pi ** 2
SQUARE = build_domain("unit_square")
LSHAPE = build_domain("lshape")
NGON64 = build_domain("regular_ngon(64,1)")
MAIN_SPECS = ["mult:const:-1", "rank1:const:-1", "mult:edges:1,-2,0.5,-1", "kernel:cosine:-1:1"]


def criterion(n):
    def mark(fn):
        fn.criterion = n
        return fn
    return mark


def _rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


@criterion(1)
def test_c01_dirichlet_oracle(acceptance_line):
    ext = richardson(*(dirichlet_spectrum(SQUARE, lv, 10) for lv in (3, 4, 5)))
    exact = rectangle_spectrum(1, 1, "dirichlet", 10).values
    err = _rel(ext.values, exact).max()
    lo, hi = np.nanmin(ext.orders), np.nanmax(ext.orders)
    ok = err <= 1e-3 and 1.8 <= lo and hi <= 2.2
    acceptance_line(1, ok, f"Dirichlet square max rel err {err:.2e} (<=1e-3), orders [{lo:.3f}, {hi:.3f}] in [1.8,2.2]")
    assert ok


@criterion(2)
def test_c02_neumann_oracle(acceptance_line):
    spectra = [robin_spectrum(SQUARE, "zero", lv, 10) for lv in (3, 4, 5)]
    ext = richardson(*spectra)
    exact = rectangle_spectrum(1, 1, "neumann", 10).values
    fine = spectra[-1].eigenvalues
    zero_ok = abs(fine[0]) <= 1e-8 * fine[1]
    err = _rel(ext.values[1:], exact[1:]).max()
    ok = zero_ok and err <= 1e-3
    acceptance_line(2, ok, f"Neumann square lambda_1={fine[0]:.1e} (<=1e-8*lambda_2), max rel err 2..10 {err:.2e}")
    assert ok


@criterion(3)
def test_c03_local_robin_oracle(acceptance_line):
    errs = {}
    for theta in (-1.0, 1.0):
        ext = richardson(*(robin_spectrum(SQUARE, Multiplication(theta), lv, 8) for lv in (4, 5)))
        exact = rectangle_spectrum(1, 1, ("robin", theta), 8).values
        errs[theta] = _rel(ext.values, exact).max()
    ok = max(errs.values()) <= 2e-3
    acceptance_line(3, ok, f"Robin theta=-1 err {errs[-1.0]:.2e}, theta=+1 err {errs[1.0]:.2e} (<=2e-3)")
    assert ok


@criterion(4)
def test_c04_disk(acceptance_line):
    target = bessel_zero(0, 1) ** 2
    vals = {}
    for n in (64, 128):
        dom = build_domain(f"regular_ngon({n},1)")
        vals[n] = richardson(*(dirichlet_spectrum(dom, lv, 1) for lv in (3, 4))).values[0]
    e64, e128 = _rel(vals[64], target), _rel(vals[128], target)
    geom = abs(vals[64] - vals[128]) / target
    ok = e64 <= 1e-2 and e128 <= 3e-3
    acceptance_line(4, ok, f"disk j01^2={target:.6f}: 64-gon {e64:.2%} (<=1%), 128-gon {e128:.3%} (<=0.3%), "
                           f"N-gon geometry term {geom:.3%}")
    assert ok


@criterion(5)
def test_c05_polya(acceptance_line):
    cases = [(SQUARE, (3, 4, 5)), (LSHAPE, (3, 4, 5)), (NGON64, (3, 4))]
    verdicts = []
    for dom, levels in cases:
        r = verify_interlacing(dom, "zero", J=1, levels=levels)
        verdicts.append((dom.name, r.rows[0]["verdict"], r.rows[0]["margin"]))
    ok = all(v == "holds_strict" for _, v, _ in verdicts)
    acceptance_line(5, ok, "lambda_N2 < lambda_D1: " + ", ".join(f"{n} {v} (margin {m:.3f})" for n, v, m in verdicts))
    assert ok


@criterion(6)
def test_c06_friedlander_filonov(acceptance_line):
    out = []
    for dom in (SQUARE, LSHAPE):
        r = verify_interlacing(dom, "zero", J=10, levels=(3, 4, 5))
        out.append((dom.name, r.verdicts.count("holds_strict"), min(x["margin"] for x in r.rows), r.certified))
    ok = all(n == 10 and c for _, n, _, c in out)
    acceptance_line(6, ok, "lambda_N,j+1 < lambda_D,j, j=1..10: " +
                    ", ".join(f"{n} {k}/10 strict (min margin {m:.3f})" for n, k, m, _ in out))
    assert ok


@criterion(7)
def test_c07_main_theorem(acceptance_line):
    parts = []
    ok = True
    for text in MAIN_SPECS:
        r = verify_interlacing(SQUARE, text, J=8, levels=(4, 5))
        strict = r.verdicts.count("holds_strict")
        chain = all(c["theta_le_neumann"] and c["neumann_le_dirichlet"] for c in r.chain)
        ok = ok and strict == 8 and chain and r.conditions["preconditions_passed"] and r.certified
        parts.append(f"{text} {strict}/8 chain={'ok' if chain else 'broken'}")
    acceptance_line(7, ok, "; ".join(parts))
    assert ok


@criterion(8)
def test_c08_counting(acceptance_line):
    oracle = rectangle_spectrum(1, 1, "dirichlet", 12).values
    rows = []
    for text in ("zero", "mult:const:-1"):
        for j in range(1, 6):
            rep = verify_counting(SQUARE, text, j, levels=(4, 5), dirichlet_values=oracle)
            rows.append((text, j, rep.row["count_certain"], rep.row["required"], rep.verdict))
    nd = {j: r[3] - 1 for (t, j, *_), r in zip(rows, rows) if t == "zero"}
    ok = all(v == "holds_strict" for *_, v in rows) and nd[1] == 1 and nd[2] == 3
    worst = min(rows, key=lambda r: r[2] - r[3])
    acceptance_line(8, ok, f"10 counting rows holds_strict={sum(r[4] == 'holds_strict' for r in rows)}/10, "
                           f"N_D(2pi^2)={nd[1]}, N_D(5pi^2)={nd[2]}, tightest {worst[0]} j={worst[1]}: "
                           f"{worst[2]} >= {worst[3]}")
    assert ok


@criterion(9)
def test_c09_filonov_trial_space(acceptance_line):
    ok = True
    parts = []
    for text in ("zero", "mult:const:-1"):
        for j in (1, 2, 3):
            a = filonov_trial_check(SQUARE, text, j, level=4)
            b = filonov_trial_check(SQUARE, text, j, level=5)
            good = (b.constant < a.constant and a.rho_max <= a.bound * (1 + 1e-12)
                    and b.rho_max <= b.bound * (1 + 1e-12) and a.plane_wave_ok and b.plane_wave_ok)
            ok = ok and good
            parts.append(f"{text} j={j} C {a.constant:.4g}->{b.constant:.4g}")
    acceptance_line(9, ok, "; ".join(parts))
    assert ok


@criterion(10)
def test_c10_plane_wave_multiplication(acceptance_line):
    ld = level_data(SQUARE, 4)
    specs = [Multiplication(-1.0), Multiplication(1.0), Multiplication(50.0), parse_spec("mult:edges:1,-2,0.5,-1"),
             Multiplication(lambda s: np.sin(3 * s) - 0.2, label="sin3")]
    rng = np.random.default_rng(2024)
    worst = 0.0
    for spec in specs:
        integral = spec.integral(ld.mesh, ld.traversal)
        etas = rng.normal(scale=10.0, size=(32, 2))
        dev = max(abs(plane_wave_form(ld.mesh, ld.traversal, spec, e) - integral) for e in etas)
        worst = max(worst, dev / (1e-9 * (1 + abs(integral))))
    ok = worst <= 1.0
    acceptance_line(10, ok, f"{len(specs)} multiplication specs x 32 eta: worst deviation {worst:.2e} x tolerance")
    assert ok


@criterion(11)
def test_c11_inertia_counting(acceptance_line):
    rng = np.random.default_rng(11)
    problems = 0
    checks = 0
    mismatches = 0
    for dom in (SQUARE, LSHAPE, NGON64):
        ld = level_data(dom, 3)
        red = ld.dirichlet
        mats = [("dirichlet", red.stiffness, red.mass)]
        pattern = [1, -2, 0.5, -1]
        edges = "mult:edges:" + ",".join(repr(float(pattern[i % 4])) for i in range(dom.n_sides))
        for text in ["zero", edges] + [t for t in MAIN_SPECS if not t.startswith("mult:edges")]:
            k = ld.stiffness + parse_spec(text).form(ld.mesh, ld.traversal)
            mats.append((text, k, ld.mass))
        for name, k, m in mats:
            s = (dirichlet_spectrum(dom, 3, 20) if name == "dirichlet" else robin_spectrum(dom, name, 3, 20))
            vals = s.eigenvalues
            lams = []
            while len(lams) < 20:
                lam = rng.uniform(vals[0] - 1.0, vals[-1])
                if np.min(np.abs(vals - lam)) > 1e-6 * max(1.0, abs(lam)):
                    lams.append(lam)
            problems += 1
            for i, lam in enumerate(lams):
                method = "sparse" if i % 2 else "dense"
                with warnings.catch_warnings():
                    warnings.simplefilter("error", RuntimeWarning)
                    n_in = inertia_count(k, m, lam, method=method)
                mismatches += n_in != counting_function(s, lam, strict=True)
                checks += 1
    ok = mismatches == 0
    acceptance_line(11, ok, f"{problems} problems x 20 random lambda: {checks - mismatches}/{checks} agree "
                            "(dense and sparse LDL routes)")
    assert ok


@criterion(12)
def test_c12_trace_constant(acceptance_line):
    mesh = mesh_at_level(SQUARE, 4)
    eps = [0.4, 0.2, 0.1, 0.05]
    betas = [trace_beta(mesh, e) for e in eps]
    ratios = [b2 / b1 for b1, b2 in zip(betas, betas[1:])]
    ok = all(r <= 2.5 for r in ratios) and all(b2 >= b1 for b1, b2 in zip(betas, betas[1:]))
    acceptance_line(12, ok, "beta(eps) " + ", ".join(f"{b:.3f}" for b in betas) +
                    f"; ratios {', '.join(f'{r:.3f}' for r in ratios)} (<=2.5)")
    assert ok


@criterion(13)
def test_c13_coercivity(acceptance_line):
    k0 = coercivity_kappa(mesh_at_level(SQUARE, 4), "zero")
    ks = [coercivity_kappa(mesh_at_level(SQUARE, lv), "mult:const:-1") for lv in (3, 4, 5)]
    spread = (max(ks) - min(ks)) / min(ks)
    ok = abs(k0 - 0.5) <= 1e-10 and spread <= 0.1
    acceptance_line(13, ok, f"kappa(zero)-0.5={k0 - 0.5:.1e}; kappa(-1) levels 3-5 "
                            f"{', '.join(f'{k:.4f}' for k in ks)} spread {spread:.2%}")
    assert ok


@criterion(14)
def test_c14_negative_control(acceptance_line):
    r = verify_interlacing(SQUARE, "mult:const:50", J=3, levels=(4, 5))
    non_strict = [x["verdict"] for x in r.rows if x["verdict"] != "holds_strict"]
    flagged = not r.conditions["preconditions_passed"] and not r.conditions["nonpositive"]["passed"]
    ok = bool(non_strict) and flagged and not r.certified and r.exit_code != 0
    acceptance_line(14, ok, f"mult:const:+50 verdicts {r.verdicts}, plane-wave max "
                            f"{r.conditions['plane_wave']['max_value']:.1f}, nonpositive="
                            f"{r.conditions['nonpositive']['passed']}, exit {r.exit_code}")
    assert ok


@criterion(15)
def test_c15_determinism(tmp_path, acceptance_line):
    out = tmp_path / "report.json"
    argv = [sys.executable, "-m", "robinlab", "verify", "interlace", "--domain", "lshape", "--theta",
            "mult:const:-1", "--jmax", "5", "--levels", "3,4", "--out", str(out)]
    blobs = []
    codes = []
    for _ in range(2):
        proc = subprocess.run(argv, capture_output=True, timeout=600)
        codes.append(proc.returncode)
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] and codes == [0, 0]
    acceptance_line(15, ok, f"two subprocess runs: {len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}, "
                            f"exit codes {codes}")
    assert ok
