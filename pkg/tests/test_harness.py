import json
import math

import numpy as np
import pytest

from robinlab.geometry import build_domain, mesh_at_level
from robinlab.harness import (
    HarnessError,
    filonov_trial_check,
    safarov_weak_check,
    trace_beta,
    coercivity_kappa,
    verdict,
    verify_counting,
    verify_interlacing,
)
from robinlab.oracles import rectangle_spectrum

PI2 = math.pi ** 2
MIXED = "sum:(mult:const:0.8;kernel:cosine:-1:1)"


def test_verdict_semantics():
    assert verdict(1.0, 0.1, 2.0, 0.1) == "holds_strict"
    assert verdict(3.0, 0.1, 2.0, 0.1) == "violated"
    assert verdict(1.95, 0.1, 2.0, 0.1) == "holds_weak"
    assert verdict(2.05, 0.1, 2.0, 0.1) == "inconclusive"


def test_interlacing_square_neumann():
    r = verify_interlacing("unit_square", "zero", J=5, levels=(3, 4))
    assert r.verdicts == ["holds_strict"] * 5
    assert r.certified and r.exit_code == 0
    assert r.rows[0]["lambda_theta"] == pytest.approx(PI2, rel=1e-3)
    assert r.rows[0]["lambda_dirichlet"] == pytest.approx(2 * PI2, rel=1e-3)
    assert r.conditions["polya"]["verdict"] == "holds_strict"


def test_interlacing_square_robin_chain():
    r = verify_interlacing("unit_square", "mult:const:-1", J=5, levels=(3, 4))
    assert r.verdicts == ["holds_strict"] * 5
    assert r.conditions["chain_passed"]
    assert all(row["applicable"] for row in r.chain)
    assert len(r.chain) == 6


def test_interlacing_positive_theta_flags_precondition():
    r = verify_interlacing("unit_square", "mult:const:50", J=1, levels=(3, 4))
    assert not r.conditions["preconditions_passed"]
    assert not r.conditions["plane_wave"]["passed"]
    assert r.rows[0]["verdict"] != "holds_strict"
    assert r.exit_code in (2, 3)
    assert not r.certified


def test_report_json_schema():
    r = verify_interlacing("unit_square", "mult:const:-1", J=2, levels=(3, 4))
    d = json.loads(r.to_json())
    assert {"problem", "rows", "conditions", "counting", "environment", "schema_version"} <= set(d)
    assert {"j", "lambda_theta", "lambda_theta_err", "lambda_dirichlet", "lambda_dirichlet_err", "margin",
            "verdict"} <= set(d["rows"][0])
    assert d["environment"]["levels"] == [3, 4] and d["environment"]["seed"] == 42
    assert r.to_json() == verify_interlacing("unit_square", "mult:const:-1", J=2, levels=(3, 4)).to_json()


def test_bad_levels():
    with pytest.raises(HarnessError):
        verify_interlacing("unit_square", "zero", J=1, levels=(3, 5))
    with pytest.raises(HarnessError):
        verify_interlacing("unit_square", "zero", J=0)


def test_counting_with_oracle_dirichlet():
    d = rectangle_spectrum(1, 1, "dirichlet", 10).values
    r = verify_counting("unit_square", "zero", 1, levels=(3, 4), dirichlet_values=d)
    # 0 and pi^2 twice below 2 pi^2: 3 >= N_D + 1 = 2
    assert r.row["count_certain"] == 3 and r.row["required"] == 2
    assert r.verdict == "holds_strict" and r.exit_code == 0
    r3 = verify_counting("unit_square", "zero", 3, levels=(3, 4), dirichlet_values=d)
    # lambda_D,3 = 5 pi^2 with multiplicity 2: N_D = 3; Neumann below: 0,1,1,2,4,4 -> 6
    assert r3.row["n_dirichlet"] == 3 and r3.row["count_certain"] == 6
    assert r3.verdict == "holds_strict"


def test_counting_shifted_problem_is_violated():
    d = rectangle_spectrum(1, 1, "dirichlet", 10).values
    shifted = d - 2 * PI2 + 0.5  # lambda_D,1 below every nonzero Neumann value
    r = verify_counting("unit_square", "zero", 1, levels=(3, 4), dirichlet_values=shifted)
    assert r.verdict == "violated" and r.exit_code == 3


def test_counting_consistent_with_interlacing():
    r = verify_interlacing("unit_square", "mult:const:-1", J=3, levels=(3, 4))
    for j in (1, 2, 3):
        c = verify_counting("unit_square", "mult:const:-1", j, levels=(3, 4))
        assert r.rows[j - 1]["verdict"] == "holds_strict"
        assert c.verdict != "violated"
        assert c.discrete_inertia == c.discrete_count


def test_filonov_dimensions_robin():
    rep = filonov_trial_check("unit_square", "mult:const:-1", 2, level=3)
    # lambda_D,2 = lambda_D,3 (square symmetry): U has both, no kernel, one wave
    assert rep.dim_u == 3 and rep.dim_kernel == 0 and rep.dim_w == 4
    assert rep.plane_wave_ok
    assert rep.rho_max <= rep.bound * (1 + 1e-12)


def test_filonov_bound_tightens_for_neumann():
    a = filonov_trial_check("unit_square", "zero", 1, level=4)
    b = filonov_trial_check("unit_square", "zero", 1, level=5)
    # same direction, radius sqrt(lambda_h) on each level
    assert np.allclose(np.array(a.eta0) / np.linalg.norm(a.eta0), np.array(b.eta0) / np.linalg.norm(b.eta0), atol=1e-12)
    assert b.rho_max / b.lam - 1 < a.rho_max / a.lam - 1


def test_filonov_gram_exhaustion():
    with pytest.raises(HarnessError, match="Gram-deficient"):
        filonov_trial_check("unit_square", "mult:const:-1", 1, level=2, gram_tol=2.0, max_samples=4)


def test_filonov_rescales_eta():
    with pytest.warns(RuntimeWarning):
        rep = filonov_trial_check("unit_square", "mult:const:-1", 1, level=2, eta0=(1.0, 0.0))
    assert rep.eta0[0] == pytest.approx(math.sqrt(rep.lam), rel=1e-12)


def test_safarov_multiplication_every_eta():
    lam = 2 * PI2
    etas = [(math.sqrt(lam) * math.cos(a), math.sqrt(lam) * math.sin(a)) for a in (0.1, 0.9, 2.0)]
    rep = safarov_weak_check("unit_square", "mult:const:-1", 1, etas, levels=(3, 4), lam_dirichlet=lam)
    assert rep.n_certifying == 3 and rep.weak_certified and rep.strict_certified
    assert np.allclose(rep.values, -4.0, atol=1e-10)


def test_safarov_mixed_sign_kernel():
    lam = 2 * PI2
    r = math.sqrt(lam)
    etas = [(r, 0.0), (r / math.sqrt(2), r / math.sqrt(2))]
    rep = safarov_weak_check("unit_square", MIXED, 1, etas, levels=(3, 4), lam_dirichlet=lam)
    assert rep.values[0] < 0 < rep.values[1]
    assert rep.weak_certified and not rep.strict_certified


def test_safarov_wrong_norm_warns():
    lam = 2 * PI2
    with pytest.warns(RuntimeWarning):
        rep = safarov_weak_check("unit_square", "mult:const:-1", 1, [(1.0, 0.0), (0.0, 3.0)], levels=(3, 4),
                                 lam_dirichlet=lam)
    assert np.allclose(rep.values, -4.0, atol=1e-10) and rep.strict_certified
    with pytest.raises(HarnessError):
        safarov_weak_check("unit_square", "zero", 1, [], levels=(3, 4), lam_dirichlet=lam)


def test_trace_beta():
    m = mesh_at_level(build_domain("unit_square"), 3)
    betas = [trace_beta(m, e) for e in (0.4, 0.2, 0.1, 0.05)]
    assert all(b > 0 for b in betas)
    assert all(b2 >= b1 for b1, b2 in zip(betas, betas[1:]))
    assert all(b2 / b1 <= 2.5 for b1, b2 in zip(betas, betas[1:]))
    # nested spaces: sup over a larger set
    fine = mesh_at_level(build_domain("unit_square"), 4)
    assert trace_beta(fine, 0.1) >= trace_beta(m, 0.1) * (1 - 1e-10)
    with pytest.raises(HarnessError):
        trace_beta(m, 0.0)


def test_coercivity_kappa():
    m = mesh_at_level(build_domain("unit_square"), 3)
    assert coercivity_kappa(m, "zero") == pytest.approx(0.5, abs=1e-10)
    ks = [coercivity_kappa(mesh_at_level(build_domain("unit_square"), lv), "mult:const:-1") for lv in (3, 4)]
    assert abs(ks[1] - ks[0]) <= 0.1 * ks[0]
    grow = [coercivity_kappa(m, f"mult:const:{c}") for c in (-1, -4, -16)]
    assert grow[0] < grow[1] < grow[2]
