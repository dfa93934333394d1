"""Verification campaigns for Robin/Dirichlet/Neumann eigenvalue inequalities.

Every campaign solves the discrete problems on several nested levels,
extrapolates, and only reports a strict inequality when the error bars
separate the two sides. Reports are plain dataclasses that serialise to
deterministic JSON.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from . import __version__
from .assembly import DiscreteForm, assemble_boundary_weighted, assemble_mass, assemble_stiffness, reduce_dirichlet
from .boundary_ops import (
    BoundaryOperatorSpec,
    CosineKernel,
    Composite,
    Multiplication,
    RankOne,
    Zero,
    check_nonpositive,
    classify,
    parse_spec,
    plane_wave_form,
)
from .eigen import (
    MERGE_RTOL,
    ExtrapolatedSpectrum,
    SolveOptions,
    Spectrum,
    counting_function,
    inertia_count,
    richardson,
    solve,
)
from .geometry import PolygonalDomain, TriangleMesh, boundary_traversal, build_domain, mesh_at_level

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
VERDICTS = ("holds_strict", "holds_weak", "inconclusive", "violated")

__all__ = [
    "HarnessError",
    "LevelData",
    "level_data",
    "robin_spectrum",
    "dirichlet_spectrum",
    "verdict",
    "InequalityReport",
    "CountingReport",
    "TrialSpaceReport",
    "SafarovReport",
    "verify_interlacing",
    "verify_counting",
    "filonov_trial_check",
    "safarov_weak_check",
    "trace_beta",
    "coercivity_kappa",
    "eta_samples",
    "clear_cache",
]


class HarnessError(RuntimeError):
    pass


# ---------------------------------------------------------------- caching


@dataclass(frozen=True, eq=False)
class LevelData:
    mesh: TriangleMesh
    traversal: object
    stiffness: DiscreteForm
    mass: DiscreteForm

    @property
    def dirichlet(self):
        return reduce_dirichlet(self.stiffness, self.mass, self.mesh)


_levels: dict = {}
_spectra: dict = {}


def clear_cache():
    _levels.clear()
    _spectra.clear()


def _domain(domain) -> PolygonalDomain:
    return domain if isinstance(domain, PolygonalDomain) else build_domain(domain)


def _domain_label(dom: PolygonalDomain) -> str:
    if dom.name:
        return dom.name
    digest = hashlib.sha256(repr(dom.vertices).encode()).hexdigest()[:10]
    return f"polygon-{digest}"


def level_data(domain, level: int) -> LevelData:
    dom = _domain(domain)
    key = (dom.vertices, int(level))
    if key not in _levels:
        mesh = mesh_at_level(dom, level)
        _levels[key] = LevelData(mesh, boundary_traversal(mesh), assemble_stiffness(mesh), assemble_mass(mesh))
    return _levels[key]


def _symbolic(spec: BoundaryOperatorSpec) -> bool:
    if isinstance(spec, Composite):
        return all(_symbolic(p) for p, _ in spec.items)
    if isinstance(spec, (Zero, CosineKernel)):
        return True
    if isinstance(spec, Multiplication):
        return not callable(spec.theta)
    if isinstance(spec, RankOne):
        return not callable(spec.g)
    return False


def _descriptor(dom, bc, spec, ld):
    return {"domain": _domain_label(dom), "bc": bc, "theta": spec.hash if spec is not None else None,
            "level": ld.mesh.level, "h": ld.mesh.h}


def robin_spectrum(domain, spec, level: int, count: int, opts: SolveOptions | None = None) -> Spectrum:
    """Smallest eigenvalues of the Robin problem a_Theta(u, v) = lam (u, v)."""
    dom = _domain(domain)
    spec = parse_spec(spec)
    key = ("robin", dom.vertices, spec.to_text(), int(level), int(count)) if _symbolic(spec) else None
    if key is not None and key in _spectra:
        return _spectra[key]
    ld = level_data(dom, level)
    k = ld.stiffness + spec.form(ld.mesh, ld.traversal)
    bc = "neumann" if isinstance(spec, Zero) else "robin"
    s = solve(k, ld.mass, min(count, ld.mesh.n_nodes), opts, _descriptor(dom, bc, spec, ld))
    if key is not None:
        _spectra[key] = s
    return s


def dirichlet_spectrum(domain, level: int, count: int, opts: SolveOptions | None = None) -> Spectrum:
    dom = _domain(domain)
    key = ("dirichlet", dom.vertices, int(level), int(count))
    if key in _spectra:
        return _spectra[key]
    ld = level_data(dom, level)
    red = ld.dirichlet
    s = solve(red.stiffness, red.mass, min(count, red.n_dof), opts, _descriptor(dom, "dirichlet", None, ld))
    _spectra[key] = s
    return s


def _extrapolate(spectra, count=None) -> ExtrapolatedSpectrum:
    if len(spectra) == 2:
        return richardson(spectra[0], spectra[1], count=count)
    if len(spectra) == 3:
        return richardson(spectra[0], spectra[1], spectra[2], count=count)
    raise HarnessError("two or three nested levels are required")


def _check_levels(levels):
    levels = [int(v) for v in levels]
    if len(levels) not in (2, 3):
        raise HarnessError("two or three nested levels are required")
    if any(b != a + 1 for a, b in zip(levels, levels[1:])):
        raise HarnessError("levels must be consecutive, coarse to fine")
    if levels[0] < 0:
        raise HarnessError("levels must be non-negative")
    return levels


def _robin_window(dom, spec, levels, count, above=None, opts=None):
    """Extrapolated Robin spectrum with at least ``count`` values and, if
    ``above`` is given, enough values that the top one clears it."""
    dim = level_data(dom, levels[0]).mesh.n_nodes
    while True:
        count = min(count, dim)
        spectra = [robin_spectrum(dom, spec, lv, count, opts) for lv in levels]
        ext = _extrapolate(spectra)
        if above is None or ext.values[-1] - ext.errors[-1] > above or count == dim:
            if above is not None and not ext.values[-1] - ext.errors[-1] > above:
                raise HarnessError("eigenvalue window does not reach beyond the target")
            return spectra, ext
        count = 2 * count


def _dirichlet_window(dom, levels, count, opts=None):
    dim = level_data(dom, levels[0]).dirichlet.n_dof
    if count > dim:
        raise HarnessError(f"level {levels[0]} has only {dim} interior nodes; need {count}")
    spectra = [dirichlet_spectrum(dom, lv, count, opts) for lv in levels]
    return spectra, _extrapolate(spectra)


# ---------------------------------------------------------------- verdicts


def verdict(lt: float, et: float, ld: float, ed: float) -> str:
    """Compare lt (+/- et) < ld (+/- ed) honestly."""
    if lt + et < ld - ed:
        return "holds_strict"
    if lt - et > ld + ed:
        return "violated"
    if lt <= ld:
        return "holds_weak"
    return "inconclusive"


def _seed_for(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def eta_samples(radii: Sequence[float], n: int, seed: int) -> np.ndarray:
    """``n`` wave vectors: cycle through the radii with uniform random angles."""
    rng = np.random.default_rng(seed)
    radii = list(radii) or [1.0]
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    r = np.array([radii[i % len(radii)] for i in range(n)])
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def _plane_wave_condition(ld, spec, etas, tol=1e-10):
    vals = [plane_wave_form(ld.mesh, ld.traversal, spec, e) for e in etas]
    scale = 1.0 + max(abs(v) for v in vals)
    ok = all(v <= tol * scale for v in vals)
    return {"passed": bool(ok), "n_eta": len(vals), "max_value": max(vals), "min_value": min(vals),
            "tolerance": tol * scale, "sampled": True}


def _clean(obj):
    """Replace non-finite floats and numpy scalars for strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _dumps(d) -> str:
    return json.dumps(_clean(d), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass(frozen=True)
class InequalityReport:
    """Per-j comparison of lambda_{Theta,j+1} against lambda_{D,j}."""

    problem: dict
    rows: tuple
    chain: tuple
    conditions: dict
    counting: tuple
    environment: dict

    @property
    def verdicts(self):
        return [r["verdict"] for r in self.rows]

    @property
    def certified(self) -> bool:
        return bool(self.conditions.get("preconditions_passed")) and all(v == "holds_strict" for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        if any(v == "violated" for v in self.verdicts):
            return 3
        return 0 if self.certified else 2

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "problem": self.problem, "rows": list(self.rows),
                "chain": list(self.chain), "conditions": self.conditions, "counting": list(self.counting),
                "environment": self.environment}

    def to_json(self) -> str:
        return _dumps(self.to_dict())


def _environment(levels, seed, n_eta, extra=None):
    env = {"levels": list(levels), "seed": int(seed), "n_eta": int(n_eta), "merge_rtol": MERGE_RTOL,
           "richardson_safety": 2.0, "min_order": 1.5, "solver": {"dense_threshold": SolveOptions().dense_threshold,
                                                                  "tol": SolveOptions().tol},
           "version": __version__}
    if extra:
        env.update(extra)
    return env


def _count_rows(ext_t, ext_d, jmax, dirichlet_override=None):
    rows = []
    for j in range(1, jmax + 1):
        rows.append(_counting_row(ext_t.values, ext_t.errors, ext_d.values, ext_d.errors, j, dirichlet_override))
    return rows


def _counting_row(vt, et, vd, ed, j, dirichlet_override=None):
    if dirichlet_override is not None:
        dv = np.asarray(dirichlet_override, dtype=float)
        de = np.zeros_like(dv)
    else:
        dv, de = np.asarray(vd), np.asarray(ed)
    if j > len(dv):
        raise HarnessError("Dirichlet window too small")
    lam, err = dv[j - 1], de[j - 1]
    # N_D counted with ties: anything whose bar reaches lam
    n_d = int(np.sum(dv - de <= lam + err + MERGE_RTOL * abs(lam)))
    if n_d == len(dv) and dirichlet_override is None:
        raise HarnessError("Dirichlet window too small to count ties")
    certain = int(np.sum(vt + et < lam - err))
    possible = int(np.sum(vt - et < lam + err))
    need = n_d + 1
    if certain >= need:
        v = "holds_strict"
    elif possible < need:
        v = "violated"
    else:
        v = "inconclusive"
    return {"j": j, "lambda_dirichlet": float(lam), "lambda_dirichlet_err": float(err), "n_dirichlet": n_d,
            "required": need, "count_certain": certain, "count_possible": possible, "verdict": v}


def verify_interlacing(domain, spec, J: int = 10, levels=(4, 5), *, seed: int = 42, n_eta: int = 32,
                       delta: float = 0.1, opts: SolveOptions | None = None) -> InequalityReport:
    """lambda_{Theta,j+1} < lambda_{D,j} for j = 1..J with error bars.

    Also records the monotone chain lambda_Theta <= lambda_N <= lambda_D,
    the plane-wave condition at sampled wave vectors, nonpositivity of
    the discrete Theta-form and the admissibility classification. Rows
    whose numeric verdict is holds_strict are downgraded to inconclusive
    when the plane-wave condition fails, so hypotheses that do not hold
    never yield a certificate.
    """
    if J < 1:
        raise HarnessError("J must be >= 1")
    levels = _check_levels(levels)
    dom = _domain(domain)
    spec = parse_spec(spec)
    fine = level_data(dom, levels[-1])

    sd, ext_d = _dirichlet_window(dom, levels, J + 1, opts)
    st, ext_t = _robin_window(dom, spec, levels, J + 1, above=None, opts=opts)

    # conditions on the finest mesh
    seed_eta = _seed_for(_domain_label(dom), spec.to_text(), seed)
    radii = [math.sqrt(max(v, 0.0)) for v in ext_d.values[:J]]
    etas = np.vstack([[0.0, 0.0], eta_samples(radii, max(n_eta - 1, 0), seed_eta)])
    pw = _plane_wave_condition(fine, spec, etas)
    nsd = check_nonpositive(spec.form(fine.mesh, fine.traversal), fine.traversal)
    adm = classify(spec, fine.mesh, fine.traversal, delta)
    pre_ok = pw["passed"]
    conditions = {
        "plane_wave": pw,
        "nonpositive": {"passed": nsd.passed, "max_eigenvalue": nsd.max_eigenvalue, "scale": nsd.scale},
        "admissibility": adm.to_dict(),
        "preconditions_passed": bool(pre_ok),
        "certified": False,
    }

    rows = []
    for j in range(1, J + 1):
        lt, et = ext_t.values[j], ext_t.errors[j]
        ldv, edv = ext_d.values[j - 1], ext_d.errors[j - 1]
        nv = verdict(lt, et, ldv, edv)
        v = nv if (pre_ok or nv != "holds_strict") else "inconclusive"
        rows.append({"j": j, "lambda_theta": lt, "lambda_theta_err": et, "lambda_dirichlet": ldv,
                     "lambda_dirichlet_err": edv, "margin": ldv - lt, "verdict": v, "numeric_verdict": nv,
                     "order_theta": ext_t.orders[j], "order_dirichlet": ext_d.orders[j - 1]})

    chain = []
    if not isinstance(spec, Zero):
        sn, ext_n = _robin_window(dom, Zero(), levels, J + 1, opts=opts)
        for j in range(1, J + 2):
            t, te = ext_t.values[j - 1], ext_t.errors[j - 1]
            n_, ne = ext_n.values[j - 1], ext_n.errors[j - 1]
            d_, de = ext_d.values[j - 1], ext_d.errors[j - 1]
            chain.append({"j": j, "lambda_theta": t, "lambda_theta_err": te, "lambda_neumann": n_,
                          "lambda_neumann_err": ne, "lambda_dirichlet": d_, "lambda_dirichlet_err": de,
                          "theta_le_neumann": bool(t - te <= n_ + ne), "neumann_le_dirichlet": bool(n_ - ne <= d_ + de),
                          "applicable": bool(nsd.passed)})
        conditions["chain_passed"] = all(r["theta_le_neumann"] and r["neumann_le_dirichlet"]
                                         for r in chain if r["applicable"])
    else:
        conditions["polya"] = {"lambda_neumann_2": rows[0]["lambda_theta"],
                               "lambda_dirichlet_1": rows[0]["lambda_dirichlet"], "verdict": rows[0]["verdict"]}

    counting = []
    for j in range(1, J + 1):
        try:
            counting.append(_counting_row(ext_t.values, ext_t.errors, ext_d.values, ext_d.errors, j))
        except HarnessError:
            break
    # counting rows only use the computed Robin window; mark truncation honestly
    for row in counting:
        if row["count_possible"] == len(ext_t.values):
            row["verdict"] = row["verdict"] if row["verdict"] == "holds_strict" else "inconclusive"
            row["window_limited"] = True

    problem = {"domain": _domain_label(dom), "vertices": [list(p) for p in dom.vertices], "theta": spec.to_text(),
               "theta_hash": spec.hash, "J": J}
    report = InequalityReport(problem, tuple(rows), tuple(chain), conditions, tuple(counting),
                              _environment(levels, seed, n_eta, {"delta": delta,
                                                                 "h": [level_data(dom, lv).mesh.h for lv in levels]}))
    conditions["certified"] = report.certified
    return report


@dataclass(frozen=True)
class CountingReport:
    problem: dict
    row: dict
    discrete_inertia: int
    discrete_count: int
    environment: dict

    @property
    def verdict(self) -> str:
        return self.row["verdict"]

    @property
    def exit_code(self) -> int:
        return {"holds_strict": 0, "violated": 3}.get(self.verdict, 2)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "problem": self.problem, "counting": self.row,
                "discrete": {"inertia_below_lambda_d": self.discrete_inertia,
                             "count_below_lambda_d": self.discrete_count},
                "environment": self.environment}

    def to_json(self) -> str:
        return _dumps(self.to_dict())


def verify_counting(domain, spec, j: int, levels=(4, 5), *, dirichlet_values=None,
                    opts: SolveOptions | None = None) -> CountingReport:
    """#{Robin eigenvalues < lambda_{D,j}} >= N_D(lambda_{D,j}) + 1.

    ``dirichlet_values`` optionally replaces the extrapolated Dirichlet
    spectrum by exact values (error 0); it must extend past lambda_{D,j}
    so that ties are counted. The Robin side uses error-bar-guarded
    counts: certain (bar entirely below) and possible (bar reaches below).
    """
    if j < 1:
        raise HarnessError("j must be >= 1")
    levels = _check_levels(levels)
    dom = _domain(domain)
    spec = parse_spec(spec)
    if dirichlet_values is None:
        _, ext_d = _dirichlet_window(dom, levels, j + 6, opts)
        lam, err = ext_d.values[j - 1], ext_d.errors[j - 1]
        dv, de = ext_d.values, ext_d.errors
    else:
        dv = np.asarray(dirichlet_values, dtype=float)
        if len(dv) <= j:
            raise HarnessError("oracle Dirichlet values must extend beyond index j")
        de = np.zeros_like(dv)
        lam, err = dv[j - 1], 0.0
    _, ext_t = _robin_window(dom, spec, levels, j + 2, above=lam + err, opts=opts)
    row = _counting_row(ext_t.values, ext_t.errors, dv, de, j,
                        dirichlet_override=dv if dirichlet_values is not None else None)
    fine = level_data(dom, levels[-1])
    k = fine.stiffness + spec.form(fine.mesh, fine.traversal)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        inertia = inertia_count(k, fine.mass, float(lam))
    st = robin_spectrum(dom, spec, levels[-1], len(ext_t.values), opts)
    discrete = counting_function(st, float(lam), strict=True)
    problem = {"domain": _domain_label(dom), "theta": spec.to_text(), "theta_hash": spec.hash, "j": j,
               "dirichlet_source": "oracle" if dirichlet_values is not None else "extrapolated"}
    return CountingReport(problem, row, int(inertia), int(discrete), _environment(levels, 0, 0))


# ---------------------------------------------------------------- Filonov trial space


@dataclass(frozen=True)
class TrialSpaceReport:
    lam: float
    level: int
    h: float
    dim_u: int
    dim_kernel: int
    dim_w: int
    eta0: tuple
    resamples: int
    gram_min: float
    rho_max: float
    constant: float
    plane_wave_value: float
    plane_wave_ok: bool

    @property
    def bound(self) -> float:
        """lam * (1 + C h^2) with the measured C (clipped at zero)."""
        return self.lam * (1.0 + max(self.constant, 0.0) * self.h ** 2)

    def to_dict(self):
        d = dict(self.__dict__)
        d["eta0"] = list(self.eta0)
        d["bound"] = self.bound
        return d


def _normalized_gram_min(g):
    d = 1.0 / np.sqrt(np.real(np.diag(g)))
    gn = (g * d[:, None]) * d[None, :]
    return float(la.eigvalsh(0.5 * (gn + gn.conj().T))[0])


def filonov_trial_check(domain, spec, j: int, level: int = 4, eta0=None, *, seed: int = 42,
                        kernel_tol: float = 1e-6, gram_tol: float = 1e-10, max_samples: int = 16,
                        opts: SolveOptions | None = None) -> TrialSpaceReport:
    """Largest Rayleigh quotient of a_Theta over the discrete trial space W_lam.

    W_lam spans the discrete Dirichlet eigenvectors with eigenvalue <= lam
    (lam = discrete lambda_{D,j} on this level), discrete Robin eigenvectors
    with eigenvalue within ``kernel_tol * lam`` of lam, and the P1
    interpolant of exp(i x.eta0) with |eta0|^2 = lam. The measured constant
    is C = (rho_max / lam - 1) / h^2. A Gram-deficient eta0 is replaced by a
    uniformly random direction, at most ``max_samples`` times.
    """
    dom = _domain(domain)
    spec = parse_spec(spec)
    ld = level_data(dom, level)
    red = ld.dirichlet
    cnt = min(red.n_dof, j + 8)
    sd = dirichlet_spectrum(dom, level, cnt, opts)
    if j > len(sd.eigenvalues):
        raise HarnessError("j outside the Dirichlet window")
    lam = float(sd.eigenvalues[j - 1])
    tie = MERGE_RTOL * abs(lam)
    u_idx = np.nonzero(sd.eigenvalues <= lam + tie)[0]
    if len(u_idx) == len(sd.eigenvalues) and len(u_idx) < red.n_dof:
        raise HarnessError("Dirichlet window too small for U_lambda")
    u = red.extend(sd.eigenvectors[:, u_idx])

    k = ld.stiffness + spec.form(ld.mesh, ld.traversal)
    st = robin_spectrum(dom, spec, level, min(ld.mesh.n_nodes, j + 12), opts)
    if st.eigenvalues[-1] <= lam * (1 + kernel_tol) and len(st.eigenvalues) < ld.mesh.n_nodes:
        raise HarnessError("Robin window too small to detect the kernel")
    k_idx = np.nonzero(np.abs(st.eigenvalues - lam) <= kernel_tol * abs(lam))[0]
    v = st.eigenvectors[:, k_idx]

    # same eta0 on every level so measured constants are comparable
    rng = np.random.default_rng(_seed_for(_domain_label(dom), spec.to_text(), j, seed))
    radius = math.sqrt(lam)
    if eta0 is None:
        a = rng.uniform(0, 2 * math.pi)
        eta = np.array([radius * math.cos(a), radius * math.sin(a)])
    else:
        eta = np.asarray(eta0, dtype=float).reshape(2)
        nrm = float(np.linalg.norm(eta))
        if nrm == 0.0:
            raise HarnessError("eta0 must be nonzero")
        if abs(nrm - radius) > 1e-8 * radius:
            warnings.warn("eta0 rescaled to |eta0|^2 = lambda", RuntimeWarning, stacklevel=2)
        eta = eta * (radius / nrm)

    kmat, mmat = k.matrix, ld.mass.matrix
    base = np.hstack([u, v]).astype(complex)
    resamples = 0
    while True:
        wave = np.exp(1j * (ld.mesh.nodes @ eta))
        z = np.hstack([base, wave[:, None]])
        g = z.conj().T @ (mmat @ z)
        gmin = _normalized_gram_min(g)
        if gmin > gram_tol:
            break
        resamples += 1
        if resamples >= max_samples:
            raise HarnessError(f"all {max_samples} eta0 samples gave a Gram-deficient trial space")
        a = rng.uniform(0, 2 * math.pi)
        eta = np.array([radius * math.cos(a), radius * math.sin(a)])

    amat = z.conj().T @ (kmat @ z)
    rho = la.eigh(0.5 * (amat + amat.conj().T), 0.5 * (g + g.conj().T), eigvals_only=True)
    rho_max = float(rho[-1])
    h = ld.mesh.h
    pw = plane_wave_form(ld.mesh, ld.traversal, spec, eta)
    return TrialSpaceReport(
        lam=lam, level=int(level), h=float(h), dim_u=len(u_idx), dim_kernel=len(k_idx), dim_w=z.shape[1],
        eta0=(float(eta[0]), float(eta[1])), resamples=resamples, gram_min=gmin, rho_max=rho_max,
        constant=(rho_max / lam - 1.0) / h ** 2, plane_wave_value=pw, plane_wave_ok=bool(pw <= 1e-10 * (1 + abs(pw))),
    )


# ---------------------------------------------------------------- Safarov's weakened conditions


@dataclass(frozen=True)
class SafarovReport:
    j: int
    lam_dirichlet: float
    values: tuple
    etas: tuple
    n_certifying: int
    weak_certified: bool
    strict_certified: bool
    interlacing_verdict: Optional[str]
    consistent: bool

    def to_dict(self):
        d = dict(self.__dict__)
        d["values"] = list(self.values)
        d["etas"] = [list(e) for e in self.etas]
        return d


def safarov_weak_check(domain, spec, j: int, eta_list, levels=(4, 5), *, lam_dirichlet: float | None = None,
                       interlacing: InequalityReport | None = None, tol: float = 1e-10,
                       opts: SolveOptions | None = None) -> SafarovReport:
    """Single- and two-vector plane-wave conditions on the sphere |eta|^2 = lambda_{D,j}.

    One certifying wave vector gives lambda_{Theta,j+1} <= lambda_{D,j};
    two distinct ones give the strict inequality. Wave vectors of the
    wrong length are rescaled with a warning.
    """
    etas = [np.asarray(e, dtype=float).reshape(2) for e in eta_list]
    if not etas:
        raise HarnessError("eta_list must not be empty")
    levels = _check_levels(levels)
    dom = _domain(domain)
    spec = parse_spec(spec)
    if lam_dirichlet is None:
        _, ext_d = _dirichlet_window(dom, levels, j + 1, opts)
        lam_dirichlet = float(ext_d.values[j - 1])
    radius = math.sqrt(lam_dirichlet)
    fixed = []
    for e in etas:
        nrm = float(np.linalg.norm(e))
        if nrm == 0.0:
            raise HarnessError("wave vectors must be nonzero")
        if abs(nrm - radius) > 1e-8 * radius:
            warnings.warn("wave vector rescaled to |eta|^2 = lambda_D,j", RuntimeWarning, stacklevel=2)
        fixed.append(e * (radius / nrm))
    fine = level_data(dom, levels[-1])
    vals = [plane_wave_form(fine.mesh, fine.traversal, spec, e) for e in fixed]
    scale = 1.0 + max(abs(v) for v in vals)
    good = [e for e, v in zip(fixed, vals) if v <= tol * scale]
    distinct = []
    for e in good:
        if all(np.linalg.norm(e - d) > 1e-12 * radius for d in distinct):
            distinct.append(e)
    n_ok = len(distinct)
    weak, strict = n_ok >= 1, n_ok >= 2
    iv = None
    if interlacing is not None and j <= len(interlacing.rows):
        iv = interlacing.rows[j - 1]["numeric_verdict"]
    consistent = True
    if iv is not None:
        if weak and iv == "violated":
            consistent = False
        if strict and iv == "violated":
            consistent = False
    return SafarovReport(j, lam_dirichlet, tuple(vals), tuple(tuple(map(float, e)) for e in fixed), n_ok,
                         weak, strict, iv, consistent)


# ---------------------------------------------------------------- form constants


def trace_beta(mesh: TriangleMesh, eps: float, opts: SolveOptions | None = None) -> float:
    """Smallest beta with ||u||^2_boundary <= eps ||grad u||^2 + beta ||u||^2 on the P1 space.

    Equals the largest eigenvalue of the pencil (T - eps*A, M), obtained as
    minus the smallest eigenvalue of (eps*A - T, M).
    """
    if not eps > 0:
        raise HarnessError("eps must be positive")
    tr = boundary_traversal(mesh)
    a = assemble_stiffness(mesh)
    m = assemble_mass(mesh)
    t = assemble_boundary_weighted(mesh, tr, 1.0)
    pencil = DiscreteForm((eps * a.matrix - t.matrix).tocsr(), "composite", "indefinite")
    s = solve(pencil, m, 1, opts or SolveOptions(vectors=False))
    return max(0.0, -float(s.eigenvalues[0]))


def coercivity_kappa(mesh: TriangleMesh, spec, c0: float = 0.5, opts: SolveOptions | None = None) -> float:
    """Smallest kappa with a_Theta(u,u) + kappa ||u||^2 >= c0 ||u||^2_{H^1} on the P1 space.

    kappa = largest eigenvalue of (c0 (A + M) - A - B_Theta, M)
          = c0 - smallest eigenvalue of ((1 - c0) A + B_Theta, M).
    """
    if not 0 < c0 < 1:
        raise HarnessError("c0 must lie in (0, 1)")
    spec = parse_spec(spec)
    tr = boundary_traversal(mesh)
    a = assemble_stiffness(mesh)
    m = assemble_mass(mesh)
    b = spec.form(mesh, tr)
    form = DiscreteForm(((1.0 - c0) * a.matrix + b.matrix).tocsr(), "composite", "unknown")
    s = solve(form, m, 1, opts or SolveOptions(vectors=False))
    return c0 - float(s.eigenvalues[0])
