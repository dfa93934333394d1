"""Boundary operators Theta for the nonlocal Robin condition.

A spec is an immutable symbolic description (zero, multiplication by theta,
symmetric kernel, rank one, or a tagged sum). Specs know how to assemble
their Galerkin form on a mesh and how to evaluate the sesquilinear form on a
plane wave sampled exactly at the boundary quadrature points.

Text syntax::

    zero
    mult:const:<v>
    mult:edges:<v1,v2,...>      one value per polygon side
    rank1:const:<c>             Theta f = c <1, f> 1
    kernel:cosine:<a>:<m>       k(s,t) = a cos(2 pi m (s - t) / P)
    sum:(<spec>;<spec>;...)     parts may carry a tag prefix, e.g. theta3@<spec>
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg as la

from .assembly import (
    DiscreteForm,
    assemble_boundary_weighted,
    assemble_nonlocal,
    assemble_rank_one,
    boundary_block,
    sample_boundary_function,
    zero_form,
)
from .geometry import BoundaryTraversal, TriangleMesh

__all__ = [
    "SpecError",
    "UnverifiablePairing",
    "BoundaryOperatorSpec",
    "Zero",
    "Multiplication",
    "Kernel",
    "CosineKernel",
    "RankOne",
    "Composite",
    "Unverifiable",
    "parse_spec",
    "theta_matrix",
    "plane_wave_form",
    "NonpositivityVerdict",
    "check_nonpositive",
    "lp_norm",
    "AdmissibilityVerdict",
    "classify",
    "half_norm_matrix",
]

TAGS = ("theta1", "theta2", "theta3")


class SpecError(ValueError):
    pass


class UnverifiablePairing(SpecError):
    """The operator has no L^2(boundary) factorisation to discretise."""


class BoundaryOperatorSpec:
    """Base class. Subclasses implement ``form``, ``_plane_wave`` and ``to_text``."""

    kind = "abstract"

    def form(self, mesh: TriangleMesh, traversal: BoundaryTraversal) -> DiscreteForm:
        raise NotImplementedError

    def _plane_wave(self, mesh, traversal, f, w) -> complex:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def parts(self):
        return ((self, "theta2"),)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def __str__(self):
        return self.to_text()


@dataclass(frozen=True)
class Zero(BoundaryOperatorSpec):
    kind = "zero"

    def form(self, mesh, traversal):
        return zero_form(mesh.n_nodes)

    def _plane_wave(self, mesh, traversal, f, w):
        return 0j

    def to_text(self):
        return "zero"


@dataclass(frozen=True)
class Multiplication(BoundaryOperatorSpec):
    """Multiplication by a real function theta on the boundary.

    ``theta`` is a scalar, a tuple of per-polygon-side constants, or a
    callable of arclength. ``p`` is the declared Lebesgue exponent.
    """

    theta: Union[float, tuple, Callable] = 0.0
    p: float = math.inf
    label: Optional[str] = None
    kind = "multiplication"

    def __post_init__(self):
        if isinstance(self.theta, (list, np.ndarray)):
            object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if isinstance(self.theta, complex) or (isinstance(self.theta, tuple)
                                               and any(isinstance(v, complex) for v in self.theta)):
            raise SpecError("theta must be real")
        if not self.p > 1:
            raise SpecError("Lebesgue exponent must exceed 1 in two dimensions")

    def edge_values(self, mesh: TriangleMesh):
        """theta in a form accepted by sample_boundary_function."""
        if isinstance(self.theta, tuple):
            if len(self.theta) != mesh.n_sides:
                raise SpecError(f"mult:edges needs {mesh.n_sides} values, got {len(self.theta)}")
            return np.asarray(self.theta, dtype=float)[mesh.boundary_sides]
        return self.theta

    def samples(self, mesh, traversal) -> np.ndarray:
        return sample_boundary_function(self.edge_values(mesh), mesh, traversal)

    def form(self, mesh, traversal):
        return assemble_boundary_weighted(mesh, traversal, self.edge_values(mesh))

    def _plane_wave(self, mesh, traversal, f, w):
        th = self.samples(mesh, traversal).ravel()
        return complex(np.sum(w * th * np.abs(f) ** 2))

    def integral(self, mesh, traversal) -> float:
        """Integral of theta over the boundary."""
        return float(np.sum(traversal.quad_weights * self.samples(mesh, traversal)))

    def to_text(self):
        if isinstance(self.theta, tuple):
            return "mult:edges:" + ",".join(repr(v) for v in self.theta)
        if callable(self.theta):
            return f"mult:func:{self.label or getattr(self.theta, '__name__', 'anonymous')}"
        return f"mult:const:{float(self.theta)!r}"


@dataclass(frozen=True)
class Kernel(BoundaryOperatorSpec):
    """Integral operator with real symmetric kernel k(s, t, perimeter)."""

    kernel: Callable = None
    label: str = "kernel"
    kind = "kernel"

    def evaluate(self, traversal):
        per = traversal.perimeter
        return lambda s, t: self.kernel(s, t, per)

    def check_symmetry(self, traversal, n_pairs: int = 64, tol: float = 1e-10, seed: int = 0) -> float:
        """Largest |k(s,t) - k(t,s)| at random arclength pairs; raises above tol."""
        rng = np.random.default_rng(seed)
        s, t = rng.uniform(0, traversal.perimeter, (2, n_pairs))
        k = self.evaluate(traversal)
        a = np.asarray(k(s, t), dtype=float)
        b = np.asarray(k(t, s), dtype=float)
        defect = float(np.max(np.abs(a - b)))
        if defect > tol * max(1.0, float(np.max(np.abs(a)))):
            raise SpecError(f"kernel is not symmetric (defect {defect:.3e})")
        return defect

    def form(self, mesh, traversal):
        self.check_symmetry(traversal)
        return assemble_nonlocal(mesh, traversal, self.evaluate(traversal))

    def _plane_wave(self, mesh, traversal, f, w):
        s = traversal.quad_s.ravel()
        kmat = np.asarray(self.evaluate(traversal)(s[:, None], s[None, :]), dtype=float)
        wf = w * f
        return complex(np.vdot(wf, kmat @ wf))

    def to_text(self):
        return f"kernel:{self.label}"


@dataclass(frozen=True)
class CosineKernel(Kernel):
    """k(s, t) = a cos(2 pi m (s - t) / P)."""

    kernel: Callable = field(default=None, compare=False, repr=False)
    a: float = -1.0
    m: int = 1
    label: str = "cosine"

    def __post_init__(self):
        a, m = float(self.a), int(self.m)
        object.__setattr__(self, "kernel",
                           lambda s, t, per: a * np.cos(2.0 * np.pi * m * (s - t) / per))

    def to_text(self):
        return f"kernel:cosine:{float(self.a)!r}:{int(self.m)}"


@dataclass(frozen=True)
class RankOne(BoundaryOperatorSpec):
    """Theta f = c <g, f> g with real g (scalar or callable of arclength)."""

    g: Union[float, Callable] = 1.0
    c: float = -1.0
    label: Optional[str] = None
    kind = "rank_one"

    def __post_init__(self):
        if isinstance(self.c, complex):
            raise SpecError("rank-one coefficient must be real")

    def form(self, mesh, traversal):
        return assemble_rank_one(mesh, traversal, self.g, self.c)

    def _plane_wave(self, mesh, traversal, f, w):
        gq = sample_boundary_function(self.g, mesh, traversal).ravel()
        return complex(self.c * abs(np.sum(w * gq * f)) ** 2)

    def to_text(self):
        if callable(self.g):
            return f"rank1:func:{self.label or getattr(self.g, '__name__', 'anonymous')}:{float(self.c)!r}"
        if float(self.g) == 1.0:
            return f"rank1:const:{float(self.c)!r}"
        return f"rank1:scaled:{float(self.g)!r}:{float(self.c)!r}"


@dataclass(frozen=True)
class Unverifiable(BoundaryOperatorSpec):
    """Operator known only through its abstract H^{1/2} -> H^{-1/2} action."""

    description: str = "abstract"
    tag: str = "theta3"
    kind = "unverifiable"

    def form(self, mesh, traversal):
        raise UnverifiablePairing(f"{self.description}: no L^2 factorisation, pairing cannot be discretised")

    def _plane_wave(self, mesh, traversal, f, w):
        raise UnverifiablePairing(f"{self.description}: pairing cannot be evaluated")

    def parts(self):
        return ((self, self.tag),)

    def to_text(self):
        return f"unverifiable:{self.description}"


@dataclass(frozen=True)
class Composite(BoundaryOperatorSpec):
    """Sum of parts, each tagged theta1, theta2 or theta3."""

    items: tuple = field(default_factory=tuple)
    kind = "composite"

    def __post_init__(self):
        items = []
        for it in self.items:
            if isinstance(it, BoundaryOperatorSpec):
                it = (it, "theta2")
            spec, tag = it
            if tag not in TAGS:
                raise SpecError(f"unknown class tag {tag!r}")
            if isinstance(spec, Composite):
                raise SpecError("nested sums are not supported")
            items.append((spec, tag))
        if not items:
            raise SpecError("empty sum")
        object.__setattr__(self, "items", tuple(items))

    def parts(self):
        return self.items

    def form(self, mesh, traversal):
        forms = [spec.form(mesh, traversal) for spec, _ in self.items]
        out = forms[0]
        for f in forms[1:]:
            out = out + f
        return out

    def _plane_wave(self, mesh, traversal, f, w):
        return sum(spec._plane_wave(mesh, traversal, f, w) for spec, _ in self.items)

    def to_text(self):
        body = ";".join(spec.to_text() if tag == "theta2" else f"{tag}@{spec.to_text()}"
                        for spec, tag in self.items)
        return f"sum:({body})"


def _split_top(body: str):
    out, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise SpecError("unbalanced parentheses")
        if ch == ";" and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise SpecError("unbalanced parentheses")
    out.append("".join(cur))
    return [s.strip() for s in out]


def _num(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise SpecError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise SpecError(f"non-finite value {text!r}")
    return v


def parse_spec(text: str) -> BoundaryOperatorSpec:
    """Parse the text syntax described in the module docstring."""
    if isinstance(text, BoundaryOperatorSpec):
        return text
    t = text.strip()
    if t == "zero":
        return Zero()
    if t.startswith("sum:"):
        m = re.fullmatch(r"sum:\((.*)\)", t, flags=re.S)
        if not m:
            raise SpecError(f"malformed sum {t!r}")
        items = []
        for part in _split_top(m.group(1)):
            tag = "theta2"
            if "@" in part.split(":", 1)[0]:
                tag, part = part.split("@", 1)
            items.append((parse_spec(part), tag.strip()))
        return Composite(tuple(items))
    fields = t.split(":")
    head = fields[0]
    if head == "mult" and len(fields) == 3 and fields[1] == "const":
        return Multiplication(_num(fields[2]))
    if head == "mult" and len(fields) == 3 and fields[1] == "edges":
        vals = tuple(_num(v) for v in fields[2].split(",") if v.strip())
        if not vals:
            raise SpecError("mult:edges needs at least one value")
        return Multiplication(vals)
    if head == "rank1" and len(fields) == 3 and fields[1] == "const":
        return RankOne(1.0, _num(fields[2]))
    if head == "rank1" and len(fields) == 4 and fields[1] == "scaled":
        return RankOne(_num(fields[2]), _num(fields[3]))
    if head == "kernel" and len(fields) == 4 and fields[1] == "cosine":
        m = _num(fields[3])
        if m != int(m):
            raise SpecError("cosine kernel frequency must be an integer")
        return CosineKernel(a=_num(fields[2]), m=int(m))
    if head == "unverifiable" and len(fields) >= 2:
        return Unverifiable(":".join(fields[1:]))
    raise SpecError(f"malformed boundary operator spec {text!r}")


def theta_matrix(mesh: TriangleMesh, traversal: BoundaryTraversal, spec) -> DiscreteForm:
    """Galerkin matrix of <u, Theta v> on the P1 space of ``mesh``."""
    return parse_spec(spec).form(mesh, traversal)


def plane_wave_form(mesh: TriangleMesh, traversal: BoundaryTraversal, spec, eta) -> float:
    """<e^{i x.eta}, Theta e^{i x.eta}> on the boundary, exact samples at Gauss points."""
    spec = parse_spec(spec)
    eta = np.asarray(eta, dtype=float).reshape(2)
    pts = traversal.quad_points.reshape(-1, 2)
    f = np.exp(1j * (pts @ eta))
    w = traversal.quad_weights.ravel()
    val = spec._plane_wave(mesh, traversal, f, w)
    if abs(val.imag) > 1e-10 * max(abs(val), 1e-300) and abs(val.imag) > 1e-14:
        raise SpecError(f"plane-wave form has imaginary part {val.imag:.3e}; spec is not self-adjoint")
    return float(val.real)


@dataclass(frozen=True)
class NonpositivityVerdict:
    passed: bool
    max_eigenvalue: float
    scale: float
    tol: float


def check_nonpositive(form: DiscreteForm, traversal: BoundaryTraversal, tol: float = 1e-10) -> NonpositivityVerdict:
    """Theta <= 0 on traces: largest eigenvalue of the boundary block <= tol*scale."""
    block = boundary_block(form, traversal)
    block = 0.5 * (block + block.T)
    scale = float(np.max(np.abs(block))) if block.size else 0.0
    top = float(la.eigvalsh(block)[-1]) if block.size else 0.0
    return NonpositivityVerdict(top <= tol * scale, top, scale, tol)


def lp_norm(theta, p: float, traversal: BoundaryTraversal, mesh: TriangleMesh | None = None) -> float:
    """Quadrature value of the L^p(boundary) norm; p = inf gives max |theta| over samples."""
    if not p > 1:
        raise SpecError("p must exceed 1")
    if isinstance(theta, Multiplication):
        vals = theta.samples(mesh, traversal)
    else:
        vals = sample_boundary_function(theta, mesh, traversal)
    a = np.abs(vals)
    if math.isinf(p):
        return float(np.max(a))
    return float(np.sum(traversal.quad_weights * a ** p) ** (1.0 / p))


def _boundary_mass_and_laplacian(mesh, traversal):
    tmat = boundary_block(assemble_boundary_weighted(mesh, traversal, 1.0), traversal)
    nb = traversal.n_boundary
    lap = np.zeros((nb, nb))
    el = traversal.edge_local()
    inv = 1.0 / traversal.edge_lengths
    for a, b, c in zip(el[:, 0], el[:, 1], inv):
        lap[a, a] += c
        lap[b, b] += c
        lap[a, b] -= c
        lap[b, a] -= c
    return tmat, lap


def half_norm_matrix(mesh: TriangleMesh, traversal: BoundaryTraversal) -> np.ndarray:
    """Gram matrix of the discrete H^{1/2}(boundary) proxy norm, T + T#L.

    T is the boundary mass matrix and L the arclength P1 stiffness on the
    boundary; T#L = T^{1/2} (T^{-1/2} L T^{-1/2})^{1/2} T^{1/2} is their
    matrix geometric mean, i.e. the half-way point of the interpolation
    scale between L^2 and H^1 on the boundary.
    """
    tmat, lap = _boundary_mass_and_laplacian(mesh, traversal)
    lam, v = la.eigh(lap, tmat)
    # the constant mode gives lam ~ rounding, whose square root is not small
    lam[lam < 1e3 * np.finfo(float).eps * lam.max()] = 0.0
    tv = tmat @ v
    gm = (tv * np.sqrt(np.maximum(lam, 0.0))) @ tv.T
    return tmat + 0.5 * (gm + gm.T)


@dataclass(frozen=True)
class AdmissibilityVerdict:
    passed: bool
    parts: tuple
    delta: float
    notes: tuple = ()

    def to_dict(self):
        return {"passed": self.passed, "delta": self.delta, "parts": list(self.parts),
                "notes": list(self.notes), "heuristic": True}


def _theta3_norm(form, mesh, traversal):
    block = boundary_block(form, traversal)
    h = half_norm_matrix(mesh, traversal)
    ev = la.eigh(0.5 * (block + block.T), h, eigvals_only=True)
    return float(np.max(np.abs(ev)))


def classify(spec, mesh: TriangleMesh, traversal: BoundaryTraversal, delta: float = 0.1) -> AdmissibilityVerdict:
    """Check each part of Theta against the decomposition hypothesis.

    Multiplication parts need a finite L^p norm, kernel and rank-one parts
    factor through L^2(boundary), and theta3-tagged parts must have proxy
    operator norm H^{1/2} -> H^{-1/2} at most ``delta``. The delta test is
    heuristic: the admissible threshold is not computable.
    """
    spec = parse_spec(spec)
    rows = []
    ok = True
    notes = []
    for part, tag in spec.parts():
        row = {"spec": part.to_text(), "kind": part.kind, "tag": tag, "passed": True,
               "lp_norm": None, "theta3_norm": None, "note": ""}
        if isinstance(part, Unverifiable):
            row.update(passed=False, note="unverifiable pairing")
        else:
            form = part.form(mesh, traversal)
            if isinstance(part, Multiplication):
                row["lp_norm"] = lp_norm(part, part.p, traversal, mesh)
                if not math.isfinite(row["lp_norm"]):
                    row.update(passed=False, note="theta not in L^p")
            elif isinstance(part, (Kernel, RankOne)):
                row["note"] = "factors through L^2(boundary)"
            if tag == "theta3":
                nrm = _theta3_norm(form, mesh, traversal)
                row["theta3_norm"] = nrm
                if nrm > delta:
                    row.update(passed=False, note=f"theta3 proxy norm {nrm:.4g} exceeds delta {delta}")
            elif tag == "theta1":
                row["note"] = (row["note"] + "; " if row["note"] else "") + "discrete form bounded below"
        ok = ok and row["passed"]
        rows.append(row)
    if any(r["tag"] == "theta3" for r in rows):
        notes.append("theta3 threshold is heuristic")
    return AdmissibilityVerdict(ok, tuple(rows), float(delta), tuple(notes))
