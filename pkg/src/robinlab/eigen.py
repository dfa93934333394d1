"""Generalized symmetric eigensolvers, counting functions and extrapolation.

Two independent routes to the eigenvalue count below a level are provided:
:func:`counting_function` reads it off a computed spectrum, while
:func:`inertia_count` gets it from the signature of ``K - lam*M``
(Sylvester's law of inertia) without computing any eigenvalues.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy import sparse
from scipy.sparse.linalg import splu

from .assembly import DiscreteForm

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "WindowError",
    "Spectrum",
    "ExtrapolatedSpectrum",
    "SolveOptions",
    "solve",
    "counting_function",
    "inertia_count",
    "richardson",
    "merge_multiplicities",
    "write_spectrum_csv",
]

MERGE_RTOL = 1e-8


class SolverError(RuntimeError):
    pass


class WindowError(ValueError):
    """The computed eigenvalues do not reach far enough."""


def _mat(a):
    if isinstance(a, DiscreteForm):
        return a.matrix
    return a


def merge_multiplicities(values, rtol: float = MERGE_RTOL):
    """Group ascending values whose relative gap is below ``rtol``.

    Returns (distinct values, multiplicities, cluster index per input value).
    """
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return np.array([]), np.array([], dtype=int), np.array([], dtype=int)
    scale = max(float(np.max(np.abs(values))), 1e-300)
    cluster = np.zeros(len(values), dtype=int)
    for i in range(1, len(values)):
        gap = values[i] - values[i - 1]
        ref = max(abs(values[i]), abs(values[i - 1]), 1e-12 * scale)
        cluster[i] = cluster[i - 1] + (0 if gap <= rtol * ref else 1)
    nclus = cluster[-1] + 1
    mult = np.bincount(cluster, minlength=nclus)
    means = np.bincount(cluster, weights=values, minlength=nclus) / mult
    return means, mult, cluster


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Smallest eigenvalues of a pencil (K, M), ascending, with multiplicity."""

    eigenvalues: np.ndarray
    dimension: int
    requested: int
    eigenvectors: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None
    method: str = "dense"
    descriptor: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def complete(self) -> bool:
        return len(self.eigenvalues) == self.dimension

    def merged(self, rtol: float = MERGE_RTOL):
        vals, mult, _ = merge_multiplicities(self.eigenvalues, rtol)
        return vals, mult


@dataclass(frozen=True)
class SolveOptions:
    dense_threshold: int = 2000
    tol: float = 1e-9
    abs_tol: float = 1e-12
    max_restarts: int = 60
    krylov_depth: int = 4
    seed: int = 0
    vectors: bool = True
    sigma: Optional[float] = None
    verify_count: bool = True


def _check_pd_dense(md):
    try:
        return la.cholesky(md, lower=True)
    except la.LinAlgError as exc:
        raise SolverError("mass matrix is not positive definite") from exc


def _dense_solve(k, m, count, want_vectors):
    kd = k.toarray() if sparse.issparse(k) else np.asarray(k, dtype=float)
    md = m.toarray() if sparse.issparse(m) else np.asarray(m, dtype=float)
    low = _check_pd_dense(md)
    # reduce to the standard problem C y = lam y with C = L^-1 K L^-T
    tmp = la.solve_triangular(low, kd, lower=True)
    c = la.solve_triangular(low, tmp.T, lower=True).T
    c = 0.5 * (c + c.T)
    if want_vectors:
        # full QL with vectors is ~20x slower than the subset driver at n ~ 2000
        w, y = la.eigh(c, driver="evx", subset_by_index=[0, count - 1])
        x = la.solve_triangular(low.T, y, lower=False)
        return w, x
    w = la.eigh(c, eigvals_only=True, driver="ev")
    return w[:count], None


def _m_orthonormalize(w, m, drop_tol=1e-10, ref=0.0):
    # ``ref``: squared M-norm scale of the block before projection, so that
    # a remainder made only of cancellation noise is dropped entirely
    floor = (1e3 * np.finfo(float).eps) ** 2 * ref
    for _ in range(2):
        if w.shape[1] == 0:
            return w
        # unit columns first: small but genuine corrections must not be
        # judged dependent relative to a much larger column
        nrm = np.einsum("ij,ij->j", w, m @ w)
        live = nrm > floor
        if not live.any():
            return w[:, :0]
        w = w[:, live] / np.sqrt(nrm[live])
        floor = 0.0
        g = w.T @ (m @ w)
        g = 0.5 * (g + g.T)
        s, u = np.linalg.eigh(g)
        if s[-1] <= floor:
            return w[:, :0]
        keep = s > max(drop_tol * s[-1], floor)
        w = (w @ u[:, keep]) / np.sqrt(s[keep])
    return w


def _project_out(w, q, m):
    for _ in range(2):
        w = w - q @ (q.T @ (m @ w))
    return w


def _sparse_inertia(a):
    """(n_negative, min |pivot|) from a symmetric-permutation sparse LU of ``a``."""
    lu = splu(a.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    d = lu.U.diagonal()
    return int(np.sum(d < 0)), float(np.min(np.abs(d)))


def _dense_inertia(a):
    """(n_negative, min |pivot eigenvalue|) via Bunch-Kaufman LDL^T."""
    _, d, _ = la.ldl(a, lower=True, hermitian=True)
    n = d.shape[0]
    neg = 0
    smallest = math.inf
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            ev = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
            neg += int(np.sum(ev < 0))
            smallest = min(smallest, float(np.min(np.abs(ev))))
            i += 2
        else:
            neg += int(d[i, i] < 0)
            smallest = min(smallest, abs(float(d[i, i])))
            i += 1
    return neg, smallest


def inertia_count(K, M, lam: float, method: str = "auto", dense_limit: int = 3000) -> int:
    """Number of eigenvalues of (K, M) strictly below ``lam``.

    Counts the negative pivots of an LDL^T factorisation of ``K - lam*M``.
    If ``lam`` sits on a discrete eigenvalue (pivot below 1e-10 relative) it
    is nudged upward once with a warning; a second near-singular pivot raises.
    """
    k = _mat(K)
    m = _mat(M)
    scale = float(abs(k).max() + abs(lam) * abs(m).max()) if sparse.issparse(k) else \
        float(np.max(np.abs(k)) + abs(lam) * np.max(np.abs(m)))
    n = k.shape[0]
    use_dense = method == "dense" or (method == "auto" and n <= dense_limit)
    for attempt in range(2):
        a = (k - lam * m)
        if use_dense:
            ad = a.toarray() if sparse.issparse(a) else np.asarray(a)
            neg, small = _dense_inertia(ad)
        else:
            res = _sparse_inertia(sparse.csc_matrix(a))
            if res is None:
                if n > 4 * dense_limit:
                    raise SolverError("sparse factorisation required row pivoting; inertia unavailable")
                ad = a.toarray()
                neg, small = _dense_inertia(ad)
            else:
                neg, small = res
        if small > 1e-10 * scale:
            return neg
        if attempt == 0:
            bump = 1e-8 * max(1.0, abs(lam))
            warnings.warn(f"shift {lam!r} is within tolerance of an eigenvalue; using {lam + bump!r}",
                          RuntimeWarning, stacklevel=2)
            lam = lam + bump
    raise SolverError("factorisation breakdown: shift coincides with an eigenvalue")


def _choose_sigma(k, m):
    sigma = -1.0
    for _ in range(60):
        try:
            neg = inertia_count(k, m, sigma, method="sparse")
        except SolverError:
            neg = 1
        if neg == 0:
            return sigma
        sigma = 4.0 * sigma - 1.0
    raise SolverError("could not find a shift below the spectrum")


def _lanczos_solve(k, m, count, opts: SolveOptions):
    """Block shift-invert Lanczos with full reorthogonalisation and restarts.

    Each cycle builds a block Krylov space of (K - sigma M)^-1 M from the
    current Ritz block, M-orthogonalising every new block against all
    previous ones twice, then does Rayleigh-Ritz on (K, M). The block is
    wider than ``count`` so that repeated eigenvalues are captured.
    """
    n = k.shape[0]
    kc = sparse.csc_matrix(k)
    mc = sparse.csc_matrix(m)
    try:
        mlu = splu(mc)
    except RuntimeError as exc:
        raise SolverError("mass matrix is singular") from exc
    neg_m = _sparse_inertia(mc)
    if neg_m is not None and neg_m[0] > 0:
        raise SolverError("mass matrix is not positive definite")
    sigma = opts.sigma if opts.sigma is not None else _choose_sigma(kc, mc)
    op = splu((kc - sigma * mc).tocsc())

    width = min(n, count + max(4, count // 2))
    rng = np.random.default_rng(opts.seed)
    x = rng.standard_normal((n, width))
    # absolute floor relative to the spectral radius estimate |K|/|M|; an
    # unscaled 1e-12 is below rounding for zero modes on fine meshes
    abs_tol = opts.abs_tol * max(1.0, abs(kc).max() / abs(mc).max())
    theta = None
    for cycle in range(opts.max_restarts):
        q = _m_orthonormalize(x, mc)
        blocks = [q]
        for _ in range(opts.krylov_depth):
            w = op.solve(np.asarray(mc @ blocks[-1]))
            ref = float(np.max(np.einsum("ij,ij->j", w, mc @ w)))
            basis = np.hstack(blocks)
            w = _project_out(w, basis, mc)
            w = _m_orthonormalize(w, mc, ref=ref)
            if w.shape[1] == 0:
                break
            blocks.append(w)
            if sum(b.shape[1] for b in blocks) >= n:
                break
        basis = np.hstack(blocks)
        h = basis.T @ (kc @ basis)
        g = basis.T @ (mc @ basis)
        theta, y = la.eigh(0.5 * (h + h.T), 0.5 * (g + g.T))
        x = basis @ y[:, :width]
        xc = x[:, :count]
        r = kc @ xc - (mc @ xc) * theta[:count]
        rnorm = np.sqrt(np.maximum(np.sum(r * mlu.solve(np.asarray(r)), axis=0), 0.0))
        tol = opts.tol * np.abs(theta[:count]) + abs_tol
        if np.all(rnorm <= tol):
            if opts.verify_count and not _window_complete(kc, mc, theta, count):
                log.debug("inertia check found a missed eigenvalue; widening block")
                extra = rng.standard_normal((n, 4))
                x = np.hstack([x, extra])
                width += 4
                continue
            return theta[:count], xc, rnorm, cycle + 1
        if x.shape[1] < width:
            x = np.hstack([x, rng.standard_normal((n, width - x.shape[1]))])
    raise SolverError(f"shift-invert Lanczos did not converge in {opts.max_restarts} restarts")


def _window_complete(k, m, theta, count):
    """Check via inertia that no eigenvalue below the window top was skipped."""
    top = theta[count - 1]
    nxt = theta[count] if len(theta) > count else top + abs(top) + 1.0
    if nxt - top <= MERGE_RTOL * max(abs(top), 1.0):
        return True
    mid = top + 0.5 * (nxt - top)
    return inertia_count(k, m, mid, method="sparse") <= count


def solve(K, M, count: int, opts: SolveOptions | None = None, descriptor: dict | None = None) -> Spectrum:
    """Smallest ``count`` eigenpairs of K x = lam M x.

    Dimensions up to ``opts.dense_threshold`` use a dense Cholesky reduction
    and a symmetric QL/QR solve; larger ones use shift-invert Lanczos.
    Eigenvectors are M-orthonormal.
    """
    opts = opts or SolveOptions()
    k = _mat(K)
    m = _mat(M)
    n = k.shape[0]
    if m.shape != k.shape:
        raise SolverError("K and M have different shapes")
    if count < 1 or count > n:
        raise SolverError(f"count must be in [1, {n}]")
    if n <= opts.dense_threshold:
        vals, vecs = _dense_solve(k, m, count, opts.vectors)
        method = "dense"
        res = None
        if vecs is not None:
            r = k @ vecs - (m @ vecs) * vals
            res = np.linalg.norm(r, axis=0)
    else:
        vals, vecs, res, cycles = _lanczos_solve(sparse.csr_matrix(k), sparse.csr_matrix(m), count, opts)
        method = f"lanczos({cycles})"
        if not opts.vectors:
            vecs = None
    order = np.argsort(vals, kind="stable")
    vals = np.asarray(vals)[order]
    if vecs is not None:
        vecs = vecs[:, order]
        # deterministic sign: largest-magnitude entry positive
        idx = np.argmax(np.abs(vecs), axis=0)
        sgn = np.sign(vecs[idx, np.arange(vecs.shape[1])])
        sgn[sgn == 0] = 1.0
        vecs = vecs * sgn
    if res is not None:
        res = np.asarray(res)[order]
    return Spectrum(
        eigenvalues=vals,
        dimension=n,
        requested=count,
        eigenvectors=vecs,
        residuals=res,
        method=method,
        descriptor=dict(descriptor or {}),
    )


def counting_function(spectrum, lam: float, strict: bool = False) -> int:
    """N(lam) = #{j : lam_j <= lam} over the computed eigenvalues.

    ``strict=True`` counts lam_j < lam instead, which is what
    :func:`inertia_count` returns. Raises :class:`WindowError` when ``lam``
    reaches the top of an incomplete spectrum, since eigenvalues beyond
    the window could then be missing from the count.
    """
    if not math.isfinite(lam):
        raise ValueError("lam must be finite")
    vals = np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)
    complete = bool(getattr(spectrum, "complete", False))
    if not complete and len(vals) and lam >= vals[-1] * (1 - MERGE_RTOL * np.sign(vals[-1])) - 1e-300:
        if lam >= vals[-1] or abs(lam - vals[-1]) <= MERGE_RTOL * abs(vals[-1]):
            raise WindowError(f"lam={lam!r} is at or beyond the largest computed eigenvalue {vals[-1]!r}")
    if strict:
        return int(np.sum(vals < lam))
    return int(np.sum(vals <= lam))


@dataclass(frozen=True, eq=False)
class ExtrapolatedSpectrum:
    """Per-index extrapolated eigenvalues with error bars.

    ``orders`` is NaN unless three levels were supplied.
    """

    values: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    extrapolated: np.ndarray
    finest: np.ndarray

    def __len__(self):
        return len(self.values)


def _values(s):
    return np.asarray(getattr(s, "eigenvalues", s), dtype=float)


def richardson(spec_h, spec_h2, spec_h4=None, safety: float = 2.0, min_order: float = 1.5,
               count: int | None = None) -> ExtrapolatedSpectrum:
    """Order-2 Richardson extrapolation over nested levels (coarse to fine).

    With two levels: lam* = lam_{h/2} + (lam_{h/2} - lam_h)/3 and error
    ``safety * |lam_{h/2} - lam*|``. With three levels the finest pair is
    extrapolated, the observed order log2(d_coarse / d_fine) is reported, and
    extrapolation is refused (value = finest, error = finest level gap) when
    the order is below ``min_order`` or undefined.
    """
    levels = [_values(spec_h), _values(spec_h2)] + ([_values(spec_h4)] if spec_h4 is not None else [])
    n = min(len(v) for v in levels) if count is None else count
    if any(len(v) < n for v in levels):
        raise ValueError("index ranges do not match across levels")
    levels = [v[:n] for v in levels]
    coarse, fine = levels[-2], levels[-1]
    gap = fine - coarse
    ext = fine + gap / 3.0
    err = safety * np.abs(fine - ext)
    orders = np.full(n, np.nan)
    done = np.ones(n, dtype=bool)
    if len(levels) == 3:
        g1 = levels[1] - levels[0]
        scale = np.maximum(np.abs(fine), 1.0)
        noise = 1e-11 * scale
        for j in range(n):
            if abs(g1[j]) <= noise[j] and abs(gap[j]) <= noise[j]:
                # converged to rounding; keep the finest value
                ext[j] = fine[j]
                err[j] = max(abs(g1[j]), abs(gap[j]))
                done[j] = False
                continue
            ratio = g1[j] / gap[j] if gap[j] != 0 else math.inf
            if ratio > 0 and math.isfinite(ratio):
                orders[j] = math.log2(ratio)
            if not (orders[j] >= min_order):
                ext[j] = fine[j]
                err[j] = max(abs(gap[j]), abs(g1[j])) if not np.isfinite(orders[j]) else abs(gap[j])
                done[j] = False
    return ExtrapolatedSpectrum(values=ext, errors=err, orders=orders, extrapolated=done, finest=fine)


def write_spectrum_csv(spectrum, path, errors=None) -> None:
    """``index,eigenvalue,multiplicity,error_estimate`` with 17 significant digits."""
    if isinstance(spectrum, ExtrapolatedSpectrum):
        vals = spectrum.values
        errs = spectrum.errors if errors is None else errors
    else:
        vals = _values(spectrum)
        res = getattr(spectrum, "residuals", None)
        errs = errors if errors is not None else (res if res is not None else np.zeros(len(vals)))
    _, mult, cluster = merge_multiplicities(vals)
    lines = ["index,eigenvalue,multiplicity,error_estimate"]
    for i, v in enumerate(vals):
        lines.append(f"{i + 1},{v:.17g},{mult[cluster[i]]},{float(errs[i]):.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
