"""Closed-form and root-finding reference spectra.

These are deliberately independent of the finite element code: rectangles by
separation of variables, the Robin interval by bracketed bisection, and the
disk through a self-contained Bessel J_m implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "OracleError",
    "OracleSpectrum",
    "rectangle_spectrum",
    "robin_1d",
    "bessel_j",
    "bessel_zero",
    "disk_dirichlet_spectrum",
    "write_oracle_csv",
]


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleSpectrum:
    eigenvalues: tuple
    labels: tuple
    provenance: str

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def values(self) -> np.ndarray:
        return np.array(self.eigenvalues, dtype=float)


def _check_bc(bc):
    if isinstance(bc, str):
        if bc in ("dirichlet", "neumann"):
            return bc, None
        if bc.startswith("robin:"):
            return "robin", float(bc.split(":", 1)[1])
    elif isinstance(bc, tuple) and len(bc) == 2 and bc[0] == "robin":
        return "robin", float(bc[1])
    raise OracleError(f"unknown boundary condition {bc!r}")


def rectangle_spectrum(a: float, b: float, bc="dirichlet", count: int = 10) -> OracleSpectrum:
    """Lowest ``count`` eigenvalues of the Laplacian on (0,a) x (0,b).

    ``bc`` is ``"dirichlet"``, ``"neumann"``, ``"robin:<theta>"`` or
    ``("robin", theta)`` with the same constant theta on all four sides.
    """
    if a <= 0 or b <= 0:
        raise OracleError("rectangle sides must be positive")
    if count < 1:
        raise OracleError("count must be >= 1")
    kind, theta = _check_bc(bc)
    if kind == "robin":
        mu_a = robin_1d(theta, a, count).values
        mu_b = robin_1d(theta, b, count).values
        pairs = [(mu_a[p] + mu_b[q], (p, q)) for p in range(count) for q in range(count)]
        prov = "transcendental_rootfind"
    else:
        start = 1 if kind == "dirichlet" else 0
        stop = start + count
        pairs = [(math.pi ** 2 * (p * p / (a * a) + q * q / (b * b)), (p, q))
                 for p in range(start, stop) for q in range(start, stop)]
        prov = "closed_form"
    pairs.sort(key=lambda t: (t[0], t[1]))
    pairs = pairs[:count]
    return OracleSpectrum(tuple(v for v, _ in pairs), tuple(lbl for _, lbl in pairs), prov)


def _bisect(f, lo, hi, rtol=1e-13, maxit=200):
    flo = f(lo)
    fhi = f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise OracleError("bracket without sign change")
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= rtol * max(abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def _robin_det(theta, length, mu):
    """Boundary determinant of -u'' = mu u with u'(0) = theta u(0), u'(L) = -theta u(L)."""
    if mu > 0:
        k = math.sqrt(mu)
        return (theta * theta - k * k) * math.sin(k * length) + 2 * theta * k * math.cos(k * length)
    if mu < 0:
        k = math.sqrt(-mu)
        return (theta * theta + k * k) * math.sinh(k * length) + 2 * theta * k * math.cosh(k * length)
    return theta * (2 + theta * length)


def _scan_roots(f, lo, hi, samples=33):
    xs = np.linspace(lo, hi, samples)
    vals = [f(x) for x in xs]
    roots = []
    for i in range(samples - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0 and i > 0:
            roots.append(float(xs[i]))
        elif (a > 0) != (b > 0) and a != 0 and b != 0:
            roots.append(_bisect(f, float(xs[i]), float(xs[i + 1])))
    return roots


def robin_1d(theta: float, length: float, count: int) -> OracleSpectrum:
    """Eigenvalues of -u'' = mu u on (0, L) with -u'(0) + theta u(0) = 0 = u'(L) + theta u(L).

    The interval is symmetric, so eigenfunctions are even or odd about L/2
    and the 2x2 determinant factors into two scalar equations
    (even: theta cos(kL/2) = k sin(kL/2); odd: k cos(kL/2) = -theta sin(kL/2)).
    Solving the factors separately keeps nearly coincident roots apart and
    avoids the poles of the tan/cot forms.
    """
    if length <= 0:
        raise OracleError("interval length must be positive")
    theta = float(theta)
    half = 0.5 * length
    out = []

    if theta == 0.0:
        for j in range(count):
            out.append(((j * math.pi / length) ** 2, ("neumann", j)))
        return OracleSpectrum(tuple(v for v, _ in out), tuple(lbl for _, lbl in out), "closed_form")

    def even_pos(k):
        return theta * math.cos(k * half) - k * math.sin(k * half)

    def odd_pos(k):
        return k * math.cos(k * half) + theta * math.sin(k * half)

    if theta < 0:
        # mu <= 0 branch, k = sqrt(-mu): even k tanh(kL/2) = -theta (always one
        # root), odd k coth(kL/2) = -theta (one root iff -theta > 2/L)
        def even_neg(k):
            return k * math.sinh(k * half) + theta * math.cosh(k * half)

        def odd_neg(k):
            return k * math.cosh(k * half) + theta * math.sinh(k * half)

        kmax = 2.0 * abs(theta) + 4.0 / length + 1.0
        for name, f in (("even", even_neg), ("odd", odd_neg)):
            for k in _scan_roots(f, 0.0, kmax, 2049):
                if k > 0:
                    out.append((-k * k, (name, -1)))
        if abs(theta * length + 2.0) < 1e-14:
            out.append((0.0, ("odd", 0)))

    n = 0
    while len(out) < count + 2:
        lo = n * math.pi / length
        hi = (n + 1) * math.pi / length
        eps = 1e-12 * hi
        for name, f in (("even", even_pos), ("odd", odd_pos)):
            # even_pos(0) = theta != 0, so the even scan may start at k = 0 and
            # catch the root k^2 ~ 2 theta / L for tiny theta > 0; odd_pos(0) = 0
            start = lo + eps if (n == 0 and name == "odd") else lo
            for k in _scan_roots(f, start, hi, 33):
                if k > 0 and (not out or all(abs(k * k - v) > 1e-14 * max(1.0, k * k) for v, _ in out)):
                    out.append((k * k, (name, n)))
        n += 1
        if n > 100000:
            raise OracleError("bracket exhaustion before count roots")

    out.sort(key=lambda t: t[0])
    out = out[:count]
    for mu, _ in out:
        _verify_sign_change(theta, length, mu)
    return OracleSpectrum(tuple(v for v, _ in out), tuple(lbl for _, lbl in out), "transcendental_rootfind")


def _verify_sign_change(theta, length, mu):
    d = 1e-7 * max(1.0, abs(mu))
    a, b = _robin_det(theta, length, mu - d), _robin_det(theta, length, mu + d)
    if (a > 0) == (b > 0) and a != 0 and b != 0:
        raise OracleError(f"root {mu} not confirmed by a sign change of the determinant")


def bessel_j(m: int, x: float) -> float:
    """Bessel function of the first kind J_m(x), integer m >= 0, x >= 0.

    Power series for x <= 12; above that, Miller's downward recurrence
    normalised with 1 = J_0 + 2 * sum J_2k.
    """
    if m < 0 or int(m) != m:
        raise OracleError("order must be a non-negative integer")
    if x < 0:
        raise OracleError("argument must be non-negative")
    m = int(m)
    x = float(x)
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    if x <= 12.0:
        half = 0.5 * x
        term = half ** m / math.factorial(m)
        total = term
        q = -half * half
        k = 0
        while True:
            k += 1
            term *= q / (k * (k + m))
            total += term
            if abs(term) < 1e-17 * max(abs(total), 1e-300) and k > 2:
                break
            if k > 500:
                break
        return total
    start = 2 * ((max(m, int(x)) + 15 + int(math.sqrt(40.0 * max(m, int(x))))) // 2)
    jp1, j = 0.0, 1e-300
    norm = 0.0
    result = 0.0
    for k in range(start, 0, -1):
        jm1 = 2.0 * k / x * j - jp1
        jp1, j = j, jm1
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if (k - 1) == m:
            result = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j
    norm += j  # J_0 term
    return result / norm


def _mcmahon(m, k):
    beta = (k + 0.5 * m - 0.25) * math.pi
    mu = 4.0 * m * m
    return beta - (mu - 1) / (8 * beta) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * beta) ** 3)


def bessel_zero(m: int, k: int) -> float:
    """k-th positive zero of J_m, to about 1e-12 absolute."""
    if k < 1:
        raise OracleError("zero index starts at 1")
    step = 0.1
    x = max(float(m), 0.5)
    fx = bessel_j(m, x)
    found = 0
    limit = _mcmahon(m, k) + math.pi
    while True:
        nx = x + step
        fn = bessel_j(m, nx)
        if (fx > 0) != (fn > 0):
            found += 1
            if found == k:
                lo, hi = x, nx
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    fm = bessel_j(m, mid)
                    if (fm > 0) == (fx > 0):
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo < 2e-13:
                        break
                return 0.5 * (lo + hi)
        x, fx = nx, fn
        if x > limit + 10 * math.pi * k:
            raise OracleError("zero bracketing failed")


def disk_dirichlet_spectrum(radius: float, count: int) -> OracleSpectrum:
    """Dirichlet eigenvalues (j_{m,k}/R)^2 of the disk; m >= 1 counted twice."""
    if radius <= 0:
        raise OracleError("radius must be positive")
    cand = []
    bound = None
    m = 0
    while True:
        z1 = bessel_zero(m, 1)
        if bound is not None and z1 > bound:
            break
        k = 1
        while True:
            z = bessel_zero(m, k) if k > 1 else z1
            if bound is not None and z > bound:
                break
            cand.append((z, m, k))
            k += 1
            if bound is None and k > count:
                break
        if bound is None:
            # first pass over m = 0 gives an upper bound for the first `count`
            bound = sorted(c[0] for c in cand)[min(count, len(cand)) - 1]
        m += 1
    cand.sort()
    vals, labels = [], []
    for z, m, k in cand:
        mult = 1 if m == 0 else 2
        for _ in range(mult):
            vals.append((z / radius) ** 2)
            labels.append((m, k))
    return OracleSpectrum(tuple(vals[:count]), tuple(labels[:count]), "bessel_rootfind")


def write_oracle_csv(spec: OracleSpectrum, path) -> None:
    """Same columns as the spectrum CSV plus ``mode_label``."""
    vals = spec.values
    lines = ["index,eigenvalue,multiplicity,error_estimate,mode_label"]
    for i, (v, lbl) in enumerate(zip(vals, spec.labels), start=1):
        mult = int(np.sum(np.abs(vals - v) <= 1e-8 * max(abs(v), 1e-300)))
        label = "-".join(str(x) for x in lbl)
        lines.append(f"{i},{v:.17g},{mult},0,{label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
