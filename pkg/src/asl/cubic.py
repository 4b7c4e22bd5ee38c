"""Polynomial holomorphic differentials phi(z) dz^k on the plane.

Conventions
-----------
* Coefficients are stored low-degree-first; the leading coefficient is
  nonzero.  A differential is *monic* when the leading coefficient is 1
  and *centered* when the subleading one vanishes (roots sum to zero).
* The affine change z -> a z + b acts by pullback,
  phi(z) dz^k -> phi(az+b) a^k dz^k, and ``normalize_cubic`` returns the
  unique such map (principal branch of a = c_d^(-1/(d+k))) producing a
  monic centered representative.
* A *natural coordinate* w for a cubic differential C satisfies
  C = 2 dw^3; ``develop`` computes w by analytic continuation of the cube
  root along a segment.  The singular flat metric is |phi|^(2/k) |dz|^2.
* The d+3 standard half-planes of a monic cubic differential are indexed
  by the star rays arg z = 2 pi k/(d+3); half-plane k carries the natural
  coordinate whose image of its star ray is the positive real axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidInput, ZeroDifferential, ZeroOnPath

MONIC_TOL = 1e-14
ZERO_GUARD = 1e-6  # flat-distance guard radius for paths near zeros


class PolyCubic:
    """Polynomial differential phi(z) dz^k, coefficients low-degree-first."""

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs):
        if order < 1:
            raise InvalidInput("differential order must be a positive integer")
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if len(c) == 0 or np.all(c == 0):
            raise ZeroDifferential("all coefficients vanish")
        self.order = int(order)
        self.coeffs = tuple(complex(x) for x in c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_monic(self) -> bool:
        return abs(self.coeffs[-1] - 1.0) < MONIC_TOL

    @property
    def is_centered(self) -> bool:
        if self.degree == 0:
            return True
        return abs(self.coeffs[-2]) < MONIC_TOL

    @property
    def is_normalized(self) -> bool:
        return self.is_monic and self.is_centered

    def __call__(self, z):
        out = np.zeros_like(np.asarray(z, dtype=complex))
        for c in reversed(self.coeffs):
            out = out * z + c
        return out

    def deriv(self, z):
        """Value of phi'(z)."""
        out = np.zeros_like(np.asarray(z, dtype=complex))
        d = self.degree
        for j in range(d, 0, -1):
            out = out * z + j * self.coeffs[j]
        return out

    def roots(self) -> np.ndarray:
        if self.degree == 0:
            return np.array([], dtype=complex)
        return np.roots(list(reversed(self.coeffs)))

    def scaled(self, factor: complex) -> "PolyCubic":
        return PolyCubic(self.order, [factor * c for c in self.coeffs])

    def flat_density(self, z):
        """Length density |phi|^(1/k) of the singular flat metric."""
        return np.abs(self(z)) ** (1.0 / self.order)

    def isclose(self, other: "PolyCubic", tol: float = 1e-12) -> bool:
        if self.order != other.order or self.degree != other.degree:
            return False
        return max(abs(a - b) for a, b in zip(self.coeffs, other.coeffs)) < tol

    def __repr__(self):
        return f"PolyCubic(order={self.order}, coeffs={self.coeffs})"


@dataclass(frozen=True)
class AffineMap:
    """z -> a z + b."""

    a: complex
    b: complex

    def __call__(self, z):
        return self.a * z + self.b

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.a, -self.b / self.a)


def pullback(C: PolyCubic, T: AffineMap) -> PolyCubic:
    """Coefficients of phi(az+b) a^k dz^k."""
    comp = np.array([1.0 + 0j])  # (az+b)^0
    acc = np.zeros(C.degree + 1, dtype=complex)
    lin = np.array([T.b, T.a])
    for j, c in enumerate(C.coeffs):
        acc[: len(comp)] += c * comp
        if j < C.degree:
            comp = np.convolve(comp, lin)
    return PolyCubic(C.order, acc * T.a**C.order)


def normalize_cubic(C: PolyCubic) -> tuple[PolyCubic, AffineMap]:
    """Monic centered representative and the affine map realizing it.

    The returned map T satisfies pullback(C, T) = normalized output; its
    scale is the principal branch of c_d^(-1/(d+k)) and its shift moves
    the root mean to the origin.
    """
    d, k = C.degree, C.order
    cd = C.coeffs[-1]
    a = np.exp(-np.log(complex(cd)) / (d + k))
    b = 0.0 if d == 0 else -C.coeffs[-2] / (d * cd)
    T = AffineMap(complex(a), complex(b))
    N = pullback(C, T)
    c = list(N.coeffs)
    if abs(c[-1] - 1.0) > 1e-9 or (d >= 1 and abs(c[-2]) > 1e-9 * max(abs(x) for x in c)):
        raise InvalidInput("normalization failed; ill-conditioned coefficients")
    c[-1] = 1.0
    if d >= 1:
        c[-2] = 0.0
    return PolyCubic(C.order, c), T


def mu_action(j: int, C: PolyCubic) -> PolyCubic:
    """Root-of-unity action on normalized differentials.

    Coefficient c_m picks up zeta^(m+k) with zeta = exp(2 pi i j/(d+k)):
    the pullback of C under z -> zeta z, which fixes monic centered form.
    """
    if not C.is_normalized:
        raise InvalidInput("mu_action expects a monic centered differential")
    d, k = C.degree, C.order
    zeta = np.exp(2j * np.pi * j / (d + k))
    coeffs = [c * zeta ** (m + k) for m, c in enumerate(C.coeffs)]
    coeffs[-1] = 1.0
    if d >= 1:
        coeffs[-2] = 0.0
    return PolyCubic(C.order, coeffs)


def _clustered_roots(C: PolyCubic, tol: float = 1e-7) -> list[tuple[complex, int]]:
    """Roots grouped into (location, multiplicity) clusters."""
    rts = C.roots()
    out: list[tuple[complex, int]] = []
    for r in rts:
        for i, (loc, m) in enumerate(out):
            if abs(r - loc) < tol * max(1.0, abs(loc)):
                out[i] = ((loc * m + r) / (m + 1), m + 1)
                break
        else:
            out.append((complex(r), 1))
    return out


def flat_distance_to_zero(C: PolyCubic, zero: complex, mult: int, p: complex) -> float:
    """Local estimate of flat distance from p to a zero of multiplicity m."""
    from math import factorial

    k = C.order
    poly = np.poly1d(list(reversed([complex(x) for x in C.coeffs])))
    c = np.polyder(poly, mult)(zero) / factorial(mult)
    ex = (mult + k) / k
    return abs(c) ** (1.0 / k) * abs(p - zero) ** ex / ex


def develop(C: PolyCubic, z0: complex, z1: complex, branch_seed: complex,
            rtol: float = 1e-12, atol: float = 1e-12) -> complex:
    """Natural coordinate increment w(z1) - w(z0) along the straight segment.

    ``branch_seed`` selects the cube root of C/2 at z0; it is snapped to
    the nearest exact root.  Raises ZeroOnPath when the segment comes
    within the flat-metric guard radius of a zero of C.
    """
    return _develop_with_root(C, z0, z1, branch_seed, rtol, atol)[0]


def continue_cube_root(C: PolyCubic, z0: complex, z1: complex, branch_seed: complex,
                       rtol: float = 1e-12) -> complex:
    """Analytic continuation of the chosen cube root of C/2 along a segment."""
    return _develop_with_root(C, z0, z1, branch_seed, rtol, rtol)[1]


def _develop_with_root(C, z0, z1, branch_seed, rtol, atol):
    if C.order != 3:
        raise InvalidInput("develop is defined for cubic differentials")
    g0 = _snap_cube_root(C(z0) / 2.0, branch_seed)
    _check_path_clear(C, z0, z1)
    dz = z1 - z0

    def rhs(t, y):
        z = z0 + t * dz
        g = y[2] + 1j * y[3]
        dg = (g / 3.0) * _dlog(C, z) * dz
        dw = g * dz
        return [dw.real, dw.imag, dg.real, dg.imag]

    sol = solve_ivp(rhs, (0.0, 1.0), [0.0, 0.0, g0.real, g0.imag],
                    method="DOP853", rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise ZeroOnPath(f"developing-map integration failed: {sol.message}")
    w = complex(sol.y[0, -1] + 1j * sol.y[1, -1])
    g = _snap_cube_root(C(z1) / 2.0, complex(sol.y[2, -1] + 1j * sol.y[3, -1]))
    return w, g


def _dlog(C: PolyCubic, z: complex) -> complex:
    val = C(z)
    if abs(val) == 0.0:
        raise ZeroOnPath("path hit a zero of the differential")
    return C.deriv(z) / val


def _snap_cube_root(value: complex, seed: complex) -> complex:
    roots = [value ** (1 / 3) * np.exp(2j * np.pi * m / 3) for m in range(3)]
    g = min(roots, key=lambda r: abs(r - seed))
    if abs(g - seed) > 0.5 * abs(g) + 1e-12:
        raise InvalidInput("branch seed is not close to any cube root")
    return complex(g)


def _check_path_clear(C: PolyCubic, z0: complex, z1: complex, guard: float = ZERO_GUARD):
    for zero, mult in _clustered_roots(C):
        # euclidean distance from the segment, then local flat conversion
        d = _segment_distance(z0, z1, zero)
        if flat_distance_to_zero(C, zero, mult, zero + d) < guard:
            raise ZeroOnPath(
                f"segment passes within the guard radius of the zero at {zero:.6g}"
            )


def _segment_distance(z0: complex, z1: complex, p: complex) -> float:
    dz = z1 - z0
    L2 = abs(dz) ** 2
    if L2 == 0:
        return abs(p - z0)
    t = np.clip(((p - z0).conjugate() * dz).real / L2, 0.0, 1.0)
    return abs(z0 + t * dz - p)


# ---------------------------------------------------------------------------
# standard half-planes


@dataclass
class HalfPlane:
    """One of the d+3 natural-coordinate right half-planes near infinity.

    ``w_of`` maps plane points into the natural coordinate; the region
    represented is {Re w > trunc}.  The branch is pinned by the anchor on
    the sector's star ray together with the cube-root seed there.
    """

    index: int
    differential: PolyCubic
    anchor: complex
    seed: complex
    w_anchor: complex
    trunc: float
    sector_radius: float  # membership is only certified outside this radius
    zeta_vertex: float = 0.0  # vertex s of the certified enlarged sector

    @property
    def star_angle(self) -> float:
        d = self.differential.degree
        return 2 * np.pi * self.index / (d + 3)

    def w_of(self, z: complex, rtol: float = 1e-12) -> complex:
        """Natural coordinate of z, continued from the anchor."""
        return self.w_anchor + develop(self.differential, self.anchor, z,
                                       self.seed, rtol=rtol, atol=rtol)

    def contains(self, z: complex) -> bool:
        d = self.differential.degree
        rel = np.angle(np.exp(-1j * self.star_angle) * complex(z))
        if abs(rel) >= 3 * np.pi / (d + 3):
            return False
        if abs(z) < self.sector_radius:
            return False
        return self.w_of(z).real > self.trunc


def _zeta(d: int, index: int, z):
    """Sector coordinate with d zeta^3 = z^d dz^3 and the star ray on R+."""
    rot = np.exp(-2j * np.pi * index / (d + 3))
    return 3.0 / (d + 3) * (rot * np.asarray(z, dtype=complex)) ** ((d + 3) / 3.0)


def _zeta_inv(d: int, index: int, zeta):
    rot = np.exp(2j * np.pi * index / (d + 3))
    return rot * ((d + 3) / 3.0 * np.asarray(zeta, dtype=complex)) ** (3.0 / (d + 3))


def standard_half_planes(C: PolyCubic, eps: float = np.pi / 12,
                         samples: int = 9) -> list[HalfPlane]:
    """The d+3 half-planes covering a neighborhood of infinity.

    The truncation of each half-plane is raised until the cube root of
    C/(z^d dzeta^3) is within 1/(4L) of 1 on a sample grid of the slightly
    enlarged sector (L the sector's near-convexity constant); that margin
    certifies injectivity of the natural coordinate on the region.
    """
    if C.order != 3:
        raise InvalidInput("standard half-planes are defined for cubic differentials")
    if not C.is_monic:
        raise InvalidInput("standard half-planes require a monic differential")
    d = C.degree
    L = 1.0 / np.cos(eps) + 0.1
    delta = 1.0 / (4.0 * L)
    coeff_bound = 1.0 + 2.0 * max(abs(c) for c in C.coeffs)
    out = []
    for idx in range(d + 3):
        s = max(1.0, _zeta(d, 0, coeff_bound).real)
        for _ in range(80):
            if _injectivity_certificate(C, d, idx, s, eps, delta, samples):
                break
            s *= 1.3
        else:
            raise InvalidInput("injectivity certificate failed to stabilize")
        # shrink back to (nearly) the smallest certified vertex
        while s > 0.4:
            trial = s / 1.15
            if not _injectivity_certificate(C, d, idx, trial, eps, delta, samples):
                break
            s = trial
        anchor = complex(_zeta_inv(d, idx, 2.0 * s))
        seed = _star_seed(C, d, idx, anchor)
        w_anchor = complex(2.0 ** (-1 / 3) * 2.0 * s)
        hp = HalfPlane(
            index=idx,
            differential=C,
            anchor=anchor,
            seed=seed,
            w_anchor=w_anchor,
            trunc=0.0,
            sector_radius=abs(_zeta_inv(d, idx, s * np.cos(eps))),
            zeta_vertex=float(s),
        )
        hp.trunc = _boundary_sup(hp, d, idx, s, eps)
        out.append(hp)
    return out


def _star_seed(C: PolyCubic, d: int, idx: int, anchor: complex) -> complex:
    """Cube root of C/2 at the anchor making the star ray map to R+."""
    beta = 2 * np.pi * idx / (d + 3)
    approx = 2.0 ** (-1 / 3) * abs(anchor) ** (d / 3.0) * np.exp(-1j * beta)
    return _snap_cube_root(C(anchor) / 2.0, approx)


def _injectivity_certificate(C, d, idx, s, eps, delta, samples) -> bool:
    th = np.linspace(-np.pi / 2 - eps, np.pi / 2 + eps, 2 * samples + 1)
    rr = s * np.geomspace(1e-3, 24.0, samples)
    zeta = s + rr[None, :] * np.exp(1j * th[:, None])
    z = _zeta_inv(d, idx, zeta)
    vals = C(z)
    zd = z**d
    if np.any(np.abs(vals) < 1e-12 * np.maximum(np.abs(zd), 1e-12)):
        return False
    ratio = (vals / zd) ** (1 / 3)
    # principal branch: C/z^d -> 1 at infinity, so the ratio stays near 1
    return bool(np.max(np.abs(ratio - 1.0)) < delta)


def _boundary_sup(hp: HalfPlane, d, idx, s, eps) -> float:
    """Upper bound for Re w on the enlarged sector's boundary rays."""
    sup = -np.inf
    for sgn in (+1.0, -1.0):
        rr = s * np.geomspace(1e-3, 24.0, 12)
        zeta = s + rr * np.exp(sgn * 1j * (np.pi / 2 + eps))
        for zt in zeta:
            z = complex(_zeta_inv(d, idx, zt))
            sup = max(sup, hp.w_of(z, rtol=1e-9).real)
    return sup + 1e-6


# ---------------------------------------------------------------------------
# flat distance to the zero set


def phi_distance(C: PolyCubic, p: complex, waypoints: int = 17,
                 sweeps: int = 3) -> float:
    """Distance from p to the zero set of C in the flat metric |C|^(2/k).

    Candidate paths to each zero are relaxed from straight segments by
    local waypoint descent; multi-zero shadowing is handled by routing
    candidates through intermediate zeros.  Relative accuracy ~1e-3.
    """
    zeros = _clustered_roots(C)
    if not zeros:
        return np.inf
    locs = [z for z, _ in zeros]
    if any(abs(p - z) < 1e-14 for z in locs):
        return 0.0
    best = np.inf
    for z in locs:
        best = min(best, _relaxed_length(C, p, z, waypoints, sweeps))
        for via in locs:
            if via is z or abs(via - z) < 1e-12:
                continue
            cand = _relaxed_length(C, p, via, waypoints, sweeps) + _relaxed_length(
                C, via, z, waypoints, sweeps
            )
            best = min(best, cand)
    return float(best)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _flat_length(C: PolyCubic, pts: np.ndarray) -> float:
    """Quadrature of |C|^(1/k) along a polyline of complex points."""
    a, b = pts[:-1], pts[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    zs = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    dens = C.flat_density(zs)
    return float(np.sum(np.abs(half)[:, None] * dens * _GL_WEIGHTS[None, :]))


def _relaxed_length(C, p, q, waypoints, sweeps) -> float:
    t = np.linspace(0.0, 1.0, waypoints)
    pts = p + t * (q - p)
    step0 = abs(q - p) / (waypoints - 1)
    length = _flat_length(C, pts)
    for sweep in range(sweeps):
        step = step0 * 0.5 ** sweep
        moved = False
        for i in range(1, waypoints - 1):
            base = pts[i]
            for cand in (base + step, base - step, base + 1j * step, base - 1j * step):
                trial = pts.copy()
                trial[i] = cand
                lt = _flat_length(C, trial)
                if lt < length - 1e-15:
                    pts, length = trial, lt
                    moved = True
        if not moved and sweep > 0:
            break
    return length


# ---------------------------------------------------------------------------
# JSON


def cubic_to_json(C: PolyCubic) -> dict:
    return {"order": C.order, "coeffs": [[c.real, c.imag] for c in C.coeffs]}


def cubic_from_json(obj) -> PolyCubic:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        coeffs = [complex(re, im) for re, im in obj["coeffs"]]
        return PolyCubic(int(obj.get("order", 3)), coeffs)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed differential JSON: {exc}") from exc
