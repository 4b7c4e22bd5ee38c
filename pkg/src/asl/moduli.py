"""Top-level maps between normalized differentials and normalized polygons.

alpha sends a monic centered cubic differential to the normalized convex
polygon of its affine sphere: solve the vortex equation for sqrt(2) C,
integrate the frame field to its ray limits, collect the d+3 vertices in
the counterclockwise order of the star rays, and normalize the polygon at
the vertex of the positive real axis.  The root-of-unity action on
differentials corresponds to the vertex-relabeling action on polygons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import vortex
from .cubic import AffineMap, PolyCubic, mu_action, pullback
from .errors import InvalidInput
from .frames import RayConfig, cubic_to_polygon, standard_half_planes
from .projective import ConvexPolygon, NormalizedPolygon, corner_invariants, normalize_polygon
from .vortex import GridField, GridSpec, solve_vortex


@dataclass(frozen=True)
class ModuliPointC:
    """Normalized polynomial cubic differential."""

    cubic: PolyCubic

    def __post_init__(self):
        if self.cubic.order != 3 or not self.cubic.is_normalized:
            raise InvalidInput("moduli points are monic centered cubic differentials")

    @property
    def degree(self) -> int:
        return self.cubic.degree


@dataclass(frozen=True)
class ModuliPointP:
    """Normalized polygon with d+3 vertices (triangles bypass normalization)."""

    polygon: object  # NormalizedPolygon, or ConvexPolygon when triangular

    @property
    def is_triangle(self) -> bool:
        return not isinstance(self.polygon, NormalizedPolygon)

    @property
    def vertices(self):
        return self.polygon.vertices

    def free_coords(self) -> np.ndarray:
        if self.is_triangle:
            return np.zeros((0, 2))
        return self.polygon.free_chart_coords()


@dataclass
class ForwardConfig:
    grid_n: int = 512
    r_trunc: float | None = None
    tol: float = 1e-9
    rays: RayConfig | None = None
    vertices_only: bool = False

    def ray_config(self) -> RayConfig:
        return self.rays or RayConfig()


def auto_radius(C: PolyCubic) -> float:
    """Truncation radius covering the anchors and the flat-margin guard."""
    hps = standard_half_planes(C)
    anchor_max = max(abs(h.anchor) for h in hps)
    d = C.degree
    # flat distance >= 12 from the unit disk of zeros to the boundary
    r_flat = (12.0 * (d + 3) / (3.0 * 2 ** (1 / 6))) ** (3.0 / (d + 3)) + 1.5
    return float(max(1.45 * anchor_max, r_flat, 8.0))


def solve_blaschke(C: PolyCubic, config: ForwardConfig | None = None) -> GridField:
    """Vortex solution for phi = sqrt(2) C (the Wang-equation convention)."""
    config = config or ForwardConfig()
    R = config.r_trunc or auto_radius(C)
    phi = C.scaled(np.sqrt(2.0))
    return solve_vortex(phi, GridSpec(R, config.grid_n), tol=config.tol)


class _RotatedField:
    """Read-only view of a grid field precomposed with z -> lam z, |lam| = 1.

    The circle flow solves the vortex equation once: |e^{i theta} C| pulls
    back to |C| under the renormalizing rotation, so the log-density is
    the rotated original.  Containment checks shrink to the inscribed disk.
    """

    def __init__(self, base: GridField, lam: complex):
        self.base = base
        self.lam = complex(lam)
        self.spec = base.spec
        self.band_violation = base.band_violation

    def u_eval(self, z: complex):
        sp = self.base.interpolator()
        w = self.lam * z
        u = float(sp.ev(w.imag, w.real))
        ux = float(sp.ev(w.imag, w.real, dy=1))
        uy = float(sp.ev(w.imag, w.real, dx=1))
        return u, 0.5 * (ux - 1j * uy) * self.lam

    def interpolator(self):
        raise InvalidInput("rotated fields are sampled through u_eval only")

    def contains(self, z, margin_cells: int = 2) -> bool:
        m = margin_cells * self.spec.h
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return bool(np.all(np.abs(z) < self.spec.radius - m))


def alpha(C: ModuliPointC | PolyCubic, config: ForwardConfig | None = None,
          field: GridField | None = None) -> ModuliPointP:
    """Forward map: normalized differential -> normalized polygon."""
    cub = C.cubic if isinstance(C, ModuliPointC) else C
    config = config or ForwardConfig()
    fld = field if field is not None else solve_blaschke(cub, config)
    poly, _ = cubic_to_polygon(cub, fld, config.ray_config(),
                               vertices_only=config.vertices_only)
    if cub.degree == 0:
        return ModuliPointP(poly)
    NP, _ = normalize_polygon(poly, 0)
    return ModuliPointP(NP)


def equivariance_check(C: ModuliPointC | PolyCubic,
                       config: ForwardConfig | None = None) -> float:
    """Max chart deviation of alpha(mu_1 C) from rho(alpha(C)).

    Both sides are computed by independent forward runs.
    """
    cub = C.cubic if isinstance(C, ModuliPointC) else C
    if cub.degree < 1:
        raise InvalidInput("equivariance needs degree at least 1")
    from .projective import cycle_rho

    left = alpha(mu_action(1, cub), config)
    right = ModuliPointP(cycle_rho(alpha(cub, config).polygon))
    a = np.array([v.chart() for v in left.vertices])
    b = np.array([v.chart() for v in right.vertices])
    return float(np.max(np.abs(a - b)))


@dataclass
class OrbitSample:
    theta: float
    mu_steps: int
    cubic: PolyCubic
    point: ModuliPointP


def flow_cubic(C: PolyCubic, theta: float) -> tuple[PolyCubic, int]:
    """Renormalized e^{i theta} C and the whole mu-steps absorbed.

    e^{i theta} C is not monic; pulling back under z -> e^{-i theta/(d+3)} z
    restores the normal form.  Crossing theta = 2 pi/(d+3) multiples lands
    on the mu-orbit of the start, tracked by the returned integer so orbit
    traces stay continuous in theta.
    """
    d = C.degree
    lam = np.exp(-1j * theta / (d + 3))
    out = pullback(C.scaled(np.exp(1j * theta)), AffineMap(lam, 0.0))
    coeffs = list(out.coeffs)
    coeffs[-1] = 1.0
    if d >= 1:
        coeffs[-2] = 0.0
    steps = int(np.floor(theta * (d + 3) / (2 * np.pi)))
    return PolyCubic(3, coeffs), steps


def circle_flow(C: ModuliPointC | PolyCubic, angles,
                config: ForwardConfig | None = None) -> list[OrbitSample]:
    """alpha along the circle orbit e^{i theta} C, reusing one vortex solve.

    The Blaschke log-density only sees |C|, so a single grid solve serves
    every angle through rotated sampling.
    """
    cub = C.cubic if isinstance(C, ModuliPointC) else C
    if cub.degree < 2:
        raise InvalidInput("circle flow is trivial in moduli below degree 2")
    config = config or ForwardConfig()
    base = solve_blaschke(cub, config)
    d = cub.degree
    out = []
    for theta in angles:
        C_theta, steps = flow_cubic(cub, float(theta))
        lam = np.exp(-1j * theta / (d + 3))
        rot = _RotatedField(base, lam)
        poly, _ = cubic_to_polygon(C_theta, rot, config.ray_config(),
                                   vertices_only=config.vertices_only,
                                   u_eval=rot.u_eval)
        NP, _ = normalize_polygon(poly, 0)
        out.append(OrbitSample(float(theta), steps, C_theta, ModuliPointP(NP)))
    return out


def level_set_experiment(C: ModuliPointC | PolyCubic, angles,
                         config: ForwardConfig | None = None) -> dict:
    """Product of corner invariants along a degree-2 circle orbit.

    Reports the relative spread of X = prod x_v over the sampled angles;
    the experiment reports and never asserts.
    """
    cub = C.cubic if isinstance(C, ModuliPointC) else C
    if cub.degree != 2:
        raise InvalidInput("the level-set experiment is a degree-2 probe")
    samples = circle_flow(cub, angles, config)
    xs = []
    for s in samples:
        xs.append(float(np.prod(corner_invariants(s.point.polygon.base))))
    xs = np.array(xs)
    mean = float(np.mean(xs))
    spread = float((xs.max() - xs.min()) / abs(mean)) if mean else np.inf
    return {
        "angles": [s.theta for s in samples],
        "X": xs.tolist(),
        "mean": mean,
        "relative_spread": spread,
        "solve_count_hint": "one vortex solve per orbit",
    }
