"""Affine frame fields: structure-equation integration and polygon assembly.

The complexified frame F = (f, f_z, f_zbar) of an affine sphere with mean
curvature -1 satisfies the first-order system

    F^{-1} dF = A(u, C) dz + B(u, C) dzbar,

    A = [[0, 0, e^u/2], [1, u_z, 0], [0, C e^{-u}, 0]],
    B = [[0, e^u/2, 0], [0, 0, Cbar e^{-u}], [1, 0, u_zbar]],

where e^u |dz|^2 is the Blaschke metric and C dz^3 the Pick differential.
All computations here happen in the real frame (f, Re f_z, Im f_z): the
complex system is conjugated once by the constant change-of-basis S with
F_complex = F_real S, which keeps every ODE real while preserving the
structure equations exactly.

The model surface is the orbit of (1,1,1)/c^{1/3} under the diagonal
one-parameter groups H(z) = exp(diag(2Re z, 2Re(z/w), 2Re(z/w^2))),
w = exp(2 pi i/3); with c = 1/(3 sqrt 3) its mean curvature is -1, its
Blaschke metric 2|dz|^2 and its Pick differential 2 dz^3, and the frame
satisfies F_T(z) = H(z) F_T(0).

A polynomial affine sphere is compared to this model through the
osculation map Fhat = F F_T^{-1} computed per standard half-plane in the
natural coordinate where C = 2 dw^3; along rays of direction theta in the
three stable intervals it converges to limits L_-, L_0, L_+ whose ratios
are elementary unipotent matrices, and the polygon vertex of half-plane k
is the projectivized first column of L_0^{(k)}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .cubic import PolyCubic, standard_half_planes
from .errors import (
    ConvexityViolation,
    InvalidInput,
    NotConverged,
    PathOutsideField,
    PatternViolation,
    StepUnderflow,
)
from .projective import ConvexPolygon, ProjPoint
from .vortex import GridField

OMEGA = np.exp(2j * np.pi / 3)

# F_complex = F_real @ S_BASIS: columns (f, f_z, f_zbar) vs (f, Re f_z, Im f_z)
S_BASIS = np.array([[1, 0, 0], [0, 1, 1], [0, 1j, -1j]], dtype=complex)
S_BASIS_INV = np.linalg.inv(S_BASIS)

TITEICA_SCALE = 3.0 ** 0.5  # 1/c^(1/3) for c = 1/(3 sqrt 3), mean curvature -1

_FT0_COMPLEX = TITEICA_SCALE * np.array(
    [[1, 1, 1], [1, OMEGA**2, OMEGA], [1, OMEGA, OMEGA**2]], dtype=complex
)
FT0_REAL = np.real(_FT0_COMPLEX @ S_BASIS_INV)
FT0_REAL_INV = np.linalg.inv(FT0_REAL)

_POWS = np.array([1.0 + 0j, OMEGA ** (-1), OMEGA ** (-2)])  # z coefficients of h


def titeica_h(z: complex) -> np.ndarray:
    """Diagonal of the Lie-algebra generator at z (traceless)."""
    return 2.0 * np.real(z * _POWS)


def titeica_H(z: complex) -> np.ndarray:
    return np.diag(np.exp(titeica_h(z)))


def titeica_point(z: complex) -> np.ndarray:
    return TITEICA_SCALE * np.exp(titeica_h(z))


def titeica_frame(z: complex) -> "FrameMatrix":
    """Real-form frame of the normalized model surface at z."""
    return FrameMatrix(titeica_H(z) @ FT0_REAL)


@dataclass
class FrameMatrix:
    """Real form of the complexified frame in the basis (f, Re f_z, Im f_z)."""

    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        if self.m.shape != (3, 3) or abs(np.linalg.det(self.m)) < 1e-300:
            raise InvalidInput("frame must be an invertible 3x3 real matrix")

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.m))

    def det(self) -> float:
        return float(np.linalg.det(self.m))

    def position(self) -> np.ndarray:
        """The immersion point f (first column)."""
        return self.m[:, 0]


def unimodular(m: np.ndarray) -> np.ndarray:
    """Rescale by the real cube root of the determinant to det = +1."""
    det = np.linalg.det(m)
    return m / np.copysign(abs(det) ** (1.0 / 3.0), det)


def structure_coefficient(u: float, u_z: complex, C: complex, zdot: complex) -> np.ndarray:
    """Real-form Darboux coefficient M with F_real' = F_real M along zdot."""
    eu = np.exp(u)
    A = np.array(
        [[0, 0, 0.5 * eu], [1, u_z, 0], [0, C / eu, 0]], dtype=complex
    )
    B = np.array(
        [[0, 0.5 * eu, 0], [0, 0, np.conj(C) / eu], [1, 0, np.conj(u_z)]],
        dtype=complex,
    )
    M = S_BASIS @ (A * zdot + B * np.conj(zdot)) @ S_BASIS_INV
    return np.real(M)


def integrate_matrix_ode(coef, t0: float, t1: float, F0: np.ndarray,
                         rtol: float = 1e-10, atol: float = 1e-12,
                         method: str = "DOP853"):
    """Solve F' = F coef(t) with F(t0) = F0; returns the dense solution."""

    def rhs(t, y):
        F = y.reshape(3, 3)
        return (F @ coef(t)).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.asarray(F0, float).ravel(),
                    method=method, rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise StepUnderflow(f"matrix ODE integration failed: {sol.message}")
    return sol


def integrate_frame(field: GridField, C: PolyCubic, path, F0: FrameMatrix,
                    rtol: float = 1e-10, atol: float = 1e-12) -> FrameMatrix:
    """Integrate the structure equations along a piecewise-linear path.

    ``path`` is a sequence of complex waypoints inside the reliable region
    of the grid field; u and its gradient are read from the bicubic spline
    (the connection form consumes u_z).
    """
    pts = [complex(p) for p in path]
    if len(pts) < 2:
        raise InvalidInput("path needs at least two waypoints")
    for p in pts:
        if not field.contains(p):
            raise PathOutsideField(f"waypoint {p:.4g} outside the reliable region")
    sp = field.interpolator()
    F = np.asarray(F0.m if isinstance(F0, FrameMatrix) else F0, dtype=float)
    for a, b in zip(pts[:-1], pts[1:]):
        dz = b - a
        if dz == 0:
            continue

        def coef(t, a=a, dz=dz):
            z = a + t * dz
            u = float(sp.ev(z.imag, z.real))
            ux = float(sp.ev(z.imag, z.real, dy=1))
            uy = float(sp.ev(z.imag, z.real, dx=1))
            u_z = 0.5 * (ux - 1j * uy)
            return structure_coefficient(u, u_z, complex(C(z)), dz)

        sol = integrate_matrix_ode(coef, 0.0, 1.0, F, rtol=rtol, atol=atol)
        F = sol.y[:, -1].reshape(3, 3)
    return FrameMatrix(F)


# ---------------------------------------------------------------------------
# osculation along rays in a half-plane's natural coordinate


@dataclass
class RayConfig:
    """Knobs for the osculation-ray integrations.

    ``radii`` are total distances |w| in the half-plane's natural
    coordinate gauge.  Rays start on the cut line Re w = w_cut; beyond the
    cut the Blaschke error e = u - u_phi is represented by its linearized
    far-field continuation (the kernel solution of Lap e = 12 e fed by cut
    data), because the frame growth e^{c(theta) |w|} would otherwise
    amplify grid discretization noise without bound along the ray.  Cut
    data is tapered to zero past the radius where the true exponential
    tail falls below the grid noise floor.
    """

    radii: tuple = (8.0, 12.0, 18.0, 27.0)
    drift_tol: float = 1e-4
    directions: tuple = (-np.pi / 3, 0.0, np.pi / 3)
    rtol: float = 1e-9
    atol: float = 1e-11
    base_rtol: float = 1e-10
    w_cut: float | None = None  # auto: just past the half-plane truncation
    taper_radius: float | None = None  # auto: noise floor of the grid
    taper_width: float = 0.4


@dataclass
class RayLimitEntry:
    """Osculation limits of one half-plane and their diagnostics."""

    index: int
    L_minus: np.ndarray
    L_zero: np.ndarray
    L_plus: np.ndarray
    drift: dict
    radius: float
    a: float = np.nan
    b: float = np.nan
    pattern_residual: float = np.nan


@dataclass
class RayLimitSet:
    entries: list

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def to_json(self) -> dict:
        out = []
        for e in self.entries:
            out.append(
                {
                    "index": e.index,
                    "L_minus": [list(map(float, r)) for r in e.L_minus],
                    "L_zero": [list(map(float, r)) for r in e.L_zero],
                    "L_plus": [list(map(float, r)) for r in e.L_plus],
                    "a": float(e.a),
                    "b": float(e.b),
                    "pattern_residual": float(e.pattern_residual),
                    "drift": {k: float(v) for k, v in e.drift.items()},
                    "radius": float(e.radius),
                }
            )
        return {"entries": out}


_SQRT12 = 2.0 * np.sqrt(3.0)


class _ConeModel:
    """Fourier-Bessel continuation of e = u - u_phi on the flat cone.

    Outside its zeros, the flat metric of a degree-d cubic differential is
    an exact cone of total angle 2 pi (d+3)/3; in the natural coordinate
    the Blaschke error satisfies the linearization Lap e = 12 e there up
    to O(e^2).  Separating variables on the cone,

        e(rho, psi) = sum_m Re(c_m e^{i nu_m psi}) K_{nu_m}(sqrt(12) rho),
        nu_m = 3 m / (d + 3),

    so one circle of clean data at flat radius r0 determines the whole far
    field.  Every mode is damped by K-ratios for rho > r0, which is what
    makes the continuation noise-stable where direct grid sampling is not.
    """

    def __init__(self, d: int, r0: float, psi_nodes: np.ndarray,
                 data: np.ndarray, rho_max: float, modes: int = 40):
        from scipy.interpolate import RectBivariateSpline
        from scipy.special import kve

        self.d = d
        self.r0 = float(r0)
        self.total_angle = 2.0 * np.pi * (d + 3) / 3.0
        n = len(psi_nodes)
        fft = np.fft.rfft(data) / n
        modes = int(min(modes, len(fft) - 1))
        ms = np.arange(modes + 1)
        nus = 3.0 * ms / (d + 3)

        rho = np.concatenate([
            np.arange(r0, r0 + 2.0, 0.1),
            np.arange(r0 + 2.0, rho_max + 1.5, 0.3),
        ])
        # scaled Bessel ratios: kv(nu,x) = kve(nu,x) e^{-x}
        ratio = np.empty((len(rho), modes + 1))
        base = kve(nus, _SQRT12 * self.r0)
        for i, r in enumerate(rho):
            ratio[i] = (kve(nus, _SQRT12 * r) / base) * np.exp(-_SQRT12 * (r - self.r0))
        coef = np.zeros(modes + 1, dtype=complex)
        coef[0] = fft[0].real
        coef[1:] = 2.0 * fft[1 : modes + 1]

        pad = 0.5
        psi = np.arange(-pad, self.total_angle + pad + 1e-9, self.total_angle / (8 * n))
        phase = np.exp(1j * np.outer(psi, nus))  # e^{i nu_m psi}
        E = (phase[None, :, :] * (ratio[:, None, :] * coef[None, None, :])).sum(-1)
        self._spline = RectBivariateSpline(rho, psi, np.real(E), kx=3, ky=3, s=0)
        self._rho = (rho[0], rho[-1])
        self._psi = (psi[0], psi[-1])

    def eval(self, rho, psi):
        """e, e_rho, e_psi at cone polar coordinates (vectorized)."""
        rho = np.clip(rho, *self._rho)
        psi = np.mod(psi, self.total_angle)
        e = self._spline.ev(rho, psi)
        e_rho = self._spline.ev(rho, psi, dx=1)
        e_psi = self._spline.ev(rho, psi, dy=1)
        return e, e_rho, e_psi


class ForwardWorkspace:
    """Shared state for one forward run: field, half-planes, tail models.

    The affine frame is integrated once from the origin (where it is set
    to the model frame) to a base point on each star ray at natural-radius
    ``w_cut``; osculation rays then run in the half-plane coordinate with
    the Blaschke error supplied by the linearized tail continuation.
    """

    def __init__(self, C: PolyCubic, fld: GridField, config: RayConfig | None = None,
                 u_eval=None):
        if C.order != 3:
            raise InvalidInput("forward map expects a cubic differential")
        self.C = C
        self.field = fld
        self.config = config or RayConfig()
        self.half_planes = standard_half_planes(C)
        # u_eval(z) -> (u, u_z): defaults to the grid spline
        self._u_eval = u_eval or self._grid_u_eval
        self._base = {}
        self._tails = {}
        self._theta_const = {}
        d = C.degree
        s_max = max(h.zeta_vertex for h in self.half_planes)
        self.w_cut = self.config.w_cut or float(
            max(3.0, 1.15 * 2.0 ** (-1 / 3) * s_max)
        )
        zeta_c = 2.0 ** (1 / 3) * self.w_cut
        from .cubic import _star_seed, _zeta_inv

        self._anchors = []
        for kk in range(d + 3):
            anchor = complex(_zeta_inv(d, kk, zeta_c))
            self._anchors.append((anchor, _star_seed(C, d, kk, anchor)))

    def _grid_u_eval(self, z: complex):
        sp = self.field.interpolator()
        u = float(sp.ev(z.imag, z.real))
        ux = float(sp.ev(z.imag, z.real, dy=1))
        uy = float(sp.ev(z.imag, z.real, dx=1))
        return u, 0.5 * (ux - 1j * uy)

    def taper_radius(self) -> float:
        """Total |w| beyond which grid noise exceeds the true tail."""
        if self.config.taper_radius is not None:
            return self.config.taper_radius
        noise = max(self.field.band_violation, 1e-300)
        return float(
            np.clip(-np.log(noise) / _SQRT12, self.w_cut + 0.5, 40.0)
        )

    def base_osculation(self, k: int):
        """Fhat at the base point of half-plane k, in the w_cut gauge."""
        if k in self._base:
            return self._base[k]
        anchor, seed = self._anchors[k]
        if not self.field.contains(anchor):
            raise PathOutsideField(
                f"star base point {anchor:.4g} outside the grid; enlarge R_trunc"
            )
        F = self._frame_at(anchor)
        s = 1.0 / seed  # dz/dw at the base for this branch
        Fw = F @ _w_change_of_frame(s)
        Fhat = Fw @ FT0_REAL_INV @ titeica_H(-self.w_cut)
        self._base[k] = (Fhat, s)
        return self._base[k]

    def _frame_at(self, z: complex) -> np.ndarray:
        def coef(t):
            p = t * z
            u, u_z = self._u_eval(p)
            return structure_coefficient(u, u_z, complex(self.C(p)), z)

        sol = integrate_matrix_ode(coef, 0.0, 1.0, FT0_REAL,
                                   rtol=self.config.base_rtol, atol=self.config.atol)
        return sol.y[:, -1].reshape(3, 3)

    def _u_phi(self, z: complex) -> float:
        val = abs(self.C(z))
        return float(np.log(2.0 * val * val) / 3.0)

    def tail_model(self, k: int) -> _TailModel:
        """Kernel continuation of the Blaschke error for half-plane k."""
        if k in self._tails:
            return self._tails[k]
        cfg = self.config
        anchor, seed = self._anchors[k]
        r_taper = self.taper_radius()
        eta_max = float(np.sqrt(max(r_taper**2 - self.w_cut**2, 0.25)) + 1.5)
        eta = np.arange(-eta_max, eta_max + 1e-9, 0.1)

        # march z(w), s(w) along the cut line w = w_cut + i eta
        def rhs(t, y):
            z = complex(y[0], y[1])
            s = complex(y[2], y[3])
            dz = 1j * s
            ds = -self.C.deriv(z) / self.C(z) * s * s * 1j / 3.0
            return [dz.real, dz.imag, ds.real, ds.imag]

        y0 = [anchor.real, anchor.imag, (1 / seed).real, (1 / seed).imag]
        data = np.zeros_like(eta)
        mid = np.searchsorted(eta, 0.0)
        for t_span, idx in (((0.0, eta[-1]), range(mid, len(eta))),
                            ((0.0, eta[0]), range(mid - 1, -1, -1))):
            sol = solve_ivp(rhs, t_span, y0, method="DOP853", rtol=1e-11,
                            atol=1e-12, dense_output=True)
            if not sol.success:
                raise StepUnderflow(f"cut-line marching failed: {sol.message}")
            for i in idx:
                zi = complex(*sol.sol(eta[i])[:2])
                if self.field.contains(zi):
                    u, _ = self._u_eval(zi)
                    data[i] = u - self._u_phi(zi)
        # taper past the noise radius
        wabs = np.hypot(self.w_cut, eta)
        data = data / (1.0 + np.exp((wabs - r_taper) / cfg.taper_width))
        r_max = max(cfg.radii)
        model = _TailModel(eta, data, self.w_cut,
                           x_max=r_max - self.w_cut + 2.0,
                           y_max=r_max * np.sin(max(map(abs, cfg.directions))) + 2.0)
        self._tails[k] = model
        return model

    def _titeica_coef(self, theta: float) -> np.ndarray:
        key = round(theta, 12)
        if key not in self._theta_const:
            zdot = np.exp(1j * theta)
            self._theta_const[key] = structure_coefficient(np.log(2.0), 0.0, 2.0, zdot)
        return self._theta_const[key]

    def _ray_coefficients(self, model: _TailModel, theta: float, ts: np.ndarray):
        """Darboux coefficients N(t) of the osculation map, vectorized.

        The integrand is the smooth kernel-model field conjugated into the
        frame-growth gauge; evaluating it on the whole stage grid at once
        makes a fixed-step integrator far cheaper than adaptive stepping
        across the transition bump at the unstable direction.
        """
        zdot = np.exp(1j * theta)
        w = self.w_cut + ts * zdot
        sp = model._spline
        x = np.clip(w.real - model.w_cut, 0.0, model._xmax)
        y = np.clip(w.imag, -model._ymax, model._ymax)
        e = sp.ev(y, x)
        e_w = 0.5 * (sp.ev(y, x, dy=1) - 1j * sp.ev(y, x, dx=1))
        eu = 2.0 * np.exp(e)
        n = len(ts)
        A = np.zeros((n, 3, 3), dtype=complex)
        B = np.zeros((n, 3, 3), dtype=complex)
        A[:, 0, 2] = 0.5 * eu
        A[:, 1, 0] = 1.0
        A[:, 1, 1] = e_w
        A[:, 2, 1] = 2.0 / eu
        B[:, 0, 1] = 0.5 * eu
        B[:, 1, 2] = 2.0 / eu
        B[:, 2, 0] = 1.0
        B[:, 2, 2] = np.conj(e_w)
        M = np.real(np.einsum("ij,njk,kl->nil", S_BASIS, A * zdot + B * np.conj(zdot),
                              S_BASIS_INV))
        MT = self._titeica_coef(theta)
        Theta = np.einsum("ij,njk,kl->nil", FT0_REAL, M - MT, FT0_REAL_INV)
        hvec = 2.0 * np.real(w[:, None] * _POWS[None, :])
        return Theta * np.exp(hvec[:, :, None] - hvec[:, None, :])

    def ray_osculation(self, k: int, theta: float, radii=None, step: float = 0.01):
        """Fhat along the theta-ray of half-plane k at total radii |w|."""
        cfg = self.config
        radii = tuple(radii if radii is not None else cfg.radii)
        Fhat0, _ = self.base_osculation(k)
        model = self.tail_model(k)
        w0 = self.w_cut

        def t_of_radius(r):
            disc = r * r - (w0 * np.sin(theta)) ** 2
            return -w0 * np.cos(theta) + np.sqrt(max(disc, 0.0))

        out = []
        t0, F = 0.0, np.asarray(Fhat0, dtype=float).copy()
        for r in radii:
            t1 = max(t_of_radius(r), t0)
            if t1 > t0 + 1e-12:
                nsteps = max(int(np.ceil((t1 - t0) / step)), 4)
                h = (t1 - t0) / nsteps
                ts = t0 + h * np.arange(2 * nsteps + 1) / 2.0
                N = self._ray_coefficients(model, theta, ts)
                F = _rk4_matrix(F, N, h)
                t0 = t1
            out.append(F.copy())
        return out

    def ray_limit(self, k: int, theta: float):
        """Converged osculation limit along one ray, with drift estimate."""
        cfg = self.config
        captures = self.ray_osculation(k, theta)
        last = unimodular(captures[-1])
        prev = unimodular(captures[-2])
        drift = float(np.max(np.abs(last - prev)))
        if drift > cfg.drift_tol:
            raise NotConverged(
                f"ray limit drifting ({drift:.2e} > {cfg.drift_tol:.1e}) "
                f"at half-plane {k}, theta={theta:.3f}",
                diagnostics={"drift": drift},
            )
        return last, drift


def ray_limits(workspace: ForwardWorkspace, k: int,
               directions=None) -> RayLimitEntry:
    """Osculation limits L_-, L_0, L_+ of half-plane k.

    Directions default to the midpoints of the three stable intervals.
    """
    cfg = workspace.config
    dirs = tuple(directions if directions is not None else cfg.directions)
    if len(dirs) != 3:
        raise InvalidInput("need one direction per stable interval")
    mats, drifts = [], {}
    for name, theta in zip(("minus", "zero", "plus"), dirs):
        L, drift = workspace.ray_limit(k, theta)
        mats.append(L)
        drifts[name] = drift
    entry = RayLimitEntry(
        index=k, L_minus=mats[0], L_zero=mats[1], L_plus=mats[2],
        drift=drifts, radius=cfg.radii[-1],
    )
    entry.a, entry.b, entry.pattern_residual = unipotent_factors(entry, check=False)
    return entry


def unipotent_factors(entry: RayLimitEntry, tol: float = 1e-4, check: bool = True):
    """Transition parameters a, b and the off-pattern residual.

    L_-^{-1} L_0 should be I + a E_12 and L_0^{-1} L_+ should be I + b E_13;
    the residual is the largest deviation of the remaining entries from the
    identity pattern.
    """
    U1 = np.linalg.solve(entry.L_minus, entry.L_zero)
    U2 = np.linalg.solve(entry.L_zero, entry.L_plus)
    a = float(U1[0, 1])
    b = float(U2[0, 2])
    R1 = U1 - np.eye(3) - a * _E(0, 1)
    R2 = U2 - np.eye(3) - b * _E(0, 2)
    residual = float(max(np.max(np.abs(R1)), np.max(np.abs(R2))))
    if check and residual > 10 * tol:
        raise PatternViolation(
            f"unipotent pattern residual {residual:.2e}; limits under-converged",
            diagnostics={"a": a, "b": b, "residual": residual},
        )
    return a, b, residual


def _E(i, j):
    m = np.zeros((3, 3))
    m[i, j] = 1.0
    return m


def _rk4_matrix(F: np.ndarray, N: np.ndarray, h: float) -> np.ndarray:
    """Classical RK4 for F' = F N(t) with N precomputed on half-steps.

    ``N`` holds 2n+1 coefficient matrices at spacing h/2; the autonomous
    right-hand side in F makes the stage combinations exact.
    """
    for i in range(0, len(N) - 2, 2):
        k1 = F @ N[i]
        k2 = (F + 0.5 * h * k1) @ N[i + 1]
        k3 = (F + 0.5 * h * k2) @ N[i + 1]
        k4 = (F + h * k3) @ N[i + 2]
        F = F + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return F


def _w_change_of_frame(s: complex) -> np.ndarray:
    """Right factor turning the z-frame into the w-frame, f_w = s f_z."""
    return np.array(
        [[1.0, 0.0, 0.0], [0.0, s.real, s.imag], [0.0, -s.imag, s.real]]
    )


V100 = np.array([1.0, 0.0, 0.0])
V010 = np.array([0.0, 1.0, 0.0])
V001 = np.array([0.0, 0.0, 1.0])


def cubic_to_polygon(C: PolyCubic, fld: GridField, config: RayConfig | None = None,
                     vertices_only: bool = False, u_eval=None):
    """Assemble the polygon of a normalized cubic differential.

    Returns (polygon, RayLimitSet).  Vertex k is the projectivized first
    column of L_0^{(k)}; consecutive vees must overlap (their shared
    vertices agree within angular tolerance 1e-3) and the vertex list must
    be strictly convex, else ConvexityViolation with diagnostics.
    """
    if not (C.is_monic and C.is_centered):
        raise InvalidInput("forward map expects a monic centered differential")
    ws = ForwardWorkspace(C, fld, config, u_eval=u_eval)
    n = C.degree + 3
    entries = []
    for k in range(n):
        if vertices_only:
            L, drift = ws.ray_limit(k, 0.0)
            entries.append(
                RayLimitEntry(index=k, L_minus=np.eye(3), L_zero=L,
                              L_plus=np.eye(3), drift={"zero": drift},
                              radius=ws.config.radii[-1])
            )
        else:
            entries.append(ray_limits(ws, k))
    limits = RayLimitSet(entries)

    vertices = [ProjPoint(e.L_zero @ V100) for e in entries]
    if not vertices_only:
        worst = 0.0
        for k in range(n):
            a = ProjPoint(entries[k].L_zero @ V010)
            bpt = ProjPoint(entries[(k + 1) % n].L_zero @ V100)
            c = ProjPoint(entries[k].L_zero @ V100)
            dpt = ProjPoint(entries[(k + 1) % n].L_zero @ V001)
            worst = max(worst, a.angular_distance(bpt), c.angular_distance(dpt))
        if worst > 1e-3:
            raise NotConverged(
                f"vee chains fail to overlap (angular error {worst:.2e})",
                diagnostics={"overlap": worst, "limits": limits},
            )
    try:
        poly = ConvexPolygon(vertices)
    except ConvexityViolation as exc:
        exc.diagnostics = {"vertices": [v.v.tolist() for v in vertices],
                           "limits": limits.to_json()}
        raise
    return poly, limits


def star_curve(ws: ForwardWorkspace, k: int, radii) -> list[np.ndarray]:
    """Projectivized image points of the star ray of half-plane k."""
    captures = ws.ray_osculation(k, 0.0, radii=radii)
    pts = []
    for r, Fhat in zip(radii, captures):
        T = titeica_point(max(r, ws.w_cut))
        pts.append(ProjPoint(Fhat @ T).v)
    return pts
