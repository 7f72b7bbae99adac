"""Biradial solutions on S^N, their Morse indices, and conformal transport to R^N.

On S^N in R^k x R^(N+1-k) a biradial function depends on the latitude
psi in [0, pi/2] only, and the equation

    -Lap v + N(N-2)/4 v = |v|^(2*-2) v

reduces to the ODE

    -v'' - ((N-k) cot psi - (k-1) tan psi) v' + c_N v = |v|^(2*-2) v.

Both ends are regular singular points; a solution of the sphere problem is
an orbit that is regular at both.  Solutions are found by shooting from
psi = 0 and driving the flux cos^(k-1) sin^(N-k) v' at psi = pi/2 to zero.

Stereographic convention: the pole sits on the axis of the second block,
so the plane splits as R^k x R^(N-k) with x = (xi, zeta) and the latitude
of the image point is cos(psi) = 2|xi| / (1 + |x|^2).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, optimize
from scipy.integrate import solve_ivp

from .errors import ExtrapolationError, GridMismatchError, ParameterError, ShootingError
from .grids import BiradialGrid, Field, RadialGrid, SphereGrid, SplitDims, biradial_interpolant, radial_interpolant
from .morse import count_negative
from .operators import critical_exponent, linearize, quadratic_part

log = logging.getLogger(__name__)

MAX_NODES = 4
SCAN_POINTS = 64
SCAN_RANGE = (0.1, 50.0)
POLE_OFFSET = 1e-6
BOUNDARY_TOL = 1e-5


def conformal_coefficient(N: int) -> float:
    """c_N = N(N-2)/4, the scalar-curvature term of the conformal Laplacian of S^N."""
    return N * (N - 2) / 4.0


def sphere_constant_solution(N: int) -> float:
    """The constant solution c = c_N^((N-2)/4) of the sphere equation."""
    if int(N) != N or N < 3:
        raise ParameterError(f"N must be an integer >= 3, got {N}")
    return conformal_coefficient(N) ** ((N - 2) / 4.0)


def critical_power(v, p: float):
    return np.abs(v) ** (p - 2.0) * v


@dataclass(frozen=True)
class SphereProblem:
    """Sphere equation for the split R^k x R^(N+1-k), with a pluggable nonlinearity.

    ``nonlinearity`` maps v to f(v); ``derivative`` maps v to f'(v).  Both
    default to the critical power.
    """

    N: int = 4
    k: int = 2
    n: int = 2048
    nonlinearity: object = None
    derivative: object = None

    def __post_init__(self):
        SplitDims(int(self.N), int(self.k), sphere=True)

    @property
    def split(self) -> SplitDims:
        return SplitDims(self.N, self.k, sphere=True)

    @property
    def exponent(self) -> float:
        return critical_exponent(self.N)

    @property
    def c_N(self) -> float:
        return conformal_coefficient(self.N)

    @property
    def grid(self) -> SphereGrid:
        return SphereGrid(self.split, self.n)

    def f(self, v):
        return self.nonlinearity(v) if self.nonlinearity else critical_power(v, self.exponent)

    def fprime(self, v):
        if self.derivative:
            return self.derivative(v)
        return (self.exponent - 1.0) * np.abs(v) ** (self.exponent - 2.0)


@dataclass(frozen=True)
class NodalSolution:
    problem: SphereProblem
    field: Field
    s: float
    nodes: int
    mass: float
    index: int
    boundary_residuals: dict = field(default_factory=dict)
    profile: object = field(default=None, repr=False, compare=False)

    def on_grid(self, n: int) -> Field:
        """The same solution sampled on a latitude grid with n cells."""
        g = SphereGrid(self.problem.split, int(n))
        if self.profile is None:
            raise ParameterError("solution has no profile to resample")
        return Field(g, self.profile(g.nodes))

    def to_dict(self) -> dict:
        return {
            "N": self.problem.N,
            "split": [self.problem.k, self.problem.N + 1 - self.problem.k],
            "nodes": self.nodes,
            "s": self.s,
            "mass": self.mass,
            "index": self.index,
            "boundary_residuals": self.boundary_residuals,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# --- shooting ----------------------------------------------------------------------


@dataclass(frozen=True)
class _Shot:
    s: float
    flux: float
    zeros: int
    orbit: object


def _shoot(prob: SphereProblem, s: float, rtol: float = 1e-12) -> _Shot:
    N, k = prob.N, prob.k
    cN = prob.c_N
    top = 0.5 * math.pi - POLE_OFFSET

    def rhs(t, y):
        v, dv = y
        drift = (N - k) / math.tan(t) - (k - 1) * math.tan(t)
        return [dv, -drift * dv + cN * v - float(prob.f(v))]

    # v = s + A psi^2 + O(psi^4) with 2A(N-k+1) = c_N s - f(s)
    t0 = POLE_OFFSET
    A = (cN * s - float(prob.f(s))) / (2.0 * (N - k + 1))
    crossing = lambda t, y: y[0]  # noqa: E731
    orbit = solve_ivp(rhs, (t0, top), [s + A * t0 * t0, 2.0 * A * t0], method="RK45",
                      rtol=rtol, atol=1e-14, events=crossing, dense_output=True)
    if orbit.status != 0:
        raise ShootingError(f"integration failed at s={s:g}: {orbit.message}")
    dv = orbit.y[1, -1]
    flux = math.cos(top) ** (k - 1) * math.sin(top) ** (N - k) * dv
    return _Shot(float(s), float(flux), len(orbit.t_events[0]), orbit)


def _orbit_values(prob: SphereProblem, shot: _Shot, psi: np.ndarray) -> np.ndarray:
    inside = np.clip(psi, POLE_OFFSET, 0.5 * math.pi - POLE_OFFSET)
    vals = shot.orbit.sol(inside)[0]
    A = (prob.c_N * shot.s - float(prob.f(shot.s))) / (2.0 * (prob.N - prob.k + 1))
    return np.where(psi < POLE_OFFSET, shot.s + A * psi * psi, vals)


def scan_shooting(prob: SphereProblem, points: int = SCAN_POINTS, span=SCAN_RANGE):
    """Terminal flux and zero count over a geometric scan of s in span * c."""
    c = sphere_constant_solution(prob.N)
    return [(s, shot.flux, shot.zeros)
            for s in c * np.geomspace(span[0], span[1], points)
            for shot in [_shoot(prob, float(s), rtol=1e-10)]]


def shoot_nodal_solution(prob: SphereProblem, nodes: int = 1, max_nodes: int = MAX_NODES,
                         points: int = SCAN_POINTS, span=SCAN_RANGE) -> NodalSolution:
    """The biradial sphere solution with ``nodes`` interior zeros, by shooting on v(0)."""
    if int(nodes) != nodes or not 0 <= nodes <= max_nodes:
        raise ParameterError(f"nodes must be an integer in [0, {max_nodes}], got {nodes}")
    scan = scan_shooting(prob, points, span)
    for (s0, f0, _), (s1, f1, _) in zip(scan, scan[1:]):
        if f0 == 0.0:
            root = s0
        elif np.sign(f0) == np.sign(f1):
            continue
        else:
            root = optimize.brentq(lambda s: _shoot(prob, s).flux, s0, s1, xtol=1e-15, rtol=1e-15)
        shot = _shoot(prob, root)
        if shot.zeros == nodes:
            return _finish(prob, shot)
    trace = [{"s": s, "flux": f, "zeros": z} for s, f, z in scan]
    raise ShootingError(f"no bracket with {nodes} interior zeros in s/c in {list(span)}", trace=trace)


def _finish(prob: SphereProblem, shot: _Shot) -> NodalSolution:
    g = prob.grid
    v = Field(g, _orbit_values(prob, shot, g.nodes))
    # derivatives at the two offsets, less the regular series slope 2 A psi
    # (at the top end v'' is bounded, so its slope is below the offset)
    ends = shot.orbit.sol([POLE_OFFSET, 0.5 * math.pi - POLE_OFFSET])[1]
    A = (prob.c_N * shot.s - float(prob.f(shot.s))) / (2.0 * (prob.N - prob.k + 1))
    residuals = {"start": float(abs(ends[0] - 2.0 * A * POLE_OFFSET)), "end": float(abs(ends[1]))}
    if max(residuals.values()) > BOUNDARY_TOL:
        log.warning("boundary derivatives %s exceed %.0e", residuals, BOUNDARY_TOL)
    mass = float(np.sum(g.weights * np.abs(v.values) ** prob.exponent))
    profile = lambda psi: _orbit_values(prob, shot, np.asarray(psi))  # noqa: E731
    return NodalSolution(prob, v, shot.s, shot.zeros, mass, sphere_morse_index(v, prob), residuals, profile)


# --- spectra -----------------------------------------------------------------------


def sphere_linearization(v, prob: SphereProblem | None = None):
    """-Lap_red + c_N - f'(v) on the latitude grid."""
    f = v.field if isinstance(v, NodalSolution) else v
    prob = prob or (v.problem if isinstance(v, NodalSolution) else SphereProblem(f.grid.N, f.grid.split.k, f.grid.n))
    if not isinstance(f.grid, SphereGrid):
        raise GridMismatchError("expected a field on a sphere grid")
    return linearize(f, 0.0, None, lambda u: prob.fprime(u.values), linear=prob.c_N)


def sphere_spectrum(v, prob: SphereProblem | None = None):
    """(reported eigenvalues, negative eigenvalues) of the reduced linearization."""
    vals, neg, _ = count_negative(sphere_linearization(v, prob))
    return vals, neg


def extrapolated_spectrum(v: NodalSolution, count: int = 4) -> list:
    """Lowest eigenvalues, Richardson-extrapolated from grids n/2 and n.

    The latitude discretization is second order, so (4 lam_n - lam_(n/2)) / 3.
    """
    n = v.problem.n
    if n % 2:
        raise ParameterError(f"extrapolation needs an even node count, got {n}")
    fine = sphere_spectrum(v.field, v.problem)[0][:count]
    coarse = sphere_spectrum(v.on_grid(n // 2), v.problem)[0][:count]
    m = min(len(fine), len(coarse))
    return [(4.0 * f - c) / 3.0 for f, c in zip(fine[:m], coarse[:m])]


def sphere_morse_index(v, prob: SphereProblem | None = None) -> int:
    """Negative-eigenvalue count of the reduced linearization at v (biradial class)."""
    return len(sphere_spectrum(v, prob)[1])


def constant_solution(prob: SphereProblem) -> NodalSolution:
    """The constant as a NodalSolution, without shooting."""
    c = sphere_constant_solution(prob.N)
    g = prob.grid
    v = Field.constant(g, c)
    mass = float(np.sum(g.weights)) * c**prob.exponent
    profile = lambda psi: np.full(np.shape(psi), c)  # noqa: E731
    return NodalSolution(prob, v, c, 0, mass, sphere_morse_index(v, prob), {"start": 0.0, "end": 0.0}, profile)


# --- conformal transport -----------------------------------------------------------


def stereographic_factor(r, N: int):
    """mu(x) = (2 / (1 + |x|^2))^((N-2)/2)."""
    return (2.0 / (1.0 + np.asarray(r) ** 2)) ** ((N - 2) / 2.0)


def plane_latitude(rho1, rho2):
    """Latitude of the image of x = (xi, zeta) with |xi| = rho1, |zeta| = rho2."""
    r2 = rho1 * rho1 + rho2 * rho2
    return np.arctan2(np.sqrt((r2 - 1.0) ** 2 + 4.0 * rho2 * rho2), 2.0 * rho1)


def _latitude_spline(v: Field):
    # regular at both ends: reflect evenly through psi = 0 and psi = pi/2
    g = v.grid
    psi, val = g.nodes, v.values
    x = np.concatenate([-psi[::-1], psi, math.pi - psi[::-1]])
    y = np.concatenate([val[::-1], val, val[::-1]])
    return interpolate.CubicSpline(x, y)


def stereographic_transport(v: Field, direction: str = "to_plane", target=None) -> Field:
    """Conformal transport u = (v o Phi) mu between S^N and R^N.

    ``to_plane`` takes a latitude field and returns a field on ``target``
    (default: a biradial grid with split (k, N-k)).  A radial target is
    allowed only for constant v, the one case whose image is radial.

    ``to_sphere`` takes a plane field and returns v(psi) = u / mu on the
    unit sphere |x| = 1, where mu = 1 and (rho1, rho2) = (cos psi, sin psi).
    It inverts ``to_plane`` exactly on its image; for other plane fields it
    is the restriction to that sphere.
    """
    if direction == "to_plane":
        g = v.grid
        if not isinstance(g, SphereGrid):
            raise GridMismatchError("to_plane needs a field on a sphere grid")
        N, k = g.N, g.split.k
        if target is None:
            target = BiradialGrid(SplitDims(N, k), 1e-3, 1e3, 256)
        if isinstance(target, RadialGrid):
            if target.N != N or np.ptp(v.values) > 1e-12 * max(1.0, np.max(np.abs(v.values))):
                raise GridMismatchError("only a constant sphere field has a radial image")
            return Field(target, v.values[0] * stereographic_factor(target.nodes, N))
        if not isinstance(target, BiradialGrid) or target.N != N or target.split.k != k:
            raise GridMismatchError(f"target must be a biradial grid with split ({k}, {N - k})")
        spline = _latitude_spline(v)
        psi = plane_latitude(target.rho1, target.rho2)
        return Field(target, spline(psi) * stereographic_factor(target.radius, N))
    if direction == "to_sphere":
        g = v.grid
        if isinstance(target, SphereGrid):
            sg = target
        elif isinstance(g, BiradialGrid):
            sg = SphereGrid(SplitDims(g.N, g.split.k, sphere=True), 2048 if target is None else int(target))
        elif isinstance(g, RadialGrid):
            sg = SphereGrid(SplitDims(g.N, 2, sphere=True), 2048 if target is None else int(target))
        else:
            raise GridMismatchError("to_sphere needs a plane field")
        if isinstance(g, BiradialGrid):
            lo, hi = g.rho_min, g.rho_max
        elif isinstance(g, RadialGrid):
            lo, hi = g.r_min, g.r_max
        else:
            raise GridMismatchError("to_sphere needs a plane field")
        if not lo < 1.0 < hi:
            raise ExtrapolationError(f"plane grid [{lo:g}, {hi:g}] does not contain the unit sphere")
        psi = sg.nodes
        if isinstance(g, RadialGrid):
            vals = np.full(psi.shape, float(radial_interpolant(v)(np.array([1.0]))[0]))
        else:
            if sg.N != g.N or sg.split.k != g.split.k:
                raise GridMismatchError("sphere and plane splits do not match")
            vals = biradial_interpolant(v)(np.cos(psi), np.sin(psi))
        return Field(sg, vals)
    raise ParameterError(f"direction must be 'to_plane' or 'to_sphere', got {direction!r}")


def transported_mass(v: Field, n: int = 256, rho_min: float = 1e-3, rho_max: float = 1e3) -> float:
    """Plane critical mass of the transport of v, Richardson-extrapolated from n and 2n."""
    g = v.grid
    split = SplitDims(g.N, g.split.k)
    coarse, fine = (stereographic_transport(v, target=BiradialGrid(split, rho_min, rho_max, m)).critical_mass()
                    for m in (n, 2 * n))
    return (4.0 * fine - coarse) / 3.0


def sphere_mass(v: Field) -> float:
    """int_{S^N} |v|^(2*) on the latitude grid."""
    return v.critical_mass()


def talenti(r, N: int):
    """(N(N-2))^((N-2)/4) (1 + |x|^2)^(-(N-2)/2), the transported constant."""
    return (N * (N - 2)) ** ((N - 2) / 4.0) * (1.0 + np.asarray(r) ** 2) ** (-(N - 2) / 2.0)


def conformal_laplacian_check(v: Field | None, u: Field) -> float:
    """Relative residual of -Lap u = |u|^(2*-2) u for a transported field u.

    Measured as || |x| (-Lap_h u - |u|^(2*-2) u) || / || |x| |u|^(2*-1) ||
    over all nodes except the outermost layer, where the truncation's
    Dirichlet jump lives.  ``v`` is the sphere field u came from; it is only
    used to check the pairing of dimensions.
    """
    g = u.grid
    if isinstance(g, SphereGrid):
        raise GridMismatchError("u must be a plane field")
    if v is not None and v.grid.N != g.N:
        raise GridMismatchError("sphere and plane dimensions differ")
    p = critical_exponent(g.N)
    w = g.weights
    vals = u.values
    rhs = critical_power(vals, p)
    lap = (quadratic_part(g) @ vals.ravel()).reshape(g.shape) / w
    mask = np.ones(g.shape, dtype=bool)
    if isinstance(g, BiradialGrid):
        mask[-1, :] = False
        mask[:, -1] = False
    else:
        mask[-1] = False
    r = g.radius
    den = math.sqrt(float(np.sum((w * (r * rhs) ** 2)[mask])))
    if den == 0:
        return 0.0 if not np.any(vals) else math.inf
    return math.sqrt(float(np.sum((w * (r * (lap - rhs)) ** 2)[mask]))) / den
