"""Symmetry-reduced grids, quadrature and inter-grid maps.

All grids are cell-centred: the interval of each reduced coordinate is cut
into ``n`` equal cells (in ``log r`` for radii, in ``psi`` for the sphere
latitude) and nodes sit at the cell midpoints.  Quadrature weights are the
exact measures of the cells, so integrating a constant is exact.

Boundary conventions used throughout the package:

* inner radial faces (``r_min`` / ``rho_min``) carry the closure built in
  ``operators`` (the energy of a regular continuation into the hole);
* outer radial faces (``r_max`` / ``rho_max``) carry homogeneous Dirichlet data;
* both sphere end faces are natural because the measure vanishes there.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import interpolate, special

from .errors import ExtrapolationError, GridMismatchError, ParameterError, ResolutionError


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^{dim-1} sitting in R^dim."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class SplitDims:
    """Block dimensions of a biradial symmetry.

    Plane problems split R^N = R^k x R^(N-k); sphere problems split the
    ambient R^(N+1) = R^k x R^(N+1-k) of S^N.
    """

    N: int
    k: int
    sphere: bool = False

    def __post_init__(self):
        if self.N < 3:
            raise ParameterError(f"N must be >= 3, got {self.N}")
        if self.k < 2 or self.second < 2:
            where = "N+1-k" if self.sphere else "N-k"
            raise ParameterError(
                f"split needs k >= 2 and {where} >= 2, got k={self.k}, {where}={self.second}"
            )

    @property
    def second(self) -> int:
        return self.N + 1 - self.k if self.sphere else self.N - self.k


class _LogAxis:
    """Uniform cells in s = log(rho) on [log lo, log hi]."""

    def __init__(self, lo: float, hi: float, n: int):
        self.faces = np.linspace(math.log(lo), math.log(hi), n + 1)
        self.nodes = 0.5 * (self.faces[1:] + self.faces[:-1])
        self.h = (self.faces[-1] - self.faces[0]) / n

    def cell_mass(self, d: float) -> np.ndarray:
        """Exact integrals of exp(d s) over each cell."""
        if d == 0:
            return np.full(self.nodes.size, self.h)
        e = np.exp(d * self.faces)
        return (e[1:] - e[:-1]) / d


def _check_bounds(lo, hi, n, nmin=8):
    if not (np.isfinite(lo) and np.isfinite(hi)) or not 0 < lo < hi:
        raise ParameterError(f"need 0 < lower < upper bound, got ({lo}, {hi})")
    if int(n) != n or n < nmin:
        raise ParameterError(f"need an integer node count >= {nmin}, got {n}")


@dataclass(frozen=True)
class RadialGrid:
    """Radial class on the shell r_min < |x| < r_max of R^N."""

    N: int
    r_min: float
    r_max: float
    n: int
    kind: str = field(default="radial", init=False)

    def __post_init__(self):
        if self.N < 3:
            raise ParameterError(f"N must be >= 3, got {self.N}")
        _check_bounds(self.r_min, self.r_max, self.n)

    @cached_property
    def axis(self) -> _LogAxis:
        return _LogAxis(self.r_min, self.r_max, self.n)

    @property
    def shape(self):
        return (self.n,)

    @property
    def h(self) -> float:
        return self.axis.h

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.exp(self.axis.nodes)

    @property
    def radius(self) -> np.ndarray:
        return self.nodes

    @cached_property
    def weights(self) -> np.ndarray:
        return sphere_area(self.N) * self.axis.cell_mass(self.N)

    @property
    def cell_weights(self) -> np.ndarray:
        return self.weights

    def coords(self):
        return (self.nodes,)

    def shell_volume(self) -> float:
        return sphere_area(self.N) * (self.r_max**self.N - self.r_min**self.N) / self.N


@dataclass(frozen=True)
class BiradialGrid:
    """Biradial class: tensor grid in (rho1, rho2) = (|xi|, |zeta|)."""

    split: SplitDims
    rho_min: float
    rho_max: float
    n: int
    kind: str = field(default="biradial", init=False)

    def __post_init__(self):
        if self.split.sphere:
            raise ParameterError("a biradial plane grid needs a plane split")
        _check_bounds(self.rho_min, self.rho_max, self.n)

    @property
    def N(self) -> int:
        return self.split.N

    @cached_property
    def axis(self) -> _LogAxis:
        return _LogAxis(self.rho_min, self.rho_max, self.n)

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def h(self) -> float:
        return self.axis.h

    @cached_property
    def rho(self):
        r = np.exp(self.axis.nodes)
        return np.meshgrid(r, r, indexing="ij")

    @property
    def rho1(self) -> np.ndarray:
        return self.rho[0]

    @property
    def rho2(self) -> np.ndarray:
        return self.rho[1]

    @cached_property
    def radius(self) -> np.ndarray:
        return np.hypot(self.rho1, self.rho2)

    @cached_property
    def cell_weights(self) -> np.ndarray:
        """Exact measures of the cells inside (rho_min, rho_max)^2."""
        c = sphere_area(self.split.k) * sphere_area(self.split.second)
        return c * np.outer(self.axis.cell_mass(self.split.k), self.axis.cell_mass(self.split.second))

    @cached_property
    def tube_weights(self) -> np.ndarray:
        """Measures of the axis tubes rho_i < rho_min, attached to the nearest nodes.

        Fields are continued into the tubes as constants along the normal
        direction, so the first row and column carry the tube measure.
        """
        k, m = self.split.k, self.split.second
        c = sphere_area(k) * sphere_area(m)
        lo = self.rho_min
        t = np.zeros(self.shape)
        t[0, :] += c * lo**k / k * self.axis.cell_mass(m)
        t[:, 0] += c * lo**m / m * self.axis.cell_mass(k)
        t[0, 0] += c * lo**k / k * lo**m / m
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        return self.cell_weights + self.tube_weights

    def coords(self):
        return (self.rho1, self.rho2)

    def box_measure(self) -> float:
        """Analytic measure of {rho1, rho2 < rho_max}: the cells plus the axis tubes."""
        k, m = self.split.k, self.split.second
        c = sphere_area(k) * sphere_area(m)
        hi = self.rho_max
        return c * hi**k / k * hi**m / m


@dataclass(frozen=True)
class SphereGrid:
    """Biradial class on S^N parametrised by the latitude psi in (0, pi/2).

    A point is (cos(psi) a, sin(psi) b) with a in S^(k-1), b in S^(N-k).
    """

    split: SplitDims
    n: int
    kind: str = field(default="sphere", init=False)

    def __post_init__(self):
        if not self.split.sphere:
            raise ParameterError("a sphere grid needs a sphere split")
        if int(self.n) != self.n or self.n < 8:
            raise ParameterError(f"need an integer node count >= 8, got {self.n}")

    @property
    def N(self) -> int:
        return self.split.N

    @property
    def shape(self):
        return (self.n,)

    @cached_property
    def faces(self) -> np.ndarray:
        return np.linspace(0.0, 0.5 * math.pi, self.n + 1)

    @property
    def h(self) -> float:
        return 0.5 * math.pi / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return 0.5 * (self.faces[1:] + self.faces[:-1])

    @property
    def constant(self) -> float:
        return sphere_area(self.split.k) * sphere_area(self.split.second)

    def _exponents(self):
        # cos^(k-1) sin^(N-k) dpsi is a Beta(a, b) measure in sin^2(psi)
        return 0.5 * (self.N - self.split.k + 1), 0.5 * self.split.k

    def cumulative_measure(self, psi) -> np.ndarray:
        a, b = self._exponents()
        x = np.sin(np.asarray(psi)) ** 2
        return 0.5 * self.constant * special.beta(a, b) * special.betainc(a, b, x)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.diff(self.cumulative_measure(self.faces))

    @property
    def cell_weights(self) -> np.ndarray:
        return self.weights

    def coords(self):
        return (self.nodes,)

    def volume(self) -> float:
        return sphere_area(self.N + 1)


Grid = RadialGrid | BiradialGrid | SphereGrid


def build_radial_grid(N: int, r_min: float = 1e-3, r_max: float = 1e3, n: int = 512) -> RadialGrid:
    return RadialGrid(int(N), float(r_min), float(r_max), n)


def build_biradial_grid(N: int, k: int, rho_min: float = 1e-3, rho_max: float = 1e3, n: int = 256) -> BiradialGrid:
    return BiradialGrid(SplitDims(int(N), int(k)), float(rho_min), float(rho_max), n)


def build_sphere_grid(N: int, k: int, n: int = 1024) -> SphereGrid:
    return SphereGrid(SplitDims(int(N), int(k), sphere=True), n)


class Field:
    """Real values sampled on the nodes of a grid.

    The value array is read-only; arithmetic returns new fields and only
    combines fields on equal grids.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ParameterError("field values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"Field({self.grid.kind}, shape={self.values.shape})"

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridMismatchError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def integrate(self) -> float:
        return float(np.sum(self.grid.weights * self.values))

    def inner(self, other: "Field") -> float:
        return float(np.sum(self.grid.weights * self.values * self._other(other)))

    def norm(self) -> float:
        """Weighted L2 norm."""
        return math.sqrt(self.inner(self))

    def critical_mass(self) -> float:
        """Integral of |f|^(2N/(N-2))."""
        p = 2.0 * self.grid.N / (self.grid.N - 2)
        return float(np.sum(self.grid.weights * np.abs(self.values) ** p))

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(*grid.coords()))

    @classmethod
    def constant(cls, grid, value=1.0):
        return cls(grid, np.full(grid.shape, float(value)))


# --- CSV dumps ---------------------------------------------------------------

_HEADERS = {"radial": ["r", "value"], "biradial": ["rho1", "rho2", "value"], "sphere": ["psi", "value"]}


def save_field(f: Field, path) -> Path:
    path = Path(path)
    cols = [c.ravel() for c in f.grid.coords()] + [f.values.ravel()]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HEADERS[f.grid.kind])
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
    return path


def load_field(path, grid) -> Field:
    """Read a CSV dump; node columns must match ``grid`` to 1e-12 relative."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header != _HEADERS[grid.kind]:
        raise ParameterError(f"expected header {_HEADERS[grid.kind]}, got {header}")
    data = np.array(body, dtype=float)
    if data.shape[0] != math.prod(grid.shape):
        raise GridMismatchError(f"dump has {data.shape[0]} rows, grid has {math.prod(grid.shape)} nodes")
    for col, c in zip(data.T[:-1], grid.coords()):
        if not np.allclose(col, c.ravel(), rtol=1e-12, atol=0.0):
            raise GridMismatchError("dump node coordinates differ from the grid")
    return Field(grid, data[:, -1].reshape(grid.shape))


# --- maps between the radial and biradial classes ----------------------------


def radial_interpolant(f: Field):
    """Monotone interpolant of a radial field in log r, honouring the boundary data.

    Returns a callable r -> values; radii outside [r_min, r_max] raise.
    """
    g = f.grid
    s = g.axis.nodes
    h = g.h
    # Neumann ghost below, Dirichlet ghost (odd reflection) above
    ss = np.concatenate(([s[0] - h], s, [s[-1] + h]))
    vv = np.concatenate(([f.values[0]], f.values, [-f.values[-1]]))
    pchip = interpolate.PchipInterpolator(ss, vv, extrapolate=False)
    lo, hi = g.axis.faces[0], g.axis.faces[-1]

    def ev(r):
        t = np.log(np.asarray(r, dtype=float))
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            raise ExtrapolationError(
                f"radius outside [{g.r_min:g}, {g.r_max:g}] requested from a radial field"
            )
        return pchip(np.clip(t, lo, hi))

    return ev


def biradial_interpolant(f: Field):
    """Bicubic interpolant of a biradial field in (log rho1, log rho2).

    Below rho_min the field is continued flat from the inner face (the
    field is regular across the axes).  Between the last node and rho_max
    it falls linearly to the Dirichlet zero, and beyond rho_max it is zero.
    The spline itself only sees the nodes and the inner ghosts, so a field
    that violates the outer boundary data does not ring inwards.
    """
    from .operators import padded

    g = f.grid
    s = g.axis.nodes
    h = g.h
    ss = np.concatenate(([s[0] - h], s))
    v = padded(f)[:-1, :-1]
    v[0, 0] = v[1, 1]  # never reached by in-range evaluations
    spline = interpolate.RectBivariateSpline(ss, ss, v, kx=3, ky=3, s=0)
    bottom, last, top = g.axis.faces[0], s[-1], g.axis.faces[-1]

    def ramp(t):
        return np.clip((top - t) / (top - last), 0.0, 1.0)

    def ev(rho1, rho2):
        t1 = np.log(np.maximum(np.asarray(rho1, dtype=float), 1e-300))
        t2 = np.log(np.maximum(np.asarray(rho2, dtype=float), 1e-300))
        out = spline.ev(np.clip(t1, bottom, last), np.clip(t2, bottom, last))
        return out * ramp(t1) * ramp(t2)

    return ev


def embed_radial_as_biradial(f: Field, bg: BiradialGrid) -> Field:
    """Sample a radial field at |x| = sqrt(rho1^2 + rho2^2) on a biradial grid."""
    if f.grid.kind != "radial":
        raise GridMismatchError("embed_radial_as_biradial needs a radial field")
    if f.grid.N != bg.N:
        raise GridMismatchError(f"dimension mismatch: radial N={f.grid.N}, biradial N={bg.N}")
    return Field(bg, radial_interpolant(f)(bg.radius))


def default_average_grid(bg: BiradialGrid) -> RadialGrid:
    """Radial grid covering every node radius of ``bg`` with matching log spacing."""
    hi = math.sqrt(2.0) * bg.rho_max
    n = max(8, int(round(math.log(hi / bg.rho_min) / bg.h)))
    return RadialGrid(bg.N, bg.rho_min, hi, n)


def arc_rule(split: SplitDims, m: int = 96):
    """Gauss-Legendre angles on (0, pi/2) with the biradial arc weight folded in."""
    x, w = np.polynomial.legendre.leggauss(m)
    theta = 0.25 * math.pi * (x + 1.0)
    w = w * np.cos(theta) ** (split.k - 1) * np.sin(theta) ** (split.second - 1)
    return theta, w / w.sum()


def radial_average(f: Field, target: RadialGrid | None = None, arc_points: int = 96) -> Field:
    """Measure-weighted average of a biradial field over the arcs |x| = r inside the box."""
    bg = f.grid
    if bg.kind != "biradial":
        raise GridMismatchError("radial_average needs a biradial field")
    target = target or default_average_grid(bg)
    if target.N != bg.N:
        raise GridMismatchError("target radial grid has a different dimension")
    if arc_points < 2:
        raise ResolutionError("need at least two arc sample points")
    if target.nodes[-1] > math.sqrt(2.0) * bg.rho_max * (1 + 1e-12):
        raise ResolutionError("target radii beyond the corner of the biradial box")
    theta, w = arc_rule(bg.split, arc_points)
    r = target.nodes[:, None]
    rho1, rho2 = r * np.cos(theta), r * np.sin(theta)
    # beyond rho_max an arc leaves the box; average over the part inside
    inside = (rho1 <= bg.rho_max) & (rho2 <= bg.rho_max)
    mass = inside @ w
    if np.any(mass <= 0):
        raise ResolutionError("an averaging arc has no sample inside the box")
    vals = biradial_interpolant(f)(rho1, rho2)
    return Field(target, (vals * inside) @ w / mass)
