"""Discrete symmetry-reduced operators, quadratic forms, cut-offs and exponents.

Every operator is stored as a symmetric stiffness matrix ``K`` together with
the diagonal mass ``w`` (the grid quadrature weights).  The operator acting
on nodal values is ``W^-1 K``; it is self-adjoint in the weighted inner
product and ``f @ K @ f`` is the discrete quadratic form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special

from .errors import GridMismatchError, NonRealExponentError, ParameterError
from .grids import BiradialGrid, Field, RadialGrid, SphereGrid, sphere_area


def critical_exponent(N: int) -> float:
    """2* = 2N / (N - 2)."""
    return 2.0 * N / (N - 2)


def hardy_bound(N: int) -> float:
    """(N - 2)^2 / 4, the coercivity limit for the Hardy coefficient."""
    return 0.25 * (N - 2) ** 2


def critical_power_derivative(u):
    """Default f'(u) = (2*-1)|u|^(2*-2) for f(u) = |u|^(2*-2) u; ``u`` is a Field."""
    p = critical_exponent(u.grid.N)
    return (p - 1.0) * np.abs(u.values) ** (p - 2.0)


# --- stiffness assembly -------------------------------------------------------


def _log_stiffness(axis, d: float) -> sp.csr_matrix:
    """Matrix of sum_faces exp(d s_f) (du/ds)^2 ds: natural at the bottom, Dirichlet on top."""
    n = axis.nodes.size
    coef = np.exp(d * axis.faces) / axis.h
    inner = coef[1:-1]
    main = np.zeros(n)
    main[:-1] += inner
    main[1:] += inner
    # ghost value -u_n puts the zero half a cell beyond the last node
    main[-1] += 2.0 * coef[-1]
    return sp.diags([-inner, main, -inner], [-1, 0, 1], format="csr")


def _sphere_stiffness(grid: SphereGrid) -> sp.csr_matrix:
    k, N = grid.split.k, grid.N
    psi = grid.faces[1:-1]
    coef = grid.constant * np.cos(psi) ** (k - 1) * np.sin(psi) ** (N - k) / grid.h
    main = np.zeros(grid.n)
    main[:-1] += coef
    main[1:] += coef
    return sp.diags([-coef, main, -coef], [-1, 0, 1], format="csr")


@dataclass(frozen=True, eq=False)
class ReducedLaplacian:
    """-Laplacian restricted to a symmetry class, in weighted symmetric form."""

    grid: RadialGrid | BiradialGrid | SphereGrid
    K: sp.csr_matrix
    w: np.ndarray

    def apply(self, f: Field) -> Field:
        _same_grid(self.grid, f)
        return Field(self.grid, (self.K @ f.values.ravel()) / self.w)

    def energy(self, f: Field) -> float:
        v = f.values.ravel()
        return float(v @ (self.K @ v))


@lru_cache(maxsize=32)
def _bulk_stiffness(grid) -> sp.csr_matrix:
    if isinstance(grid, RadialGrid):
        K = sphere_area(grid.N) * _log_stiffness(grid.axis, grid.N - 2)
    elif isinstance(grid, BiradialGrid):
        ax, k, m = grid.axis, grid.split.k, grid.split.second
        c = sphere_area(k) * sphere_area(m)
        K = c * (
            sp.kron(_log_stiffness(ax, k - 2), sp.diags(ax.cell_mass(m)))
            + sp.kron(sp.diags(ax.cell_mass(k)), _log_stiffness(ax, m - 2))
        )
    elif isinstance(grid, SphereGrid):
        K = _sphere_stiffness(grid)
    else:
        raise GridMismatchError(f"unsupported grid {grid!r}")
    return sp.csr_matrix(K)


# --- inner boundary closure -------------------------------------------------------
#
# The reduced domains exclude a small hole around the origin (radial) or two
# thin tubes around the axes rho1 = 0 and rho2 = 0 (biradial).  A plain
# zero-flux face lets minimizers gain energy by leaning on the hole, so each
# inner face instead carries the energy of an explicit continuation of the
# boundary values into the hole.  A face whose mode is regular at the axis
# (exponent 0) continues the boundary values as constants; a face whose mode
# vanishes like rho^e (e > 0) continues them as (rho/rho_min)^e, whose energy
# is e * rho_min^(d-2) u^2 per unit of the remaining measure.


def _regular_exponent(mu: float, d: int) -> float:
    """Root e >= -(d-2)/2 of e(e + d - 2) = mu."""
    half = 0.5 * (d - 2)
    disc = half * half + mu
    if disc < 0:
        raise NonRealExponentError(f"no real exponent for mu={mu} in dimension {d}")
    return -half + math.sqrt(disc)


def _robin(e: float, h: float) -> float:
    # continuation energy e*u_face^2 in series with the half cell between node and face
    return e * (2.0 / h) / (2.0 / h + e) if e else 0.0


def _tube_hardy(R: float, b, k: int):
    """int_0^R t^(k-1) / (t^2 + b^2) dt."""
    b = np.asarray(b, dtype=float)
    z = (R / b) ** 2
    if k == 2:
        return 0.5 * np.log1p(z)
    return R**k / (k * b * b) * special.hyp2f1(1.0, 0.5 * k, 0.5 * k + 1.0, -z)


@lru_cache(maxsize=16)
def _corner_hardy(k: int, m: int) -> float:
    """int over [0,1]^2 of x^(k-1) y^(m-1) / (x^2 + y^2)."""
    val, _ = integrate.quad(lambda y: y ** (m - 1) * float(_tube_hardy(1.0, y, k)), 0.0, 1.0, limit=200)
    return val


def _mode_key(grid, mode):
    if mode is None:
        return (0, 0) if isinstance(grid, BiradialGrid) else 0
    if isinstance(grid, BiradialGrid):
        l1, l2 = (int(x) for x in mode)
        return (l1, l2)
    return int(mode[0] if np.ndim(mode) else mode)


@lru_cache(maxsize=64)
def _closure(grid, a: float, m: int, mode) -> sp.csr_matrix:
    size = math.prod(grid.shape)
    if isinstance(grid, SphereGrid):
        return sp.csr_matrix((size, size))
    if isinstance(grid, RadialGrid):
        N, ax = grid.N, grid.axis
        gamma = _regular_exponent(mode * (mode + N - 2) - a, N)
        d = np.zeros(size)
        d[0] = sphere_area(N) * math.exp((N - 2) * ax.faces[0]) * _robin(gamma, ax.h)
        return sp.diags(d, format="csr")

    ax, n, h = grid.axis, grid.n, grid.h
    k, md = grid.split.k, grid.split.second
    ck, cm = sphere_area(k), sphere_area(md)
    lo = grid.rho_min
    s0 = ax.faces[0]
    nodes = np.exp(ax.nodes)
    l1, l2 = mode
    mu1 = l1 * (l1 + k - 2) + m * m
    mu2 = l2 * (l2 + md - 2)
    e1, e2 = _regular_exponent(mu1, k), _regular_exponent(mu2, md)
    mass_k, mass_m = ax.cell_mass(k), ax.cell_mass(md)
    first = sp.diags(np.eye(1, n).ravel())  # selects index 0 along one axis
    out = sp.csr_matrix((size, size))
    diag = np.zeros((n, n))

    # tube around rho1 = 0 (row i = 0)
    if e1 > 0:
        diag[0, :] += ck * cm * math.exp((k - 2) * s0) * _robin(e1, h) * mass_m
    else:
        vol = lo**k / k
        out = out + ck * cm * vol * sp.kron(first, _log_stiffness(ax, md - 2))
        pot = -a * _tube_hardy(lo, nodes, k) + mu2 * vol / nodes**2
        diag[0, :] += ck * cm * pot * mass_m
    # tube around rho2 = 0 (column j = 0)
    if e2 > 0:
        diag[:, 0] += ck * cm * math.exp((md - 2) * s0) * _robin(e2, h) * mass_k
    else:
        vol = lo**md / md
        out = out + ck * cm * vol * sp.kron(_log_stiffness(ax, k - 2), first)
        pot = -a * _tube_hardy(lo, nodes, md) + mu1 * vol / nodes**2
        diag[:, 0] += ck * cm * pot * mass_k
    # the corner square where both tubes meet
    if e1 == 0 and e2 == 0 and a:
        diag[0, 0] += -a * ck * cm * lo ** (k + md - 2) * _corner_hardy(k, md)
    return sp.csr_matrix(out + sp.diags(diag.ravel()))


@lru_cache(maxsize=32)
def reduced_laplacian(grid) -> ReducedLaplacian:
    K = _bulk_stiffness(grid) + _closure(grid, 0.0, 0, _mode_key(grid, None))
    return ReducedLaplacian(grid, sp.csr_matrix(K), grid.weights.ravel().copy())


def _same_grid(grid, f: Field):
    if f.grid != grid:
        raise GridMismatchError("field and operator live on different grids")


def inner_ghost(first, second, h):
    """Ghost value below rho_min for a field that is smooth and even across the axis.

    Near the axis u = u0 + c rho^2, so the ghost continues the quadratic in
    rho rather than mirroring the first node.
    """
    return first - (second - first) * math.exp(-2.0 * h)


def padded(f: Field) -> np.ndarray:
    """Biradial values with one ghost layer on every side.

    Below rho_min: even continuation across the axis; above rho_max: odd
    reflection (homogeneous Dirichlet data on the outer face).
    """
    h = f.grid.h
    v = np.pad(np.asarray(f.values, dtype=float), 1)
    v[0, 1:-1] = inner_ghost(v[1, 1:-1], v[2, 1:-1], h)
    v[1:-1, 0] = inner_ghost(v[1:-1, 1], v[1:-1, 2], h)
    v[-1, 1:-1] = -v[-2, 1:-1]
    v[1:-1, -1] = -v[1:-1, -2]
    return v


def log_gradient(f: Field):
    """Central differences d/d(log rho_i) of a biradial field, with ghosts from ``padded``."""
    g = f.grid
    if not isinstance(g, BiradialGrid):
        raise GridMismatchError("log_gradient needs a biradial field")
    v = padded(f)
    d1 = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * g.h)
    d2 = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * g.h)
    return d1, d2


def dilation_generator(u: Field) -> np.ndarray:
    """x . grad u + (N-2)/2 u: the tangent of the dilation orbit through u, flattened."""
    g = u.grid
    if isinstance(g, BiradialGrid):
        d1, d2 = log_gradient(u)
        radial = d1 + d2
    elif isinstance(g, RadialGrid):
        radial = np.gradient(u.values, g.h)
    else:
        raise GridMismatchError("dilations act on plane grids")
    return (radial + 0.5 * (g.N - 2) * u.values).ravel()


# --- potentials ----------------------------------------------------------------


def angular_shift(grid, mode) -> Field:
    """Centrifugal potential of an angular mode.

    On a biradial grid ``mode = (l1, l2)`` gives l1(l1+k-2)/rho1^2 +
    l2(l2+N-k-2)/rho2^2, i.e. m1^2/rho1^2 + m2^2/rho2^2 for two-dimensional
    blocks.  On a radial grid ``mode = l`` gives l(l+N-2)/r^2.
    """
    if isinstance(grid, BiradialGrid):
        l1, l2 = (int(x) for x in mode)
        if l1 < 0 or l2 < 0:
            raise ParameterError(f"mode indices must be >= 0, got {mode}")
        k, m = grid.split.k, grid.split.second
        vals = l1 * (l1 + k - 2) / grid.rho1**2 + l2 * (l2 + m - 2) / grid.rho2**2
        return Field(grid, vals)
    if isinstance(grid, RadialGrid):
        ell = int(mode[0] if np.ndim(mode) else mode)
        if ell < 0:
            raise ParameterError(f"angular degree must be >= 0, got {ell}")
        return Field(grid, ell * (ell + grid.N - 2) / grid.nodes**2)
    raise GridMismatchError("angular_shift is defined on radial and biradial grids")


def hardy_potential(grid) -> np.ndarray:
    if isinstance(grid, SphereGrid):
        raise GridMismatchError("the Hardy term lives on plane grids")
    return 1.0 / grid.radius**2


def winding_potential(grid) -> np.ndarray:
    """1/rho1^2, the weight of the m^2 term in the equivariant energy."""
    if not isinstance(grid, BiradialGrid):
        raise GridMismatchError("equivariant winding needs a biradial grid")
    return 1.0 / grid.rho1**2


def quadratic_part(grid, a: float = 0.0, m: int = 0, extra=None, mode=None) -> sp.csr_matrix:
    """Stiffness of |grad u|^2 - a u^2/|x|^2 + m^2 u^2/rho1^2 + shift(mode) u^2 + extra u^2.

    The singular potentials are integrated over the cells, with their tube
    parts in the boundary closure; ``extra`` is a bounded nodal potential
    integrated against the full mass weights.
    """
    if isinstance(grid, SphereGrid) and (a or m or (mode is not None and any(np.atleast_1d(mode)))):
        raise ParameterError("the sphere problem has no Hardy, winding or mode terms")
    key = _mode_key(grid, mode)
    K = _bulk_stiffness(grid) + _closure(grid, float(a), int(m), key)
    pot = np.zeros(math.prod(grid.shape))
    if a:
        pot -= a * hardy_potential(grid).ravel()
    if m:
        pot += m * m * winding_potential(grid).ravel()
    if np.any(key):
        pot += angular_shift(grid, key).values.ravel()
    if np.any(pot):
        K = K + sp.diags(grid.cell_weights.ravel() * pot)
    if extra is not None:
        K = K + sp.diags(grid.weights.ravel() * np.asarray(extra, dtype=float).ravel())
    return sp.csr_matrix(K)


# --- quotient --------------------------------------------------------------------


def check_hardy_coefficient(a: float, N: int):
    if not a < hardy_bound(N):
        raise ParameterError(
            f"Hardy coefficient a={a} must be < (N-2)^2/4 = {hardy_bound(N)} for coercivity"
        )


def quotient_parts(u: Field, a: float = 0.0, m: int = 0):
    """(energy, critical mass) of a field; the quotient is energy / mass^(2/2*)."""
    A = quadratic_part(u.grid, a, m)
    v = u.values.ravel()
    return float(v @ (A @ v)), u.critical_mass()


def hardy_sobolev_quotient(u: Field, a: float = 0.0, m: int = 0) -> float:
    """(int |grad u|^2 - a u^2/|x|^2 [+ m^2 u^2/rho1^2]) / (int |u|^2*)^(2/2*)."""
    N = u.grid.N
    check_hardy_coefficient(a, N)
    if not np.any(u.values):
        raise ParameterError("the quotient is undefined for the zero field")
    E, M = quotient_parts(u, a, m)
    return E / M ** (2.0 / critical_exponent(N))


def quotient_gradient(u: Field, a: float = 0.0, m: int = 0) -> np.ndarray:
    """Euclidean gradient of the discrete quotient with respect to nodal values."""
    A = quadratic_part(u.grid, a, m)
    p = critical_exponent(u.grid.N)
    v = u.values.ravel()
    w = u.grid.weights.ravel()
    E = float(v @ (A @ v))
    M = float(np.sum(w * np.abs(v) ** p))
    dE = 2.0 * (A @ v)
    dM = p * w * np.abs(v) ** (p - 2.0) * v
    return (dE - (2.0 / p) * E / M * dM) / M ** (2.0 / p)


# --- linearized operator ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """L = -Lap - a/|x|^2 [+ m^2/rho1^2] - f'(u) + shift, in weighted symmetric form."""

    laplacian: ReducedLaplacian
    a: float
    potential: np.ndarray
    shift: np.ndarray | None
    K: sp.csr_matrix
    m: int = 0
    linear: float = 0.0

    @property
    def grid(self):
        return self.laplacian.grid

    @property
    def w(self) -> np.ndarray:
        return self.laplacian.w

    def apply(self, f: Field) -> Field:
        _same_grid(self.grid, f)
        return Field(self.grid, (self.K @ f.values.ravel()) / self.w)

    def symmetric_matrix(self) -> sp.csr_matrix:
        """W^(-1/2) K W^(-1/2): same spectrum, Euclidean-symmetric."""
        d = sp.diags(1.0 / np.sqrt(self.w))
        return sp.csr_matrix(d @ self.K @ d)

    def shifted(self, c: float) -> "LinearizedOperator":
        """L + c I (identity in the weighted sense)."""
        return LinearizedOperator(
            self.laplacian, self.a, self.potential, self.shift,
            sp.csr_matrix(self.K + sp.diags(c * self.w)), self.m, self.linear + c,
        )

    def lower_bound(self) -> float:
        """Lower bound on the spectrum.

        The Hardy form (with the boundary closure) is nonnegative for every
        admissible a, so only the remaining pointwise potential counts.
        """
        pot = self.linear - self.potential
        if self.shift is not None:
            pot = pot + self.shift
        return float(np.min(pot))


def linearize(u: Field, a: float = 0.0, mode=None, fprime=None, m: int = 0, linear: float = 0.0):
    """Assemble the linearization at an arbitrary field.

    ``fprime`` maps a Field to nodal values of f'(u); the default is the
    critical power.  ``linear`` adds a constant potential (the c_N term on
    the sphere).
    """
    grid = u.grid
    lap = reduced_laplacian(grid)
    fp = np.asarray((fprime or critical_power_derivative)(u), dtype=float).ravel()
    shift = None
    if mode is not None and any(np.atleast_1d(mode)):
        shift = angular_shift(grid, mode).values.ravel()
    K = quadratic_part(grid, a, m, extra=linear - fp, mode=mode)
    return LinearizedOperator(lap, float(a), fp, shift, K, int(m), float(linear))


def assemble_linearized(sol, mode=(0, 0), fprime=None) -> LinearizedOperator:
    """Linearization at a converged Solution, within its class and angular mode."""
    from .solve import ensure_converged

    ensure_converged(sol)
    grid = sol.field.grid
    if isinstance(grid, RadialGrid):
        mode = mode if np.ndim(mode) == 0 else (mode[0] if len(mode) == 1 else sum(mode))
    return linearize(sol.scaled_field(), sol.spec.a, mode, fprime, m=sol.spec.m)


def quadratic_form(L: LinearizedOperator, f: Field) -> float:
    """<L f, f> in the weighted inner product."""
    _same_grid(L.grid, f)
    v = f.values.ravel()
    return float(v @ (L.K @ v))


# --- cut-off and exponents ---------------------------------------------------------


def _ramp(rho, R1, R2, R3, R4):
    rho = np.asarray(rho, dtype=float)
    up = np.log(rho / R1) / math.log(R2 / R1)
    down = 1.0 - np.log(rho / R3) / math.log(R4 / R3)
    out = np.where((rho >= R2) & (rho <= R3), 1.0, 0.0)
    out = np.where((rho >= R1) & (rho < R2), up, out)
    out = np.where((rho > R3) & (rho <= R4), down, out)
    return out


def cutoff_eta(R1: float, R2: float, R3: float, R4: float, grid: BiradialGrid) -> Field:
    """Product of log-linear ramps eta1(rho1) eta1(rho2): 1 on [R2,R3]^2, 0 off [R1,R4]^2."""
    if not 0 < R1 < R2 <= R3 < R4:
        raise ParameterError(f"need 0 < R1 < R2 <= R3 < R4, got {(R1, R2, R3, R4)}")
    if not isinstance(grid, BiradialGrid):
        raise GridMismatchError("cutoff_eta needs a biradial grid")
    return Field(grid, _ramp(grid.rho1, R1, R2, R3, R4) * _ramp(grid.rho2, R1, R2, R3, R4))


def gradient_sq(f: Field) -> np.ndarray:
    """|grad f|^2 at the nodes of a biradial grid from the shared central stencil."""
    d1, d2 = log_gradient(f)
    g = f.grid
    return (d1 / g.rho1) ** 2 + (d2 / g.rho2) ** 2


def eta_gradient_bound(R1, R2, R3, R4, grid: BiradialGrid) -> np.ndarray:
    """Right side 3(1/log^2(R4/R3) + 1/log^2(R2/R1))(1/rho1^2 + 1/rho2^2)."""
    c = 3.0 * (1.0 / math.log(R4 / R3) ** 2 + 1.0 / math.log(R2 / R1) ** 2)
    return c * (1.0 / grid.rho1**2 + 1.0 / grid.rho2**2)


@dataclass(frozen=True)
class Exponents:
    """Power-law rates u ~ |x|^gamma at the origin and |x|^delta at infinity."""

    gamma: float
    delta: float
    mu: float


def asymptotic_exponents(a: float, N: int, ell: int = 0) -> Exponents:
    """Roots of t(t + N - 2) = mu with mu = l(l + N - 2) - a."""
    if N < 3:
        raise ParameterError(f"N must be >= 3, got {N}")
    if ell < 0:
        raise ParameterError(f"angular degree must be >= 0, got {ell}")
    mu = ell * (ell + N - 2) - a
    half = 0.5 * (N - 2)
    disc = half * half + mu
    if disc < 0:
        raise NonRealExponentError(
            f"((N-2)/2)^2 + mu = {disc} < 0: exponents are not real (a={a}, N={N}, l={ell})"
        )
    root = math.sqrt(disc)
    return Exponents(-half + root, -half - root, mu)
