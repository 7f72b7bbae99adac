"""Eigenvalues of linearized operators and Morse-index counting per symmetry class."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatchError, ParameterError, SpectralError
from .grids import BiradialGrid, Field, RadialGrid
from .operators import LinearizedOperator, assemble_linearized, dilation_generator

log = logging.getLogger(__name__)

DENSE_LIMIT = 4000
ZERO_BAND = 1e-6
EIGEN_RTOL = 1e-8
SYMMETRY_BAND = 1e-3
CLASSES = ("radial", "biradial", "full-via-modes")


def _relative_residual(B, lam, x) -> float:
    r = B @ x - lam * x
    return float(np.linalg.norm(r) / (max(abs(lam), 1.0) * np.linalg.norm(x)))


def _polish(B, lam, x, steps=3):
    """Rayleigh-quotient refinement of an eigenpair of a symmetric sparse matrix."""
    n = B.shape[0]
    for _ in range(steps):
        if _relative_residual(B, lam, x) <= 0.1 * EIGEN_RTOL:
            break
        shift = lam - 1e-10 * max(abs(lam), 1.0)
        try:
            y = spla.spsolve(sp.csc_matrix(B - shift * sp.identity(n)), x)
        except RuntimeError:
            break
        if not np.all(np.isfinite(y)):
            break
        x = y / np.linalg.norm(y)
        lam = float(x @ (B @ x))
    return lam, x


def _orthonormalize(B, vals, vecs):
    """Modified Gram-Schmidt in ascending order, then sparse Rayleigh quotients.

    A Householder QR would add rounding of size eps ||x|| to every entry,
    which B amplifies where the weights are small; plain vector updates
    keep the error relative to each entry.
    """
    order = np.argsort(vals)
    q = vecs[:, order].copy()
    for j in range(q.shape[1]):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    vals = np.einsum("ij,ij->j", q, B @ q)
    order = np.argsort(vals)
    return vals[order], q[:, order]


def negative_eigenpairs(L: LinearizedOperator, count: int = 4):
    """The ``count`` smallest eigenpairs of L in the weighted inner product.

    Returns a list of (eigenvalue, Field) sorted ascending; eigenfields are
    orthonormal for the grid weights.  Despite the name the pairs are not
    filtered by sign: callers count negatives themselves.
    """
    n = L.w.size
    count = int(count)
    if not 1 <= count < n:
        raise ParameterError(f"need 1 <= count < {n}, got {count}")
    B = L.symmetric_matrix()
    if n <= DENSE_LIMIT:
        vals, vecs = sla.eigh(B.toarray(), subset_by_index=[0, count - 1])
    else:
        sigma = L.lower_bound() - 1.0
        try:
            vals, vecs = spla.eigsh(B, k=count, sigma=sigma, which="LM", tol=0.0, maxiter=5000,
                                   ncv=min(n - 1, max(2 * count + 1, 20)))
        except spla.ArpackNoConvergence as exc:
            partial = list(zip(exc.eigenvalues, exc.eigenvectors.T))
            raise SpectralError(f"eigensolver did not converge for {count} pairs", partial=partial) from exc
    # dense backward error is eps ||B||, and the weights near the inner face
    # make ||B|| large, so every pair is polished against the sparse B; a
    # projected (Rayleigh-Ritz) step would bring the eps ||B|| error back
    for i, lam in enumerate(vals):
        vals[i], vecs[:, i] = _polish(B, float(lam), vecs[:, i].copy())
    vals, vecs = _orthonormalize(B, vals, vecs)
    bad = [(float(l), _relative_residual(B, l, vecs[:, i])) for i, l in enumerate(vals)]
    worst = max(r for _, r in bad)
    if worst > EIGEN_RTOL:
        log.warning("eigenpair residual %.2e exceeds %.0e", worst, EIGEN_RTOL)
    scale = 1.0 / np.sqrt(L.w)
    grid = L.grid
    return [(float(lam), Field(grid, (scale * vecs[:, i]).reshape(grid.shape))) for i, lam in enumerate(vals)]


def eigenpair_residual(L: LinearizedOperator, lam: float, f: Field) -> float:
    """||L f - lam f|| / (max(|lam|, 1) ||f||), all norms weighted."""
    v = f.values.ravel()
    r = (L.K @ v) / L.w - lam * v
    nr = math.sqrt(np.sum(L.w * r * r))
    nf = math.sqrt(np.sum(L.w * v * v))
    return nr / (max(abs(lam), 1.0) * nf)


def harmonic_multiplicity(degree: int, dim: int) -> int:
    """Dimension of the degree-l spherical harmonics on S^(dim-1)."""
    if degree == 0:
        return 1
    return math.comb(degree + dim - 1, dim - 1) - math.comb(degree + dim - 3, dim - 1)


def inertia_below(B, shift: float) -> int:
    """Number of eigenvalues of the symmetric matrix B below ``shift``.

    Sylvester's law of inertia: the sign pattern of the pivots of a
    symmetric LDL^T factorization of B - shift I.  SuperLU in symmetric mode
    without pivoting produces exactly that factorization.
    """
    n = B.shape[0]
    lu = spla.splu(
        sp.csc_matrix(B - shift * sp.identity(n)),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    return int(np.sum(lu.U.diagonal() < 0))


def _sparse_eigenpairs(B, sigma, k, maxiter=5000):
    n = B.shape[0]
    try:
        vals, vecs = spla.eigsh(B, k=k, sigma=sigma, which="LM", tol=0.0, maxiter=maxiter,
                                ncv=min(n - 1, max(2 * k + 1, 20)))
    except spla.ArpackNoConvergence as exc:
        raise SpectralError(f"eigensolver did not converge near {sigma:g}",
                            partial=list(exc.eigenvalues)) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _merge(pairs_a, pairs_b):
    vals = np.concatenate([pairs_a[0], pairs_b[0]])
    vecs = np.hstack([pairs_a[1], pairs_b[1]])
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    keep = np.concatenate(([True], np.diff(vals) > 1e-9 * np.maximum(1.0, np.abs(vals[1:]))))
    return vals[keep], vecs[:, keep]


def _symmetric_coordinates(L: LinearizedOperator, vec):
    if vec is None:
        return None
    t = np.sqrt(L.w) * np.asarray(vec, dtype=float).ravel()
    norm = np.linalg.norm(t)
    return t / norm if norm > 0 else None


def count_negative(L: LinearizedOperator, start: int = 4, symmetry=None):
    """Eigenvalues below the near-zero band, and those treated as zero.

    Returns (reported eigenvalues, negatives, near-zeros).  The band is
    |lambda| < ZERO_BAND * max(1, |lambda_1|).  ``symmetry`` is the nodal
    tangent of a continuous symmetry orbit (the dilation generator on plane
    grids).  Truncation breaks that symmetry slightly, which can push its
    eigenvalue just outside the band; an eigenvector aligned with it
    (squared overlap above one half) within SYMMETRY_BAND is counted as
    zero, not negative.
    """
    n = L.w.size
    z = _symmetric_coordinates(L, symmetry)
    if n <= DENSE_LIMIT:
        B = L.symmetric_matrix().toarray()
        count = min(start, n)
        while True:
            vals, vecs = sla.eigh(B, subset_by_index=[0, count - 1])
            eps = ZERO_BAND * max(1.0, abs(vals[0]))
            if vals[-1] >= SYMMETRY_BAND * max(1.0, abs(vals[0])) or count == n:
                break
            count = min(2 * count, n)
    else:
        B = L.symmetric_matrix()
        n_neg = inertia_below(B, -ZERO_BAND)
        # a shift far below a spectrum that starts in the truncation's
        # cluster of small positive eigenvalues does not converge, so the
        # bottom is only sought when the inertia says it is negative
        if n_neg:
            lowest = _sparse_eigenpairs(B, L.lower_bound() - 1.0, 1)
            eps = ZERO_BAND * max(1.0, abs(lowest[0][0]))
            n_neg = inertia_below(B, -eps)
        else:
            eps = ZERO_BAND
        # negatives close to zero hide in the cluster of small positive
        # eigenvalues, so look near zero first and far below only if needed
        near = _sparse_eigenpairs(B, 0.0, min(n - 1, max(start, n_neg + 8)))
        vals, vecs = _merge(lowest, near) if n_neg else near
        missing = n_neg - int(np.sum(vals <= -eps))
        if missing > 0:
            far = _sparse_eigenpairs(B, L.lower_bound() - 1.0, min(n - 1, missing + 1))
            vals, vecs = _merge((vals, vecs), far)
        found = int(np.sum(vals <= -eps))
        if found != n_neg:
            log.warning("inertia count %d differs from eigenvalue count %d", n_neg, found)
    band = SYMMETRY_BAND * max(1.0, abs(vals[0]))
    neg, zero = [], []
    for i, v in enumerate(vals):
        aligned = z is not None and abs(v) < band and float(vecs[:, i] @ z) ** 2 > 0.5
        if -eps < v < eps or aligned:
            zero.append(float(v))
        elif v <= -eps:
            neg.append(float(v))
    return [float(v) for v in vals], neg, zero


@dataclass
class ModeSpectrum:
    m1: int
    m2: int
    eigenvalues: list
    negatives: int
    multiplicity: int = 1
    zeros: int = 0

    def to_dict(self) -> dict:
        return {"m1": self.m1, "m2": self.m2, "eigenvalues": self.eigenvalues, "negatives": self.negatives}


@dataclass
class MorseReport:
    cls: str
    modes: list = field(default_factory=list)
    total: int = 0
    saturated: bool = True
    cutoff: int = 0
    # {grid size: total index} when an index was also computed on a coarser grid
    two_grid: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "class": self.cls,
            "modes": [m.to_dict() for m in self.modes],
            "total": self.total,
            "saturated": self.saturated,
        }
        if self.two_grid:
            out["two_grid"] = {str(k): v for k, v in sorted(self.two_grid.items())}
        return out


def _mode_spectrum(sol, mode, m1, m2, mult) -> ModeSpectrum:
    L = assemble_linearized(sol, mode)
    # dilations preserve every symmetry class but only the unshifted mode
    z = dilation_generator(sol.scaled_field()) if m1 == 0 and m2 == 0 else None
    vals, neg, zero = count_negative(L, symmetry=z)
    return ModeSpectrum(m1, m2, [float(v) for v in vals], len(neg) * mult, mult, len(zero))


def morse_index(sol, cls: str = "biradial", mode_cutoff: int = 4, jobs: int = 1) -> MorseReport:
    """Negative-eigenvalue count of the linearization at ``sol`` within a class.

    ``full-via-modes`` sums the reduced counts over angular modes up to the
    cutoff, each weighted by the dimension of its harmonic space.
    """
    if cls not in CLASSES:
        raise ParameterError(f"class must be one of {CLASSES}, got {cls!r}")
    grid = sol.field.grid
    if cls == "radial" and not isinstance(grid, RadialGrid):
        raise GridMismatchError("radial index needs a radial solution")
    if cls == "biradial" and not isinstance(grid, BiradialGrid):
        raise GridMismatchError("biradial index needs a biradial solution")
    if cls == "full-via-modes" and mode_cutoff < 0:
        raise ParameterError(f"mode cutoff must be >= 0, got {mode_cutoff}")

    if cls == "radial":
        tasks = [(0, 0, 0, 1)]
    elif cls == "biradial":
        tasks = [((0, 0), 0, 0, 1)]
    elif isinstance(grid, RadialGrid):
        tasks = [(l, l, 0, harmonic_multiplicity(l, grid.N)) for l in range(mode_cutoff + 1)]
    else:
        k, second = grid.split.k, grid.split.second
        tasks = [
            ((m1, m2), m1, m2, harmonic_multiplicity(m1, k) * harmonic_multiplicity(m2, second))
            for m1 in range(mode_cutoff + 1)
            for m2 in range(mode_cutoff + 1)
        ]
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            modes = list(pool.map(lambda t: _mode_spectrum(sol, *t), tasks))
    else:
        modes = [_mode_spectrum(sol, *t) for t in tasks]

    total = sum(m.negatives for m in modes)
    ring = [m for m in modes if max(m.m1, m.m2) == mode_cutoff]
    saturated = cls != "full-via-modes" or all(m.negatives == 0 for m in ring)
    if not saturated:
        log.warning("mode cutoff %d is not saturated: the outer ring still has negative directions", mode_cutoff)
    return MorseReport(cls, modes, total, saturated, mode_cutoff if cls == "full-via-modes" else 0)


def two_grid_morse_index(spec, cls: str = "biradial", mode_cutoff: int = 4, jobs: int = 1) -> MorseReport:
    """Index at spec.n with the index at spec.n // 2 alongside.

    The discrete index of a truncated problem need not equal the continuum
    one; a disagreement between the two grids is logged, never resolved.
    """
    from .solve import solve

    coarse = morse_index(solve(spec.with_n(spec.n // 2)), cls, mode_cutoff, jobs)
    report = morse_index(solve(spec), cls, mode_cutoff, jobs)
    report.two_grid = {spec.n // 2: coarse.total, spec.n: report.total}
    if coarse.total != report.total:
        log.warning("index differs between grids: %s", report.two_grid)
    return report
