"""Angular-derivative diagnostics and radial-symmetry verdicts for biradial solutions.

For a biradial u(rho1, rho2) the angular derivative

    w = rho2 du/drho1 - rho1 du/drho2

is the derivative of u along the rotation that mixes the two blocks.  It
vanishes exactly when u is radial, and for a solution of the equation it
solves the linearized equation with the mode-(1,1) centrifugal shift.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import GridMismatchError, ParameterError
from .grids import BiradialGrid, Field, embed_radial_as_biradial, radial_average
from .operators import assemble_linearized, gradient_sq, hardy_bound, log_gradient

DEFAULT_DEFECT_TOL = 1e-3
DEFAULT_W_TOL = 1e-3
REFERENCE_N = 256
VERDICTS = ("radial-consistent", "non-radial", "inconclusive")


def _biradial(f: Field) -> BiradialGrid:
    if not isinstance(f.grid, BiradialGrid):
        raise GridMismatchError("expected a field on a biradial grid")
    return f.grid


def angular_derivative_w(u: Field) -> Field:
    """w = (rho2/rho1) du/ds1 - (rho1/rho2) du/ds2 with s_i = log rho_i."""
    g = _biradial(u)
    d1, d2 = log_gradient(u)
    return Field(g, g.rho2 / g.rho1 * d1 - g.rho1 / g.rho2 * d2)


def _weighted_norm(g, values) -> float:
    return math.sqrt(float(np.sum(g.weights * values * values)))


def hardy_norm(f: Field) -> float:
    """(int f^2 / |x|^2)^(1/2).

    Used instead of the plain L2 norm: critical-exponent solutions in low
    dimensions are not square integrable, so plain L2 norms on a truncated
    box are dominated by the truncation.  This norm is finite for them and
    invariant under the critical dilation.
    """
    g = f.grid
    return _weighted_norm(g, f.values / g.radius)


def w_relative(u: Field) -> float:
    """|| w / |x| || / || grad u ||; w/|x| is the tangential part of the gradient."""
    g = _biradial(u)
    # the outer layer differentiates against the Dirichlet ghost, which for
    # a field not vanishing there is a jump, not a tangential derivative
    keep = np.ones(g.shape, dtype=bool)
    keep[-1, :] = keep[:, -1] = False
    w = angular_derivative_w(u).values
    denom = _weighted_norm(g, np.where(keep, np.sqrt(gradient_sq(u)), 0.0))
    if denom == 0:
        return 0.0
    return _weighted_norm(g, np.where(keep, w / g.radius, 0.0)) / denom


def w_sign_range(u: Field) -> tuple[float, float]:
    """(min w, max w) over interior nodes: the sign diagnostic for w."""
    g = _biradial(u)
    w = angular_derivative_w(u).values[_interior(g)]
    return float(w.min()), float(w.max())


def radiality_defect(u: Field) -> float:
    """|| u - radial average of u || / || u || in the Hardy-weighted norm."""
    g = _biradial(u)
    nu = hardy_norm(u)
    if nu == 0:
        return 0.0
    avg = embed_radial_as_biradial(radial_average(u), g)
    return hardy_norm(u - avg) / nu


def _interior(g) -> np.ndarray:
    # w at the outer layer sees the Dirichlet ghost of u, so the stencil of
    # L w is trusted only two layers in
    mask = np.zeros(g.shape, dtype=bool)
    mask[1:-2, 1:-2] = True
    return mask


def verify_w_equation(sol) -> float:
    """Weighted L2 norm, over interior nodes, of (L_u + 1/rho1^2 + 1/rho2^2) w.

    Evaluated at the solution scaled to unit multiplier.  For an exact
    solution this is pure truncation error.
    """
    g = _biradial(sol.field)
    L = assemble_linearized(sol, (1, 1))
    w = angular_derivative_w(sol.scaled_field()).values.ravel()
    r = ((L.K @ w) / L.w).reshape(g.shape)
    return _weighted_norm(g, np.where(_interior(g), r, 0.0))


def w_equation_residual(u: Field, a: float = 0.0, fprime=None) -> float:
    """Same residual as ``verify_w_equation`` for an arbitrary field and f'."""
    from .operators import linearize

    g = _biradial(u)
    L = linearize(u, a, (1, 1), fprime)
    w = angular_derivative_w(u).values.ravel()
    r = ((L.K @ w) / L.w).reshape(g.shape)
    return _weighted_norm(g, np.where(_interior(g), r, 0.0))


def integrability_check(sol, radii) -> list:
    """Partial integrals I(R) of (1/rho1^2 + 1/rho2^2) w^2 over {|x| <= R}."""
    radii = [float(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly increasing")
    u = sol.scaled_field() if hasattr(sol, "scaled_field") else sol
    g = _biradial(u)
    w = angular_derivative_w(u).values
    dens = g.weights * (1.0 / g.rho1**2 + 1.0 / g.rho2**2) * w * w
    return [float(dens[g.radius <= R].sum()) for R in radii]


def is_cauchy(partials, rtol: float = 0.01) -> bool:
    """Last increment within ``rtol`` of the last partial integral."""
    if len(partials) < 2:
        return True
    last, prev = partials[-1], partials[-2]
    return last - prev <= rtol * last or last == 0


def scaled_thresholds(n: int, order: float = 2.0) -> dict:
    """Default tolerances, scaled from the reference 256 grid by h^order."""
    factor = (REFERENCE_N / n) ** order if n < REFERENCE_N else 1.0
    return {"defect": DEFAULT_DEFECT_TOL * factor, "w_rel": DEFAULT_W_TOL * factor}


@dataclass(frozen=True)
class SymmetryVerdict:
    defect: float
    w_rel: float
    index: int
    verdict: str
    thresholds: dict
    violation_candidate: bool = False
    hypothesis_holds: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def classify(defect: float, w_rel: float, index: int, thresholds: dict, hypothesis_holds=None) -> SymmetryVerdict:
    """Pure truth table turning the three measurements into a verdict.

    Index <= 1 with a large defect is a counterexample candidate for the
    radial-symmetry statement and is flagged, never passed silently.
    """
    if defect < 0 or w_rel < 0 or index < 0:
        raise ParameterError("defect, w_rel and index must be nonnegative")
    small_d = defect < thresholds["defect"]
    small_w = w_rel < thresholds["w_rel"]
    if small_d and small_w:
        verdict = "radial-consistent"
    elif not small_d:
        verdict = "non-radial"
    else:
        verdict = "inconclusive"
    candidate = index <= 1 and not small_d
    return SymmetryVerdict(defect, w_rel, int(index), verdict, dict(thresholds), candidate, hypothesis_holds)


def symmetry_verdict(sol, report, thresholds: dict | None = None) -> SymmetryVerdict:
    """Verdict for a Solution (or a bare biradial Field) and its Morse data.

    ``report`` is a MorseReport of class biradial or a plain integer index.
    """
    u = sol.field if hasattr(sol, "field") else sol
    g = _biradial(u)
    if hasattr(report, "total"):
        if report.cls != "biradial":
            raise ParameterError(f"need a biradial Morse report, got class {report.cls!r}")
        index = report.total
    else:
        index = int(report)
    hyp = None
    if hasattr(sol, "spec"):
        hyp = sol.spec.a > -hardy_bound(sol.spec.N)
    thresholds = thresholds or scaled_thresholds(g.n)
    return classify(radiality_defect(u), w_relative(u), index, thresholds, hyp)
