"""Independent reference computations used as frozen expectations.

None of these import the package's discretizations: they work from closed
forms with scipy quadrature, or from a separate uniform-grid solver.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate


def unit_sphere_area(dim: int) -> float:
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def talenti_profile(r, N: int = 4):
    return (N * (N - 2)) ** ((N - 2) / 4.0) * (1.0 + np.asarray(r) ** 2) ** (-(N - 2) / 2.0)


def talenti_quotient(N: int = 4, r_min: float = 0.0, r_max: float = math.inf) -> float:
    """Sobolev quotient of the closed-form Talenti profile by adaptive quadrature in r."""
    p = 2.0 * N / (N - 2)
    c = (N * (N - 2)) ** ((N - 2) / 4.0)
    du = lambda r: -c * (N - 2) * r * (1.0 + r * r) ** (-N / 2.0)  # noqa: E731
    u = lambda r: c * (1.0 + r * r) ** (-(N - 2) / 2.0)  # noqa: E731
    area = unit_sphere_area(N)
    pieces = [(r_min, 1.0), (1.0, r_max)]
    energy = sum(integrate.quad(lambda r: du(r) ** 2 * r ** (N - 1), a, b, limit=400, epsabs=0, epsrel=1e-13)[0]
                 for a, b in pieces)
    mass = sum(integrate.quad(lambda r: u(r) ** p * r ** (N - 1), a, b, limit=400, epsabs=0, epsrel=1e-13)[0]
               for a, b in pieces)
    return area * energy / (area * mass) ** (2.0 / p)


def sobolev_constant(N: int) -> float:
    """pi N (N-2) (Gamma(N/2)/Gamma(N))^(2/N), from the closed form."""
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2.0 / N)


def _emden_fowler_quotient(a: float, n: int, T: float = 40.0) -> float:
    """Radial N = 4 quotient minimum through u = phi(t)/r, t = log r.

    The quotient becomes |S^3|^(1/2) * int(phi'^2 + (1 - a) phi^2) / (int phi^4)^(1/2)
    on the line.  phi is even about its peak, so the problem is solved on
    [0, T] with a Neumann end at 0 (which also removes the translation
    mode) and a Dirichlet end at T, by Newton on -phi'' + lam phi = phi^3
    from a Gaussian start.
    """
    lam = 1.0 - a
    h = T / n
    t = (np.arange(n) + 0.5) * h
    main = np.full(n, 2.0)
    main[0] = 1.0
    main[-1] = 3.0
    D = sp.diags([-np.ones(n - 1), main, -np.ones(n - 1)], [-1, 0, 1], format="csc") / h**2
    A = D + lam * sp.identity(n, format="csc")
    phi = 1.5 * math.sqrt(lam) * np.exp(-lam * t * t / 2.0)
    for _ in range(100):
        F = A @ phi - phi**3
        J = A - sp.diags(3.0 * phi**2)
        step = spla.spsolve(sp.csc_matrix(J), -F)
        phi = phi + step
        if np.linalg.norm(step) <= 1e-14 * np.linalg.norm(phi):
            break
    energy = 2.0 * h * float(phi @ (A @ phi))
    mass = 2.0 * h * float(np.sum(phi**4))
    return math.sqrt(unit_sphere_area(4)) * energy / math.sqrt(mass)


def radial_best_constant_oracle(a: float, n: int = 8192) -> float:
    """Richardson extrapolation of the uniform-grid quotient from n/2 and n cells."""
    coarse = _emden_fowler_quotient(a, n // 2)
    fine = _emden_fowler_quotient(a, n)
    return (4.0 * fine - coarse) / 3.0


def log_ramp(rho, R1, R2):
    """Rising part of the cut-off: log(rho/R1)/log(R2/R1), clipped to [0, 1]."""
    return np.clip(np.log(rho / R1) / math.log(R2 / R1), 0.0, 1.0)


def invariant_sphere_eigenvalues(N: int, count: int):
    """Eigenvalues j(j+N-1), j = 0, 2, 4, ..., of -Lap on S^N restricted to the biradial class."""
    return [j * (j + N - 1) for j in range(0, 2 * count, 2)]
