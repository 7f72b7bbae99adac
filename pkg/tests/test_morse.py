import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardysym.errors import GridMismatchError, ParameterError
from hardysym.grids import Field, build_radial_grid
from hardysym.morse import (
    count_negative,
    eigenpair_residual,
    harmonic_multiplicity,
    morse_index,
    negative_eigenpairs,
    two_grid_morse_index,
)
from hardysym.operators import linearize, quadratic_form
from hardysym.solve import ProblemSpec, Solution
from hardysym.sphere import extrapolated_spectrum, sphere_linearization
from conftest import cached_index, cached_nodal, cached_solve
from oracles import invariant_sphere_eigenvalues


def _sign_changes(values):
    s = np.sign(values[np.abs(values) > 1e-10 * np.max(np.abs(values))])
    return int(np.sum(s[1:] != s[:-1]))


def test_free_radial_laplacian_is_nonnegative():
    g = build_radial_grid(4, 1e-3, 1e3, 256)
    L = linearize(Field.constant(g, 0.0), fprime=lambda u: np.zeros(u.grid.shape))
    assert negative_eigenpairs(L, 1)[0][0] >= 0


def test_sphere_constant_spectrum(sphere_constant):
    # -Lap_red - N on invariant harmonics: j(j+N-1) - N for even j
    expected = [lam - 4 for lam in invariant_sphere_eigenvalues(4, 2)]
    got = extrapolated_spectrum(sphere_constant, 2)
    assert got == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("c", [-3.0, 0.5, 7.25])
def test_shift_translates_spectrum(c):
    g = build_radial_grid(4, 1e-2, 1e2, 128)
    L = linearize(Field(g, 1.0 / (1.0 + g.nodes**2)), -1.0)
    base = [lam for lam, _ in negative_eigenpairs(L, 4)]
    moved = [lam for lam, _ in negative_eigenpairs(L.shifted(c), 4)]
    assert np.max(np.abs(np.array(moved) - np.array(base) - c)) <= 1e-12 * max(1.0, abs(c))


def test_eigenpairs_are_accurate_and_orthonormal(radial_a0):
    from hardysym.operators import assemble_linearized

    L = assemble_linearized(radial_a0)
    pairs = negative_eigenpairs(L, 4)
    lams = [lam for lam, _ in pairs]
    assert lams == sorted(lams)
    for lam, f in pairs:
        assert eigenpair_residual(L, lam, f) <= 1e-8
        assert quadratic_form(L, f) == pytest.approx(lam * f.norm() ** 2, rel=1e-8, abs=1e-12)
    gram = np.array([[np.sum(L.w * f.values * h.values) for _, h in pairs] for _, f in pairs])
    assert np.allclose(gram, np.eye(4), atol=1e-10)


def test_eigenpairs_count_range():
    L = linearize(Field.constant(build_radial_grid(4, 1e-3, 1e3, 16), 0.0))
    with pytest.raises(ParameterError):
        negative_eigenpairs(L, 0)
    with pytest.raises(ParameterError):
        negative_eigenpairs(L, 16)


def test_biradial_minimizer_has_index_one():
    assert cached_index(cls="biradial", a=0.0, n=64).total == 1


def test_radial_minimizer_has_index_one(radial_a0):
    assert morse_index(radial_a0, "radial").total == 1


@pytest.mark.parametrize("cls", ["radial", "biradial", "full-via-modes"])
def test_zero_solution_has_index_zero(cls):
    plane = "radial" if cls == "radial" else "biradial"
    spec = ProblemSpec(cls=plane, n=32 if plane == "biradial" else 128)
    sol = Solution(spec, Field.constant(spec.grid(), 0.0), 0.0, 0.0)
    assert morse_index(sol, cls, mode_cutoff=2).total == 0


def test_first_nodal_sphere_solution_has_index_two(sphere_v1):
    assert sphere_v1.index == 2


def test_class_grid_checks(radial_a0, biradial_a0_64):
    with pytest.raises(GridMismatchError):
        morse_index(radial_a0, "biradial")
    with pytest.raises(GridMismatchError):
        morse_index(biradial_a0_64, "radial")
    with pytest.raises(ParameterError):
        morse_index(radial_a0, "cylindrical")


@pytest.fixture(scope="module")
def modes_a3():
    return morse_index(cached_solve(cls="biradial", a=-3.0, n=64), "full-via-modes", 4)


def test_mode_counts_do_not_grow_with_winding(modes_a3):
    raw = {(m.m1, m.m2): m.negatives // m.multiplicity for m in modes_a3.modes}
    for (m1, m2), c in raw.items():
        if (m1 + 1, m2) in raw:
            assert raw[(m1 + 1, m2)] <= c
        if (m1, m2 + 1) in raw:
            assert raw[(m1, m2 + 1)] <= c


def test_total_is_sum_of_modes(modes_a3):
    assert modes_a3.total == sum(m.negatives for m in modes_a3.modes)
    for m in modes_a3.modes:
        assert m.eigenvalues == sorted(m.eigenvalues)


def test_raising_cutoff_never_lowers_total(modes_a3):
    low = morse_index(cached_solve(cls="biradial", a=-3.0, n=64), "full-via-modes", 2)
    assert low.total <= modes_a3.total


def test_unsaturated_cutoff_is_flagged(modes_a3):
    ring = [m for m in modes_a3.modes if max(m.m1, m.m2) == 4]
    assert modes_a3.saturated == all(m.negatives == 0 for m in ring)


def test_full_index_of_bubble_is_one_and_saturated():
    report = morse_index(cached_solve(cls="biradial", a=0.0, n=64), "full-via-modes", 4)
    assert report.total == 1 and report.saturated


def test_report_json_shape():
    d = cached_index(cls="biradial", a=0.0, n=64).to_dict()
    assert set(d) == {"class", "modes", "total", "saturated"}
    assert set(d["modes"][0]) == {"m1", "m2", "eigenvalues", "negatives"}


@pytest.mark.parametrize("nodes", [0, 1])
def test_sphere_eigenfields_follow_sturm_ordering(nodes):
    L = sphere_linearization(cached_nodal(nodes))
    pairs = negative_eigenpairs(L, 4)
    assert [_sign_changes(f.values) for _, f in pairs] == [0, 1, 2, 3]


@settings(max_examples=30, deadline=None)
@given(degree=st.integers(0, 6), dim=st.integers(2, 6))
def test_harmonic_multiplicity(degree, dim):
    # dimension of homogeneous harmonic polynomials of this degree in dim variables
    from math import comb

    expected = comb(degree + dim - 1, dim - 1) - (comb(degree + dim - 3, dim - 1) if degree >= 2 else 0)
    assert harmonic_multiplicity(degree, dim) == expected


def test_count_negative_treats_the_dilation_mode_as_zero(radial_a0):
    from hardysym.operators import assemble_linearized, dilation_generator

    L = assemble_linearized(radial_a0)
    vals, neg, zero = count_negative(L, symmetry=dilation_generator(radial_a0.scaled_field()))
    assert len(neg) == 1 and len(zero) == 1


def test_two_grid_index_is_reported():
    report = two_grid_morse_index(ProblemSpec(cls="biradial", n=64))
    assert report.two_grid == {32: 1, 64: 1}
    assert report.to_dict()["two_grid"] == {"32": 1, "64": 1}
