import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardysym.errors import ExtrapolationError, GridMismatchError, ParameterError
from hardysym.grids import Field, SphereGrid, SplitDims, build_biradial_grid, build_radial_grid
from hardysym.sphere import (
    SphereProblem,
    conformal_laplacian_check,
    critical_power,
    shoot_nodal_solution,
    sphere_constant_solution,
    sphere_mass,
    sphere_morse_index,
    stereographic_transport,
    transported_mass,
)
from hardysym.symmetry import radiality_defect
from conftest import cached_nodal
from oracles import talenti_profile

SPHERE = SphereGrid(SplitDims(4, 2, sphere=True), 2048)


def test_constant_n4():
    assert sphere_constant_solution(4) == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_constant_n3():
    assert sphere_constant_solution(3) == pytest.approx(0.75**0.25, abs=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5, 6, 8])
def test_constant_solves_the_equation(N):
    c = sphere_constant_solution(N)
    p = 2 * N / (N - 2)
    assert abs(N * (N - 2) / 4 * c - critical_power(c, p)) <= 1e-12


@pytest.mark.parametrize("N", [2, 3.5])
def test_constant_rejects_bad_dimension(N):
    with pytest.raises(ParameterError):
        sphere_constant_solution(N)


def test_shooting_without_nodes_recovers_the_constant():
    sol = shoot_nodal_solution(SphereProblem(4, 2, 2048), 0)
    assert abs(sol.s - math.sqrt(2.0)) <= 1e-6
    assert np.max(np.abs(sol.field.values - sol.s)) <= 1e-6


def test_first_nodal_solution(sphere_constant, sphere_v1):
    assert sphere_v1.nodes == 1
    assert np.sum(np.diff(np.sign(sphere_v1.field.values)) != 0) == 1
    assert sphere_v1.mass > sphere_constant.mass
    assert max(sphere_v1.boundary_residuals.values()) <= 1e-5


def test_split_one_is_rejected():
    with pytest.raises(ParameterError):
        SphereProblem(4, 1)


def test_constant_and_zero_indices(sphere_constant):
    prob = SphereProblem(4, 2, 512)
    assert sphere_constant.index == 1
    assert sphere_morse_index(Field.constant(prob.grid, 0.0), prob) == 0


def test_transported_constant_is_talenti():
    c = Field.constant(SPHERE, sphere_constant_solution(4))
    rg = build_radial_grid(4, 1e-3, 1e3, 64)
    u = stereographic_transport(c, "to_plane", rg)
    assert np.max(np.abs(u.values - talenti_profile(rg.nodes))) <= 1e-6
    bg = build_biradial_grid(4, 2, 1e-3, 1e3, 32)
    ub = stereographic_transport(c, "to_plane", bg)
    assert np.max(np.abs(ub.values - talenti_profile(bg.radius))) <= 1e-6


def test_zero_transports_to_zero():
    u = stereographic_transport(Field.constant(SPHERE, 0.0), "to_plane", build_biradial_grid(4, 2, 1e-3, 1e3, 32))
    assert not np.any(u.values)
    assert conformal_laplacian_check(None, u) == 0.0


def test_nonconstant_field_has_no_radial_image(sphere_v1):
    with pytest.raises(GridMismatchError):
        stereographic_transport(sphere_v1.field, "to_plane", build_radial_grid(4, 1e-3, 1e3, 32))


def test_transport_round_trip(sphere_v1):
    u = stereographic_transport(sphere_v1.field, "to_plane", build_biradial_grid(4, 2, 1e-3, 1e3, 256))
    back = stereographic_transport(u, "to_sphere", SphereGrid(SplitDims(4, 2, sphere=True), 512))
    assert np.max(np.abs(back.values - sphere_v1.on_grid(512).values)) <= 1e-3 * sphere_v1.s


def test_to_sphere_needs_unit_sphere_inside():
    u = Field.constant(build_biradial_grid(4, 2, 2.0, 1e3, 16))
    with pytest.raises(ExtrapolationError):
        stereographic_transport(u, "to_sphere")


def test_bad_direction():
    with pytest.raises(ParameterError):
        stereographic_transport(Field.constant(SPHERE), "sideways")


@pytest.mark.parametrize("nodes", [0, 1])
def test_mass_is_conserved_for_solutions(nodes):
    v = cached_nodal(nodes).field
    assert abs(transported_mass(v) / sphere_mass(v) - 1) <= 1e-4


@settings(max_examples=3, deadline=None)
@given(coef=st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda c: max(map(abs, c)) > 0.1))
def test_mass_is_conserved_for_smooth_fields(coef):
    # even cosines in psi are smooth at both ends of the latitude interval
    psi = SPHERE.nodes
    v = Field(SPHERE, sum(c * np.cos(2 * j * psi) for j, c in enumerate(coef)))
    assert abs(transported_mass(v) / sphere_mass(v) - 1) <= 1e-4


def test_conformal_residual_of_talenti_is_second_order():
    c = Field.constant(SPHERE, sphere_constant_solution(4))
    res = [conformal_laplacian_check(c, stereographic_transport(c, "to_plane", build_biradial_grid(4, 2, 1e-3, 1e3, n)))
           for n in (64, 128, 256)]
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert min(orders) >= 1.9


def test_conformal_residual_of_non_solution_stays():
    v = Field(SPHERE, SPHERE.nodes.copy())
    res = [conformal_laplacian_check(v, stereographic_transport(v, "to_plane", build_biradial_grid(4, 2, 1e-3, 1e3, n)))
           for n in (64, 128, 256)]
    assert min(res) >= 1.0


def test_transported_nodal_solution_is_non_radial(sphere_v1):
    u = stereographic_transport(sphere_v1.field, "to_plane", build_biradial_grid(4, 2, 1e-3, 1e3, 128))
    assert radiality_defect(u) > 0.1


def test_nodal_masses_increase():
    masses = [cached_nodal(k).mass for k in range(4)]
    assert all(a < b for a, b in zip(masses, masses[1:]))
    assert [cached_nodal(k).nodes for k in range(4)] == [0, 1, 2, 3]


def test_nodal_indices_are_at_least_two():
    assert all(cached_nodal(k).index >= 2 for k in (1, 2, 3))


def test_shooting_is_deterministic(sphere_v1):
    again = shoot_nodal_solution(SphereProblem(4, 2, 2048), 1)
    assert again.s == sphere_v1.s


def test_node_count_bounds():
    with pytest.raises(ParameterError):
        shoot_nodal_solution(SphereProblem(4, 2, 256), 5)


def test_json_shape(sphere_v1):
    d = json.loads(sphere_v1.to_json())
    assert set(d) == {"N", "split", "nodes", "s", "mass", "index", "boundary_residuals"}
    assert d["split"] == [2, 3]
