import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardysym.errors import ConvergenceError, ParameterError, StalenessError
from hardysym.grids import Field
from hardysym.operators import dilation_generator
from hardysym.solve import (
    ProblemSpec,
    Solution,
    best_constant,
    ensure_converged,
    initial_guess,
    minimize_quotient,
    orbit_fit,
    refine_newton,
    solve,
    symmetry_breaking_criterion,
)
from conftest import cached_solve
from oracles import talenti_profile, talenti_quotient


def test_radial_minimum_matches_talenti_quotient(radial_a0):
    assert abs(radial_a0.Q / talenti_quotient(4) - 1) <= 1e-3


def test_biradial_minimum_equals_radial_at_a0(radial_a0):
    q = cached_solve(cls="biradial", a=0.0, n=128).Q
    assert abs(q / radial_a0.Q - 1) <= 1e-3


def test_equivariant_m1_above_m0_and_above_shifted_radial():
    q1 = cached_solve(cls="biradial-equivariant", m=1, a=0.0, n=64).Q
    q0 = cached_solve(cls="biradial", a=0.0, n=64).Q
    shifted = cached_solve(cls="radial", a=-1.0).Q
    assert q1 > q0
    assert q1 >= shifted


@pytest.mark.parametrize("a", [0.0, -1.0, -3.0])
def test_equivariant_ordering(a):
    q1 = cached_solve(cls="biradial-equivariant", m=1, a=a, n=64).Q
    q0 = cached_solve(cls="biradial", a=a, n=64).Q
    assert q1 > q0


def test_minimizers_are_normalized_and_nonnegative(radial_a0, biradial_a0_64):
    for sol in (radial_a0, biradial_a0_64):
        assert sol.field.critical_mass() == pytest.approx(1.0, rel=1e-12)
        assert sol.diagnostics["min_value"] >= 0
        assert sol.Q > 0
        assert sol.residual <= sol.spec.newton_tol


def test_newton_from_talenti_start():
    spec = ProblemSpec(n=1024)
    g = spec.grid()
    u = Field(g, talenti_profile(g.nodes))
    start = Solution(spec, u, 0.0, orbit_fit(u).residual)
    out = refine_newton(start)
    assert out.newton_steps <= 10
    assert out.residual <= 1e-9


def test_newton_is_idempotent_at_a_fixed_point(radial_a0):
    again = refine_newton(radial_a0)
    assert again.newton_steps == radial_a0.newton_steps
    assert np.array_equal(again.field.values, radial_a0.field.values)
    assert again.Q == radial_a0.Q


def test_newton_rejects_noise_start():
    spec = ProblemSpec(n=256)
    g = spec.grid()
    u = Field(g, np.random.default_rng(0).standard_normal(g.shape))
    with pytest.raises(ConvergenceError):
        refine_newton(Solution(spec, u, 0.0, orbit_fit(u).residual))


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-6, 1e6), a=st.floats(-3, 0.5))
def test_orbit_fit_is_scale_invariant(scale, a):
    g = ProblemSpec(n=256).grid()
    u = Field(g, talenti_profile(g.nodes) * (1 + 0.3 * np.sin(np.log(g.nodes))))
    f, h = orbit_fit(u, a), orbit_fit(u * scale, a)
    assert h.residual == pytest.approx(f.residual, rel=1e-9)
    assert h.drift == pytest.approx(f.drift, rel=1e-9)
    assert h.multiplier == pytest.approx(f.multiplier * scale ** (2 - 4), rel=1e-9)


def test_drift_is_reported_apart(radial_a0):
    # on the truncated box the dilation force stays; it lives in the drift
    assert radial_a0.diagnostics["dilation_drift"] < 1e-5
    assert radial_a0.diagnostics["full_residual"] >= radial_a0.residual


def test_dilation_generator_is_the_scaling_tangent(radial_a0):
    # d/dt t^((N-2)/2) u(t x) at t = 1
    g = radial_a0.field.grid
    u = Field(g, talenti_profile(g.nodes))
    z = dilation_generator(u)
    r = g.nodes
    exact = talenti_profile(r) * (1 - r**2) / (1 + r**2)
    inside = (r > 1e-2) & (r < 1e2)
    assert np.max(np.abs(z - exact)[inside]) <= 1e-4


def test_best_constant_is_deterministic():
    assert best_constant("radial", -1.0, n=256) == best_constant("radial", -1.0, n=256)


def test_best_constant_decreases_in_a():
    values = [best_constant("radial", a, n=512) for a in (-1.0, 0.0, 0.5, 0.9, 0.99)]
    assert all(x > y for x, y in zip(values, values[1:]))
    assert values[-1] < 0.1 * values[1]


@pytest.mark.parametrize("args,expected", [
    ((4, 0.0, 0, 1), (1.0, 1.0, False)),
    ((4, -3.0, 0, 2), (4.0, math.sqrt(2.0), True)),
    ((4, -3.0, 1, 4), (5.0, 2.0, True)),
])
def test_breaking_criterion_examples(args, expected):
    chk = symmetry_breaking_criterion(*args)
    assert chk.lhs == pytest.approx(expected[0], rel=1e-15)
    assert chk.rhs == pytest.approx(expected[1], rel=1e-15)
    assert chk.breaks is expected[2]


@settings(max_examples=50, deadline=None)
@given(N=st.integers(3, 8), a=st.floats(-10, 0.2), m=st.integers(0, 3), k=st.integers(1, 6))
def test_breaking_criterion_formula(N, a, m, k):
    chk = symmetry_breaking_criterion(N, a, m, k)
    assert chk.lhs == pytest.approx(1 + 4 * (m * m - a) / (N - 2) ** 2)
    assert chk.breaks == (chk.lhs > chk.rhs)


def test_breaking_criterion_rejects_bad_k():
    with pytest.raises(ParameterError):
        symmetry_breaking_criterion(4, 0.0, 0, 0)


@pytest.mark.parametrize("scale", [1e-6, 3.0, 1e5])
def test_minimizer_ignores_initial_scale(scale):
    spec = ProblemSpec(a=-1.0, n=512)
    u = initial_guess(spec, spec.grid())
    q = minimize_quotient(spec, u).Q
    assert abs(minimize_quotient(spec, u * scale).Q / q - 1) <= 1e-12


@pytest.mark.parametrize("kw", [dict(cls="radial", a=0.0), dict(cls="biradial", a=-3.0, n=32),
                                dict(cls="biradial-equivariant", m=1, n=32)])
def test_flow_never_increases_q(kw):
    sol = minimize_quotient(ProblemSpec(**kw))
    qs = [h["Q"] for h in sol.history]
    assert all(b <= a * (1 + 1e-15) for a, b in zip(qs, qs[1:]))


@pytest.mark.parametrize("kw", [
    dict(a=1.0), dict(a=1.5), dict(cls="spherical"), dict(m=-1, cls="biradial-equivariant"),
    dict(m=1), dict(cls="biradial", k=1), dict(r_min=2.0, r_max=1.0),
])
def test_invalid_specs(kw):
    with pytest.raises(ParameterError):
        ProblemSpec(**kw)


def test_flow_budget_exhaustion_carries_last_iterate():
    spec = ProblemSpec(cls="biradial", a=-3.0, n=32, max_iter=2)
    with pytest.raises(ConvergenceError) as info:
        minimize_quotient(spec)
    last = info.value.last
    assert last is not None and last.iterations == 2 and last.residual > spec.flow_tol


def test_unconverged_solution_is_stale(radial_a0):
    bad = Solution(radial_a0.spec, radial_a0.field, radial_a0.Q, 1.0)
    assert not bad.converged
    with pytest.raises(StalenessError):
        ensure_converged(bad)


def test_initial_grid_mismatch():
    spec = ProblemSpec(n=64)
    with pytest.raises(ParameterError):
        minimize_quotient(spec, initial_guess(spec, spec.with_n(32).grid()))


def test_result_record_shape(biradial_a0_64):
    rec = biradial_a0_64.to_dict()
    assert set(rec) == {"spec", "Q", "residual", "iterations", "grid", "diagnostics"}
    assert rec["grid"]["kind"] == "biradial" and rec["grid"]["n"] == 64


def test_solve_is_deterministic():
    a = solve(ProblemSpec(cls="biradial", n=32))
    b = solve(ProblemSpec(cls="biradial", n=32))
    assert np.array_equal(a.field.values, b.field.values)
