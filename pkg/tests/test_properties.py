"""Property-based checks of the structural invariants."""

import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maynowak_lab.config import OutputOptions, RunConfig, config_from_dict, config_to_dict
from maynowak_lab.diagnostics import DiagnosticsRow, classify, rows_from_csv, rows_to_csv
from maynowak_lab.experiments import RunSetup
from maynowak_lab.grid import (
    GridSpec,
    build_grid,
    chemotactic_divergence,
    grad_norm_lq,
    neumann_laplacian,
)
from maynowak_lab.initial_data import InitialData
from maynowak_lab.linalg import solve_neumann_poisson, solve_shifted_laplacian
from maynowak_lab.models import ConversionSpec, ModelSpec, State, eval_f
from maynowak_lab.stepper import StepperConfig, Termination, TerminationKind, step_imex

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
positive = st.floats(0.0, 1e2, allow_nan=False, allow_infinity=False)


@st.composite
def grids(draw):
    kind = draw(st.sampled_from(["interval", "rectangle", "radial_disk"]))
    if kind == "rectangle":
        cells = (draw(st.integers(4, 12)), draw(st.integers(4, 12)))
        lengths = (draw(st.floats(0.2, 5.0)), draw(st.floats(0.2, 5.0)))
    else:
        cells = (draw(st.integers(4, 60)),)
        lengths = (draw(st.floats(0.2, 5.0)),)
    return build_grid(GridSpec(kind, lengths, cells))


@st.composite
def grid_and_fields(draw, count=2, elements=finite):
    g = draw(grids())
    return (g,) + tuple(draw(arrays(float, g.shape, elements=elements)) for _ in range(count))


def scale(g, x):
    return 1e-300 + float(np.sum(np.abs(x) * g.cell_volumes))


@given(grid_and_fields(count=1))
def test_laplacian_conserves(data):
    g, f = data
    lap = neumann_laplacian(g, f)
    assert abs(g.integrate(lap)) <= 1e-10 * scale(g, lap)


@given(grid_and_fields(count=2, elements=positive))
def test_chemotaxis_conserves(data):
    g, u, v = data
    d = chemotactic_divergence(g, u, v)
    assert abs(g.integrate(d)) <= 1e-10 * scale(g, d)


@given(grid_and_fields(count=2))
def test_laplacian_is_self_adjoint(data):
    g, f, h = data
    left = g.integrate(f * neumann_laplacian(g, h))
    right = g.integrate(h * neumann_laplacian(g, f))
    bound = 1e-9 * (1 + scale(g, f * neumann_laplacian(g, h)) + scale(g, h * neumann_laplacian(g, f)))
    assert abs(left - right) <= bound


@given(st.integers(4, 50), arrays(float, 50, elements=positive), arrays(float, 50, elements=finite))
def test_mirror_symmetry(n, u, v):
    g = build_grid(GridSpec.interval(1.0, n))
    u, v = u[:n], v[:n]
    np.testing.assert_allclose(neumann_laplacian(g, v[::-1]), neumann_laplacian(g, v)[::-1], rtol=1e-12, atol=1e-6)
    np.testing.assert_allclose(
        chemotactic_divergence(g, u[::-1], v[::-1]), chemotactic_divergence(g, u, v)[::-1], rtol=1e-12, atol=1e-3
    )


@given(grid_and_fields(count=1, elements=positive), st.floats(1e-4, 10.0), st.floats(0.0, 5.0))
def test_implicit_solve_is_positive_and_conservative(data, coeff, decay):
    g, f = data
    x = solve_shifted_laplacian(g, f, coeff, decay)
    assert np.min(x) >= -1e-12 * (1 + np.max(f))
    total = g.integrate(f)
    assert math.isclose(g.integrate(x), total / (1 + decay), rel_tol=1e-9, abs_tol=1e-9 * (1 + total))


@given(grid_and_fields(count=1, elements=st.floats(0.0, 10.0)))
def test_poisson_zero_mean_and_residual(data):
    g, f = data
    rhs = f - g.mean(f)
    v = solve_neumann_poisson(g, rhs)
    assert abs(g.mean(v)) <= 1e-10 * (1 + np.max(np.abs(v)))
    assert np.max(np.abs(neumann_laplacian(g, v) - rhs)) <= 1e-8 * (1 + np.max(np.abs(f)))


@given(grid_and_fields(count=1), st.floats(-10, 10), st.floats(1.0, 6.0))
def test_gradient_norm_homogeneous(data, c, q):
    g, v = data
    base = grad_norm_lq(g, v, q)
    assert math.isclose(grad_norm_lq(g, c * v, q), abs(c) * base, rel_tol=1e-9, abs_tol=1e-9)


@given(st.floats(0.05, 1.99), st.floats(1.0, 1e4))
def test_prototype_growth_bound(alpha, s):
    assert eval_f(ConversionSpec.prototype(alpha), s) <= s**alpha * (1 + 1e-12)


@given(st.floats(0.05, 1.99), st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_prototype_is_monotone(alpha, a, b):
    f = ConversionSpec.prototype(alpha)
    lo, hi = sorted((a, b))
    assert eval_f(f, lo) <= eval_f(f, hi) * (1 + 1e-12) + 1e-300


@given(
    st.integers(0, 2**32 - 1),
    st.floats(0.0, 3.0),
    st.floats(0.0, 3.0),
    st.floats(0.2, 1.9),
    st.sampled_from(["interval", "radial_disk"]),
)
def test_step_keeps_positivity_and_mass_identity(seed, kappa, chi, alpha, geometry):
    g = build_grid(GridSpec(geometry, (1.0,), (24,)))
    spec = ModelSpec(kappa=kappa, chi=chi, conversion=ConversionSpec.prototype(alpha))
    rng = np.random.default_rng(seed)
    fields = [rng.uniform(0.0, 3.0, 24) for _ in range(3)]
    state = State(0.0, *fields, g)
    out = step_imex(state, spec, StepperConfig(dt_init=1e-2))
    new = out.state
    sup = max(float(np.max(np.abs(x))) for x in new.fields().values())
    for x in new.fields().values():
        assert np.min(x) >= -1e-12 * (1 + sup)
    z0 = g.integrate(state.u + state.v)
    z1 = g.integrate(new.u + new.v)
    dt = out.dt_used
    expected = (z0 + dt * kappa * g.total_volume) / (1 + dt)
    assert math.isclose(z1, expected, rel_tol=1e-10, abs_tol=1e-12)


def _rows(values):
    ts = np.linspace(0.0, 10.0, len(values))
    return [DiagnosticsRow(t, 0.1, 1.0, 1.0, 1.0, x, 1.0, 1.0, None, None) for t, x in zip(ts, values)]


@given(st.lists(st.floats(1e-3, 1e3), min_size=10, max_size=60), st.floats(1e-3, 1e3))
def test_classification_is_scale_invariant(values, c):
    reached = Termination(TerminationKind.REACHED_T_END, 10.0)
    a = classify(_rows(values), reached).classification
    b = classify(_rows([c * x for x in values]), reached).classification
    assert a is b


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_csv_roundtrip_is_exact(values):
    rows = [DiagnosticsRow(*(x,) * 10) for x in values]
    back = rows_from_csv(rows_to_csv(rows))
    assert [r.t for r in back] == values


@given(
    st.floats(0.0, 5.0),
    st.floats(0.05, 1.9),
    st.integers(4, 500),
    st.floats(0.1, 100.0),
    st.integers(0, 10**6),
    st.booleans(),
)
def test_config_roundtrip(kappa, alpha, cells, t_end, seed, snapshots):
    setup = RunSetup(
        ModelSpec(kappa=kappa, conversion=ConversionSpec.prototype(alpha)),
        GridSpec.interval(1.0, cells),
        StepperConfig(t_end=t_end),
        InitialData(),
        seed,
    )
    cfg = RunConfig(setup, OutputOptions(snapshots=snapshots))
    assert config_from_dict(config_to_dict(cfg)) == cfg
