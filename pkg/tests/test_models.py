import math

import numpy as np
import pytest

from maynowak_lab.grid import GridSpec, build_grid, chemotactic_divergence, neumann_laplacian
from maynowak_lab.models import (
    ConversionKind,
    ConversionSpec,
    ModelError,
    ModelSpec,
    State,
    System,
    check_conversion,
    elliptic_signal,
    eval_f,
    homogeneous_equilibria,
    rhs_ks_parabolic_elliptic,
    rhs_ks_parabolic_parabolic,
    rhs_may_nowak_chemotaxis,
    rhs_may_nowak_ode,
    split_terms,
)

from . import oracles


def interval(cells=32):
    return build_grid(GridSpec.interval(1.0, cells))


class TestConversion:
    def test_saturated_alpha_one(self):
        assert eval_f(ConversionSpec.saturated(1.0), 1.0) == 0.5

    @pytest.mark.parametrize("kind", list(ConversionKind))
    def test_zero_maps_to_zero(self, kind):
        table = ((0.0, 0.0), (1.0, 1.0)) if kind is ConversionKind.CUSTOM else ()
        assert eval_f(ConversionSpec(kind, 0.7, table=table), 0.0) == 0.0

    def test_power_law(self):
        assert eval_f(ConversionSpec.power_law(0.5), 4.0) == 2.0

    def test_negative_argument_rejected(self):
        with pytest.raises(ModelError):
            eval_f(ConversionSpec.identity(), -0.1)

    def test_array_and_call(self):
        f = ConversionSpec.saturated(0.5)
        s = np.array([0.0, 1.0, 4.0])
        np.testing.assert_allclose(f(s), [0.0, 0.5, 4.0 / 3.0])

    def test_custom_interpolates_and_saturates(self):
        f = ConversionSpec(ConversionKind.CUSTOM, 1.0, table=((0, 0), (1, 2), (2, 3)))
        assert f(0.5) == 1.0
        assert f(5.0) == 3.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind="custom", table=((0, 0),)),
            dict(kind="custom", table=((0.1, 0), (1, 1))),
            dict(kind="custom", table=((0, 0), (1, -1))),
            dict(kind="saturated", alpha=math.nan),
            dict(kind="saturated", alpha=0.5, K_f=0.0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ModelError):
            ConversionSpec(**kwargs)

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0, 1.5, 1.9])
    def test_growth_bound(self, alpha):
        check_conversion(ConversionSpec.prototype(alpha))

    def test_growth_bound_violation(self):
        with pytest.raises(ModelError):
            check_conversion(ConversionSpec("power_law", 2.0, K_f=0.5))


class TestModelSpec:
    def test_defaults_are_normalized(self):
        spec = ModelSpec()
        assert spec.is_unit_normalized and spec.mass_identity_applies

    @pytest.mark.parametrize("field", ["D1", "d2", "r"])
    def test_positive_rates(self, field):
        with pytest.raises(ModelError):
            ModelSpec(**{field: 0.0})

    def test_negative_kappa(self):
        with pytest.raises(ModelError):
            ModelSpec(kappa=-1.0)

    def test_with_replaces(self):
        spec = ModelSpec().with_(kappa=3.0, system="ks_parabolic_elliptic")
        assert spec.kappa == 3.0 and spec.system is System.KS_PARABOLIC_ELLIPTIC
        assert not spec.system.has_w


def random_state(grid, seed=0, w=True):
    rng = np.random.default_rng(seed)
    fields = [rng.uniform(0.1, 2.0, grid.shape) for _ in range(3)]
    return State(0.0, fields[0], fields[1], fields[2] if w else None, grid)


class TestChemotaxisSystem:
    def test_infection_free_equilibrium(self):
        g = interval()
        for kappa in (0.5, 2.0):
            spec = ModelSpec(kappa=kappa, conversion=ConversionSpec.saturated(0.5))
            st = State(0.0, np.full(32, kappa), np.zeros(32), np.zeros(32), g)
            for d in rhs_may_nowak_chemotaxis(st, spec):
                assert np.max(np.abs(d)) < 1e-14

    def test_infected_equilibrium(self):
        g = interval()
        spec = ModelSpec(kappa=2.0, conversion=ConversionSpec.identity())
        st = State(0.0, np.ones(32), np.ones(32), np.ones(32), g)
        for d in rhs_may_nowak_chemotaxis(st, spec):
            assert np.max(np.abs(d)) < 1e-14

    @pytest.mark.parametrize("spec_grid", [GridSpec.interval(1.0, 40), GridSpec.rectangle(1, 1, (10, 12)), GridSpec.radial_disk(1, 30)])
    def test_discrete_mass_identity(self, spec_grid):
        g = build_grid(spec_grid)
        spec = ModelSpec(kappa=1.3, chi=2.0, d1=0.7, d2=1.4, conversion=ConversionSpec.saturated(0.6))
        for seed in range(5):
            st = random_state(g, seed)
            du, dv, _ = rhs_may_nowak_chemotaxis(st, spec)
            lhs = g.integrate(du + dv)
            rhs = -g.integrate(spec.d1 * st.u + spec.d2 * st.v) + spec.kappa * g.total_volume
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_pointwise_cancellation_of_conversion(self):
        g = interval()
        spec = ModelSpec(kappa=0.0, conversion=ConversionSpec.power_law(1.5))
        st = random_state(g, 7)
        # flat v and u make transport and diffusion vanish
        st = State(0.0, np.full(32, 1.7), np.full(32, 0.3), st.w, g)
        du, dv, _ = rhs_may_nowak_chemotaxis(st, spec)
        np.testing.assert_allclose(du + dv, -st.u - st.v, atol=1e-14)

    def test_split_terms_reassemble(self):
        g = interval()
        spec = ModelSpec(kappa=1.0, chi=0.5, conversion=ConversionSpec.saturated(0.5))
        st = random_state(g, 3)
        parts = split_terms(st, spec)
        du = parts["u"].diffusivity * neumann_laplacian(g, st.u) - parts["u"].decay * st.u + parts["u"].explicit
        np.testing.assert_allclose(du, rhs_may_nowak_chemotaxis(st, spec)[0], rtol=1e-14)

    def test_wrong_system(self):
        g = interval()
        with pytest.raises(ModelError):
            rhs_may_nowak_chemotaxis(random_state(g), ModelSpec(system="ks_parabolic_parabolic"))


class TestOde:
    def test_free_equilibrium(self):
        spec = ModelSpec(kappa=0.8)
        assert rhs_may_nowak_ode((0.8, 0, 0), spec) == (0.0, 0.0, 0.0)

    def test_infected_equilibrium(self):
        spec = ModelSpec(kappa=2.0, conversion=ConversionSpec.identity())
        assert rhs_may_nowak_ode((1, 1, 1), spec) == (0.0, 0.0, 0.0)

    def test_substitution(self):
        spec = ModelSpec(kappa=0.0, conversion=ConversionSpec.identity())
        assert rhs_may_nowak_ode((1, 1, 0), spec) == (-1.0, -1.0, 1.0)


class TestKellerSegel:
    def test_pp_constant_state(self):
        g = interval()
        spec = ModelSpec(system="ks_parabolic_parabolic", conversion=ConversionSpec.power_law(1.5))
        c = 1.7
        du, dv = rhs_ks_parabolic_parabolic(State(0.0, np.full(32, c), np.full(32, c**1.5), None, g), spec)
        assert np.max(np.abs(du)) == 0.0 and np.max(np.abs(dv)) < 1e-14

    def test_pp_conserves_u(self):
        g = interval(50)
        spec = ModelSpec(system="ks_parabolic_parabolic")
        st = random_state(g, 4, w=False)
        du, _ = rhs_ks_parabolic_parabolic(st, spec)
        assert abs(g.integrate(du)) < 1e-12 * g.integrate(np.abs(du))

    def test_pp_dv_against_naive_oracle(self):
        g = interval(64)
        x = g.centers[0]
        u = 1 + 0.1 * np.cos(math.pi * x)
        v = np.sin(2 * x)
        spec = ModelSpec(system="ks_parabolic_parabolic", conversion=ConversionSpec.saturated(0.5))
        _, dv = rhs_ks_parabolic_parabolic(State(0.0, u, v, None, g), spec)
        f = [ui / (1 + ui**0.5) for ui in u]
        expected = oracles.laplacian_1d(v, g.dx) - v + np.array(f)
        np.testing.assert_allclose(dv, expected, rtol=1e-12, atol=1e-10)
        du, _ = rhs_ks_parabolic_parabolic(State(0.0, u, v, None, g), spec)
        np.testing.assert_allclose(du, oracles.laplacian_1d(u, g.dx) + oracles.chemotaxis_1d(u, v, g.dx), rtol=1e-12, atol=1e-9)

    def test_pe_constant(self):
        g = build_grid(GridSpec.radial_disk(1.0, 40))
        du, v = rhs_ks_parabolic_elliptic(np.full(40, 2.0), ModelSpec(system="ks_parabolic_elliptic"), g)
        assert np.max(np.abs(v)) < 1e-14 and np.max(np.abs(du)) < 1e-12

    @pytest.mark.parametrize("spec_grid", [GridSpec.interval(1.0, 64), GridSpec.radial_disk(1.0, 64), GridSpec.rectangle(1, 1, (16, 16))])
    def test_pe_poisson_residual(self, spec_grid):
        g = build_grid(spec_grid)
        spec = ModelSpec(system="ks_parabolic_elliptic", conversion=ConversionSpec.power_law(1.5))
        u = np.random.default_rng(5).uniform(0, 3, g.shape)
        du, v = rhs_ks_parabolic_elliptic(u, spec, g)
        fu = u**1.5
        residual = neumann_laplacian(g, v) - (g.mean(fu) - fu)
        assert np.max(np.abs(residual)) <= 1e-10 * np.max(np.abs(fu))
        assert abs(g.integrate(du)) < 1e-11 * g.integrate(np.abs(du))
        np.testing.assert_allclose(v, elliptic_signal(g, u, spec))
        np.testing.assert_allclose(du, neumann_laplacian(g, u) + chemotactic_divergence(g, u, v))


class TestEquilibria:
    def test_identity_above_threshold(self):
        eq = homogeneous_equilibria(ModelSpec(kappa=2.0, conversion=ConversionSpec.identity()))
        assert len(eq) == 2
        assert eq[0] == (2.0, 0.0, 0.0)
        np.testing.assert_allclose(eq[1], (1, 1, 1), atol=1e-12)

    def test_identity_below_threshold(self):
        assert homogeneous_equilibria(ModelSpec(kappa=0.5, conversion=ConversionSpec.identity())) == [(0.5, 0.0, 0.0)]

    def test_saturated_root_against_bisection(self):
        u_star = oracles.bisect(lambda u: u - math.sqrt(u) - 1.0, 1.0, 4.0)
        assert u_star == pytest.approx((1 + math.sqrt(5)) ** 2 / 4, abs=1e-12)
        spec = ModelSpec(kappa=3.0, conversion=ConversionSpec.saturated(0.5))
        eq = homogeneous_equilibria(spec)
        assert len(eq) == 2
        assert eq[1][0] == pytest.approx(u_star, abs=1e-10)
        assert eq[1][1] == pytest.approx(3.0 - u_star, abs=1e-10)
        assert max(abs(r) for r in rhs_may_nowak_ode(eq[1], spec)) < 1e-10

    def test_general_rates(self):
        spec = ModelSpec(kappa=5.0, d1=2.0, d2=0.5, d3=2.0, r=3.0, conversion=ConversionSpec.power_law(0.5))
        for eq in homogeneous_equilibria(spec):
            assert max(abs(r) for r in rhs_may_nowak_ode(eq, spec)) < 1e-10

    def test_zero_kappa(self):
        assert homogeneous_equilibria(ModelSpec(kappa=0.0)) == [(0.0, 0.0, 0.0)]
