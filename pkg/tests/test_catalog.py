import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from finsler_rn import catalog, geometry, spectral
from finsler_rn.catalog import RadialProfile, TwoDBase
from finsler_rn.errors import ConfigurationError
from finsler_rn.jets import EvalPoint

RNG = np.random.default_rng(11)


def test_profiles_evaluate_closed_forms():
    r = 5.0
    assert_allclose(RadialProfile.schwarzschild(2.0).f(r), 1 - 4.0 / r)
    assert_allclose(RadialProfile.schwarzschild_de_sitter(1.0, 0.01).f(r), 1 - 2 / r - 0.01 * r * r)
    assert_allclose(RadialProfile.reissner_nordstrom(1.0, 0.5).f(r), 1 - 2 / r + 0.5 / r**2)
    assert_allclose(RadialProfile.de_sitter(0.05).f(r), 1 - 0.05 * r * r)


@pytest.mark.parametrize(
    "profile",
    [RadialProfile.schwarzschild(1.5), RadialProfile.schwarzschild_de_sitter(1.0, 0.02), RadialProfile.reissner_nordstrom(1.0, 0.7)],
)
def test_profile_derivatives_match_differences(profile):
    r, h = 4.3, 1e-4
    assert_allclose(profile.df(r), (profile.f(r + h) - profile.f(r - h)) / (2 * h), rtol=1e-8)
    assert_allclose(profile.d2f(r), (profile.f(r + h) - 2 * profile.f(r) + profile.f(r - h)) / h**2, rtol=1e-6)


def test_horizons():
    assert_allclose(RadialProfile.schwarzschild(1.0).horizons(), [2.0])
    q = 0.5
    assert_allclose(RadialProfile.reissner_nordstrom(1.0, q).horizons(), [1 - math.sqrt(1 - q), 1 + math.sqrt(1 - q)])
    assert_allclose(RadialProfile.de_sitter(0.04).horizons(), [5.0])


def test_profile_parameter_validation():
    with pytest.raises(ConfigurationError):
        RadialProfile("schwarzschild", GM=1.0, b=0.1)
    with pytest.raises(ConfigurationError):
        RadialProfile("reissner_nordstrom", GM=1.0, Q2_term=-0.1)
    with pytest.raises(ConfigurationError):
        RadialProfile("schwarzschild", k=2)
    with pytest.raises(ConfigurationError):
        RadialProfile("kerr")


def test_curvature_mismatch_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        catalog.build_ansatz(RadialProfile.schwarzschild(1.0, k=0), TwoDBase("finsler_sphere", 0.3))
    catalog.build_ansatz(RadialProfile.schwarzschild(1.0, k=-1), TwoDBase("hyperbolic"))


def test_randers_base_reduces_to_round_sphere():
    a, b = TwoDBase("finsler_sphere", 0.0), TwoDBase("riemann_sphere")
    for args in [(1.0, 0.0, 0.3, 0.4), (2.5, 1.0, -1.0, 2.0)]:
        assert_allclose(a.Lbar(*args), b.Lbar(*args), rtol=1e-15)


def test_randers_base_is_not_reversible():
    base = TwoDBase("finsler_sphere", 0.5)
    assert not math.isclose(base.Lbar(1.0, 0.0, 0.2, 0.7), base.Lbar(1.0, 0.0, -0.2, -0.7))


def test_base_admissibility():
    base = TwoDBase("finsler_sphere", 0.3)
    assert base.admissible(1.0, 0.2, 0.1)
    assert not base.admissible(0.0, 0.2, 0.1)
    assert not base.admissible(1.0, 0.0, 0.0)
    assert TwoDBase("riemann_sphere").admissible(1.0, 0.0, 0.0)


def test_horizon_margin_excludes_points():
    profile = RadialProfile.schwarzschild(1.0)
    F = catalog.build_ansatz(profile, TwoDBase("riemann_sphere"), horizon_margin=0.01)
    assert not F.admissible(EvalPoint((0, 2.001, 1, 0), (1, 0, 0, 0)))
    assert F.admissible(EvalPoint((0, 3.0, 1, 0), (1, 0, 0, 0)))


def _point(F):
    while True:
        at = EvalPoint([0.0, RNG.uniform(3, 8), RNG.uniform(0.4, 2.7), RNG.uniform(0, 6)], RNG.uniform(-1, 1, 4))
        if F.admissible(at):
            return at


CASES = [
    (RadialProfile.schwarzschild(1.0), TwoDBase("finsler_sphere", 0.3)),
    (RadialProfile.schwarzschild_de_sitter(1.0, 0.01), TwoDBase("finsler_sphere", 0.5)),
    (RadialProfile.reissner_nordstrom(1.0, 0.5), TwoDBase("finsler_sphere", 0.3)),
    (RadialProfile.schwarzschild(1.0, k=-1), TwoDBase("hyperbolic")),
    (RadialProfile.schwarzschild(1.0, k=0), TwoDBase("flat")),
]


@pytest.mark.parametrize("profile, base", CASES)
def test_closed_forms_agree_with_jet_pipeline(profile, base):
    F = catalog.build_ansatz(profile, base)
    for _ in range(3):
        at = _point(F)
        state = geometry.curvature_state(F, at)
        assert_allclose(state.spray, catalog.oracle_spray(profile, base, at), rtol=1e-12, atol=1e-14)
        assert_allclose(state.ric * state.L, catalog.oracle_F2ricci(profile, base, at), rtol=1e-9, atol=1e-13)
        for (mu, nu), v in catalog.oracle_predecessor(profile, base, at).items():
            assert_allclose(state.F2R[mu, nu], v, rtol=1e-9, atol=1e-13)


def test_charged_form_of_ricci_scalar():
    profile, base = CASES[2]
    F = catalog.build_ansatz(profile, base)
    at = _point(F)
    assert_allclose(catalog.oracle_rn_F2ricci(profile, base, at), catalog.oracle_F2ricci(profile, base, at), rtol=1e-12)


def test_energy_momentum_default_normalization_is_ht_volume():
    profile, base = CASES[2]
    at = _point(catalog.build_ansatz(profile, base))
    explicit = catalog.oracle_energy_momentum(profile, base, at, four_pi_F=spectral.ht_volume(0.3))
    assert_allclose(catalog.oracle_energy_momentum(profile, base, at), explicit, rtol=1e-15)


def test_finsler_de_sitter_constant_ricci():
    F = catalog.finsler_de_sitter(0.05, 0.3)
    at = EvalPoint((0.0, 2.0, 1.0, 0.5), (1.0, 0.2, 0.3, -0.1))
    assert_allclose(geometry.ricci_scalar(F, at), 0.15, rtol=1e-10)
    assert "de_sitter" in F.label


def test_riemannian_oracle_rejects_custom_profiles():
    custom = RadialProfile("custom", custom=(lambda r: 1 - 2 / r, lambda r: 2 / r**2, lambda r: -4 / r**3))
    with pytest.raises(ConfigurationError):
        catalog.RiemannianOracle(custom)


def test_custom_profile_drives_the_ansatz():
    custom = RadialProfile("custom", custom=(lambda r: 1 - 2 / r, lambda r: 2 / r**2, lambda r: -4 / r**3))
    base = TwoDBase("finsler_sphere", 0.3)
    F = catalog.build_ansatz(custom, base)
    ref = catalog.build_ansatz(RadialProfile.schwarzschild(1.0), base)
    at = _point(F)
    assert_allclose(geometry.spray(F, at), geometry.spray(ref, at), rtol=1e-14)
