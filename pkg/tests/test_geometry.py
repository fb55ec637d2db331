import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from finsler_rn import catalog, geometry, jets
from finsler_rn.errors import DomainError, IntegrationError, SingularityError
from finsler_rn.geometry import FundamentalFunction
from finsler_rn.jets import EvalPoint

RNG = np.random.default_rng(7)


def _rn(base_kind="riemann_sphere", eps=0.0):
    profile = catalog.RadialProfile.reissner_nordstrom(1.0, 0.5)
    base = catalog.TwoDBase(base_kind, eps)
    return profile, base, catalog.build_ansatz(profile, base)


def _random_point(F, r=(3.0, 8.0)):
    while True:
        at = EvalPoint(
            [RNG.uniform(-1, 1), RNG.uniform(*r), RNG.uniform(0.4, 2.7), RNG.uniform(0, 6)],
            RNG.uniform(-1, 1, 4),
        )
        if F.admissible(at):
            return at


def test_metric_of_quadratic_ansatz_is_textbook():
    profile, _, F = _rn()
    at = _random_point(F)
    r, th = at.x[1], at.x[2]
    f = profile.f(r)
    m = geometry.metric(F, at)
    assert_allclose(m.g, np.diag([-f, 1 / f, r * r, (r * math.sin(th)) ** 2]), rtol=1e-14, atol=1e-14)
    assert_allclose(m.g @ m.g_inv, np.eye(4), atol=1e-13)
    assert_allclose(m.det, np.linalg.det(m.g), rtol=1e-12)


def test_spray_and_curvature_match_riemannian_oracle():
    profile, _, F = _rn()
    oracle = catalog.RiemannianOracle(profile)
    for _ in range(5):
        at = _random_point(F)
        state = geometry.curvature_state(F, at)
        x, y = list(at.x), np.asarray(at.y)
        assert_allclose(state.spray, oracle.spray(x, y), rtol=1e-12, atol=1e-14)
        assert_allclose(state.F2R, oracle.F2R(x, y), rtol=1e-10, atol=1e-13)
        assert_allclose(state.ric, oracle.ricci_scalar(x, y), rtol=1e-9, atol=1e-13)


def test_spray_is_two_homogeneous_and_ricci_scale_invariant():
    _, _, F = _rn("finsler_sphere", 0.4)
    at = _random_point(F)
    for lam in (0.5, 3.0):
        assert_allclose(geometry.spray(F, at.scaled(lam)), lam**2 * geometry.spray(F, at), rtol=1e-12)
        assert_allclose(geometry.ricci_scalar(F, at.scaled(lam)), geometry.ricci_scalar(F, at), rtol=1e-10, atol=1e-14)
        assert_allclose(geometry.curvature_predecessor(F, at.scaled(lam)), geometry.curvature_predecessor(F, at), rtol=1e-10, atol=1e-14)


def test_two_dimensional_spray_matches_symbolic_base():
    base = catalog.TwoDBase("finsler_sphere", 0.5)
    F = base.fundamental()
    for th, ph, yt, yp in [(1.0, 0.2, 0.3, -0.4), (2.1, 4.0, -1.0, 0.5), (0.6, 1.0, 0.0, 1.0)]:
        assert_allclose(geometry.spray(F, EvalPoint((th, ph), (yt, yp))), base.ref_spray(th, ph, yt, yp), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5, 0.7])
def test_randers_sphere_has_unit_flag_curvature(eps):
    F = catalog.TwoDBase("finsler_sphere", eps).fundamental()
    at = EvalPoint((1.2, 0.4), (0.6, -0.3))
    assert geometry.flag_residual(F, at, 1.0) < 1e-12
    assert_allclose(geometry.ricci_scalar(F, at), 1.0, rtol=1e-12)
    assert geometry.flag_residual(F, at, 0.9) > 1e-3


def test_degenerate_metric_is_reported():
    F = FundamentalFunction(lambda x, y: y[0] * y[0], 2, label="degenerate")
    with pytest.raises(SingularityError) as info:
        geometry.metric(F, EvalPoint((0.0, 0.0), (1.0, 1.0)))
    assert info.value.det == 0.0


def test_null_direction_is_rejected_for_curvature():
    F = FundamentalFunction(lambda x, y: -y[0] * y[0] + y[1] * y[1], 2, label="minkowski")
    at = EvalPoint((0.0, 0.0), (1.0, 1.0))
    geometry.metric(F, at)  # the metric itself is fine on the light cone
    with pytest.raises(DomainError):
        geometry.ricci_scalar(F, at)


def test_inadmissible_point_raises():
    _, _, F = _rn()
    with pytest.raises(DomainError):
        geometry.spray(F, EvalPoint((0, -1.0, 1.0, 0.0), (1, 0, 0, 0)))


def test_einstein_tensor_of_charged_solution():
    profile, base, F = _rn("finsler_sphere", 0.3)
    at = _random_point(F)
    state = geometry.einstein_tensor(F, at)
    assert abs(state.S) < 1e-12
    assert_allclose(state.einstein, catalog.oracle_einstein(profile, base, at), rtol=1e-9, atol=1e-14)
    assert_allclose(state.ric_tensor, state.ric_tensor.T, atol=0)


def test_energy_momentum_matches_charge_closed_form():
    profile, base, F = _rn("finsler_sphere", 0.3)
    at = _random_point(F)
    four_pi = 4 * math.pi / (1 - 0.3**2)
    T = geometry.energy_momentum(geometry.einstein_tensor(F, at).einstein, 1.0, four_pi)
    assert_allclose(T, catalog.oracle_energy_momentum(profile, base, at, 1.0, four_pi), rtol=1e-9, atol=1e-15)


def test_flat_geodesic_is_a_straight_line():
    F = FundamentalFunction(lambda x, y: y[0] * y[0] + y[1] * y[1], 2)
    traj = geometry.integrate_geodesic(F, EvalPoint((0.0, 1.0), (0.5, -0.25)), 4.0)
    assert_allclose(traj.x[-1], [2.0, 0.0], atol=1e-12)
    assert_allclose(traj(2.0)[:2], [1.0, 0.5], atol=1e-12)


def test_circular_orbit_keeps_radius_and_norm():
    profile = catalog.RadialProfile.schwarzschild(1.0)
    base = catalog.TwoDBase("finsler_sphere", 0.3)
    F = catalog.build_ansatz(profile, base)
    r = 10.0
    w = math.sqrt(1 / (r**3 * (1 - 3 / r))) / math.sqrt(base.Lbar(math.pi / 2, 0.0, 0.0, 1.0))
    y = [0.0, 0.0, 0.0, w]
    y[0] = math.sqrt((1 + F([0, r, math.pi / 2, 0], y)) / profile.f(r))
    traj = geometry.integrate_geodesic(F, EvalPoint((0, r, math.pi / 2, 0), y), 50.0)
    assert_allclose(traj.x[:, 1], r, rtol=1e-9)
    assert traj.drift < 1e-10
    assert_allclose(traj.L[0], -1.0, rtol=1e-12)


def test_plunging_orbit_stops_with_partial_trajectory():
    profile = catalog.RadialProfile.schwarzschild(1.0)
    F = catalog.build_ansatz(profile, catalog.TwoDBase("riemann_sphere", 0.0))
    r = 6.0
    y = [0.0, -0.5, 0.0, 0.0]
    y[0] = math.sqrt((1 + F([0, r, 1.5, 0], y)) / profile.f(r))
    with pytest.raises(IntegrationError) as info:
        geometry.integrate_geodesic(F, EvalPoint((0, r, 1.5, 0), y), 100.0)
    partial = info.value.partial
    assert partial.status == "failed"
    assert partial.x[-1, 1] < 2.5


def test_batched_geodesics_match_single_runs():
    profile = catalog.RadialProfile.reissner_nordstrom(1.0, 0.5)
    base = catalog.TwoDBase("finsler_sphere", 0.3)
    F = catalog.build_ansatz(profile, base)
    initials = []
    for r, ph in [(9.0, 0.3), (11.0, 2.0)]:
        y = [0.0, 0.01, 0.001, 0.03]
        y[0] = math.sqrt((1 + F([0, r, 1.5, ph], y)) / profile.f(r))
        initials.append(EvalPoint((0, r, 1.5, ph), y))
    batch = geometry.integrate_geodesics(F, initials, 20.0, tol=1e-11)
    for at, traj in zip(initials, batch):
        single = geometry.integrate_geodesic(F, at, 20.0, tol=1e-11)
        assert_allclose(traj(20.0), single(20.0), rtol=1e-7)


def test_spray_values_batch_agrees_with_jet_spray():
    _, _, F = _rn("finsler_sphere", 0.3)
    pts = [_random_point(F) for _ in range(4)]
    x = np.array([p.x for p in pts]).T
    y = np.array([p.y for p in pts]).T
    batch = geometry.spray_values(F, x, y)
    for i, p in enumerate(pts):
        assert_allclose(batch[:, i], geometry.spray(F, p), rtol=1e-12, atol=1e-15)


def test_spray_matches_finite_difference_definition():
    _, _, F = _rn("finsler_sphere", 0.3)
    at = _random_point(F)
    d = 4
    g = geometry.metric(F, at).g
    bracket = np.array([
        sum(jets.richardson_partial(F, at, tuple(int(i == lam) + int(i == d + nu) for i in range(8)), 1e-2, 3) * at.y[lam] for lam in range(d))
        - jets.richardson_partial(F, at, tuple(int(i == nu) for i in range(8)), 1e-2, 3)
        for nu in range(d)
    ])
    assert_allclose(geometry.spray(F, at), 0.25 * np.linalg.solve(g, bracket), rtol=1e-6, atol=1e-9)
