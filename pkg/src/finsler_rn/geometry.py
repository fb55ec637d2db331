"""Pointwise Finsler tensor calculus built on the jet engine.

Everything is derived from the fundamental function ``L = F**2``; the Finsler
norm ``F`` itself is never formed, so Lorentzian signatures never take the
square root of a negative number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import jets
from .errors import DomainError, IntegrationError, SingularityError
from .jets import EvalPoint, Jet

#: |det g| below this is treated as a degenerate fundamental tensor.
DET_FLOOR = 1e-12
#: A direction is null when |L| <= NULL_GUARD * |y|^2.
NULL_GUARD = 1e-10


@dataclass(frozen=True)
class FundamentalFunction:
    """``L(x, y) = F(x, y)**2`` together with its admissible domain.

    ``L`` must be written with the functions of :mod:`finsler_rn.jets` so it
    can be evaluated on jets.  ``domain`` receives an :class:`EvalPoint` and
    returns False for points where ``L`` is not smooth or not defined.
    """

    L: Callable
    dim: int
    domain: Callable[[EvalPoint], bool] | None = None
    label: str = ""

    def __call__(self, x, y):
        return self.L(x, y)

    def admissible(self, at: EvalPoint) -> bool:
        return at.dim == self.dim and (self.domain is None or bool(self.domain(at)))

    def require_admissible(self, at: EvalPoint) -> None:
        if at.dim != self.dim:
            raise DomainError(f"{self.label or 'L'} is {self.dim}-dimensional, got a {at.dim}-D point")
        if self.domain is not None and not self.domain(at):
            raise DomainError(f"point {at} is outside the domain of {self.label or 'L'}")

    def value(self, at: EvalPoint) -> float:
        self.require_admissible(at)
        return float(self.L(list(at.x), list(at.y)))


class Metric(NamedTuple):
    g: np.ndarray
    g_inv: np.ndarray
    det: float


@dataclass
class CurvatureState:
    """All pointwise curvature data at one point ``(x, y)``."""

    L: float
    g: np.ndarray
    g_inv: np.ndarray
    spray: np.ndarray
    F2R: np.ndarray
    ric: float
    R_pred: np.ndarray
    ric_tensor: np.ndarray | None = None
    S: float | None = None
    einstein: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _point(at) -> EvalPoint:
    return at if isinstance(at, EvalPoint) else EvalPoint(*at)


def _y_hessian(jet: Jet, d: int) -> Jet:
    """Jet matrix 1/2 d^2 jet / dy^mu dy^nu (batch shape ``(d, d)``)."""
    first = [jet.deriv(d + mu) for mu in range(d)]
    return jets.stack([jets.stack([0.5 * f.deriv(d + nu) for nu in range(d)]) for f in first])


def _checked_inverse(g0: np.ndarray):
    det = float(np.linalg.det(g0))
    if not abs(det) > DET_FLOOR:
        raise SingularityError(f"degenerate metric, |det g| = {abs(det):.3e}", det=det)
    return np.linalg.inv(g0), det


def _inverse_jet(g: Jet) -> tuple[Jet, float]:
    """Jet of the inverse matrix by Newton iteration X <- X (2 - g X)."""
    d = g.shape[-1]
    inv0, det = _checked_inverse(g.value)
    X = g.space.constant(inv0)
    eye2 = 2.0 * np.eye(d)
    steps = math.ceil(math.log2(g.space.order + 1)) if g.space.order > 0 else 0
    for _ in range(steps):
        X = jets.matmul(X, eye2 - jets.matmul(g, X))
    return X, det


def _guard_null(L: float, y: Sequence[float]) -> None:
    if not abs(L) > NULL_GUARD * float(np.dot(y, y)):
        raise DomainError(f"null direction: L = {L:.3e} at y = {tuple(y)}")


def spray_jet(F: FundamentalFunction, at, order: int = 0, xorder: int | None = None):
    """Spray coefficients as jets carrying ``order`` derivatives (``xorder`` in x).

    Returns ``(G, g, g_inv, det, L)`` where ``G`` has batch shape ``(d,)``,
    ``g``/``g_inv`` have batch shape ``(d, d)`` and ``L`` is the expansion of
    the fundamental function used to build them.
    """
    at = _point(at)
    d = at.dim
    xorder = order if xorder is None else xorder
    Lj = jets.expand(F, at, order + 2, xorder + 1)
    g = _y_hessian(Lj, d)
    g_inv, det = _inverse_jet(g)

    dLy = [Lj.deriv(d + nu) for nu in range(d)]
    mixed = jets.stack([jets.stack([dLy[nu].deriv(lam) for lam in range(d)]) for nu in range(d)])
    dLx = jets.stack([Lj.deriv(nu) for nu in range(d)])
    y = jets.stack(mixed.space.variables(at.x + at.y)[d:])
    bracket = (mixed * y[None, :]).sum(1) - dLx
    G = 0.25 * (g_inv * bracket[None, :]).sum(1)
    return G, g, g_inv, det, Lj


def metric(F: FundamentalFunction, at) -> Metric:
    """``g_{mu nu} = 1/2 d^2 L / dy^mu dy^nu``, its inverse and determinant."""
    at = _point(at)
    Lj = jets.expand(F, at, 2, 0)
    g = _y_hessian(Lj, at.dim).value
    g = 0.5 * (g + g.T)
    g_inv, det = _checked_inverse(g)
    return Metric(g, g_inv, det)


def spray(F: FundamentalFunction, at) -> np.ndarray:
    """Geodesic spray coefficients ``G^mu`` at ``at``."""
    G = spray_jet(F, at, 0)[0]
    return np.asarray(G.value)


def _predecessor_jet(F: FundamentalFunction, at: EvalPoint, order: int, xorder: int):
    """Jet of ``F^2 R^mu_nu`` plus the spray data it was built from."""
    d = at.dim
    G, g, g_inv, det, Lj = spray_jet(F, at, order + 2, xorder + 1)
    target = jets.jet_space(2 * d, order, d, xorder)
    y = jets.stack(target.variables(at.x + at.y)[d:])

    dGdx = jets.stack([G.deriv(nu) for nu in range(d)], axis=-1)
    dGdy = jets.stack([G.deriv(d + lam) for lam in range(d)], axis=-1)
    dGdy_full = [G.deriv(d + lam) for lam in range(d)]
    dGdx_full = [G.deriv(lam) for lam in range(d)]
    # [mu, lam, nu]
    d2Gdxdy = jets.stack(
        [jets.stack([dGdx_full[lam].deriv(d + nu) for nu in range(d)], axis=-1) for lam in range(d)],
        axis=1,
    )
    d2Gdydy = jets.stack(
        [jets.stack([dGdy_full[lam].deriv(d + nu) for nu in range(d)], axis=-1) for lam in range(d)],
        axis=1,
    )
    F2R = (
        2.0 * dGdx
        - (d2Gdxdy * y[None, :, None]).sum(1)
        + 2.0 * (d2Gdydy * G[None, :, None]).sum(1)
        - jets.matmul(dGdy, dGdy)
    )
    return F2R.restrict(target), G, g, g_inv, det, Lj


def _state(F, at, order, xorder) -> tuple[CurvatureState, Jet, Jet]:
    at = _point(at)
    F2R, G, g, g_inv, det, Lj = _predecessor_jet(F, at, order, xorder)
    L = Lj.value
    _guard_null(L, at.y)
    F2R0 = np.asarray(F2R.value)
    g0 = np.asarray(g.value)
    state = CurvatureState(
        L=L,
        g=0.5 * (g0 + g0.T),
        g_inv=np.asarray(g_inv.value),
        spray=np.asarray(G.value),
        F2R=F2R0,
        ric=float(np.trace(F2R0)) / L,
        R_pred=F2R0 / L,
    )
    state.extra["det"] = det
    return state, F2R, Lj


def curvature_state(F: FundamentalFunction, at) -> CurvatureState:
    """Metric, spray, ``R^mu_nu`` and Ricci scalar (no Ricci tensor)."""
    return _state(F, at, 0, 0)[0]


def ricci_scalar(F: FundamentalFunction, at) -> float:
    """Finsler Ricci scalar ``Ric = R^mu_mu``; invariant under ``y -> lambda y``."""
    return curvature_state(F, at).ric


def curvature_predecessor(F: FundamentalFunction, at) -> np.ndarray:
    """``R^mu_nu`` with the ``F^2`` factor divided out."""
    return curvature_state(F, at).R_pred


def flag_residual(F: FundamentalFunction, at, K: float) -> float:
    """Max-norm of ``F^2 R^mu_nu - K (F^2 delta - y^mu/2 dF^2/dy^nu)``.

    Zero exactly when the predecessor has the constant-flag-curvature form
    with curvature ``K`` at this point.
    """
    at = _point(at)
    state, _, Lj = _state(F, at, 0, 0)
    d = at.dim
    dL = np.array([Lj.partial(tuple(int(i == d + nu) for i in range(2 * d))) for nu in range(d)])
    y = np.asarray(at.y)
    target = state.L * np.eye(d) - 0.5 * np.outer(y, dL)
    return float(np.max(np.abs(state.F2R - K * target)))


def einstein_tensor(F: FundamentalFunction, at) -> CurvatureState:
    """Full curvature state including the Ricci tensor ``1/2 d^2(F^2 Ric)/dy dy``,
    the scalar curvature ``S = g^{mu nu} Ric_{mu nu}`` and
    ``G_{mu nu} = Ric_{mu nu} - S g_{mu nu} / 2``.
    """
    at = _point(at)
    state, F2R, _ = _state(F, at, 2, 0)
    d = at.dim
    F2Ric = F2R[0, 0]
    for mu in range(1, d):
        F2Ric = F2Ric + F2R[mu, mu]
    ric_tensor = np.asarray(_y_hessian(F2Ric, d).value)
    ric_tensor = 0.5 * (ric_tensor + ric_tensor.T)
    S = float(np.einsum("ij,ij->", state.g_inv, ric_tensor))
    state.ric_tensor = ric_tensor
    state.S = S
    state.einstein = ric_tensor - 0.5 * S * state.g
    return state


def energy_momentum(einstein: np.ndarray, newton_G: float = 1.0, four_pi_F: float = 4 * math.pi) -> np.ndarray:
    """Source tensor from the field equation ``G_{mu nu} = 8 pi_F G T_{mu nu}``.

    ``four_pi_F`` is the volume of the two-dimensional section.
    """
    return np.asarray(einstein) / (2.0 * four_pi_F * newton_G)


# -- geodesics ---------------------------------------------------------------


def spray_values(F: FundamentalFunction, x, y) -> np.ndarray:
    """Spray coefficients for a batch of points.

    ``x`` and ``y`` are arrays of shape ``(d,)`` or ``(d, N)``; the result has
    the same shape.  Used by the geodesic integrator, so it skips the
    admissibility check (callers verify states themselves).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[0]
    space = jets.jet_space(2 * d, 2, d, 1)
    v = space.variables(list(x) + list(y))
    Lj = F(v[:d], v[d:])
    c = Lj.c
    idx = space.index

    def e(*pairs):
        a = [0] * (2 * d)
        for i in pairs:
            a[i] += 1
        return idx[tuple(a)], space.factorial[idx[tuple(a)]]

    batch = c.shape[:-1]
    g = np.empty(batch + (d, d))
    mixed = np.empty(batch + (d, d))
    dLx = np.empty(batch + (d,))
    for mu in range(d):
        k, f = e(mu)
        dLx[..., mu] = c[..., k] * f
        for nu in range(d):
            k, f = e(d + mu, d + nu)
            g[..., mu, nu] = 0.5 * c[..., k] * f
            k, f = e(d + mu, nu)
            mixed[..., mu, nu] = c[..., k] * f
    ymat = np.moveaxis(y, 0, -1)
    bracket = np.einsum("...nl,...l->...n", mixed, ymat) - dLx
    G = 0.25 * np.linalg.solve(g, bracket[..., None])[..., 0]
    return np.moveaxis(G, -1, 0)


@dataclass
class Trajectory:
    """Sampled geodesic with dense output."""

    tau: np.ndarray
    x: np.ndarray  # (N, d)
    y: np.ndarray  # (N, d)
    L: np.ndarray
    status: str = "ok"
    _spline: CubicHermiteSpline | None = None

    def __call__(self, tau):
        """Interpolated ``(x, y)`` state at affine parameter ``tau``."""
        return self._spline(tau)

    @property
    def drift(self) -> float:
        """max |L(tau) - L(0)| / |L(0)| over the samples."""
        return float(np.max(np.abs(self.L - self.L[0])) / abs(self.L[0]))


def _make_trajectory(F, tau, X, d, status="ok"):
    x, y = X[:d].T, X[d:].T
    Lvals = np.asarray(F(list(X[:d]), list(X[d:])), dtype=float)
    if tau.size >= 2:
        acc = -2.0 * spray_values(F, X[:d], X[d:])
        deriv = np.concatenate([X[d:], acc]).T
        spline = CubicHermiteSpline(tau, X.T, deriv)
    else:
        spline = None
    return Trajectory(tau, x, y, Lvals, status, spline)


def integrate_geodesics(
    F: FundamentalFunction,
    initials: Sequence[EvalPoint],
    span: float,
    tol: float = 1e-10,
    method: str = "DOP853",
    max_speed: float = 1e8,
) -> list[Trajectory]:
    """Integrate several geodesics ``x'' = -2 G(x, x')`` in one adaptive run.

    All trajectories share the step sequence, so the batch is as expensive
    as its stiffest member but the spray is evaluated once per stage for all
    of them.  The run stops early when a coordinate velocity grows past
    ``max_speed`` times its initial size (a coordinate horizon is near).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pts = [_point(p) for p in initials]
    for p in pts:
        F.require_admissible(p)
    d = F.dim
    n = len(pts)
    x0 = np.array([p.x for p in pts]).T
    y0 = np.array([p.y for p in pts]).T
    state0 = np.concatenate([x0, y0]).ravel()
    scale = np.maximum(np.abs(state0), 1.0)

    def rhs(_, s):
        s = s.reshape(2 * d, n)
        try:
            acc = -2.0 * spray_values(F, s[:d], s[d:])
        except (DomainError, np.linalg.LinAlgError) as exc:
            raise _Abort(str(exc))
        return np.concatenate([s[d:], acc]).ravel()

    speed_cap = max_speed * max(float(np.abs(y0).max()), 1.0)

    def runaway(_, s):
        return speed_cap - np.abs(s.reshape(2 * d, n)[d:]).max()

    runaway.terminal = True

    try:
        sol = solve_ivp(rhs, (0.0, span), state0, method=method, rtol=tol, atol=tol * scale, events=runaway)
    except _Abort as exc:
        raise IntegrationError(f"spray evaluation left the domain: {exc}") from None
    states = sol.y.reshape(2 * d, n, -1)
    trajs = [_make_trajectory(F, sol.t, states[:, i, :], d) for i in range(n)]
    if sol.status == 1:
        for t in trajs:
            t.status = "failed"
        raise IntegrationError(f"coordinate velocity exceeded {speed_cap:.3g} at tau={sol.t[-1]:.6g}", partial=trajs)
    if sol.status != 0:
        for t in trajs:
            t.status = "failed"
        raise IntegrationError(f"integration stopped at tau={sol.t[-1]:.6g}: {sol.message}", partial=trajs)
    return trajs


class _Abort(Exception):
    pass


def integrate_geodesic(F: FundamentalFunction, initial, span: float, tol: float = 1e-10) -> Trajectory:
    """Integrate one geodesic from ``initial`` over affine length ``span``."""
    try:
        return integrate_geodesics(F, [initial], span, tol)[0]
    except IntegrationError as exc:
        if exc.partial:
            exc.partial = exc.partial[0]
        raise
