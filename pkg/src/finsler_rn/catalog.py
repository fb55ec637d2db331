"""Static Finsler spacetimes of the form

    L = -f(r) (y^t)^2 + (y^r)^2 / f(r) + r^2 Lbar(theta, phi, y^theta, y^phi)

and closed-form reference values for their spray and curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _symbolic, jets
from .errors import ConfigurationError, DomainError
from .geometry import FundamentalFunction, energy_momentum
from .jets import EvalPoint

PROFILE_KINDS = ("schwarzschild", "schwarzschild_de_sitter", "reissner_nordstrom", "de_sitter", "custom")
BASE_KINDS = ("riemann_sphere", "finsler_sphere", "hyperbolic", "flat")
BASE_CURVATURE = {"riemann_sphere": 1, "finsler_sphere": 1, "hyperbolic": -1, "flat": 0}

# parameters each profile kind may carry besides k
_ALLOWED = {
    "schwarzschild": {"GM"},
    "schwarzschild_de_sitter": {"GM", "b"},
    "reissner_nordstrom": {"GM", "Q2_term"},
    "de_sitter": {"b"},
    "custom": set(),
}


@dataclass(frozen=True)
class RadialProfile:
    """Lapse ``f(r) = k - 2GM/r - b r^2 + Q2_term / r^2`` restricted by ``kind``.

    ``Q2_term`` is the combination ``4 pi_F G Q^2``.  A ``custom`` profile
    supplies ``f``, ``df`` and ``d2f`` callables (written with jet functions).
    """

    kind: str = "schwarzschild"
    k: int = 1
    GM: float = 0.0
    b: float = 0.0
    Q2_term: float = 0.0
    custom: tuple[Callable, Callable, Callable] | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}")
        if self.k not in (-1, 0, 1):
            raise ConfigurationError(f"k must be -1, 0 or 1, got {self.k}")
        if self.GM < 0 or self.Q2_term < 0:
            raise ConfigurationError("GM and Q2_term must be non-negative")
        used = {"GM": self.GM, "b": self.b, "Q2_term": self.Q2_term}
        extra = [n for n, v in used.items() if v != 0 and n not in _ALLOWED[self.kind]]
        if extra:
            raise ConfigurationError(f"profile {self.kind!r} does not take {', '.join(extra)}")
        if self.kind == "custom" and self.custom is None:
            raise ConfigurationError("custom profile needs (f, df, d2f) callables")

    @classmethod
    def schwarzschild(cls, GM=1.0, k=1):
        return cls("schwarzschild", k, GM=GM)

    @classmethod
    def schwarzschild_de_sitter(cls, GM=1.0, b=0.01, k=1):
        return cls("schwarzschild_de_sitter", k, GM=GM, b=b)

    @classmethod
    def reissner_nordstrom(cls, GM=1.0, Q2_term=0.5, k=1):
        return cls("reissner_nordstrom", k, GM=GM, Q2_term=Q2_term)

    @classmethod
    def de_sitter(cls, b=0.05, k=1):
        return cls("de_sitter", k, b=b)

    def f(self, r):
        if self.custom is not None:
            return self.custom[0](r)
        return self.k - 2 * self.GM / r - self.b * r * r + self.Q2_term / (r * r)

    def df(self, r):
        if self.custom is not None:
            return self.custom[1](r)
        return 2 * self.GM / r**2 - 2 * self.b * r - 2 * self.Q2_term / r**3

    def d2f(self, r):
        if self.custom is not None:
            return self.custom[2](r)
        return -4 * self.GM / r**3 - 2 * self.b + 6 * self.Q2_term / r**4

    def horizons(self, r_max: float = 1e3) -> list[float]:
        """Positive roots of ``f`` (numerically, for the closed-form kinds)."""
        # r^2 f = -b r^4 + k r^2 - 2GM r + Q2
        roots = np.roots([-self.b, 0.0, self.k, -2 * self.GM, self.Q2_term])
        return sorted(float(z.real) for z in roots if abs(z.imag) < 1e-12 and 0 < z.real < r_max)


@dataclass(frozen=True)
class TwoDBase:
    """Two-dimensional section ``Lbar`` in coordinates ``(theta, phi)``."""

    kind: str = "riemann_sphere"
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ConfigurationError(f"unknown base kind {self.kind!r}")
        if not 0 <= self.eps < 1:
            raise ConfigurationError(f"eps must lie in [0, 1), got {self.eps}")
        if self.kind != "finsler_sphere" and self.eps != 0:
            raise ConfigurationError(f"{self.kind} base takes no eps")

    @property
    def k(self) -> int:
        return BASE_CURVATURE[self.kind]

    def randers_root(self, theta, y_theta, y_phi):
        s2 = jets.sin(theta) ** 2
        return (1 - self.eps**2 * s2) * y_theta * y_theta + s2 * y_phi * y_phi

    def Lbar(self, theta, phi, y_theta, y_phi):
        if self.kind == "finsler_sphere":
            s2 = jets.sin(theta) ** 2
            a = 1 - self.eps**2 * s2
            F = (jets.sqrt(a * y_theta * y_theta + s2 * y_phi * y_phi) - self.eps * s2 * y_phi) / a
            return F * F
        if self.kind == "riemann_sphere":
            return y_theta * y_theta + jets.sin(theta) ** 2 * y_phi * y_phi
        if self.kind == "hyperbolic":
            return y_theta * y_theta + jets.sinh(theta) ** 2 * y_phi * y_phi
        return y_theta * y_theta + y_phi * y_phi

    def chart_ok(self, theta) -> bool:
        if self.kind in ("riemann_sphere", "finsler_sphere"):
            return 0 < theta < math.pi
        if self.kind == "hyperbolic":
            return theta > 0
        return True

    def admissible(self, theta, y_theta, y_phi) -> bool:
        """Chart interior, and a strictly positive root term for the Randers base."""
        if not self.chart_ok(theta):
            return False
        if self.kind == "finsler_sphere":
            return bool(self.randers_root(theta, y_theta, y_phi) > 0)
        return True

    def fundamental(self) -> FundamentalFunction:
        """The base itself as a two-dimensional Finsler space."""

        def L(x, y):
            return self.Lbar(x[0], x[1], y[0], y[1])

        def domain(at):
            return self.admissible(at.x[0], at.y[0], at.y[1])

        label = f"{self.kind}(eps={self.eps})" if self.kind == "finsler_sphere" else self.kind
        return FundamentalFunction(L, 2, domain, label)

    # independent symbolic reference data
    def _sym(self):
        return _symbolic.base_functions(self.kind)

    def ref_L(self, theta, phi, y_theta, y_phi) -> float:
        return float(self._sym()[0](theta, phi, y_theta, y_phi, self.eps))

    def ref_grad(self, theta, phi, y_theta, y_phi) -> np.ndarray:
        return _symbolic.as_array(self._sym()[1](theta, phi, y_theta, y_phi, self.eps))

    def ref_metric(self, theta, phi, y_theta, y_phi) -> np.ndarray:
        return _symbolic.as_array(self._sym()[2](theta, phi, y_theta, y_phi, self.eps))

    def ref_spray(self, theta, phi, y_theta, y_phi) -> np.ndarray:
        return _symbolic.as_array(self._sym()[3](theta, phi, y_theta, y_phi, self.eps))


def build_ansatz(profile: RadialProfile, base: TwoDBase, horizon_margin: float = 0.0) -> FundamentalFunction:
    """Four-dimensional static spacetime with lapse ``f`` and section ``base``.

    Points with ``|f| <= horizon_margin`` (and ``f = 0``) are inadmissible.
    """
    if profile.kind != "custom" and profile.k != base.k:
        raise ConfigurationError(
            f"profile curvature k={profile.k} does not match {base.kind} (k={base.k})"
        )

    def L(x, y):
        r = x[1]
        f = profile.f(r)
        return -f * y[0] * y[0] + y[1] * y[1] / f + r * r * base.Lbar(x[2], x[3], y[2], y[3])

    def domain(at):
        r = at.x[1]
        if not r > 0:
            return False
        if not abs(profile.f(r)) > horizon_margin:
            return False
        return base.admissible(at.x[2], at.y[2], at.y[3])

    label = f"{profile.kind}+{base.kind}"
    if base.kind == "finsler_sphere":
        label += f"(eps={base.eps})"
    return FundamentalFunction(L, 4, domain, label)


def finsler_de_sitter(b: float = 0.05, eps: float = 0.3) -> FundamentalFunction:
    """``F_d^2 = -(1 - b r^2) y^t y^t + y^r y^r / (1 - b r^2) + r^2 F_FS^2``."""
    return build_ansatz(RadialProfile.de_sitter(b), TwoDBase("finsler_sphere", eps))


# -- closed-form references --------------------------------------------------


def _split(at: EvalPoint):
    if at.dim != 4:
        raise ValueError("closed forms apply to four-dimensional points")
    (t, r, th, ph), (yt, yr, yth, yph) = at.x, at.y
    return r, th, ph, yt, yr, yth, yph


def oracle_spray(profile: RadialProfile, base: TwoDBase, at: EvalPoint) -> np.ndarray:
    """Spray of the ansatz from its closed form.

    The section spray comes from an independent symbolic derivation.  The
    ``Lbar`` term of ``G^r`` carries the coefficient ``r f / 2``.
    """
    r, th, ph, yt, yr, yth, yph = _split(at)
    f, fp = profile.f(r), profile.df(r)
    Lb = base.ref_L(th, ph, yth, yph)
    Gb = base.ref_spray(th, ph, yth, yph)
    return np.array(
        [
            fp / (2 * f) * yt * yr,
            -fp / (4 * f) * yr * yr + f * fp / 4 * yt * yt - r * f / 2 * Lb,
            yth * yr / r + Gb[0],
            yph * yr / r + Gb[1],
        ]
    )


def oracle_F2ricci(profile: RadialProfile, base: TwoDBase, at: EvalPoint, base_ric: float | None = None) -> float:
    """``F^2 Ric`` from the reduced ansatz formula (section Ricci scalar ``k``)."""
    r, th, ph, yt, yr, yth, yph = _split(at)
    f, fp, fpp = profile.f(r), profile.df(r), profile.d2f(r)
    ric_bar = base.k if base_ric is None else base_ric
    Lb = base.ref_L(th, ph, yth, yph)
    return (
        (f * fpp / 2 + f * fp / r) * yt * yt
        + (-fpp / (2 * f) - fp / (r * f)) * yr * yr
        + (ric_bar - f - r * fp) * Lb
    )


def _L_ref(profile, base, at):
    r, th, ph, yt, yr, yth, yph = _split(at)
    f = profile.f(r)
    return -f * yt * yt + yr * yr / f + r * r * base.ref_L(th, ph, yth, yph)


def oracle_ricci(profile: RadialProfile, base: TwoDBase, at: EvalPoint) -> float:
    """Ricci scalar from the reduced ansatz formula, divided by ``F^2``."""
    L = _L_ref(profile, base, at)
    if not abs(L) > 1e-10 * float(np.dot(at.y, at.y)):
        raise DomainError("null direction")
    return oracle_F2ricci(profile, base, at) / L


def oracle_rn_F2ricci(profile: RadialProfile, base: TwoDBase, at: EvalPoint) -> float:
    """Charged-solution form ``(Q2/r^4)(f yt^2 - yr^2/f + r^2 Lbar)``."""
    r, th, ph, yt, yr, yth, yph = _split(at)
    f = profile.f(r)
    Lb = base.ref_L(th, ph, yth, yph)
    return profile.Q2_term / r**4 * (f * yt * yt - yr * yr / f + r * r * Lb)


def oracle_predecessor(profile: RadialProfile, base: TwoDBase, at: EvalPoint) -> dict:
    """Closed-form components of ``F^2 R^mu_nu`` keyed by index pair.

    Covers (t,t), (t,r), (t,i), (r,r), (r,i) and (i,j); the section is assumed
    to have constant flag curvature ``k``.
    """
    r, th, ph, yt, yr, yth, yph = _split(at)
    f, fp, fpp = profile.f(r), profile.df(r), profile.d2f(r)
    Lb = base.ref_L(th, ph, yth, yph)
    dLb = base.ref_grad(th, ph, yth, yph)
    ybar = np.array([yth, yph])
    F2Rbar = base.k * (Lb * np.eye(2) - 0.5 * np.outer(ybar, dLb))
    out = {
        (0, 0): -fpp / (2 * f) * yr * yr - r * fp / 2 * Lb,
        (0, 1): fpp / (2 * f) * yt * yr,
        (1, 1): f * fpp / 2 * yt * yt - r * fp / 2 * Lb,
    }
    for i in range(2):
        out[(0, 2 + i)] = r * fp / 4 * yt * dLb[i]
        out[(1, 2 + i)] = r * fp / 4 * yr * dLb[i]
    diag = f * fp / (2 * r) * yt * yt - fp / (2 * r * f) * yr * yr - f * Lb
    for i in range(2):
        for j in range(2):
            out[(2 + i, 2 + j)] = F2Rbar[i, j] + diag * (i == j) + f / 2 * ybar[i] * dLb[j]
    return out


def oracle_einstein(profile: RadialProfile, base: TwoDBase, at: EvalPoint) -> np.ndarray:
    """``Ric_{mu nu} = G_{mu nu} = (Q2/r^4) diag(f, -1/f, r^2 gbar_ij)``."""
    r, th, ph, yt, yr, yth, yph = _split(at)
    f = profile.f(r)
    out = np.zeros((4, 4))
    out[0, 0] = f
    out[1, 1] = -1 / f
    out[2:, 2:] = r * r * base.ref_metric(th, ph, yth, yph)
    return profile.Q2_term / r**4 * out


def oracle_energy_momentum(profile: RadialProfile, base: TwoDBase, at: EvalPoint, newton_G=1.0, four_pi_F=None) -> np.ndarray:
    """``T_{mu nu} = Q^2/(2 r^4) diag(f, -1/f, r^2 gbar_ij)`` with ``Q^2 = Q2_term / (4 pi_F G)``."""
    if four_pi_F is None:
        from .spectral import ht_volume

        four_pi_F = ht_volume(base.eps) if base.kind == "finsler_sphere" else 4 * math.pi
    r = at.x[1]
    Q2 = profile.Q2_term / (four_pi_F * newton_G)
    shape = oracle_einstein(profile, base, at) * r**4 / profile.Q2_term if profile.Q2_term else None
    if shape is None:
        return np.zeros((4, 4))
    return Q2 / (2 * r**4) * shape


class RiemannianOracle:
    """Textbook curvature of the Riemannian metric with the same lapse.

    Only meaningful for Riemannian bases (``eps = 0``).  Provides the
    quantities the Finsler pipeline must reproduce when ``L`` is quadratic.
    """

    def __init__(self, profile: RadialProfile):
        if profile.kind == "custom":
            raise ConfigurationError("textbook oracle needs a closed-form profile")
        self.profile = profile
        self._g, self._gam, self._riem, self._ric, self._scal = _symbolic.riemannian_rn(profile.k)

    def _args(self, x):
        p = self.profile
        return (*x, p.GM, p.b, p.Q2_term)

    def metric(self, x) -> np.ndarray:
        return _symbolic.as_array(self._g(*self._args(x)))

    def spray(self, x, y) -> np.ndarray:
        gam = _symbolic.as_array(self._gam(*self._args(x)))
        return 0.5 * np.einsum("abc,b,c->a", gam, y, y)

    def F2R(self, x, y) -> np.ndarray:
        riem = _symbolic.as_array(self._riem(*self._args(x)))
        return np.einsum("mapb,a,b->mp", riem, y, y)

    def ricci_tensor(self, x) -> np.ndarray:
        return _symbolic.as_array(self._ric(*self._args(x)))

    def scalar(self, x) -> float:
        return float(self._scal(*self._args(x)))

    def einstein(self, x) -> np.ndarray:
        return self.ricci_tensor(x) - 0.5 * self.scalar(x) * self.metric(x)

    def ricci_scalar(self, x, y) -> float:
        L = float(np.einsum("ab,a,b->", self.metric(x), y, y))
        return float(np.einsum("ab,a,b->", self.ricci_tensor(x), y, y)) / L


__all__ = [
    "RadialProfile",
    "TwoDBase",
    "build_ansatz",
    "finsler_de_sitter",
    "oracle_spray",
    "oracle_ricci",
    "oracle_F2ricci",
    "oracle_rn_F2ricci",
    "oracle_predecessor",
    "oracle_einstein",
    "oracle_energy_momentum",
    "RiemannianOracle",
    "energy_momentum",
]
