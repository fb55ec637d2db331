"""Killing equation for Finsler metrics and numerical Killing-space dimension.

The residual is the Lie derivative of the fundamental tensor,

    V^m d_m g_ab + g_al d_b V^l + g_lb d_a V^l + y^n (d_n V^m) dg_ab/dy^m,

which differs from the Riemannian expression by the last term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.stats import qmc

from . import jets
from .errors import ConfigurationError
from .geometry import FundamentalFunction
from .jets import EvalPoint

#: Singular values below this fraction of the largest count as null.
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class VectorField:
    """A ``y``-independent vector field ``V^mu(x)``.

    ``components`` are callables of the coordinate sequence, written with jet
    functions so their Jacobian can be taken exactly.
    """

    components: tuple
    label: str = ""

    def __init__(self, components: Sequence[Callable], label: str = ""):
        object.__setattr__(self, "components", tuple(components))
        object.__setattr__(self, "label", label)

    @property
    def dim(self):
        return len(self.components)

    def evaluate(self, x: Sequence[float]):
        """Values ``V^mu`` and Jacobian ``J[mu, nu] = dV^mu/dx^nu`` at ``x``."""
        d = len(x)
        space = jets.jet_space(d, 1)
        xs = space.variables(list(x))
        V = np.empty(d)
        J = np.zeros((d, d))
        for mu, comp in enumerate(self.components):
            out = comp(xs)
            if isinstance(out, jets.Jet):
                V[mu] = out.value
                for nu in range(d):
                    J[mu, nu] = out.partial(tuple(int(i == nu) for i in range(d)))
            else:
                V[mu] = float(out)
        return V, J

    def __add__(self, other):
        return VectorField([lambda x, a=a, b=b: a(x) + b(x) for a, b in zip(self.components, other.components)])

    def __rmul__(self, s):
        return VectorField([lambda x, a=a: s * a(x) for a in self.components])


def coordinate_field(dim: int, index: int, scale: float = 1.0) -> VectorField:
    """Constant field ``scale * d/dx^index``."""
    comps = [(lambda x, v=(scale if mu == index else 0.0): v) for mu in range(dim)]
    return VectorField(comps, f"d/dx{index}")


def metric_derivatives(F: FundamentalFunction, at: EvalPoint):
    """``g``, ``dg/dx`` and ``dg/dy`` at ``at``; derivative index last."""
    d = at.dim
    Lj = jets.expand(F, at, 3, 1)
    g = np.empty((d, d))
    dgx = np.empty((d, d, d))
    dgy = np.empty((d, d, d))
    for a in range(d):
        for b in range(d):
            gab = 0.5 * Lj.deriv(d + a).deriv(d + b)
            g[a, b] = gab.value
            for m in range(d):
                dgx[a, b, m] = gab.partial(tuple(int(i == m) for i in range(2 * d)))
                dgy[a, b, m] = gab.partial(tuple(int(i == d + m) for i in range(2 * d)))
    return g, dgx, dgy


def _lie_g(g, dgx, dgy, y, V, J):
    """Lie derivative of g for one or many fields (V: (..., d), J: (..., d, d))."""
    Jy = np.einsum("...mn,n->...m", J, y)
    return (
        np.einsum("...m,abm->...ab", V, dgx)
        + np.einsum("al,...lb->...ab", g, J)
        + np.einsum("lb,...la->...ab", g, J)
        + np.einsum("...m,abm->...ab", Jy, dgy)
    )


def killing_matrix(F: FundamentalFunction, V: VectorField, at) -> np.ndarray:
    """The full matrix of the Killing equation at ``at``."""
    at = at if isinstance(at, EvalPoint) else EvalPoint(*at)
    F.require_admissible(at)
    g, dgx, dgy = metric_derivatives(F, at)
    Vv, J = V.evaluate(at.x)
    return _lie_g(g, dgx, dgy, np.asarray(at.y), Vv, J)


def killing_residual(F: FundamentalFunction, V: VectorField, at) -> float:
    """Max-norm of the Killing equation; zero iff ``V`` is Killing at ``at``."""
    return float(np.max(np.abs(killing_matrix(F, V, at))))


# -- candidate family --------------------------------------------------------


@dataclass(frozen=True)
class ChartRegion:
    """Compact sampling region, away from poles and horizons."""

    t: tuple = (-1.0, 1.0)
    r: tuple = (3.0, 8.0)
    theta: tuple = (0.35, math.pi - 0.35)
    phi: tuple = (0.0, 2 * math.pi)


class CandidateFamily:
    """Separable polynomial/Fourier basis for Killing fields.

    ``V^t, V^r`` are Chebyshev polynomials of total degree ``<= degree`` in the
    scaled ``(t, r)``; ``V^theta, V^phi`` are ``T_p(cos theta) * {1, 1/sin theta}``
    times Fourier modes of order ``<= fourier`` in ``phi``.  The ``1/sin theta``
    factor carries the rotation generators of the round sphere.
    """

    def __init__(self, dim: int, region: ChartRegion = ChartRegion(), degree: int = 4, fourier: int = 2):
        if dim not in (2, 4):
            raise ConfigurationError("candidate families exist for 2-D sections and 4-D spacetimes")
        self.dim = dim
        self.region = region
        self.degree = degree
        self.fourier = fourier
        self.terms = []  # (component, kind, params)
        if dim == 4:
            for comp in (0, 1):
                for i in range(degree + 1):
                    for j in range(degree + 1 - i):
                        self.terms.append((comp, "tr", (i, j)))
        ang = (2, 3) if dim == 4 else (0, 1)
        for comp in ang:
            for p in range(degree + 1):
                for inv_sin in (0, 1):
                    for m in range(fourier + 1):
                        for trig in ((0,) if m == 0 else (0, 1)):
                            self.terms.append((comp, "ang", (p, inv_sin, m, trig)))

    def __len__(self):
        return len(self.terms)

    def _scaled(self, v, lo_hi):
        lo, hi = lo_hi
        return (2 * v - (lo + hi)) / (hi - lo), 2 / (hi - lo)

    def evaluate(self, x: Sequence[float]):
        """Values (A, d) and Jacobians (A, d, d) of every candidate at ``x``."""
        d = self.dim
        A = len(self.terms)
        V = np.zeros((A, d))
        J = np.zeros((A, d, d))
        ti, ri = (0, 1)
        thi, phi_i = (2, 3) if d == 4 else (0, 1)
        th, ph = x[thi], x[phi_i]
        c, s = math.cos(th), math.sin(th)
        uc = c  # cos(theta) already lies in [-1, 1]
        if d == 4:
            ut, st = self._scaled(x[ti], self.region.t)
            ur, sr = self._scaled(x[ri], self.region.r)
        for a, (comp, kind, params) in enumerate(self.terms):
            if kind == "tr":
                i, j = params
                ei = np.eye(i + 1)[i]
                ej = np.eye(j + 1)[j]
                Ti, Tj = cheb.chebval(ut, ei), cheb.chebval(ur, ej)
                dTi = cheb.chebval(ut, cheb.chebder(ei)) * st if i else 0.0
                dTj = cheb.chebval(ur, cheb.chebder(ej)) * sr if j else 0.0
                V[a, comp] = Ti * Tj
                J[a, comp, ti] = dTi * Tj
                J[a, comp, ri] = Ti * dTj
            else:
                p, inv_sin, m, trig = params
                ep = np.eye(p + 1)[p]
                P = cheb.chebval(uc, ep)
                dP = (cheb.chebval(uc, cheb.chebder(ep)) if p else 0.0) * (-s)
                if inv_sin:
                    P, dP = P / s, dP / s - P * c / s**2
                if trig == 0:
                    Fm, dFm = math.cos(m * ph), -m * math.sin(m * ph)
                else:
                    Fm, dFm = math.sin(m * ph), m * math.cos(m * ph)
                V[a, comp] = P * Fm
                J[a, comp, thi] = dP * Fm
                J[a, comp, phi_i] = P * dFm
        return V, J


def sample_points(F: FundamentalFunction, n: int, region: ChartRegion = ChartRegion(), seed: int = 0) -> list[EvalPoint]:
    """Quasi-random admissible points (Halton) in ``region`` with random ``y``."""
    d = F.dim
    sampler = qmc.Halton(d=2 * d, seed=seed)
    bounds = [region.t, region.r, region.theta, region.phi] if d == 4 else [region.theta, region.phi]
    out = []
    while len(out) < n:
        u = sampler.random(max(n - len(out), 8) * 2)
        for row in u:
            x = [lo + (hi - lo) * v for (lo, hi), v in zip(bounds, row[:d])]
            y = list(2 * row[d:] - 1)
            at = EvalPoint(x, y)
            if F.admissible(at):
                out.append(at)
                if len(out) == n:
                    break
    return out


@dataclass
class RankResult:
    rank: int
    singular_values: np.ndarray
    null_vectors: np.ndarray
    n_equations: int
    n_unknowns: int


def killing_system(F: FundamentalFunction, family: CandidateFamily, sample: Sequence[EvalPoint]) -> np.ndarray:
    """Linear map from candidate coefficients to stacked Killing equations."""
    d = F.dim
    iu = np.triu_indices(d)
    rows = []
    for at in sample:
        F.require_admissible(at)
        g, dgx, dgy = metric_derivatives(F, at)
        V, J = family.evaluate(at.x)
        E = _lie_g(g, dgx, dgy, np.asarray(at.y), V, J)  # (A, d, d)
        rows.append(E[:, iu[0], iu[1]].T)
    return np.vstack(rows)


def killing_rank(
    F: FundamentalFunction,
    family: CandidateFamily | None = None,
    sample: Sequence[EvalPoint] | None = None,
    rtol: float = RANK_RTOL,
    seed: int = 0,
    oversample: float = 10.0,
) -> RankResult:
    """Numerical dimension of the Killing space within ``family``.

    Columns are scaled by the size of each candidate field over the sample,
    and singular values below ``rtol * sigma_max`` count as null.
    """
    d = F.dim
    family = family or CandidateFamily(d)
    neq_per_point = d * (d + 1) // 2
    if sample is None:
        npts = math.ceil(oversample * len(family) / neq_per_point)
        sample = sample_points(F, npts, family.region, seed)
    n_eq = len(sample) * neq_per_point
    if n_eq < oversample * len(family):
        raise ConfigurationError(
            f"{n_eq} equations for {len(family)} unknowns; need at least {oversample:g}x"
        )
    M = killing_system(F, family, sample)
    scale = np.zeros(len(family))
    for at in sample:
        V, J = family.evaluate(at.x)
        scale = np.maximum(scale, np.abs(V).max(axis=1) + np.abs(J).max(axis=(1, 2)))
    M = M / scale
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    null = sv < rtol * sv[0]
    return RankResult(int(null.sum()), sv, vt[null] / scale, n_eq, len(family))
