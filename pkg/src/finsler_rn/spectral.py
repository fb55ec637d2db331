"""Laplacian of the Randers ("Finslerian") sphere and its spectrum.

The operator acting on ``Y(theta, phi)`` is

    Delta = A(theta) d^2/dphi^2 + B(theta) d^2/dtheta^2 + C(theta) d/dtheta

with ``w = sqrt(1 - eps^2 sin^2 theta)`` and

    A = 2 w^3 / (sin^2 theta (1 + w)),   B = 2 w^2 / (1 + w),
    C = 2 cos theta (eps^2 sin^2 theta + w) / (sin theta (1 + w)).

Harmonics ``Y_l^m = Theta_l^m(theta) e^{i m phi}`` are orthonormal on the round
sphere and carry the Condon-Shortley phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, DomainError

#: Modes within this many shells of ``l_max`` are not reported.
TRUNCATION_BUFFER = 4
#: An eigenpair is converged when its pointwise residual is below this times max|f|.
RESIDUAL_RTOL = 1e-6


# -- associated Legendre functions -------------------------------------------


def legendre_theta(l_max: int, m: int, theta):
    """Orthonormal ``Theta_l^m`` and its first two theta-derivatives.

    Returns three arrays of shape ``(l_max - |m| + 1,) + shape(theta)`` for
    ``l = |m|, ..., l_max``.  Upward recurrence in ``l`` at fixed ``m``;
    derivatives from the standard derivative recurrence and the Legendre
    equation, so no differencing is involved.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any((theta <= 0) | (theta >= np.pi)):
        raise DomainError("harmonic derivatives are evaluated at interior points only")
    am = abs(m)
    if l_max < am:
        raise ValueError(f"l_max={l_max} < |m|={am}")
    x, s = np.cos(theta), np.sin(theta)
    n = l_max - am + 1
    P = np.empty((n,) + theta.shape)
    p = np.full(theta.shape, 1.0 / math.sqrt(4 * math.pi))
    for k in range(1, am + 1):
        p = -math.sqrt((2 * k + 1) / (2 * k)) * s * p
    P[0] = p
    if n > 1:
        P[1] = math.sqrt(2 * am + 3) * x * p
    for i in range(2, n):
        l = am + i
        a = math.sqrt((4 * l * l - 1) / (l * l - am * am))
        a_prev = math.sqrt((4 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - am * am))
        P[i] = a * (x * P[i - 1] - P[i - 2] / a_prev)

    dP = np.empty_like(P)
    for i in range(n):
        l = am + i
        lower = P[i - 1] if i > 0 else 0.0
        coef = math.sqrt((2 * l + 1) * (l * l - am * am) / (2 * l - 1)) if i > 0 else 0.0
        dP[i] = (l * x * P[i] - coef * lower) / s
    ls = np.arange(am, l_max + 1).reshape((n,) + (1,) * theta.ndim)
    d2P = -(x / s) * dP - (ls * (ls + 1) - am * am / s**2) * P
    if m < 0:
        sign = (-1) ** am
        P, dP, d2P = sign * P, sign * dP, sign * d2P
    return P, dP, d2P


def operator_coefficients(eps: float, theta):
    """``(A, B, C)`` of the full operator at ``theta``."""
    s, c = np.sin(theta), np.cos(theta)
    w = np.sqrt(1 - eps**2 * s**2)
    A = 2 * w**3 / (s**2 * (1 + w))
    B = 2 * w**2 / (1 + w)
    C = 2 * c * (eps**2 * s**2 + w) / (s * (1 + w))
    return A, B, C


def expanded_coefficients(eps: float, theta):
    """``(A, B, C)`` truncated after the ``eps^2`` term."""
    s, c = np.sin(theta), np.cos(theta)
    e2s2 = eps**2 * s**2
    return (4 - 5 * e2s2) / (4 * s**2), 1 - 0.75 * e2s2, c / s * (1 + 0.75 * e2s2)


# -- functions on the sphere -------------------------------------------------


@dataclass
class SphereFunction:
    """Finite expansion ``sum c_{lm} Y_l^m`` with complex coefficients."""

    coefficients: dict = field(default_factory=dict)

    @classmethod
    def harmonic(cls, l: int, m: int) -> "SphereFunction":
        return cls({(l, m): 1.0})

    @property
    def l_max(self) -> int:
        return max((l for l, _ in self.coefficients), default=0)

    def norm(self) -> float:
        """L2 norm under the round-sphere measure."""
        return math.sqrt(sum(abs(c) ** 2 for c in self.coefficients.values()))

    def _apply(self, theta, phi, coef_fn):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        out = np.zeros(np.broadcast_shapes(theta.shape, phi.shape), dtype=complex)
        by_m: dict = {}
        for (l, m), c in self.coefficients.items():
            if l < abs(m):
                raise ValueError(f"invalid harmonic index (l={l}, m={m})")
            by_m.setdefault(m, []).append((l, c))
        for m, terms in by_m.items():
            l_top = max(l for l, _ in terms)
            P, dP, d2P = legendre_theta(l_top, m, theta)
            radial = np.zeros(theta.shape)
            radial = radial.astype(complex)
            for l, c in terms:
                i = l - abs(m)
                radial = radial + c * coef_fn(m, P[i], dP[i], d2P[i])
            out = out + radial * np.exp(1j * m * phi)
        return out

    def __call__(self, theta, phi):
        return self._apply(theta, phi, lambda m, P, dP, d2P: P)


def laplacian_apply(eps: float, f: SphereFunction, at, expanded: bool = False):
    """Pointwise value of the Finslerian Laplacian of ``f`` at ``at = (theta, phi)``.

    Uses the full operator unless ``expanded`` is set, in which case the
    ``O(eps^2)`` truncation is applied.  Returns a complex number (or array).
    """
    if not 0 <= eps < 1:
        raise ConfigurationError(f"eps must lie in [0, 1), got {eps}")
    theta, phi = at
    coeffs = expanded_coefficients if expanded else operator_coefficients
    A, B, C = coeffs(eps, np.asarray(theta, dtype=float))
    out = f._apply(theta, phi, lambda m, P, dP, d2P: -(m * m) * A * P + B * d2P + C * dP)
    return complex(out) if np.ndim(out) == 0 else out


# -- Galerkin blocks ---------------------------------------------------------


@dataclass
class Eigenpair:
    l: int
    m: int
    eigenvalue: complex
    function: SphereFunction
    flagged: bool = False
    residual: float = math.nan
    converged: bool = False

    @property
    def value(self) -> float:
        return float(np.real(self.eigenvalue))


@dataclass
class SpectralBlock:
    """Matrix of the operator on ``{Y_l^m : |m| <= l <= l_max}`` at fixed ``m``."""

    m: int
    eps: float
    l_max: int
    matrix: np.ndarray
    quadrature_order: int
    eigenpairs: list = field(default_factory=list)

    @property
    def ls(self) -> np.ndarray:
        return np.arange(abs(self.m), self.l_max + 1)


def assemble_block(eps: float, m: int, l_max: int, quadrature_order: int | None = None) -> SpectralBlock:
    """Entries ``<Y_l'^m, Delta Y_l^m>`` in the round inner product.

    The phi integral is done analytically; the theta integral by
    Gauss-Legendre in ``cos theta``.
    """
    if not 0 <= eps < 1:
        raise ConfigurationError(f"eps must lie in [0, 1), got {eps}")
    if l_max < abs(m) + TRUNCATION_BUFFER:
        raise ConfigurationError(f"l_max={l_max} must be at least |m| + {TRUNCATION_BUFFER}")
    minimum = 2 * l_max + 16
    if quadrature_order is None:
        quadrature_order = minimum
    if quadrature_order < minimum:
        raise ConfigurationError(f"quadrature order {quadrature_order} below required {minimum}")
    P, applied, w = _basis_at_nodes(eps, m, l_max, quadrature_order)
    matrix = 2 * np.pi * (P * w) @ applied.T
    return SpectralBlock(m, eps, l_max, matrix, quadrature_order)


def _basis_at_nodes(eps, m, l_max, order):
    """Harmonics, the operator applied to them, and weights at Gauss nodes."""
    x, w = np.polynomial.legendre.leggauss(order)
    theta = np.arccos(x)
    P, dP, d2P = legendre_theta(l_max, m, theta)
    A, B, C = operator_coefficients(eps, theta)
    return P, -(m * m) * A * P + B * d2P + C * dP, w


def eigen_solve(block: SpectralBlock, interior_count: int | None = None, imag_rtol: float = 1e-8) -> list[Eigenpair]:
    """Eigenpairs of a block, labelled by continuity with ``-l(l+1)``.

    Only the lowest ``interior_count`` shells are returned (by default every
    ``l <= l_max - 4``).  Each eigenfunction is scaled so its own ``Y_l^m``
    coefficient is 1.  Eigenvalues with a relative imaginary part above
    ``imag_rtol`` are kept but flagged.  Every pair carries its pointwise
    residual ``max|Delta f - lam f| / max|f|`` over the quadrature nodes and
    counts as converged when that is at most ``RESIDUAL_RTOL``.
    """
    am = abs(block.m)
    limit = block.l_max - am - 2
    default = block.l_max - TRUNCATION_BUFFER - am + 1
    if interior_count is None:
        interior_count = default
    if interior_count > limit:
        raise ConfigurationError(f"interior_count {interior_count} exceeds l_max - |m| - 2 = {limit}")
    vals, vecs = np.linalg.eig(block.matrix)
    P, applied, _ = _basis_at_nodes(block.eps, block.m, block.l_max, block.quadrature_order)
    ls = block.ls
    ref = -(ls * (ls + 1.0))
    rows, cols = linear_sum_assignment(np.abs(vals[None, :] - ref[:, None]))
    pairs = []
    for i, j in zip(rows[:interior_count], cols[:interior_count]):
        lam = vals[j]
        vec = vecs[:, j] / vecs[i, j]
        flagged = abs(lam.imag) > imag_rtol * abs(lam.real)
        if not flagged:
            lam = lam.real
            vec = vec.real
        func = SphereFunction({(int(l), block.m): c for l, c in zip(ls, vec)})
        values = vec @ P
        residual = float(np.abs(vec @ applied - lam * values).max() / np.abs(values).max())
        pairs.append(Eigenpair(int(ls[i]), block.m, lam, func, flagged, residual, residual <= RESIDUAL_RTOL))
    block.eigenpairs = pairs
    return pairs


# -- perturbative formulas ---------------------------------------------------


def perturbative_eigenvalue(l: int, m: int, eps: float) -> float:
    """Eigenvalue correct through ``eps^2``."""
    if l < abs(m):
        raise ValueError(f"need l >= |m|, got l={l}, m={m}")
    first = 3 * (l - 1) * l * (l + 1) * (l + 2) / (2 * (2 * l - 1) * (2 * l + 3))
    second = m * m * (14 * l**3 + 21 * l**2 + 19 * l + 6) / (2 * (2 * l + 1) * (2 * l - 1) * (2 * l + 3))
    return -l * (l + 1) + eps**2 * (first + second)


def mixing_coefficients(l: int, m: int) -> tuple[float, float]:
    """``(C_{l+2}^m, C_{l-2}^m)`` of the first-order eigenfunction."""
    up = (l + m + 1) * (l - m + 1) * (l + m + 2) * (l - m + 2) / ((2 * l + 1) * (2 * l + 5))
    c_up = -3 * l * (l - 1) / (8 * (2 * l + 3) ** 2) * math.sqrt(up)
    if l - 2 < abs(m):
        return c_up, 0.0
    down = (l + m) * (l - m) * (l + m - 1) * (l - m - 1) / ((2 * l + 1) * (2 * l - 3))
    c_down = 3 * (l + 1) * (l + 2) / (8 * (2 * l - 1) ** 2) * math.sqrt(down)
    return c_up, c_down


def perturbative_eigenpair(l: int, m: int, eps: float) -> tuple[float, SphereFunction]:
    """Eigenvalue and eigenfunction ``Y_l^m + eps^2 (C_{l+2} Y_{l+2} + C_{l-2} Y_{l-2})``."""
    lam = perturbative_eigenvalue(l, m, eps)
    c_up, c_down = mixing_coefficients(l, m)
    coeffs = {(l, m): 1.0, (l + 2, m): eps**2 * c_up}
    if l - 2 >= abs(m):
        coeffs[(l - 2, m)] = eps**2 * c_down
    return lam, SphereFunction(coeffs)


# -- volumes -----------------------------------------------------------------


def ht_volume(eps: float) -> float:
    """Holmes-Thompson volume: integral of ``sin theta (1 - eps^2 sin^2 theta)^(-3/2)``."""
    if not 0 <= eps < 1:
        raise ConfigurationError(f"eps must lie in [0, 1), got {eps}")
    val, _ = integrate.quad(
        lambda th: math.sin(th) / (1 - eps**2 * math.sin(th) ** 2) ** 1.5,
        0.0,
        math.pi,
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return 2 * math.pi * val


def indicatrix_area(eps: float, theta: float, n_angles: int = 256) -> float:
    """Coordinate area of ``{y : F(theta, y) < 1}`` by polar integration.

    The polar integral ``1/2 int r(psi)^2 dpsi`` is taken in the frame
    ``(y^theta, sin(theta) y^phi)``, where the indicatrix stays close to a
    circle even near the poles; the Jacobian ``1/sin(theta)`` is exact.  The
    integrand is smooth and periodic, so the trapezoidal rule converges
    geometrically.
    """
    psi = 2 * np.pi * np.arange(n_angles) / n_angles
    s = math.sin(theta)
    a = 1 - eps**2 * s * s
    u, v = np.cos(psi), np.sin(psi)
    F = (np.sqrt(a * u**2 + v**2) - eps * s * v) / a
    return math.pi * float(np.mean(1.0 / F**2)) / s


def bh_volume(eps: float, n_angles: int = 256) -> float:
    """Busemann-Hausdorff volume: integral of ``pi / area(indicatrix)``."""
    if not 0 <= eps < 1:
        raise ConfigurationError(f"eps must lie in [0, 1), got {eps}")
    val, _ = integrate.quad(
        lambda th: math.pi / indicatrix_area(eps, th, n_angles),
        0.0,
        math.pi,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return 2 * math.pi * val


# -- three-dimensional radial solutions ----------------------------------------


@dataclass(frozen=True)
class RadialSolution:
    """``W = (A r^n1 + B r^n2) * Ybar`` for angular eigenvalue ``lam``."""

    lam: float
    n1: float
    n2: float
    A: float
    B: float

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * r**self.n1 + self.B * r**self.n2


def radial_exponents(lam: float) -> tuple[float, float]:
    if lam > 0:
        raise ConfigurationError(f"angular eigenvalue must be <= 0, got {lam}")
    root = math.sqrt(1 - 4 * lam)
    return (-1 + root) / 2, (-1 - root) / 2


def radial_solution(lam: float, boundary) -> RadialSolution:
    """Exponents ``n_{1,2} = (-1 +- sqrt(1 - 4 lam)) / 2`` and the amplitudes
    matching ``boundary = ((r1, W1), (r2, W2))``.
    """
    n1, n2 = radial_exponents(lam)
    (r1, v1), (r2, v2) = boundary
    if r1 <= 0 or r2 <= 0:
        raise ConfigurationError("boundary radii must be positive")
    M = np.array([[r1**n1, r1**n2], [r2**n1, r2**n2]])
    if r1 == r2 or abs(np.linalg.det(M)) < 1e-14 * np.abs(M).max() ** 2:
        raise ConfigurationError("boundary system is singular (equal radii)")
    A, B = np.linalg.solve(M, [v1, v2])
    return RadialSolution(lam, n1, n2, float(A), float(B))
