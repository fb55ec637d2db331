"""Symbolic reference computations used as independent test oracles.

These never touch the jet engine: derivatives come from sympy and are
lambdified to numpy.
"""

from __future__ import annotations

import functools

import numpy as np
import sympy as sp

theta, phi, yth, yph, eps = sp.symbols("theta phi y_theta y_phi epsilon", real=True)


def base_L_expr(kind: str):
    s = sp.sin(theta)
    if kind == "finsler_sphere":
        a = 1 - eps**2 * s**2
        F = sp.sqrt(a * yth**2 + s**2 * yph**2) / a - eps * s**2 * yph / a
        return F**2
    if kind == "riemann_sphere":
        return yth**2 + s**2 * yph**2
    if kind == "hyperbolic":
        return yth**2 + sp.sinh(theta) ** 2 * yph**2
    if kind == "flat":
        return yth**2 + yph**2
    raise ValueError(f"unknown base kind {kind!r}")


@functools.lru_cache(maxsize=None)
def base_functions(kind: str):
    """Lambdified (L, grad_y L, g, spray) of a two-dimensional base.

    Each callable takes ``(theta, phi, y_theta, y_phi, epsilon)``.
    """
    L = base_L_expr(kind)
    xs = (theta, phi)
    ys = (yth, yph)
    grad = [sp.diff(L, v) for v in ys]
    g = sp.Matrix(2, 2, lambda i, j: sp.diff(L, ys[i], ys[j]) / 2)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    # explicit 2x2 inverse; Matrix.inv simplifies and is very slow here
    ginv = sp.Matrix([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / det
    bracket = [
        sum(sp.diff(L, xs[lam], ys[nu]) * ys[lam] for lam in range(2)) - sp.diff(L, xs[nu])
        for nu in range(2)
    ]
    G = [sum(ginv[mu, nu] * bracket[nu] for nu in range(2)) / 4 for mu in range(2)]
    args = (theta, phi, yth, yph, eps)
    return (
        sp.lambdify(args, L, "numpy"),
        sp.lambdify(args, grad, "numpy"),
        sp.lambdify(args, g, "numpy"),
        sp.lambdify(args, G, "numpy"),
    )


t, r = sp.symbols("t r", real=True)
GM, b, q, kk = sp.symbols("GM b q k", real=True)


@functools.lru_cache(maxsize=None)
def riemannian_rn(k: int):
    """Textbook Riemannian curvature of ``-f dt^2 + dr^2/f + r^2 dOmega_k^2``.

    ``f = k - 2GM/r - b r^2 + q/r^2``.  Returns lambdified Christoffel
    symbols, Riemann tensor ``R^a_{bcd}``, Ricci tensor and Ricci scalar;
    each takes ``(t, r, theta, phi, GM, b, q)``.
    """
    f = k - 2 * GM / r - b * r**2 + q / r**2
    if k == 1:
        h = sp.sin(theta) ** 2
    elif k == -1:
        h = sp.sinh(theta) ** 2
    else:
        h = sp.Integer(1)
    coords = (t, r, theta, phi)
    g = sp.diag(-f, 1 / f, r**2, r**2 * h)
    ginv = sp.diag(-1 / f, f, 1 / r**2, 1 / (r**2 * h))
    n = 4
    Gam = [
        [
            [
                sp.simplify(
                    sum(
                        ginv[a, e] * (sp.diff(g[e, b_], coords[c]) + sp.diff(g[e, c], coords[b_]) - sp.diff(g[b_, c], coords[e]))
                        for e in range(n)
                    )
                    / 2
                )
                for c in range(n)
            ]
            for b_ in range(n)
        ]
        for a in range(n)
    ]
    Riem = [
        [
            [
                [
                    sp.simplify(
                        sp.diff(Gam[a][b_][d], coords[c])
                        - sp.diff(Gam[a][b_][c], coords[d])
                        + sum(Gam[a][c][e] * Gam[e][b_][d] - Gam[a][d][e] * Gam[e][b_][c] for e in range(n))
                    )
                    for d in range(n)
                ]
                for c in range(n)
            ]
            for b_ in range(n)
        ]
        for a in range(n)
    ]
    Ric = sp.Matrix(n, n, lambda b_, d: sp.simplify(sum(Riem[a][b_][a][d] for a in range(n))))
    scal = sp.simplify(sum(ginv[i, j] * Ric[i, j] for i in range(n) for j in range(n)))
    args = (t, r, theta, phi, GM, b, q)
    return (
        sp.lambdify(args, g, "numpy"),
        sp.lambdify(args, Gam, "numpy"),
        sp.lambdify(args, Riem, "numpy"),
        sp.lambdify(args, Ric, "numpy"),
        sp.lambdify(args, scal, "numpy"),
    )


def as_array(value) -> np.ndarray:
    return np.array(value, dtype=float)
