"""Independent oracles shared by the test modules.

Nothing here calls into the package's assembly code: basis functions are
evaluated from their geometric definition and integrated by brute-force
quadrature.
"""
import numpy as np
import pytest


def gauss(npts, a=0.0, b=1.0):
    t, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (b - a) * (t + 1) + a, 0.5 * (b - a) * w


def interval_quadrature(nodes, npts=5):
    """Composite Gauss points/weights over a 1D mesh."""
    xs, ws = [], []
    for a, b in zip(nodes[:-1], nodes[1:]):
        x, w = gauss(npts, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def triangle_quadrature(p, npts=6):
    """Collapsed (Duffy) tensor Gauss rule on the triangle with vertices ``p``
    (3 x 2). Returns barycentric coordinates (q x 3) and weights."""
    s, ws = gauss(npts)
    bary, weights = [], []
    for u, wu in zip(s, ws):
        for v, wv in zip(s, ws):
            # (u, v) in unit square -> (x, y) = (u, v (1 - u)) in reference triangle
            x, y = u, v * (1 - u)
            bary.append((1 - x - y, x, y))
            weights.append(wu * wv * (1 - u))
    bary = np.array(bary)
    e1, e2 = p[1] - p[0], p[2] - p[0]
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    return bary, np.array(weights) * jac


def p1_eval_1d(nodes, values, x):
    return np.interp(x, nodes, values)


def fd_jacobian(func, U, eps=1e-6):
    """Central finite differences of a vector function."""
    U = np.asarray(U, dtype=float)
    cols = []
    for j in range(U.size):
        e = np.zeros_like(U)
        e[j] = eps
        cols.append((func(U + e) - func(U - e)) / (2 * eps))
    return np.column_stack(cols)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
