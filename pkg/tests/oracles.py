"""Independent reference computations shared by the test modules.

Nothing here imports the library's regression or wavelet code; the
oracles are written from the definitions so they can check it.
"""
from fractions import Fraction

import numpy as np


def vaw_direct_predictions(y, k):
    """VAW predictions by solving ``(I + sum_{s<=t} x x^T) w = sum_{s<t} y x`` at every t.

    Features are ``[1, t, ..., t^k]``.  The system is solved in the
    coordinates ``z = x / n^j`` (same solution, well conditioned).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    d = k + 1
    s = float(n) ** np.arange(d)
    gram = np.diag(1.0 / s**2)
    b = np.zeros(d)
    out = np.empty(n)
    for t in range(1, n + 1):
        z = float(t) ** np.arange(d) / s
        gram = gram + np.outer(z, z)
        out[t - 1] = z @ np.linalg.solve(gram, b)
        b = b + y[t - 1] * z
    return out


def vaw_exact_predictions(y, k):
    """Same as :func:`vaw_direct_predictions` in exact rational arithmetic (small n only)."""
    d = k + 1
    gram = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    b = [Fraction(0)] * d
    out = []
    for t, yt in enumerate(y, start=1):
        x = [Fraction(t) ** j for j in range(d)]
        for i in range(d):
            for j in range(d):
                gram[i][j] += x[i] * x[j]
        w = _solve_exact(gram, b)
        out.append(float(sum(xi * wi for xi, wi in zip(x, w))))
        yf = Fraction(yt)
        b = [bi + yf * xi for bi, xi in zip(b, x)]
    return np.array(out)


def _solve_exact(a, b):
    m = len(b)
    aug = [list(row) + [rhs] for row, rhs in zip(a, b)]
    for c in range(m):
        piv = next(r for r in range(c, m) if aug[r][c] != 0)
        aug[c], aug[piv] = aug[piv], aug[c]
        for r in range(m):
            if r != c and aug[r][c] != 0:
                f = aug[r][c] / aug[c][c]
                aug[r] = [u - f * v for u, v in zip(aug[r], aug[c])]
    return [aug[i][m] / aug[i][i] for i in range(m)]


def ols_fit(y, k):
    """Least-squares coefficients of ``y`` on ``[1, t, ..., t^k]``, ``t = 1..n``, raw scale."""
    y = np.asarray(y, dtype=float)
    n = y.size
    t = np.arange(1, n + 1, dtype=float)
    s = float(n) ** np.arange(k + 1)
    x = np.vander(t / n, k + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    return coef / s


def exact_gram_determinant(t, m):
    """``det(X^T X)`` for the monomial design by cofactor-free exact elimination."""
    x = [[Fraction(i) ** j for j in range(m)] for i in range(1, t + 1)]
    g = [[sum(r[a] * r[b] for r in x) for b in range(m)] for a in range(m)]
    det = Fraction(1)
    for c in range(m):
        piv = next((r for r in range(c, m) if g[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            g[c], g[piv] = g[piv], g[c]
            det = -det
        det *= g[c][c]
        for r in range(c + 1, m):
            f = g[r][c] / g[c][c]
            g[r] = [u - f * v for u, v in zip(g[r], g[c])]
    return det


def polynomial_residual(y, k):
    """``y`` minus its least-squares degree-``k`` fit, via numpy's polyfit on a unit grid."""
    y = np.asarray(y, dtype=float)
    grid = np.linspace(-1.0, 1.0, y.size)
    coef = np.polynomial.polynomial.polyfit(grid, y, k)
    return y - np.polynomial.polynomial.polyval(grid, coef)
