"""Independent reference computations used by the tests.

Nothing here imports the solver code paths it checks: transport is checked
against enumeration of integral dual potentials, conductance against a
plain ``Fraction`` loop over subsets, and so on.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def floyd_warshall(support) -> list[list[int | None]]:
    """All-pairs step counts on the support digraph (None if unreachable)."""
    n = len(support)
    INF = float("inf")
    d = [[0 if i == j else (1 if support[i][j] else INF) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return [[None if v == INF else int(v) for v in row] for row in d]


def frac_matmul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return [[sum((A[i][k] * B[k][j] for k in range(m)), Fraction(0)) for j in range(p)] for i in range(n)]


def frac_power(P, t):
    n = len(P)
    R = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for _ in range(t):
        R = frac_matmul(R, P)
    return R


def stationary_by_power(P, iters=4000) -> np.ndarray:
    """Float stationary law by power iteration on the lazified chain."""
    M = np.asarray([[float(p) for p in row] for row in P])
    n = len(M)
    M = (M + np.eye(n)) / 2
    v = np.full(n, 1.0 / n)
    for _ in range(iters):
        v = v @ M
    return v / v.sum()


def dual_w1(d, mu, nu) -> tuple[Fraction, tuple[int, ...]]:
    """W1 by enumerating every integral 1-Lipschitz potential with f(0) = 0.

    The Lipschitz polytope {f(y) - f(x) <= d(x, y), f(0) = 0} is cut out by
    a totally unimodular system with integer right-hand side, so its
    vertices are integral and lie in the box -d(y, 0) <= f(y) <= d(0, y).
    """
    n = len(d)
    mu = [Fraction(v) for v in mu]
    nu = [Fraction(v) for v in nu]
    den = 1
    for v in mu + nu:
        den = den * v.denominator // np.gcd(den, v.denominator)
    w = np.array([int((b - a) * den) for a, b in zip(mu, nu)], dtype=np.int64)
    ranges = [np.arange(-d[y][0], d[0][y] + 1) for y in range(1, n)]
    if n == 1:
        return Fraction(0), (0,)
    grids = np.meshgrid(*ranges, indexing="ij")
    F = np.stack([np.zeros(grids[0].size, dtype=np.int64)] + [g.ravel() for g in grids], axis=1)
    ok = np.ones(F.shape[0], dtype=bool)
    for x in range(n):
        for y in range(n):
            if x != y:
                ok &= F[:, y] - F[:, x] <= d[x][y]
    F = F[ok]
    vals = F @ w
    k = int(np.argmax(vals))
    return Fraction(int(vals[k]), den), tuple(int(v) for v in F[k])


def lp_good_coupling(d, mu, nu, x_dist: int):
    """Two-stage LP with scipy: W1, then the largest mass on {d < x_dist}."""
    from scipy.optimize import linprog

    n = len(d)
    c = np.asarray(d, dtype=float).ravel()
    A_eq = []
    for i in range(n):
        row = np.zeros((n, n))
        row[i, :] = 1
        A_eq.append(row.ravel())
    for j in range(n):
        col = np.zeros((n, n))
        col[:, j] = 1
        A_eq.append(col.ravel())
    b_eq = [float(v) for v in mu] + [float(v) for v in nu]
    first = linprog(c, A_eq=np.array(A_eq), b_eq=b_eq, bounds=(0, None), method="highs")
    good = (np.asarray(d) < x_dist).ravel().astype(float)
    second = linprog(
        -good,
        A_ub=[c],
        b_ub=[first.fun + 1e-9],
        A_eq=np.array(A_eq),
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    return first.fun, -second.fun


def brute_conductance(P, pi, t=1):
    """min over 0 < pi(A) <= 1/2 of sum_{x in A, y not in A} pi(x) P^t(x,y) / pi(A); ties to smallest mask."""
    n = len(P)
    Pt = frac_power(P, t)
    best = None
    for mask in range(1, 1 << n):
        A = [x for x in range(n) if mask >> x & 1]
        mass = sum(pi[x] for x in A)
        if not 0 < mass <= Fraction(1, 2):
            continue
        flow = sum(pi[x] * Pt[x][y] for x in A for y in range(n) if not mask >> y & 1)
        r = flow / mass
        if best is None or r < best[0]:
            best = (r, mask)
    return best


def tv(p, q):
    return sum(abs(a - b) for a, b in zip(p, q)) / 2


def mixing_times(P, pi, horizon=10_000):
    """(t_mix, t_mix#) by direct Fraction iteration."""
    n = len(P)
    R = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    t_mix = t_sharp = None
    for t in range(horizon + 1):
        rows = [tv(R[x], pi) for x in range(n)]
        if t_mix is None and max(rows) <= Fraction(1, 4):
            t_mix = t
        if t_sharp is None and sum(p * r for p, r in zip(pi, rows)) <= Fraction(1, 4):
            t_sharp = t
        if t_mix is not None and t_sharp is not None:
            return t_mix, t_sharp
        R = frac_matmul(R, P)
    raise RuntimeError("horizon reached")


def relaxation_time(P) -> float:
    """1 / (1 - lambda_2) from the unsymmetrised eigenvalues."""
    M = np.asarray([[float(p) for p in row] for row in P])
    vals = np.sort(np.real(np.linalg.eigvals(M)))[::-1]
    return 1.0 / (1.0 - vals[1])


def random_chain(rng, n, lazy=False, density=0.6, den=6):
    """Random irreducible rational chain: a random cycle plus random extra edges."""
    perm = list(rng.permutation(n))
    weights = [[0] * n for _ in range(n)]
    for i in range(n):
        weights[perm[i]][perm[(i + 1) % n]] = int(rng.integers(1, den + 1))
    for x, y in itertools.product(range(n), repeat=2):
        if x != y and rng.random() < density:
            weights[x][y] = int(rng.integers(1, den + 1))
    P = []
    for x in range(n):
        s = sum(weights[x])
        row = [Fraction(w, s) for w in weights[x]]
        if lazy:
            row = [p / 2 + (Fraction(1, 2) if x == y else 0) for y, p in enumerate(row)]
        P.append(row)
    return P


def random_measure(rng, n, den=12, support=None):
    support = list(range(n)) if support is None else support
    w = [int(rng.integers(0, den + 1)) for _ in support]
    if sum(w) == 0:
        w[0] = 1
    s = sum(w)
    out = [Fraction(0)] * n
    for i, v in zip(support, w):
        out[i] = Fraction(v, s)
    return out
