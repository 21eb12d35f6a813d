"""W1 optimal transport under the directed metric.

The solver is a transportation simplex (the network simplex specialised to a
complete bipartite graph) with Bland's anti-cycling rule.  Costs are tuples
compared lexicographically, so a single solve can minimise transport cost
first and then, among all cost-optimal couplings, a secondary objective.
Flows are ``Fraction`` objects for exact chains and floats otherwise; costs
are always integers, so reduced-cost signs are exact in both modes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .chain import Chain, DirectedMetric
from .errors import HypothesisError, NumericalFailure, SolverStall

MAX_PIVOTS = 200_000
FLOAT_ZERO = 1e-15

NONNEGATIVE = "non-negative"
NEGATIVE = "negative"
INDETERMINATE = "indeterminate"

# Float-mode curvature bands.
FLOAT_ACCEPT = 1e-9
FLOAT_REJECT = 1e-6


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: tuple, b: tuple) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


def _tree_path(adj: dict, start, goal) -> list:
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt in adj[node]:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def transportation_simplex(supply: Sequence, demand: Sequence, cost: Sequence[Sequence[tuple]], max_pivots: int = MAX_PIVOTS):
    """Minimise ``sum(flow * cost)`` lexicographically over the transportation polytope.

    Returns ``(flow, u, v)`` where ``flow`` is an m-by-k list of lists and
    ``u``, ``v`` are row/column potentials with ``u[i] + v[j] <= cost[i][j]``
    (componentwise-lexicographic), tight on the basis.
    """
    m, k = len(supply), len(demand)
    width = len(cost[0][0])
    zero_cost = (0,) * width
    exact = isinstance(supply[0], Fraction)
    zero = Fraction(0) if exact else 0.0

    flow = [[zero] * k for _ in range(m)]
    basis: set[tuple[int, int]] = set()
    s, d = list(supply), list(demand)
    i = j = 0
    # North-west corner: a staircase spanning tree with m + k - 1 cells.
    while True:
        q = min(s[i], d[j])
        flow[i][j] = q
        basis.add((i, j))
        s[i] -= q
        d[j] -= q
        if i == m - 1 and j == k - 1:
            break
        if (s[i] <= 0 and i < m - 1) or j == k - 1:
            i += 1
        else:
            j += 1
    assert len(basis) == m + k - 1

    for _ in range(max_pivots):
        adj: dict = {("r", a): [] for a in range(m)}
        adj.update({("c", b): [] for b in range(k)})
        for a, b in basis:
            adj[("r", a)].append(("c", b))
            adj[("c", b)].append(("r", a))
        u: list = [None] * m
        v: list = [None] * k
        u[0] = zero_cost
        queue = deque([("r", 0)])
        while queue:
            kind, idx = queue.popleft()
            for nk, nidx in adj[(kind, idx)]:
                if nk == "c" and v[nidx] is None:
                    v[nidx] = _sub(cost[idx][nidx], u[idx])
                    queue.append((nk, nidx))
                elif nk == "r" and u[nidx] is None:
                    u[nidx] = _sub(cost[nidx][idx], v[idx])
                    queue.append((nk, nidx))

        entering = None
        for a in range(m):
            for b in range(k):
                if (a, b) not in basis and _sub(cost[a][b], _add(u[a], v[b])) < zero_cost:
                    entering = (a, b)
                    break
            if entering:
                break
        if entering is None:
            return flow, u, v

        a, b = entering
        path = _tree_path(adj, ("c", b), ("r", a))
        # Cycle: entering (+), then alternate - / + along the tree path c_b -> r_a.
        cells = [entering]
        for p, q in zip(path, path[1:]):
            cells.append((p[1], q[1]) if p[0] == "r" else (q[1], p[1]))
        minus = cells[1::2]
        theta = min(flow[r][c] for r, c in minus)
        leaving = min((cell for cell in minus if flow[cell[0]][cell[1]] == theta), key=lambda rc: rc[0] * k + rc[1])
        for idx, (r, c) in enumerate(cells):
            flow[r][c] = flow[r][c] + theta if idx % 2 == 0 else flow[r][c] - theta
            if not exact and abs(flow[r][c]) < FLOAT_ZERO:
                flow[r][c] = 0.0
        basis.remove(leaving)
        basis.add(entering)
    raise SolverStall(f"transportation simplex exceeded {max_pivots} pivots")


@dataclass(frozen=True, eq=False)
class Coupling:
    chi: np.ndarray
    source_marginal: tuple
    target_marginal: tuple
    cost: object

    def mass(self, mask: np.ndarray):
        return sum(self.chi[mask].tolist(), Fraction(0) if self.chi.dtype == object else 0.0)

    def to_json_dict(self) -> dict:
        def fmt(p):
            return f"{p.numerator}/{p.denominator}" if isinstance(p, Fraction) else float(p)

        return {
            "n": int(self.chi.shape[0]),
            "cost": fmt(self.cost),
            "cost_float": float(self.cost),
            "chi": [[fmt(p) for p in row] for row in self.chi],
        }


@dataclass(frozen=True, eq=False)
class DualCertificate:
    f: tuple

    def lipschitz_violations(self, metric: DirectedMetric) -> list[tuple[int, int]]:
        return [(x, y) for x, y in metric.neighbor_pairs() if self.f[y] - self.f[x] > 1]

    def value(self, mu, nu):
        return sum(b * f for b, f in zip(nu, self.f)) - sum(a * f for a, f in zip(mu, self.f))


@dataclass
class CurvatureCertificate:
    verdict: str
    max_w: object
    pairs_checked: int
    witness: tuple[int, int] | None = None
    witness_w: object = None
    witness_dual: DualCertificate | None = None
    full_check: bool | None = None

    @property
    def nonnegative(self) -> bool:
        return self.verdict == NONNEGATIVE


def _solve(metric: DirectedMetric, mu, nu, secondary: np.ndarray | None = None):
    S = [i for i, a in enumerate(mu) if a > 0]
    T = [j for j, b in enumerate(nu) if b > 0]
    d = metric.d
    if secondary is None:
        cost = [[(int(d[i, j]),) for j in T] for i in S]
    else:
        cost = [[(int(d[i, j]), int(secondary[i, j])) for j in T] for i in S]
    flow, u, _ = transportation_simplex([mu[i] for i in S], [nu[j] for j in T], cost)
    exact = isinstance(mu[S[0]], Fraction)
    n = metric.n
    chi = np.empty((n, n), dtype=object if exact else float)
    chi[:, :] = Fraction(0) if exact else 0.0
    for a, i in enumerate(S):
        for b, j in enumerate(T):
            chi[i, j] = flow[a][b]
    total = sum(flow[a][b] * cost[a][b][0] for a in range(len(S)) for b in range(len(T)))
    # Kantorovich potential via the c-transform of the row potentials.
    f = tuple(min(int(d[i, y]) - u[a][0] for a, i in enumerate(S)) for y in range(n))
    return total, Coupling(chi, tuple(mu), tuple(nu), total), DualCertificate(f)


def w1(metric: DirectedMetric, mu: Sequence, nu: Sequence):
    """Optimal transport cost, an optimal coupling and a dual certificate.

    Strong duality is checked: the dual value must equal the primal cost
    exactly for ``Fraction`` inputs and within 1e-9 for floats.
    """
    cost, coupling, dual = _solve(metric, list(mu), list(nu))
    gap = dual.value(mu, nu) - cost
    if isinstance(cost, Fraction):
        if gap != 0:
            raise NumericalFailure(f"duality gap {gap} on exact instance")
    elif abs(gap) > 1e-9:
        raise NumericalFailure(f"duality gap {gap:.3e}")
    return cost, coupling, dual


def certify_curvature(chain: Chain, metric: DirectedMetric | None = None, full: bool = False) -> CurvatureCertificate:
    """Check ``W(P(x,.), P(y,.)) <= 1`` on every ordered neighbour pair.

    With ``full=True`` every ordered pair is also checked against
    ``dist(x, y)``; that stronger property must follow from the local one, so
    a discrepancy raises :class:`NumericalFailure`.
    """
    metric = metric or chain.metric
    P = chain.P
    pairs = metric.neighbor_pairs()
    worst = None
    witness = None
    for x, y in pairs:
        w, _, dual = w1(metric, P[x], P[y])
        if worst is None or w > worst:
            worst = w
        if witness is None and w > 1 + (0 if chain.exact else FLOAT_REJECT):
            witness = (x, y, w, dual)
    if worst is None:
        worst = chain.zero()

    if chain.exact:
        verdict = NEGATIVE if worst > 1 else NONNEGATIVE
    elif worst <= 1 + FLOAT_ACCEPT:
        verdict = NONNEGATIVE
    elif worst > 1 + FLOAT_REJECT:
        verdict = NEGATIVE
    else:
        verdict = INDETERMINATE

    cert = CurvatureCertificate(verdict, worst, len(pairs))
    if witness is not None:
        cert.witness = (witness[0], witness[1])
        cert.witness_w = witness[2]
        cert.witness_dual = witness[3]
    if full:
        slack = 0 if chain.exact else FLOAT_ACCEPT
        ok = all(
            w1(metric, P[x], P[y])[0] <= metric(x, y) + slack
            for x in range(chain.n)
            for y in range(chain.n)
            if x != y
        )
        cert.full_check = ok
        if verdict == NONNEGATIVE and not ok:
            raise NumericalFailure("local curvature holds but the all-pairs contraction fails")
    return cert


@dataclass(frozen=True, eq=False)
class GoodCoupling:
    coupling: Coupling
    gamma_mass: object
    x: int
    y: int


def good_optimal_coupling(chain: Chain, metric: DirectedMetric, x: int, y: int, require_lazy: bool = True) -> GoodCoupling:
    """An optimal coupling of P(x,.) and P(y,.) maximising the mass on
    pairs strictly closer than (x, y), among all optimal couplings.

    The two stages are one lexicographic solve with costs
    ``(dist(u, v), -[dist(u, v) < dist(x, y)])``.
    """
    if x == y:
        raise ValueError("good couplings are defined for x != y")
    if require_lazy and not chain.is_lazy:
        raise HypothesisError("good optimal couplings need a lazy chain")
    good = metric.d < metric(x, y)
    _, coupling, _ = _solve(metric, list(chain.P[x]), list(chain.P[y]), secondary=-good.astype(np.int64))
    return GoodCoupling(coupling, coupling.mass(good), x, y)


@dataclass(frozen=True, eq=False)
class CouplingKernel:
    """Transition kernel on V x V driven by good optimal couplings.

    Diagonal pairs use the identity coupling of P(x,.) with itself, so the
    two coordinates never separate once they meet.
    """

    n: int
    couplings: dict = field(repr=False)

    def row(self, x: int, y: int) -> list[tuple[tuple[int, int], object]]:
        chi = self.couplings[(x, y)].chi
        return [((int(u), int(v)), chi[u, v]) for u, v in zip(*np.nonzero(chi != 0))]

    def expected_distance(self, metric: DirectedMetric, x: int, y: int):
        return sum(p * metric(u, v) for (u, v), p in self.row(x, y))

    def dense(self) -> np.ndarray:
        """Float matrix indexed by ``x * n + y``."""
        n = self.n
        K = np.zeros((n * n, n * n))
        for (x, y), c in self.couplings.items():
            K[x * n + y] = np.asarray(c.chi, dtype=float).ravel()
        return K


def coupling_kernel(chain: Chain, metric: DirectedMetric | None = None) -> CouplingKernel:
    if not chain.is_lazy:
        raise HypothesisError("the coupling kernel needs a lazy chain")
    metric = metric or chain.metric
    n = chain.n
    couplings = {}
    exact = chain.exact
    for x in range(n):
        row = chain.P[x]
        chi = np.empty((n, n), dtype=object if exact else float)
        chi[:, :] = Fraction(0) if exact else 0.0
        for u in range(n):
            chi[u, u] = row[u]
        couplings[(x, x)] = Coupling(chi, tuple(row), tuple(row), chain.zero())
        for y in range(n):
            if y != x:
                couplings[(x, y)] = good_optimal_coupling(chain, metric, x, y).coupling
    return CouplingKernel(n, couplings)
