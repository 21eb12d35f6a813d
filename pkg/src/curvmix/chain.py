"""Finite Markov chains: validation, directed metric, stationary law, powers.

Exact chains keep their transition matrix as ``Fraction`` entries.  Matrix
powers are computed on the integer numerators over a single common
denominator, which is much cheaper than multiplying ``Fraction`` objects and
lets callers bound the denominator size in bits.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BitBudgetExceeded,
    ChainValidationError,
    NegativeEntryError,
    NumericalFailure,
    ParseError,
    ReducibleError,
    RowSumError,
)

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)

FLOAT_ROW_TOL = 1e-12
STATIONARY_TOL = 1e-12
DEFAULT_BIT_BUDGET = 4096


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        # the shortest decimal that round-trips, so 0.1 reads as 1/10
        if not math.isfinite(value):
            raise ChainValidationError(f"non-finite entry {value!r}")
        return Fraction(repr(float(value)))
    raise ChainValidationError(f"cannot interpret {value!r} as a probability")


def common_denominator(values: Sequence[Fraction]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in values), 1)


def integer_form(values: Sequence[Fraction]) -> tuple[np.ndarray, int]:
    """Write ``values`` as ``nums / den`` with a shared integer ``den``."""
    den = common_denominator(values)
    nums = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        nums[i] = v.numerator * (den // v.denominator)
    return nums, den


@dataclass(frozen=True, eq=False)
class Chain:
    """An irreducible stochastic matrix.

    Build instances through :func:`build_chain`, which validates the matrix.
    ``tags`` carries generator metadata (family, parameters, structural
    expectations) and never affects any computation.
    """

    P: tuple[tuple, ...]
    mode: str = EXACT
    labels: tuple[str, ...] | None = None
    tags: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.P)

    @property
    def exact(self) -> bool:
        return self.mode == EXACT

    @cached_property
    def dense(self) -> np.ndarray:
        return np.array([[float(p) for p in row] for row in self.P], dtype=float)

    @cached_property
    def support(self) -> np.ndarray:
        return np.array([[p > 0 for p in row] for row in self.P], dtype=bool)

    @cached_property
    def integer_matrix(self) -> tuple[np.ndarray, int]:
        """``(N, D)`` with ``P = N / D`` entrywise; exact mode only."""
        if not self.exact:
            raise TypeError("integer form is only defined for exact chains")
        flat = [p for row in self.P for p in row]
        nums, den = integer_form(flat)
        return nums.reshape(self.n, self.n), den

    @cached_property
    def is_lazy(self) -> bool:
        half = Fraction(1, 2) if self.exact else 0.5
        return all(self.P[x][x] >= half for x in range(self.n))

    @cached_property
    def pi(self) -> tuple:
        return stationary(self)

    @cached_property
    def metric(self) -> "DirectedMetric":
        return directed_metric(self)

    @cached_property
    def p_min(self):
        return p_min(self)

    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def to_json_dict(self) -> dict:
        if self.exact:
            rows = [[_fmt_fraction(p) for p in row] for row in self.P]
        else:
            rows = [[float(p) for p in row] for row in self.P]
        out = {"n": self.n, "mode": self.mode, "rows": rows}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.tags:
            out["tags"] = self.tags
        return out


def _fmt_fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


@dataclass(frozen=True, eq=False)
class DirectedMetric:
    """dist(x, y) = fewest transitions from x to y."""

    d: np.ndarray

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def diam(self) -> int:
        return int(self.d.max()) if self.d.size else 0

    def __call__(self, x: int, y: int) -> int:
        return int(self.d[x, y])

    def neighbor_pairs(self) -> list[tuple[int, int]]:
        """Ordered pairs with dist(x, y) = 1, in row-major order."""
        xs, ys = np.nonzero(self.d == 1)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.nonzero(adj[u])[0]:
            if not seen[v]:
                seen[v] = True
                queue.append(int(v))
    return seen


def build_chain(matrix, mode: str = EXACT, labels=None, tags=None) -> Chain:
    """Validate ``matrix`` and wrap it as a :class:`Chain`.

    Exact mode accepts ints, ``Fraction`` objects and ``"p/q"`` strings and
    requires every row to sum to exactly one.  Float mode allows a row-sum
    error of at most ``1e-12``.
    """
    if mode not in MODES:
        raise ChainValidationError(f"unknown mode {mode!r}")
    rows = [list(r) for r in matrix]
    n = len(rows)
    if n == 0:
        raise ChainValidationError("empty matrix")
    if any(len(r) != n for r in rows):
        raise ChainValidationError("matrix is not square")

    if mode == EXACT:
        P = tuple(tuple(to_fraction(v) for v in r) for r in rows)
        one = Fraction(1)
    else:
        P = tuple(tuple(float(to_fraction(v)) if isinstance(v, str) else float(v) for v in r) for r in rows)
        one = 1.0

    for x, row in enumerate(P):
        if any(p < 0 for p in row):
            raise NegativeEntryError(f"row {x} has a negative entry")
        s = sum(row)
        if mode == EXACT and s != one:
            raise RowSumError(f"row {x} sums to {s}, not 1")
        if mode == FLOAT and not abs(s - 1.0) <= FLOAT_ROW_TOL:
            raise RowSumError(f"row {x} sums to {s!r}, off by more than {FLOAT_ROW_TOL}")
        if mode == FLOAT and any(math.isnan(p) for p in row):
            raise ChainValidationError(f"row {x} contains NaN")

    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != n:
            raise ChainValidationError("labels length does not match state count")

    chain = Chain(P=P, mode=mode, labels=labels, tags=dict(tags or {}))
    adj = chain.support
    if not (_reachable(adj, 0).all() and _reachable(adj.T, 0).all()):
        raise ReducibleError("support digraph is not strongly connected")
    return chain


def chain_from_json(text: str) -> Chain:
    """Parse the ``{"n", "mode", "rows"[, "labels", "tags"]}`` chain format."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("chain file must hold a JSON object")
    rows = data.get("rows")
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ParseError("'rows' must be a list of lists")
    mode = data.get("mode", EXACT)
    if mode not in MODES:
        raise ParseError(f"'mode' must be one of {MODES}, got {mode!r}")
    if "n" in data and data["n"] != len(rows):
        raise ParseError(f"'n' is {data['n']!r} but there are {len(rows)} rows")
    for r in rows:
        for v in r:
            if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                raise ParseError(f"entry {v!r} is not a number or 'p/q' string")
            if isinstance(v, str):
                try:
                    Fraction(v.strip())
                except (ValueError, ZeroDivisionError):
                    raise ParseError(f"entry {v!r} is not a rational literal") from None
    return build_chain(rows, mode, labels=data.get("labels"), tags=data.get("tags"))


def read_chain(path) -> Chain:
    with open(path, encoding="utf-8") as fh:
        return chain_from_json(fh.read())


def directed_metric(chain: Chain) -> DirectedMetric:
    n = chain.n
    adj = chain.support
    succ = [np.nonzero(adj[u])[0] for u in range(n)]
    d = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        d[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in succ[u]:
                if d[s, v] < 0:
                    d[s, v] = d[s, u] + 1
                    queue.append(int(v))
    if (d < 0).any():
        raise ReducibleError("support digraph is not strongly connected")
    return DirectedMetric(d)


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise NumericalFailure("singular stationary system")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def stationary(chain: Chain) -> tuple:
    """The unique invariant distribution, verified against ``pi P = pi``."""
    n = chain.n
    if chain.exact:
        P = chain.P
        # pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
        A = [[P[y][x] - (1 if x == y else 0) for y in range(n)] for x in range(n)]
        A[-1] = [Fraction(1)] * n
        b = [Fraction(0)] * (n - 1) + [Fraction(1)]
        pi = _solve_exact(A, b)
        for y in range(n):
            if sum(pi[x] * P[x][y] for x in range(n)) != pi[y]:
                raise NumericalFailure("exact stationary check failed")
        return tuple(pi)

    P = chain.dense
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    residual = np.abs(pi @ P - pi).max()
    if residual > STATIONARY_TOL or (pi <= 0).any():
        raise NumericalFailure(f"stationary residual {residual:.3e} exceeds {STATIONARY_TOL}")
    return tuple(float(p) for p in pi)


def p_min(chain: Chain):
    return min(p for row in chain.P for p in row if p > 0)


def lazify(chain: Chain) -> Chain:
    """The lazy version ``(P + I) / 2``."""
    half = Fraction(1, 2) if chain.exact else 0.5
    n = chain.n
    P = [[half * p + (half if x == y else 0) for y, p in enumerate(row)] for x, row in enumerate(chain.P)]
    tags = {k: v for k, v in chain.tags.items() if k in ("family", "params", "transitive")}
    if tags:
        tags["lazified"] = True
    return build_chain(P, chain.mode, labels=chain.labels, tags=tags)


def is_reversible(chain: Chain) -> bool:
    pi, P, n = chain.pi, chain.P, chain.n
    if chain.exact:
        return all(pi[x] * P[x][y] == pi[y] * P[y][x] for x in range(n) for y in range(x + 1, n))
    Q = np.asarray(pi)[:, None] * chain.dense
    return bool(np.allclose(Q, Q.T, rtol=0, atol=1e-12))


def matrix_power_row(chain: Chain, x: int, t: int, bit_budget: int = DEFAULT_BIT_BUDGET) -> tuple:
    """Row ``x`` of ``P**t`` by repeated vector-matrix products.

    Raises :class:`BitBudgetExceeded` in exact mode once the common
    denominator would need more than ``bit_budget`` bits.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    n = chain.n
    if not chain.exact:
        v = np.zeros(n)
        v[x] = 1.0
        P = chain.dense
        for _ in range(t):
            v = v @ P
        return tuple(float(p) for p in v)

    N, D = chain.integer_matrix
    den = D**t
    if den.bit_length() > bit_budget:
        raise BitBudgetExceeded(f"denominator needs {den.bit_length()} bits > budget {bit_budget}")
    v = np.zeros(n, dtype=object)
    v[:] = 0
    v[x] = 1
    for _ in range(t):
        v = v.dot(N)
    return tuple(Fraction(int(a), den) for a in v)


@dataclass
class Power:
    """``P**t`` as floats, plus ``num / den`` when still exact."""

    t: int
    flt: np.ndarray
    num: np.ndarray | None = None
    den: int | None = None

    @property
    def exact(self) -> bool:
        return self.num is not None

    def entry(self, x: int, y: int):
        if self.exact:
            return Fraction(int(self.num[x, y]), self.den)
        return float(self.flt[x, y])

    def row(self, x: int) -> tuple:
        if self.exact:
            return tuple(Fraction(int(a), self.den) for a in self.num[x])
        return tuple(float(a) for a in self.flt[x])


def iter_powers(chain: Chain, bit_budget: int = DEFAULT_BIT_BUDGET, start: int = 0) -> Iterator[Power]:
    """Yield ``P**t`` for t = start, start+1, ... without end.

    Exact chains yield exact powers until the denominator passes
    ``bit_budget`` bits; from then on only the float part is populated.
    """
    n = chain.n
    Pf = chain.dense
    flt = np.eye(n)
    num = den = None
    N = D = None
    if chain.exact:
        N, D = chain.integer_matrix
        num = np.zeros((n, n), dtype=object)
        num[:, :] = 0
        for i in range(n):
            num[i, i] = 1
        den = 1
    t = 0
    while True:
        if t >= start:
            yield Power(t, flt, num, den)
        t += 1
        flt = flt @ Pf
        if num is not None:
            if (den * D).bit_length() > bit_budget:
                num = den = None
            else:
                num = num.dot(N)
                den = den * D
