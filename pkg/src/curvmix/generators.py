"""Chain families with ground-truth structural tags.

Every constructor returns an exact :class:`~curvmix.chain.Chain` whose
``tags`` record the family, the parameters and what the family is expected
to satisfy.  The curvature expectation is only ever checked, never assumed.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .chain import Chain, build_chain
from .errors import NotGeneratingError, SizeError

MAX_STATES = 64

YES, NO, UNKNOWN = "yes", "no", "unknown"


@dataclass(frozen=True)
class ChainSpec:
    family: str
    params: dict = field(default_factory=dict)

    def build(self) -> Chain:
        try:
            factory = FAMILIES[self.family]
        except KeyError:
            raise ValueError(f"unknown family {self.family!r}") from None
        return factory(**self.params)


def _tags(family, params, *, lazy, reversible, transitive, curved) -> dict:
    return {
        "family": family,
        "params": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in params.items()},
        "expected": {"lazy": lazy, "reversible": reversible, "transitive": transitive, "nonneg_curved": curved},
        "transitive": transitive,
    }


def _group_walk(elements: list, mult, steps: dict, lazy: bool) -> list[list[Fraction]]:
    """P(x, y) = mu(y x^-1), optionally mixed half-and-half with the identity."""
    index = {g: i for i, g in enumerate(elements)}
    n = len(elements)
    P = [[Fraction(0)] * n for _ in range(n)]
    for x in elements:
        for s, w in steps.items():
            P[index[x]][index[mult(s, x)]] += w
    if lazy:
        P = [[p / 2 + (Fraction(1, 2) if i == j else 0) for j, p in enumerate(row)] for i, row in enumerate(P)]
    return P


def cycle(n: int, lazy: bool = True) -> Chain:
    """Simple random walk on the n-cycle."""
    if n < 3:
        raise SizeError("cycle needs n >= 3")
    if n > MAX_STATES:
        raise SizeError(f"cycle is capped at {MAX_STATES} states")
    half = Fraction(1, 2)
    P = [[Fraction(0)] * n for _ in range(n)]
    for x in range(n):
        P[x][(x + 1) % n] += half
        P[x][(x - 1) % n] += half
    if lazy:
        P = [[p / 2 + (half if i == j else 0) for j, p in enumerate(row)] for i, row in enumerate(P)]
    return build_chain(P, tags=_tags("cycle", {"n": n, "lazy": lazy}, lazy=lazy, reversible=True, transitive=True, curved=YES))


def abelian_cayley(moduli, generators=None, degree: int | None = None, lazy: bool = True, seed: int = 0) -> Chain:
    """Random walk on Z_m1 x ... x Z_mk driven by the uniform law on a generator multiset.

    Given ``generators`` are used verbatim.  Otherwise ``degree`` distinct
    non-identity elements (default ``ceil(log2 |G|)``) are drawn with the
    given seed and closed under inverses, redrawing until they generate.
    """
    moduli = tuple(int(m) for m in ([moduli] if isinstance(moduli, int) else moduli))
    if any(m < 1 for m in moduli):
        raise SizeError("moduli must be positive")
    order = math.prod(moduli)
    if order > MAX_STATES:
        raise SizeError(f"group order {order} exceeds {MAX_STATES}")
    elements = list(itertools.product(*(range(m) for m in moduli)))

    def add(a, b):
        return tuple((x + y) % m for x, y, m in zip(a, b, moduli))

    def neg(a):
        return tuple((-x) % m for x, m in zip(a, moduli))

    def generates(S):
        seen = {elements[0]}
        frontier = [elements[0]]
        while frontier:
            g = frontier.pop()
            for s in S:
                h = add(s, g)
                if h not in seen:
                    seen.add(h)
                    frontier.append(h)
        return len(seen) == order

    if generators is not None:
        S = [tuple(int(c) % m for c, m in zip((g,) if isinstance(g, int) else g, moduli)) for g in generators]
        if not S:
            raise NotGeneratingError("empty generator multiset")
        if not generates(S):
            raise NotGeneratingError("generators do not generate the group")
        params = {"moduli": list(moduli), "generators": [list(s) for s in S], "lazy": lazy}
    else:
        if order == 1:
            raise SizeError("the trivial group has no random generators")
        degree = degree or max(1, math.ceil(math.log2(order)))
        rng = random.Random(seed)
        candidates = elements[1:]
        for _ in range(10_000):
            picks = rng.sample(candidates, min(degree, len(candidates)))
            S = sorted(set(picks) | {neg(s) for s in picks})
            if generates(S):
                break
        else:
            raise NotGeneratingError(f"no generating set of degree {degree} found")
        params = {"moduli": list(moduli), "degree": degree, "seed": seed, "lazy": lazy}

    w = Fraction(1, len(S))
    steps: dict = {}
    for s in S:
        steps[s] = steps.get(s, 0) + w
    P = _group_walk(elements, add, steps, lazy)
    symmetric = all(steps.get(neg(s), 0) == p for s, p in steps.items())
    labels = ["".join(map(str, g)) if len(moduli) > 1 else str(g[0]) for g in elements]
    tags = _tags("abelian_cayley", params, lazy=lazy, reversible=symmetric, transitive=True, curved=YES)
    return build_chain(P, labels=labels, tags=tags)


def hypercube_times_cycle(d: int, n: int, lazy: bool = True) -> Chain:
    """Simple random walk on the Cayley graph Z_2^d x Z_n."""
    if d < 1 or n < 3:
        raise SizeError("need d >= 1 and n >= 3")
    if 2**d * n > MAX_STATES:
        raise SizeError(f"2^d * n = {2**d * n} exceeds {MAX_STATES}")
    moduli = (2,) * d + (n,)
    gens = [tuple(1 if i == j else 0 for i in range(d + 1)) for j in range(d)]
    last = (0,) * d
    gens += [last + (1,), last + (n - 1,)]
    chain = abelian_cayley(moduli, generators=gens, lazy=lazy)
    tags = _tags("hypercube_times_cycle", {"d": d, "n": n, "lazy": lazy}, lazy=lazy, reversible=True, transitive=True, curved=YES)
    return build_chain(chain.P, labels=chain.labels, tags=tags)


def _compose(p, q):
    """(p o q)(i) = p[q[i]]."""
    return tuple(p[i] for i in q)


def _invert(p):
    inv = [0] * len(p)
    for i, v in enumerate(p):
        inv[v] = i
    return tuple(inv)


def transpositions(m: int) -> list[tuple[int, ...]]:
    out = []
    for i, j in itertools.combinations(range(m), 2):
        p = list(range(m))
        p[i], p[j] = p[j], p[i]
        out.append(tuple(p))
    return out


def is_conjugacy_invariant(S, elements) -> bool:
    support = set(S)
    return all({_compose(_compose(z, s), _invert(z)) for s in support} == support for z in elements)


def transposition_walk(m: int, lazy: bool = True) -> Chain:
    """Random transposition walk on the symmetric group S_m."""
    if m not in (3, 4):
        raise SizeError("transposition walk supports m in {3, 4}")
    elements = list(itertools.permutations(range(m)))
    S = transpositions(m)
    if not is_conjugacy_invariant(S, elements):
        raise AssertionError("transpositions must form a conjugacy class")
    steps = {s: Fraction(1, len(S)) for s in S}
    P = _group_walk(elements, _compose, steps, lazy)
    labels = ["".join(map(str, g)) for g in elements]
    tags = _tags("transposition_walk", {"m": m, "lazy": lazy}, lazy=lazy, reversible=True, transitive=True, curved=YES)
    return build_chain(P, labels=labels, tags=tags)


def biased_segment(n: int, up_prob=Fraction(3, 4)) -> Chain:
    """Lazy birth-death chain on {0, ..., n-1} with drift towards n-1.

    Moves up with probability ``up_prob / 2`` and down with
    ``(1 - up_prob) / 2``; blocked moves at the ends stay put.
    """
    up = Fraction(up_prob) if not isinstance(up_prob, str) else Fraction(up_prob)
    if n < 2:
        raise SizeError("segment needs n >= 2")
    if n > MAX_STATES:
        raise SizeError(f"segment is capped at {MAX_STATES} states")
    if not 0 < up < 1:
        raise ValueError("up_prob must lie in (0, 1)")
    a, b = up / 2, (1 - up) / 2
    P = [[Fraction(0)] * n for _ in range(n)]
    for x in range(n):
        P[x][x] += Fraction(1, 2)
        P[x][min(x + 1, n - 1)] += a
        P[x][max(x - 1, 0)] += b
    tags = _tags("biased_segment", {"n": n, "up_prob": up}, lazy=True, reversible=True, transitive=(up == Fraction(1, 2) and n == 2), curved=YES)
    return build_chain(P, tags=tags)


def directed_lazy_cycle(n: int) -> Chain:
    """P(x, x) = P(x, x+1) = 1/2: a non-reversible chain with asymmetric support."""
    if n < 3:
        raise SizeError("directed cycle needs n >= 3")
    if n > MAX_STATES:
        raise SizeError(f"cycle is capped at {MAX_STATES} states")
    half = Fraction(1, 2)
    P = [[Fraction(0)] * n for _ in range(n)]
    for x in range(n):
        P[x][x] = half
        P[x][(x + 1) % n] = half
    tags = _tags("directed_lazy_cycle", {"n": n}, lazy=True, reversible=False, transitive=True, curved=YES)
    return build_chain(P, tags=tags)


def graph_walk(n: int, edges, lazy: bool = True, curved: str = UNKNOWN) -> Chain:
    """Simple random walk on an undirected graph given by an edge list."""
    if n < 1 or n > MAX_STATES:
        raise SizeError(f"graph size must lie in [1, {MAX_STATES}]")
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise ValueError("loops are not allowed")
        nbrs[u].append(v)
        nbrs[v].append(u)
    P = [[Fraction(0)] * n for _ in range(n)]
    for x in range(n):
        if not nbrs[x]:
            P[x][x] = Fraction(1)
            continue
        w = Fraction(1, len(nbrs[x]))
        for y in nbrs[x]:
            P[x][y] += w
    if lazy:
        P = [[p / 2 + (Fraction(1, 2) if i == j else 0) for j, p in enumerate(row)] for i, row in enumerate(P)]
    params = {"n": n, "edges": [list(e) for e in edges], "lazy": lazy, "curved": curved}
    tags = _tags("graph_walk", params, lazy=lazy, reversible=True, transitive=UNKNOWN, curved=curved)
    return build_chain(P, tags=tags)


def double_star(k: int = 3, lazy: bool = True) -> Chain:
    """Two adjacent hubs, each carrying ``k`` leaves.

    Lazy random walk on this tree is negatively curved across the central
    edge once ``k >= 2``.
    """
    edges = [(0, 1)] + [(0, 2 + i) for i in range(k)] + [(1, 2 + k + i) for i in range(k)]
    chain = graph_walk(2 + 2 * k, edges, lazy=lazy, curved=NO)
    tags = _tags("double_star", {"k": k, "lazy": lazy}, lazy=lazy, reversible=True, transitive=False, curved=NO)
    return build_chain(chain.P, tags=tags)


FAMILIES = {
    "cycle": cycle,
    "hypercube_times_cycle": hypercube_times_cycle,
    "abelian_cayley": abelian_cayley,
    "transposition_walk": transposition_walk,
    "biased_segment": biased_segment,
    "directed_lazy_cycle": directed_lazy_cycle,
    "graph_walk": graph_walk,
    "double_star": double_star,
}


def _cid(spec: ChainSpec) -> str:
    p = spec.params
    bits = [spec.family]
    for key in sorted(p):
        v = p[key]
        if isinstance(v, bool):
            v = "lazy" if v and key == "lazy" else ("nonlazy" if key == "lazy" else str(v))
            bits.append(v)
        elif isinstance(v, (list, tuple)):
            bits.append(f"{key}=" + "x".join(map(str, v)))
        else:
            bits.append(f"{key}={v}")
    return "-".join(bits)


DEFAULT_CORPUS: list[tuple[str, ChainSpec]] = [
    (_cid(s), s)
    for s in [
        ChainSpec("cycle", {"n": 4, "lazy": True}),
        ChainSpec("cycle", {"n": 6, "lazy": True}),
        ChainSpec("cycle", {"n": 9, "lazy": True}),
        ChainSpec("cycle", {"n": 16, "lazy": True}),
        ChainSpec("cycle", {"n": 5, "lazy": False}),
        ChainSpec("hypercube_times_cycle", {"d": 1, "n": 4, "lazy": True}),
        ChainSpec("hypercube_times_cycle", {"d": 2, "n": 6, "lazy": True}),
        ChainSpec("abelian_cayley", {"moduli": [2], "generators": [[1]], "lazy": True}),
        ChainSpec("abelian_cayley", {"moduli": [2, 2], "generators": [[1, 0], [0, 1], [1, 1]], "lazy": True}),
        ChainSpec("abelian_cayley", {"moduli": [16], "seed": 0, "lazy": True}),
        ChainSpec("abelian_cayley", {"moduli": [3, 5], "seed": 1, "lazy": True}),
        ChainSpec("transposition_walk", {"m": 3, "lazy": True}),
        ChainSpec("transposition_walk", {"m": 4, "lazy": True}),
        ChainSpec("biased_segment", {"n": 3, "up_prob": Fraction(3, 4)}),
        ChainSpec("biased_segment", {"n": 8, "up_prob": Fraction(3, 4)}),
        ChainSpec("biased_segment", {"n": 16, "up_prob": Fraction(3, 4)}),
        ChainSpec("biased_segment", {"n": 32, "up_prob": Fraction(3, 4)}),
        ChainSpec("directed_lazy_cycle", {"n": 3}),
        ChainSpec("directed_lazy_cycle", {"n": 7}),
        ChainSpec("double_star", {"k": 3, "lazy": True}),
    ]
]


def corpus(name: str) -> list[tuple[str, Chain]]:
    if name == "none":
        return []
    if name == "default":
        return [(cid, spec.build()) for cid, spec in DEFAULT_CORPUS]
    raise ValueError(f"unknown corpus {name!r}")
