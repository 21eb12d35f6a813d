"""Total-variation profiles, mixing times, displacement and transitivity."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .chain import DEFAULT_BIT_BUDGET, Chain, DirectedMetric, Power, integer_form, iter_powers
from .errors import TooLargeError

THRESHOLD = Fraction(1, 4)
TRANSITIVE_SEARCH_LIMIT = 12


def tv_distance(p: Sequence, q: Sequence):
    """Half the L1 distance; exact for ``Fraction`` inputs."""
    return sum(abs(a - b) for a, b in zip(p, q)) / 2


def default_horizon(chain: Chain) -> int:
    """ceil(32 diam^2 / P_min)."""
    return max(1, math.ceil(32 * chain.metric.diam**2 / Fraction(chain.p_min)))


class _Stationary:
    """Integer form of pi for fast exact evaluation against P^t numerators."""

    def __init__(self, chain: Chain):
        self.exact = chain.exact
        self.flt = np.asarray([float(p) for p in chain.pi])
        if chain.exact:
            self.num, self.den = integer_form(chain.pi)


def row_tv(power: Power, st: _Stationary) -> list:
    """TV distance of every row of P^t to pi."""
    if power.exact and st.exact:
        diff = power.num * st.den - st.num[None, :] * power.den
        sums = np.abs(diff).sum(axis=1)
        scale = 2 * st.den * power.den
        return [Fraction(int(s), scale) for s in sums]
    return list(0.5 * np.abs(power.flt - st.flt[None, :]).sum(axis=1))


def pairwise_tv(power: Power):
    """Matrix of TV distances between rows x, y of P^t.

    Exact powers return ``(numerators, denominator)`` with
    ``TV = numerators / denominator``; float powers return a float matrix
    and ``None``.
    """
    if power.exact:
        num = power.num
        sums = np.abs(num[:, None, :] - num[None, :, :]).sum(axis=2)
        return sums, 2 * power.den
    M = power.flt
    return 0.5 * np.abs(M[:, None, :] - M[None, :, :]).sum(axis=2), None


def displacement_at(power: Power, st: _Stationary, d: np.ndarray):
    """E[dist(X_0, X_t)] with X_0 ~ pi."""
    if power.exact and st.exact:
        dobj = d.astype(object)
        total = int((st.num[:, None] * power.num * dobj).sum())
        return Fraction(total, st.den * power.den)
    return float((st.flt[:, None] * power.flt * d).sum())


def effective_diameter(chain: Chain, metric: DirectedMetric | None = None):
    metric = metric or chain.metric
    pi = chain.pi
    n = chain.n
    return sum((pi[x] * pi[y] * int(metric.d[x, y]) for x in range(n) for y in range(n) if x != y), chain.zero())


@dataclass
class MixingProfile:
    tv_curve: list
    avg_tv_curve: list
    t_mix: int | None
    t_mix_sharp: int | None
    horizon: int
    truncated: bool
    exact_until: int | None
    rows_equal: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.exact_until is not None and self.t_mix is not None and self.t_mix <= self.exact_until


def mixing_profile(chain: Chain, horizon: int | None = None, bit_budget: int = DEFAULT_BIT_BUDGET, threshold=THRESHOLD) -> MixingProfile:
    """d_tv(t) and d_tv#(t) from t = 0 until both reach ``threshold``.

    ``exact_until`` is the last t computed in exact arithmetic (``None`` for
    float chains); later values are floats.  ``truncated`` is set when the
    horizon is reached first.
    """
    horizon = default_horizon(chain) if horizon is None else horizon
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    st = _Stationary(chain)
    pi = chain.pi if chain.exact else list(st.flt)
    tv, avg, equal = [], [], []
    t_mix = t_mix_sharp = None
    exact_until = None
    for power in iter_powers(chain, bit_budget):
        rows = row_tv(power, st)
        worst = max(rows)
        if isinstance(worst, Fraction):
            mean = sum(p * r for p, r in zip(pi, rows))
            exact_until = power.t
            equal.append(all(r == rows[0] for r in rows))
        else:
            rows_f = np.asarray(rows, dtype=float)
            mean = float(st.flt @ rows_f)
            equal.append(bool(np.ptp(rows_f) <= 1e-12))
        tv.append(worst)
        avg.append(mean)
        if t_mix_sharp is None and mean <= threshold:
            t_mix_sharp = power.t
        if t_mix is None and worst <= threshold:
            t_mix = power.t
        if t_mix is not None and t_mix_sharp is not None:
            break
        if power.t >= horizon:
            break
    truncated = t_mix is None or t_mix_sharp is None
    return MixingProfile(tv, avg, t_mix, t_mix_sharp, horizon, truncated, exact_until, equal)


@dataclass
class DisplacementCurve:
    values: list
    diam_sharp: object
    diam: int
    exact_until: int | None

    def __getitem__(self, t: int):
        return self.values[t]


def displacement_curve(chain: Chain, metric: DirectedMetric | None = None, horizon: int = 0, bit_budget: int = DEFAULT_BIT_BUDGET) -> DisplacementCurve:
    """E[dist(X_0, X_t)] for t = 0..horizon, plus the effective diameter."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    metric = metric or chain.metric
    st = _Stationary(chain)
    values = []
    exact_until = None
    for power in iter_powers(chain, bit_budget):
        v = displacement_at(power, st, metric.d)
        if isinstance(v, Fraction):
            exact_until = power.t
        values.append(v)
        if power.t >= horizon:
            break
    return DisplacementCurve(values, effective_diameter(chain, metric), metric.diam, exact_until)


def _signature(P, x):
    return (P[x][x], tuple(sorted(P[x])), tuple(sorted(row[x] for row in P)))


def _find_automorphism(P, sig, src: int, dst: int) -> list[int] | None:
    n = len(P)
    order = [src] + [u for u in range(n) if u != src]
    image = [-1] * n
    used = [False] * n

    def consistent(u, v):
        for w in range(n):
            iw = image[w]
            if iw < 0:
                continue
            if P[u][w] != P[v][iw] or P[w][u] != P[iw][v]:
                return False
        return P[u][u] == P[v][v]

    def extend(pos):
        if pos == n:
            return True
        u = order[pos]
        options = [dst] if pos == 0 else range(n)
        for v in options:
            if used[v] or sig[u] != sig[v] or not consistent(u, v):
                continue
            image[u], used[v] = v, True
            if extend(pos + 1):
                return True
            image[u], used[v] = -1, False
        return False

    return list(image) if extend(0) else None


def is_transitive(chain: Chain, limit: int = TRANSITIVE_SEARCH_LIMIT) -> bool:
    """Whether the kernel-preserving bijections act transitively on states.

    Exhaustive backtracking up to ``limit`` states.  Larger chains are only
    accepted when their generator tags them transitive by construction.
    """
    n = chain.n
    if n > limit:
        if isinstance(chain.tags.get("transitive"), bool):
            return chain.tags["transitive"]
        raise TooLargeError(f"automorphism search is limited to {limit} states")
    P = chain.P
    sig = [_signature(P, x) for x in range(n)]
    reached = {0}
    for y in range(1, n):
        if y in reached:
            continue
        auto = _find_automorphism(P, sig, 0, y)
        if auto is None:
            return False
        # Orbit closure: iterate the automorphism to collect more images of 0.
        z = 0
        for _ in range(n):
            z = auto[z]
            reached.add(z)
    return True


TRACE_COLUMNS = ["t", "d_tv", "d_tv_sharp", "displacement", "phi_pt"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}|{float(v):.12f}"
    return f"{float(v):.12f}"


def write_trace(path, profile: MixingProfile, disp: DisplacementCurve, phi_by_t: dict | None = None) -> None:
    """CSV trace, one row per t.  Rationals render as ``p/q|decimal``."""
    phi_by_t = phi_by_t or {}
    steps = max(len(profile.tv_curve), len(disp.values))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for t in range(steps):
            writer.writerow(
                [
                    t,
                    _fmt(profile.tv_curve[t] if t < len(profile.tv_curve) else None),
                    _fmt(profile.avg_tv_curve[t] if t < len(profile.avg_tv_curve) else None),
                    _fmt(disp.values[t] if t < len(disp.values) else None),
                    _fmt(phi_by_t.get(t)),
                ]
            )
