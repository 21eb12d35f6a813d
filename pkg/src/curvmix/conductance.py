"""Conductance of P and its powers, spectra of reversible chains, and the
two functional inequalities (L1-Cheeger and concentration).

Conductance is an exhaustive minimum over subsets, enumerated in Gray-code
order by a compiled kernel.  For exact chains the kernel works on integer
numerators stored in float64 (exact while all sums stay below 2**53), so its
minimum is exact; the candidates tied at the float minimum are then
re-ranked with ``Fraction`` arithmetic to apply the smallest-bitmask
tie-break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .chain import Chain, Power, integer_form, is_reversible
from .errors import NotCenteredError, NotReversibleError, NumericalFailure, TooLargeError
from .report import InequalityReport, inequality

DEFAULT_ENUM_LIMIT = 24
TIE_CAP = 1 << 20
EXACT_FLOAT_LIMIT = 2**53
FLOAT_HALF_TOL = 1e-12
RERANK_WINDOW = 1e-6


@dataclass(frozen=True)
class ConductanceValue:
    t: int
    phi: object
    argmin_set: int
    exact: bool
    upper_bound: bool = False
    ties: int = 1

    @property
    def members(self) -> list[int]:
        return [i for i in range(self.argmin_set.bit_length()) if self.argmin_set >> i & 1]

    def to_json_dict(self) -> dict:
        from .report import render

        return {
            "t": self.t,
            "phi": render(self.phi),
            "argmin_set": self.members,
            "exact": self.exact,
            "upper_bound": self.upper_bound,
            "ties": self.ties,
        }


@numba.njit(cache=True, nogil=True)
def _gray_min(Q, w, half, cap):
    n = Q.shape[0]
    S = Q + Q.T
    outrow = np.empty(n)
    for k in range(n):
        outrow[k] = Q[k].sum() - Q[k, k]
    # inner[k] = sum of S[k, y] over current members y (k itself included if present)
    inner = np.zeros(n)
    in_set = np.zeros(n, np.bool_)
    masks = np.zeros(cap, np.int64)
    outs = np.zeros(cap)
    weights = np.zeros(cap)
    out = 0.0
    mass = 0.0
    mask = 0
    best = np.inf
    count = 0
    for i in range(1, 1 << n):
        k = 0
        while not (i >> k) & 1:
            k += 1
        if in_set[k]:
            in_set[k] = False
            out += inner[k] - S[k, k] - outrow[k]
            mass -= w[k]
            for y in range(n):
                inner[y] -= S[y, k]
        else:
            in_set[k] = True
            out += outrow[k] - inner[k]
            mass += w[k]
            for y in range(n):
                inner[y] += S[y, k]
        mask ^= 1 << k
        if mass > 0 and mass <= half:
            r = out / mass
            if r < best:
                best = r
                count = 0
            if r == best:
                if count < cap:
                    masks[count] = mask
                    outs[count] = out
                    weights[count] = mass
                count += 1
    return best, masks, outs, weights, count


@numba.njit(cache=True, nogil=True)
def _gray_collect(Q, w, half, thresh, cap):
    """Every admissible subset whose ratio is at most ``thresh``."""
    n = Q.shape[0]
    S = Q + Q.T
    outrow = np.empty(n)
    for k in range(n):
        outrow[k] = Q[k].sum() - Q[k, k]
    inner = np.zeros(n)
    in_set = np.zeros(n, np.bool_)
    masks = np.zeros(cap, np.int64)
    out = 0.0
    mass = 0.0
    mask = 0
    count = 0
    for i in range(1, 1 << n):
        k = 0
        while not (i >> k) & 1:
            k += 1
        if in_set[k]:
            in_set[k] = False
            out += inner[k] - S[k, k] - outrow[k]
            mass -= w[k]
            for y in range(n):
                inner[y] -= S[y, k]
        else:
            in_set[k] = True
            out += outrow[k] - inner[k]
            mass += w[k]
            for y in range(n):
                inner[y] += S[y, k]
        mask ^= 1 << k
        if mass > 0 and mass <= half and out <= thresh * mass:
            if count < cap:
                masks[count] = mask
            count += 1
    return masks, count


def _power_matrix(chain: Chain, t: int, bit_budget: int) -> Power:
    if chain.exact:
        N, D = chain.integer_matrix
        den = D**t
        if den.bit_length() <= bit_budget:
            num = np.zeros((chain.n, chain.n), dtype=object)
            num[:, :] = 0
            for i in range(chain.n):
                num[i, i] = 1
            base, e = N, t
            while e:
                if e & 1:
                    num = num.dot(base)
                e >>= 1
                if e:
                    base = base.dot(base)
            return Power(t, np.linalg.matrix_power(chain.dense, t), num, den)
    return Power(t, np.linalg.matrix_power(chain.dense, t))


def conductance(
    chain: Chain,
    t: int = 1,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
    power: Power | None = None,
    bit_budget: int = 4096,
) -> ConductanceValue:
    """Exact Phi(P**t) by exhaustive subset enumeration.

    Ties between optimal subsets are broken by the smallest bitmask.
    """
    n = chain.n
    if n < 2:
        raise ValueError("no subset A with 0 < pi(A) <= 1/2 exists for a single state")
    if n > enum_limit:
        raise TooLargeError(f"{n} states exceed the enumeration limit {enum_limit}")
    if t < 1:
        raise ValueError("t must be at least 1")
    if power is None:
        power = _power_matrix(chain, t, bit_budget)

    exact = False
    rerank = False
    if chain.exact:
        pnum, L = integer_form(chain.pi)
        if L < EXACT_FLOAT_LIMIT and power.exact and L * power.den < EXACT_FLOAT_LIMIT:
            w = np.array([float(v) for v in pnum])
            half = L / 2
            Q = (pnum[:, None] * power.num).astype(float)
            exact = True
        else:
            w = np.array([float(p) for p in chain.pi])
            half = 0.5 + FLOAT_HALF_TOL
            Q = w[:, None] * power.flt
            rerank = power.exact
    else:
        w = np.asarray(chain.pi, dtype=float)
        half = 0.5 + FLOAT_HALF_TOL
        Q = w[:, None] * power.flt

    Q = np.ascontiguousarray(Q)
    best, masks, outs, weights, count = _gray_min(Q, w, half, TIE_CAP)
    if count > TIE_CAP:
        raise NumericalFailure(f"{count} subsets tie at the minimum; raise TIE_CAP")
    masks, outs, weights = masks[:count], outs[:count], weights[:count]

    if exact:
        ranked = sorted(
            (Fraction(int(o), int(wt) * power.den), int(m)) for m, o, wt in zip(masks, outs, weights)
        )
    elif rerank:
        # Rounded sums: collect a window around the float minimum, then
        # decide among the candidates exactly.
        cand, total = _gray_collect(Q, w, half + FLOAT_HALF_TOL, best * (1 + RERANK_WINDOW), TIE_CAP)
        if total > TIE_CAP:
            raise NumericalFailure(f"{total} near-optimal subsets; raise TIE_CAP")
        cand = [int(m) for m in cand[:total]]
        cand = [m for m in cand if 2 * sum(chain.pi[x] for x in range(n) if m >> x & 1) <= 1]
        ranked = sorted((subset_ratio(chain, power, m), m) for m in cand)
        exact = True
    else:
        return ConductanceValue(t, float(best), int(masks.min()), False, ties=int(count))
    phi, argmin = ranked[0]
    ties = sum(1 for r, _ in ranked if r == phi)
    return ConductanceValue(t, phi, argmin, True, ties=ties)


def subset_ratio(chain: Chain, power: Power, mask: int):
    """Escape ratio of the subset encoded by ``mask``, from a direct double sum."""
    n = chain.n
    A = np.array([bool(mask >> x & 1) for x in range(n)])
    if chain.exact and power.exact:
        pnum, L = integer_form(chain.pi)
        flow = int((pnum[A][:, None] * power.num[np.ix_(A, ~A)]).sum())
        return Fraction(flow, int(pnum[A].sum()) * power.den)
    pi = np.asarray([float(p) for p in chain.pi])
    return float((pi[A][:, None] * power.flt[np.ix_(A, ~A)]).sum() / pi[A].sum())


def conductance_upper_bound(chain: Chain, t: int = 1) -> ConductanceValue:
    """Sweep heuristic for chains too large to enumerate.

    Orders states by the second eigenvector of the additive symmetrisation
    of ``diag(pi) P**t`` and scans prefixes.  The result is only an upper
    bound on Phi(P**t) and is flagged as such.
    """
    n = chain.n
    if n < 2:
        raise ValueError("no admissible subset for a single state")
    pi = np.asarray([float(p) for p in chain.pi])
    Pt = np.linalg.matrix_power(chain.dense, t)
    Q = pi[:, None] * Pt
    S = (Q + Q.T) / 2
    d = 1 / np.sqrt(pi)
    M = d[:, None] * S * d[None, :]
    _, vecs = np.linalg.eigh(M)
    order = np.argsort(vecs[:, -2] * d, kind="stable")
    best, best_mask = np.inf, 0
    for seq in (order, order[::-1]):
        mask, mass = 0, 0.0
        for x in seq[:-1]:
            mask |= 1 << int(x)
            mass += pi[x]
            if mass <= 0.5 + FLOAT_HALF_TOL:
                A = np.array([mask >> i & 1 for i in range(n)], dtype=bool)
                r = Q[np.ix_(A, ~A)].sum() / mass
                if r < best:
                    best, best_mask = r, mask
    return ConductanceValue(t, float(best), best_mask, False, upper_bound=True)


@dataclass(frozen=True)
class SpectralProfile:
    eigenvalues: tuple[float, ...]

    @property
    def lambda2(self) -> float:
        return self.eigenvalues[1]

    @property
    def t_rel(self) -> float:
        return 1.0 / (1.0 - self.lambda2)


T_REL_TOL = 1e-9


def spectral_profile(chain: Chain) -> SpectralProfile:
    """Eigenvalues of a reversible chain, in decreasing order."""
    if chain.n < 2:
        raise ValueError("spectral profile needs at least two states")
    if not is_reversible(chain):
        raise NotReversibleError("detailed balance fails")
    pi = np.asarray([float(p) for p in chain.pi])
    r = np.sqrt(pi)
    S = r[:, None] * chain.dense / r[None, :]
    S = (S + S.T) / 2
    vals = np.sort(np.linalg.eigvalsh(S))[::-1]
    return SpectralProfile(tuple(float(v) for v in vals))


def _neighbor_increments(chain: Chain, f):
    pairs = chain.metric.neighbor_pairs()
    zero = f[0] * 0
    up = max([max(f[y] - f[x], zero) for x, y in pairs], default=zero)
    down = max([max(f[x] - f[y], zero) for x, y in pairs], default=zero)
    return up, down


def _exact_vector(f) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in f)


def check_l1_cheeger(chain: Chain, t: int, f, phi: ConductanceValue | None = None, power: Power | None = None) -> InequalityReport:
    """sum pi|f| <= (1/Phi(P^t)) sum pi(x) P^t(x,y) |f(y) - f(x)| for centred f."""
    n = chain.n
    pi = chain.pi
    if power is None:
        power = _power_matrix(chain, t, 4096)
    if phi is None:
        phi = conductance(chain, t, power=power)
    exact = chain.exact and power.exact and phi.exact and _exact_vector(f)
    if exact:
        f = [Fraction(v) for v in f]
        mean = sum(p * v for p, v in zip(pi, f))
        if mean != 0:
            raise NotCenteredError(f"pi f = {mean} != 0")
    else:
        f = [float(v) for v in f]
        pi = [float(p) for p in pi]
        mean = sum(p * v for p, v in zip(pi, f))
        if abs(mean) > 1e-9 * max(1.0, max(abs(v) for v in f)):
            raise NotCenteredError(f"pi f = {mean:.3e} is not zero")
        f = [v - mean for v in f]
    lhs = sum(p * abs(v) for p, v in zip(pi, f))
    grad = sum(pi[x] * power.entry(x, y) * abs(f[y] - f[x]) for x in range(n) for y in range(n) if f[y] != f[x])
    phi_value = phi.phi if exact else float(phi.phi)
    # Phi(P^t) = 0 happens for periodic chains; the bound is then vacuous.
    if phi_value > 0:
        return inequality("lm:L1", lhs, grad / phi_value, params={"t": t})
    return inequality("lm:L1", lhs, math.inf, exact_pass=exact or None, params={"t": t})


def check_concentration(chain: Chain, f, a, phi: ConductanceValue | None = None) -> list[InequalityReport]:
    """Both tails of the concentration inequality; lazy chains also get the 2*Phi form."""
    if not a > 0:
        raise ValueError("a must be positive")
    if phi is None:
        phi = conductance(chain, 1)
    exact = chain.exact and phi.exact and _exact_vector(f) and isinstance(a, (int, Fraction))
    pi = chain.pi if exact else [float(p) for p in chain.pi]
    f = [Fraction(v) for v in f] if exact else [float(v) for v in f]
    phi_value = phi.phi if exact else float(phi.phi)
    mean = sum(p * v for p, v in zip(pi, f))
    upper = sum(p for p, v in zip(pi, f) if v >= mean + a)
    lower = sum(p for p, v in zip(pi, f) if v <= mean - a)
    up, down = _neighbor_increments(chain, f)
    increment = min(up, down)
    symmetric = bool((chain.support == chain.support.T).all())
    params = {"a": a, "increment_up": up, "increment_down": down, "symmetric_support": symmetric}
    out = []
    factors = [("lm:concentration", 1)]
    if chain.is_lazy:
        factors.append(("lm:concentration:lazy", 2))
    for statement, c in factors:
        bound = increment / (a * c * phi_value) if phi_value > 0 else math.inf
        decided = True if exact and phi_value == 0 else None
        out.append(inequality(statement, upper, bound, exact_pass=decided, params={**params, "tail": "upper"}))
        out.append(inequality(statement, lower, bound, exact_pass=decided, params={**params, "tail": "lower"}))
    return out
