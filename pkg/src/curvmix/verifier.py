"""Evaluate every inequality on a corpus of chains.

Each check takes a :class:`ChainAnalysis` (a per-chain cache of the shared
quantities) and returns :class:`~curvmix.report.InequalityReport` records.
Unmet hypotheses produce ``skip`` records; a corpus chain whose computed
structure contradicts its generator tags produces ``corpus-error``.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import __version__
from .chain import DEFAULT_BIT_BUDGET, FLOAT, Chain, Power, build_chain, is_reversible, iter_powers
from .conductance import (
    DEFAULT_ENUM_LIMIT,
    T_REL_TOL,
    ConductanceValue,
    check_concentration,
    check_l1_cheeger,
    conductance,
    spectral_profile,
    subset_ratio,
)
from .errors import NotReversibleError, TooLargeError, TruncationError
from .mixing import (
    THRESHOLD,
    _Stationary,
    default_horizon,
    displacement_at,
    effective_diameter,
    is_transitive,
    mixing_profile,
    pairwise_tv,
    row_tv,
)
from .report import (
    CORPUS_ERROR,
    FAIL,
    PASS,
    SCHEMA_VERSION,
    SKIP,
    InequalityReport,
    inequality,
    render,
    skipped,
    tightest,
)
from .transport import NEGATIVE, NONNEGATIVE, certify_curvature, coupling_kernel, good_optimal_coupling

FULL_CURVATURE_LIMIT = 16
CONFIDENCE = 0.99
BUILTIN_SEED = 0xC0FFEE


@dataclass
class VerifyConfig:
    seed: int = 0
    horizon: int | None = None
    enum_limit: int = DEFAULT_ENUM_LIMIT
    bit_budget: int = DEFAULT_BIT_BUDGET
    mode: str = "exact"
    cutoff_p: Fraction = Fraction(1, 4)
    draws: int = 200
    super_trials: int = 100_000
    chain_super_trials: int = 10_000
    threads: int = 1

    def rng(self, *keys: str) -> np.random.Generator:
        """Independent stream per (chain, statement), all derived from ``seed``."""
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32 & 0xFFFFFFFF]
        words += [zlib.crc32(k.encode()) for k in keys]
        return np.random.default_rng(np.random.SeedSequence(words))

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "enum_limit": self.enum_limit,
            "bit_budget": self.bit_budget,
            "mode": self.mode,
            "cutoff_p": f"{self.cutoff_p.numerator}/{self.cutoff_p.denominator}",
            "draws": self.draws,
            "super_trials": self.super_trials,
            "chain_super_trials": self.chain_super_trials,
        }


def _le_sqrt(a, b) -> bool:
    """a <= sqrt(b), decided exactly for rational inputs."""
    return a <= 0 or a * a <= b


def _ge_sqrt(a, b) -> bool:
    """a >= sqrt(b)."""
    return a >= 0 and a * a >= b


class ChainAnalysis:
    """Lazily computed quantities shared by the checks on one chain."""

    def __init__(self, chain_id: str, chain: Chain, config: VerifyConfig | None = None):
        self.chain_id = chain_id
        self.config = config or VerifyConfig()
        if self.config.mode == FLOAT and chain.exact:
            chain = build_chain(chain.dense, FLOAT, labels=chain.labels, tags=chain.tags)
        self.chain = chain
        self._powers: list[Power] = []
        self._power_iter = iter_powers(chain, self.config.bit_budget)
        self._phi: dict[int, ConductanceValue] = {}

    @property
    def n(self) -> int:
        return self.chain.n

    @cached_property
    def metric(self):
        return self.chain.metric

    @cached_property
    def st(self) -> _Stationary:
        return _Stationary(self.chain)

    @cached_property
    def p_min(self):
        return self.chain.p_min

    @cached_property
    def curvature(self):
        return certify_curvature(self.chain, self.metric, full=self.n <= FULL_CURVATURE_LIMIT)

    @property
    def curved(self) -> bool:
        return self.curvature.verdict == NONNEGATIVE

    @property
    def lazy(self) -> bool:
        return self.chain.is_lazy

    @cached_property
    def reversible(self) -> bool:
        return is_reversible(self.chain)

    @cached_property
    def transitive(self) -> bool | None:
        try:
            return is_transitive(self.chain)
        except TooLargeError:
            return None

    @cached_property
    def spectral(self):
        if self.n < 2 or not self.reversible:
            return None
        return spectral_profile(self.chain)

    @cached_property
    def horizon(self) -> int:
        return self.config.horizon or default_horizon(self.chain)

    @cached_property
    def mixing(self):
        return mixing_profile(self.chain, self.horizon, self.config.bit_budget)

    @cached_property
    def diam_sharp(self):
        return effective_diameter(self.chain, self.metric)

    @property
    def enumerable(self) -> bool:
        return 2 <= self.n <= self.config.enum_limit

    def power(self, t: int) -> Power:
        while len(self._powers) <= t:
            self._powers.append(next(self._power_iter))
        return self._powers[t]

    def phi(self, t: int = 1) -> ConductanceValue:
        if t not in self._phi:
            self._phi[t] = conductance(self.chain, t, self.config.enum_limit, power=self.power(t))
        return self._phi[t]

    def exact(self, value) -> bool:
        return isinstance(value, (int, Fraction))

    def hypotheses(self) -> dict:
        return {
            "lazy": self.lazy,
            "reversible": self.reversible,
            "transitive": self.transitive,
            "nonneg_curved": self.curvature.verdict,
            "n": self.n,
            "enumerable": self.enumerable,
            "p_min": self.p_min,
        }


# -- hypothesis gates --------------------------------------------------------


class HypothesisSkip(Exception):
    pass


def _require(a: ChainAnalysis, *, lazy=False, curved=False, reversible=False, transitive=False, enumerable=False, pmin=None):
    missing = []
    if lazy and not a.lazy:
        missing.append("lazy")
    if curved and not a.curved:
        missing.append(f"non-negative curvature (verdict {a.curvature.verdict})")
    if reversible and not a.reversible:
        missing.append("reversible")
    if transitive and not a.transitive:
        missing.append("transitive" if a.transitive is False else "transitivity undecided")
    if enumerable and a.n < 2:
        missing.append("a second state (no admissible conductance set)")
    elif enumerable and not a.enumerable:
        missing.append(f"n <= {a.config.enum_limit} for exhaustive conductance")
    if pmin is not None and not a.p_min >= pmin:
        missing.append(f"P_min >= {pmin}")
    if missing:
        raise HypothesisSkip("requires " + ", ".join(missing))


def _mixing(a: ChainAnalysis, bound=None):
    """Mixing profile; a truncated profile is extended up to ``bound`` once."""
    prof = a.mixing
    if prof.truncated and bound is not None and bound > prof.horizon:
        prof = mixing_profile(a.chain, math.ceil(bound) + 1, a.config.bit_budget)
    if prof.truncated:
        raise TruncationError(f"threshold not reached within horizon {prof.horizon}")
    return prof


# -- structure and curvature -------------------------------------------------


def check_structure(a: ChainAnalysis) -> list[InequalityReport]:
    expected = a.chain.tags.get("expected", {})
    computed = {"lazy": a.lazy, "reversible": a.reversible, "transitive": a.transitive}
    mismatched = [k for k, v in computed.items() if isinstance(expected.get(k), bool) and v is not None and v != expected[k]]
    out = [
        InequalityReport(
            "structure",
            status=CORPUS_ERROR if mismatched else PASS,
            params={"computed": computed, "expected": expected},
            note=f"tag mismatch: {', '.join(mismatched)}" if mismatched else "",
        )
    ]
    cert = a.curvature
    want = expected.get("nonneg_curved", "unknown")
    bad = (want == "yes" and cert.verdict != NONNEGATIVE) or (want == "no" and cert.verdict != NEGATIVE)
    params = {"verdict": cert.verdict, "max_w": render(cert.max_w), "pairs_checked": cert.pairs_checked, "full_check": cert.full_check}
    if cert.witness is not None:
        params.update(witness=list(cert.witness), witness_w=render(cert.witness_w), witness_dual=list(cert.witness_dual.f))
    out.append(
        InequalityReport(
            "curvature",
            status=CORPUS_ERROR if bad else PASS,
            mode="exact" if a.chain.exact else "float",
            params=params,
            note=f"expected {want}, certified {cert.verdict}" if bad else "",
        )
    )
    return out


# -- couplings ---------------------------------------------------------------


def check_coupling_lemma(a: ChainAnalysis) -> list[InequalityReport]:
    """Doubly optimal couplings put at least P_min on strictly closer pairs."""
    _require(a, lazy=True)
    n, d = a.n, a.metric
    lemma, contraction = [], []
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            gc = good_optimal_coupling(a.chain, d, x, y)
            lemma.append(inequality("lm:coupling", a.p_min, gc.gamma_mass, params={"x": x, "y": y}))
            contraction.append(inequality("coupling:contraction", gc.coupling.cost, d(x, y), params={"x": x, "y": y}))
    if not lemma:
        return [skipped("lm:coupling", "single state")]
    worst = tightest(lemma)
    worst.params["pairs"] = len(lemma)
    worst.params["violations"] = sum(r.status == FAIL for r in lemma)
    out = [worst]
    if a.curved:
        worst = tightest(contraction)
        worst.params["pairs"] = len(contraction)
        out.append(worst)
    return out


# -- total-variation decay ---------------------------------------------------


def check_tv_decay(a: ChainAnalysis) -> list[InequalityReport]:
    """TV between rows x, y of P^t against dist(x, y) sqrt(10 / ((t+1) P_min)).

    Both TV_xy(t) and the bound are non-increasing in t, so once every pair
    satisfies TV_xy(t0) <= dist(x, y) sqrt(10 / ((H+1) P_min)) all t up to
    the horizon H are settled at once.
    """
    _require(a, lazy=True, curved=True)
    n, H = a.n, a.horizon
    if n < 2:
        return [skipped("th:tvdecay", "single state")]
    D = a.metric.d.astype(object)
    off = ~np.eye(n, dtype=bool)
    pm = a.p_min
    exact_chain = a.chain.exact
    if exact_chain:
        pa, pb = pm.numerator, pm.denominator
    worst_ratio, worst = -1.0, None
    violations = 0
    t_stop = H
    checked = 0
    for power in iter_powers(a.chain, a.config.bit_budget):
        t = power.t
        tv, den = pairwise_tv(power)
        checked += 1
        if den is not None and exact_chain:
            S2 = tv * tv
            rhs2 = D * D * 10 * pb * den * den
            bad = off & (S2 * ((t + 1) * pa) > rhs2)
            settled = bool((S2[off] * ((H + 1) * pa) <= rhs2[off]).all())
            tvf = tv.astype(float) / float(den) if den.bit_length() < 1000 else np.array([[float(Fraction(int(v), den)) for v in row] for row in tv])
        else:
            tvf = np.asarray(tv, dtype=float)
            pmf = float(pm)
            df = a.metric.d.astype(float)
            bound = df * math.sqrt(10 / ((t + 1) * pmf))
            bad = off & (tvf > bound * (1 + 1e-9) + 1e-12)
            settled = bool((tvf[off] <= df[off] * math.sqrt(10 / ((H + 1) * pmf))).all())
        violations += int(bad.sum())
        ratio = tvf[off] / (a.metric.d[off] * math.sqrt(10 / ((t + 1) * float(pm))))
        k = int(np.argmax(ratio))
        if ratio[k] > worst_ratio:
            xs, ys = np.nonzero(off)
            x, y = int(xs[k]), int(ys[k])
            worst_ratio = float(ratio[k])
            lhs = Fraction(int(tv[x, y]), den) if den is not None else float(tvf[x, y])
            worst = (t, x, y, lhs, bool(bad[x, y]))
        if t >= H or settled:
            t_stop = t
            break
    t, x, y, lhs, failed = worst
    rhs = a.metric(x, y) * math.sqrt(10 / ((t + 1) * float(pm)))
    status_ok = violations == 0
    return [
        inequality(
            "th:tvdecay",
            lhs,
            rhs,
            exact_pass=not failed if status_ok else False,
            mode="exact" if isinstance(lhs, Fraction) else "float",
            params={
                "t": t,
                "x": x,
                "y": y,
                "bound_squared": render(a.metric(x, y) ** 2 * Fraction(10) / ((t + 1) * Fraction(pm))) if exact_chain else None,
                "ratio": worst_ratio,
                "violations": violations,
                "steps_evaluated": checked,
                "certified_through": H,
                "settled_at": t_stop,
            },
        )
    ]


# -- mixing-time corollaries -------------------------------------------------


def check_diam_bound(a: ChainAnalysis) -> list[InequalityReport]:
    _require(a, lazy=True, curved=True)
    pm = Fraction(a.p_min) if a.chain.exact else a.p_min
    bound = 160 * a.metric.diam**2 / pm
    bound_sharp = 640 * a.diam_sharp**2 / pm
    prof = _mixing(a, max(bound, bound_sharp))
    return [
        inequality("co:diam", prof.t_mix, bound, params={"diam": a.metric.diam, "p_min": a.p_min}),
        inequality("eq:effectivediam", prof.t_mix_sharp, bound_sharp, params={"diam_sharp": a.diam_sharp, "p_min": a.p_min}),
    ]


def check_conductance_bound(a: ChainAnalysis) -> list[InequalityReport]:
    _require(a, lazy=True, curved=True, enumerable=True)
    phi = a.phi(1)
    bound = 40 / (a.p_min * phi.phi**2)
    prof = _mixing(a, bound)
    return [inequality("co:conductance", prof.t_mix_sharp, bound, params={"phi": phi.phi, "argmin_set": phi.members, "p_min": a.p_min})]


def main_infimum(a: ChainAnalysis, t_max: int) -> dict:
    """inf over 1 <= t <= t_max of E[dist(X_0, X_t)] / Phi(P^t).

    Subsets optimal at earlier t give an upper bound on Phi(P^t), hence a
    lower bound on the ratio; a t whose lower bound already reaches the
    current best is skipped without enumeration.
    """
    best = best_t = None
    seen: list[int] = []
    ratios = {}
    pruned = 0
    for t in range(1, t_max + 1):
        power = a.power(t)
        disp = displacement_at(power, a.st, a.metric.d)
        if best is not None and seen:
            ub = min(subset_ratio(a.chain, power, m) for m in seen)
            if ub > 0 and _at_least(disp / ub, best):
                pruned += 1
                continue
        phi = a.phi(t)
        if phi.argmin_set not in seen:
            seen.append(phi.argmin_set)
        ratio = disp / phi.phi
        ratios[t] = ratio
        if best is None or ratio < best:
            best, best_t = ratio, t
    return {"best": best, "t": best_t, "pruned": pruned, "ratios": ratios}


def _at_least(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a >= b
    return float(a) >= float(b) * (1 + 1e-9)


def check_main_estimate(a: ChainAnalysis) -> list[InequalityReport]:
    _require(a, lazy=True, curved=True, enumerable=True)
    prof = _mixing(a)
    t_max = min(a.horizon, max(1, 4 * prof.t_mix_sharp))
    inf = main_infimum(a, t_max)
    rhs = 160 / a.p_min * inf["best"] ** 2
    out = [
        inequality(
            "th:main",
            prof.t_mix_sharp,
            rhs,
            params={
                "t": inf["t"],
                "ratio": inf["best"],
                "phi": a.phi(inf["t"]).phi,
                "argmin_set": a.phi(inf["t"]).members,
                "t_max": t_max,
                "truncated": t_max < a.horizon,
                "pruned": inf["pruned"],
            },
        )
    ]
    # t = 1 term versus the conductance corollary: E[dist(X_0, X_1)] <= 1/2
    # for lazy chains, so the first is never larger; equality iff every
    # holding probability is exactly 1/2.
    disp1 = displacement_at(a.power(1), a.st, a.metric.d)
    phi1 = a.phi(1).phi
    at_one = 160 / a.p_min * (disp1 / phi1) ** 2
    cond = 40 / (a.p_min * phi1**2)
    out.append(
        inequality(
            "th:main:t=1",
            at_one,
            cond,
            params={"displacement_1": disp1, "phi": phi1, "equal": at_one == cond},
        )
    )
    return out


def check_expansion_bound(a: ChainAnalysis) -> list[InequalityReport]:
    """Phi <= 19 / sqrt(P_min diam#), with the lazified and non-lazy replays."""
    _require(a, curved=True, enumerable=True)
    phi = a.phi(1).phi
    pm, ds = a.p_min, a.diam_sharp
    exact = a.exact(phi) and a.exact(pm) and a.exact(ds)
    rhs = 19 / math.sqrt(float(pm * ds)) if ds > 0 else math.inf
    ok = (phi * phi * pm * ds <= 361) if exact else (float(phi) <= rhs * (1 + 1e-9))
    params = {"phi": phi, "p_min": pm, "diam_sharp": ds, "squared_form": phi * phi * pm * ds}
    out = [inequality("co:expansion", phi, rhs, exact_pass=bool(ok), mode="exact" if exact else "float", params=params)]
    if a.lazy:
        out.append(inequality("co:expansion:lazy", ds, 41 / (phi * phi * pm), params={"phi": phi, "p_min": pm}))
    out.append(inequality("co:expansion:lazified", ds, 328 / (phi * phi * pm), params={"phi": phi, "p_min": pm}))
    return out


def check_diam_lower(a: ChainAnalysis) -> list[InequalityReport]:
    """t_mix# >= diam# - 4/Phi, plus the intermediate tail bound it rests on."""
    _require(a, lazy=True, enumerable=True)
    phi = a.phi(1).phi
    prof = _mixing(a)
    level = a.diam_sharp - 4 / phi
    pi, d, n = a.chain.pi, a.metric, a.n
    close = sum((pi[x] * pi[y] for x in range(n) for y in range(n) if d(x, y) <= level), a.chain.zero())
    return [
        inequality("lm:diam", level, prof.t_mix_sharp, params={"phi": phi, "diam_sharp": a.diam_sharp}),
        inequality("lm:diam:tail", close, Fraction(1, 2), params={"level": level}),
    ]


def check_escape(a: ChainAnalysis) -> list[InequalityReport]:
    """E[dist(X_0, X_t)] >= sqrt(t_mix# P_min) / 41 for every t >= t_rel.

    Since |E[dist(X_0, X_t)] - diam#| <= diam * d_tv#(t) and d_tv#(t) is
    non-increasing, the sweep stops once diam# - diam * d_tv#(t) clears the
    bound; this also covers t = infinity, where the displacement is diam#.
    """
    _require(a, lazy=True, reversible=True, curved=True)
    if a.n < 2:
        return [skipped("co:escape", "single state")]
    prof = _mixing(a)
    pm, tms = a.p_min, prof.t_mix_sharp
    bound_sq = tms * pm  # bound = sqrt(bound_sq) / 41
    bound = math.sqrt(float(bound_sq)) / 41
    t_rel = a.spectral.t_rel
    t0 = max(1, math.ceil(t_rel - T_REL_TOL))
    H = max(a.horizon, t0)
    diam, ds = a.metric.diam, a.diam_sharp
    rows = []
    violations = 0
    settled_at = None
    at_trel = None
    for power in iter_powers(a.chain, a.config.bit_budget, start=t0):
        t = power.t
        disp = displacement_at(power, a.st, a.metric.d)
        if a.exact(disp) and a.exact(bound_sq):
            ok = _ge_sqrt(41 * disp, bound_sq)
        else:
            ok = float(disp) >= bound * (1 - 1e-9)
        violations += not ok
        rows.append((float(disp) / bound, t, disp, ok))
        if t == t0:
            at_trel = float(disp) / bound
        tv = row_tv(power, a.st)
        avg = sum(p * r for p, r in zip(a.chain.pi if a.exact(tv[0]) else a.st.flt, tv))
        floor = ds - diam * avg
        if a.exact(floor) and a.exact(bound_sq):
            done = _ge_sqrt(41 * floor, bound_sq)
        else:
            done = float(floor) >= bound * (1 + 1e-9)
        if done:
            settled_at = t
            break
        if t >= H:
            break
    # t = infinity
    ok_inf = _ge_sqrt(41 * ds, bound_sq) if a.exact(ds) and a.exact(bound_sq) else float(ds) >= bound * (1 - 1e-9)
    violations += not ok_inf
    rows.append((float(ds) / bound, math.inf, ds, ok_inf))
    ratio, t, disp, ok = min(rows, key=lambda r: (r[3], r[0]))
    params = {
        "t": "inf" if t == math.inf else t,
        "t_rel": t_rel,
        "t_start": t0,
        "t_mix_sharp": tms,
        "p_min": pm,
        "ratio": ratio,
        "ratio_at_trel": at_trel,
        "settled_at": settled_at,
        "horizon": H,
        "violations": violations,
    }
    return [inequality("co:escape", bound, disp, exact_pass=violations == 0, mode="exact" if a.exact(disp) else "float", params=params)]


def check_cutoff_ratios(a: ChainAnalysis) -> list[InequalityReport]:
    """The finite sandwich behind the no-cutoff statement.

    P_min/(12 Phi^2) <= t_rel and t_mix <= 40/(P_min Phi^2) are checked as
    stated, as is t_mix = t_mix# with equal TV rows.  Between t_rel and t_mix
    the rigorous comparison is (t_rel - 1) log 2 <= t_mix; the literal
    ``t_rel <= t_mix`` is reported alongside as information.
    """
    _require(a, lazy=True, reversible=True, transitive=True, curved=True, enumerable=True, pmin=a.config.cutoff_p)
    phi = a.phi(1).phi
    pm = a.p_min
    prof = _mixing(a, 40 / (pm * phi**2))
    t_rel = a.spectral.t_rel
    t_mix = prof.t_mix
    phi2 = float(phi) ** 2
    ratios = {"t_mix_phi2": t_mix * phi2, "t_rel_phi2": t_rel * phi2, "t_mix_over_t_rel": t_mix / t_rel}
    rows_equal = prof.rows_equal[t_mix] if t_mix < len(prof.rows_equal) else False
    relaxed = (t_rel - 1) * math.log(2)
    return [
        inequality("co:cutoff:buser", pm / (12 * phi**2), t_rel * (1 + T_REL_TOL), external=True, params={"phi": phi, "t_rel": t_rel}),
        inequality(
            "co:cutoff:relaxation",
            relaxed,
            t_mix * (1 + T_REL_TOL),
            params={"t_rel": t_rel, "t_mix": t_mix, "literal_t_rel_le_t_mix": t_rel <= t_mix * (1 + T_REL_TOL), **ratios},
        ),
        inequality(
            "co:cutoff:sharp",
            t_mix,
            prof.t_mix_sharp,
            exact_pass=t_mix == prof.t_mix_sharp and rows_equal,
            params={"t_mix": t_mix, "t_mix_sharp": prof.t_mix_sharp, "rows_equal": rows_equal},
        ),
        inequality("co:cutoff:upper", t_mix, 40 / (pm * phi**2), params={"phi": phi, **ratios}),
    ]


def check_buser(a: ChainAnalysis) -> list[InequalityReport]:
    """t_rel >= P_min / (12 Phi^2); cited, not proved, hence ``external``."""
    _require(a, reversible=True, curved=True, enumerable=True)
    phi = a.phi(1).phi
    t_rel = a.spectral.t_rel
    return [inequality("buser", a.p_min / (12 * phi**2), t_rel * (1 + T_REL_TOL), external=True, params={"phi": phi, "t_rel": t_rel})]


def check_phi_spectral(a: ChainAnalysis) -> list[InequalityReport]:
    """(1 - lambda_2^t) / 2 <= Phi(P^t) for lazy reversible chains."""
    _require(a, lazy=True, reversible=True, enumerable=True)
    lam = a.spectral.lambda2
    reports = []
    for t in (1, 2, 3, 4):
        phi = a.phi(t).phi
        reports.append(inequality("phi:spectral", (1 - lam**t) / 2, float(phi) * (1 + T_REL_TOL), params={"t": t, "phi": phi, "lambda2": lam}))
    return [tightest(reports)]


def check_l1(a: ChainAnalysis) -> list[InequalityReport]:
    """L1 Cheeger on random centred integer observables and on P^s(., z) - pi(z)."""
    _require(a, enumerable=True)
    rng = a.config.rng(a.chain_id, "lm:L1")
    n, pi = a.n, a.chain.pi
    reports = []
    for t in (1, 2):
        power, phi = a.power(t), a.phi(t)
        for s in (1, 2):
            Ps = a.power(s)
            for z in range(n):
                f = [Ps.entry(x, z) - pi[z] for x in range(n)]
                r = check_l1_cheeger(a.chain, t, f, phi=phi, power=power)
                r.params.update(observable=f"P^{s}(.,{z})-pi({z})")
                reports.append(r)
        for k in range(a.config.draws // 2):
            g = [int(v) for v in rng.integers(-4, 5, size=n)]
            mean = sum(p * v for p, v in zip(pi, g))
            f = [v - mean for v in g]
            r = check_l1_cheeger(a.chain, t, f, phi=phi, power=power)
            r.params.update(observable="random", g=g)
            reports.append(r)
    worst = tightest(reports)
    worst.params["instances"] = len(reports)
    worst.params["violations"] = sum(r.status == FAIL for r in reports)
    return [worst]


def check_concentration_suite(a: ChainAnalysis) -> list[InequalityReport]:
    """Concentration for distance functions and random integer observables."""
    _require(a, enumerable=True)
    rng = a.config.rng(a.chain_id, "lm:concentration")
    n, d = a.n, a.metric
    phi = a.phi(1)
    observables = []
    for z in range(n):
        observables.append((f"dist({z},.)", [int(v) for v in d.d[z]]))
        observables.append((f"dist(.,{z})", [int(v) for v in d.d[:, z]]))
    for _ in range(a.config.draws // 2):
        observables.append(("random", [int(v) for v in rng.integers(-3, 4, size=n)]))
    by_statement: dict[str, list] = {}
    for label, f in observables:
        span = max(f) - min(f)
        if span == 0:
            continue
        a_level = Fraction(int(rng.integers(1, 2 * span + 1)), 2)
        for r in check_concentration(a.chain, f, a_level, phi=phi):
            r.params.update(observable=label, f=f)
            by_statement.setdefault(r.statement, []).append(r)
    out = []
    for statement in sorted(by_statement):
        worst = tightest(by_statement[statement])
        worst.params["instances"] = len(by_statement[statement])
        worst.params["violations"] = sum(r.status == FAIL for r in by_statement[statement])
        out.append(worst)
    return out


# -- supermartingale tails ---------------------------------------------------


@dataclass
class SupermartingaleTrial:
    """Monte Carlo estimate of P(tau >= t) on a grid, with the lemma's bound."""

    name: str
    seed: int
    z0: int
    p: object
    trials: int
    grid: list[int]
    frequencies: list[float] = field(default_factory=list)
    radius: float = 0.0
    exact: list | None = None

    def bound(self, t: int) -> float:
        return self.z0 * math.sqrt(10 / (float(self.p) * t))

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "z0": self.z0,
            "p": render(self.p),
            "trials": self.trials,
            "grid": self.grid,
            "frequencies": self.frequencies,
            "radius": self.radius,
            "exact": [render(v) for v in self.exact] if self.exact is not None else None,
        }


def hoeffding_radius(trials: int, points: int, confidence: float = CONFIDENCE) -> float:
    """One-sided Hoeffding radius with a Bonferroni split over ``points``."""
    delta = (1 - confidence) / max(1, points)
    return math.sqrt(math.log(1 / delta) / (2 * trials))


def _absorption_times(step, z0_state: int, trials: int, t_max: int, absorbed, rng) -> np.ndarray:
    """First hitting times of the absorbing set, capped at ``t_max + 1``."""
    state = np.full(trials, z0_state, dtype=np.int64)
    tau = np.full(trials, t_max + 1, dtype=np.int64)
    alive = np.flatnonzero(~absorbed[state])
    tau[~absorbed[state]] = t_max + 1
    tau[absorbed[state]] = 0
    for t in range(1, t_max + 1):
        if alive.size == 0:
            break
        state[alive] = step(state[alive], rng)
        hit = absorbed[state[alive]]
        tau[alive[hit]] = t
        alive = alive[~hit]
    return tau


def _table_step(cum: np.ndarray, targets: np.ndarray):
    def step(states, rng):
        u = rng.random(states.size)
        k = (cum[states] < u[:, None]).sum(axis=1)
        k = np.minimum(k, targets.shape[1] - 1)
        return targets[states, k]

    return step


def reflected_walk_kernel(m: int) -> list[list[Fraction]]:
    """Lazy walk on {0..m}: hold 1/2, else step +-1; bounces at m, absorbed at 0."""
    P = [[Fraction(0)] * (m + 1) for _ in range(m + 1)]
    P[0][0] = Fraction(1)
    for z in range(1, m + 1):
        P[z][z] = Fraction(1, 2)
        P[z][z - 1] += Fraction(1, 4)
        P[z][z + 1 if z < m else z - 1] += Fraction(1, 4)
    return P


def exact_tail(P: list[list[Fraction]], z0: int, grid: list[int], absorbing: int = 0) -> list[Fraction]:
    """P(tau >= t) = P(Z_{t-1} != absorbing), by exact vector-matrix products."""
    size = len(P)
    den = math.lcm(*(p.denominator for row in P for p in row))
    N = [[int(p * den) for p in row] for row in P]
    v = [0] * size
    v[z0] = 1
    scale = 1
    out = {}
    targets = sorted(set(grid))
    step = 0
    for t in targets:
        while step < t - 1:
            v = [sum(v[i] * N[i][j] for i in range(size)) for j in range(size)]
            scale *= den
            step += 1
        out[t] = 1 - Fraction(v[absorbing], scale)
    return [out[t] for t in grid]


def run_trial(trial: SupermartingaleTrial, step, start: int, absorbed: np.ndarray) -> SupermartingaleTrial:
    rng = np.random.default_rng(trial.seed)
    tau = _absorption_times(step, start, trial.trials, max(trial.grid), absorbed, rng)
    trial.frequencies = [float((tau >= t).mean()) for t in trial.grid]
    trial.radius = hoeffding_radius(trial.trials, len(trial.grid))
    return trial


def simulate_reflected_walk(m: int = 8, z0: int = 4, trials: int = 100_000, grid=(16, 64, 256), seed: int = BUILTIN_SEED) -> SupermartingaleTrial:
    P = reflected_walk_kernel(m)
    cum = np.array([[0.25, 0.75, 1.0]] * (m + 1))
    targets = np.array([[max(z - 1, 0), z, min(z + 1, m) if z < m else z - 1] for z in range(m + 1)])
    targets[0] = [0, 0, 0]
    absorbed = np.zeros(m + 1, dtype=bool)
    absorbed[0] = True
    trial = SupermartingaleTrial("reflected-walk", seed, z0, Fraction(1, 2), trials, list(grid))
    run_trial(trial, _table_step(cum, targets), z0, absorbed)
    trial.exact = exact_tail(P, z0, trial.grid)
    return trial


def simulate_coupled_chain(chain: Chain, x: int, y: int, trials: int, grid, seed: int, metric=None):
    """Distance process of the pair chain driven by good optimal couplings."""
    metric = metric or chain.metric
    n = chain.n
    K = coupling_kernel(chain, metric)
    width = max(len(K.row(u, v)) for u in range(n) for v in range(n))
    cum = np.ones((n * n, width))
    targets = np.zeros((n * n, width), dtype=np.int64)
    for u in range(n):
        for v in range(n):
            row = K.row(u, v)
            probs = np.cumsum([float(p) for _, p in row])
            probs[-1] = 1.0
            i = u * n + v
            cum[i, : len(row)] = probs
            targets[i, : len(row)] = [a * n + b for (a, b), _ in row]
            targets[i, len(row):] = targets[i, len(row) - 1]
    absorbed = np.array([i // n == i % n for i in range(n * n)])
    trial = SupermartingaleTrial(f"coupled-chain({x},{y})", seed, metric(x, y), chain.p_min, trials, list(grid))
    run_trial(trial, _table_step(cum, targets), x * n + y, absorbed)
    return trial, K


def _meeting_tails(K, chain: Chain, x: int, y: int, grid) -> list[float]:
    """P(X_{t-1} != Y_{t-1}) from the pair kernel, for each t in the sorted grid."""
    n = chain.n
    M = K.dense()
    v = np.zeros(n * n)
    v[x * n + y] = 1.0
    diag = np.array([i // n == i % n for i in range(n * n)])
    apart = []
    step = 0
    for t in sorted(grid):
        while step < t - 1:
            v = v @ M
            step += 1
        apart.append(float(v[~diag].sum()))
    return apart


def trial_report(trial: SupermartingaleTrial, chain_id: str, extra: dict | None = None) -> InequalityReport:
    rows = []
    for t, freq in zip(trial.grid, trial.frequencies):
        bound = trial.bound(t)
        rows.append(((freq - trial.radius) / bound, t, freq, bound))
    _, t, freq, bound = max(rows)
    ok = all(f - trial.radius <= trial.bound(t) for t, f in zip(trial.grid, trial.frequencies))
    params = {"t": t, "frequency": freq, **trial.to_json_dict(), **(extra or {})}
    return inequality("lm:super", freq - trial.radius, bound, exact_pass=ok, mode="float", chain_id=chain_id, params=params)


def check_supermartingale_builtins(config: VerifyConfig) -> list[InequalityReport]:
    """Both built-in processes at the configured trial count."""
    out = []
    seed = int(config.rng("builtin", "reflected-walk").integers(2**63))
    trial = simulate_reflected_walk(trials=config.super_trials, grid=(16, 64, 256, 1024, 4096), seed=seed)
    out.append(trial_report(trial, "builtin:reflected-walk-m=8"))
    r2 = hoeffding_radius(trial.trials, 2 * len(trial.grid))
    gaps = [abs(f - float(e)) for f, e in zip(trial.frequencies, trial.exact)]
    k = int(np.argmax(gaps))
    out.append(
        inequality(
            "lm:super:oracle",
            gaps[k],
            r2,
            chain_id="builtin:reflected-walk-m=8",
            params={"t": trial.grid[k], "frequency": trial.frequencies[k], "exact": trial.exact[k], "radius": r2},
        )
    )
    from .generators import cycle

    c4 = cycle(4)
    seed = int(config.rng("builtin", "coupled-cycle").integers(2**63))
    out.extend(_coupled_reports(c4, "builtin:coupled-cycle-n=4", 0, 2, config.super_trials, (1, 4, 16, 64, 256), seed))
    return out


def _coupled_reports(chain: Chain, chain_id: str, x: int, y: int, trials: int, grid, seed: int) -> list[InequalityReport]:
    trial, K = simulate_coupled_chain(chain, x, y, trials, grid, seed)
    apart = _meeting_tails(K, chain, x, y, trial.grid)
    out = [trial_report(trial, chain_id, {"pair_chain_tail": apart})]
    # The lemma on the exact pair-chain tails, and coupling domination:
    # TV(P^t(x,.), P^t(y,.)) <= P(X_t != Y_t) = P(tau >= t + 1).
    worst_exact, worst_dom = [], []
    for t, q in zip(trial.grid, apart):
        worst_exact.append(inequality("lm:super:exact", q, trial.bound(t), chain_id=chain_id, params={"t": t}))
    ext = _meeting_tails(K, chain, x, y, [t + 1 for t in trial.grid])
    for t, q in zip(trial.grid, ext):
        p = iter_powers(chain, start=t)
        power = next(p)
        rx, ry = power.row(x), power.row(y)
        tv = sum(abs(a - b) for a, b in zip(rx, ry)) / 2
        worst_dom.append(inequality("coupling:domination", float(tv), q, chain_id=chain_id, params={"t": t, "tv": tv}))
    out.append(tightest(worst_exact))
    out.append(tightest(worst_dom))
    return out


def check_supermartingale_chain(a: ChainAnalysis) -> list[InequalityReport]:
    """Built-in (a) on this chain, from the first pair at maximal distance."""
    _require(a, lazy=True, curved=True)
    if a.n < 2:
        return [skipped("lm:super", "single state")]
    d = a.metric.d
    x, y = (int(v) for v in np.unravel_index(int(np.argmax(d)), d.shape))
    z0 = int(d[x, y])
    pm = float(a.p_min)
    # grid up to where the bound falls below 1/4
    t_end = min(4096, max(4, math.ceil(10 * z0 * z0 / pm * 16)))
    grid = sorted({min(t_end, 4**k) for k in range(8)} | {t_end})
    seed = int(a.config.rng(a.chain_id, "lm:super").integers(2**63))
    return _coupled_reports(a.chain, a.chain_id, x, y, a.config.chain_super_trials, grid, seed)


# -- suite -------------------------------------------------------------------

CHECKS = [
    check_structure,
    check_coupling_lemma,
    check_tv_decay,
    check_diam_bound,
    check_main_estimate,
    check_conductance_bound,
    check_expansion_bound,
    check_diam_lower,
    check_escape,
    check_cutoff_ratios,
    check_buser,
    check_phi_spectral,
    check_l1,
    check_concentration_suite,
    check_supermartingale_chain,
]

CHECK_STATEMENTS = {
    check_structure: "structure",
    check_coupling_lemma: "lm:coupling",
    check_tv_decay: "th:tvdecay",
    check_diam_bound: "co:diam",
    check_main_estimate: "th:main",
    check_conductance_bound: "co:conductance",
    check_expansion_bound: "co:expansion",
    check_diam_lower: "lm:diam",
    check_escape: "co:escape",
    check_cutoff_ratios: "co:cutoff",
    check_buser: "buser",
    check_phi_spectral: "phi:spectral",
    check_l1: "lm:L1",
    check_concentration_suite: "lm:concentration",
    check_supermartingale_chain: "lm:super",
}


def run_check(check, a: ChainAnalysis) -> list[InequalityReport]:
    statement = CHECK_STATEMENTS[check]
    try:
        hyps = a.hypotheses()
    except Exception as exc:  # noqa: BLE001 - reported, not raised
        return [InequalityReport(statement, a.chain_id, status=CORPUS_ERROR, note=f"{type(exc).__name__}: {exc}")]
    try:
        reports = check(a)
    except HypothesisSkip as exc:
        reports = [skipped(statement, str(exc))]
    except (TooLargeError, NotReversibleError, TruncationError) as exc:
        reports = [skipped(statement, f"{type(exc).__name__}: {exc}")]
    except Exception as exc:  # noqa: BLE001
        reports = [InequalityReport(statement, status=CORPUS_ERROR, note=f"{type(exc).__name__}: {exc}")]
    for r in reports:
        r.chain_id = r.chain_id or a.chain_id
        r.hypotheses = hyps
    return reports


def verify_chain(chain_id: str, chain: Chain, config: VerifyConfig | None = None) -> list[InequalityReport]:
    a = ChainAnalysis(chain_id, chain, config)
    out = []
    for check in CHECKS:
        out.extend(run_check(check, a))
    return out


@dataclass
class SuiteResult:
    reports: list[InequalityReport]
    config: VerifyConfig

    @property
    def summary(self) -> dict:
        counts = {PASS: 0, FAIL: 0, SKIP: 0, CORPUS_ERROR: 0}
        by_chain: dict[str, dict] = {}
        for r in self.reports:
            counts[r.status] += 1
            by_chain.setdefault(r.chain_id, {PASS: 0, FAIL: 0, SKIP: 0, CORPUS_ERROR: 0})[r.status] += 1
        return {"total": len(self.reports), **counts, "chains": len(by_chain), "by_chain": by_chain}

    @property
    def clean(self) -> bool:
        s = self.summary
        return s[FAIL] == 0 and s[CORPUS_ERROR] == 0

    @property
    def exit_code(self) -> int:
        return 0 if self.clean else 1

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": "curvmix", "version": __version__},
            "seed": self.config.seed,
            "config": self.config.to_json_dict(),
            "summary": self.summary,
            "reports": [r.to_json_dict() for r in self.reports],
        }


def _order(r: InequalityReport):
    return (r.chain_id, r.statement)


def run_suite(corpus: list[tuple[str, Chain]], config: VerifyConfig | None = None, builtins: bool | None = None) -> SuiteResult:
    """Every check on every chain, plus the built-in supermartingales.

    The built-ins run whenever the corpus is non-empty (or when requested);
    an empty corpus gives an empty report.
    """
    config = config or VerifyConfig()
    if config.threads > 1 and len(corpus) > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            parts = list(pool.map(lambda item: verify_chain(item[0], item[1], config), corpus))
    else:
        parts = [verify_chain(cid, chain, config) for cid, chain in corpus]
    reports = [r for part in parts for r in part]
    if builtins if builtins is not None else bool(corpus):
        reports.extend(check_supermartingale_builtins(config))
    reports.sort(key=_order)
    return SuiteResult(reports, config)


def chain_profile(a: ChainAnalysis) -> dict:
    """The quantities reported by ``analyze``."""
    profile = {
        "schema_version": SCHEMA_VERSION,
        "n": a.n,
        "mode": a.chain.mode,
        "pi": [render(p) for p in a.chain.pi],
        "p_min": render(a.p_min),
        "diam": a.metric.diam,
        "diam_sharp": render(a.diam_sharp),
        "lazy": a.lazy,
        "reversible": a.reversible,
        "transitive": a.transitive,
        "curvature": {"verdict": a.curvature.verdict, "max_w": render(a.curvature.max_w)},
    }
    if a.curvature.witness is not None:
        profile["curvature"]["witness"] = list(a.curvature.witness)
        profile["curvature"]["witness_w"] = render(a.curvature.witness_w)
    if a.enumerable:
        profile["phi"] = a.phi(1).to_json_dict()
    else:
        profile["phi"] = None
    prof = a.mixing
    profile["t_mix"] = prof.t_mix
    profile["t_mix_sharp"] = prof.t_mix_sharp
    profile["mixing_truncated"] = prof.truncated
    profile["horizon"] = prof.horizon
    profile["t_rel"] = a.spectral.t_rel if a.spectral is not None else None
    profile["threshold"] = render(THRESHOLD)
    return profile
