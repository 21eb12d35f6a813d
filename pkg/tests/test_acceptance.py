"""Acceptance criteria, one test (or small group) per criterion.

The conftest hook prints a PASS/FAIL line per criterion at the end of the run.
"""

import json
import time
from fractions import Fraction

import numpy as np
import pytest

from curvmix.chain import build_chain
from curvmix.cli import main
from curvmix.generators import DEFAULT_CORPUS, abelian_cayley, cycle, transposition_walk
from curvmix.mixing import default_horizon
from curvmix.transport import NEGATIVE, NONNEGATIVE, certify_curvature, w1
from curvmix.verifier import (
    BUILTIN_SEED,
    ChainAnalysis,
    VerifyConfig,
    check_supermartingale_builtins,
    hoeffding_radius,
    simulate_coupled_chain,
    simulate_reflected_walk,
    trial_report,
)

from oracles import dual_w1, frac_matmul, random_chain, random_measure

FAMILIES = {"cycle", "abelian_cayley", "hypercube_times_cycle", "transposition_walk", "biased_segment", "directed_lazy_cycle"}
SPECS = dict(DEFAULT_CORPUS)


def exact(value):
    return Fraction(value["exact"]) if "exact" in value else value["value"]


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    path = tmp_path_factory.mktemp("suite") / "run1.json"
    start = time.perf_counter()
    code = main(["verify", "--corpus", "default", "--seed", "0", "--out", str(path)])
    elapsed = time.perf_counter() - start
    doc = json.loads(path.read_text())
    return {"path": path, "code": code, "elapsed": elapsed, "doc": doc, "reports": doc["reports"]}


def reports_for(suite, statement):
    return [r for r in suite["reports"] if r["statement"] == statement]


@pytest.mark.criterion("1 transport: w1 vs LP-vertex oracle, 500 instances")
def test_criterion_1_transport():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    for _ in range(500):
        n = int(rng.integers(1, 7))
        c = build_chain(random_chain(rng, n, density=float(rng.uniform(0.1, 0.9))))
        mu, nu = random_measure(rng, n), random_measure(rng, n)
        cost, coupling, dual = w1(c.metric, mu, nu)
        assert cost == dual_w1(c.metric.d.tolist(), mu, nu)[0]
        assert dual.value(mu, nu) - cost == 0
        assert not dual.lipschitz_violations(c.metric)
    assert time.perf_counter() - start < 60


@pytest.mark.criterion("2 curvature ground truth")
def test_criterion_2_curvature():
    start = time.perf_counter()
    curved = [cycle(n) for n in range(3, 25)] + [cycle(n, lazy=False) for n in range(3, 12)]
    curved += [abelian_cayley([8], degree=2, seed=s) for s in range(4)]
    curved += [abelian_cayley([2, 2, 2], generators=[[1, 0, 0], [0, 1, 0], [0, 0, 1]]), abelian_cayley([3, 5], degree=2, seed=1)]
    curved += [transposition_walk(3), transposition_walk(4)]
    curved += [spec.build() for _, spec in DEFAULT_CORPUS if spec.build().tags["expected"].get("nonneg_curved") == "yes"]
    for chain in curved:
        assert certify_curvature(chain).verdict == NONNEGATIVE, chain.tags
    assert certify_curvature(transposition_walk(3), full=True).verdict == NONNEGATIVE

    negatives = 0
    for _, spec in DEFAULT_CORPUS:
        chain = spec.build()
        cert = certify_curvature(chain)
        if cert.verdict == NEGATIVE:
            x, y = cert.witness
            oracle = dual_w1(chain.metric.d.tolist(), chain.P[x], chain.P[y])[0]
            assert oracle == cert.witness_w > chain.metric(x, y)
            negatives += 1
    assert negatives >= 1
    assert time.perf_counter() - start < 120


@pytest.mark.criterion("3 lm:coupling: chi(Gamma) >= P_min on lazy corpus chains")
def test_criterion_3_coupling(suite):
    lazy = {r["chain"] for r in reports_for(suite, "structure") if r["hypotheses"]["lazy"]}
    recs = {r["chain"]: r for r in reports_for(suite, "lm:coupling")}
    assert lazy and lazy <= set(recs)
    for cid in lazy:
        r = recs[cid]
        assert r["status"] == "pass" and r["mode"] == "exact", cid
        assert int(r["params"]["violations"]) == 0
        assert exact(r["lhs"]) <= exact(r["rhs"])


@pytest.mark.criterion("4 th:tvdecay: exact TV domination for all pairs and t <= horizon")
def test_criterion_4_tvdecay(suite):
    recs = reports_for(suite, "th:tvdecay")
    checked = [r for r in recs if r["status"] != "skip"]
    assert len(checked) >= 12
    for r in checked:
        assert r["status"] == "pass" and r["mode"] == "exact", r["chain"]
        assert int(r["params"]["violations"]) == 0
        assert int(r["params"]["certified_through"]) == default_horizon(SPECS[r["chain"]].build())
    # independent brute-force sweep over every t on the small chains
    swept = 0
    for cid, spec in DEFAULT_CORPUS:
        chain = spec.build()
        if chain.n > 6 or not chain.is_lazy or certify_curvature(chain).verdict != NONNEGATIVE:
            continue
        d, pmin, H = chain.metric.d, chain.p_min, default_horizon(chain)
        Pt = [list(row) for row in chain.P]
        for t in range(1, H + 1):
            for x in range(chain.n):
                for y in range(chain.n):
                    if x != y:
                        tv = sum(abs(a - b) for a, b in zip(Pt[x], Pt[y])) / 2
                        assert tv * tv * (t + 1) * pmin <= 10 * int(d[x, y]) ** 2, (cid, t, x, y)
            Pt = frac_matmul(Pt, chain.P)
        swept += 1
    assert swept >= 3


MAIN_STATEMENTS = ["th:main", "co:diam", "co:conductance", "co:expansion", "co:escape", "lm:L1", "lm:concentration", "lm:diam"]


@pytest.mark.criterion("5 run_suite on the default corpus: zero failures")
def test_criterion_5_suite(suite):
    s = suite["doc"]["summary"]
    assert suite["code"] == 0
    assert s["fail"] == 0 and s["corpus-error"] == 0
    assert s["chains"] >= 12
    assert {spec.family for spec in SPECS.values()} >= FAMILIES
    phi_sizes = [SPECS[r["chain"]].build().n for r in reports_for(suite, "co:conductance") if r["status"] == "pass"]
    assert max(phi_sizes) == 24
    for statement in MAIN_STATEMENTS:
        recs = [r for r in reports_for(suite, statement) if r["status"] != "skip"]
        assert recs, statement
        for r in recs:
            assert r["status"] == "pass"
            assert r["lhs"] is not None and r["rhs"] is not None and r["slack"] is not None
            if r["mode"] == "exact" and statement not in ("co:escape", "co:expansion"):
                assert "exact" in r["lhs"] and "exact" in r["rhs"], (statement, r["chain"])
    assert suite["elapsed"] < 600


def _cutoff_candidates():
    out = []
    for cid, spec in DEFAULT_CORPUS:
        a = ChainAnalysis(cid, spec.build(), VerifyConfig())
        if a.lazy and a.reversible and a.transitive and a.curved and a.p_min >= Fraction(1, 4) and a.enumerable:
            out.append(a)
    return out


@pytest.mark.criterion("6 co:cutoff sandwich, literal P_min/(12 Phi^2) <= t_rel <= t_mix <= 40/(P_min Phi^2)")
def test_criterion_6_cutoff_sandwich():
    chains = _cutoff_candidates()
    assert len(chains) >= 3
    violations = []
    for a in chains:
        phi = a.phi(1).phi
        t_rel, mix = a.spectral.t_rel, a.mixing
        assert mix.t_mix == mix.t_mix_sharp and all(mix.rows_equal), a.chain_id
        assert float(a.p_min / (12 * phi**2)) <= t_rel + 1e-9, a.chain_id
        assert mix.t_mix <= 40 / (a.p_min * phi**2), a.chain_id
        if not t_rel <= mix.t_mix + 1e-9:
            violations.append(f"{a.chain_id}: t_rel={t_rel:.6f} > t_mix={mix.t_mix}")
    assert not violations, "t_rel <= t_mix fails: " + "; ".join(violations)


@pytest.mark.criterion("6' co:cutoff sandwich with the rigorous middle link (t_rel - 1) ln 2 <= t_mix")
def test_criterion_6_corrected_middle_link():
    for a in _cutoff_candidates():
        phi = a.phi(1).phi
        t_rel, t_mix = a.spectral.t_rel, a.mixing.t_mix
        assert float(a.p_min / (12 * phi**2)) <= t_rel + 1e-9
        assert (t_rel - 1) * np.log(2) <= t_mix + 1e-9
        assert t_mix <= 40 / (a.p_min * phi**2)


@pytest.mark.criterion("7 lm:super Monte Carlo tails, 1e5 trials, fixed seed")
def test_criterion_7_supermartingale():
    walk = simulate_reflected_walk(trials=100_000, grid=(16, 64, 256, 1024, 4096), seed=BUILTIN_SEED)
    assert trial_report(walk, "reflected").status == "pass"
    radius = hoeffding_radius(walk.trials, 2 * len(walk.grid))
    for f, e in zip(walk.frequencies, walk.exact):
        assert abs(f - float(e)) <= radius
    coupled, _ = simulate_coupled_chain(cycle(4), 0, 2, 100_000, (1, 4, 16, 64, 256), BUILTIN_SEED)
    assert trial_report(coupled, "coupled").status == "pass"
    reports = check_supermartingale_builtins(VerifyConfig(super_trials=100_000))
    assert all(r.status == "pass" for r in reports)


@pytest.mark.criterion("8 sharpness probe: escape ratio within a factor 100 on hypercube x cycle")
def test_criterion_8_escape_ratio(suite):
    recs = [r for r in reports_for(suite, "co:escape") if r["chain"].startswith("hypercube_times_cycle")]
    assert len(recs) >= 2
    for r in recs:
        assert r["status"] == "pass"
        ratio = float(r["params"]["ratio_at_trel"])
        assert 1 / 100 <= ratio <= 100, (r["chain"], ratio)


@pytest.mark.criterion("9 determinism: two verify runs are byte-identical")
def test_criterion_9_determinism(suite, tmp_path):
    second = tmp_path / "run2.json"
    assert main(["verify", "--corpus", "default", "--seed", "0", "--out", str(second)]) == suite["code"]
    assert second.read_bytes() == suite["path"].read_bytes()
