import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvmix.chain import FLOAT, build_chain
from curvmix.generators import DEFAULT_CORPUS, biased_segment, cycle, directed_lazy_cycle, double_star, hypercube_times_cycle
from curvmix.mixing import (
    default_horizon,
    displacement_curve,
    effective_diameter,
    is_transitive,
    mixing_profile,
    tv_distance,
    write_trace,
)
from curvmix.errors import TooLargeError

from oracles import frac_power, mixing_times, random_chain


def test_lazy_four_cycle_profile():
    c = cycle(4)
    prof = mixing_profile(c)
    assert prof.tv_curve == [Fraction(3, 4), Fraction(1, 4)]
    assert prof.t_mix == prof.t_mix_sharp == 1
    assert prof.exact and not prof.truncated
    assert all(prof.rows_equal)
    assert default_horizon(c) == 32 * 4 * 4
    assert effective_diameter(c) == 1


def test_two_state_chain_mixes_in_one_step():
    c = build_chain([[Fraction(1, 2)] * 2] * 2)
    prof = mixing_profile(c)
    assert prof.t_mix == prof.t_mix_sharp == 1


def test_one_state_chain():
    prof = mixing_profile(build_chain([[1]]))
    assert prof.t_mix == prof.t_mix_sharp == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_mixing_times_match_oracle(n, seed):
    P = random_chain(np.random.default_rng(seed), n, lazy=True)
    c = build_chain(P)
    prof = mixing_profile(c)
    assert (prof.t_mix, prof.t_mix_sharp) == mixing_times(P, c.pi)
    assert prof.t_mix_sharp <= prof.t_mix


@pytest.mark.parametrize("n, t_mix", [(4, 1), (16, 25)])
def test_lazy_cycle_mixing_times(n, t_mix):
    assert mixing_profile(cycle(n)).t_mix == t_mix


def test_truncation_flag():
    prof = mixing_profile(cycle(16), horizon=5)
    assert prof.truncated and prof.t_mix is None and len(prof.tv_curve) == 6


def test_float_chain():
    c = build_chain(cycle(6).dense, FLOAT)
    assert mixing_profile(c).t_mix == mixing_profile(cycle(6)).t_mix


def test_displacement_curve_matches_definition():
    c = biased_segment(5)
    curve = displacement_curve(c, horizon=4)
    d = c.metric.d
    for t in range(5):
        Pt = frac_power(c.P, t)
        expected = sum(c.pi[x] * Pt[x][y] * int(d[x, y]) for x in range(5) for y in range(5))
        assert curve[t] == expected
    assert curve.diam_sharp == sum(c.pi[x] * c.pi[y] * int(d[x, y]) for x in range(5) for y in range(5))


def test_displacement_at_zero_and_one():
    # lazy non-negatively curved chains move one step w.p. 1/2 on average
    curve = displacement_curve(cycle(6), horizon=1)
    assert curve[0] == 0 and curve[1] == Fraction(1, 2)


def test_tv_distance():
    assert tv_distance([Fraction(1)], [Fraction(1)]) == 0
    assert tv_distance([1, 0], [0, 1]) == 1


@pytest.mark.parametrize(
    "chain, expected",
    [(cycle(6), True), (directed_lazy_cycle(5), True), (hypercube_times_cycle(1, 3), True), (biased_segment(5), False), (double_star(2), False)],
)
def test_transitivity(chain, expected):
    assert is_transitive(chain) is expected


def test_transitivity_beyond_the_search_limit():
    assert is_transitive(cycle(16)) is True  # tagged by its generator
    untagged = build_chain(cycle(16).P)
    with pytest.raises(TooLargeError):
        is_transitive(untagged)


def test_corpus_transitivity_tags_are_right_where_searchable():
    for _, spec in DEFAULT_CORPUS:
        c = spec.build()
        if c.n <= 12:
            assert is_transitive(c) == c.tags["expected"]["transitive"]


def test_trace_format(tmp_path):
    c = cycle(4)
    prof = mixing_profile(c)
    disp = displacement_curve(c, horizon=1)
    path = tmp_path / "trace.csv"
    write_trace(path, prof, disp, {1: Fraction(1, 4)})
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "d_tv", "d_tv_sharp", "displacement", "phi_pt"]
    assert rows[2] == ["1", "1/4|0.250000000000", "1/4|0.250000000000", "1/2|0.500000000000", "1/4|0.250000000000"]
