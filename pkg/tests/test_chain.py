import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvmix.chain import (
    EXACT,
    FLOAT,
    build_chain,
    chain_from_json,
    is_reversible,
    iter_powers,
    lazify,
    matrix_power_row,
    to_fraction,
)
from curvmix.errors import (
    BitBudgetExceeded,
    ChainValidationError,
    NegativeEntryError,
    ParseError,
    ReducibleError,
    RowSumError,
)
from curvmix.generators import biased_segment, cycle, directed_lazy_cycle

from oracles import floyd_warshall, frac_power, random_chain, stationary_by_power

H = Fraction(1, 2)
Q = Fraction(1, 4)


def test_lazy_four_cycle_basics():
    c = cycle(4)
    assert c.pi == (Q, Q, Q, Q)
    assert c.p_min == Q
    assert c.metric.diam == 2
    assert c.is_lazy
    assert is_reversible(c)


def test_float_decimal_reads_as_its_decimal():
    assert to_fraction(0.1) == Fraction(1, 10)
    c = build_chain([[0.5, 0.5], [0.25, 0.75]])
    assert c.pi == (Fraction(1, 3), Fraction(2, 3))


@pytest.mark.parametrize(
    "matrix, error",
    [
        ([[1, 0], [0.5]], ChainValidationError),
        ([[Fraction(3, 2), Fraction(-1, 2)], [H, H]], NegativeEntryError),
        ([[H, Fraction(1, 3)], [H, H]], RowSumError),
        ([[1, 0], [0, 1]], ReducibleError),
        ([[1, 0], [H, H]], ReducibleError),
        ([], ChainValidationError),
    ],
)
def test_validation_errors(matrix, error):
    with pytest.raises(error):
        build_chain(matrix)


def test_float_mode_row_tolerance():
    build_chain([[0.5, 0.5 + 1e-13], [0.5, 0.5]], FLOAT)
    with pytest.raises(RowSumError):
        build_chain([[0.5, 0.5 + 1e-9], [0.5, 0.5]], FLOAT)
    with pytest.raises(ChainValidationError):
        build_chain([[float("nan"), 1.0], [0.5, 0.5]], FLOAT)


def test_one_state_chain():
    c = build_chain([[1]])
    assert c.pi == (Fraction(1),)
    assert c.metric.diam == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.booleans())
def test_stationary_and_metric_match_oracles(n, seed, lazy):
    rng = np.random.default_rng(seed)
    P = random_chain(rng, n, lazy=lazy)
    c = build_chain(P)
    pi = c.pi
    assert sum(pi) == 1
    for y in range(n):
        assert sum(pi[x] * P[x][y] for x in range(n)) == pi[y]
    assert np.allclose([float(p) for p in pi], stationary_by_power(P), atol=1e-9)
    fw = floyd_warshall([[p > 0 for p in row] for row in P])
    assert c.metric.d.tolist() == fw
    # triangle inequality, not symmetric in general
    d = c.metric.d
    for x in range(n):
        for y in range(n):
            assert (d[x, y] <= d[x] + d[:, y]).all()


def test_directed_metric_is_asymmetric():
    c = directed_lazy_cycle(5)
    assert c.metric(0, 1) == 1 and c.metric(1, 0) == 4
    assert not is_reversible(c)


def test_reversibility_of_birth_death_chain():
    assert is_reversible(biased_segment(6))


def test_lazify_halves_off_diagonal():
    c = cycle(5, lazy=False)
    lz = lazify(c)
    assert lz.is_lazy and not c.is_lazy
    assert lz.P[0][1] == Fraction(1, 4) and lz.P[0][0] == H
    assert lz.pi == c.pi


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_powers_match_naive_products(n, seed, t):
    P = random_chain(np.random.default_rng(seed), n)
    c = build_chain(P)
    naive = frac_power(P, t)
    power = next(iter_powers(c, start=t))
    assert power.exact
    assert [list(power.row(x)) for x in range(n)] == naive
    assert np.allclose(power.flt, np.array(naive, dtype=float))
    assert matrix_power_row(c, 1, t) == tuple(naive[1])


def test_bit_budget_switches_to_float():
    c = cycle(4)  # denominators grow by 2 bits per step
    powers = iter_powers(c, bit_budget=10)
    seen = [next(powers) for _ in range(8)]
    assert [p.exact for p in seen] == [True] * 5 + [False] * 3  # 4**t has 2t+1 bits
    assert np.allclose(seen[7].flt, np.linalg.matrix_power(c.dense, 7))
    with pytest.raises(BitBudgetExceeded):
        matrix_power_row(c, 0, 20, bit_budget=10)


def test_json_round_trip():
    c = cycle(4)
    back = chain_from_json(json.dumps(c.to_json_dict()))
    assert back.P == c.P and back.mode == EXACT and back.tags == c.tags


@pytest.mark.parametrize(
    "text",
    ["{bad", "[1, 2]", '{"rows": 3}', '{"rows": [[1]], "mode": "fuzzy"}', '{"n": 2, "rows": [[1]]}', '{"rows": [["1/0"]]}', '{"rows": [[true]]}'],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        chain_from_json(text)
