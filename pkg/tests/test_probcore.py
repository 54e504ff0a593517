import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relayrd.probcore import (
    ConditionalChannel, SourceError, binary_entropy, deterministic_channel, doubly_symmetric_binary, entropy,
    extend, marginal, markov_slack, mutual_information, validate_source,
)

H25 = -0.25 * math.log2(0.25) - 0.75 * math.log2(0.75)


def xy(values):
    return validate_source(values, ("X", "Y"), (2, 2))


def test_uniform_source_is_valid():
    js = xy([0.25] * 4)
    assert js.labels == ("X", "Y")
    np.testing.assert_allclose(js.flat, 0.25)


def test_normalisation_records_factor():
    js = xy([0.5] * 4)
    np.testing.assert_allclose(js.flat, 0.25)
    assert js.norm_factor == pytest.approx(0.5)


@pytest.mark.parametrize("values, msg", [
    ([0.5, -0.1, 0.3, 0.3], "negative"),
    ([0, 0, 0, 0], "mass"),
    ([0.2, 0.3, 0.5], "dimension"),
])
def test_validate_rejects(values, msg):
    with pytest.raises(SourceError, match=msg):
        xy(values)


def test_marginals():
    js = xy([0.25] * 4)
    np.testing.assert_allclose(marginal(js, "X").pmf, [0.5, 0.5])
    same = marginal(js, ("X", "Y"))
    np.testing.assert_array_equal(same.pmf, js.pmf)
    # p(x, y) = p(x) 1{y = x}, p = Bern(0.3)
    copy = xy([0.7, 0, 0, 0.3])
    np.testing.assert_allclose(marginal(copy, "Y").pmf, [0.7, 0.3])
    with pytest.raises(SourceError):
        marginal(js, "W")


def test_entropy_examples():
    assert entropy(validate_source([0.5, 0.5], ("X",), (2,)), "X") == pytest.approx(1.0, abs=1e-12)
    assert entropy(xy([0.5, 0, 0, 0.5]), "X", "Y") == pytest.approx(0.0, abs=1e-12)
    dsbs = doubly_symmetric_binary(0.25)
    assert entropy(dsbs, "X", "Y") == pytest.approx(0.8113, abs=1e-4)
    assert entropy(dsbs, "X", "Y") == pytest.approx(H25, abs=1e-12)
    with pytest.raises(SourceError):
        entropy(dsbs, ("X", "Y"), ("Y",))


def test_mutual_information_examples():
    assert mutual_information(xy([0.12, 0.28, 0.18, 0.42]), "X", "Y") == pytest.approx(0.0, abs=1e-12)
    dsbs = doubly_symmetric_binary(0.25)
    assert mutual_information(dsbs, "X", "X") == pytest.approx(entropy(dsbs, "X"), abs=1e-12)
    assert mutual_information(dsbs, "X", "Y") == pytest.approx(1 - H25, abs=1e-4)
    with pytest.raises(SourceError):
        mutual_information(dsbs, "X", "Y", "Y")


def test_markov_slack_examples():
    # p(x) p(y|x) p(z|y)
    px = np.array([0.3, 0.7])
    pyx = np.array([[0.8, 0.2], [0.1, 0.9]])
    pzy = np.array([[0.6, 0.4], [0.25, 0.75]])
    p = px[:, None, None] * pyx[:, :, None] * pzy[None, :, :]
    js = validate_source(p, ("X", "Y", "Z"), (2, 2, 2))
    assert abs(markov_slack(js, "X", "Y", "Z")) <= 1e-10
    # Z = X, Y independent: I(X; Z | Y) = H(X)
    p2 = np.zeros((2, 2, 2))
    for x in range(2):
        for y in range(2):
            p2[x, y, x] = px[x] * [0.4, 0.6][y]
    js2 = validate_source(p2, ("X", "Y", "Z"), (2, 2, 2))
    assert markov_slack(js2, "X", "Y", "Z") == pytest.approx(entropy(js2, "X"), abs=1e-12)
    const = doubly_symmetric_binary(0.1)
    assert markov_slack(const, "X", "Y", "Z") == pytest.approx(0.0, abs=1e-12)


def test_extend_examples():
    x = validate_source([0.5, 0.5], ("X",), (2,))
    dsbs = doubly_symmetric_binary(0.25)
    cp = deterministic_channel("U", 2, ("X",), (2,), lambda x: x)
    j = extend(dsbs, cp)
    assert abs(markov_slack(j, "U", "X", ("Y", "Z"))) <= 1e-12
    j1 = extend(dsbs, ConditionalChannel.new("C", 1, ("X",), np.ones((2, 1))))
    assert j1.labels[-1] == "C" and j1.sizes[-1] == 1
    bsc = ConditionalChannel.new("U", 2, ("X",), [[0.9, 0.1], [0.1, 0.9]])
    assert mutual_information(extend(x, bsc), "X", "U") == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)
    assert mutual_information(extend(x, bsc), "X", "U") == pytest.approx(0.5310, abs=1e-4)
    with pytest.raises(SourceError):
        extend(dsbs, ConditionalChannel.new("X", 2, ("Y",), np.eye(2)))
    with pytest.raises(SourceError):
        extend(dsbs, ConditionalChannel.new("U", 2, ("W",), np.eye(2)))
    with pytest.raises(SourceError):
        extend(dsbs, ConditionalChannel.new("U", 2, ("X", "Y"), np.eye(2)))


def test_multi_output_channel():
    dsbs = doubly_symmetric_binary(0.25)
    m = np.zeros((4, 4))
    m[np.arange(4), np.arange(4)] = 1.0  # (V1, V2) = (X, Y)
    j = extend(dsbs, ConditionalChannel.new(("V1", "V2"), (2, 2), ("X", "Y"), m))
    assert entropy(j, ("V1", "V2"), ("X", "Y")) == pytest.approx(0.0, abs=1e-12)
    assert entropy(j, "V1") == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- properties

pmf8 = st.lists(st.floats(0.0, 1.0), min_size=8, max_size=8).filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(pmf8)
def test_chain_rule_and_nonnegativity(vals):
    js = validate_source(vals, ("X", "Y", "Z"), (2, 2, 2))
    assert abs(entropy(js, ("X", "Y")) - entropy(js, "X") - entropy(js, "Y", "X")) <= 1e-10
    for a, b, c in [("X", "Y", "Z"), ("Y", "Z", "X"), ("X", "Z", ())]:
        assert mutual_information(js, a, b, c) >= -1e-10


@settings(max_examples=40, deadline=None)
@given(pmf8, st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6))
def test_data_processing_and_marginal_identity(vals, ch):
    js = validate_source(vals, ("X", "Y", "Z"), (2, 2, 2))
    m = np.array(ch).reshape(2, 3)
    u = ConditionalChannel.new("U", 3, ("X",), m / m.sum(axis=1, keepdims=True))
    j = extend(js, u)
    assert mutual_information(j, "U", "Y") <= mutual_information(js, "X", "Y") + 1e-10
    assert np.abs(marginal(j, ("X", "Y", "Z")).pmf - js.pmf).max() <= 1e-14


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_uniform_entropy(k):
    js = validate_source(np.ones(k), ("X",), (k,))
    assert abs(entropy(js, "X") - math.log2(k)) <= 1e-12
