import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmnoma.errors import ConfigError
from mmnoma.noma import NomaPolicy, decoding_order, intra_beam_power

gains_st = st.lists(st.floats(1e-9, 1e6), min_size=1, max_size=8)


def test_decoding_order_examples():
    np.testing.assert_array_equal(decoding_order([9, 4, 1]), [1, 2, 3])
    np.testing.assert_array_equal(decoding_order([2, 2, 2]), [1, 2, 3])
    np.testing.assert_array_equal(decoding_order([5.0]), [1])
    np.testing.assert_array_equal(decoding_order([9, 4, 1], strongest_last=True), [3, 2, 1])


def test_ftpa_examples():
    np.testing.assert_allclose(intra_beam_power([3.0]), [1.0])
    np.testing.assert_allclose(intra_beam_power([4.0, 1.0]), [0.2, 0.8], rtol=1e-12)
    np.testing.assert_allclose(intra_beam_power([2.0] * 5), [0.2] * 5)


@settings(max_examples=300, deadline=None)
@given(gains_st, st.floats(0.0, 2.0))
def test_ftpa_sums_to_one_and_monotone(gains, xi):
    g = np.array(gains)
    beta = intra_beam_power(g, NomaPolicy(xi=xi))
    assert beta.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(beta > 0)
    # weaker user never gets less power
    i = np.argsort(g, kind="stable")
    assert np.all(np.diff(beta[i]) <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(gains_st)
def test_decoding_order_is_permutation(gains):
    r = decoding_order(gains)
    assert sorted(r.tolist()) == list(range(1, len(gains) + 1))


def test_fixed_split_weakest_first():
    beta = intra_beam_power([1.0, 10.0, 5.0], NomaPolicy(name="fixed", split=(0.6, 0.3, 0.1)))
    np.testing.assert_allclose(beta, [0.6, 0.1, 0.3])
    beta = intra_beam_power([1.0, 10.0], NomaPolicy(name="fixed", split=(0.6, 0.3, 0.1)))
    np.testing.assert_allclose(beta, [2 / 3, 1 / 3])


def test_zero_gain_is_clamped():
    beta = intra_beam_power([0.0, 1.0])
    assert np.all(np.isfinite(beta)) and beta.sum() == pytest.approx(1.0)


def test_bad_policy():
    with pytest.raises(ConfigError):
        NomaPolicy(name="sic")
    with pytest.raises(ValueError):
        intra_beam_power([])
