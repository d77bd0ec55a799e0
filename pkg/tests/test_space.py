import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latent_mcts.space import (BUILTIN_SPACES, Dimension, InvalidEncodingError, SearchSpace,
                               encoding_key, make_builtin_space, mutate, sample_uniform, space_size)


@pytest.mark.parametrize("name,size", [
    ("convnet_toy", 1364),
    ("convnet_appendix", 66429),
    ("convnet_60k", 59049),
    ("nasbench_like", 2 ** 21 * 3 ** 5),
])
def test_builtin_sizes(name, size):
    assert space_size(make_builtin_space(name)) == size


def test_continuous_space_is_infinite():
    assert math.isinf(space_size(make_builtin_space("eggholder2d")))


def test_enumeration_matches_size_and_is_distinct(toy):
    X = toy.enumerate_array()
    assert len(X) == toy.size()
    assert len({encoding_key(x) for x in X}) == len(X)
    assert all(toy.is_valid(x) for x in X)


def test_unknown_space():
    with pytest.raises(ValueError):
        make_builtin_space("resnet")


def test_padding_rules(toy):
    pad = toy.pad_code
    assert toy.is_valid([0.2, 0.4, pad, pad, pad])
    assert not toy.is_valid([0.2, pad, 0.4, pad, pad])   # gap before a real layer
    assert not toy.is_valid([pad] * 5)
    assert toy.is_valid([pad] * 5, allow_empty=True)
    assert not toy.is_valid([0.2, 0.3, pad, pad, pad])   # 0.3 is not a code
    with pytest.raises(InvalidEncodingError):
        toy.make_encoding([0.2, pad, 0.4, pad, pad])


def test_make_encoding_is_read_only(toy):
    e = toy.make_encoding([0.2] * 5)
    with pytest.raises(ValueError):
        e[0] = 0.4


def test_encoding_key_rounding():
    assert encoding_key([0.1 + 0.2, -0.0]) == encoding_key([0.3, 0.0])


def test_eggholder_samples_in_box(rng):
    sp = make_builtin_space("eggholder2d")
    S = sp.sample_uniform(rng, size=1000)
    assert S.shape == (1000, 2)
    assert np.all((S >= -512) & (S <= 512))


def test_padded_samples_valid_and_depth_uniform(toy, rng):
    S = toy.sample_uniform(rng, size=5000)
    assert all(toy.is_valid(s) for s in S)
    depths = np.array([toy.depth(s) for s in S])
    freq = np.bincount(depths, minlength=6)[1:] / len(S)
    assert np.all(np.abs(freq - 0.2) < 0.03)


def test_nasbench_binary_frequencies():
    sp = make_builtin_space("nasbench_like")
    S = sp.sample_uniform(np.random.default_rng(7), size=100_000)
    freq = (S[:, :21] == 1.0).mean(axis=0)
    assert np.all((freq >= 0.49) & (freq <= 0.51))
    tern = S[:, 21:]
    for code in (0.0, 1.0, 2.0):
        assert np.all(np.abs((tern == code).mean(axis=0) - 1 / 3) < 0.01)


def test_sample_uniform_wrapper_shape(toy, rng):
    assert sample_uniform(toy, rng).shape == (5,)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_mutate_changes_one_dimension_stays_valid(seed):
    sp = make_builtin_space("nasbench_like")
    rng = np.random.default_rng(seed)
    e = sp.sample_uniform(rng)
    m = mutate(sp, e, rng)
    assert sp.is_valid(m)
    assert int(np.sum(m != e)) == 1


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_mutate_padded_space_valid_and_changes(seed):
    sp = make_builtin_space("convnet_toy")
    rng = np.random.default_rng(seed)
    e = sp.sample_uniform(rng)
    m = sp.mutate(e, rng)
    assert sp.is_valid(m)
    assert encoding_key(m) != encoding_key(e)


def test_mutate_continuous(rng):
    sp = make_builtin_space("eggholder2d")
    e = np.array([0.0, 0.0])
    m = sp.mutate(e, rng)
    assert int(np.sum(m != e)) == 1 and sp.is_valid(m)


@pytest.mark.parametrize("name", sorted(BUILTIN_SPACES))
def test_json_round_trip(name):
    sp = make_builtin_space(name)
    back = SearchSpace.from_json(sp.to_json())
    assert back == sp
    assert back.to_json() == sp.to_json()


def test_dimension_validation():
    with pytest.raises(ValueError):
        Dimension.continuous(1.0, 0.0)
    with pytest.raises(ValueError):
        Dimension.categorical(())


def test_toy_layer_codes_decode(toy):
    lay = toy.layout
    assert lay.decode(0.2) == (3, 64)
    assert lay.code_of(5, 32) == 0.8
