import numpy as np

from superpareto.rng import RngStream, as_stream, block_sizes, concat_blocks, map_blocks


def _uniforms(rng, m):
    return rng.random(m)


def test_block_sizes_cover_n():
    assert block_sizes(10, 4) == [4, 4, 2]
    assert sum(block_sizes(1_000_003)) == 1_000_003


def test_output_independent_of_threads():
    s = RngStream(42)
    one = concat_blocks(map_blocks(_uniforms, 300_001, s, threads=1))
    many = concat_blocks(map_blocks(_uniforms, 300_001, s, threads=8))
    assert np.array_equal(one, many)


def test_children_differ():
    s = RngStream(1)
    a = s.child(0).generator().random(5)
    b = s.child(1).generator().random(5)
    assert not np.allclose(a, b)
    assert np.array_equal(a, RngStream(1).child(0).generator().random(5))


def test_seed_required():
    import pytest

    with pytest.raises(ValueError):
        as_stream(None)
    with pytest.raises(ValueError):
        RngStream(-1)
