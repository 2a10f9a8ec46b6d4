import numpy as np

from metriq.seeds import RngSeed, as_seed


def test_same_seed_same_draws():
    a = RngSeed(7).rng().random(10)
    b = RngSeed(7).rng().random(10)
    assert np.array_equal(a, b)


def test_streams_are_independent():
    a = RngSeed(7, 0).rng().random(10)
    b = RngSeed(7, 1).rng().random(10)
    assert not np.array_equal(a, b)


def test_children_do_not_collide():
    seen = set()
    root = RngSeed(3)
    for i in range(10):
        c = root.child(i)
        seen.add(c.stream)
        for j in range(10):
            seen.add(c.child(j).stream)
    assert len(seen) == 110


def test_as_seed_accepts_int_and_passthrough():
    s = RngSeed(5, 2)
    assert as_seed(s) is s
    assert as_seed(5) == RngSeed(5)
    assert isinstance(as_seed(None), RngSeed)
