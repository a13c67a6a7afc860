import numpy as np
import pytest

from zsdn.errors import ValidationError
from zsdn.rng import derive_seed, make_rng


def test_same_seed_same_stream():
    a = make_rng(123).random(100)
    b = make_rng(123).random(100)
    np.testing.assert_array_equal(a, b)


def test_derived_seeds_distinct_and_stable():
    children = [derive_seed(99, i) for i in range(100)]
    assert len(set(children)) == 100
    assert children == [derive_seed(99, i) for i in range(100)]


def test_derivation_depends_on_parent():
    assert derive_seed(1, 0) != derive_seed(2, 0)


def test_negative_seed_rejected():
    with pytest.raises(ValidationError):
        make_rng(-1)
    with pytest.raises(ValidationError):
        derive_seed(2**64, 0)
