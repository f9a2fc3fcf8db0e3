import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeptd.tensors import (
    DenseTensor,
    TensorShape,
    contract_all_but,
    frobenius_norm,
    inner_product,
    outer_product,
    tensorize,
    vectorize,
)


def digits_of(i: int, dims: tuple[int, ...]) -> tuple[int, ...]:
    # 0-based mixed-radix expansion, least significant digit first.
    out = []
    for d in dims:
        out.append(i % d)
        i //= d
    return tuple(out)


class TestTensorShape:
    def test_basic(self):
        s = TensorShape((2, 3, 4))
        assert s.order == 3
        assert s.size == 24

    @pytest.mark.parametrize("dims", [(), (0,), (2, -1)])
    def test_rejects_bad_dims(self, dims):
        with pytest.raises(ValueError):
            TensorShape(dims)


class TestTensorize:
    def test_two_by_two_layout(self):
        t = tensorize(np.array([1.0, 2.0, 3.0, 4.0]), TensorShape((2, 2)))
        assert t.data[0, 0] == 1.0
        assert t.data[1, 0] == 2.0
        assert t.data[0, 1] == 3.0
        assert t.data[1, 1] == 4.0

    def test_first_basis_vector_lands_at_origin(self):
        shape = TensorShape((3, 2, 4))
        e1 = np.zeros(shape.size)
        e1[0] = 1.0
        t = tensorize(e1, shape)
        assert t.data[0, 0, 0] == 1.0
        assert np.sum(t.data != 0.0) == 1

    @pytest.mark.parametrize(
        "dims",
        [(2,) * 8, (4, 4, 4, 4), (2, 3, 4), (5, 7), (3, 3, 3, 3), (13,), (1, 6, 2)],
    )
    def test_mixed_radix_exhaustive(self, dims):
        # Every basis vector must land exactly at the digit expansion of
        # its index; covers all positions for shapes up to size 256.
        shape = TensorShape(dims)
        assert shape.size <= 256
        for i in range(shape.size):
            e = np.zeros(shape.size)
            e[i] = 1.0
            t = tensorize(e, shape)
            assert t.data[digits_of(i, dims)] == 1.0
            assert np.sum(t.data != 0.0) == 1

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            tensorize(np.zeros(5), TensorShape((2, 2)))

    def test_non_vector_rejected(self):
        with pytest.raises(ValueError):
            tensorize(np.zeros((2, 2)), TensorShape((2, 2)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            tensorize(np.array([1.0, np.nan]), TensorShape((2,)))


class TestVectorize:
    def test_round_trip_example(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.array_equal(vectorize(tensorize(x, TensorShape((2, 2)))), x)

    def test_zero_tensor(self):
        t = tensorize(np.zeros(6), TensorShape((3, 2)))
        assert np.array_equal(vectorize(t), np.zeros(6))

    def test_single_entry_position(self):
        data = np.zeros((2, 2))
        data[1, 0] = 1.0
        t = DenseTensor(TensorShape((2, 2)), data)
        assert np.array_equal(vectorize(t), np.array([0.0, 1.0, 0.0, 0.0]))

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_round_trip_random(self, data):
        dims = tuple(
            data.draw(st.lists(st.integers(1, 5), min_size=1, max_size=4))
        )
        shape = TensorShape(dims)
        x = data.draw(
            st.lists(
                st.floats(-1e6, 1e6, allow_nan=False),
                min_size=shape.size,
                max_size=shape.size,
            )
        )
        x = np.asarray(x)
        assert np.array_equal(vectorize(tensorize(x, shape)), x)


class TestOuterProduct:
    def test_selector_factors(self):
        t = outer_product([np.array([1.0, 0.0]), np.array([1.0, 0.0])])
        expected = np.zeros((2, 2))
        expected[0, 0] = 1.0
        assert np.array_equal(t.data, expected)

    def test_hand_example(self):
        t = outer_product([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
        assert t.data[0, 0] == 3.0
        assert t.data[1, 0] == 6.0
        assert t.data[0, 1] == 4.0
        assert t.data[1, 1] == 8.0

    def test_unit_factors_give_unit_norm(self):
        rng = np.random.default_rng(7)
        factors = []
        for d in (3, 4, 2):
            v = rng.standard_normal(d)
            factors.append(v / np.linalg.norm(v))
        assert frobenius_norm(outer_product(factors)) == pytest.approx(1.0, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            outer_product([])


class TestInnerProduct:
    def test_matching_selectors(self):
        t = outer_product([np.array([1.0, 0.0]), np.array([1.0, 0.0])])
        assert inner_product(t, t) == 1.0

    def test_hand_example(self):
        a = outer_product([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
        b = outer_product([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        assert inner_product(a, b) == 4.0

    def test_zero_tensor(self):
        a = outer_product([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
        z = tensorize(np.zeros(4), TensorShape((2, 2)))
        assert inner_product(a, z) == 0.0

    def test_shape_mismatch_rejected(self):
        a = tensorize(np.zeros(4), TensorShape((2, 2)))
        b = tensorize(np.zeros(4), TensorShape((4,)))
        with pytest.raises(ValueError):
            inner_product(a, b)

    def test_multilinearity(self):
        # <outer(u), outer(v)> = prod <u_l, v_l> for orders up to 5.
        rng = np.random.default_rng(11)
        for dims in [(2,), (3, 4), (2, 3, 2), (2, 2, 3, 2), (2, 3, 2, 2, 3)]:
            us = [rng.standard_normal(d) for d in dims]
            vs = [rng.standard_normal(d) for d in dims]
            got = inner_product(outer_product(us), outer_product(vs))
            want = math.prod(float(u @ v) for u, v in zip(us, vs))
            assert got == pytest.approx(want, rel=1e-12)


class TestFrobeniusNorm:
    def test_examples(self):
        ones = tensorize(np.ones(4), TensorShape((2, 2)))
        assert frobenius_norm(ones) == pytest.approx(2.0)
        t = tensorize(np.array([3.0, 4.0, 0.0, 0.0]), TensorShape((2, 2)))
        assert frobenius_norm(t) == pytest.approx(5.0)

    def test_cauchy_schwarz_bound(self):
        rng = np.random.default_rng(3)
        for dims in [(3, 4), (2, 2, 2), (5, 2, 3)]:
            shape = TensorShape(dims)
            t = tensorize(rng.standard_normal(shape.size), shape)
            factors = []
            for d in dims:
                v = rng.standard_normal(d)
                factors.append(v / np.linalg.norm(v))
            val = abs(inner_product(t, outer_product(factors)))
            assert val <= frobenius_norm(t) + 1e-12


class TestContractAllBut:
    def test_orthonormal_rank1(self):
        rng = np.random.default_rng(5)
        factors = []
        for d in (3, 2, 4):
            v = rng.standard_normal(d)
            factors.append(v / np.linalg.norm(v))
        t = outer_product(factors)
        for mode in range(3):
            got = contract_all_but(t, factors, mode)
            np.testing.assert_allclose(got, factors[mode], atol=1e-12)

    def test_hand_example_mode_two(self):
        t = tensorize(np.array([1.0, 2.0, 3.0, 4.0]), TensorShape((2, 2)))
        sel = np.array([1.0, 0.0])
        got = contract_all_but(t, [sel, sel], mode=1)
        assert np.array_equal(got, np.array([1.0, 3.0]))

    def test_zero_tensor(self):
        t = tensorize(np.zeros(8), TensorShape((2, 2, 2)))
        got = contract_all_but(t, [np.ones(2)] * 3, mode=0)
        assert np.array_equal(got, np.zeros(2))

    def test_mode_out_of_range(self):
        t = tensorize(np.zeros(4), TensorShape((2, 2)))
        with pytest.raises(ValueError):
            contract_all_but(t, [np.ones(2)] * 2, mode=2)
        with pytest.raises(ValueError):
            contract_all_but(t, [np.ones(2)] * 2, mode=-1)

    def test_bad_factor_length(self):
        t = tensorize(np.zeros(4), TensorShape((2, 2)))
        with pytest.raises(ValueError):
            contract_all_but(t, [np.ones(3), np.ones(2)], mode=1)

    def test_consistency_with_inner_product(self):
        # <contract_all_but(T, f, l), f_l> must equal <T, outer(f)> at
        # every mode.
        rng = np.random.default_rng(17)
        for dims in [(2,), (3, 4), (2, 3, 2), (4, 2, 3, 2)]:
            shape = TensorShape(dims)
            t = tensorize(rng.standard_normal(shape.size), shape)
            fs = [rng.standard_normal(d) for d in dims]
            want = inner_product(t, outer_product(fs))
            for mode in range(len(dims)):
                w = contract_all_but(t, fs, mode)
                assert float(w @ fs[mode]) == pytest.approx(want, rel=1e-10)

    def test_ignores_factor_at_free_mode(self):
        t = tensorize(np.arange(6.0), TensorShape((2, 3)))
        fs_none = [np.array([1.0, 2.0]), None]
        fs_junk = [np.array([1.0, 2.0]), np.array([9.0, 9.0, 9.0])]
        got_none = contract_all_but(t, fs_none, mode=1)
        got_junk = contract_all_but(t, fs_junk, mode=1)
        assert np.array_equal(got_none, got_junk)
