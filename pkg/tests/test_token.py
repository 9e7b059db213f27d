import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otmlab.errors import BudgetExceededError
from otmlab.quantum import BB84Key, all_bitstrings, bits_to_index, index_to_bits
from otmlab.rng import make_rng
from otmlab.token import (
    REJECT_SYMBOL,
    MAMemorySpec,
    QueryAccess,
    TokenProgram,
    WrapInstance,
    acceptance_mask,
    honest_key_distribution,
    make_toy_ma_memory,
    oracle_unitary,
    replay_log,
    verify_query,
    wrap_run,
)

bits = st.integers(0, 1)


@st.composite
def programs(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    x = draw(st.lists(bits, min_size=n, max_size=n))
    theta = draw(st.lists(bits, min_size=n, max_size=n))
    return TokenProgram(draw(bits), draw(bits), tuple(x), tuple(theta))


def prog(s0, s1, x, theta):
    key = BB84Key.from_strings(x, theta)
    return TokenProgram.from_key(s0, s1, key)


class TestVerifyQuery:
    def test_spot_values(self):
        p = prog(1, 0, "01", "+x")
        assert verify_query(p, "00", 0) == 1  # only position 0 checked
        assert verify_query(p, "10", 0) is None
        assert verify_query(p, "11", 1) == 0
        assert verify_query(p, "10", 1) is None

    def test_all_rectilinear_rejects_nothing_for_b1(self):
        p = prog(0, 1, "101", "+++")
        assert all(verify_query(p, y, 1) == 1 for y in map(tuple, all_bitstrings(3)))

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            verify_query(prog(0, 0, "01", "++"), "0", 0)

    def test_non_bitstring_rejected(self):
        p = prog(0, 0, "01", "++")
        with pytest.raises(TypeError):
            verify_query(p, np.array([0.5, 0.5]), 0)
        with pytest.raises(ValueError):
            verify_query(p, (0, 2), 0)
        with pytest.raises(ValueError):
            verify_query(p, "01", 2)

    @pytest.mark.parametrize("n", range(1, 11))
    def test_exhaustive_characterization(self, n):
        rng = make_rng(3, n)
        key = BB84Key.random(n, rng)
        p = TokenProgram.from_key(1, 1, key)
        ys = all_bitstrings(n)
        x, theta = np.array(key.x), np.array(key.theta)
        for b in (0, 1):
            checked = theta == b
            expected = np.all(ys[:, checked] == x[checked], axis=1)
            np.testing.assert_array_equal(acceptance_mask(p, b), expected)
            # accepting keys for b number 2^(unchecked positions)
            assert acceptance_mask(p, b).sum() == 2 ** int((theta != b).sum())
        # spot-check the scalar path against the mask
        for i in rng.integers(0, 1 << n, size=32):
            y = index_to_bits(int(i), n)
            for b in (0, 1):
                assert (verify_query(p, y, b) is not None) == acceptance_mask(p, b)[i]

    @settings(max_examples=60, deadline=None)
    @given(p=programs(), b=bits)
    def test_honest_key_always_accepted(self, p, b):
        assert verify_query(p, p.x, b) == p.secret(b)


class TestStatelessness:
    @settings(max_examples=60, deadline=None)
    @given(p=programs(), data=st.data())
    def test_replay_reproduces_verdicts(self, p, data):
        queries = data.draw(
            st.lists(st.tuples(st.lists(bits, min_size=p.n, max_size=p.n), bits), max_size=20)
        )
        wrap = WrapInstance(p, query_budget=100)
        outs = [wrap_run(wrap, y, b) for y, b in queries]
        assert replay_log(wrap)
        fresh = WrapInstance(p, query_budget=100)
        assert [wrap_run(fresh, y, b) for y, b in reversed(queries)] == outs[::-1]

    @settings(max_examples=60, deadline=None)
    @given(p=programs(), data=st.data(), reps=st.integers(2, 10))
    def test_repeated_query_identical(self, p, data, reps):
        y = tuple(data.draw(st.lists(bits, min_size=p.n, max_size=p.n)))
        b = data.draw(bits)
        wrap = WrapInstance(p, query_budget=reps)
        assert len({wrap_run(wrap, y, b) for _ in range(reps)}) == 1

    def test_tampered_log_detected(self):
        wrap = WrapInstance(prog(0, 1, "01", "+x"))
        wrap_run(wrap, "01", 0)
        y, b, out = wrap.log[0]
        wrap.log[0] = (y, b, None if out is not None else 1)
        assert not replay_log(wrap)


class TestWrap:
    def test_budget(self):
        wrap = WrapInstance(prog(0, 1, "0", "+"), query_budget=2)
        wrap_run(wrap, "0", 0)
        wrap_run(wrap, "1", 0)
        assert wrap.remaining == 0
        with pytest.raises(BudgetExceededError):
            wrap_run(wrap, "0", 0)
        assert len(wrap.log) == 2

    def test_three_accepting_then_exhausted(self):
        p = prog(0, 1, "01", "+x")
        wrap = WrapInstance(p, query_budget=3)
        assert [wrap_run(wrap, "01", b) for b in (0, 1, 0)] == [0, 1, 0]
        with pytest.raises(BudgetExceededError):
            wrap_run(wrap, "01", 1)

    def test_query_access(self):
        wrap = WrapInstance(prog(1, 0, "1", "x"), query_budget=3)
        access = QueryAccess(wrap, 1)
        assert access.query([0], 1) is None
        assert access.query([1], 1) == 0
        assert access.queries_made == 2 and access.remaining == 1
        with pytest.raises(TypeError):
            access.query(np.array([0.6]), 0)


class TestSerialization:
    @settings(max_examples=40, deadline=None)
    @given(p=programs())
    def test_json_round_trip(self, p):
        assert TokenProgram.from_json(p.to_json()) == p

    def test_json_layout(self):
        assert json.loads(prog(1, 0, "01", "+x").to_json()) == {
            "s0": 1, "s1": 0, "x": "01", "theta": "+x"
        }

    def test_ma_spec_round_trip(self):
        spec, _ = make_toy_ma_memory(2, 1, make_rng(4))
        back = MAMemorySpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert back.f == spec.f and back.key_sets == spec.key_sets
        for u, v in zip(spec.honest_unitaries, back.honest_unitaries):
            np.testing.assert_allclose(u, v, atol=1e-15)


class TestMAMemory:
    def test_oracle_unitary_is_permutation(self):
        table = (0, 1, REJECT_SYMBOL, 1)
        u = oracle_unitary(table)
        np.testing.assert_array_equal(u @ u.T, np.eye(16))
        np.testing.assert_array_equal(u @ u, np.eye(16))  # XOR oracle is self-inverse
        # |y=2>|00> -> |y=2>|10> (reject flag set)
        assert u[(2 << 2) | 0b10, (2 << 2)] == 1
        assert u[(1 << 2) | 0b01, (1 << 2)] == 1

    @pytest.mark.parametrize("n,delta", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 4)])
    def test_toy_memory_honest_correctness(self, n, delta):
        spec, psi = make_toy_ma_memory(n, delta, make_rng(11, n, delta))
        dim = 1 << spec.work_qubits
        for u in spec.honest_unitaries:
            np.testing.assert_allclose(u @ u.conj().T, np.eye(dim), atol=1e-12)
        for i in (0, 1):
            p = honest_key_distribution(spec, psi, i)
            on_keys = sum(p[k] for k in spec.key_sets[i])
            assert on_keys == pytest.approx(1.0, abs=1e-12)
            for k in spec.key_sets[i]:
                assert spec.f[k] == spec.secrets[i]
                assert p[k] == pytest.approx(1 / delta, abs=1e-12)

    def test_rejects_when_too_many_keys(self):
        with pytest.raises(ValueError):
            make_toy_ma_memory(1, 2, make_rng(0))

    def test_overlapping_key_sets(self):
        with pytest.raises(ValueError):
            MAMemorySpec(1, (0, 0), ({0}, {0, 1}), 2, ())

    def test_evaluate(self):
        spec, _ = make_toy_ma_memory(3, 2, make_rng(8), s0=1, s1=0)
        assert spec.secrets == (1, 0)
        for i in range(8):
            v = spec.evaluate(index_to_bits(i, 3))
            if i in spec.key_sets[0]:
                assert v == 1
            elif i in spec.key_sets[1]:
                assert v == 0
            else:
                assert v == REJECT_SYMBOL
        assert bits_to_index((1, 0, 1)) == 5
