import numpy as np
import pytest

from isolearn.model import (
    ConstraintSet,
    FidelityTensor,
    ObservationSample,
    PartialIsometry,
    SolverConfig,
    flatten_index,
    unflatten_index,
)


def test_flatten_examples():
    assert flatten_index(0, 0, 5) == 0
    assert flatten_index(1, 0, 5) == 5


def test_flatten_bijection_d4_n19():
    seen = [flatten_index(j, k, 19) for j in range(4) for k in range(19)]
    assert sorted(seen) == list(range(76))
    for p in range(76):
        j, k = unflatten_index(p, 19)
        assert flatten_index(j, k, 19) == p


def test_flatten_out_of_range():
    with pytest.raises(IndexError):
        flatten_index(0, 5, 5)
    with pytest.raises(IndexError):
        flatten_index(-1, 0, 5)


def test_flatten_matches_numpy_row_major():
    u = np.arange(12.0).reshape(3, 4)
    for j in range(3):
        for k in range(4):
            assert u.reshape(-1)[flatten_index(j, k, 4)] == u[j, k]


class TestObservationSample:
    def test_basic(self):
        s = ObservationSample([1.0, 2.0], [[1, 0], [0, 1]], [[1], [0]])
        assert (s.n, s.D, s.size, s.total_weight) == (2, 1, 2, 3.0)

    def test_immutable(self):
        s = ObservationSample([1.0], [[1, 0]], [[1]])
        with pytest.raises(ValueError):
            s.alpha[0, 0] = 5.0

    @pytest.mark.parametrize(
        "w,a,b",
        [
            ([0.0], [[1, 0]], [[1]]),
            ([-1.0], [[1, 0]], [[1]]),
            ([1.0], [[1]], [[1, 0]]),
            ([1.0], [[np.nan, 0]], [[1]]),
            ([1.0, 1.0], [[1, 0]], [[1]]),
        ],
    )
    def test_invalid(self, w, a, b):
        with pytest.raises(ValueError):
            ObservationSample(w, a, b)

    def test_select_and_concat(self):
        s = ObservationSample([1.0], [[1, 2, 3]], [[4, 5]])
        sub = s.select(2, 1)
        np.testing.assert_array_equal(sub.alpha, [[1, 2]])
        np.testing.assert_array_equal(sub.beta, [[4]])
        both = s.concat(s)
        assert both.size == 2
        with pytest.raises(ValueError):
            s.select(4, 1)


class TestFidelityTensor:
    def test_requires_exact_symmetry(self):
        s = np.eye(2)
        s[0, 1] = 1e-17
        with pytest.raises(ValueError):
            FidelityTensor(1, 2, s)

    def test_shape(self):
        with pytest.raises(ValueError):
            FidelityTensor(2, 2, np.eye(3))

    def test_psd_and_add(self):
        t = FidelityTensor(1, 2, np.diag([2.0, 1.0]))
        assert t.is_psd()
        assert not FidelityTensor(1, 2, np.diag([1.0, -1.0])).is_psd()
        np.testing.assert_array_equal((t + t).s, np.diag([4.0, 2.0]))


def test_partial_isometry_residual():
    u = PartialIsometry(np.eye(2, 3))
    assert u.residual == 0.0 and u.is_feasible()
    bad = PartialIsometry([[2.0, 0, 0], [0, 1, 0]])
    assert bad.residual == pytest.approx(3.0)
    assert not bad.is_feasible()
    with pytest.raises(ValueError):
        PartialIsometry(np.eye(3, 2))


def test_constraint_set_empty():
    c = ConstraintSet.empty(1, 4)
    assert c.count == 0 and c.c.shape == (0, 4)


class TestSolverConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert c.max_iterations == 100 and c.mu_tolerance == 1e-12
        assert c.unitarity_tolerance == 1e-12 and c.eigenstate_rank == 0
        assert c.num_runs == 4 and c.q_choice == "identity" and not c.scan_candidates
        assert list(c.ranks) == [0, 1, 2, 3]

    @pytest.mark.parametrize(
        "kw",
        [
            {"mu_tolerance": 0.0},
            {"unitarity_tolerance": -1.0},
            {"max_iterations": 0},
            {"num_runs": 0},
            {"eigenstate_rank": -1},
            {"channel": "other"},
            {"q_choice": "other"},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)
