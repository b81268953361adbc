"""
Tests for the triangular system: sequential oracle, order-k right-hand sides, residuals
"""

import numpy as np
import pytest

from parataa.errors import InternalStateError, ShapeError
from parataa.triangular import (f_order_k, fixed_point_step, frontier_step, initial_state,
                                noise_bank, order_k_rows, picard_step, refresh_eps, residuals,
                                sequential_solve, state_from, verify_equivalence)


def evaluated_state(coeffs, model, seed=0):
    state = initial_state(coeffs.T, model.dim, seed)
    refresh_eps(state, model, range(1, coeffs.T + 1), workers=1)
    return state


class TestState:
    """Test cases for trajectory states and noise banks."""

    def test_noise_bank_deterministic(self):
        """Test the same seed gives the same bank."""
        assert np.array_equal(noise_bank(8, 3, 11), noise_bank(8, 3, 11))
        assert not np.array_equal(noise_bank(8, 3, 11), noise_bank(8, 3, 12))

    def test_initial_state(self):
        """Test x_T = xi_T is fixed and the bank matches noise_bank."""
        state = initial_state(8, 3, 4)
        assert state.T == 8 and state.d == 3
        assert np.array_equal(state.xi, noise_bank(8, 3, 4))
        assert np.array_equal(state.x[8], state.xi[8])
        assert state.frozen[8] and not state.frozen[:8].any()
        assert not state.eps_valid.any()

    def test_state_from_shape_mismatch(self):
        """Test mismatched trajectory and bank shapes."""
        with pytest.raises(ShapeError):
            state_from(np.zeros((5, 2)), np.zeros((4, 2)))

    def test_copy_is_independent(self):
        """Test copies do not share buffers."""
        state = initial_state(4, 2, 0)
        clone = state.copy()
        clone.x[0] += 1.0
        clone.frozen[0] = True
        assert not np.array_equal(state.x[0], clone.x[0])
        assert not state.frozen[0]


class TestSequential:
    """Test cases for the sequential sampler."""

    def test_exactly_T_evaluations(self, make_problem, counting):
        """Test one evaluation per step."""
        coeffs, model = make_problem(T=12, d=3)
        model = counting(model)
        sequential_solve(coeffs, model, noise_bank(12, 3, 0))
        assert model.calls == 12

    def test_solves_first_order_system(self, make_problem):
        """Test the sequential trajectory has zero first-order residuals."""
        coeffs, model = make_problem(T=16, d=4)
        traj = sequential_solve(coeffs, model, noise_bank(16, 4, 1))
        assert np.all(residuals(traj, coeffs) == 0.0)
        assert traj.frozen.all()

    @pytest.mark.parametrize("k", [1, 2, 5, 16])
    def test_solves_every_order(self, make_problem, k):
        """Test the sequential trajectory solves the order-k system."""
        coeffs, model = make_problem(T=16, d=4, eta=1.0)
        traj = sequential_solve(coeffs, model, noise_bank(16, 4, 2))
        assert verify_equivalence(traj, coeffs, k) < 1e-10

    def test_bad_noise_bank(self, make_problem):
        """Test a wrongly shaped bank is rejected."""
        coeffs, model = make_problem(T=8, d=4)
        with pytest.raises(ShapeError):
            sequential_solve(coeffs, model, np.zeros((8, 4)))


class TestOrderK:
    """Test cases for F^(k)."""

    def test_copy_chain(self, copy_chain):
        """Test a = 1, b = c = 0 gives F_{t-1} = x_{min(t+k-1, T)}."""
        state = initial_state(copy_chain.T, 2, 3)
        state.eps_valid[:] = True
        T = copy_chain.T
        for k in (1, 2, 4, T):
            out = order_k_rows(state, copy_chain, k, np.arange(T))
            for v in range(T):
                assert np.array_equal(out[v], state.x[min(v + k, T)])

    def test_rows_are_independent(self, make_problem):
        """Test a row's value does not depend on the other rows in the call."""
        coeffs, model = make_problem(T=10, d=3)
        state = evaluated_state(coeffs, model)
        full = order_k_rows(state, coeffs, 3, np.arange(10))
        for v in (0, 4, 9):
            assert np.array_equal(order_k_rows(state, coeffs, 3, np.array([v]))[0], full[v])

    def test_f_order_k(self, make_problem):
        """Test the single-equation form matches the vectorized one."""
        coeffs, model = make_problem(T=10, d=3)
        state = evaluated_state(coeffs, model)
        rows = order_k_rows(state, coeffs, 2, np.arange(10))
        assert np.array_equal(f_order_k(5, state, coeffs, 2), rows[4])
        with pytest.raises(ShapeError):
            f_order_k(0, state, coeffs, 2)
        with pytest.raises(ShapeError):
            f_order_k(1, state, coeffs, 11)

    def test_missing_cache(self, make_problem):
        """Test reading an unevaluated eps is an internal error."""
        coeffs, model = make_problem(T=8, d=3)
        state = initial_state(8, 3, 0)
        with pytest.raises(InternalStateError):
            order_k_rows(state, coeffs, 1, np.array([3]))


class TestResiduals:
    """Test cases for residual vectors."""

    def test_window_only(self, make_problem):
        """Test entries outside [t1, t2] are zero and inside non-negative."""
        coeffs, model = make_problem(T=10, d=3)
        state = evaluated_state(coeffs, model)
        r = residuals(state, coeffs, 3, 6)
        assert r.shape == (10,)
        assert np.all(r[:3] == 0.0) and np.all(r[7:] == 0.0)
        assert np.all(r[3:7] > 0.0)

    def test_empty_window(self, make_problem):
        """Test t2 < t1 gives all zeros."""
        coeffs, model = make_problem(T=6, d=2)
        state = evaluated_state(coeffs, model)
        assert np.all(residuals(state, coeffs, 4, 3) == 0.0)


class TestFixedPointStep:
    """Test cases for the Jacobi update."""

    @pytest.mark.parametrize("workers", [1, 4, 8])
    def test_invariant_to_workers(self, make_problem, workers):
        """Test the update is bitwise independent of the thread count."""
        coeffs, model = make_problem(T=20, d=4)
        state = evaluated_state(coeffs, model, seed=3)
        serial = fixed_point_step(state, coeffs, 2, 0, 19, workers=1)
        threaded = fixed_point_step(state, coeffs, 2, 0, 19, workers=workers)
        assert np.array_equal(serial.x, threaded.x)
        assert np.array_equal(serial.eps_valid, threaded.eps_valid)

    def test_frozen_rows_untouched(self, make_problem):
        """Test frozen rows keep their values."""
        coeffs, model = make_problem(T=10, d=3)
        state = evaluated_state(coeffs, model)
        state.frozen[4] = True
        new = fixed_point_step(state, coeffs, 1, 0, 9)
        assert np.array_equal(new.x[4], state.x[4])
        assert not np.array_equal(new.x[3], state.x[3])
        assert new.iteration == state.iteration + 1
        assert state.eps_valid[3] and not new.eps_valid[3]
        assert new.eps_valid[4]

    def test_top_row_becomes_exact(self, make_problem):
        """Test one step from x_T reproduces the sequential x_{T-1}."""
        coeffs, model = make_problem(T=10, d=3)
        state = evaluated_state(coeffs, model, seed=7)
        oracle = sequential_solve(coeffs, model, state.xi)
        new = fixed_point_step(state, coeffs, 1, 0, 9)
        assert np.array_equal(new.x[9], oracle.x[9])

    def test_frontier_takes_first_order_step(self, make_problem):
        """Test the frontier row is rebuilt from its successor alone, the rest at order k."""
        coeffs, model = make_problem(T=10, d=3)
        state = evaluated_state(coeffs, model, seed=4)
        state.frozen[7:] = True
        new = fixed_point_step(state, coeffs, 3, 0, 6, frontier=6)
        assert np.array_equal(new.x[6], frontier_step(state, coeffs, 6))
        assert np.array_equal(new.x[6], order_k_rows(state, coeffs, 1, np.array([6]))[0])
        np.testing.assert_array_equal(new.x[:6], order_k_rows(state, coeffs, 3, np.arange(6)))
        assert not np.array_equal(new.x[6], order_k_rows(state, coeffs, 3, np.array([6]))[0])
        # refreshing eps at the frozen successor leaves the frontier residual at exactly 0
        refresh_eps(new, model, [7], workers=1)
        assert residuals(new, coeffs, 6, 6)[6] == 0.0

    def test_picard_matches_full_order(self, make_problem):
        """Test whole-trajectory refinement equals the k = T fixed-point step."""
        coeffs, model = make_problem(T=12, d=3, eta=1.0)
        state = evaluated_state(coeffs, model, seed=2)
        np.testing.assert_allclose(picard_step(state, coeffs).x,
                                   fixed_point_step(state, coeffs, 12, 0, 11).x,
                                   rtol=0, atol=1e-12)

    def test_full_order_solves_in_one_step_for_affine_model(self, copy_chain):
        """Test k = T reaches the solution of an eps-free chain in one step."""
        state = initial_state(copy_chain.T, 2, 9)
        state.eps_valid[:] = True
        new = fixed_point_step(state, copy_chain, copy_chain.T, 0, copy_chain.T - 1)
        assert np.all(new.x == new.x[copy_chain.T])
