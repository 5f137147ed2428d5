import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from carlemanlab import carleman, chaos, worstcase
from carlemanlab.carleman import (assemble, assemble_global, carleman_dimension, integrate_euler,
                                  integrate_expm, lift_initial, n_steps, solve_global,
                                  transfer_blocks, truncation_error)
from carlemanlab.errors import CapacityError, ContractError
from carlemanlab.quadratic_ode import QuadraticSystem, kron_power, rhs_eval
from carlemanlab.reference import integrate_reference

from conftest import random_system


def scalar(f2, f1, f0):
    return QuadraticSystem(1, [0], [0], [f2], [[f1]], [f0])


class TestDimension:
    @pytest.mark.parametrize("n, c, expect", [(2, 3, 14), (3, 5, 363), (4, 1, 4), (1, 7, 7)])
    def test_values(self, n, c, expect):
        assert carleman_dimension(n, c) == expect

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 5), c=st.integers(1, 5))
    def test_is_sum_of_powers(self, n, c):
        assert carleman_dimension(n, c) == sum(n**j for j in range(1, c + 1))

    def test_cap(self):
        with pytest.raises(CapacityError):
            carleman_dimension(10, 8, size_cap=10**6)


class TestTransferBlocks:
    def test_scalar_second_order(self):
        # d(u^2)/dt = 2u (f2 u^2 + f1 u + f0)
        down, diag, up = transfer_blocks(scalar(0.7, -1.3, 0.4), 2)
        assert up.toarray().tolist() == [[1.4]]
        assert diag.toarray().tolist() == [[-2.6]]
        assert down.toarray().tolist() == [[0.8]]

    def test_first_order_is_the_system(self, rng):
        sys = random_system(rng, 3)
        down, diag, up = transfer_blocks(sys, 1)
        assert down.shape == (3, 0)
        np.testing.assert_array_equal(diag.toarray(), sys.f1)
        np.testing.assert_array_equal(up.toarray(), sys.f2_dense())

    def test_identity_kron_sum(self):
        sys = QuadraticSystem(2, [], [], [], np.eye(2), np.zeros(2))
        _, diag, _ = transfer_blocks(sys, 2)
        np.testing.assert_array_equal(diag.toarray(), 2 * np.eye(4))

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(1, 3), j=st.integers(1, 3), seed=st.integers(0, 10_000))
    def test_derivative_of_kron_power(self, n, j, seed):
        # oracle: product rule on u^{⊗j} using the exact rhs
        rng = np.random.default_rng(seed)
        sys = random_system(rng, n, dissipative=False)
        u = rng.normal(size=n)
        du = rhs_eval(sys, u)
        expect = np.zeros(n**j)
        for nu in range(j):
            parts = [u] * j
            parts[nu] = du
            term = parts[0]
            for p in parts[1:]:
                term = np.kron(term, p)
            expect += term
        down, diag, up = transfer_blocks(sys, j)
        got = diag @ kron_power(u, j) + up @ kron_power(u, j + 1)
        # at j = 1 the forcing enters through b rather than a down block
        got = got + (down @ kron_power(u, j - 1) if j > 1 else sys.f0)
        np.testing.assert_allclose(got, expect, rtol=1e-10, atol=1e-10)


class TestAssemble:
    def test_scalar_order_two(self):
        f2, f1, f0 = 0.7, -1.3, 0.4
        op = assemble(scalar(f2, f1, f0), 2)
        np.testing.assert_allclose(op.a.toarray(), [[f1, f2], [2 * f0, 2 * f1]])
        np.testing.assert_array_equal(op.b, [f0, 0.0])

    def test_order_one_is_linearisation(self, rng):
        sys = random_system(rng, 3)
        op = assemble(sys, 1)
        np.testing.assert_array_equal(op.a.toarray(), sys.f1)
        np.testing.assert_array_equal(op.b, sys.f0)

    def test_worstcase_dimension(self):
        op = assemble(worstcase.build_system(), 3)
        assert op.lifted_dim == 14 and op.a.shape == (14, 14)
        rows, cols = op.a.nonzero()
        assert np.all(np.abs(op.block_of(rows) - op.block_of(cols)) <= 1)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 3), c=st.integers(1, 4), seed=st.integers(0, 10_000))
    def test_block_tridiagonal(self, n, c, seed):
        sys = random_system(np.random.default_rng(seed), n)
        op = assemble(sys, c)
        rows, cols = op.a.nonzero()
        assert np.all(np.abs(op.block_of(rows) - op.block_of(cols)) <= 1)
        assert np.all(op.b[n:] == 0)
        np.testing.assert_array_equal(op.b[:n], sys.f0)

    def test_blocks_placed(self, rng):
        sys = random_system(rng, 2)
        op = assemble(sys, 3)
        off = op.block_offsets()
        a = op.a.toarray()
        for j in range(1, 4):
            down, diag, up = (b.toarray() for b in transfer_blocks(sys, j))
            r = slice(off[j - 1], off[j])
            np.testing.assert_allclose(a[r, off[j - 1]:off[j]], diag)
            if j > 1:
                np.testing.assert_allclose(a[r, off[j - 2]:off[j - 1]], down)
            if j < 3:
                np.testing.assert_allclose(a[r, off[j]:off[j + 1]], up)


class TestLift:
    def test_pair(self):
        np.testing.assert_array_equal(lift_initial([1, 0], 2), [1, 0, 1, 0, 0, 0])

    def test_scalar(self):
        np.testing.assert_array_equal(lift_initial([2], 3), [2, 4, 8])

    def test_zero(self):
        assert not lift_initial([0, 0, 0], 3).any()


class TestSteps:
    @pytest.mark.parametrize("t_end, dt, m", [(10, 1e-3, 10_000), (1, 0.1, 10), (1, 0.3, 4),
                                              (0.3, 0.1, 3)])
    def test_n_steps(self, t_end, dt, m):
        assert n_steps(t_end, dt) == m

    def test_bad_dt(self):
        with pytest.raises(ContractError):
            n_steps(1.0, 0.0)


class TestEuler:
    def test_zero_operator(self):
        sys = QuadraticSystem(2, [], [], [], np.zeros((2, 2)), np.zeros(2))
        op = assemble(sys, 2)
        y0 = lift_initial([0.3, -0.2], 2)
        tr = integrate_euler(op, y0, 0.1, 1.0, keep_lifted=True)
        assert np.all(tr.states == [0.3, -0.2])
        np.testing.assert_array_equal(tr.lifted_final, y0)

    def test_linear_decay(self):
        op = assemble(scalar(0.0, -1.0, 0.0), 1)
        tr = integrate_euler(op, [1.0], 1e-4, 1.0)
        assert tr.states[-1, 0] == pytest.approx(math.exp(-1), abs=1e-3)
        assert tr.times[-1] == pytest.approx(1.0)

    def test_order_one_is_linear_euler(self, rng):
        sys = random_system(rng, 3)
        u0 = rng.normal(size=3)
        tr = integrate_euler(assemble(sys, 1), u0, 0.01, 0.5)
        u = u0.copy()
        for _ in range(50):
            u = u + 0.01 * (sys.f1 @ u + sys.f0)
        np.testing.assert_allclose(tr.states[-1], u, rtol=1e-13)

    def test_unstable_dt_warns(self):
        op = assemble(scalar(0.0, -100.0, 0.0), 2)
        with pytest.warns(RuntimeWarning):
            integrate_euler(op, [0.1, 0.01], 0.1, 0.2)

    def test_wrong_y0(self):
        with pytest.raises(ContractError):
            integrate_euler(assemble(scalar(1, -1, 0), 2), [1.0], 0.1, 1.0)

    @pytest.mark.parametrize("sys, u0", [
        (random_system(np.random.default_rng(5), 2, scale=0.5), [0.2, -0.1]),
        (chaos.build_chaos_system(-1e-4), chaos.initial_conditions()[1]),
    ])
    def test_first_order_convergence(self, sys, u0):
        # the C = 4 truncation error of these small states sits far below the
        # Euler error, so halving dt should roughly halve the total error
        ref = integrate_reference(sys, u0, 2.0)
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            tr = carleman.carleman_solution(sys, u0, 4, dt, 2.0, "euler")
            errs.append(np.abs(tr.states - ref.at(tr.times)).max())
        for a, b in zip(errs, errs[1:]):
            assert 1.5 <= a / b <= 3.0


class TestLiftedLinear:
    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 3), c=st.integers(2, 4), seed=st.integers(0, 10_000))
    def test_expm_blocks_are_kron_powers(self, n, c, seed):
        # with F2 = 0 and F0 = 0 the embedding is closed: block j is u^{⊗j}
        rng = np.random.default_rng(seed)
        f1 = random_system(rng, n).f1
        sys = QuadraticSystem(n, [], [], [], f1, np.zeros(n))
        u0 = rng.normal(size=n)
        op = assemble(sys, c)
        tr = integrate_expm(op, lift_initial(u0, c), 0.05, 1.0, keep_lifted=True)
        off = op.block_offsets()
        u = tr.states[-1]
        for j in range(1, c + 1):
            np.testing.assert_allclose(tr.lifted_final[off[j - 1]:off[j]], kron_power(u, j),
                                       rtol=1e-10, atol=1e-10)

    def test_euler_blocks_differ_at_order_dt(self):
        # Euler's I + dt(F1 ⊕ F1) is not (I + dt F1) ⊗ (I + dt F1); the gap is O(dt)
        sys = QuadraticSystem(1, [], [], [], [[-1.0]], [0.0])
        op = assemble(sys, 2)
        gaps = []
        for dt in (1e-2, 5e-3):
            tr = integrate_euler(op, [1.0, 1.0], dt, 1.0, keep_lifted=True)
            gaps.append(abs(tr.lifted_final[1] - tr.states[-1, 0] ** 2))
        assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.05)


class TestGlobal:
    def test_one_step_zero(self):
        sys = QuadraticSystem(2, [], [], [], np.zeros((2, 2)), np.zeros(2))
        op = assemble(sys, 1)
        m, rhs = assemble_global(op, [0.5, 2.0], 1.0, 1.0)
        np.testing.assert_array_equal(solve_global(m, rhs, 2), [[0.5, 2.0], [0.5, 2.0]])

    def test_scalar_decay(self):
        op = assemble(scalar(0.0, -1.0, 0.0), 1)
        m, rhs = assemble_global(op, [1.0], 0.5, 1.0)
        np.testing.assert_allclose(solve_global(m, rhs, 1).ravel(), [1, 0.5, 0.25])

    def test_structure(self, rng):
        op = assemble(random_system(rng, 2), 2)
        m, _ = assemble_global(op, np.ones(op.lifted_dim), 0.1, 0.5)
        d = op.lifted_dim
        dense = m.toarray()
        assert np.allclose(np.diag(dense), 1.0)
        assert np.allclose(np.triu(dense, 1), 0.0)
        np.testing.assert_allclose(dense[d:2 * d, :d], -(np.eye(d) + 0.1 * op.a.toarray()))

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 3), c=st.integers(1, 3), seed=st.integers(0, 10_000))
    def test_matches_euler(self, n, c, seed):
        rng = np.random.default_rng(seed)
        sys = random_system(rng, n, scale=0.5)
        op = assemble(sys, c)
        y0 = lift_initial(rng.normal(size=n) * 0.5, c)
        dt, t_end = 0.01, 0.5
        m, rhs = assemble_global(op, y0, dt, t_end)
        glob = solve_global(m, rhs, op.lifted_dim)
        tr = integrate_euler(op, y0, dt, t_end, keep_lifted=True)
        scale = np.abs(glob).max()
        assert np.abs(glob[:, :n] - tr.states).max() <= 1e-12 * scale
        assert np.abs(glob[-1] - tr.lifted_final).max() <= 1e-12 * scale
        # every level, not only the u block: march in lock-step
        y = y0.copy()
        for level in glob[1:]:
            y = y + dt * (op.a @ y) + dt * op.b
            assert np.abs(level - y).max() <= 1e-12 * scale

    def test_capacity(self):
        op = assemble(chaos.build_chaos_system(), 5)
        with pytest.raises(CapacityError):
            assemble_global(op, np.zeros(op.lifted_dim), 1e-3, 10.0, size_cap=10**6)


class TestTruncationError:
    def test_linear_system_only_euler_error(self):
        sys = QuadraticSystem(2, [], [], [], [[-1.0, 0.5], [0.0, -2.0]], [0.1, 0.0])
        u0 = np.array([1.0, 1.0])
        ref = carleman.reference_on_grid(sys, u0, 1e-3, 2.0)
        maxes = []
        for dt in (2e-3, 1e-3):
            maxes.append(truncation_error(sys, u0, 3, dt, 2.0, ref if dt == 1e-3 else
                                          carleman.reference_on_grid(sys, u0, dt, 2.0)).max_error)
        assert maxes[1] < maxes[0]
        assert maxes[0] / maxes[1] == pytest.approx(2.0, rel=0.1)

    def test_divergence_flag(self):
        # u' = u + u^2 from u0 = 1 blows up at t = log 2; so does the truncation
        sys = QuadraticSystem(1, [0], [0], [1.0], [[1.0]], [0.0])
        grid = 0.01 * np.arange(1001)
        dummy = carleman.Trajectory(grid, np.zeros((1001, 1)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            curve = truncation_error(sys, [1.0], 6, 0.01, 10.0, dummy, "euler")
        assert curve.diverged
        assert 0.5 < curve.blowup_time < 10.0
        assert curve.times.size < 1001 and np.all(np.isfinite(curve.err))

    def test_short_reference_rejected(self):
        sys = worstcase.build_system()
        ref = carleman.reference_on_grid(sys, [0.5, 0.1], 0.1, 1.0)
        with pytest.raises(ContractError):
            truncation_error(sys, [0.5, 0.1], 2, 0.1, 2.0, ref)

    def test_unknown_scheme(self):
        with pytest.raises(ContractError):
            carleman.carleman_solution(worstcase.build_system(), [0.5, 0.1], 2, 0.1, 1.0, "rk4")

    def test_expm_error_falls_with_order(self):
        sys = worstcase.build_system()
        u0 = np.array([0.3, 0.2])
        ref = carleman.reference_on_grid(sys, u0, 0.01, 3.0)
        errs = [truncation_error(sys, u0, c, 0.01, 3.0, ref, "expm").max_error
                for c in range(1, 6)]
        assert all(b < a for a, b in zip(errs, errs[1:]))
