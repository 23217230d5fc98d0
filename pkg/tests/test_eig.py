import math

import numpy as np
import pytest

from oqn.eig import (
    MinEvecCase,
    SepCase,
    lanczos_factorize,
    min_evec,
    sep,
    tridiag_eig,
)
from oqn.errors import InvalidDelta, InvalidProbability, NonUnitStart
from oqn.linops import Counter, SymOperator, dense_extreme_eig
from oqn.rng import RngStream

from conftest import random_symmetric


def unit(v):
    return v / np.linalg.norm(v)


class TestLanczos:
    def test_identity_breaks_down_immediately(self):
        op = SymOperator(np.eye(4), Counter())
        fact = lanczos_factorize(op, unit(np.array([1.0, 2.0, 0.5, -1.0])), 4)
        assert fact.breakdown_at == 1
        assert fact.alphas[0] == pytest.approx(1.0)
        assert op.counter.count == 1

    def test_tridiagonal_similarity_recovers_spectrum(self):
        op = SymOperator(np.diag([1.0, 2.0, 3.0]), Counter())
        fact = lanczos_factorize(op, unit(np.ones(3)), 3)
        evals, _ = tridiag_eig(*fact.tridiagonal())
        np.testing.assert_allclose(evals, [1.0, 2.0, 3.0], atol=1e-10)
        assert op.counter.count == 3

    def test_eigenvector_start_breaks_down(self):
        a = np.diag([5.0, -1.0, 2.0])
        op = SymOperator(a, Counter())
        fact = lanczos_factorize(op, np.array([0.0, 1.0, 0.0]), 3)
        assert fact.breakdown_at == 1
        assert fact.alphas[0] == pytest.approx(-1.0)

    def test_non_unit_start_rejected(self):
        op = SymOperator(np.eye(3))
        with pytest.raises(NonUnitStart):
            lanczos_factorize(op, np.array([1.0, 1.0, 0.0]), 2)

    def test_orthonormality_and_recurrence(self, np_rng):
        a = random_symmetric(np_rng, 30)
        op = SymOperator(a, Counter())
        fact = lanczos_factorize(op, unit(np_rng.standard_normal(30)), 12)
        basis = np.column_stack(fact.basis)
        gram = basis.T @ basis
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) <= 1e-8
        # three-term recurrence: A v_k = beta_k v_{k-1} + alpha_k v_k + beta_{k+1} v_{k+1}
        scale = op.frobenius_norm()
        for k in range(fact.size):
            lhs = a @ fact.basis[k]
            rhs = fact.alphas[k] * fact.basis[k]
            if k > 0:
                rhs = rhs + fact.betas[k - 1] * fact.basis[k - 1]
            if k + 1 < len(fact.basis):
                rhs = rhs + fact.betas[k] * fact.basis[k + 1]
            assert np.linalg.norm(lhs - rhs) <= 1e-8 * scale


class TestTridiagEig:
    def test_single_entry(self):
        evals, evecs = tridiag_eig(np.array([5.0]), np.array([]))
        assert evals[0] == pytest.approx(5.0)
        assert abs(evecs[0, 0]) == pytest.approx(1.0)

    def test_two_by_two_closed_form(self):
        evals, evecs = tridiag_eig(np.array([0.0, 0.0]), np.array([1.0]))
        np.testing.assert_allclose(evals, [-1.0, 1.0], atol=1e-14)
        for j, lam in enumerate(evals):
            np.testing.assert_allclose(np.abs(evecs[:, j]),
                                       [1 / np.sqrt(2)] * 2, atol=1e-12)

    def test_matches_dense_solver(self, np_rng):
        alphas = np_rng.standard_normal(10)
        betas = np_rng.standard_normal(9)
        t_mat = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        evals, evecs = tridiag_eig(alphas, betas)
        np.testing.assert_allclose(evals, np.linalg.eigvalsh(t_mat), atol=1e-9)
        for j in range(10):
            resid = np.linalg.norm(t_mat @ evecs[:, j] - evals[j] * evecs[:, j])
            assert resid <= 1e-10 * np.linalg.norm(t_mat)


class TestMinEvec:
    def test_psd_certified(self):
        op = SymOperator(np.diag([1.0, 2.0]), Counter())
        res = min_evec(op, 0.5, 0.05, b_bound=1.0, rng=RngStream(0))
        assert res.case is MinEvecCase.PSD_CERTIFIED
        assert res.lambda_hat >= 0.0
        np.testing.assert_allclose(res.v_hat, 0.0)

    def test_zero_matrix_forces_negative_case(self):
        op = SymOperator(np.zeros((5, 5)), Counter())
        res = min_evec(op, 0.1, 0.05, b_bound=0.0, rng=RngStream(1))
        assert res.case is MinEvecCase.NEGATIVE_EIG
        assert res.lambda_hat == pytest.approx(-0.05)
        resid = np.linalg.norm(-res.lambda_hat * res.v_hat)
        assert resid == pytest.approx(0.05, abs=1e-12)

    def test_indefinite_sandwich_over_trials(self):
        a = np.diag([-2.0, 3.0])
        failures = 0
        for t in range(100):
            op = SymOperator(a, Counter())
            res = min_evec(op, 0.1, 0.01, b_bound=5.0, rng=RngStream(1000 + t))
            assert res.case is MinEvecCase.NEGATIVE_EIG
            resid = np.linalg.norm(a @ res.v_hat - res.lambda_hat * res.v_hat)
            ok = (-2.1 <= res.lambda_hat <= -2.0) and resid <= 0.1
            failures += 0 if ok else 1
        assert failures == 0  # far below the q=0.01 allowance

    def test_certificate_residual_always_holds(self, np_rng):
        for t in range(200):
            d = int(np_rng.integers(2, 25))
            a = random_symmetric(np_rng, d, scale=2.0)
            op = SymOperator(a, Counter())
            lam_min, lam_max, _, _ = dense_extreme_eig(op)
            delta = 0.05 * max(lam_max - lam_min, 1e-6)
            res = min_evec(op, delta, 0.05, b_bound=lam_max - lam_min,
                           rng=RngStream(7000 + t))
            if res.case is MinEvecCase.NEGATIVE_EIG:
                assert abs(np.linalg.norm(res.v_hat) - 1.0) <= 1e-8
                resid = np.linalg.norm(a @ res.v_hat - res.lambda_hat * res.v_hat)
                assert resid <= delta

    def test_budget_capped_at_dim(self, np_rng):
        a = random_symmetric(np_rng, 6)
        op = SymOperator(a, Counter())
        res = min_evec(op, 1e-9, 0.05, b_bound=10.0, rng=RngStream(3))
        assert res.matvecs_used <= 6
        assert op.counter.count == res.matvecs_used

    def test_invalid_arguments(self):
        op = SymOperator(np.eye(2))
        with pytest.raises(InvalidProbability):
            min_evec(op, 0.1, 1.5, 1.0, RngStream(0))
        with pytest.raises(InvalidDelta):
            min_evec(op, -0.1, 0.05, 1.0, RngStream(0))

    def test_low_rank_breakdown_keeps_certificates(self, np_rng):
        # rank-2 indefinite matrix in d=12: the Krylov space saturates after
        # three steps, the oracle truncates, and the certificate still holds
        u = np_rng.standard_normal(12)
        v = np_rng.standard_normal(12)
        v -= (v @ u) * u / (u @ u)
        a = -2.0 * np.outer(u, u) / (u @ u) + 0.5 * np.outer(v, v) / (v @ v)
        op = SymOperator(a, Counter())
        res = min_evec(op, 0.05, 0.05, b_bound=2.5, rng=RngStream(17))
        assert res.case is MinEvecCase.NEGATIVE_EIG
        assert res.matvecs_used <= 3
        assert -2.05 <= res.lambda_hat <= -2.0
        resid = np.linalg.norm(a @ res.v_hat - res.lambda_hat * res.v_hat)
        assert resid <= 0.05


class TestSep:
    def test_zero_matrix_inside(self):
        op = SymOperator(np.zeros((3, 3)), Counter())
        res = sep(op, 1.0, 0.05, RngStream(0))
        assert res.case is SepCase.INSIDE_DOUBLED
        assert res.gamma == pytest.approx(0.0)
        np.testing.assert_allclose(res.s_mat, 0.0)

    def test_rank_one_positive_spike(self):
        w = np.zeros((2, 2))
        w[0, 0] = 3.0
        op = SymOperator(w, Counter())
        res = sep(op, 1.0, 0.05, RngStream(5))
        assert res.case is SepCase.SEPARATED
        assert res.gamma == pytest.approx(3.0, abs=1e-9)
        # separation margin: <S, W> - l1 |S|_* >= gamma - 1
        nuclear = np.sum(np.abs(np.linalg.eigvalsh(res.s_mat)))
        lhs = np.vdot(res.s_mat, w) - 1.0 * nuclear
        assert lhs >= res.gamma - 1.0 - 1e-9
        top = res.s_mat[0, 0]
        assert top == pytest.approx(1.0, abs=1e-9)

    def test_negative_spike_uses_bottom_ritz_pair(self):
        w = np.zeros((3, 3))
        w[1, 1] = -5.0
        op = SymOperator(w, Counter())
        res = sep(op, 2.0, 0.05, RngStream(11))
        assert res.case is SepCase.SEPARATED
        assert res.gamma == pytest.approx(2.5, abs=1e-9)
        expected = np.zeros((3, 3))
        expected[1, 1] = -0.5
        np.testing.assert_allclose(res.s_mat, expected, atol=1e-9)

    def test_contract_over_random_trials(self, np_rng):
        hits = 0
        trials = 300
        for t in range(trials):
            d = int(np_rng.integers(2, 20))
            l1 = float(np_rng.uniform(0.5, 2.0))
            w = random_symmetric(np_rng, d, scale=float(np_rng.uniform(0.3, 3.0)))
            op = SymOperator(w, Counter())
            res = sep(op, l1, 0.05, RngStream(50_000 + t))
            w_norm = np.linalg.norm(w, ord=2)
            if res.case is SepCase.INSIDE_DOUBLED:
                hits += int(w_norm <= 2 * l1)
            else:
                hits += int(w_norm / res.gamma <= 2 * l1)
                assert np.linalg.norm(res.s_mat) <= 1.0 / l1 + 1e-10
                nuclear = np.sum(np.abs(np.linalg.eigvalsh(res.s_mat)))
                lhs = np.vdot(res.s_mat, w) - l1 * nuclear
                assert lhs >= res.gamma - 1.0 - 1e-9
            budget = min(d, math.ceil(0.5 * math.log(11 * d / 0.05**2) + 0.5))
            assert res.matvecs_used <= budget
            assert op.counter.count == res.matvecs_used
        assert hits / trials >= 0.95

    def test_invalid_probability(self):
        with pytest.raises(InvalidProbability):
            sep(SymOperator(np.eye(2)), 1.0, 0.0, RngStream(0))
