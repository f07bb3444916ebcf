import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from postrobust import CoefficientPrior, LptnDensity, RegressionProblem, ScalePrior
from postrobust.errors import BudgetError, InvalidInputError
from postrobust.model import (
    augment_with_basis,
    canonical_problem,
    general_position,
    general_position_arrays,
    log_kernel,
    log_likelihood_terms,
    observations_at,
    read_problem_csv,
    robustness_condition,
    write_problem_csv,
)


def simple_problem(X, a, b, gamma=1.0):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return RegressionProblem(X, a, b, error=LptnDensity(gamma))


class TestProblem:
    def test_canonical_sets(self, canonical):
        assert canonical.n == 5 and canonical.p == 1
        np.testing.assert_array_equal(canonical.K, [0, 1, 2, 3])
        np.testing.assert_array_equal(canonical.L, [4])

    def test_partition(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 9))
            b = np.where(rng.random(n) < 0.4, rng.normal(size=n), 0.0)
            prob = simple_problem(rng.normal(size=(n, 2)), rng.normal(size=n), b)
            assert set(prob.K) | set(prob.L) == set(range(n))
            assert not set(prob.K) & set(prob.L)

    def test_immutable(self, canonical):
        with pytest.raises(ValueError):
            canonical.a[0] = 3.0

    @pytest.mark.parametrize("kw", [dict(X=np.ones((3, 1)), a=[0, 1], b=[0, 0, 0]),
                                    dict(X=np.ones((2, 1)), a=[0, np.nan], b=[0, 0]),
                                    dict(X=np.ones(0), a=[], b=[])])
    def test_validation(self, kw):
        with pytest.raises(InvalidInputError):
            RegressionProblem(**kw)

    def test_prior_dimension_checked(self):
        with pytest.raises(InvalidInputError):
            RegressionProblem(np.ones((3, 2)), [0, 1, 2], [0, 0, 0],
                              coeff_prior=CoefficientPrior.per_coordinate([1.0]))


class TestObservations:
    def test_zero_omega(self, canonical):
        np.testing.assert_array_equal(observations_at(canonical, 0.0), canonical.a)

    def test_no_outliers(self):
        prob = simple_problem(np.ones(3), [1.0, 2.0, 3.0], [0, 0, 0])
        np.testing.assert_array_equal(observations_at(prob, 1e9), prob.a)

    def test_arithmetic(self):
        prob = simple_problem(np.ones(2), [1.0, 2.0], [0.0, 1.0])
        np.testing.assert_array_equal(observations_at(prob, 1e3), [1.0, 1002.0])

    def test_negative_omega(self, canonical):
        with pytest.raises(InvalidInputError):
            observations_at(canonical, -1.0)


class TestKernel:
    def test_single_residual_at_zero(self):
        prob = simple_problem([1.0], [0.0], [0.0], gamma=1.7)
        val = log_kernel(prob, [0.0], 1.0, include_prior=False)
        assert val == pytest.approx(math.log(1.7 / 2))

    def test_subset_K_equals_full_without_outliers(self):
        prob = simple_problem(np.ones(4), [-1, 0, 1, 2], [0, 0, 0, 0])
        assert log_kernel(prob, [0.3], 0.8, 5.0, "K") == log_kernel(prob, [0.3], 0.8, 5.0)

    def test_term_by_term(self, canonical):
        beta, sigma, omega = np.array([0.2]), 0.7, 50.0
        y = canonical.a + canonical.b * omega
        g = canonical.error.gamma
        lik = 0.0
        for yi in y:
            t = abs(yi - beta[0]) / sigma
            lik += math.log((g / 2) / (1 + t) / (1 + math.log1p(t)) ** (1 + g) / sigma)
        prior = math.log(0.5 / sigma / (1 + abs(beta[0]) / sigma) ** 2)
        prior += math.log(2 / math.pi / (1 + sigma ** 2))
        assert log_kernel(canonical, beta, sigma, omega) == pytest.approx(lik + prior, rel=1e-13)

    def test_full_is_clean_plus_outlier_terms(self, canonical):
        b = np.array([[0.1], [-2.0], [5.0]])
        s = np.array([0.3, 1.0, 4.0])
        full = log_kernel(canonical, b, s, 1e6)
        clean = log_kernel(canonical, b, s, 1e6, "K")
        out = log_likelihood_terms(canonical, b, s, 1e6, "L").sum(axis=-1)
        np.testing.assert_allclose(full, clean + out, rtol=1e-13)

    def test_sigma_must_be_positive(self, canonical):
        with pytest.raises(InvalidInputError):
            log_kernel(canonical, [0.0], 0.0)
        with pytest.raises(InvalidInputError):
            log_kernel(canonical, [0.0], -1.0)

    def test_normalised_outliers_stay_moderate(self, canonical):
        v = log_likelihood_terms(canonical, [0.0], 1.0, 1e12, "L", normalize_outliers=True)
        assert abs(float(v[0])) < 1.0


class TestCondition:
    def test_examples(self):
        assert robustness_condition(canonical_problem()).margin == 2
        r = robustness_condition(simple_problem(np.eye(4)[:, :2] + 1, [0, 1, 2, 3], [0, 0, 1, 1]))
        assert not r.holds and r.margin == -2
        r = robustness_condition(simple_problem(np.ones(3), [0, 1, 2], [0, 0, 1]))
        assert r.holds and r.margin == 0


class TestGeneralPosition:
    def test_hand_example(self):
        rep = general_position(simple_problem([1.0, 2.0, 3.0], [0.0, 1.0, 2.0], [0, 0, 1]))
        assert rep.cond_i and rep.cond_ii and rep.cond_iii

    def test_intercept_only(self):
        rep = general_position(simple_problem(np.ones(3), [0.0, 1.0, 2.0], [0, 0, 1]))
        assert rep.holds
        rep = general_position(simple_problem(np.ones(3), [0.0, 1.0, 1.0], [0, 0, 1]))
        assert rep.cond_i and not rep.cond_ii
        assert (1, 2) in rep.witnesses["ii"]

    def test_duplicated_row(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])
        rep = general_position(simple_problem(X, [0, 1, 2], [0, 0, 1]))
        assert not rep.cond_i
        assert rep.witnesses["i"] == [(0, 1)]

    def test_all_zero_b_exempt(self):
        rep = general_position_arrays(np.ones((3, 1)), [0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
        assert rep.cond_iii

    def test_small_n_checks_only_i(self):
        rep = general_position_arrays(np.eye(2), [0, 1], [0, 1])
        assert rep.cond_i and rep.cond_ii is None and rep.cond_iii is None

    def test_budget(self):
        with pytest.raises(BudgetError):
            # C(200, 3) > 10^6 subsets for conditions (ii)/(iii)
            general_position_arrays(np.ones((200, 2)), np.zeros(200), np.zeros(200))

    def test_random_designs_pass(self):
        rng = np.random.default_rng(0)
        fails = 0
        for _ in range(100):
            p = int(rng.integers(1, 4))
            n = int(rng.integers(p + 1, 9))
            rep = general_position_arrays(rng.normal(size=(n, p)), rng.normal(size=n), rng.normal(size=n))
            fails += not rep.holds
        assert fails == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 5, 2
        X = rng.integers(-2, 3, size=(n, p)).astype(float)
        a = rng.integers(-2, 3, size=n).astype(float)
        b = rng.integers(0, 2, size=n).astype(float)
        perm = rng.permutation(n)
        r1 = general_position_arrays(X, a, b)
        r2 = general_position_arrays(X[perm], a[perm], b[perm])
        assert (r1.cond_i, r1.cond_ii, r1.cond_iii) == (r2.cond_i, r2.cond_ii, r2.cond_iii)
        for key in ("i", "ii", "iii"):
            mapped = {tuple(sorted(perm[list(w)])) for w in r2.witnesses[key]}
            assert mapped == {tuple(w) for w in r1.witnesses[key]}

    def test_determinant_oracle(self, rng):
        # condition (ii) for p = 1 is det [[x_i, a_i], [x_j, a_j]] != 0 for all pairs
        x = rng.integers(1, 4, 6).astype(float)
        a = rng.integers(-3, 4, 6).astype(float)
        expect = all(abs(x[i] * a[j] - x[j] * a[i]) > 0 for i, j in itertools.combinations(range(6), 2))
        assert general_position_arrays(x, a, np.zeros(6)).cond_ii == expect

    def test_augmentation(self, canonical):
        Z, a, b = augment_with_basis(canonical.X, canonical.a, canonical.b)
        assert Z.shape == (6, 1) and Z[0, 0] == 1.0 and a[0] == 0.0 and b[0] == 0.0
        # the basis row coincides with the clean row a = 0, x = 1
        rep = general_position_arrays(Z, a, b)
        assert rep.cond_i and not rep.cond_ii


class TestCsv:
    def test_round_trip(self, tmp_path, canonical):
        path = tmp_path / "p.csv"
        write_problem_csv(canonical, path)
        back = read_problem_csv(path)
        np.testing.assert_array_equal(back.X, canonical.X)
        np.testing.assert_array_equal(back.a, canonical.a)
        np.testing.assert_array_equal(back.b, canonical.b)

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x1,a\n1,0\n")
        with pytest.raises(InvalidInputError, match="'b'"):
            read_problem_csv(path)

    def test_bad_row_line_number(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x1,a,b\n1,0,0\n1,zz,0\n")
        with pytest.raises(InvalidInputError, match="line 3"):
            read_problem_csv(path)

    def test_missing_x_column(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x1,x3,a,b\n1,2,0,0\n")
        with pytest.raises(InvalidInputError, match="x2"):
            read_problem_csv(path)
