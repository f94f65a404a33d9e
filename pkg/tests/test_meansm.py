import numpy as np
import pytest

from spdmeans.harness import random_problem, random_spd
from spdmeans.means2 import (
    ConsistencyError,
    G_INVERSE,
    G_LINEAR,
    G_LOG,
    g_power,
    geo_mean_t,
    wasserstein2_t,
)
from spdmeans.meansm import (
    MeanProblem,
    SolverOptions,
    arithmetic,
    elementary_mean,
    generalized_karcher,
    harmonic,
    karcher_mean,
    karcher_residual,
    log_euclidean,
    power_mean,
    wasserstein_equation_residual,
    wasserstein_mean,
)
from spdmeans.pdcore import order_check, thompson


def rel(X, Y):
    return np.linalg.norm(X - Y) / max(1.0, np.linalg.norm(Y))


def diag_problem():
    a = np.array([[1.0, 2.0, 5.0], [4.0, 0.5, 3.0], [2.0, 8.0, 1.5]])
    w = np.array([0.2, 0.3, 0.5])
    return MeanProblem(w, [np.diag(r) for r in a]), w, a


class TestMeanProblem:
    def test_validation(self, spd):
        with pytest.raises(ValueError):
            MeanProblem([0.5, 0.5], [spd(2)])
        with pytest.raises(ValueError):
            MeanProblem([0.5, 0.5], [spd(2), spd(3)])
        with pytest.raises(ValueError):
            MeanProblem([1.0, -0.1], [spd(2), spd(2)])
        with pytest.raises(ValueError, match="not positive definite"):
            MeanProblem([1.0], [np.diag([1.0, -1.0])])

    def test_weights_renormalized(self, spd):
        P = MeanProblem([1.0, 3.0], [spd(2), spd(2)])
        np.testing.assert_allclose(P.weights, [0.25, 0.75])
        assert P.m == 2 and P.n == 2

    def test_options(self):
        with pytest.raises(ValueError):
            SolverOptions(tol=0.0)
        with pytest.raises(ValueError):
            SolverOptions(max_iter=0)


class TestElementary:
    def test_all_equal(self, spd):
        A = spd(3)
        P = MeanProblem.uniform([A, A, A])
        for kind in ("arithmetic", "harmonic", "log_euclidean"):
            assert rel(elementary_mean(kind, P), A) <= 1e-12

    def test_log_euclidean_diagonal(self):
        P, w, a = diag_problem()
        np.testing.assert_allclose(np.diag(log_euclidean(P)), np.prod(a ** w[:, None], axis=0),
                                   rtol=1e-13)

    def test_harmonic_below_arithmetic(self, rng):
        for _ in range(50):
            P = random_problem(rng, 4, 3, (2, 100))
            assert order_check("loewner", harmonic(P), arithmetic(P), 1e-12)

    def test_unknown_kind(self, spd):
        with pytest.raises(ValueError):
            elementary_mean("median", MeanProblem.uniform([spd(2)]))


class TestKarcher:
    def test_all_equal_one_iteration(self, spd):
        A = spd(3)
        out = karcher_mean(MeanProblem.uniform([A, A]))
        assert out.converged and out.iterations <= 1
        assert rel(out.solution, A) <= 1e-12

    def test_commuting_diagonal(self):
        P, w, a = diag_problem()
        out = karcher_mean(P)
        assert out.converged
        np.testing.assert_allclose(out.solution, np.diag(np.prod(a ** w[:, None], axis=0)),
                                   rtol=1e-12, atol=1e-13)

    def test_two_points_geodesic(self, rng):
        for t in (0.1, 0.5, 0.8):
            A, B = random_spd(3, 50, rng), random_spd(3, 50, rng)
            out = karcher_mean(MeanProblem([1 - t, t], [A, B]))
            assert out.converged and out.residual <= 1e-12
            assert rel(out.solution, geo_mean_t(A, B, t)) <= 1e-10

    def test_residual_history_monotone(self, rng):
        P = random_problem(rng, 5, 4, (50, 100))
        out = karcher_mean(P)
        assert out.converged
        assert all(b <= a for a, b in zip(out.history, out.history[1:]))
        assert karcher_residual(P, out.solution) == pytest.approx(out.residual)

    def test_nonconvergence_flagged(self, rng):
        P = random_problem(rng, 4, 3, (50, 100))
        out = karcher_mean(P, SolverOptions(max_iter=1))
        assert not out.converged and out.residual > 1e-12


class TestGeneralizedKarcher:
    def test_log_matches_karcher(self, rng):
        P = random_problem(rng, 3, 3, (2, 100))
        a = generalized_karcher(P, G_LOG).solution
        assert rel(a, karcher_mean(P).solution) <= 1e-10

    @pytest.mark.parametrize("g,closed", [(G_LINEAR, arithmetic), (G_INVERSE, harmonic)])
    def test_algebraic_cases(self, rng, g, closed):
        P = random_problem(rng, 3, 4, (2, 100))
        out = generalized_karcher(P, g)
        assert out.converged
        assert rel(out.solution, closed(P)) <= 1e-10

    def test_power_generator(self, rng):
        # g(x) = (x^t - 1)/t solves to the power mean of order t
        P = random_problem(rng, 3, 3, (2, 20))
        out = generalized_karcher(P, g_power(0.5))
        assert out.converged
        assert thompson(out.solution, power_mean(P, 0.5).solution) <= 1e-10

    def test_needs_generator(self, spd):
        from spdmeans.means2 import f_geometric

        with pytest.raises(ValueError):
            generalized_karcher(MeanProblem.uniform([spd(2)]), f_geometric(0.5))


class TestPowerMean:
    def test_endpoints(self, rng):
        P = random_problem(rng, 3, 3, (2, 100))
        assert rel(power_mean(P, 1.0).solution, arithmetic(P)) <= 1e-10
        assert rel(power_mean(P, -1.0).solution, harmonic(P)) <= 1e-10

    def test_commuting_half(self):
        P, w, a = diag_problem()
        out = power_mean(P, 0.5)
        np.testing.assert_allclose(np.diag(out.solution), (w @ np.sqrt(a)) ** 2, rtol=1e-11)

    def test_order_range(self, spd):
        P = MeanProblem.uniform([spd(2)])
        for t in (0.0, 1e-4, 1.5, -2.0):
            with pytest.raises(ValueError):
                power_mean(P, t)

    def test_sandwich(self, rng):
        for _ in range(10):
            P = random_problem(rng, 3, 3, (2, 100))
            L = karcher_mean(P).solution
            chain = [power_mean(P, -1.0).solution, power_mean(P, -0.25).solution, L,
                     power_mean(P, 0.25).solution, power_mean(P, 1.0).solution]
            for X, Y in zip(chain, chain[1:]):
                assert order_check("loewner", X, Y, 1e-9)

    def test_tends_to_karcher(self, rng):
        P = random_problem(rng, 3, 3, (2, 100))
        L = karcher_mean(P).solution
        d = [thompson(power_mean(P, 2.0 ** -k).solution, L) for k in range(1, 7)]
        assert all(b < a for a, b in zip(d, d[1:]))
        # first order in t: halving t roughly halves the gap
        assert d[-1] < d[0] / 8


class TestWasserstein:
    def test_all_equal(self, spd):
        A = spd(3)
        assert rel(wasserstein_mean(MeanProblem.uniform([A, A])).solution, A) <= 1e-12

    def test_commuting_diagonal(self):
        P, w, a = diag_problem()
        out = wasserstein_mean(P)
        np.testing.assert_allclose(np.diag(out.solution), (w @ np.sqrt(a)) ** 2, rtol=1e-11)

    def test_two_points(self, rng):
        for t in (0.2, 0.5, 0.9):
            A, B = random_spd(3, 50, rng), random_spd(3, 50, rng)
            out = wasserstein_mean(MeanProblem([1 - t, t], [A, B]))
            assert out.converged
            assert rel(out.solution, wasserstein2_t(A, B, t)) <= 1e-8

    def test_trace_and_equation(self, rng):
        for _ in range(20):
            P = random_problem(rng, 4, 3, (2, 100))
            out = wasserstein_mean(P)
            assert out.converged
            tr = out.info["traces"]
            final = np.trace(out.solution)
            assert all(b >= a - 1e-10 * abs(a) for a, b in zip(tr[1:], tr[2:]))
            assert max(tr[1:]) <= final + 1e-10 * final
            assert wasserstein_equation_residual(P, out.solution) <= 10 * 1e-12

    def test_trace_violation_raises(self, rng):
        P = random_problem(rng, 3, 3, (2, 100))
        # a negative slack demands growth the iteration cannot deliver
        with pytest.raises(ConsistencyError):
            wasserstein_mean(P, trace_tol=-1.0)


def test_multivariable_chain(rng):
    for _ in range(200):
        P = random_problem(rng, 3, 3, (2, 100))
        H, Lam = harmonic(P), karcher_mean(P).solution
        LE, Om = log_euclidean(P), wasserstein_mean(P).solution
        assert order_check("loewner", H, Lam, 1e-9)
        assert order_check("log_major", Lam, LE, 1e-9)
        assert order_check("weak_log_major", LE, Om, 1e-9)
        assert order_check("loewner", Om, arithmetic(P), 1e-9)
