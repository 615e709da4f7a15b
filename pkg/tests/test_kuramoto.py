import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlsync.errors import ContractError, NumericDivergenceError, ParameterError
from qlsync.graph import complete_graph, cycle_graph, gen_d_regular_random, graph_from_edges, ql_product
from qlsync.kuramoto import (
    OscillatorParams,
    PhaseState,
    circular_std,
    default_dt,
    integrate,
    kappa_from_circular_std,
    kuramoto_rhs,
    mean_resultant_length,
    order_parameter,
    run_length,
    sample_frequencies,
    sample_initial_phases,
)


def brute_rhs(theta, eps, a, K, sign=1.0):
    n = len(theta)
    out = np.array(eps, dtype=float)
    for i in range(n):
        for j in range(n):
            out[i] += sign * K / n * a[i, j] * np.sin(theta[j] - theta[i])
    return out


class TestSampling:
    def test_frequency_std(self):
        eps = sample_frequencies(1600, 1.0, seed=3)
        assert abs(eps.std() - 1.0) < 0.1

    def test_frequency_zero_sum(self):
        for seed in range(5):
            eps = sample_frequencies(257, 2.5, seed=seed)
            assert abs(eps.sum()) < 1e-12

    def test_zero_sigma(self):
        assert np.array_equal(sample_frequencies(10, 0.0, seed=1), np.zeros(10))

    def test_frequency_deterministic(self):
        assert np.array_equal(sample_frequencies(50, 1.0, 9), sample_frequencies(50, 1.0, 9))

    def test_negative_sigma(self):
        with pytest.raises(ParameterError):
            sample_frequencies(10, -1.0)

    @pytest.mark.parametrize("sigma", [0.001, 0.05, 0.5, 1.0, 2.0, 4.0])
    def test_kappa_inverts_circular_std(self, sigma):
        kappa = kappa_from_circular_std(sigma)
        assert np.sqrt(-2 * np.log(mean_resultant_length(kappa))) == pytest.approx(sigma, rel=1e-6)

    def test_kappa_small_std_limit(self):
        # kappa ~ 1 / sigma^2 for a narrow distribution
        assert kappa_from_circular_std(0.001) == pytest.approx(1e6, rel=1e-3)

    def test_narrow_phases(self):
        for seed in range(3):
            th = sample_initial_phases(400, 0.001, 0.0, seed)
            assert circular_std(th) == pytest.approx(0.001, rel=0.2)

    def test_narrow_phases_centered(self):
        th = sample_initial_phases(1000, 1e-6, 0.0, seed=0)
        assert np.max(np.abs(th)) < 1e-4
        assert np.array_equal(sample_initial_phases(5, 0, 0.3, seed=0), np.full(5, 0.3))

    def test_uniform_phases_order_parameter(self):
        mods = [order_parameter(sample_initial_phases(1600, "uniform", seed=s))[1] for s in range(200)]
        # E|r| = sqrt(pi) / 2 / sqrt(N) for uniform phases
        assert np.mean(mods) == pytest.approx(np.sqrt(np.pi) / 2 / 40, rel=0.1)
        # |r|^2 N is Exp(1): compare the empirical CDF at the median point
        assert np.mean(np.array(mods) ** 2 * 1600 < np.log(2)) == pytest.approx(0.5, abs=0.1)
        assert abs(np.median(mods) - 0.022) < 0.015

    def test_uniform_range(self):
        th = sample_initial_phases(1000, "uniform", seed=2)
        assert th.min() >= 0 and th.max() < 2 * np.pi


class TestRHS:
    def test_equal_phases(self):
        g = gen_d_regular_random(10, 3, 1)
        eps = sample_frequencies(10, 1.0, 2)
        s = PhaseState(np.full(10, 0.7), eps)
        assert np.allclose(kuramoto_rhs(s, OscillatorParams(K=5.0), g), eps, atol=1e-15)

    @pytest.mark.parametrize("sign", ["attractive", "paper_literal"])
    def test_matches_brute_force(self, sign):
        rng = np.random.default_rng(0)
        g = ql_product(3, 2, 0.5, seed=1)
        th, eps = rng.uniform(0, 6, g.n), rng.normal(size=g.n)
        p = OscillatorParams(K=7.0, coupling_sign=sign)
        expect = brute_rhs(th, eps, g.coupling, 7.0, 1.0 if sign == "attractive" else -1.0)
        assert np.allclose(kuramoto_rhs(PhaseState(th, eps), p, g), expect, atol=1e-12)

    def test_weighted_coupling_uses_weights(self):
        from qlsync.graph import disjoint_union_coupled

        g1 = complete_graph(2, "a")
        g2 = complete_graph(2, "b")
        g = disjoint_union_coupled([g1, g2], {(0, 1): (1.0, 1j, 0.25)}, seed=0)
        rng = np.random.default_rng(1)
        th = rng.uniform(0, 6, 4)
        expect = brute_rhs(th, np.zeros(4), g.coupling, 3.0)
        got = kuramoto_rhs(PhaseState(th, np.zeros(4)), OscillatorParams(K=3.0), g)
        assert np.allclose(got, expect)
        assert g.coupling[0, 2] == 0.25

    def test_two_oscillator_reduction(self):
        g = complete_graph(2)
        rng = np.random.default_rng(4)
        K = 1.7
        for _ in range(20):
            th, eps = rng.uniform(-4, 4, 2), rng.normal(size=2)
            d = kuramoto_rhs(PhaseState(th, eps), OscillatorParams(K=K), g)
            phi = th[1] - th[0]
            assert d[1] - d[0] == pytest.approx((eps[1] - eps[0]) - K * np.sin(phi), abs=1e-12)

    def test_fixed_point_relation(self):
        # relax to a locked state, then check eps_i against the coupling sum
        g = gen_d_regular_random(8, 5, 3)
        eps = sample_frequencies(8, 0.3, 5)
        p = OscillatorParams(K=40.0)
        th0 = sample_initial_phases(8, 0.1, 0.0, 6)
        final = integrate(PhaseState(th0, eps), p, g, 0.01, 4000)
        a = g.coupling
        coupling = np.array([sum(a[i, j] * np.sin(final.theta[j] - final.theta[i]) for j in range(8)) for i in range(8)]) / 8
        assert np.max(np.abs(kuramoto_rhs(final, p, g))) < 1e-10
        assert np.allclose(eps, -40.0 * coupling, atol=1e-10)
        # the same phases are a fixed point of the literal-sign flow with eps -> -eps,
        # where eps_i = (K/N) sum_j a_ij sin(theta_j - theta_i) holds as printed
        lit = OscillatorParams(K=40.0, coupling_sign="paper_literal")
        assert np.max(np.abs(kuramoto_rhs(PhaseState(final.theta, -eps), lit, g))) < 1e-10
        assert np.allclose(-eps, 40.0 * coupling, atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            kuramoto_rhs(PhaseState(np.zeros(3), np.zeros(3)), OscillatorParams(K=1.0), cycle_graph(4))

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            OscillatorParams(K=-1.0)
        with pytest.raises(ParameterError):
            OscillatorParams(K=1.0, coupling_sign="repulsive")
        with pytest.raises(ParameterError):
            OscillatorParams(K=1.0, mean_freq=0)


class TestIntegrate:
    def test_fixed_point_constant(self):
        g = gen_d_regular_random(10, 3, 1)
        s = integrate(PhaseState(np.full(10, 1.25), np.zeros(10)), OscillatorParams(K=5.0), g, 0.01, 500)
        assert np.array_equal(s.theta, np.full(10, 1.25))

    def test_free_drift(self):
        g = gen_d_regular_random(10, 3, 1)
        eps = sample_frequencies(10, 1.0, 2)
        phi = sample_initial_phases(10, "uniform", seed=3)
        dt, n = 0.01, 700
        s = integrate(PhaseState(phi, eps), OscillatorParams(K=0.0), g, dt, n)
        assert np.allclose(s.theta, eps * dt * n + phi, atol=1e-12, rtol=0)
        assert s.t == pytest.approx(dt * n)

    def test_fourth_order_convergence(self):
        g = cycle_graph(5)
        rng = np.random.default_rng(0)
        s0 = PhaseState(rng.uniform(0, 2 * np.pi, 5), rng.normal(size=5))
        p = OscillatorParams(K=10.0)
        T, dt = 2.0, 0.05

        def end(h):
            return integrate(s0, p, g, h, int(round(T / h))).theta

        ref = end(dt / 8)
        e1 = np.max(np.abs(end(dt) - ref))
        e2 = np.max(np.abs(end(dt / 2) - ref))
        # Richardson: with the dt/8 reference the ideal ratio is (1 - 8^-4)/(2^-4 - 8^-4) = 16.06...
        assert 12 < e1 / e2 < 20

    def test_observer_samples(self):
        g = cycle_graph(5)
        seen = []
        integrate(
            PhaseState(np.zeros(5), np.arange(5.0) - 2),
            OscillatorParams(K=0.0),
            g,
            0.1,
            10,
            observer=lambda t, th: seen.append((t, th.copy())),
            sample_steps=[0, 5, 10],
        )
        assert [round(t, 12) for t, _ in seen] == [0.0, 0.5, 1.0]
        assert np.allclose(seen[1][1], 0.5 * (np.arange(5.0) - 2))

    def test_batch_matches_single_bitwise(self):
        g = ql_product(3, 2, 0.5, seed=2)
        p = OscillatorParams(K=20.0)
        rng = np.random.default_rng(7)
        th = rng.uniform(0, 2 * np.pi, (4, g.n))
        eps = rng.normal(size=(4, g.n))
        batch = integrate(PhaseState(th, eps), p, g, 0.005, 200).theta
        for r in range(4):
            single = integrate(PhaseState(th[r], eps[r]), p, g, 0.005, 200).theta
            assert single.tobytes() == batch[r].tobytes()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_error(self):
        g = cycle_graph(4)
        eps = np.array([0.0, np.inf, 0.0, 0.0])
        with pytest.raises(NumericDivergenceError) as exc:
            integrate(PhaseState(np.zeros(4), eps), OscillatorParams(K=1.0), g, 0.1, 10)
        assert exc.value.step == 1

    def test_divergence_names_realization(self):
        g = cycle_graph(4)
        eps = np.zeros((3, 4))
        eps[2, 1] = np.nan
        with pytest.raises(NumericDivergenceError) as exc:
            integrate(PhaseState(np.zeros((3, 4)), eps), OscillatorParams(K=1.0), g, 0.1, 10, realization_offset=10)
        assert exc.value.realization == 12

    def test_bad_arguments(self):
        s = PhaseState(np.zeros(4), np.zeros(4))
        with pytest.raises(ParameterError):
            integrate(s, OscillatorParams(K=1.0), cycle_graph(4), 0.0, 10)
        with pytest.raises(ParameterError):
            integrate(s, OscillatorParams(K=1.0), cycle_graph(4), 0.1, 0)
        with pytest.raises(ContractError):
            integrate(s, OscillatorParams(K=1.0), cycle_graph(5), 0.1, 1)

    def test_run_length_defaults(self):
        assert run_length() == pytest.approx(80 * 2 * np.pi / 100)
        assert default_dt() == pytest.approx(2 * np.pi / 100 / 100)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-10, 10), st.integers(0, 1000))
    def test_rotating_frame_invariance(self, c, seed):
        g = gen_d_regular_random(8, 3, seed)
        rng = np.random.default_rng(seed)
        th, eps = rng.uniform(0, 2 * np.pi, 8), rng.normal(size=8)
        p = OscillatorParams(K=6.0)
        a = integrate(PhaseState(th, eps), p, g, 0.01, 200).theta
        b = integrate(PhaseState(th + c, eps), p, g, 0.01, 200).theta
        assert np.allclose(np.diff(a), np.diff(b), atol=1e-9)
        assert order_parameter(a)[1] == pytest.approx(order_parameter(b)[1], abs=1e-9)


class TestOrderParameter:
    def test_all_zero(self):
        assert order_parameter(np.zeros(7)) == (1.0, 1.0)

    def test_antipodal(self):
        re, mod = order_parameter(np.array([0.0, np.pi]))
        assert abs(re) < 1e-15 and mod < 1e-15

    def test_batch(self):
        re, mod = order_parameter(np.array([[0.0, 0.0], [0.0, np.pi / 2]]))
        assert np.allclose(re, [1.0, 0.5])
        assert np.allclose(mod, [1.0, np.sqrt(0.5)])

    def test_real_part_vs_modulus(self):
        re, mod = order_parameter(np.full(5, np.pi))
        assert re == pytest.approx(-1.0) and mod == pytest.approx(1.0)
