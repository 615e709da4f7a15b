import numpy as np
import pytest
import scipy.linalg as sla

from qlsync.errors import ConfigWarning, ContractError, ParameterError
from qlsync.graph import complete_graph, cycle_graph
from qlsync.kuramoto import OscillatorParams, PhaseState, integrate
from qlsync.lohe import (
    GENERATORS,
    L1,
    L2,
    L3,
    LoheEmulationConfig,
    LoheState,
    OmegaTriple,
    build_omega,
    emit_comparison_csv,
    integrate_lohe,
    lohe_rhs,
    lohe_sync_metric,
    qlbit_to_vector,
    run_lohe_emulation,
    vector_to_qlbit,
)


def random_sphere(rng, n):
    return LoheState.normalized(rng.normal(size=(n, 4)))


def commutant_rotation(rng):
    """Orthogonal R with R L_k = L_k R for all three generators."""
    rows = np.vstack([np.kron(L, np.eye(4)) - np.kron(np.eye(4), L.T) for L in (L1, L2, L3)])
    null = sla.null_space(rows)
    basis = [v.reshape(4, 4) for v in null.T]
    skew = [b - b.T for b in basis]
    s = sum(rng.normal() * b for b in skew)
    return sla.expm(s)


class TestGenerators:
    def test_skew_and_square(self):
        for L in GENERATORS.stack():
            assert np.array_equal(L, -L.T)
            assert np.array_equal(L @ L, -np.eye(4))

    def test_quaternion_relations(self):
        assert np.array_equal(L1 @ L2, L3)
        assert np.array_equal(L2 @ L3, L1)
        assert np.array_equal(L3 @ L1, L2)
        assert np.array_equal(L1 @ L2, -(L2 @ L1))

    def test_read_only(self):
        with pytest.raises(ValueError):
            L1[0, 0] = 1.0

    def test_build_omega(self):
        assert np.array_equal(build_omega([2.0, 0, 0]), 2 * L1)
        assert np.array_equal(build_omega(OmegaTriple(0, 0, -1.5)), -1.5 * L3)
        many = build_omega([OmegaTriple(1, 0, 0), OmegaTriple(0, 1, 0)])
        assert many.shape == (2, 4, 4)
        assert np.array_equal(many[1], L2)
        arr = build_omega(np.array([[1.0, 2.0, 3.0]]))
        assert arr.shape == (1, 4, 4)
        assert np.array_equal(arr[0], L1 + 2 * L2 + 3 * L3)

    def test_bad_omega(self):
        with pytest.raises(ParameterError):
            OmegaTriple(np.nan, 0, 0)
        with pytest.raises(ContractError):
            build_omega([1.0, 2.0])


class TestFlow:
    def test_rhs_tangent(self):
        rng = np.random.default_rng(0)
        g = cycle_graph(6)
        s = random_sphere(rng, 6)
        om = rng.normal(size=(6, 3))
        r = lohe_rhs(s, om, 3.0, g)
        assert np.allclose(np.sum(r * s.x, axis=1), 0, atol=1e-14)

    def test_rhs_brute_force(self):
        rng = np.random.default_rng(1)
        g = complete_graph(3)
        s = random_sphere(rng, 3)
        om = rng.normal(size=(3, 3))
        expect = np.zeros((3, 4))
        for i in range(3):
            w = om[i, 0] * L1 + om[i, 1] * L2 + om[i, 2] * L3
            expect[i] = w @ s.x[i]
            for j in range(3):
                if i != j:
                    expect[i] += 2.0 / 3 * (s.x[j] - s.x[i] * (s.x[j] @ s.x[i]))
        assert np.allclose(lohe_rhs(s, om, 2.0, g), expect, atol=1e-14)
        assert np.allclose(lohe_rhs(s, om, 2.0, g, "paper_literal") - np.einsum("nij,nj->ni", build_omega(om), s.x), -(expect - np.einsum("nij,nj->ni", build_omega(om), s.x)))

    def test_norm_drift(self):
        rng = np.random.default_rng(2)
        g = complete_graph(5)
        traj = integrate_lohe(random_sphere(rng, 5), rng.normal(size=(5, 3)), 4.0, g, 1e-3, 10_000)
        assert traj.max_norm_drift < 1e-8
        assert np.allclose(np.linalg.norm(traj.final.x, axis=1), 1, atol=1e-15)

    def test_zero_coupling_closed_form(self):
        rng = np.random.default_rng(3)
        s0 = random_sphere(rng, 4)
        om = rng.normal(size=(4, 3))
        T, n = 5.0, 5000
        traj = integrate_lohe(s0, om, 0.0, cycle_graph(4), T / n, n)
        for i in range(4):
            exact = sla.expm(build_omega(om[i]) * T) @ s0.x[i]
            assert np.allclose(traj.final.x[i], exact, atol=1e-6)

    def test_l3_is_double_plane_rotation(self):
        w, t = 1.3, 0.7
        c, s = np.cos(w * t), np.sin(w * t)
        rot = np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, c, -s], [0, 0, s, c]])
        assert np.allclose(sla.expm(w * t * L3), rot, atol=1e-14)

    def test_identical_stay_identical(self):
        x = np.tile(np.array([0.5, -0.5, 0.5, 0.5]), (4, 1))
        traj = integrate_lohe(LoheState(x), [0.3, -0.2, 1.0], 5.0, complete_graph(4), 1e-3, 2000)
        assert np.ptp(traj.final.x, axis=0).max() < 1e-14

    def test_strong_coupling_synchronizes(self):
        rng = np.random.default_rng(4)
        traj = integrate_lohe(random_sphere(rng, 2), [0.0, 0.0, 1.0], 20.0, complete_graph(2), 1e-3, 5000)
        assert traj.final.x[0] @ traj.final.x[1] > 0.999

    def test_reduces_to_kuramoto(self):
        th0 = np.array([0.2, 2.5])
        w = np.array([1.0, 1.8])
        K, dt, n = 1.5, 1e-3, 5000
        x0 = np.stack([np.cos(th0), np.sin(th0), np.zeros(2), np.zeros(2)], axis=1)
        omegas = np.stack([np.zeros(2), np.zeros(2), w], axis=1)
        traj = integrate_lohe(LoheState(x0), omegas, K, complete_graph(2), dt, n)
        ku = integrate(PhaseState(th0, w), OscillatorParams(K=K), complete_graph(2), dt, n)
        lohe_angle = np.arctan2(traj.final.x[:, 1], traj.final.x[:, 0])
        assert np.allclose(np.angle(np.exp(1j * (lohe_angle - ku.theta))), 0, atol=1e-6)
        assert np.allclose(traj.final.x[:, 2:], 0, atol=1e-12)

    def test_rotational_equivariance(self):
        rng = np.random.default_rng(5)
        R = commutant_rotation(rng)
        assert np.allclose(R @ R.T, np.eye(4), atol=1e-12)
        s0 = random_sphere(rng, 3)
        om = rng.normal(size=(3, 3))
        g = complete_graph(3)
        a = integrate_lohe(s0, om, 2.0, g, 1e-3, 2000).final.x
        b = integrate_lohe(LoheState(s0.x @ R.T), om, 2.0, g, 1e-3, 2000).final.x
        assert np.allclose(a @ R.T, b, atol=1e-9)

    def test_sample_steps(self):
        rng = np.random.default_rng(6)
        traj = integrate_lohe(random_sphere(rng, 2), [0, 0, 1], 1.0, complete_graph(2), 0.01, 100, sample_steps=[0, 50, 100])
        assert traj.states.shape == (3, 2, 4)
        assert np.allclose(traj.times, [0, 0.5, 1.0])

    def test_bad_inputs(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ContractError):
            integrate_lohe(random_sphere(rng, 3), [0, 0, 1], 1.0, complete_graph(2), 0.01, 10)
        with pytest.raises(ParameterError):
            integrate_lohe(random_sphere(rng, 2), [0, 0, 1], 1.0, complete_graph(2), 0.0, 10)
        with pytest.raises(ContractError):
            LoheState(np.zeros((3, 3)))


class TestMetric:
    def test_equal(self):
        assert lohe_sync_metric(np.tile([0, 0, 0, 1.0], (5, 1))) == pytest.approx(1)

    def test_orthogonal(self):
        assert lohe_sync_metric(np.eye(4)) == pytest.approx(0)

    def test_uniform(self):
        s = random_sphere(np.random.default_rng(0), 500)
        assert abs(lohe_sync_metric(s)) < 0.1

    def test_brute_force(self):
        x = random_sphere(np.random.default_rng(1), 6).x
        pairs = [x[i] @ x[j] for i in range(6) for j in range(i + 1, 6)]
        assert lohe_sync_metric(x) == pytest.approx(np.mean(pairs), abs=1e-14)

    def test_single(self):
        with pytest.raises(ParameterError):
            lohe_sync_metric(np.ones((1, 4)))


class TestStateMap:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        v = qlbit_to_vector(z[:, 0], z[:, 1])
        a, b = vector_to_qlbit(v)
        assert np.allclose(a, z[:, 0]) and np.allclose(b, z[:, 1])
        assert np.allclose(np.linalg.norm(v, axis=1), 1)

    def test_inner_product(self):
        # x . y = Re <psi_x, psi_y>
        rng = np.random.default_rng(1)
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        v = qlbit_to_vector(z[:, 0], z[:, 1])
        assert v[0] @ v[1] == pytest.approx(np.vdot(z[0], z[1]).real)

    def test_global_phase_is_l3(self):
        alpha, beta = 0.6 + 0.3j, -0.2 + np.sqrt(1 - 0.45 - 0.04) * 1j
        w, t = 2.0, 0.4
        rot = np.exp(-1j * w * t)
        lhs = qlbit_to_vector(alpha * rot, beta * rot)
        rhs = sla.expm(w * t * L3) @ qlbit_to_vector(alpha, beta)
        assert np.allclose(lhs, rhs, atol=1e-14)


class TestEmulation:
    base = dict(n_qlbits=3, n0=6, d=3, periods=20, n_samples=11, seed=1)

    def test_strong_inter_coupling_synchronizes(self):
        r = run_lohe_emulation(LoheEmulationConfig(inter_p=0.5, inter_weight=0.5, **self.base))
        assert r.ql_metric[-1] > r.ql_metric[0] + 0.2
        assert r.lohe_metric[-1] > r.lohe_metric[0] + 0.2
        assert r.ql_metric[0] == pytest.approx(r.lohe_metric[0], abs=1e-9)
        assert r.ql_vectors.shape == (11, 3, 4)

    def test_decoupled_identical_frequencies(self):
        r = run_lohe_emulation(LoheEmulationConfig(inter_p=0.0, sigma_nu=0.0, **self.base))
        assert np.ptp(r.lohe_metric) < 1e-12
        assert np.ptp(r.ql_metric) < 1e-3

    def test_states_move_with_frequency_offsets(self):
        r = run_lohe_emulation(LoheEmulationConfig(inter_p=0.0, **self.base))
        assert np.max(np.abs(r.ql_vectors[-1] - r.ql_vectors[0])) > 0.1
        assert np.allclose(np.linalg.norm(r.ql_vectors, axis=-1), 1)

    def test_literal_sign_does_not_synchronize(self):
        att = run_lohe_emulation(LoheEmulationConfig(inter_p=0.5, inter_weight=0.5, **self.base))
        lit = run_lohe_emulation(LoheEmulationConfig(inter_p=0.5, inter_weight=0.5, coupling_sign="paper_literal", **self.base))
        assert lit.lohe_metric[-1] < att.lohe_metric[-1]

    def test_deterministic(self):
        a = run_lohe_emulation(LoheEmulationConfig(**self.base))
        b = run_lohe_emulation(LoheEmulationConfig(**self.base))
        assert np.array_equal(a.ql_metric, b.ql_metric) and np.array_equal(a.lohe_metric, b.lohe_metric)

    def test_strong_inter_weight_warns(self):
        with pytest.warns(ConfigWarning):
            LoheEmulationConfig(inter_weight=1.0)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            LoheEmulationConfig(n_qlbits=1)
        with pytest.raises(ParameterError):
            LoheEmulationConfig(inter_p=2.0)

    def test_csv(self, tmp_path):
        r = run_lohe_emulation(LoheEmulationConfig(**self.base))
        path = emit_comparison_csv(r, tmp_path / "cmp.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,ql_metric,lohe_metric"
        assert len(lines) == 12
        assert float(lines[-1].split(",")[0]) == pytest.approx(20)
