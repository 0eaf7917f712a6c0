"""Reduced conditioned-state integrator.

Covers: elementwise drift coefficients in both frames, pure-dephasing
closed form, measurement superoperator identities, the strong order-1.5
step on cases with exact solutions, noise-increment statistics, seeded
reproducibility, and batch/single-trajectory equivalence.
"""

import numpy as np
import pytest

from paritysim import model, sme
from paritysim.errors import ConfigError
from paritysim.pulse import PulseSpec, default_pulse


def staggered_gamma_config():
    return model.default_config().replace(gamma_z=np.array([0.03, 0.05, 0.07]))


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


class TestDriftOperator:
    def test_diagonal_identically_zero(self, config, rng):
        alpha = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        for frame in ("rotating", "drive"):
            op = sme.DriftOperator(config, frame=frame)
            k = op.coefficient(alpha)
            assert np.all(np.diagonal(k) == 0.0)

    def test_dephasing_entries(self):
        cfg = staggered_gamma_config()
        op = sme.DriftOperator(cfg)
        k = op.coefficient(np.zeros((2, 8), dtype=complex))
        assert np.all(k.imag == 0.0)
        assert k[0, 7] == pytest.approx(-0.15)   # all three bits differ
        assert k[1, 3] == pytest.approx(-0.05)   # only qubit 1 differs
        assert k[0, 4] == pytest.approx(-0.03)   # only qubit 0 differs
        assert k[2, 6] == pytest.approx(-0.03)

    def test_elementwise_hermiticity_structure(self, config, rng):
        # K_ij = conj(K_ji) makes K o rho hermiticity-preserving
        alpha = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        for frame in ("rotating", "drive"):
            op = sme.DriftOperator(config, frame=frame)
            k = op.coefficient(alpha)
            assert np.allclose(k, k.conj().T, atol=1e-15)

    def test_single_qubit_coupling_term(self):
        cfg = model.ReadoutConfig(
            n_qubits=1, n_modes=1, chi=np.array([[1.0]]),
            kappa=np.array([2.0]), delta=np.array([0.0]),
            gamma_z=np.zeros(1))
        op = sme.DriftOperator(cfg)
        alpha = np.array([[0.3 + 0.1j, 0.2 - 0.4j]])
        k = op.coefficient(alpha)
        # signed sums are (+1, -1), so W_01 = 2
        expected = -1j * 2.0 * np.conj(alpha[0, 1]) * alpha[0, 0]
        assert k[0, 1] == pytest.approx(expected)
        assert k[1, 0] == pytest.approx(np.conj(expected))

    def test_drive_frame_adds_register_phases(self, config, rng):
        alpha = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        rot = sme.DriftOperator(config, frame="rotating").coefficient(alpha)
        drv = sme.DriftOperator(config, frame="drive").coefficient(alpha)
        h = config.chi.sum(axis=0) @ model.sigma_z_signs(config.n_qubits)
        expected = -1j * (h[:, None] - h[None, :])
        assert np.allclose(drv - rot, expected, atol=1e-15)

    def test_unknown_frame_rejected(self, config):
        with pytest.raises(ConfigError):
            sme.DriftOperator(config, frame="lab")


class TestDephasingClosedForm:
    def test_nonuniform_rates_exponential_decay(self):
        # no drive: every coherence decays at the sum of the rates of the
        # qubits whose bits differ, rho_ij(t) = rho_ij(0) e^{-r_ij t}
        cfg = staggered_gamma_config()
        out = sme.simulate_deterministic(cfg, pulse=lambda t: 0.0,
                                         n_steps=300, t_final=3.0)
        bits = model.bit_table(3)
        differ = bits[:, None, :] != bits[None, :, :]
        rates = (differ * cfg.gamma_z).sum(axis=2)
        expected = 0.125 * np.exp(-rates * 3.0)
        assert np.max(np.abs(out.rhos[-1] - expected)) < 1e-12

    def test_populations_exactly_frozen(self):
        cfg = staggered_gamma_config()
        out = sme.simulate_deterministic(cfg, pulse=lambda t: 0.0,
                                         n_steps=100, t_final=2.0)
        diags = np.einsum("tii->ti", out.rhos)
        assert np.all(diags == 0.125)

    def test_no_rates_no_drive_is_frozen(self, config):
        cfg = config.replace(gamma_z=np.zeros(3))
        out = sme.simulate_deterministic(cfg, pulse=lambda t: 0.0,
                                         n_steps=50, t_final=1.0)
        assert np.array_equal(out.rhos[-1], out.rhos[0])


class TestDiffusion:
    def test_traceless(self, rng):
        rho = random_density(rng, 8)
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        out = sme.diffusion(rho, c, 1.0)
        assert abs(np.trace(out)) < 1e-14

    def test_vanishes_on_basis_state(self, rng):
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        rho = np.zeros((8, 8), dtype=complex)
        rho[5, 5] = 1.0
        out = sme.diffusion(rho, c, 1.0)
        assert np.max(np.abs(out)) < 1e-15

    def test_zero_measurement_operator(self, rng):
        rho = random_density(rng, 8)
        out = sme.diffusion(rho, np.zeros(8, dtype=complex), 1.0)
        assert np.all(out == 0.0)

    def test_preserves_hermiticity(self, rng):
        rho = random_density(rng, 8)
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        out = sme.diffusion(rho, c, 0.7)
        assert np.allclose(out, out.conj().T, atol=1e-14)

    def test_scales_with_sqrt_eta(self, rng):
        rho = random_density(rng, 8)
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        full = sme.diffusion(rho, c, 1.0)
        half = sme.diffusion(rho, c, 0.5)
        assert np.allclose(half, 0.5 * full)

    def test_batch_axis(self, rng):
        rhos = np.stack([random_density(rng, 4) for _ in range(3)])
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        batched = sme.diffusion(rhos, c, 1.0)
        assert batched.shape == (3, 4, 4)
        for b in range(3):
            assert np.allclose(batched[b], sme.diffusion(rhos[b], c, 1.0))


class TestPhotocurrent:
    def test_mean_formula(self, rng):
        rho = random_density(rng, 8)
        c = rng.normal(size=8) + 1j * rng.normal(size=8)
        expected = np.sum(2.0 * c.real * np.diag(rho).real)
        assert sme.expected_photocurrent(rho, c, 1.0) == pytest.approx(expected)
        assert sme.expected_photocurrent(rho, c, 0.25) == pytest.approx(
            0.5 * expected)

    def test_batch_shape(self, rng):
        rhos = np.stack([random_density(rng, 4) for _ in range(5)])
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        out = sme.expected_photocurrent(rhos, c, 1.0)
        assert out.shape == (5,)


class TestStepSde:
    def test_nonautonomous_drift_uses_endpoint(self):
        # dy = t dt with no noise: the two-sided supporting values give the
        # trapezoid rule, which integrates a linear-in-t drift exactly
        y0 = np.zeros(1)
        dt = 0.1
        out = sme.step_sde(y0, 0.0, dt,
                           lambda y, t: np.full_like(y, t),
                           lambda y, t: np.zeros_like(y),
                           0.0, 0.0)
        assert out[0] == pytest.approx(0.5 * dt * dt, abs=1e-18)

    def test_additive_noise_is_exact(self):
        # constant diffusion, zero drift: y1 = y0 + sigma dW with every
        # correction term cancelling identically
        y0 = np.array([0.4])
        out = sme.step_sde(y0, 0.0, 0.05,
                           lambda y, t: np.zeros_like(y),
                           lambda y, t: np.full_like(y, 0.3),
                           0.123, 0.0045)
        assert out[0] == pytest.approx(0.4 + 0.3 * 0.123, abs=1e-16)

    def test_deterministic_step_is_pure_function(self, rng):
        y0 = rng.normal(size=4)
        args = (0.2, 0.01, lambda y, t: -y, lambda y, t: 0.1 * y, 0.03, 0.001)
        a = sme.step_sde(y0, *args)
        b = sme.step_sde(y0, *args)
        assert np.array_equal(a, b)


class TestWienerIncrements:
    def test_moments(self):
        rng = np.random.default_rng(99)
        dt = 0.01
        n = 400_000
        dw, dz = sme.wiener_increments(rng, n, dt)
        assert dw.shape == (n,)
        assert dz.shape == (n,)
        assert abs(np.mean(dw)) < 5.0 * np.sqrt(dt / n)
        assert np.mean(dw ** 2) == pytest.approx(dt, rel=0.02)
        assert np.mean(dz ** 2) == pytest.approx(dt ** 3 / 3.0, rel=0.02)
        assert np.mean(dw * dz) == pytest.approx(0.5 * dt ** 2, rel=0.02)

    def test_trajectory_rng_reproducible(self):
        a = sme.trajectory_rng(7, 3).standard_normal(16)
        b = sme.trajectory_rng(7, 3).standard_normal(16)
        assert np.array_equal(a, b)

    def test_trajectory_rng_streams_distinct(self):
        a = sme.trajectory_rng(7, 0).standard_normal(16)
        b = sme.trajectory_rng(7, 1).standard_normal(16)
        c = sme.trajectory_rng(8, 0).standard_normal(16)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSimulateTrajectory:
    def test_reproducible(self, config):
        table = sme.build_table(config, default_pulse(), 400)
        a = sme.simulate_trajectory(config, n_steps=400, base_seed=11,
                                    trajectory_index=2, table=table)
        b = sme.simulate_trajectory(config, n_steps=400, base_seed=11,
                                    trajectory_index=2, table=table)
        assert np.array_equal(a.photocurrent, b.photocurrent)
        assert np.array_equal(a.rho_final, b.rho_final)

    def test_different_index_different_noise(self, config):
        table = sme.build_table(config, default_pulse(), 400)
        a = sme.simulate_trajectory(config, n_steps=400, base_seed=11,
                                    trajectory_index=0, table=table)
        b = sme.simulate_trajectory(config, n_steps=400, base_seed=11,
                                    trajectory_index=1, table=table)
        assert not np.array_equal(a.photocurrent, b.photocurrent)

    def test_result_shapes(self, config):
        table = sme.build_table(config, default_pulse(), 300)
        out = sme.simulate_trajectory(config, n_steps=300, table=table,
                                      checkpoint_every=60)
        assert out.photocurrent.shape == (300,)
        assert out.times.shape == (301,)
        assert out.rho_final.shape == (8, 8)
        assert out.diagnostics.trace_dev.shape == (1, 6)

    def test_zero_drive_zero_rates_state_frozen(self, config):
        cfg = config.replace(gamma_z=np.zeros(3))
        table = sme.build_table(cfg, lambda t: 0.0, 200, t_final=13.5)
        out = sme.simulate_trajectory(cfg, n_steps=200, table=table)
        assert np.array_equal(out.rho_final, model.plus_density(3))
        # the record is then pure detector noise dW/dt
        scale = 1.0 / np.sqrt(table.dt)
        assert abs(np.mean(out.photocurrent)) < 5.0 * scale / np.sqrt(200)

    def test_grid_mismatch_rejected(self, config):
        table = sme.build_table(config, default_pulse(), 200)
        with pytest.raises(ConfigError):
            sme.simulate_trajectory(config, n_steps=300, table=table)


class TestSimulateBatch:
    def test_rows_match_single_runs(self, config):
        table = sme.build_table(config, default_pulse(), 250)
        rng = np.random.default_rng(5)
        dws = np.empty((2, 250))
        dzs = np.empty((2, 250))
        for b in range(2):
            dws[b], dzs[b] = sme.wiener_increments(rng, 250, table.dt)
        rho0 = np.broadcast_to(model.plus_density(3), (2, 8, 8)).copy()
        rho, rec, _ = sme.simulate_batch(config, table, rho0, dws, dzs)
        for b in range(2):
            rho_b, rec_b, _ = sme.simulate_batch(
                config, table, rho0[b:b + 1], dws[b:b + 1], dzs[b:b + 1])
            assert np.array_equal(rho[b], rho_b[0])
            assert np.array_equal(rec[b], rec_b[0])

    def test_wrapper_equivalence(self, config):
        table = sme.build_table(config, default_pulse(), 250)
        traj = sme.simulate_trajectory(config, n_steps=250, base_seed=7,
                                       trajectory_index=3, table=table)
        dw, dz = sme.wiener_increments(sme.trajectory_rng(7, 3), 250, table.dt)
        rho, rec, _ = sme.simulate_batch(
            config, table, model.plus_density(3)[None], dw[None], dz[None])
        assert np.array_equal(traj.photocurrent, rec[0])
        assert np.array_equal(traj.rho_final, rho[0])

    def test_checkpoint_cadence(self, config):
        table = sme.build_table(config, default_pulse(), 200)
        rho0 = model.plus_density(3)[None]
        dw, dz = sme.wiener_increments(np.random.default_rng(0), 200, table.dt)
        _, _, diag = sme.simulate_batch(config, table, rho0, dw[None],
                                        dz[None], checkpoint_every=50)
        assert diag.times.shape == (5,)
        assert diag.times[0] == 0.0
        assert diag.times[-1] == pytest.approx(13.5)

    def test_noise_shape_mismatch_rejected(self, config):
        table = sme.build_table(config, default_pulse(), 100)
        rho0 = model.plus_density(3)[None]
        with pytest.raises(ConfigError):
            sme.simulate_batch(config, table, rho0, np.zeros((1, 99)),
                               np.zeros((1, 99)))


class TestDiagnostics:
    def test_threshold_table(self):
        t = sme.DIAGNOSTIC_THRESHOLDS
        assert t["trace_dev"] == 1e-10
        assert t["herm_dev"] == 1e-12
        assert t["min_eig"] == -1e-8
        assert t["purity_excess"] == 1e-8
        assert t["diag_drift"] == 1e-10

    def test_violations_flag_breaches(self):
        ones = np.zeros((1, 2))
        diag = sme.Diagnostics(times=np.array([0.0, 1.0]),
                               trace_dev=ones, herm_dev=ones,
                               min_eig=np.array([[0.1, -1e-7]]),
                               purity=1.0 + np.array([[0.0, 2e-8]]),
                               diag_drift=ones)
        assert set(diag.violations()) == {"min_eig", "purity_excess"}

    def test_worst_aggregates(self):
        diag = sme.Diagnostics(times=np.array([0.0]),
                               trace_dev=np.array([[3e-11]]),
                               herm_dev=np.array([[1e-13]]),
                               min_eig=np.array([[1e-3]]),
                               purity=np.array([[0.5]]),
                               diag_drift=np.array([[0.0]]))
        w = diag.worst()
        assert w["trace_dev"] == pytest.approx(3e-11)
        assert w["purity_excess"] == pytest.approx(-0.5)
        assert diag.violations() == []
