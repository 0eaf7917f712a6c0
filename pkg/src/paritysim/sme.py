"""Reduced stochastic master equation for the conditioned register state.

The register density matrix rho (2**n x 2**n) evolves under

    d rho = [ (1/2) sum_l gamma_z,l D[sigma_z,l] rho
              - i sum_{k,l} chi_{k,l} P_k(t) o [sigma_z,l, rho] ] dt
            + sqrt(eta) M[c(t)] rho dW,

where P_k(t) has entries conj(alpha_{k,j}) alpha_{k,i}, "o" is the
elementwise (Hadamard) product, c(t) = exp(-i phi) sum_k sqrt(kappa_k)
alpha_{k,i} |i><i| is the diagonal measurement operator, and
M[c] rho = c rho + rho c^dag - tr(c rho + rho c^dag) rho is the standard
homodyne measurement superoperator (Wiseman & Milburn, "Quantum
Measurement and Control", ch. 4). The homodyne record is

    j(t) dt = sqrt(eta) tr((c + c^dag) rho) dt + dW.

Every operator appearing in the generator is diagonal in the
computational basis, so both drift and diffusion reduce to elementwise
multiplications of rho by precomputed coefficient matrices; one SDE step
costs a handful of d x d array operations. All stepping routines
broadcast over a leading batch axis, which is how ensembles are run.

Time stepping uses the explicit strong order-1.5 scheme for a single
scalar Wiener process from Kloeden & Platen, "Numerical Solution of
Stochastic Differential Equations" (1992), sec. 11.2, made non-autonomous
by augmenting the state with time (all supporting values are evaluated at
t + dt). The required pair of correlated Gaussians per step is

    dW = z1 sqrt(dt),   dZ = (dt^{3/2}/2) (z1 + z2/sqrt(3)),

with E[dZ^2] = dt^3/3 and E[dW dZ] = dt^2/2.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .cavity import AmplitudeTable, integrate_amplitudes, time_grid
from .errors import ConfigError
from .pulse import PulseSpec, default_pulse

#: diagnostic ceilings for a healthy trajectory at desk resolution
#: (10^4 steps); used by the CLI to decide exit status.
DIAGNOSTIC_THRESHOLDS = {
    "trace_dev": 1e-10,
    "herm_dev": 1e-12,
    "min_eig": -1e-8,
    "purity_excess": 1e-8,
    "diag_drift": 1e-10,
}


class DriftOperator:
    """Precomputed elementwise form of the deterministic generator.

    For diagonal sigma_z,l and diagonal P_k the whole drift acts as
    rho -> K(t) o rho with

        K_ij(t) = -sum_l gamma_z,l [bit_l(i) != bit_l(j)]
                  - i sum_k W_k,ij conj(alpha_k,j(t)) alpha_k,i(t)
                  - i (h_i - h_j)                      (drive frame only),

    where W_k,ij = s_{k,i} - s_{k,j} is the difference of signed chi sums
    and h_i = sum_l (sum_k chi_{k,l}) (-1)^{bit_l(i)} is the register part
    of the dispersive Hamiltonian (Omega_l = 0). In the rotating frame the
    h term is absent. The diagonal of K vanishes identically, so the
    populations are untouched by the drift.
    """

    def __init__(self, config: model.ReadoutConfig, frame: str = "rotating",
                 include_coupling: bool = True):
        if frame not in ("rotating", "drive"):
            raise ConfigError(f"frame must be 'rotating' or 'drive', got {frame!r}")
        d = config.dim
        bits = model.bit_table(config.n_qubits)          # (d, n)
        differ = bits[:, None, :] != bits[None, :, :]     # (d, d, n)
        self.gamma_mat = -(differ * config.gamma_z).sum(axis=2)
        s = model.signed_chi_sums(config)                 # (m, d)
        self.w = s[:, :, None] - s[:, None, :]            # (m, d, d)
        self.include_coupling = include_coupling
        if frame == "drive":
            h = config.chi.sum(axis=0) @ model.sigma_z_signs(config.n_qubits)
            self.h_diff = h[:, None] - h[None, :]
        else:
            self.h_diff = np.zeros((d, d))
        self.dim = d

    def coefficient(self, alpha_t: np.ndarray) -> np.ndarray:
        """K(t) for mode amplitudes alpha_t of shape (n_modes, 2**n)."""
        k = self.gamma_mat - 1j * self.h_diff
        if self.include_coupling:
            p = alpha_t[:, :, None] * alpha_t.conj()[:, None, :]
            k = k - 1j * (self.w * p).sum(axis=0)
        return k


def measurement_diag(config: model.ReadoutConfig, output_t: np.ndarray) -> np.ndarray:
    """Diagonal of c(t) from the output-line amplitudes of every basis state."""
    return np.exp(-1j * config.phi) * output_t


def drift(rho: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Deterministic generator applied to rho (elementwise K o rho)."""
    return k * rho


def diffusion(rho: np.ndarray, c: np.ndarray, sqrt_eta: float) -> np.ndarray:
    """Measurement superoperator sqrt(eta) M[c] rho for diagonal c.

    Broadcasts over a leading batch axis of rho.
    """
    cmat = c[:, None] + c.conj()[None, :]
    diag = np.einsum("...ii->...i", rho).real
    m = (diag * (2.0 * c.real)).sum(axis=-1)
    return sqrt_eta * (cmat * rho - np.asarray(m)[..., None, None] * rho)


def expected_photocurrent(rho: np.ndarray, c: np.ndarray, eta: float):
    """Mean homodyne record sqrt(eta) tr((c + c^dag) rho); batch-aware."""
    diag = np.einsum("...ii->...i", rho).real
    m = (diag * (2.0 * c.real)).sum(axis=-1)
    return math.sqrt(eta) * m


def wiener_increments(rng: np.random.Generator, n_steps: int, dt: float):
    """Correlated pair (dW, dZ) for every step of one trajectory."""
    z = rng.standard_normal((2, n_steps))
    dw = z[0] * math.sqrt(dt)
    dz = 0.5 * dt ** 1.5 * (z[0] + z[1] / math.sqrt(3.0))
    return dw, dz


def trajectory_rng(base_seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for trajectory `index`.

    Streams are spawned from the base seed, so any subset of trajectory
    indices can be regenerated without drawing the others.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=base_seed, spawn_key=(index,)))


def step_sde(y, t, dt, drift_fn, diffusion_fn, dw, dz):
    """One explicit strong order-1.5 step for scalar-noise SDEs.

    Parameters
    ----------
    y : ndarray
        Current state (any shape; complex allowed). May carry a leading
        batch axis if dw/dz broadcast against it.
    t, dt : float
        Step start and size. drift_fn/diffusion_fn are called at t and
        t + dt only.
    drift_fn, diffusion_fn : callable(y, t) -> ndarray
    dw, dz : float or ndarray
        Wiener increment and the correlated double integral
        int_t^{t+dt} (W(s) - W(t)) ds for this step.

    Notes
    -----
    The scheme is Kloeden & Platen eq. (11.2.1) with supporting values

        Y_pm  = y + a dt +- b sqrt(dt),
        Phi_pm = Y_+ +- b(Y_+) sqrt(dt),

    which attains strong order 1.5 for smooth scalar-noise systems.
    """
    sq = math.sqrt(dt)
    t1 = t + dt
    a0 = drift_fn(y, t)
    b0 = diffusion_fn(y, t)
    base = y + a0 * dt
    yp = base + b0 * sq
    ym = base - b0 * sq
    ap = drift_fn(yp, t1)
    am = drift_fn(ym, t1)
    bp = diffusion_fn(yp, t1)
    bm = diffusion_fn(ym, t1)
    bpp = diffusion_fn(yp + bp * sq, t1)
    bpm = diffusion_fn(yp - bp * sq, t1)
    return (y + 0.25 * (ap + 2.0 * a0 + am) * dt + b0 * dw
            + (ap - am) * (dz / (2.0 * sq))
            + (bp - bm) * ((dw * dw - dt) / (4.0 * sq))
            + (bp - 2.0 * b0 + bm) * ((dw * dt - dz) / (2.0 * dt))
            + (bpp - bpm - bp + bm) * ((dw * dw / 3.0 - dt) * dw / (4.0 * dt)))


@dataclass
class Diagnostics:
    """Per-checkpoint health numbers for a batch of trajectories.

    All arrays have shape (n_batch, n_checkpoints).
    """

    times: np.ndarray
    trace_dev: np.ndarray
    herm_dev: np.ndarray
    min_eig: np.ndarray
    purity: np.ndarray
    diag_drift: np.ndarray

    def worst(self) -> dict:
        """Aggregate extremes over the whole batch and all checkpoints."""
        return {
            "trace_dev": float(self.trace_dev.max()),
            "herm_dev": float(self.herm_dev.max()),
            "min_eig": float(self.min_eig.min()),
            "purity_excess": float(self.purity.max() - 1.0),
            "diag_drift": float(self.diag_drift.max()),
        }

    def violations(self, thresholds: dict = None) -> list:
        """Names of diagnostics that breached their ceiling."""
        limits = dict(DIAGNOSTIC_THRESHOLDS)
        if thresholds:
            limits.update(thresholds)
        w = self.worst()
        bad = [name for name in ("trace_dev", "herm_dev", "purity_excess",
                                 "diag_drift") if w[name] > limits[name]]
        if w["min_eig"] < limits["min_eig"]:
            bad.append("min_eig")
        return bad


@dataclass
class TrajectoryResult:
    """One conditioned trajectory.

    photocurrent[n] is the record sample for the step starting at
    times[n]; it has length len(times) - 1.
    """

    times: np.ndarray
    photocurrent: np.ndarray
    rho_final: np.ndarray
    diagnostics: Diagnostics
    base_seed: int
    trajectory_index: int


@dataclass
class DeterministicResult:
    """Unconditional (ensemble-average) evolution on a uniform grid."""

    times: np.ndarray
    rhos: np.ndarray            # (n_t, d, d)


def _checkpoint(diag_lists, rho, k0, times_list, t):
    d_rho = np.einsum("...ii->...i", rho)
    trace = d_rho.sum(axis=-1)
    herm = np.abs(rho - rho.conj().swapaxes(-1, -2)).max(axis=(-1, -2))
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().swapaxes(-1, -2)))
    purity = (np.abs(rho) ** 2).sum(axis=(-1, -2))
    diag_drift = np.abs(np.einsum("...ii->...i", k0 * rho)).max(axis=-1)
    diag_lists["trace_dev"].append(np.abs(trace - 1.0))
    diag_lists["herm_dev"].append(herm)
    diag_lists["min_eig"].append(eigs[..., 0])
    diag_lists["purity"].append(purity)
    diag_lists["diag_drift"].append(diag_drift)
    times_list.append(t)


def simulate_batch(config: model.ReadoutConfig, table: AmplitudeTable,
                   rho0: np.ndarray, dws: np.ndarray, dzs: np.ndarray,
                   checkpoint_every: int = 0, frame: str = "rotating"):
    """Advance a batch of register states through the full record grid.

    Parameters
    ----------
    rho0 : ndarray, shape (n_batch, d, d)
    dws, dzs : ndarray, shape (n_batch, n_steps)
        Per-trajectory noise increments; n_steps must equal
        len(table.times) - 1.

    Returns
    -------
    (rho_final, records, diagnostics)
        records has shape (n_batch, n_steps).
    """
    times = table.times
    n_steps = len(times) - 1
    if dws.shape[-1] != n_steps or dzs.shape != dws.shape:
        raise ConfigError("noise arrays do not match the amplitude grid")
    if checkpoint_every <= 0:
        checkpoint_every = max(1, n_steps // 100)
    dt = table.dt
    sqrt_eta = math.sqrt(config.eta)

    drift_op = DriftOperator(config, frame=frame)
    c_all = measurement_diag(config, table.output)        # (n_t, d)

    rho = np.array(rho0, dtype=complex)
    records = np.empty(dws.shape, dtype=float)
    diag_lists = {name: [] for name in
                  ("trace_dev", "herm_dev", "min_eig", "purity", "diag_drift")}
    check_times = []

    k0 = drift_op.coefficient(table.alpha[0])
    c0 = c_all[0]
    _checkpoint(diag_lists, rho, k0, check_times, times[0])

    for n in range(n_steps):
        t = times[n]
        k1 = drift_op.coefficient(table.alpha[n + 1])
        c1 = c_all[n + 1]

        def drift_fn(y, tt, _k0=k0, _k1=k1, _t=t):
            return (_k0 if tt == _t else _k1) * y

        def diffusion_fn(y, tt, _c0=c0, _c1=c1, _t=t):
            return diffusion(y, _c0 if tt == _t else _c1, sqrt_eta)

        dw = dws[..., n, None, None]
        dz = dzs[..., n, None, None]
        records[..., n] = expected_photocurrent(rho, c0, config.eta) \
            + dws[..., n] / dt
        rho = step_sde(rho, t, dt, drift_fn, diffusion_fn, dw, dz)
        k0, c0 = k1, c1
        if (n + 1) % checkpoint_every == 0 or n + 1 == n_steps:
            _checkpoint(diag_lists, rho, k0, check_times, times[n + 1])

    diagnostics = Diagnostics(
        times=np.asarray(check_times),
        trace_dev=np.stack(diag_lists["trace_dev"], axis=-1),
        herm_dev=np.stack(diag_lists["herm_dev"], axis=-1),
        min_eig=np.stack(diag_lists["min_eig"], axis=-1),
        purity=np.stack(diag_lists["purity"], axis=-1),
        diag_drift=np.stack(diag_lists["diag_drift"], axis=-1),
    )
    return rho, records, diagnostics


def build_table(config: model.ReadoutConfig, pulse, n_steps: int,
                substeps: int = 1, t_final: float = None) -> AmplitudeTable:
    """Amplitude table on the uniform grid used by the steppers.

    substeps = 2 inserts midpoints, which the deterministic RK4 stages
    need; the SDE stepper only evaluates on whole nodes.
    """
    if pulse is None:
        pulse = default_pulse()
    if t_final is None:
        if not isinstance(pulse, PulseSpec):
            raise ConfigError("t_final is required for a callable drive")
        t_final = pulse.tau
    grid = time_grid(t_final, n_steps * substeps)
    return integrate_amplitudes(config, pulse, grid)


def simulate_trajectory(config: model.ReadoutConfig, pulse: PulseSpec = None,
                        n_steps: int = 10_000, base_seed: int = 0,
                        trajectory_index: int = 0, rho0: np.ndarray = None,
                        table: AmplitudeTable = None,
                        checkpoint_every: int = 0) -> TrajectoryResult:
    """Integrate one conditioned trajectory from |+>^n (by default).

    The Wiener stream is derived from (base_seed, trajectory_index), so a
    trajectory is reproduced exactly regardless of which other indices are
    simulated around it.
    """
    if pulse is None:
        pulse = default_pulse()
    if table is None:
        table = build_table(config, pulse, n_steps)
    elif len(table.times) != n_steps + 1:
        raise ConfigError("table grid does not match n_steps")
    if rho0 is None:
        rho0 = model.plus_density(config.n_qubits)
    rng = trajectory_rng(base_seed, trajectory_index)
    dw, dz = wiener_increments(rng, n_steps, table.dt)
    rho, records, diagnostics = simulate_batch(
        config, table, rho0[None, :, :], dw[None, :], dz[None, :],
        checkpoint_every=checkpoint_every)
    return TrajectoryResult(times=table.times, photocurrent=records[0],
                            rho_final=rho[0], diagnostics=diagnostics,
                            base_seed=base_seed,
                            trajectory_index=trajectory_index)


def simulate_deterministic(config: model.ReadoutConfig, pulse=None,
                           n_steps: int = 4000, rho0: np.ndarray = None,
                           frame: str = "rotating",
                           include_coupling: bool = True,
                           table: AmplitudeTable = None,
                           t_final: float = None) -> DeterministicResult:
    """Integrate the unconditional master equation with classical RK4.

    The amplitude table is built with midpoint nodes so every RK4 stage
    hits a tabulated time exactly. `include_coupling=False` drops the
    measurement-induced Hadamard term, leaving only intrinsic dephasing
    (and the register Hamiltonian in the drive frame).
    """
    if pulse is None:
        pulse = default_pulse()
    if table is None:
        table = build_table(config, pulse, n_steps, substeps=2,
                            t_final=t_final)
    elif len(table.times) != 2 * n_steps + 1:
        raise ConfigError("table grid does not match n_steps (need midpoints)")
    if rho0 is None:
        rho0 = model.plus_density(config.n_qubits)

    drift_op = DriftOperator(config, frame=frame,
                             include_coupling=include_coupling)
    h = 2.0 * table.dt
    times = table.times[::2]
    rhos = np.empty((n_steps + 1,) + rho0.shape, dtype=complex)
    rhos[0] = rho0
    k_node = drift_op.coefficient(table.alpha[0])
    for n in range(n_steps):
        k_mid = drift_op.coefficient(table.alpha[2 * n + 1])
        k_next = drift_op.coefficient(table.alpha[2 * n + 2])
        rho = rhos[n]
        f1 = k_node * rho
        f2 = k_mid * (rho + 0.5 * h * f1)
        f3 = k_mid * (rho + 0.5 * h * f2)
        f4 = k_next * (rho + h * f3)
        rhos[n + 1] = rho + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        k_node = k_next
    return DeterministicResult(times=times, rhos=rhos)
