"""Record filtering, parity classification, and fidelity figures of merit.

The integrated signal is s = sum_n f(t_n) j(t_n) dt with a filter
normalized so that its time integral is 1. Classification compares s
against zero after orienting it with the sign of the noiseless
even-parity signal, so "positive means even" holds independent of the
homodyne quadrature sign convention.

The gate-based comparison model assigns a failure probability p to every
circuit operation of an ancilla-mediated ZZZ measurement (preparation,
memory, CNOT, ancilla readout) and propagates the resulting Pauli errors
through the circuit exactly; the output fidelity is the square root of a
degree-10 polynomial in p.
"""

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import model
from .cavity import AmplitudeTable
from .errors import ConfigError, DegenerateFilterError, GridMismatchError
from .pulse import PulseSpec, default_pulse
from .sme import (build_table, measurement_diag, simulate_batch,
                  trajectory_rng, wiener_increments)

FILTER_KINDS = ("matched", "matched-mean", "uniform")

#: relative floor under which a filter normalization counts as zero
_FILTER_TOL = 1e-12


def nominal_record(config: model.ReadoutConfig, table: AmplitudeTable,
                   parity: str = "even") -> np.ndarray:
    """Noiseless photocurrent of a parity reference bitstring.

    Uses the lowest-index register basis state of the requested parity and
    samples on the step grid (left nodes), matching the convention of the
    stochastic record.
    """
    idx = model.parity_indices(config.n_qubits, parity)[0]
    c = measurement_diag(config, table.output[:-1, idx])
    return math.sqrt(config.eta) * 2.0 * c.real


@dataclass
class FilterFunction:
    """A filter sampled on the record grid, with integral 1.

    nominal_even is the integrated signal the filter produces on the
    noiseless even-parity record; its sign orients classification.
    """

    kind: str
    times: np.ndarray
    values: np.ndarray
    dt: float
    nominal_even: float

    @property
    def orientation(self) -> float:
        """+1 or -1 so that orientation * s > 0 on even-parity records."""
        if self.nominal_even == 0.0:
            raise DegenerateFilterError(
                "filter produces zero signal on the reference record; "
                "parity cannot be oriented")
        return 1.0 if self.nominal_even > 0.0 else -1.0

    def integrate(self, record) -> np.ndarray:
        """Integrated signal(s); record may be (n,) or batched (..., n)."""
        record = np.asarray(record, dtype=float)
        if record.shape[-1] != len(self.values):
            raise GridMismatchError(
                f"record has {record.shape[-1]} samples, filter has "
                f"{len(self.values)}")
        # elementwise product + axis reduction keeps the rounding of each
        # row independent of the batch shape (a BLAS matvec does not)
        return (record * self.values).sum(axis=-1) * self.dt


def build_filter(config: model.ReadoutConfig, table: AmplitudeTable,
                 kind: str = "matched") -> FilterFunction:
    """Construct a classification filter on the table's record grid.

    kinds:
      matched       proportional to the noiseless even-parity record
      matched-mean  proportional to the difference of the two noiseless
                    parity records (symmetric variant)
      uniform       constant boxcar
    """
    if kind not in FILTER_KINDS:
        raise ConfigError(f"unknown filter kind {kind!r}; "
                          f"choose from {FILTER_KINDS}")
    times = table.times[:-1]
    dt = table.dt
    span = table.times[-1] - table.times[0]
    j_even = nominal_record(config, table, "even")

    if kind == "uniform":
        values = np.full(len(times), 1.0 / span)
    else:
        shape = j_even if kind == "matched" \
            else j_even - nominal_record(config, table, "odd")
        norm = shape.sum() * dt
        floor = _FILTER_TOL * max(1.0, float(np.abs(shape).max()) * span)
        if abs(norm) < floor:
            raise DegenerateFilterError(
                f"{kind} filter normalization integral is numerically zero")
        values = shape / norm
    nominal_even = float(values @ j_even * dt)
    return FilterFunction(kind=kind, times=times, values=values, dt=dt,
                          nominal_even=nominal_even)


def integrated_signal(filt: FilterFunction, record) -> float:
    """s = sum f j dt for a single record."""
    return float(filt.integrate(record))


def assign_parity(signal: float) -> str:
    """Sign rule on an oriented integrated signal: positive means even."""
    if signal > 0.0:
        return "even"
    if signal < 0.0:
        return "odd"
    warnings.warn("integrated signal is exactly zero; assigning even")
    return "even"


def classify(filt: FilterFunction, record) -> tuple:
    """(assigned parity, raw integrated signal) for one record."""
    s = integrated_signal(filt, record)
    return assign_parity(s * filt.orientation), s


def state_fidelity(rho, psi):
    """sqrt(<psi| rho |psi>), broadcast over leading axes of rho."""
    psi = np.asarray(psi, dtype=complex)
    val = np.einsum("i,...ij,j->...", psi.conj(), np.asarray(rho), psi).real
    return np.sqrt(np.clip(val, 0.0, None))


def _merge_worst(acc: dict, new: dict) -> dict:
    if acc is None:
        return dict(new)
    out = dict(acc)
    for key, value in new.items():
        if key == "min_eig":
            out[key] = min(out[key], value)
        else:
            out[key] = max(out[key], value)
    return out


@dataclass
class EnsembleSummary:
    """Aggregated trajectories: signals, assignments, final fidelities.

    signals and assignments are keyed by filter kind; every filter is
    applied to the same records, so kinds are directly comparable.
    """

    n_traj: int
    n_steps: int
    base_seed: int
    filters: dict
    signals: dict
    assignments: dict
    fidelity_even: np.ndarray
    fidelity_odd: np.ndarray
    diagnostics_worst: dict

    def odd_fraction(self, kind: str = "matched") -> float:
        return float((self.assignments[kind] == "odd").mean())

    def assigned_fidelity(self, kind: str = "matched") -> np.ndarray:
        """Fidelity of each final state against its assigned class state."""
        return np.where(self.assignments[kind] == "even",
                        self.fidelity_even, self.fidelity_odd)

    def rms_fidelity(self, kind: str = "matched",
                     parity: str = None) -> float:
        """Root-mean-square assigned fidelity, optionally within a class."""
        fid = self.assigned_fidelity(kind)
        if parity is not None:
            mask = self.assignments[kind] == parity
            if not mask.any():
                return float("nan")
            fid = fid[mask]
        return float(np.sqrt(np.mean(fid ** 2)))

    def class_means(self, kind: str = "matched") -> tuple:
        s = self.signals[kind]
        mask = self.assignments[kind] == "even"
        return float(s[mask].mean()), float(s[~mask].mean())

    def separation(self, kind: str = "matched") -> float:
        """Distance of class means in units of the pooled deviation."""
        s = self.signals[kind]
        mask = self.assignments[kind] == "even"
        se, so = s[mask], s[~mask]
        if len(se) < 2 or len(so) < 2:
            raise ConfigError("separation needs two trajectories per class")
        pooled = ((len(se) - 1) * se.var(ddof=1)
                  + (len(so) - 1) * so.var(ddof=1)) / (len(se) + len(so) - 2)
        return abs(se.mean() - so.mean()) / math.sqrt(pooled)

    def histogram(self, kind: str = "matched", bins="fd") -> tuple:
        """(counts, bin_edges) of the signal distribution."""
        return np.histogram(self.signals[kind], bins=bins)


def ensemble_run(config: model.ReadoutConfig, pulse: PulseSpec = None,
                 n_traj: int = 500, n_steps: int = 10_000,
                 base_seed: int = 0, filter_kinds=("matched",),
                 rho0: np.ndarray = None, table: AmplitudeTable = None,
                 chunk_size: int = 100,
                 checkpoint_every: int = 0) -> EnsembleSummary:
    """Run a trajectory ensemble and classify every record.

    Trajectories are integrated in vectorized chunks; each one draws its
    noise from a stream keyed by (base_seed, index), so results are
    independent of chunk_size. All requested filters are evaluated on the
    same records.
    """
    if n_traj < 1:
        raise ConfigError("n_traj must be at least 1")
    if pulse is None:
        pulse = default_pulse()
    if table is None:
        table = build_table(config, pulse, n_steps)
    elif len(table.times) != n_steps + 1:
        raise ConfigError("table grid does not match n_steps")
    if rho0 is None:
        rho0 = model.plus_density(config.n_qubits)
    filters = {kind: build_filter(config, table, kind)
               for kind in filter_kinds}
    psi_even = model.psi_plus(config.n_qubits)
    psi_odd = model.psi_minus(config.n_qubits)

    signals = {kind: np.empty(n_traj) for kind in filter_kinds}
    fidelity_even = np.empty(n_traj)
    fidelity_odd = np.empty(n_traj)
    worst = None

    for start in range(0, n_traj, chunk_size):
        stop = min(start + chunk_size, n_traj)
        batch = stop - start
        dws = np.empty((batch, n_steps))
        dzs = np.empty((batch, n_steps))
        for row in range(batch):
            rng = trajectory_rng(base_seed, start + row)
            dws[row], dzs[row] = wiener_increments(rng, n_steps, table.dt)
        rho0_batch = np.broadcast_to(rho0, (batch,) + rho0.shape)
        rho_final, records, diags = simulate_batch(
            config, table, rho0_batch, dws, dzs,
            checkpoint_every=checkpoint_every)
        for kind, filt in filters.items():
            signals[kind][start:stop] = filt.integrate(records)
        fidelity_even[start:stop] = state_fidelity(rho_final, psi_even)
        fidelity_odd[start:stop] = state_fidelity(rho_final, psi_odd)
        worst = _merge_worst(worst, diags.worst())

    assignments = {}
    for kind, filt in filters.items():
        oriented = signals[kind] * filt.orientation
        if np.any(oriented == 0.0):
            warnings.warn("integrated signal exactly zero; assigning even")
        assignments[kind] = np.where(oriented > 0.0, "even", "odd")
    return EnsembleSummary(n_traj=n_traj, n_steps=n_steps,
                           base_seed=base_seed, filters=filters,
                           signals=signals, assignments=assignments,
                           fidelity_even=fidelity_even,
                           fidelity_odd=fidelity_odd,
                           diagnostics_worst=worst)


# Exact expansion of the squared output fidelity of the circuit-based
# ZZZ measurement with per-operation failure probability p.
_GATE_COEFFS = (
    Fraction(1),
    Fraction(-128, 15),
    Fraction(8834, 225),
    Fraction(-74884, 675),
    Fraction(2130272, 10125),
    Fraction(-8409088, 30375),
    Fraction(23153152, 91125),
    Fraction(-43695104, 273375),
    Fraction(53886976, 820125),
    Fraction(-39059456, 2460375),
    Fraction(4194304, 2460375),
)
_GATE_POLY = tuple(float(c) for c in _GATE_COEFFS)
GATE_P_MAX = 0.1


def gate_fidelity(p):
    """Output fidelity of the circuit-based parity measurement model.

    Valid for per-operation error rates p in [0, GATE_P_MAX]. Accepts
    scalars or arrays. The small-p series is 1 - (64/15) p + O(p^2).
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > GATE_P_MAX):
        raise ValueError(f"p must lie in [0, {GATE_P_MAX}]")
    acc = np.zeros_like(arr)
    for coeff in reversed(_GATE_POLY):
        acc = acc * arr + coeff
    out = np.sqrt(acc)
    if arr.ndim == 0:
        return float(out)
    return out


def solve_error_rate(fidelity: float, xtol: float = 1e-12) -> float:
    """Per-operation error rate p with gate_fidelity(p) = fidelity."""
    lo = gate_fidelity(GATE_P_MAX)
    if not lo <= fidelity <= 1.0:
        raise ValueError(
            f"target fidelity must lie in [{lo:.6f}, 1]")
    if fidelity == 1.0:
        return 0.0
    return float(brentq(lambda q: gate_fidelity(q) - fidelity,
                        0.0, GATE_P_MAX, xtol=xtol))
