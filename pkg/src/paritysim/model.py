"""Register/resonator model for multi-mode dispersive parity readout.

Conventions used throughout the package:

* Computational basis states of an ``n``-qubit register are indexed by the
  integer whose binary expansion (MSB = qubit 0) is the ket label, so
  ``|011>`` of a 3-qubit register is index 3.
* Bit value 0 corresponds to the sigma_z eigenvalue +1.
* The dispersive shift chi of the first mode on the first qubit sets the
  unit system (chi = 1, time in units of 1/chi).
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import ConfigError

_EVEN = "even"
_ODD = "odd"


@dataclass(frozen=True)
class ReadoutConfig:
    """Static parameters of a register measured through internal modes.

    Attributes
    ----------
    n_qubits : int
        Register size.
    n_modes : int
        Number of internal resonator modes sharing the output line.
    chi : ndarray, shape (n_modes, n_qubits)
        Dispersive shift of mode k due to qubit l.
    kappa : ndarray, shape (n_modes,)
        Decay rate of each mode into the common output line.
    delta : ndarray, shape (n_modes,)
        Drive-frame detuning of each mode.
    gamma_z : ndarray, shape (n_qubits,)
        Intrinsic dephasing rate of each qubit.
    eta : float
        Homodyne detection efficiency, in [0, 1].
    phi : float
        Homodyne phase (radians). phi = 0 measures the Re quadrature of
        the output field.
    """

    n_qubits: int
    n_modes: int
    chi: np.ndarray
    kappa: np.ndarray
    delta: np.ndarray
    gamma_z: np.ndarray
    eta: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n_qubits, int) or self.n_qubits < 1:
            raise ConfigError("n_qubits must be a positive integer")
        if not isinstance(self.n_modes, int) or self.n_modes < 1:
            raise ConfigError("n_modes must be a positive integer")
        chi = _as_real_array("chi", self.chi, (self.n_modes, self.n_qubits))
        kappa = _as_real_array("kappa", self.kappa, (self.n_modes,))
        delta = _as_real_array("delta", self.delta, (self.n_modes,))
        gamma_z = _as_real_array("gamma_z", self.gamma_z, (self.n_qubits,))
        if np.any(kappa < 0):
            raise ConfigError("kappa must be non-negative")
        if np.any(gamma_z < 0):
            raise ConfigError("gamma_z must be non-negative")
        eta = float(self.eta)
        if not 0.0 <= eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        phi = float(self.phi)
        if not math.isfinite(phi):
            raise ConfigError("phi must be finite")
        for name, arr in (("chi", chi), ("kappa", kappa), ("delta", delta),
                          ("gamma_z", gamma_z)):
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma_z", gamma_z)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        """Register Hilbert-space dimension 2**n_qubits."""
        return 1 << self.n_qubits

    def replace(self, **changes) -> "ReadoutConfig":
        """Return a copy with the given fields replaced (re-validated)."""
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_modes": self.n_modes,
            "chi": self.chi.tolist(),
            "kappa": self.kappa.tolist(),
            "delta": self.delta.tolist(),
            "gamma_z": self.gamma_z.tolist(),
            "eta": self.eta,
            "phi": self.phi,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReadoutConfig":
        """Build a config from plain JSON-style data.

        Scalars are broadcast: a scalar ``chi`` fills the whole coupling
        matrix, scalar ``kappa``/``delta``/``gamma_z`` fill their vectors.
        ``phi`` defaults to 0 and ``eta`` to 1 when absent.
        """
        try:
            n_qubits = int(data["n_qubits"])
            n_modes = int(data["n_modes"])
        except KeyError as exc:
            raise ConfigError(f"missing required key {exc.args[0]!r}") from None
        chi = _broadcast("chi", data.get("chi"), (n_modes, n_qubits))
        kappa = _broadcast("kappa", data.get("kappa"), (n_modes,))
        delta = _broadcast("delta", data.get("delta"), (n_modes,))
        gamma_z = _broadcast("gamma_z", data.get("gamma_z", 0.0), (n_qubits,))
        unknown = set(data) - {"n_qubits", "n_modes", "chi", "kappa", "delta",
                               "gamma_z", "eta", "phi", "pulse"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(n_qubits=n_qubits, n_modes=n_modes, chi=chi, kappa=kappa,
                   delta=delta, gamma_z=gamma_z,
                   eta=float(data.get("eta", 1.0)),
                   phi=float(data.get("phi", 0.0)))


def _as_real_array(name, value, shape):
    arr = np.array(value, dtype=float)
    if arr.shape != shape:
        raise ConfigError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


_CONFIG_KEYS = {"n_qubits", "n_modes", "chi", "kappa", "delta", "gamma_z",
                "eta", "phi"}


def validate(data) -> list:
    """Collect every config-invariant violation in JSON-style data.

    Each entry names the offending field; an empty list means the data
    describes a valid config. Violations are returned as data rather than
    raised, so callers can report all of them at once.
    """
    if isinstance(data, ReadoutConfig):
        data = data.to_dict()
    problems = []
    work = {k: v for k, v in dict(data).items() if k != "pulse"}
    unknown = sorted(set(work) - _CONFIG_KEYS)
    if unknown:
        problems.append(f"unknown keys: {unknown}")

    sizes = {}
    for name in ("n_qubits", "n_modes"):
        if name not in work:
            problems.append(f"{name}: missing")
            continue
        try:
            value = int(work[name])
        except (TypeError, ValueError):
            value = 0
        if value < 1:
            problems.append(f"{name}: must be a positive integer")
        else:
            sizes[name] = value

    arrays = {}
    if len(sizes) == 2:
        shapes = {
            "chi": (sizes["n_modes"], sizes["n_qubits"]),
            "kappa": (sizes["n_modes"],),
            "delta": (sizes["n_modes"],),
            "gamma_z": (sizes["n_qubits"],),
        }
        for name, shape in shapes.items():
            if name not in work:
                if name == "gamma_z":
                    arrays[name] = np.zeros(shape)
                else:
                    problems.append(f"{name}: missing")
                continue
            try:
                arr = np.asarray(work[name], dtype=float)
            except (TypeError, ValueError):
                problems.append(f"{name}: not numeric")
                continue
            if arr.ndim == 0:
                arr = np.full(shape, float(arr))
            if arr.shape != shape:
                problems.append(f"{name}: shape {arr.shape} != {shape}")
            elif not np.all(np.isfinite(arr)):
                problems.append(f"{name}: must be finite")
            else:
                arrays[name] = arr

    if "kappa" in arrays and np.any(arrays["kappa"] < 0):
        problems.append("kappa: must be non-negative")
    if "gamma_z" in arrays and np.any(arrays["gamma_z"] < 0):
        problems.append("gamma_z: must be non-negative")
    for name, default in (("eta", 1.0), ("phi", 0.0)):
        try:
            value = float(work.get(name, default))
        except (TypeError, ValueError):
            problems.append(f"{name}: not numeric")
            continue
        if not math.isfinite(value):
            problems.append(f"{name}: must be finite")
        elif name == "eta" and not 0.0 <= value <= 1.0:
            problems.append("eta: must lie in [0, 1]")
    return problems


def _broadcast(name, value, shape):
    if value is None:
        raise ConfigError(f"missing required key {name!r}")
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    return arr


# -- basis bookkeeping -------------------------------------------------------

def bit_table(n_qubits: int) -> np.ndarray:
    """(2**n, n) array of bits; row j spells the ket label of index j."""
    index = np.arange(1 << n_qubits)
    shifts = np.arange(n_qubits - 1, -1, -1)
    return (index[:, None] >> shifts[None, :]) & 1


def sigma_z_signs(n_qubits: int) -> np.ndarray:
    """(n, 2**n) array: signs[l, j] = sigma_z eigenvalue of qubit l in |j>."""
    return (1 - 2 * bit_table(n_qubits)).T


def popcounts(n_qubits: int) -> np.ndarray:
    """Number of 1-bits of every basis index."""
    return bit_table(n_qubits).sum(axis=1)


def parity_labels(n_qubits: int) -> np.ndarray:
    """Array of 'even'/'odd' labels by popcount parity of each basis index."""
    return np.where(popcounts(n_qubits) % 2 == 0, _EVEN, _ODD)


def parity_indices(n_qubits: int, parity: str) -> np.ndarray:
    """Basis indices of the requested parity class ('even' or 'odd')."""
    if parity not in (_EVEN, _ODD):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    want = 0 if parity == _EVEN else 1
    return np.nonzero(popcounts(n_qubits) % 2 == want)[0]


def bitstring(index: int, n_qubits: int) -> str:
    """Ket label of a basis index, e.g. bitstring(3, 3) == '011'."""
    return format(index, f"0{n_qubits}b")


def signed_chi_sums(config: ReadoutConfig) -> np.ndarray:
    """(n_modes, 2**n) matrix of sum_l chi[k, l] * (-1)^{bit l of j}.

    Row k gives the dispersive frequency pull of mode k for every register
    basis state.
    """
    return config.chi @ sigma_z_signs(config.n_qubits).astype(float)


# -- design relations --------------------------------------------------------

def parity_detunings(kappa0: float, kappa1: float, chi: float = 1.0):
    """Detunings that collapse the steady output to two parity points.

    For two modes with decay rates kappa0 and kappa1, uniform dispersive
    shift chi, returns (delta0, delta1) = (chi*sqrt(3*kappa0/kappa1),
    -chi*sqrt(3*kappa1/kappa0)). With these detunings every even-popcount
    basis state produces the same steady output amplitude, and likewise
    every odd one.
    """
    if kappa0 <= 0 or kappa1 <= 0:
        raise ConfigError("kappa0 and kappa1 must be positive")
    if chi <= 0:
        raise ConfigError("chi must be positive")
    return chi * math.sqrt(3.0 * kappa0 / kappa1), -chi * math.sqrt(3.0 * kappa1 / kappa0)


def kappa_star(chi: float = 1.0) -> float:
    """Decay rate maximizing the steady-state output separation: 2*chi."""
    if chi <= 0:
        raise ConfigError("chi must be positive")
    return 2.0 * chi


# -- reference states --------------------------------------------------------

def psi_parity(n_qubits: int, parity: str) -> np.ndarray:
    """Uniform superposition of all basis states of one parity class."""
    idx = parity_indices(n_qubits, parity)
    vec = np.zeros(1 << n_qubits, dtype=complex)
    vec[idx] = 1.0 / math.sqrt(len(idx))
    return vec


def psi_plus(n_qubits: int = 3) -> np.ndarray:
    """Even-parity reference state (1/2)(|000> + |011> + |101> + |110>)."""
    return psi_parity(n_qubits, _EVEN)


def psi_minus(n_qubits: int = 3) -> np.ndarray:
    """Odd-parity reference state (1/2)(|111> + |100> + |010> + |001>)."""
    return psi_parity(n_qubits, _ODD)


def plus_density(n_qubits: int = 3) -> np.ndarray:
    """Density matrix of |+>^n, every entry 1/2**n."""
    d = 1 << n_qubits
    return np.full((d, d), 1.0 / d, dtype=complex)


def default_config() -> ReadoutConfig:
    """Three qubits, two modes at the optimal working point.

    kappa = 2*chi for both modes, detunings from parity_detunings, uniform
    chi = 1, gamma_z = 1/300, perfect detection at phi = 0.
    """
    d0, d1 = parity_detunings(2.0, 2.0, 1.0)
    return ReadoutConfig(
        n_qubits=3,
        n_modes=2,
        chi=np.ones((2, 3)),
        kappa=np.array([2.0, 2.0]),
        delta=np.array([d0, d1]),
        gamma_z=np.full(3, 1.0 / 300.0),
        eta=1.0,
        phi=0.0,
    )
