"""Piecewise-quadratic drive envelope.

The drive amplitude rises from 0 to its plateau value eps_ss through a C^1
smoothstep of width sigma centred on t_on, holds the plateau, and falls
back to 0 through the mirrored smoothstep centred on t_off. The envelope
passes through exactly eps_ss/2 at t_on and t_off.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PulseSpec:
    """Envelope parameters.

    The rise window is [t_on - sigma/2, t_on + sigma/2], the fall window
    [t_off - sigma/2, t_off + sigma/2]; both must fit inside [0, tau]
    without overlapping.
    """

    t_on: float
    t_off: float
    sigma: float
    eps_ss: float
    tau: float

    def __post_init__(self):
        for name in ("t_on", "t_off", "sigma", "eps_ss", "tau"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ConfigError(f"pulse parameter {name} must be finite")
            object.__setattr__(self, name, value)
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.t_on - self.sigma / 2 < 0:
            raise ConfigError("rise window starts before t = 0")
        if self.t_on + self.sigma / 2 > self.t_off - self.sigma / 2:
            raise ConfigError("rise and fall windows overlap")
        if self.t_off + self.sigma / 2 > self.tau:
            raise ConfigError("fall window ends after tau")

    def replace(self, **changes) -> "PulseSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"t_on": self.t_on, "t_off": self.t_off, "sigma": self.sigma,
                "eps_ss": self.eps_ss, "tau": self.tau}

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSpec":
        unknown = set(data) - {"t_on", "t_off", "sigma", "eps_ss", "tau"}
        if unknown:
            raise ConfigError(f"unknown pulse keys: {sorted(unknown)}")
        try:
            return cls(**{k: float(data[k])
                          for k in ("t_on", "t_off", "sigma", "eps_ss", "tau")})
        except KeyError as exc:
            raise ConfigError(f"missing pulse key {exc.args[0]!r}") from None

    def evaluate(self, t):
        """Drive amplitude at time(s) t (scalar in, scalar out)."""
        t_arr = np.asarray(t, dtype=float)
        u_rise = (t_arr - (self.t_on - self.sigma / 2)) / self.sigma
        u_fall = (t_arr - (self.t_off - self.sigma / 2)) / self.sigma
        value = _smoothstep(u_rise) - _smoothstep(u_fall)
        value = self.eps_ss * value
        if np.ndim(t) == 0:
            return float(value)
        return value


def _smoothstep(u):
    """C^1 ramp: 0 for u<=0, 2u^2 then 1-2(1-u)^2 on [0,1], 1 for u>=1."""
    u = np.clip(u, 0.0, 1.0)
    return np.where(u <= 0.5, 2.0 * u * u, 1.0 - 2.0 * (1.0 - u) ** 2)


def default_pulse() -> PulseSpec:
    """Plateau 0.4811 between smoothsteps at t_on=1.5, t_off=8.5, sigma=3."""
    return PulseSpec(t_on=1.5, t_off=8.5, sigma=3.0, eps_ss=0.4811, tau=13.5)
