"""Experiment parameters and the excitation-profile container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

TWO_PI = 2.0 * np.pi
AMPLITUDE_BOUND = 1.5


class ConfigurationError(ValueError):
    """Raised for parameter combinations that cannot be evaluated."""


def quad_frequency(cq_hz: float, spin: float = 1.5) -> float:
    """Quadrupolar frequency omega_Q in rad/s from the coupling constant C_Q in Hz.

    omega_Q = 3 * 2*pi*C_Q / (2I(2I - 1)), which is pi*C_Q for I = 3/2.
    """
    if spin <= 0.5:
        raise ConfigurationError("quadrupolar splitting needs spin > 1/2")
    return 3.0 * TWO_PI * cq_hz / (2.0 * spin * (2.0 * spin - 1.0))


@dataclass(frozen=True)
class ExperimentParams:
    """Single-crystal excitation conditions.

    Frequencies are angular (rad/s), the phase is in radians. ``omega_q_eff`` is
    the orientation-dependent splitting Omega_Q and ``delta`` the offset
    omega_Q - Omega_Q that remains when the frame rotates at omega_Q.
    """

    cq_hz: float
    omega1: float
    phase: float = 0.0
    eta: float = 0.0
    omega_q_eff: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.cq_hz) or self.cq_hz < 0:
            raise ConfigurationError(f"C_Q must be a finite non-negative value, got {self.cq_hz}")
        if not np.isfinite(self.omega1) or self.omega1 < 0:
            raise ConfigurationError(f"omega1 must be a finite non-negative value, got {self.omega1}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError(f"eta must lie in [0, 1], got {self.eta}")
        if self.omega_q_eff is None:
            object.__setattr__(self, "omega_q_eff", self.omega_q)
        if self.delta is None:
            object.__setattr__(self, "delta", self.omega_q - self.omega_q_eff)

    @classmethod
    def from_hz(cls, cq_hz: float, rf_hz: float, phase_deg: float = 0.0, eta: float = 0.0) -> ExperimentParams:
        return cls(cq_hz=cq_hz, omega1=TWO_PI * rf_hz, phase=np.deg2rad(phase_deg), eta=eta)

    @property
    def omega_q(self) -> float:
        return quad_frequency(self.cq_hz)

    @property
    def rf_hz(self) -> float:
        return self.omega1 / TWO_PI

    def oriented(self, omega_q_eff: float) -> ExperimentParams:
        """Copy with a different orientation-dependent splitting."""
        return ExperimentParams(self.cq_hz, self.omega1, self.phase, self.eta, omega_q_eff, self.omega_q - omega_q_eff)


def time_grid(start_us: float, stop_us: float, step_us: float) -> np.ndarray:
    """Inclusive, uniformly spaced time axis in seconds."""
    if step_us <= 0:
        raise ConfigurationError("time step must be positive")
    if stop_us < start_us:
        raise ConfigurationError("time grid stop precedes start")
    n = int(round((stop_us - start_us) / step_us)) + 1
    return (start_us + step_us * np.arange(n)) * 1e-6


@dataclass
class ExcitationProfile:
    """Triple-quantum signal sampled on a time grid.

    ``values`` holds the complex detected amplitude; ``amplitudes`` is its real
    part, which is the reported profile.
    """

    times: np.ndarray
    values: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.ndim != 1 or self.values.shape != self.times.shape:
            raise ValueError("times and values must be matching 1-D arrays")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def amplitudes(self) -> np.ndarray:
        return self.values.real

    def within_bound(self, bound: float = AMPLITUDE_BOUND, atol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.amplitudes) <= bound + atol))

    def first_extremum(self) -> tuple[float, float]:
        """Time and value of the first local extremum of the real amplitude.

        Falls back to the global extremum when the profile is monotonic.
        """
        a = self.amplitudes
        for i in range(1, a.size - 1):
            if (a[i] - a[i - 1]) * (a[i + 1] - a[i]) < 0 or (a[i] != a[i - 1] and a[i + 1] == a[i]):
                return float(self.times[i]), float(a[i])
        i = int(np.argmax(np.abs(a)))
        return float(self.times[i]), float(a[i])


def rms_deviation(a, b) -> float:
    a = np.asarray(getattr(a, "amplitudes", a), dtype=float)
    b = np.asarray(getattr(b, "amplitudes", b), dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))
