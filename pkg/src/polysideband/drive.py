"""Polychromatic drive description and the frame Hamiltonian.

Units are fixed by the fundamental drive frequency, ``omega = 1``, so one
drive period is ``T = 2*pi``.  Tones are labelled ``j = -n..n`` and arrays
``f`` and ``eta`` are stored in that order.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .fock import Operators

PERIOD = 2 * np.pi


class UnsupportedRegimeError(ValueError):
    """Raised when ``m <= n``; only the ``m > n`` regime is implemented."""


@dataclass(frozen=True)
class PulseSpec:
    """Polychromatic drive: trap ratio ``m``, tone count ``n``, detuning, amplitudes.

    ``eta`` may be given as a scalar, in which case every tone uses it.
    """

    m: int
    n: int
    delta: float
    f: np.ndarray
    eta: np.ndarray = field(default=0.05)
    f_tg: float = 0.1

    def __post_init__(self):
        m, n = int(self.m), int(self.n)
        if m != self.m or n != self.n or m < 1 or n < 0:
            raise ValueError(f"m must be a positive and n a non-negative integer (m={self.m}, n={self.n})")
        if not m > n:
            raise UnsupportedRegimeError(f"only m > n is supported (m={m}, n={n})")
        size = 2 * n + 1
        f = np.array(self.f, dtype=float).reshape(-1)
        if f.size != size:
            raise ValueError(f"f must have 2n+1 = {size} entries, got {f.size}")
        eta = np.array(self.eta, dtype=float).reshape(-1)
        if eta.size == 1:
            eta = np.full(size, eta[0])
        if eta.size != size:
            raise ValueError(f"eta must be scalar or have {size} entries, got {eta.size}")
        if np.any(eta <= 0) or np.any(eta >= 1):
            raise ValueError("Lamb-Dicke parameters must lie in (0, 1)")
        if self.f_tg < 0:
            raise ValueError("f_tg must be non-negative")
        if not np.isfinite(self.delta) or not np.all(np.isfinite(f)):
            raise ValueError("delta and f must be finite")
        f.flags.writeable = False
        eta.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "f_tg", float(self.f_tg))
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "eta", eta)

    @property
    def j(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    @property
    def f0(self) -> float:
        return float(self.f[self.n])

    @property
    def eta0(self) -> float:
        return float(self.eta[self.n])

    def replace(self, **changes) -> "PulseSpec":
        data = dict(m=self.m, n=self.n, delta=self.delta, f=self.f, eta=self.eta, f_tg=self.f_tg)
        data.update(changes)
        return PulseSpec(**data)

    def scaled(self, s: float) -> "PulseSpec":
        """Copy with every amplitude multiplied by ``s``."""
        return self.replace(f=self.f * s)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "delta": self.delta,
            "f": [float(x) for x in self.f],
            "eta": [float(x) for x in self.eta],
            "f_tg": self.f_tg,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSpec":
        unknown = set(data) - {"m", "n", "delta", "f", "eta", "f_tg", "schema"}
        if unknown:
            raise KeyError(f"unknown pulse keys: {sorted(unknown)}")
        return cls(
            m=data["m"],
            n=data["n"],
            delta=data["delta"],
            f=data["f"],
            eta=data.get("eta", 0.05),
            f_tg=data.get("f_tg", 0.1),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PulseSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "PulseSpec":
        return cls.from_json(Path(path).read_text())


class DriveCoefficients(NamedTuple):
    h1: complex
    h2: complex
    h3: complex


def fourier_modes(spec: PulseSpec):
    """Frequencies and complex amplitudes of ``h1``, ``h2``, ``h3``.

    Returns three ``(freqs, amps)`` pairs with integer frequencies such that
    ``h(t) = sum(amps * exp(1j * freqs * t))``.
    """
    j = spec.j
    half_f = spec.f / 2
    side = 1j * spec.eta * half_f
    return (
        (spec.m - j, half_f.astype(complex)),
        (-j, side),
        (2 * spec.m - j, side.copy()),
    )


def _series(freqs, amps, t):
    t = np.asarray(t, dtype=float)
    return np.exp(1j * np.multiply.outer(t, freqs)) @ amps


def h_funcs(spec: PulseSpec, t) -> DriveCoefficients:
    """Values of the three drive sums at time(s) ``t`` (scalar or array)."""
    return DriveCoefficients(*(_series(fr, am, t) for fr, am in fourier_modes(spec)))


def drive_terms(ops: Operators):
    """Constant operators multiplying ``h1``, ``h2``, ``h3`` (the h.c. parts are their adjoints)."""
    sp = ops.sigma_plus
    return sp, sp @ ops.a, sp @ ops.a_dag


def hamiltonian(spec: PulseSpec, t: float, ops: Operators) -> np.ndarray:
    """``-(delta/2) sz + h1 s+ + h2 s+ a + h3 s+ a^dag + h.c.`` at time ``t``."""
    if ops.sigma_z.shape != (ops.dim, ops.dim):
        raise ValueError("operator set has inconsistent shapes")
    h = h_funcs(spec, float(t))
    coupling = sum(c * A for c, A in zip(h, drive_terms(ops)))
    return -0.5 * spec.delta * ops.sigma_z + coupling + coupling.conj().T


def monochromatic_reference(f_tg: float, eta: float, m: int) -> PulseSpec:
    """Single resonant tone with the first-order Lamb shift compensated.

    ``f0 = f_tg / eta`` matches the sideband amplitude to the target and
    ``delta = f_tg**2 / (2 eta**2 m)`` cancels the light shift.
    """
    if f_tg <= 0 or eta <= 0 or m <= 0:
        raise ValueError("f_tg, eta and m must be positive")
    f0 = f_tg / eta
    if f0 / m > 0.5:
        warnings.warn(f"carrier amplitude f0/m = {f0 / m:.2f} is not small; weak-driving picture is doubtful")
    return PulseSpec(m=m, n=0, delta=f_tg**2 / (2 * eta**2 * m), f=[f0], eta=eta, f_tg=f_tg)
