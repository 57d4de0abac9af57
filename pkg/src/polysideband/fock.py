"""Truncated qubit ⊗ harmonic-oscillator space and its elementary operators.

Basis ordering is electronic-fastest::

    |g,0>, |e,0>, |g,1>, |e,1>, ..., |g,d-1>, |e,d-1>

so the flat index of ``|s,k>`` is ``2*k + s`` with ``s = 0`` for ``g`` and
``s = 1`` for ``e``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class ConfigurationError(ValueError):
    """Raised for an invalid truncation setup."""


class Electronic(IntEnum):
    g = 0
    e = 1

    @classmethod
    def parse(cls, value) -> "Electronic":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().lower()]
            except KeyError:
                raise ValueError(f"electronic state must be 'g' or 'e', got {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class SpaceConfig:
    """Number of retained oscillator levels ``d`` and guard levels ``buffer``."""

    d: int
    buffer: int = 0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ConfigurationError(f"d must be an integer >= 2, got {self.d!r}")
        if self.buffer < 0 or self.buffer > self.d - 1:
            raise ConfigurationError(
                f"buffer must lie in [0, d-1] = [0, {self.d - 1}], got {self.buffer!r}"
            )

    @property
    def dim(self) -> int:
        return 2 * self.d

    @classmethod
    def for_level(cls, k: int, buffer: int = 8) -> "SpaceConfig":
        """Space large enough to start in motional level ``k`` with ``buffer`` guard levels."""
        return cls(d=k + 1 + buffer, buffer=buffer)


@dataclass(frozen=True)
class BasisIndex:
    electronic: Electronic
    k: int

    def __post_init__(self):
        object.__setattr__(self, "electronic", Electronic.parse(self.electronic))
        if self.k < 0:
            raise IndexError(f"motional level must be non-negative, got {self.k}")

    @classmethod
    def parse(cls, label: str) -> "BasisIndex":
        """Parse labels such as ``"g1"``, ``"e,0"`` or ``"|g,1>"``."""
        text = label.strip().strip("|>").replace(",", "").replace(" ", "")
        if len(text) < 2 or not text[1:].isdigit():
            raise ValueError(f"basis label must look like 'g1' or '|e,0>', got {label!r}")
        return cls(Electronic.parse(text[0]), int(text[1:]))

    def __str__(self) -> str:
        return f"{self.electronic.name}{self.k}"


def flat_index(electronic, k: int, cfg: SpaceConfig) -> int:
    if not 0 <= k < cfg.d:
        raise IndexError(f"motional level {k} outside [0, {cfg.d})")
    return 2 * k + int(Electronic.parse(electronic))


def basis_index(flat: int, cfg: SpaceConfig) -> BasisIndex:
    """Inverse of :func:`flat_index`."""
    if not 0 <= flat < cfg.dim:
        raise IndexError(f"flat index {flat} outside [0, {cfg.dim})")
    k, s = divmod(flat, 2)
    return BasisIndex(Electronic(s), k)


def basis_state(electronic, k: int, cfg: SpaceConfig) -> np.ndarray:
    psi = np.zeros(cfg.dim, dtype=complex)
    psi[flat_index(electronic, k, cfg)] = 1.0
    return psi


def basis_labels(cfg: SpaceConfig) -> list[str]:
    return [str(basis_index(i, cfg)) for i in range(cfg.dim)]


@dataclass(frozen=True)
class Operators:
    """Elementary operators on the truncated space (dense, ``2d x 2d``)."""

    cfg: SpaceConfig
    a: np.ndarray
    a_dag: np.ndarray
    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    sigma_z: np.ndarray
    identity: np.ndarray

    @property
    def dim(self) -> int:
        return self.cfg.dim


def build_operators(cfg: SpaceConfig) -> Operators:
    if not isinstance(cfg, SpaceConfig):
        raise ConfigurationError("build_operators expects a SpaceConfig")
    d = cfg.d
    a_osc = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)
    spin_plus = np.array([[0.0, 0.0], [1.0, 0.0]])  # |e><g| with g=0, e=1
    spin_z = np.diag([-1.0, 1.0])
    eye_osc, eye_spin = np.eye(d), np.eye(2)

    a = np.kron(a_osc, eye_spin).astype(complex)
    sp = np.kron(eye_osc, spin_plus).astype(complex)
    ops = Operators(
        cfg=cfg,
        a=a,
        a_dag=a.conj().T.copy(),
        sigma_plus=sp,
        sigma_minus=sp.conj().T.copy(),
        sigma_z=np.kron(eye_osc, spin_z).astype(complex),
        identity=np.eye(cfg.dim, dtype=complex),
    )
    for arr in (ops.a, ops.a_dag, ops.sigma_plus, ops.sigma_minus, ops.sigma_z, ops.identity):
        arr.flags.writeable = False
    return ops
