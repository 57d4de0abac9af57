"""Time evolution: exact driven dynamics, the ideal sideband target, effective models.

The driven Hamiltonian is ``T``-periodic, so the exact propagator is only
integrated over a single period and extended with

    U(q T + s) = U(s) U(T)^q ,

which is exact and keeps long traces (tens of periods) cheap.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .drive import PERIOD, PulseSpec, drive_terms, fourier_modes
from .fock import BasisIndex, SpaceConfig, basis_labels, build_operators, flat_index

__all__ = [
    "IntegrationError",
    "PropagatorSample",
    "SimulationTrace",
    "ValidationError",
    "expm_propagator",
    "floquet_propagators",
    "propagate_effective",
    "propagate_exact",
    "simulate",
    "target_propagator",
    "trace_from_propagators",
]

RTOL = 1e-10
ATOL = 1e-12
DEFECT_TOL = 1e-8
LEAKAGE_TOL = 1e-6
# carrier followed by a resonant sideband step physically populates the first
# two levels above the initial one; leakage is counted above them
GUARD_REACH = 2


class IntegrationError(RuntimeError):
    """The integrator failed or lost unitarity; ``t`` is the offending time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t:.6g})")
        self.t = float(t)


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PropagatorSample:
    t: float
    U: np.ndarray


def _defect(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def max_step(spec: PulseSpec) -> float:
    """Hard step cap ``T / (40 (2m + n))`` against aliasing of the fastest tone."""
    return PERIOD / (40 * (2 * spec.m + spec.n))


class _Generator:
    """``-i H(t)`` assembled from Fourier modes; vectorized over the drive terms."""

    def __init__(self, spec: PulseSpec, cfg: SpaceConfig):
        ops = build_operators(cfg)
        self.static = -0.5 * spec.delta * np.asarray(ops.sigma_z)
        self.terms = [np.asarray(A) for A in drive_terms(ops)]
        self.modes = fourier_modes(spec)

    def H(self, t: float) -> np.ndarray:
        H = self.static.astype(complex)
        for (freqs, amps), A in zip(self.modes, self.terms):
            h = np.exp(1j * freqs * t) @ amps
            H = H + h * A + np.conj(h) * A.T
        return H


def floquet_propagators(spec: PulseSpec, cfg: SpaceConfig, s_points, rtol: float = RTOL, method: str = "RK45"):
    """Propagators at times ``s_points`` within ``[0, T]`` plus ``U(T)``.

    Returns ``(U_s, U_T)`` with ``U_s`` of shape ``(len(s_points), dim, dim)``.
    """
    s_points = np.asarray(s_points, dtype=float)
    if s_points.size and (s_points.min() < 0 or s_points.max() > PERIOD * (1 + 1e-12)):
        raise ValueError("in-period sample times must lie in [0, T]")
    gen = _Generator(spec, cfg)
    dim = cfg.dim

    def rhs(t, y):
        U = y.reshape(dim, dim)
        return (-1j * gen.H(t) @ U).ravel()

    t_eval = np.unique(np.concatenate([s_points, [0.0, PERIOD]]))
    t_eval = np.clip(t_eval, 0.0, PERIOD)
    sol = solve_ivp(
        rhs,
        (0.0, PERIOD),
        np.eye(dim, dtype=complex).ravel(),
        method=method,
        t_eval=t_eval,
        rtol=rtol,
        atol=ATOL,
        max_step=max_step(spec),
    )
    if sol.status != 0:
        t_fail = sol.t[-1] if sol.t.size else 0.0
        raise IntegrationError(f"integration failed: {sol.message}", t_fail)
    Us = sol.y.T.reshape(-1, dim, dim)
    for t, U in zip(sol.t, Us):
        if _defect(U) > DEFECT_TOL:
            raise IntegrationError("unitarity defect exceeded", t)
    idx = np.searchsorted(t_eval, np.clip(s_points, 0.0, PERIOD))
    return Us[idx], Us[-1]


def _split_times(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if t[0] != 0 or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must start at 0 and be ascending")
    q = np.floor(t / PERIOD + 1e-12).astype(int)
    s = np.clip(t - q * PERIOD, 0.0, PERIOD)
    return q, s


def _period_powers(U_T: np.ndarray, qmax: int) -> list[np.ndarray]:
    powers = [np.eye(U_T.shape[0], dtype=complex)]
    for _ in range(qmax):
        powers.append(U_T @ powers[-1])
    return powers


def propagate_exact(spec: PulseSpec, cfg: SpaceConfig, t_grid, rtol: float = RTOL, method: str = "RK45"):
    """Exact propagators ``U(t)`` on ``t_grid`` for the driven Hamiltonian.

    Raises :class:`IntegrationError` if the integrator fails or any sample
    loses unitarity by more than ``1e-8``.
    """
    q, s = _split_times(t_grid)
    U_s, U_T = floquet_propagators(spec, cfg, s, rtol=rtol, method=method)
    powers = _period_powers(U_T, int(q.max()))
    samples = []
    for t, qi, Ui in zip(np.asarray(t_grid, dtype=float), q, U_s):
        U = Ui @ powers[qi]
        if _defect(U) > DEFECT_TOL:
            raise IntegrationError("unitarity defect exceeded", t)
        samples.append(PropagatorSample(float(t), U))
    return samples


def target_propagator(f_tg: float, cfg: SpaceConfig, t: float) -> np.ndarray:
    """Ideal red-sideband evolution ``exp(-i H_tg t)``, built block by block.

    Each pair ``{|g,k>, |e,k-1>}`` rotates by ``theta_k = f_tg sqrt(k) t / 2``
    with ``|g,k> -> cos|g,k> + sin|e,k-1>``.  ``|g,0>`` and the unpaired top
    state ``|e,d-1>`` are left invariant.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    U = np.eye(cfg.dim, dtype=complex)
    for k in range(1, cfg.d):
        theta = f_tg * np.sqrt(k) * t / 2
        g, e = flat_index("g", k, cfg), flat_index("e", k - 1, cfg)
        c, s = np.cos(theta), np.sin(theta)
        U[g, g] = c
        U[e, e] = c
        U[e, g] = s
        U[g, e] = -s
    return U


def target_hamiltonian(f_tg: float, cfg: SpaceConfig) -> np.ndarray:
    """``(i f_tg / 2) s+ a + h.c.``"""
    ops = build_operators(cfg)
    half = 0.5j * f_tg * (ops.sigma_plus @ ops.a)
    return half + half.conj().T


def _check_hermitian(H: np.ndarray):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError("H_eff must be a square matrix")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-10:
        raise ValidationError("H_eff is not Hermitian")


def propagate_effective(H_eff: np.ndarray, t_grid) -> list[PropagatorSample]:
    """``exp(-i H_eff t)`` through the Hermitian eigendecomposition."""
    _check_hermitian(H_eff)
    w, V = np.linalg.eigh(0.5 * (H_eff + H_eff.conj().T))
    return [PropagatorSample(float(t), (V * np.exp(-1j * w * t)) @ V.conj().T) for t in np.asarray(t_grid, dtype=float)]


def expm_propagator(H_eff: np.ndarray, t: float) -> np.ndarray:
    """Scaling-and-squaring counterpart of :func:`propagate_effective`."""
    _check_hermitian(H_eff)
    return expm(-1j * t * np.asarray(H_eff))


@dataclass(frozen=True)
class SimulationTrace:
    times: np.ndarray
    populations: np.ndarray
    unitarity_defect: float
    leakage: float
    labels: list[str] = field(default_factory=list)
    buffer: int = 0

    @property
    def flagged(self) -> bool:
        return self.leakage >= LEAKAGE_TOL or self.unitarity_defect >= DEFECT_TOL

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, self.labels.index(str(BasisIndex.parse(label)))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"p_{x}" for x in self.labels] + ["defect", "leakage"])
        for t, row in zip(self.times, self.populations):
            writer.writerow([repr(float(t))] + [repr(float(p)) for p in row]
                            + [repr(self.unitarity_defect), repr(self.leakage)])
        return buf.getvalue()


def trace_from_propagators(samples, psi0: np.ndarray, cfg: SpaceConfig) -> SimulationTrace:
    times = np.array([s.t for s in samples])
    states = np.array([s.U @ psi0 for s in samples])
    pops = np.abs(states) ** 2
    defect = max((_defect(s.U) for s in samples), default=0.0)
    guard = cfg.buffer - GUARD_REACH
    top = slice(2 * (cfg.d - guard), cfg.dim)
    leakage = float(pops[:, top].sum(axis=1).max()) if guard > 0 else 0.0
    return SimulationTrace(times, pops, defect, leakage, basis_labels(cfg), cfg.buffer)


def simulate(spec: PulseSpec, initial: str = "g1", t_grid=None, cfg: SpaceConfig | None = None,
             buffer: int = 8, rtol: float = RTOL) -> SimulationTrace:
    """Exact populations from a basis state such as ``"g1"``."""
    init = BasisIndex.parse(initial)
    if cfg is None:
        cfg = SpaceConfig.for_level(init.k, buffer)
    if t_grid is None:
        t_grid = np.linspace(0, 4 * np.pi / spec.f_tg, 2001)
    psi0 = np.zeros(cfg.dim, dtype=complex)
    psi0[flat_index(init.electronic, init.k, cfg)] = 1.0
    return trace_from_propagators(propagate_exact(spec, cfg, t_grid, rtol=rtol), psi0, cfg)
