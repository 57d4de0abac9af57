"""Numerical Magnus oracle.

Everything here is computed by brute-force nested quadrature of the drive
functions and exists to cross-check the closed-form coefficient sums in
:mod:`polysideband.effective`.  It is deliberately slow and never used while
optimizing.

The frame Hamiltonian is written as ``H(t) = sum_a phi_a(t) B_a`` with the
seven scalar functions ``1, h1, h1*, h2, h2*, h3, h3*``.  All Magnus terms up
to third order are then linear combinations of the ordered-simplex integrals

    I1[a]     = int_0^T phi_a
    I2[a,b]   = int_{T>=t1>=t2>=0}     phi_a(t1) phi_b(t2)
    I3[a,b,c] = int_{T>=t1>=t2>=t3>=0} phi_a(t1) phi_b(t2) phi_c(t3)

which are evaluated with composite Gauss-Legendre rules.  Because each
integrand factorizes over the time arguments, the nested integral is built
level by level as cumulative integrals, which costs ``O(P Q^3)`` function
evaluations for ``P`` panels of ``Q`` nodes instead of ``O((PQ)^3)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .drive import PERIOD, PulseSpec, fourier_modes
from .fock import SpaceConfig, build_operators

PHI_NAMES = ("1", "h1", "h1*", "h2", "h2*", "h3", "h3*")
_PHI = {name: i for i, name in enumerate(PHI_NAMES)}


class OracleError(RuntimeError):
    """Quadrature refinement did not converge within the panel cap."""


def _phi_values(spec: PulseSpec):
    modes = fourier_modes(spec)
    kmax = int(max(np.max(np.abs(fr)) for fr, _ in modes))

    def phi(t):
        # integer frequencies: build exp(ikt) as powers of exp(it)
        t = np.asarray(t, dtype=float).ravel()
        z = np.exp(1j * t)
        powers = np.empty((2 * kmax + 1, t.size), dtype=complex)
        powers[kmax] = 1.0
        for k in range(1, kmax + 1):
            powers[kmax + k] = powers[kmax + k - 1] * z
        powers[:kmax] = powers[:kmax:-1].conj()
        out = np.empty((len(PHI_NAMES), t.size), dtype=complex)
        out[0] = 1.0
        for i, (fr, am) in enumerate(modes):
            out[1 + 2 * i] = am @ powers[kmax + fr]
            out[2 + 2 * i] = out[1 + 2 * i].conj()
        return out

    return phi


class _CompositeRule:
    def __init__(self, panels: int, order: int, length: float):
        x, w = np.polynomial.legendre.leggauss(order)
        self.panels, self.order, self.length = panels, order, length
        self.h = length / panels
        self.x, self.w = x, w
        starts = np.arange(panels) * self.h
        self.nodes = (starts[:, None] + (x[None, :] + 1) * self.h / 2).ravel()
        self.weights = np.tile(w * self.h / 2, panels)

    def cumulative(self, phi, depth: int, t: np.ndarray) -> np.ndarray:
        """Nested ordered integrals from 0 to each ``t``; shape ``(7,)*depth + (t.size,)``."""
        t = np.asarray(t, dtype=float)
        if depth == 0:
            return np.ones(t.shape)
        P, Q = self.panels, self.order
        # full panels: running sums of the integrand over complete panels
        inner_full = self.cumulative(phi, depth - 1, self.nodes)
        vals = phi(self.nodes)
        integrand = vals.reshape((7,) + (1,) * (depth - 1) + (-1,)) * inner_full
        panel_sums = (integrand * self.weights).reshape(integrand.shape[:-1] + (P, Q)).sum(-1)
        prefix = np.concatenate(
            [np.zeros(panel_sums.shape[:-1] + (1,), dtype=complex), np.cumsum(panel_sums, axis=-1)],
            axis=-1,
        )
        # partial panel ending at each t
        p = np.clip(np.floor(t / self.h).astype(int), 0, P - 1)
        left = p * self.h
        half = (t - left) / 2
        s = (left[:, None] + half[:, None] * (self.x[None, :] + 1)).ravel()
        inner_part = self.cumulative(phi, depth - 1, s)
        part = phi(s).reshape((7,) + (1,) * (depth - 1) + (-1,)) * inner_part
        part = part.reshape(part.shape[:-1] + (t.size, Q))
        partial = (part * (half[:, None] * self.w[None, :])).sum(-1)
        return prefix[..., p] + partial


@dataclass(frozen=True)
class SimplexIntegrals:
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    panels: int


def _integrals_at(spec: PulseSpec, panels: int, order: int) -> SimplexIntegrals:
    rule = _CompositeRule(panels, order, PERIOD)
    phi = _phi_values(spec)
    end = np.array([PERIOD])
    return SimplexIntegrals(
        I1=rule.cumulative(phi, 1, end)[..., 0],
        I2=rule.cumulative(phi, 2, end)[..., 0],
        I3=rule.cumulative(phi, 3, end)[..., 0],
        panels=panels,
    )


def simplex_integrals(spec: PulseSpec, rtol: float = 1e-12, order: int = 16,
                      start_panels: int = 2, max_panels: int = 512) -> SimplexIntegrals:
    """Ordered-simplex integrals refined by panel doubling until stable to ``rtol``."""
    key = (spec.to_json(), rtol, order, start_panels, max_panels)
    return _cached_integrals(key)


@lru_cache(maxsize=64)
def _cached_integrals(key) -> SimplexIntegrals:
    spec_json, rtol, order, panels, max_panels = key
    spec = PulseSpec.from_json(spec_json)
    prev = _integrals_at(spec, panels, order)
    while panels < max_panels:
        panels *= 2
        cur = _integrals_at(spec, panels, order)
        ok = all(
            np.max(np.abs(c - p)) <= rtol * max(np.max(np.abs(c)), 1.0)
            for c, p in ((cur.I1, prev.I1), (cur.I2, prev.I2), (cur.I3, prev.I3))
        )
        if ok:
            return cur
        prev = cur
    raise OracleError(f"simplex quadrature not converged at {max_panels} panels")


# -- scalar coefficient integrands ------------------------------------------------
#
# Each entry is (prefactor-kind, [(weight, (phi names ordered t1, t2[, t3])), ...]).
# First order: alpha = c1 / T * sum w * I2 ; second order: alpha = -1/(6T) * sum w * I3.
# Weights may reference delta through the callable form below.

def _first_order_terms(delta):
    h1, h1c, h2, h2c, h3, h3c, one = "h1", "h1*", "h2", "h2*", "h3", "h3*", "1"
    return {
        1: (-0.5j, [(delta, (h1, one)), (-delta, (one, h1))]),
        2: (-0.5j, [(delta, (h2, one)), (-delta, (one, h2))]),
        3: (-0.5j, [(delta, (h3, one)), (-delta, (one, h3))]),
        4: (-0.25j, [(1, (h1, h1c)), (-1, (h1c, h1))]),
        5: (-0.5j, [(-1, (h1c, h2)), (1, (h1, h3c)), (1, (h2, h1c)), (-1, (h3c, h1))]),
        6: (-0.5j, [(1, (h2, h3c)), (-1, (h3c, h2))]),
        7: (-0.25j, [(1, (h2, h2c)), (-1, (h2c, h2))]),
        8: (-0.25j, [(1, (h3, h3c)), (-1, (h3c, h3))]),
    }


def _pair_terms(delta, x, y):
    """``d x*(t1)y(t3) + d y(t1)x*(t3) - d x*(t1)y(t2) - d y(t2)x*(t3)`` style block."""
    return [
        (delta, (x, "1", y)),
        (delta, (y, "1", x)),
        (-delta, (x, y, "1")),
        (-delta, ("1", y, x)),
    ]


def _second_order_terms(delta):
    one = "1"
    h1, h1c, h2, h2c, h3, h3c = "h1", "h1*", "h2", "h2*", "h3", "h3*"
    d2 = delta**2

    def drive_block(h):
        return [(d2, (one, one, h)), (d2, (h, one, one)), (-2 * d2, (one, h, one))]

    a5 = (
        _pair_terms(delta, h1c, h2)
        + [(delta, (h1, one, h3c)), (delta, (h3c, one, h1)), (-delta, (h1, h3c, one)), (-delta, (one, h3c, h1))]
        + [(delta, (h2, one, h1c)), (delta, (h1c, one, h2)), (-delta, (h2, h1c, one)), (-delta, (one, h1c, h2))]
        + [(delta, (h3c, one, h1)), (delta, (h1, one, h3c)), (-delta, (h3c, h1, one)), (-delta, (one, h1, h3c))]
    )
    a6 = (
        [(delta, (h2, one, h3c)), (delta, (h3c, one, h2)), (-delta, (h2, h3c, one)), (-delta, (one, h3c, h2))]
        + [(delta, (h3c, one, h2)), (delta, (h2, one, h3c)), (-delta, (h3c, h2, one)), (-delta, (one, h2, h3c))]
    )
    a9 = [(-2, (h1, h1, h1c)), (4, (h1, h1c, h1)), (-2, (h1c, h1, h1))]
    a10 = [
        (-2, (h1, h1, h3c)), (-2, (h1, h2, h1c)), (4, (h1, h1c, h2)),
        (4, (h1, h3c, h1)), (-2, (h2, h1, h1c)), (4, (h2, h1c, h1)),
        (-2, (h3c, h1, h1)), (-2, (h1c, h2, h1)), (-2, (h1c, h1, h2)),
    ]
    a11 = [
        (-2, (h1, h1, h2c)), (-2, (h1, h3, h1c)), (4, (h1, h1c, h3)),
        (4, (h1, h2c, h1)), (-2, (h3, h1, h1c)), (4, (h3, h1c, h1)),
        (-2, (h2c, h1, h1)), (-2, (h1c, h3, h1)), (-2, (h1c, h1, h3)),
    ]
    return {
        1: drive_block(h1),
        2: drive_block(h2),
        3: drive_block(h3),
        4: _pair_terms(delta, h1c, h1),
        5: a5,
        6: a6,
        7: _pair_terms(delta, h2c, h2),
        8: _pair_terms(delta, h3c, h3),
        9: a9,
        10: a10,
        11: a11,
    }


ALPHA_LABELS = tuple(f"alpha{i}^(1)" for i in range(1, 9)) + tuple(f"alpha{i}^(2)" for i in range(1, 12))


def parse_label(label: str) -> tuple[int, int]:
    """``"alpha5^(2)"`` -> ``(2, 5)`` (order, index)."""
    if label not in ALPHA_LABELS:
        raise KeyError(f"unknown coefficient label {label!r}; expected one of {ALPHA_LABELS}")
    idx, order = label[len("alpha"):].split("^")
    return int(order.strip("()")), int(idx)


def _evaluate_terms(ints: SimplexIntegrals, terms, depth: int) -> complex:
    table = ints.I2 if depth == 2 else ints.I3
    total = 0j
    for w, names in terms:
        total += w * table[tuple(_PHI[x] for x in names)]
    return total


def _alphas_from(ints: SimplexIntegrals, spec: PulseSpec) -> dict[str, complex]:
    out = {}
    for i, (pref, terms) in _first_order_terms(spec.delta).items():
        out[f"alpha{i}^(1)"] = pref / PERIOD * _evaluate_terms(ints, terms, 2)
    for i, terms in _second_order_terms(spec.delta).items():
        out[f"alpha{i}^(2)"] = -1 / (6 * PERIOD) * _evaluate_terms(ints, terms, 3)
    return out


def alpha_numeric_all(spec: PulseSpec, rtol: float = 1e-10, atol: float = 1e-15,
                      order: int = 16, start_panels: int = 2, max_panels: int = 512) -> dict[str, complex]:
    """All nineteen coefficient integrals, refined until each is stable.

    Convergence is declared when every coefficient changes by less than
    ``rtol * |alpha| + atol`` under panel doubling.
    """
    panels = start_panels
    prev = _alphas_from(_integrals_at(spec, panels, order), spec)
    while panels < max_panels:
        panels *= 2
        cur = _alphas_from(_integrals_at(spec, panels, order), spec)
        if all(abs(cur[k] - prev[k]) <= rtol * abs(cur[k]) + atol for k in cur):
            return cur
        prev = cur
    raise OracleError(f"coefficient quadrature not converged at {max_panels} panels")


def scalar_alpha_numeric(spec: PulseSpec, which: str) -> complex:
    parse_label(which)
    return alpha_numeric_all(spec)[which]


# -- matrix Magnus terms ------------------------------------------------------------

@dataclass(frozen=True)
class MagnusTerms:
    M0: np.ndarray
    M1: np.ndarray
    M2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.M0 + self.M1 + self.M2

    def effective(self, orders: int = 3) -> np.ndarray:
        """``(M0 + ... + M_{orders-1}) / T``."""
        return sum((self.M0, self.M1, self.M2)[:orders]) / PERIOD


def _basis_matrices(spec: PulseSpec, cfg: SpaceConfig) -> np.ndarray:
    ops = build_operators(cfg)
    sp, sm = ops.sigma_plus, ops.sigma_minus
    red = sp @ ops.a
    blue = sp @ ops.a_dag
    return np.array([
        -0.5 * spec.delta * ops.sigma_z,
        sp, sm,
        red, red.conj().T,
        blue, blue.conj().T,
    ])


def _comm(x, y):
    return x @ y - y @ x


def magnus_numeric(spec: PulseSpec, cfg: SpaceConfig, rtol: float = 1e-10) -> MagnusTerms:
    """``M0``, ``M1``, ``M2`` at ``t = T`` by nested quadrature.

    The two third-order pieces combine into
    ``-(1/6) int_{t1>=t2>=t3} ([H1,[H2,H3]] + [H3,[H2,H1]])``.
    """
    B = _basis_matrices(spec, cfg)
    ints = simplex_integrals(spec, rtol=rtol)
    M0 = np.einsum("a,aij->ij", ints.I1, B)
    C2 = np.array([[_comm(B[a], B[b]) for b in range(7)] for a in range(7)])
    M1 = -0.5j * np.einsum("ab,abij->ij", ints.I2, C2)
    M2 = np.zeros_like(M0)
    for a in range(7):
        for b in range(7):
            for c in range(7):
                w = ints.I3[a, b, c]
                if w == 0:
                    continue
                M2 += w * (_comm(B[a], C2[b, c]) + _comm(B[c], C2[b, a]))
    M2 *= -1 / 6
    return MagnusTerms(M0=M0, M1=M1, M2=M2)
