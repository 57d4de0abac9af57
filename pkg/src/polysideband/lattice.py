"""Masked lattice sums that are polynomials in the tone amplitudes.

Every closed-form coefficient in this package has the shape

    sum_{(j,q,r) in mask}  w(j,q,r) * u1[i1] * u2[i2] * ...

where each factor ``u`` is either the amplitude vector ``f`` or ``eta * f``
indexed by one of the lattice indices (or by the central tone ``j = 0``).
Storing the weight tensor ``w`` once per pulse geometry lets us evaluate the
value and its exact gradient with respect to ``f`` by tensor contraction.
Forms are compiled once into symmetric coefficient tensors per polynomial
degree, which makes repeated evaluation inside an optimizer cheap.
"""
from __future__ import annotations

from itertools import permutations
from math import factorial

import numpy as np

_OUT = "abcdef"


class LatticeError(ArithmeticError):
    """A zero denominator survived the index conditions of a lattice sum."""


def masked_weight(coef, den, mask=True, shape=()):
    """``coef / den`` on ``mask`` and zero elsewhere, broadcast to ``shape``."""
    coef, den, mask = np.broadcast_arrays(
        np.asarray(coef, dtype=complex), np.asarray(den, dtype=float), np.asarray(mask, dtype=bool)
    )
    if np.any(den[mask] == 0):
        raise LatticeError("zero denominator inside a lattice sum")
    w = np.zeros(den.shape, dtype=complex)
    np.divide(coef, den, out=w, where=mask)
    return np.broadcast_to(w, shape).copy() if shape else w


class LatticeForm:
    """A sum of lattice terms over tones ``j = -n..n``.

    Factors are written ``"f:j"``, ``"ef:q"`` (meaning ``eta_q f_q``) or
    ``"f:0"`` / ``"ef:0"`` for the central tone.
    """

    def __init__(self, n: int, eta: np.ndarray):
        self.n = n
        self.size = 2 * n + 1
        self.eta = np.asarray(eta, dtype=float)
        self.terms: list[tuple[np.ndarray, str, tuple[tuple[str, str], ...]]] = []
        self._tensors = None

    def add(self, axes: str, coef, den=1.0, mask=True, factors=()):
        shape = (self.size,) * len(axes)
        w = masked_weight(coef, den, mask, shape)
        if not shape:
            w = complex(w)
        parsed = tuple(tuple(x.split(":")) for x in factors)
        for kind, ax in parsed:
            if kind not in ("f", "ef") or (ax != "0" and ax not in axes):
                raise ValueError(f"bad factor {kind}:{ax} for axes {axes!r}")
        self.terms.append((w, axes, parsed))
        self._tensors = None
        return self

    def __iadd__(self, other: "LatticeForm"):
        self.terms.extend(other.terms)
        self._tensors = None
        return self

    def scaled(self, s) -> "LatticeForm":
        out = LatticeForm(self.n, self.eta)
        out.terms = [(w * s, axes, fac) for w, axes, fac in self.terms]
        return out

    def _vectors(self, f):
        return {"f": f, "ef": self.eta * f}

    def _embedding(self, kind: str, ax: str) -> tuple[np.ndarray, str]:
        """Map from a lattice axis (or the central tone) to one amplitude slot."""
        scale = self.eta if kind == "ef" else np.ones(self.size)
        if ax == "0":
            e = np.zeros(self.size)
            e[self.n] = scale[self.n]
            return e, ""
        return np.diag(scale), ax

    def tensors(self) -> dict[int, np.ndarray]:
        """Symmetric coefficient tensor per degree: ``value = sum_k C_k[f, ..., f]``."""
        if self._tensors is not None:
            return self._tensors
        out: dict[int, np.ndarray] = {}
        for w, axes, factors in self.terms:
            deg = len(factors)
            ops, subs = [w], [axes]
            for i, (kind, ax) in enumerate(factors):
                emb, lat = self._embedding(kind, ax)
                ops.append(emb)
                subs.append(lat + _OUT[i])
            T = (np.einsum(",".join(subs) + "->" + _OUT[:deg], *ops, optimize="greedy")
                 if (deg or axes) else np.asarray(w))
            out[deg] = out.get(deg, 0) + T
        for deg, T in out.items():
            if deg > 1:
                out[deg] = sum(np.transpose(T, p) for p in permutations(range(deg))) / factorial(deg)
        self._tensors = out
        return out

    def value(self, f) -> complex:
        """Value at real amplitudes ``f`` from the compiled tensors."""
        f = np.asarray(f, dtype=float)
        total = 0j
        for deg, T in self.tensors().items():
            for _ in range(deg):
                T = T @ f
            total += complex(T)
        return total

    def grad(self, f) -> np.ndarray:
        """Exact gradient with respect to the real amplitudes ``f``."""
        f = np.asarray(f, dtype=float)
        g = np.zeros(self.size, dtype=complex)
        for deg, T in self.tensors().items():
            if deg == 0:
                continue
            for _ in range(deg - 1):
                T = T @ f
            g += deg * T
        return g

    def value_direct(self, f) -> complex:
        """Term-by-term evaluation without compilation (reference path)."""
        f = np.asarray(f, dtype=float)
        vec = self._vectors(f)
        total = 0j
        for w, axes, factors in self.terms:
            scalar = 1.0
            ops, subs = [w], [axes]
            for kind, ax in factors:
                if ax == "0":
                    scalar *= vec[kind][self.n]
                else:
                    ops.append(vec[kind])
                    subs.append(ax)
            total += scalar * (np.einsum(",".join(subs) + "->", *ops) if axes else w)
        return complex(total)

    def grad_direct(self, f) -> np.ndarray:
        """Product-rule gradient without compilation (reference path)."""
        f = np.asarray(f, dtype=float)
        vec = self._vectors(f)
        wgt = {"f": np.ones(self.size), "ef": self.eta}
        g = np.zeros(self.size, dtype=complex)
        for w, axes, factors in self.terms:
            for k, (kind_k, ax_k) in enumerate(factors):
                scalar = 1.0
                ops, subs = [w], [axes]
                for i, (kind, ax) in enumerate(factors):
                    if i == k:
                        continue
                    if ax == "0":
                        scalar *= vec[kind][self.n]
                    else:
                        ops.append(vec[kind])
                        subs.append(ax)
                if ax_k == "0":
                    contracted = np.einsum(",".join(subs) + "->", *ops) if axes else w
                    g[self.n] += scalar * contracted * wgt[kind_k][self.n]
                else:
                    contracted = np.einsum(",".join(subs) + "->" + ax_k, *ops)
                    g += scalar * contracted * wgt[kind_k]
        return g


def grids(n: int):
    """Index grids for one-, two- and three-index lattice sums."""
    j = np.arange(-n, n + 1)
    return (
        j,
        (j[:, None], j[None, :]),
        (j[:, None, None], j[None, :, None], j[None, None, :]),
    )
