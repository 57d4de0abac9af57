"""Closed-form effective Hamiltonian of the polychromatic sideband drive.

Up to second order in the drive amplitudes the effective Hamiltonian is

    H_eff = c1 1 + c2 sz + c3 sz a + c4 sz a^2 + c5 sz a^dag a
            + c6 s+ + c7 s+ a + c8 s+ a^dag + h.c.

and every ``c`` is a sum of coefficients ``alpha_i^(l)`` (``l`` = order).
Each coefficient is a finite lattice sum over tone indices ``j, q, r``.
Index conditions such as ``j != 0`` or ``m + j - q = 0`` are exact integer
masks, never tolerances.  Units: ``omega = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .drive import PulseSpec, UnsupportedRegimeError
from .fock import SpaceConfig, build_operators
from .lattice import LatticeError, LatticeForm, grids

__all__ = [
    "AXIS",
    "AssembledEffective",
    "Branch",
    "ConstraintResidual",
    "EffectiveCoefficients",
    "LatticeError",
    "alpha11_branch",
    "alpha_first",
    "alpha_second",
    "alpha_zeroth",
    "assemble",
    "branch_of",
    "coefficient_forms",
    "coefficients",
    "constraint_residuals",
    "full_constraint_residuals",
]

AXIS_TOL = 1e-12

ZEROTH_LABELS = ("alpha1^(0)", "alpha2^(0)")
FIRST_LABELS = tuple(f"alpha{i}^(1)" for i in range(1, 9))
SECOND_LABELS = tuple(f"alpha{i}^(2)" for i in range(1, 12))
ALL_LABELS = ZEROTH_LABELS + FIRST_LABELS + SECOND_LABELS

# which complex axis each coefficient lives on for real drive parameters
_IMAG = {
    "alpha2^(0)", "alpha2^(1)", "alpha3^(1)", "alpha5^(1)",
    "alpha2^(2)", "alpha3^(2)", "alpha5^(2)", "alpha10^(2)", "alpha11^(2)",
}
AXIS = {label: ("imag" if label in _IMAG else "real") for label in ALL_LABELS}


class Branch(Enum):
    M_GT_2N = "m>2n"
    TWO_N_GE_M_GT_N = "2n>=m>n"


def branch_of(m: int, n: int) -> Branch:
    if not m > n:
        raise UnsupportedRegimeError(f"closed forms need m > n (m={m}, n={n})")
    return Branch.M_GT_2N if m > 2 * n else Branch.TWO_N_GE_M_GT_N


def alpha11_branch(m: int, n: int) -> str:
    """Sub-branch for ``alpha11^(2)``, decided with exact rationals.

    The boundary ``m = 3n/2`` goes to the lower branch, whose extra resonant
    sums are exactly the ones that become reachable there.
    """
    branch_of(m, n)
    if m > 2 * n:
        return "m>2n"
    if Fraction(m) > Fraction(3 * n, 2):
        return "2n>=m>3n/2"
    return "3n/2>=m>n"


def _build_forms(m: int, n: int, delta: float, eta: tuple) -> dict[str, LatticeForm]:
    eta = np.asarray(eta)
    j, (J, Q), (J3, Q3, R3) = grids(n)
    d = delta
    wide = branch_of(m, n) is Branch.TWO_N_GE_M_GT_N
    forms = {label: LatticeForm(n, eta) for label in ALL_LABELS}

    def add(label, *args, **kw):
        forms[label].add(*args, **kw)

    # zeroth order
    add("alpha1^(0)", "", -d / 4)
    add("alpha2^(0)", "", 0.5j, factors=("ef:0",))

    # first order; alpha1^(1) carries the sign of its defining time integral
    add("alpha1^(1)", "j", -d, 2 * (m - j), factors=("f:j",))
    add("alpha2^(1)", "j", 1j * d, 2 * j, j != 0, ("ef:j",))
    add("alpha3^(1)", "j", -1j * d, 2 * (2 * m - j), factors=("ef:j",))
    add("alpha4^(1)", "j", 1, 8 * (m - j), factors=("f:j", "f:j"))
    add("alpha5^(1)", "j", -1j, 4 * (m - j), factors=("ef:0", "f:j"))
    if wide:
        add("alpha5^(1)", "jq", 1j, 4 * (m - Q), m + J - Q == 0, ("ef:j", "f:q"))
        add("alpha5^(1)", "jq", -1j, 4 * (2 * m - J), m + Q - J == 0, ("ef:j", "f:q"))
    add("alpha6^(1)", "j", -1, 4 * (2 * m - j), factors=("ef:0", "ef:j"))
    add("alpha7^(1)", "j", 1, 4 * j, j != 0, ("ef:0", "ef:j"))
    add("alpha7^(1)", "j", -1, 8 * j, j != 0, ("ef:j", "ef:j"))
    add("alpha8^(1)", "j", 1, 8 * (2 * m - j), factors=("ef:j", "ef:j"))

    # second order
    add("alpha1^(2)", "j", -d**2, 2 * (m - j) ** 2, factors=("f:j",))
    add("alpha2^(2)", "j", -1j * d**2, 2 * j**2, j != 0, ("ef:j",))
    add("alpha3^(2)", "j", -1j * d**2, 2 * (2 * m - j) ** 2, factors=("ef:j",))

    add("alpha4^(2)", "j", d, 8 * (m - j) ** 2, factors=("f:j", "f:j"))
    add("alpha4^(2)", "jq", d, 8 * (m - J) * (m - Q), factors=("f:j", "f:q"))

    a5 = "alpha5^(2)"
    add(a5, "j", -1j * d, 4 * (m - j) ** 2, factors=("ef:0", "f:j"))
    add(a5, "jq", -1j * d, 4 * Q * (m - J), Q != 0, ("ef:q", "f:j"))
    add(a5, "jq", -1j * d, 4 * (m - Q) * (2 * m - J), factors=("ef:j", "f:q"))
    if wide:
        add(a5, "jq", 1j * d, 8 * Q**2, (Q != 0) & (m - J + Q == 0), ("ef:q", "f:j"))
        add(a5, "jq", 1j * d, 8 * (m - Q) ** 2, m - Q + J == 0, ("ef:j", "f:q"))
        add(a5, "jq", -1j * d, 6 * (2 * m - Q) ** 2, m + J - Q == 0, ("ef:q", "f:j"))
        add(a5, "jq", -1j * d, 12 * (m - Q) ** 2, m - J + Q == 0, ("ef:j", "f:q"))

    add("alpha6^(2)", "j", -d, 4 * (2 * m - j) ** 2, factors=("ef:0", "ef:j"))
    add("alpha6^(2)", "jq", -d, 4 * J * (2 * m - Q), J != 0, ("ef:j", "ef:q"))

    add("alpha7^(2)", "j", d, 8 * j**2, j != 0, ("ef:j", "ef:j"))
    add("alpha7^(2)", "j", -d, 4 * j**2, j != 0, ("ef:0", "ef:j"))
    add("alpha7^(2)", "jq", d, 8 * J * Q, (J != 0) & (Q != 0), ("ef:j", "ef:q"))

    add("alpha8^(2)", "j", d, 8 * (2 * m - j) ** 2, factors=("ef:j", "ef:j"))
    add("alpha8^(2)", "jq", d, 8 * (2 * m - J) * (2 * m - Q), factors=("ef:j", "ef:q"))

    add("alpha9^(2)", "jq", 1, 4 * (m - J) * (m - Q), factors=("f:j", "f:q", "f:q"))
    if not m > 3 * n:
        add("alpha9^(2)", "jqr", 1, 8 * (m - R3) * (Q3 - R3),
            (Q3 != R3) & (m - J3 + Q3 - R3 == 0), ("f:j", "f:q", "f:r"))

    a10 = "alpha10^(2)"
    if not wide:
        qjr = ("ef:q", "f:j", "f:r")
        jqr = ("ef:j", "f:q", "f:r")
        add(a10, "jqr", -1j, 8 * (m - R3) * (Q3 - R3 - m), Q3 - R3 - J3 == 0, qjr)
        add(a10, "jqr", -1j, 12 * (m - R3) * (m + Q3 - R3), Q3 - R3 + J3 == 0, qjr)
        add(a10, "jq", -1j, 6 * (m - J) * (m - Q), factors=("ef:0", "f:j", "f:q"))
        add(a10, "jq", -1j, 4 * J * (m - Q), J != 0, ("ef:j", "f:q", "f:q"))
        add(a10, "jqr", -1j, 6 * (m - R3) * (R3 - Q3), (Q3 != R3) & (R3 + J3 - Q3 == 0), jqr)
        add(a10, "jq", 1j, 12 * (m - Q) * (Q - J), J != Q, ("ef:0", "f:j", "f:q"))
        add(a10, "jqr", 1j, 12 * (m - R3) * (R3 - Q3), (Q3 != R3) & (R3 - Q3 - J3 == 0), jqr)
    else:
        jqr = ("ef:j", "f:q", "f:r")
        add(a10, "jqr", -1j, 4 * (2 * m - J3) * (J3 - m - Q3), (J3 - m - Q3 != 0) & (J3 - R3 - Q3 == 0), jqr)
        add(a10, "jqr", -1j, 4 * (2 * m - J3) * (m - R3), J3 - m - Q3 == 0, jqr)
        add(a10, "jqr", 1j, 12 * (m - R3) * (R3 - Q3), (Q3 != R3) & (R3 - Q3 - J3 == 0), jqr)
        add(a10, "jqr", -1j, 12 * (m - R3) * (m - R3 + J3), (m - R3 + J3 != 0) & (R3 - J3 - Q3 == 0), jqr)
        add(a10, "jqr", 1j, 12 * (m - R3) * (m - Q3), m - R3 + J3 == 0, jqr)
        add(a10, "jqr", 1j, 12 * J3 * (m - R3), (J3 != 0) & (m - J3 - Q3 == 0), jqr)
        add(a10, "jq", -1j, 4 * (m - J) * (J - Q), J != Q, ("ef:0", "f:j", "f:q"))
        add(a10, "jq", -1j, 4 * J * (m - Q), J != 0, ("ef:j", "f:q", "f:q"))
        add(a10, "jqr", -1j, 12 * (m - R3) * (m - Q3), m - Q3 - J3 == 0, jqr)
        add(a10, "j", -1j, 6 * (m - j) ** 2, factors=("ef:0", "f:j", "f:j"))
        add(a10, "jqr", -1j, 6 * J3 * (m - R3), (J3 != 0) & (m - Q3 + J3 == 0), jqr)
        add(a10, "jqr", 1j, 6 * J3 * (m - Q3 + J3),
            (J3 != 0) & (m - Q3 + J3 != 0) & (Q3 - R3 - J3 == 0), jqr)

    a11 = "alpha11^(2)"
    sub = alpha11_branch(m, n)
    jqr = ("ef:j", "f:q", "f:r")
    if sub == "m>2n":
        add(a11, "jq", 1j, 8 * (m - J) * (m - Q), factors=("ef:0", "f:j", "f:q"))
        add(a11, "jq", 1j, 4 * (m - Q) * (2 * m - J), factors=("ef:j", "f:q", "f:q"))
    else:
        add(a11, "jq", 1j, 4 * (m - Q) * (2 * m - J - Q), factors=("ef:0", "f:j", "f:q"))
        add(a11, "jqr", 1j, 4 * J3 * (m - R3), (J3 != 0) & (m - Q3 + J3 == 0), jqr)
        add(a11, "jq", 1j, 4 * (m - Q) * (2 * m - J), factors=("ef:j", "f:q", "f:q"))
        add(a11, "jqr", 1j, 4 * (2 * m - J3) * (m - R3), m + Q3 - J3 == 0, jqr)
        if sub == "3n/2>=m>n":
            add(a11, "jqr", 1j, 4 * J3 * (m - Q3 + J3),
                (J3 != 0) & (m - Q3 + J3 != 0) & (2 * m - R3 - Q3 + J3 == 0), jqr)
            add(a11, "jqr", 1j, 12 * (m - R3) * (R3 - Q3), (Q3 != R3) & (2 * m - J3 + R3 - Q3 == 0), jqr)
            add(a11, "jqr", 1j, 6 * (2 * m - J3) * (m + Q3 - J3),
                (m + Q3 - J3 != 0) & (2 * m - J3 + Q3 - R3 == 0), jqr)
            add(a11, "jqr", -1j, 12 * (m - R3) * (3 * m - J3 - R3), 2 * m + Q3 - J3 - R3 == 0, jqr)
    return forms


@lru_cache(maxsize=256)
def _forms_cached(m, n, delta, eta):
    return _build_forms(m, n, delta, eta)


def coefficient_forms(spec: PulseSpec) -> dict[str, LatticeForm]:
    """Lattice forms of all coefficients for the geometry ``(m, n, delta, eta)`` of ``spec``."""
    return _forms_cached(spec.m, spec.n, spec.delta, tuple(spec.eta))


def _on_axis(label: str, value: complex) -> complex:
    off = value.imag if AXIS[label] == "real" else value.real
    scale = max(abs(value), 1.0)
    if abs(off) > AXIS_TOL * scale:
        raise AssertionError(f"{label} = {value} is off its {AXIS[label]} axis")
    return value


@dataclass(frozen=True)
class EffectiveCoefficients:
    alpha0: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    branch: Branch
    alpha11_branch: str

    def as_dict(self) -> dict[str, complex]:
        values = np.concatenate([self.alpha0, self.alpha1, self.alpha2])
        return dict(zip(ALL_LABELS, values))

    def __getitem__(self, label: str) -> complex:
        return self.as_dict()[label]


def coefficients(spec: PulseSpec) -> EffectiveCoefficients:
    forms = coefficient_forms(spec)
    vals = {k: _on_axis(k, form.value(spec.f)) for k, form in forms.items()}
    return EffectiveCoefficients(
        alpha0=np.array([vals[k] for k in ZEROTH_LABELS]),
        alpha1=np.array([vals[k] for k in FIRST_LABELS]),
        alpha2=np.array([vals[k] for k in SECOND_LABELS]),
        branch=branch_of(spec.m, spec.n),
        alpha11_branch=alpha11_branch(spec.m, spec.n),
    )


def alpha_zeroth(spec: PulseSpec) -> tuple[complex, complex]:
    return tuple(coefficients(spec).alpha0)


def alpha_first(spec: PulseSpec) -> np.ndarray:
    return coefficients(spec).alpha1


def alpha_second(spec: PulseSpec) -> np.ndarray:
    return coefficients(spec).alpha2


# -- assembly -----------------------------------------------------------------------

C_OPERATORS = ("1", "sz", "sz a", "sz a^2", "sz a^dag a", "s+", "s+ a", "s+ a^dag")

# c-index -> list of (weight, label); a label with order > max_order is skipped
_GROUPS = {
    0: [(0.5, "alpha7^(1)"), (0.5, "alpha7^(2)"), (-0.5, "alpha8^(1)"), (-0.5, "alpha8^(2)")],
    1: [(1, "alpha1^(0)"), (1, "alpha4^(1)"), (1, "alpha4^(2)"),
        (0.5, "alpha7^(1)"), (0.5, "alpha7^(2)"), (0.5, "alpha8^(1)"), (0.5, "alpha8^(2)")],
    2: [(1, "alpha5^(1)"), (1, "alpha5^(2)")],
    3: [(1, "alpha6^(1)"), (1, "alpha6^(2)")],
    4: [(1, "alpha7^(1)"), (1, "alpha7^(2)"), (1, "alpha8^(1)"), (1, "alpha8^(2)")],
    5: [(1, "alpha1^(1)"), (1, "alpha1^(2)"), (1, "alpha9^(2)")],
    6: [(1, "alpha2^(0)"), (1, "alpha2^(1)"), (1, "alpha2^(2)"), (1, "alpha10^(2)")],
    7: [(1, "alpha3^(1)"), (1, "alpha3^(2)"), (1, "alpha11^(2)")],
}


def _order(label: str) -> int:
    return int(label.split("^(")[1].rstrip(")"))


@dataclass(frozen=True)
class AssembledEffective:
    c: np.ndarray
    H_eff: np.ndarray
    cfg: SpaceConfig
    max_order: int = 2
    coeffs: EffectiveCoefficients | None = field(default=None, repr=False)


def operator_basis(cfg: SpaceConfig) -> list[np.ndarray]:
    """Matrices of the eight independent operators multiplying ``c1..c8``."""
    ops = build_operators(cfg)
    sz, a, ad, sp = ops.sigma_z, ops.a, ops.a_dag, ops.sigma_plus
    return [ops.identity, sz, sz @ a, sz @ a @ a, sz @ ad @ a, sp, sp @ a, sp @ ad]


def c_values(coeffs: EffectiveCoefficients, max_order: int = 2) -> np.ndarray:
    values = coeffs.as_dict()
    c = np.zeros(8, dtype=complex)
    for i, group in _GROUPS.items():
        c[i] = sum(w * values[lab] for w, lab in group if _order(lab) <= max_order)
    return c


def assemble(spec: PulseSpec, cfg: SpaceConfig | None = None, max_order: int = 2) -> AssembledEffective:
    """Effective Hamiltonian ``sum_i c_i O_i + h.c.`` truncated at ``max_order``."""
    if cfg is None:
        cfg = SpaceConfig.for_level(1)
    coeffs = coefficients(spec)
    c = c_values(coeffs, max_order)
    half = sum(ci * O for ci, O in zip(c, operator_basis(cfg)))
    return AssembledEffective(c=c, H_eff=half + half.conj().T, cfg=cfg, max_order=max_order, coeffs=coeffs)


# -- constraints --------------------------------------------------------------------

FIVE = (
    ("sz a", ["alpha5^(1)", "alpha5^(2)"], "imag", 0.0),
    ("sz a^2", ["alpha6^(1)", "alpha6^(2)"], "real", 0.0),
    ("sz", ["alpha1^(0)", "alpha4^(1)", "alpha4^(2)"], "real", 0.0),
    ("sz a^dag a", ["alpha7^(1)", "alpha7^(2)", "alpha8^(1)", "alpha8^(2)"], "real", 0.0),
    ("s+ a", ["alpha2^(0)", "alpha2^(1)", "alpha10^(2)"], "imag", "half_ftg"),
)

SEVEN = FIVE[:4] + (
    ("s+ a", ["alpha2^(0)", "alpha2^(1)", "alpha2^(2)", "alpha10^(2)"], "imag", "half_ftg"),
    ("s+", ["alpha1^(1)", "alpha1^(2)", "alpha9^(2)"], "real", 0.0),
    ("s+ a^dag", ["alpha3^(1)", "alpha3^(2)", "alpha11^(2)"], "imag", 0.0),
)

CONSTRAINT_SETS = {"five": FIVE, "seven": SEVEN}


@dataclass(frozen=True)
class ConstraintResidual:
    r: np.ndarray
    names: tuple[str, ...]

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.r))) if self.r.size else 0.0


def _project(value: complex, axis: str) -> float:
    return value.real if axis == "real" else value.imag


def _target(rhs, f_tg: float) -> float:
    return f_tg / 2 if rhs == "half_ftg" else float(rhs)


def residuals_for(spec: PulseSpec, which: str = "five") -> ConstraintResidual:
    rows = CONSTRAINT_SETS[which]
    values = coefficients(spec).as_dict()
    r = np.empty(len(rows))
    for i, (_, labels, axis, rhs) in enumerate(rows):
        total = sum(values[lab] for lab in labels)
        r[i] = _project(total, axis) - _target(rhs, spec.f_tg)
    return ConstraintResidual(r=r, names=tuple(row[0] for row in rows))


def constraint_residuals(spec: PulseSpec) -> ConstraintResidual:
    """Five equalities: no ``sz a``, ``sz a^2``, ``sz``, ``sz a^dag a`` terms; ``s+ a`` on target.

    The sideband equation leaves out ``alpha2^(2)``.
    """
    return residuals_for(spec, "five")


def full_constraint_residuals(spec: PulseSpec) -> ConstraintResidual:
    """Seven equalities: the five above (sideband with ``alpha2^(2)``) plus ``s+``, ``s+ a^dag``."""
    return residuals_for(spec, "seven")


def constraint_jacobian(spec: PulseSpec, which: str = "five") -> np.ndarray:
    """Exact Jacobian of the residuals with respect to ``f`` (rows = constraints)."""
    forms = coefficient_forms(spec)
    rows = CONSTRAINT_SETS[which]
    jac = np.empty((len(rows), spec.f.size))
    for i, (_, labels, axis, _) in enumerate(rows):
        g = sum(forms[lab].grad(spec.f) for lab in labels)
        jac[i] = g.real if axis == "real" else g.imag
    return jac


@lru_cache(maxsize=256)
def _constraint_forms_cached(m, n, delta, eta, which):
    forms = _forms_cached(m, n, delta, eta)
    rows = []
    for _, labels, axis, rhs in CONSTRAINT_SETS[which]:
        combined = LatticeForm(n, np.asarray(eta))
        for lab in labels:
            combined += forms[lab]
        rows.append((combined, axis, rhs))
    return rows


def constraint_forms(spec: PulseSpec, which: str = "five"):
    """``(form, axis, rhs)`` per constraint for the geometry of ``spec``."""
    return _constraint_forms_cached(spec.m, spec.n, spec.delta, tuple(spec.eta), which)
