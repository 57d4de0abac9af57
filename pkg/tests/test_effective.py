import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polysideband.drive import PulseSpec, monochromatic_reference
from polysideband.effective import (
    C_OPERATORS,
    assemble,
    coefficients,
    constraint_forms,
    constraint_jacobian,
    constraint_residuals,
    full_constraint_residuals,
    residuals_for,
)
from polysideband.fock import SpaceConfig

from conftest import random_spec


@settings(max_examples=15, deadline=None)
@given(n=st.integers(0, 6), seed=st.integers(0, 2**16), order=st.integers(0, 2))
def test_effective_hamiltonian_is_hermitian(n, seed, order):
    spec = random_spec(np.random.default_rng(seed), n)
    H = assemble(spec, SpaceConfig(5), max_order=order).H_eff
    assert np.allclose(H, H.conj().T, atol=1e-14)


def test_lamb_shift_cancels_at_the_monochromatic_detuning():
    # zeroth plus first order of the sz coefficient vanishes at delta = f_tg^2 / (2 eta^2 m)
    spec = monochromatic_reference(0.1, 0.05, 10)
    assert spec.delta == pytest.approx(0.2)
    co = coefficients(spec)
    assert (co["alpha1^(0)"] + co["alpha4^(1)"]).real == pytest.approx(0.0, abs=1e-15)
    # sideband strength equals f_tg / 2 at zeroth order
    assert co["alpha2^(0)"].imag == pytest.approx(0.05)


def test_constraint_sets_share_first_four_rows(rng):
    spec = random_spec(rng, 4)
    five, seven = constraint_residuals(spec), full_constraint_residuals(spec)
    assert five.names[:4] == seven.names[:4]
    assert np.allclose(five.r[:4], seven.r[:4])
    assert len(five.r) == 5 and len(seven.r) == 7


@pytest.mark.parametrize("which", ["five", "seven"])
def test_constraint_jacobian_finite_differences(which, rng):
    spec = random_spec(rng, 5)
    jac = constraint_jacobian(spec, which)
    h = 1e-6
    fd = np.column_stack([
        (residuals_for(spec.replace(f=spec.f + h * e), which).r
         - residuals_for(spec.replace(f=spec.f - h * e), which).r) / (2 * h)
        for e in np.eye(spec.f.size)
    ])
    scale = np.abs(jac).max()
    assert np.abs(jac - fd).max() <= 1e-6 * scale


def test_constraint_forms_agree_with_residuals(rng):
    spec = random_spec(rng, 3)
    r = residuals_for(spec, "seven").r
    for ri, (form, axis, rhs) in zip(r, constraint_forms(spec, "seven")):
        v = form.value(spec.f)
        value = v.real if axis == "real" else v.imag
        target = spec.f_tg / 2 if rhs == "half_ftg" else rhs
        assert value - target == pytest.approx(ri, abs=1e-15)


def test_c_values_layout():
    res = assemble(monochromatic_reference(0.1, 0.05, 10), max_order=0)
    assert len(res.c) == len(C_OPERATORS)
    # only the detuning and the sideband survive at zeroth order
    nonzero = {C_OPERATORS[i] for i in np.flatnonzero(np.abs(res.c) > 0)}
    assert nonzero == {"sz", "s+ a"}


def test_default_space_holds_the_first_motional_level():
    spec = PulseSpec(m=10, n=1, delta=0.2, f=[0.1, 2.0, 0.1], eta=0.05)
    assert assemble(spec).cfg.d >= 2
