import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polysideband.drive import (
    PERIOD,
    PulseSpec,
    UnsupportedRegimeError,
    h_funcs,
    hamiltonian,
    monochromatic_reference,
)
from polysideband.fock import SpaceConfig, build_operators


amps = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=1)


@settings(max_examples=40)
@given(n=st.integers(0, 4), delta=st.floats(-1, 1), seed=st.integers(0, 2**16))
def test_json_roundtrip(n, delta, seed):
    f = np.random.default_rng(seed).normal(size=2 * n + 1)
    spec = PulseSpec(m=10, n=n, delta=delta, f=f, eta=0.05, f_tg=0.1)
    back = PulseSpec.from_json(spec.to_json())
    assert back.m == spec.m and back.n == spec.n and back.delta == spec.delta
    assert np.array_equal(back.f, spec.f) and np.array_equal(back.eta, spec.eta)


def test_validation():
    with pytest.raises(UnsupportedRegimeError):
        PulseSpec(m=3, n=3, delta=0, f=np.ones(7))
    with pytest.raises(ValueError):
        PulseSpec(m=10, n=1, delta=0, f=[1, 2])
    with pytest.raises(ValueError):
        PulseSpec(m=10, n=0, delta=0, f=[1], eta=1.5)
    with pytest.raises(ValueError):
        PulseSpec(m=10, n=0, delta=float("nan"), f=[1])


def test_unknown_json_key_rejected():
    data = monochromatic_reference(0.1, 0.05, 10).to_dict()
    data["colour"] = "red"
    with pytest.raises((KeyError, ValueError)):
        PulseSpec.from_dict(data)


def test_h_funcs_match_tone_sums(rng):
    spec = PulseSpec(m=10, n=2, delta=0.1, f=rng.normal(size=5), eta=rng.uniform(0.03, 0.07, 5))
    t = rng.uniform(0, PERIOD, 7)
    h1, h2, h3 = h_funcs(spec, t)
    j = np.arange(-2, 3)[:, None]
    f, eta = spec.f[:, None], spec.eta[:, None]
    assert np.allclose(h1, (f / 2 * np.exp(1j * (10 - j) * t)).sum(0))
    assert np.allclose(h2, (1j * eta * f / 2 * np.exp(-1j * j * t)).sum(0))
    assert np.allclose(h3, (1j * eta * f / 2 * np.exp(1j * (20 - j) * t)).sum(0))


def test_drive_is_periodic_and_hermitian(rng):
    spec = PulseSpec(m=10, n=3, delta=0.3, f=rng.normal(size=7))
    ops = build_operators(SpaceConfig(4))
    H0, H1 = hamiltonian(spec, 0.37, ops), hamiltonian(spec, 0.37 + PERIOD, ops)
    assert np.allclose(H0, H0.conj().T)
    assert np.allclose(H0, H1)


def test_monochromatic_reference_values():
    ref = monochromatic_reference(0.1, 0.05, 10)
    assert ref.n == 0 and ref.f0 == pytest.approx(2.0)
    assert ref.delta == pytest.approx(0.2)


def test_monochromatic_warns_for_strong_carrier():
    with pytest.warns(UserWarning):
        monochromatic_reference(0.4, 0.05, 10)


def test_from_dict_accepts_schema():
    data = json.loads(monochromatic_reference(0.1, 0.05, 10).to_json())
    data["schema"] = 1
    assert PulseSpec.from_dict(data).f0 == pytest.approx(2.0)
