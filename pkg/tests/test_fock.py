import numpy as np
import pytest
from hypothesis import given, strategies as st

from polysideband.fock import (
    BasisIndex,
    ConfigurationError,
    Electronic,
    SpaceConfig,
    basis_index,
    basis_labels,
    basis_state,
    build_operators,
    flat_index,
)


@given(d=st.integers(2, 30), data=st.data())
def test_flat_index_roundtrip(d, data):
    cfg = SpaceConfig(d)
    i = data.draw(st.integers(0, cfg.dim - 1))
    idx = basis_index(i, cfg)
    assert flat_index(idx.electronic, idx.k, cfg) == i


def test_electronic_fastest_layout():
    cfg = SpaceConfig(3)
    assert basis_labels(cfg) == ["g0", "e0", "g1", "e1", "g2", "e2"]
    assert flat_index("e", 1, cfg) == 3


@pytest.mark.parametrize("label", ["g1", "|g,1>", "g,1", " e0 "])
def test_parse_labels(label):
    idx = BasisIndex.parse(label)
    assert idx.k in (0, 1)
    assert str(BasisIndex.parse(str(idx))) == str(idx)


def test_invalid_configs():
    with pytest.raises(ConfigurationError):
        SpaceConfig(1)
    with pytest.raises(ConfigurationError):
        SpaceConfig(4, buffer=4)
    with pytest.raises(IndexError):
        flat_index("g", 5, SpaceConfig(5))
    with pytest.raises(ValueError):
        Electronic.parse("x")


def test_for_level_reserves_buffer():
    cfg = SpaceConfig.for_level(2, buffer=5)
    assert cfg.d == 8 and cfg.buffer == 5


@given(st.integers(2, 12))
def test_operator_algebra(d):
    ops = build_operators(SpaceConfig(d))
    comm = ops.a @ ops.a_dag - ops.a_dag @ ops.a
    # [a, a^dag] = 1 except on the truncated top level
    inner = slice(0, 2 * (d - 1))
    assert np.allclose(comm[inner, inner], np.eye(2 * (d - 1)))
    assert np.allclose(ops.sigma_plus @ ops.sigma_minus - ops.sigma_minus @ ops.sigma_plus, ops.sigma_z)
    assert np.allclose(ops.a @ ops.sigma_plus, ops.sigma_plus @ ops.a)


def test_sigma_z_sign_convention():
    cfg = SpaceConfig(2)
    ops = build_operators(cfg)
    g, e = basis_state("g", 0, cfg), basis_state("e", 0, cfg)
    assert np.vdot(g, ops.sigma_z @ g).real == -1
    assert np.vdot(e, ops.sigma_z @ e).real == 1
    assert np.allclose(ops.sigma_plus @ g, e)
