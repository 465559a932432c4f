import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraweight import spectral as sp
from paraweight.errors import BlockSupportError, DomainError
from paraweight.reports import generator
from paraweight.spectral import SpectralField, TorusGrid


def mode(grid, M):
    """Exact ``e^{iMx}`` built coefficient-side (no transform round-off)."""
    c = np.zeros(grid.shape, dtype=complex)
    c[(M % grid.N,) + (0,) * (grid.dim - 1)] = 1.0
    return SpectralField(grid, c)


def test_chi_plateaus_and_shape():
    s = np.linspace(-3, 3, 6001)
    c = sp.chi(s)
    assert np.all(c[np.abs(s) <= 1.1] == 1.0)
    assert np.all(c[np.abs(s) >= 1.9] == 0.0)
    assert np.all((0 <= c) & (c <= 1))
    assert np.array_equal(c, sp.chi(-s))
    pos = s >= 0
    assert np.all(np.diff(c[pos]) <= 0)


@pytest.mark.parametrize("dim,N,expected", [(1, 64, 7), (1, 512, 10), (2, 64, 8), (2, 256, 10)])
def test_k_max(dim, N, expected):
    g = TorusGrid(dim, N)
    assert g.k_max == expected
    assert np.all(g.S_multiplier(g.k_max) == 1.0)


def test_grid_validation():
    with pytest.raises(DomainError):
        TorusGrid(3, 64)
    with pytest.raises(DomainError):
        TorusGrid(1, 48)


def test_S_on_single_mode():
    g = TorusGrid(1, 64)
    u = mode(g, 7)
    assert np.array_equal(sp.apply_S(u, 3).coeffs, u.coeffs)
    assert not np.any(sp.apply_S(u, 1).coeffs)
    assert not np.any(sp.apply_S(u, -1).coeffs)
    with pytest.raises(DomainError):
        sp.apply_S(u, -2)


def test_decompose_single_mode():
    g = TorusGrid(1, 64)
    u = mode(g, 7)
    dec = sp.decompose(u)
    nonzero = [k for k, b in enumerate(dec.blocks) if np.any(np.abs(b.coeffs) > 0)]
    assert nonzero == [2, 3]
    c = float(sp.chi(7 / 4))
    assert np.allclose(dec.blocks[2].coeffs, c * u.coeffs, rtol=0, atol=1e-15)
    assert np.allclose(dec.blocks[3].coeffs, (1 - c) * u.coeffs, rtol=0, atol=1e-15)


def test_constant_lives_in_block_zero():
    g = TorusGrid(2, 32)
    u = SpectralField.from_samples(g, np.ones(g.shape))
    dec = sp.decompose(u)
    assert np.array_equal(dec.blocks[0].coeffs, u.coeffs)
    assert all(not np.any(b.coeffs) for b in dec.blocks[1:])


@pytest.mark.parametrize("dim,N", [(1, 256), (2, 64)])
def test_reconstruction_and_support(dim, N):
    g = TorusGrid(dim, N)
    u = sp.random_field(g, generator(5, dim), real=False)
    dec = sp.decompose(u)
    err = sp.l2_norm(dec.reconstruct() - u) / sp.l2_norm(u)
    assert err <= 1e-12
    for k, b in enumerate(dec.blocks):
        assert sp.support_violation(b, *sp.block_support_annulus(k)) <= 1e-14


def test_bounded_overlap():
    g = TorusGrid(1, 512)
    u = sp.random_field(g, generator(2), real=False)
    total = sum(sp.l2_norm(b) ** 2 for b in sp.decompose(u).blocks)
    ref = sp.l2_norm(u) ** 2
    assert ref / 3 <= total <= 3 * ref


def test_blocks_commute():
    g = TorusGrid(1, 128)
    u = sp.random_field(g, generator(3))
    for nu, k in [(2, 3), (4, 4), (0, 6)]:
        a = sp.apply_delta(sp.apply_delta(u, k), nu)
        b = sp.apply_delta(sp.apply_delta(u, nu), k)
        assert np.array_equal(a.coeffs, b.coeffs)


def test_h_norm_examples():
    g = TorusGrid(1, 64)
    one = SpectralField.from_samples(g, np.ones(g.shape))
    for s in (-0.5, 0.3, 1.0):
        for method in ("direct", "lp"):
            assert sp.h_norm(one, s, method) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
    assert sp.h_norm(mode(g, 7), -0.5) == pytest.approx(50 ** -0.25 * math.sqrt(2 * math.pi), rel=1e-14)
    g2 = TorusGrid(2, 16)
    one2 = SpectralField.from_samples(g2, np.ones(g2.shape))
    assert sp.h_norm(one2, 0.5) == pytest.approx(2 * math.pi, rel=1e-14)
    with pytest.raises(DomainError):
        sp.h_norm(one, 0.0, "besov")


def test_norm_equivalence_negative_index():
    ratios = []
    for N in (256, 512):
        g = TorusGrid(1, N)
        u = sp.random_field(g, generator(8), band=60, batch=(100,))
        r = sp.h_norm(u, -0.5, "lp") / sp.h_norm(u, -0.5)
        ratios.append(max(r.max(), 1 / r.min()))
    assert max(ratios) <= 4
    assert ratios[1] <= ratios[0] * (1 + 1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 32), (1, 128), (2, 16)]))
@settings(max_examples=25, deadline=None)
def test_parseval(seed, shape):
    g = TorusGrid(*shape)
    u = sp.random_field(g, generator(seed), real=False)
    assert sp.l2_norm_nodes(u) == pytest.approx(sp.l2_norm(u), rel=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_sample_coefficient_roundtrip(seed):
    g = TorusGrid(1, 64)
    u = sp.random_field(g, generator(seed), real=False)
    back = SpectralField.from_samples(g, u.samples)
    assert np.max(np.abs(back.coeffs - u.coeffs)) <= 1e-12 * np.max(np.abs(u.coeffs))


def test_lip_norm_examples():
    g = TorusGrid(1, 128)
    a = SpectralField.from_function(g, lambda x: np.sin(x))
    lip = sp.lip_norm(a)
    assert lip.value == pytest.approx(2.0, rel=1e-12)
    assert np.all(lip.block_decay <= 8 * lip.value)
    assert np.all(lip.block_decay[2:] <= 1e-12)
    c = SpectralField.from_samples(g, np.full(g.shape, -3.0))
    assert sp.lip_norm(c).value == pytest.approx(3.0)
    assert sp.lip_norm(c, "lp").value == pytest.approx(3.0)
    with pytest.raises(DomainError):
        sp.lip_norm(mode(g, 2))


def test_bernstein_examples():
    g = TorusGrid(1, 256)
    assert sp.bernstein_check(mode(g, 3), 2, 0) == pytest.approx(3.0)
    one = SpectralField.from_samples(g, np.ones(g.shape))
    assert sp.bernstein_check(one, 0, 0) == 0.0
    with pytest.raises(BlockSupportError, match="not a 1-block"):
        sp.bernstein_check(mode(g, 5), 1, 0)


def test_bernstein_on_random_blocks():
    g = TorusGrid(2, 64)
    u = sp.random_field(g, generator(12), batch=(20,))
    for nu, blk in sp.iter_blocks(u):
        for j in range(2):
            assert np.all(sp.bernstein_check(blk, nu, j) <= 2.0 ** (nu + 1))


def test_dealiased_square_is_exact():
    g = TorusGrid(1, 32)
    u = SpectralField.from_function(g, lambda x: np.sin(15 * x))
    sq = sp.multiply(u, u)
    # sin^2(15x) = (1 - cos 30x)/2; without padding cos 30x would alias onto |xi| = 2
    expected = np.zeros(g.shape, dtype=complex)
    expected[0] = 0.5
    assert np.allclose(sq.coeffs, expected, atol=1e-15)
    v = SpectralField.from_function(g, lambda x: np.sin(3 * x))
    assert np.allclose(sp.multiply(v, v).samples, np.sin(3 * g.nodes[0]) ** 2, atol=1e-14)


def test_random_field_fixed_across_resolutions():
    fa = sp.random_field(TorusGrid(1, 64), generator(4), band=10)
    fb = sp.random_field(TorusGrid(1, 256), generator(4), band=10)
    # the coarse nodes are every fourth fine node
    assert np.allclose(fa.samples, fb.samples[::4], atol=1e-13)
    assert fa.is_real() and fb.is_real()


def test_random_field_band_must_fit():
    with pytest.raises(DomainError):
        sp.random_field(TorusGrid(1, 32), generator(0), band=16)


def test_spf_roundtrip(tmp_path):
    g = TorusGrid(2, 16)
    u = sp.random_field(g, generator(1), real=False)
    path = sp.write_field(u, tmp_path / "u.spf")
    raw = path.read_bytes()
    assert raw[:4] == b"SPF1" and len(raw) == 16 + 16 * 16 * 16
    v = sp.read_field(path)
    assert v.grid == g
    assert np.array_equal(v.samples, u.samples)


def test_spf_rejects_garbage(tmp_path):
    p = tmp_path / "bad.spf"
    p.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(DomainError, match="magic"):
        sp.read_field(p)


def test_block_energy_csv(tmp_path):
    g = TorusGrid(1, 64)
    dec = sp.decompose(mode(g, 7), 0.5)
    rows = list(csv.reader(dec.to_csv(tmp_path / "e.csv").open()))
    assert rows[0] == ["k", "delta_k"]
    assert len(rows) == g.k_max + 2
    assert float(rows[3][1]) == pytest.approx(2**1.0 * sp.l2_norm(dec.blocks[2]))


def test_fields_are_immutable():
    g = TorusGrid(1, 16)
    u = mode(g, 1)
    with pytest.raises(ValueError):
        u.coeffs[0] = 1.0
    with pytest.raises(AttributeError):
        u.grid = g
    src = np.zeros(16, dtype=complex)
    SpectralField(g, src)
    src[0] = 1.0  # the caller's array stays writable
