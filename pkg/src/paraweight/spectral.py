"""Periodic grid fields and the Littlewood-Paley operators ``S_k``, ``Delta_k``.

The domain is the torus ``[0, 2pi)^dim`` sampled on ``N`` points per axis.
A field is stored by its normalized Fourier coefficients

    u(x) = sum_xi  u_hat(xi) e^{i xi . x},    xi in [-N/2, N/2)^dim,

kept in numpy FFT order.  Every operator here is a Fourier multiplier, so
the dyadic calculus is exact on grid functions.  Fields may carry leading
batch axes (e.g. time slices or ensemble members); all operators broadcast
over them.
"""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.fft as sfft

from paraweight.errors import BlockSupportError, DomainError

INNER_PLATEAU = 1.1
OUTER_SUPPORT = 1.9


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``PARAWEIGHT_THREADS``."""
    raw = os.environ.get("PARAWEIGHT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _glue(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def chi(s) -> np.ndarray:
    """Even cutoff: 1 on ``|s| <= 11/10``, 0 on ``|s| >= 19/10``, smooth in between."""
    s = np.abs(np.asarray(s, dtype=float))
    q = (OUTER_SUPPORT - s) / (OUTER_SUPPORT - INNER_PLATEAU)
    a, b = _glue(q), _glue(1.0 - q)
    with np.errstate(invalid="ignore"):
        mid = a / (a + b)
    return np.where(s <= INNER_PLATEAU, 1.0, np.where(s >= OUTER_SUPPORT, 0.0, mid))


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")
        if self.N < 4 or self.N & (self.N - 1):
            raise DomainError(f"N must be a power of two >= 4, got {self.N}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def spacing(self) -> float:
        return 2.0 * math.pi / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def k_max(self) -> int:
        return int(math.ceil(math.log2(self.N * math.sqrt(self.dim)))) + 1

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        f = np.fft.fftfreq(self.N, 1.0 / self.N)
        return tuple(np.meshgrid(*([f] * self.dim), indexing="ij"))

    @cached_property
    def abs_xi(self) -> np.ndarray:
        return np.sqrt(sum(x * x for x in self.xi))

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * self.spacing
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def S_multiplier(self, k: int) -> np.ndarray:
        return _S_multiplier(self.dim, self.N, k)

    def delta_multiplier(self, k: int) -> np.ndarray:
        return _delta_multiplier(self.dim, self.N, k)


@lru_cache(maxsize=None)
def _S_multiplier(dim: int, N: int, k: int) -> np.ndarray:
    grid = TorusGrid(dim, N)
    if k < 0:
        out = np.zeros(grid.shape)
    else:
        out = chi(grid.abs_xi * 2.0**-k)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _delta_multiplier(dim: int, N: int, k: int) -> np.ndarray:
    if k < 0:
        raise DomainError("Delta_k is defined for k >= 0")
    out = _S_multiplier(dim, N, k) - _S_multiplier(dim, N, k - 1)
    out.setflags(write=False)
    return out


def to_coeffs(samples: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return sfft.fftn(samples, axes=grid.axes, norm="forward", workers=fft_workers())


def to_samples(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return sfft.ifftn(coeffs, axes=grid.axes, norm="forward", workers=fft_workers())


class SpectralField:
    """Grid function on the torus, immutable.

    ``coeffs`` has shape ``(*batch, N, ..., N)``; ``samples`` is computed
    on first access and cached.
    """

    __slots__ = ("grid", "coeffs", "_samples")

    def __init__(self, grid: TorusGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[coeffs.ndim - grid.dim :] != grid.shape:
            raise DomainError(f"coefficient shape {coeffs.shape} does not end in {grid.shape}")
        coeffs = coeffs.view()
        coeffs.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "_samples", None)

    def __setattr__(self, name, value):
        if name != "_samples":
            raise AttributeError(f"SpectralField.{name} is read-only")
        object.__setattr__(self, name, value)

    @classmethod
    def from_samples(cls, grid: TorusGrid, samples) -> "SpectralField":
        samples = np.asarray(samples)
        field = cls(grid, to_coeffs(samples, grid))
        s = np.array(samples, dtype=complex)
        s.setflags(write=False)
        field._samples = s
        return field

    @classmethod
    def from_function(cls, grid: TorusGrid, f) -> "SpectralField":
        return cls.from_samples(grid, f(*grid.nodes))

    @classmethod
    def zeros(cls, grid: TorusGrid, batch: tuple[int, ...] = ()) -> "SpectralField":
        return cls(grid, np.zeros(batch + grid.shape, dtype=complex))

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            s = to_samples(self.coeffs, self.grid)
            s.setflags(write=False)
            self._samples = s
        return self._samples

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[: self.coeffs.ndim - self.grid.dim]

    def __getitem__(self, idx) -> "SpectralField":
        """Index the batch axes."""
        if not self.batch_shape:
            raise IndexError("field has no batch axes")
        return SpectralField(self.grid, self.coeffs[idx])

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, c) -> "SpectralField":
        return self.with_coeffs(self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)

    def is_real(self, tol: float = 1e-12) -> bool:
        s = self.samples
        scale = max(float(np.max(np.abs(s))), 1.0) if s.size else 1.0
        return bool(np.max(np.abs(s.imag), initial=0.0) <= tol * scale)

    def real(self) -> "SpectralField":
        return SpectralField.from_samples(self.grid, self.samples.real)

    def __repr__(self) -> str:
        return f"SpectralField(dim={self.grid.dim}, N={self.grid.N}, batch={self.batch_shape})"


# ---------------------------------------------------------------------------
# norms and inner products
# ---------------------------------------------------------------------------


def l2_norm(u: SpectralField):
    """Coefficient-side L2 norm: ``(2pi)^{dim/2} (sum |u_hat|^2)^{1/2}``."""
    g = u.grid
    val = np.sqrt((2 * math.pi) ** g.dim * np.sum(np.abs(u.coeffs) ** 2, axis=g.axes))
    return val[()] if np.ndim(val) == 0 else val


def l2_norm_nodes(u: SpectralField):
    """Node-side L2 norm including the cell volume."""
    g = u.grid
    val = np.sqrt(g.cell_volume * np.sum(np.abs(u.samples) ** 2, axis=g.axes))
    return val[()] if np.ndim(val) == 0 else val


def inner(u: SpectralField, v: SpectralField):
    """``<u, v>_{L2} = int u conj(v) dx``."""
    g = u.grid
    val = (2 * math.pi) ** g.dim * np.sum(u.coeffs * np.conj(v.coeffs), axis=g.axes)
    return val[()] if np.ndim(val) == 0 else val


def h_norm(u: SpectralField, s: float, method: str = "direct"):
    """Sobolev ``H^s`` norm.

    ``direct``: ``(sum (1+|xi|^2)^s |u_hat|^2)^{1/2}`` with the L2 scale.
    ``lp``: ``(sum_k (2^{ks} ||Delta_k u||)^2)^{1/2}``.
    """
    g = u.grid
    if method == "direct":
        w = (1.0 + g.abs_xi**2) ** s
        val = np.sqrt((2 * math.pi) ** g.dim * np.sum(w * np.abs(u.coeffs) ** 2, axis=g.axes))
        return val[()] if np.ndim(val) == 0 else val
    if method == "lp":
        energies = block_energies(u, s)
        val = np.sqrt(np.sum(energies**2, axis=0))
        return val[()] if np.ndim(val) == 0 else val
    raise DomainError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Littlewood-Paley operators
# ---------------------------------------------------------------------------


def apply_S(u: SpectralField, k: int) -> SpectralField:
    """``S_k u = chi(2^{-k}|D|) u``; ``S_{-1} u = 0``."""
    if k < -1:
        raise DomainError("S_k is defined for k >= -1")
    return u.with_coeffs(u.coeffs * u.grid.S_multiplier(k))


def apply_delta(u: SpectralField, k: int) -> SpectralField:
    return u.with_coeffs(u.coeffs * u.grid.delta_multiplier(k))


@dataclass(frozen=True)
class DyadicDecomposition:
    blocks: tuple[SpectralField, ...]
    s_exponent: float

    @cached_property
    def block_energies(self) -> np.ndarray:
        """``delta_k = 2^{ks} ||Delta_k u||_{L2}``, indexed by k first."""
        return np.array([2.0 ** (k * self.s_exponent) * l2_norm(b) for k, b in enumerate(self.blocks)])

    def reconstruct(self) -> SpectralField:
        total = self.blocks[0].coeffs.copy()
        for b in self.blocks[1:]:
            total = total + b.coeffs
        return self.blocks[0].with_coeffs(total)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Columns ``k, delta_k`` (unbatched fields only)."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "delta_k"])
            for k, e in enumerate(self.block_energies):
                w.writerow([k, repr(float(e))])
        return path


def decompose(u: SpectralField, s: float = 0.0) -> DyadicDecomposition:
    """Blocks ``Delta_k u`` for ``k = 0..k_max``; they sum to ``u`` exactly."""
    blocks = tuple(apply_delta(u, k) for k in range(u.grid.k_max + 1))
    return DyadicDecomposition(blocks, float(s))


def block_energies(u: SpectralField, s: float) -> np.ndarray:
    return decompose(u, s).block_energies


def reconstruct(dec: DyadicDecomposition) -> SpectralField:
    return dec.reconstruct()


def block_support_annulus(k: int) -> tuple[float, float]:
    """Open annulus outside which ``Delta_k`` vanishes."""
    if k == 0:
        return (-math.inf, OUTER_SUPPORT)
    return (INNER_PLATEAU * 2.0 ** (k - 1), OUTER_SUPPORT * 2.0**k)


def support_violation(u: SpectralField, lo: float, hi: float) -> float:
    """Largest ``|u_hat(xi)|`` outside ``lo < |xi| < hi``, relative to ``max |u_hat|``."""
    mag = np.abs(u.coeffs)
    ref = float(mag.max()) if mag.size else 0.0
    if ref == 0.0:
        return 0.0
    r = u.grid.abs_xi
    outside = (r <= lo) | (r >= hi)
    return float(np.max(np.where(outside, mag, 0.0))) / ref


# ---------------------------------------------------------------------------
# derivatives, Lipschitz norm, Bernstein
# ---------------------------------------------------------------------------


def derivative(u: SpectralField, axis: int) -> SpectralField:
    """Spectral ``d/dx_axis``: multiplies coefficients by ``i xi_axis``."""
    g = u.grid
    if not 0 <= axis < g.dim:
        raise DomainError(f"axis {axis} out of range for dim {g.dim}")
    return u.with_coeffs(u.coeffs * (1j * g.xi[axis]))


def gradient(u: SpectralField) -> tuple[SpectralField, ...]:
    return tuple(derivative(u, j) for j in range(u.grid.dim))


def _grad_sup(u: SpectralField) -> float:
    mag2 = sum(np.abs(d.samples) ** 2 for d in gradient(u))
    return float(np.sqrt(np.max(mag2)))


def sup_norm(u: SpectralField):
    """Max of ``|u|`` over the nodes, per batch member."""
    val = np.max(np.abs(u.samples), axis=u.grid.axes)
    return val[()] if np.ndim(val) == 0 else val


def lip_values(a: SpectralField):
    """Batched direct Lipschitz norm ``sup|a| + sup|grad a|``."""
    mag2 = sum(np.abs(d.samples) ** 2 for d in gradient(a))
    val = sup_norm(a) + np.sqrt(np.max(mag2, axis=a.grid.axes))
    return val[()] if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class LipNorm:
    value: float
    block_decay: np.ndarray  # 2^k ||Delta_k a||_inf, k = 0..k_max


def lip_norm(a: SpectralField, method: str = "direct", tol: float = 1e-12) -> LipNorm:
    """``sup|a| + sup|grad a|`` (direct) or ``sup|a| + sup_k sup|grad S_k a|`` (lp)."""
    if a.batch_shape:
        raise DomainError("lip_norm expects an unbatched field")
    if not a.is_real(tol):
        raise DomainError("lip_norm requires a real-valued field")
    sup = float(np.max(np.abs(a.samples.real)))
    if method == "direct":
        value = sup + _grad_sup(a)
    elif method == "lp":
        value = sup + max(_grad_sup(apply_S(a, k)) for k in range(a.grid.k_max + 1))
    else:
        raise DomainError(f"unknown method {method!r}")
    decay = np.array(
        [2.0**k * float(np.max(np.abs(apply_delta(a, k).samples))) for k in range(a.grid.k_max + 1)]
    )
    return LipNorm(value, decay)


def bernstein_check(block: SpectralField, nu: int, axis: int, tol: float = 1e-14) -> float:
    """Return ``||d_axis block|| / ||block||`` after certifying the block support.

    Raises :class:`BlockSupportError` unless the coefficients vanish (to
    ``tol`` relative) on ``|xi| >= (19/10) 2^nu``.
    """
    bad = support_violation(block, -math.inf, OUTER_SUPPORT * 2.0**nu)
    if bad > tol:
        raise BlockSupportError(f"not a {nu}-block: relative mass {bad:.3e} outside |xi| < {OUTER_SUPPORT * 2.0**nu:g}")
    num = l2_norm(derivative(block, axis))
    den = l2_norm(block)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return ratio[()] if np.ndim(ratio) == 0 else ratio


# ---------------------------------------------------------------------------
# dealiased products
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _pad_index(N: int) -> np.ndarray:
    f = np.fft.fftfreq(N, 1.0 / N).astype(int)
    return np.mod(f, 2 * N)


def pad(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Embed coefficients into the ``2N`` lattice (same integer frequencies)."""
    batch = coeffs.shape[: coeffs.ndim - grid.dim]
    out = np.zeros(batch + (2 * grid.N,) * grid.dim, dtype=complex)
    idx = np.ix_(*([_pad_index(grid.N)] * grid.dim))
    out[(Ellipsis,) + idx] = coeffs
    return out


def truncate(coeffs2: np.ndarray, grid: TorusGrid) -> np.ndarray:
    idx = np.ix_(*([_pad_index(grid.N)] * grid.dim))
    return coeffs2[(Ellipsis,) + idx]


def padded_samples(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return sfft.ifftn(pad(coeffs, grid), axes=grid.axes, norm="forward", workers=fft_workers())


def from_padded_samples(samples2: np.ndarray, grid: TorusGrid) -> np.ndarray:
    c2 = sfft.fftn(samples2, axes=grid.axes, norm="forward", workers=fft_workers())
    return truncate(c2, grid)


def multiply(a: SpectralField, u: SpectralField) -> SpectralField:
    """Dealiased product: 2N zero padding, nodewise product, truncation."""
    g = u.grid
    prod = padded_samples(a.coeffs, g) * padded_samples(u.coeffs, g)
    return SpectralField(g, from_padded_samples(prod, g))


# ---------------------------------------------------------------------------
# random fields
# ---------------------------------------------------------------------------


def random_field(
    grid: TorusGrid,
    rng: np.random.Generator,
    band: int | None = None,
    decay: float = 0.0,
    real: bool = True,
    batch: tuple[int, ...] = (),
) -> SpectralField:
    """Gaussian field with ``|u_hat(xi)| ~ (1+|xi|^2)^{-decay/2}`` on ``|xi|_inf <= band``.

    Coefficients are drawn for a fixed ``(2*band+1)^dim`` lattice block, so
    the same generator state yields the same function on every grid that
    contains the band.  The Nyquist frequency is never populated.
    """
    band = grid.N // 2 - 1 if band is None else int(band)
    if band > grid.N // 2 - 1:
        raise DomainError(f"band {band} does not fit strictly inside N = {grid.N}")
    n = 2 * band + 1
    shape = batch + (n,) * grid.dim
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    f = np.arange(-band, band + 1)
    mesh = np.meshgrid(*([f] * grid.dim), indexing="ij")
    c *= (1.0 + sum(m * m for m in mesh)) ** (-decay / 2.0)
    full = np.zeros(batch + grid.shape, dtype=complex)
    idx = np.ix_(*([np.mod(f, grid.N)] * grid.dim))
    full[(Ellipsis,) + idx] = c
    if real:
        flipped = np.conj(full)
        for ax in grid.axes:
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        full = 0.5 * (full + flipped)
    return SpectralField(grid, full)


# ---------------------------------------------------------------------------
# SPF1 binary format
# ---------------------------------------------------------------------------

_MAGIC = b"SPF1"


def write_field(u: SpectralField, path: Union[str, Path]) -> Path:
    """Write samples as little-endian float64 (re, im) pairs behind a 16-byte header."""
    if u.batch_shape:
        raise DomainError("only unbatched fields can be serialized")
    path = Path(path)
    data = np.ascontiguousarray(u.samples, dtype="<c16")
    with path.open("wb") as fh:
        fh.write(_MAGIC + struct.pack("<IQ", u.grid.dim, u.grid.N))
        fh.write(data.tobytes(order="C"))
    return path


def read_field(path: Union[str, Path]) -> SpectralField:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise DomainError(f"{path}: bad magic {raw[:4]!r}")
    dim, N = struct.unpack("<IQ", raw[4:16])
    grid = TorusGrid(int(dim), int(N))
    body = np.frombuffer(raw[16:], dtype="<c16")
    if body.size != N**dim:
        raise DomainError(f"{path}: expected {N**dim} samples, found {body.size}")
    return SpectralField.from_samples(grid, body.reshape(grid.shape).astype(complex))


def stack(fields: Sequence[SpectralField]) -> SpectralField:
    """Stack unbatched fields along a new leading batch axis."""
    fields = list(fields)
    return SpectralField(fields[0].grid, np.stack([f.coeffs for f in fields]))


def unstack(u: SpectralField) -> list[SpectralField]:
    return [u[i] for i in range(u.batch_shape[0])]


def iter_blocks(u: SpectralField) -> Iterable[tuple[int, SpectralField]]:
    for k in range(u.grid.k_max + 1):
        yield k, apply_delta(u, k)
