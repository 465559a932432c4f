"""Bony's paraproduct, the shifted paraproduct ``T^m_a`` and their estimates.

    T_a u   = sum_{k>=3} S_{k-3}a Delta_k u
    T^m_a u = S_{m-1}a S_{m+1}u + sum_{k>=m+2} S_{k-3}a Delta_k u

On the grid every sum stops at ``k_max`` exactly (``Delta_k u = 0`` beyond).
Products are dealiased (see :func:`paraweight.spectral.multiply`), which
keeps the Fourier-support statements of the calculus exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from paraweight import spectral as sp
from paraweight.errors import ConfigurationError, DomainError, ThresholdNotFound
from paraweight.reports import ProbeReport, generator
from paraweight.spectral import SpectralField, TorusGrid


@dataclass(frozen=True)
class ParaproductConfig:
    m: int
    s: float
    grid: TorusGrid

    def __post_init__(self):
        if self.m < 0:
            raise ConfigurationError(f"m must be >= 0, got {self.m}")
        if self.m + 4 > self.grid.k_max:
            raise ConfigurationError(
                f"m + 4 = {self.m + 4} exceeds k_max = {self.grid.k_max} for N = {self.grid.N}"
            )
        if not 0.0 < self.s < 1.0:
            raise ConfigurationError(f"s must lie in (0, 1), got {self.s}")


def _terms(grid: TorusGrid, m: int) -> list[tuple[int, np.ndarray]]:
    """Pairs (low-pass index j, multiplier on u) making up ``T^m``."""
    out = [(m - 1, grid.S_multiplier(m + 1))]
    out += [(k - 3, grid.delta_multiplier(k)) for k in range(m + 2, grid.k_max + 1)]
    return out


class Paramultiplier:
    """``T^m_a`` with the padded low-pass samples of ``a`` precomputed.

    ``a`` must be real; it may carry batch axes that broadcast against the
    fields it is applied to (time slices, ensemble members).
    """

    def __init__(self, grid: TorusGrid, m: int, a: SpectralField, check_real: bool = True):
        if m < 0:
            raise ConfigurationError(f"m must be >= 0, got {m}")
        if check_real and not a.is_real():
            raise DomainError("paraproduct coefficient must be real")
        self.grid = grid
        self.m = m
        self.terms = _terms(grid, m)
        lows = {}
        for j, _ in self.terms:
            if j not in lows:
                lows[j] = sp.padded_samples(a.coeffs * grid.S_multiplier(j), grid).real
        self._low = lows

    def apply(self, u: SpectralField) -> SpectralField:
        g = self.grid
        acc = None
        for j, mult in self.terms:
            if j < 0:
                continue
            term = self._low[j] * sp.padded_samples(u.coeffs * mult, g)
            acc = term if acc is None else acc + term
        if acc is None:
            return u.with_coeffs(np.zeros(np.broadcast_shapes(u.coeffs.shape), dtype=complex))
        return SpectralField(g, sp.from_padded_samples(acc, g))

    def adjoint(self, v: SpectralField) -> SpectralField:
        """``S_{m+1}(S_{m-1}a v) + sum_k Delta_k(S_{k-3}a v)`` for real ``a``."""
        g = self.grid
        pv = sp.padded_samples(v.coeffs, g)
        acc = None
        for j, mult in self.terms:
            if j < 0:
                continue
            term = mult * sp.from_padded_samples(self._low[j] * pv, g)
            acc = term if acc is None else acc + term
        if acc is None:
            return v.with_coeffs(np.zeros_like(v.coeffs))
        return SpectralField(g, acc)


def bony_T(a: SpectralField, u: SpectralField) -> SpectralField:
    """``T_a u = sum_{k=3}^{k_max} S_{k-3}a Delta_k u`` term by term."""
    g = u.grid
    total = np.zeros(np.broadcast_shapes(a.coeffs.shape, u.coeffs.shape), dtype=complex)
    for k in range(3, g.k_max + 1):
        total = total + sp.multiply(sp.apply_S(a, k - 3), sp.apply_delta(u, k)).coeffs
    return SpectralField(g, total)


def bony_summands(a: SpectralField, u: SpectralField) -> dict[int, SpectralField]:
    return {k: sp.multiply(sp.apply_S(a, k - 3), sp.apply_delta(u, k)) for k in range(3, u.grid.k_max + 1)}


def modified_T(cfg: ParaproductConfig, a: SpectralField, u: SpectralField) -> SpectralField:
    return Paramultiplier(cfg.grid, cfg.m, a).apply(u)


def modified_T_adjoint(cfg: ParaproductConfig, a: SpectralField, v: SpectralField) -> SpectralField:
    return Paramultiplier(cfg.grid, cfg.m, a).adjoint(v)


def remainder(cfg: ParaproductConfig, a: SpectralField, u: SpectralField) -> SpectralField:
    """``a u - T^m_a u`` (dealiased product)."""
    return sp.multiply(a, u) - modified_T(cfg, a, u)


def adjoint_defect(cfg: ParaproductConfig, a: SpectralField, u: SpectralField, j: int) -> SpectralField:
    """``(T^m_a - (T^m_a)^*) d_j u``."""
    op = Paramultiplier(cfg.grid, cfg.m, a)
    w = sp.derivative(u, j)
    return op.apply(w) - op.adjoint(w)


# ---------------------------------------------------------------------------
# commutators
# ---------------------------------------------------------------------------


def commutator_term(
    cfg: ParaproductConfig, a: SpectralField, u: SpectralField, nu: int, j: int, h: int,
    op: Optional[Paramultiplier] = None,
) -> SpectralField:
    """``d_j([Delta_nu, T^m_a] d_h u)``."""
    if not 0 <= nu <= cfg.grid.k_max:
        raise DomainError(f"nu must lie in [0, {cfg.grid.k_max}]")
    op = op or Paramultiplier(cfg.grid, cfg.m, a)
    w = sp.derivative(u, h)
    comm = sp.apply_delta(op.apply(w), nu) - op.apply(sp.apply_delta(w, nu))
    return sp.derivative(comm, j)


@dataclass(frozen=True)
class CommutatorPieces:
    head: SpectralField
    annulus: dict[int, SpectralField]

    def total(self) -> SpectralField:
        out = self.head
        for t in self.annulus.values():
            out = out + t
        return out


def commutator_pieces(
    cfg: ParaproductConfig, a: SpectralField, u: SpectralField, nu: int, j: int, h: int
) -> CommutatorPieces:
    """Split the commutator into the head term and one term per annulus ``k``.

    head      = d_j([Delta_nu, S_{m-1}a] S_{m+1} d_h u)
    annulus_k = d_j([Delta_nu, S_{k-3}a] Delta_k d_h u),   k >= m+2
    """
    g = cfg.grid
    w = sp.derivative(u, h)

    def bracket(low: SpectralField, mult: np.ndarray) -> SpectralField:
        x = w.with_coeffs(w.coeffs * mult)
        c = sp.apply_delta(sp.multiply(low, x), nu) - sp.multiply(low, sp.apply_delta(x, nu))
        return sp.derivative(c, j)

    head = bracket(sp.apply_S(a, cfg.m - 1), g.S_multiplier(cfg.m + 1))
    annulus = {
        k: bracket(sp.apply_S(a, k - 3), g.delta_multiplier(k)) for k in range(cfg.m + 2, g.k_max + 1)
    }
    return CommutatorPieces(head, annulus)


def commutator_lhs(cfg: ParaproductConfig, a: SpectralField, u: SpectralField, j: int, h: int):
    """``(sum_nu 2^{-2 nu s} ||d_j([Delta_nu, T^m_a] d_h u)||^2)^{1/2}``."""
    op = Paramultiplier(cfg.grid, cfg.m, a, check_real=False)
    total = 0.0
    for nu in range(cfg.grid.k_max + 1):
        t = commutator_term(cfg, a, u, nu, j, h, op=op)
        total = total + 2.0 ** (-2 * nu * cfg.s) * sp.l2_norm(t) ** 2
    return np.sqrt(total)


# ---------------------------------------------------------------------------
# coefficient matrices and positivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientMatrix:
    """Real symmetric, pointwise elliptic matrix of fields ``a_jk``.

    Entries may carry a batch axis (time slices); symmetry is enforced by
    storing a single object for ``a_jk`` and ``a_kj``.
    """

    entries: tuple[tuple[SpectralField, ...], ...]
    lambda0: float
    recipe: str = ""

    def __post_init__(self):
        d = len(self.entries)
        if any(len(row) != d for row in self.entries):
            raise ConfigurationError("coefficient matrix must be square")
        if not 0.0 < self.lambda0 <= 1.0:
            raise ConfigurationError(f"lambda0 must lie in (0, 1], got {self.lambda0}")
        for j in range(d):
            for k in range(j + 1, d):
                if self.entries[j][k] is not self.entries[k][j] and not np.array_equal(
                    self.entries[j][k].coeffs, self.entries[k][j].coeffs
                ):
                    raise ConfigurationError(f"a_{j}{k} != a_{k}{j}")
        for row in self.entries:
            for e in row:
                if not e.is_real():
                    raise ConfigurationError("coefficients must be real")
        floor = self.min_eigenvalue()
        if floor < self.lambda0 - 1e-12:
            raise ConfigurationError(f"ellipticity fails: min eigenvalue {floor:.6g} < lambda0 = {self.lambda0}")

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def grid(self) -> TorusGrid:
        return self.entries[0][0].grid

    def min_eigenvalue(self) -> float:
        d = self.size
        vals = [[np.asarray(self.entries[j][k].samples.real) for k in range(d)] for j in range(d)]
        shape = np.broadcast_shapes(*(v.shape for row in vals for v in row))
        mat = np.empty(shape + (d, d))
        for j in range(d):
            for k in range(d):
                mat[..., j, k] = np.broadcast_to(vals[j][k], shape)
        return float(np.linalg.eigvalsh(mat).min())

    def lip(self) -> float:
        return float(max(np.max(sp.lip_values(e)) for row in self.entries for e in row))

    @classmethod
    def scalar_times_identity(cls, a: SpectralField, dim: int, lambda0: float, recipe: str = "") -> "CoefficientMatrix":
        zero = a.with_coeffs(np.zeros_like(a.coeffs))
        rows = tuple(tuple(a if j == k else zero for k in range(dim)) for j in range(dim))
        return cls(rows, lambda0, recipe)

    @classmethod
    def identity(cls, grid: TorusGrid) -> "CoefficientMatrix":
        one = SpectralField.from_samples(grid, np.ones(grid.shape))
        return cls.scalar_times_identity(one, grid.dim, 1.0, "identity")


def _as_vector_ensemble(ensemble: SpectralField, d: int) -> SpectralField:
    bs = ensemble.batch_shape
    if d == 1 and len(bs) == 1:
        return ensemble.with_coeffs(ensemble.coeffs[:, None])
    if len(bs) != 2 or bs[1] != d:
        raise DomainError(f"ensemble batch shape {bs} is not (members, {d})")
    return ensemble


def positivity_ratios(A: CoefficientMatrix, ensemble: SpectralField, m: int) -> np.ndarray:
    """Per-member ``Re sum_jk <T^m_{a_jk} u_k, u_j> / ||u||^2``."""
    d = A.size
    U = _as_vector_ensemble(ensemble, d)
    g = A.grid
    num = 0.0
    for j in range(d):
        for k in range(d):
            op = Paramultiplier(g, m, A.entries[j][k])
            num = num + sp.inner(op.apply(U[:, k]), U[:, j]).real
    den = sum(sp.l2_norm(U[:, j]) ** 2 for j in range(d))
    return num / den


@dataclass(frozen=True)
class PositivityResult:
    m: int
    target: float
    profile: dict[int, float]
    verified_profile: dict[int, float] = field(default_factory=dict)


def find_positive_m(
    A: CoefficientMatrix,
    ensemble: SpectralField,
    m_max: int,
    verify_ensemble: Optional[SpectralField] = None,
) -> PositivityResult:
    """Smallest ``m <= m_max`` with ``min Re<T^m_A u, u> >= (lambda0/2) ||u||^2``.

    Scans upward from ``m = 0``.  When ``verify_ensemble`` is given, a
    candidate must also pass on it; otherwise the scan continues.
    Raises :class:`ThresholdNotFound` with the margin profile.
    """
    target = A.lambda0 / 2.0
    top = min(m_max, A.grid.k_max - 4)
    profile: dict[int, float] = {}
    verified: dict[int, float] = {}
    for m in range(0, top + 1):
        profile[m] = float(np.min(positivity_ratios(A, ensemble, m)))
        if profile[m] < target:
            continue
        if verify_ensemble is not None:
            verified[m] = float(np.min(positivity_ratios(A, verify_ensemble, m)))
            if verified[m] < target:
                continue
        return PositivityResult(m, target, profile, verified)
    raise ThresholdNotFound(profile, target)


# ---------------------------------------------------------------------------
# ensemble probes
# ---------------------------------------------------------------------------

A_BAND = 16


def lipschitz_ensemble(
    grid: TorusGrid, seed: int, size: int, stream: int = 0, band: int = A_BAND
) -> SpectralField:
    """Smooth real coefficients on a fixed band (identical across resolutions)."""
    return sp.random_field(grid, generator(seed, 1, stream), band=band, decay=2.0, batch=(size,))


def field_ensemble(grid: TorusGrid, seed: int, size: int, stream: int = 0, decay: float = 0.0) -> SpectralField:
    """White-ish real fields filling the lower half of the spectrum."""
    return sp.random_field(grid, generator(seed, 2, stream), band=grid.N // 4, decay=decay, batch=(size,))


def positivity_ensemble(grid: TorusGrid, seed: int, size: int, stream: int = 0) -> SpectralField:
    """Vector fields ``(members, dim)`` with a ``|xi|^-1`` amplitude decay.

    The decay keeps substantial mass in the lowest blocks, which is where a
    too-small shift ``m`` loses positivity.
    """
    comps = [
        sp.random_field(grid, generator(seed, 4, stream, j), band=grid.N // 4, decay=1.0, batch=(size,)).coeffs
        for j in range(grid.dim)
    ]
    return SpectralField(grid, np.stack(comps, axis=1))


def _estT_ratio(cfg, a, u):
    T = Paramultiplier(cfg.grid, cfg.m, a, check_real=False).apply(u)
    return sp.h_norm(T, cfg.s) / (sp.sup_norm(a) * sp.h_norm(u, cfg.s))


def _remainder_ratio(cfg, a, u):
    op = Paramultiplier(cfg.grid, cfg.m, a, check_real=False)
    r = sp.multiply(a, u) - op.apply(u)
    return sp.h_norm(r, 1.0 - cfg.s) / (sp.lip_values(a) * sp.h_norm(u, -cfg.s))


def _commutator_ratio(cfg, a, u):
    d = cfg.grid.dim
    lhs = np.max([commutator_lhs(cfg, a, u, j, h) for j in range(d) for h in range(d)], axis=0)
    return lhs / (sp.lip_values(a) * sp.h_norm(u, 1.0 - cfg.s))


def _adjoint_ratio(cfg, a, u):
    op = Paramultiplier(cfg.grid, cfg.m, a, check_real=False)
    out = 0.0
    for j in range(cfg.grid.dim):
        w = sp.derivative(u, j)
        out = np.maximum(out, sp.l2_norm(op.apply(w) - op.adjoint(w)))
    return out / (sp.lip_values(a) * sp.l2_norm(u))


PROBES = {
    "estT_a": _estT_ratio,
    "a-Ta": _remainder_ratio,
    "estcomm": _commutator_ratio,
    "adj": _adjoint_ratio,
}


def measure_probe(
    inequality: str,
    m: int,
    s: float,
    dim: int,
    resolutions: Sequence[int],
    seed: int,
    size: int,
    coefficients: Optional[Iterable[SpectralField]] = None,
) -> ProbeReport:
    """Max ratio over a seeded ensemble at each resolution.

    ``estT_a`` uses coefficients normalized to ``||a||_inf = 1``.  When
    ``coefficients`` is given it must yield one (possibly batched) field per
    resolution, replacing the random coefficient ensemble.
    """
    fn = PROBES[inequality]
    coeff_iter = iter(coefficients) if coefficients is not None else None
    rows = []
    band = min(A_BAND, min(resolutions) // 4)
    for N in resolutions:
        grid = TorusGrid(dim, N)
        cfg = ParaproductConfig(m, s, grid)
        if coeff_iter is None:
            a = lipschitz_ensemble(grid, seed, size, band=band)
            if inequality == "estT_a":
                a = a * (1.0 / sp.sup_norm(a)).reshape((size,) + (1,) * dim)
        else:
            a = next(coeff_iter)
        u = field_ensemble(grid, seed, size)
        ratios = np.atleast_1d(fn(cfg, a, u))
        rows.append({"N": N, "constant": float(np.max(ratios)), "median": float(np.median(ratios))})
    return ProbeReport.from_resolutions(inequality, rows, m=m, s=s, dim=dim, ensemble=size, seed=seed)


# ---------------------------------------------------------------------------
# single-mode sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeSweep:
    """Gained (measured constant) versus naive ratios along ``u = e^{iMx}``."""

    modes: tuple[int, ...]
    gained: tuple[float, ...]
    naive: tuple[float, ...]

    def naive_slope(self) -> float:
        """Least-squares slope of log(naive) against log(M)."""
        x = np.log(self.modes)
        y = np.log(self.naive)
        return float(np.polyfit(x, y, 1)[0])


def mode_sweep(inequality: str, cfg: ParaproductConfig, a: SpectralField, modes: Sequence[int]) -> ModeSweep:
    """Sweep single modes ``e^{iMx_1}`` through one of ``a-Ta``, ``estcomm``, ``adj``.

    The naive ratio drops the gained derivative: ``||a u||_{H^{1-s}} /
    ||u||_{H^{-s}}`` for the remainder, ``(sum_nu 2^{-2nu s}||d_j Delta_nu T
    d_h u||^2)^{1/2} / ||u||_{H^{1-s}}`` for the commutator and ``||T d_j
    u|| / ||u||`` for the adjoint defect.
    """
    g = cfg.grid
    lip = float(sp.lip_values(a))
    gained, naive = [], []
    op = Paramultiplier(g, cfg.m, a)
    for M in modes:
        if not 0 < M < g.N // 2:
            raise DomainError(f"mode {M} does not fit on N = {g.N}")
        u = SpectralField.from_function(g, lambda *x, M=M: np.exp(1j * M * x[0]))
        if inequality == "a-Ta":
            gained.append(float(_remainder_ratio(cfg, a, u)))
            naive.append(float(sp.h_norm(sp.multiply(a, u), 1 - cfg.s) / sp.h_norm(u, -cfg.s)))
        elif inequality == "estcomm":
            gained.append(float(_commutator_ratio(cfg, a, u)))
            w = op.apply(sp.derivative(u, 0))
            tot = sum(
                2.0 ** (-2 * nu * cfg.s) * sp.l2_norm(sp.derivative(sp.apply_delta(w, nu), 0)) ** 2
                for nu in range(g.k_max + 1)
            )
            naive.append(float(math.sqrt(tot) / sp.h_norm(u, 1 - cfg.s)))
        elif inequality == "adj":
            gained.append(float(_adjoint_ratio(cfg, a, u)))
            naive.append(float(sp.l2_norm(op.apply(sp.derivative(u, 0))) / (lip * sp.l2_norm(u))))
        else:
            raise DomainError(f"no mode sweep for {inequality!r}")
    return ModeSweep(tuple(int(M) for M in modes), tuple(gained), tuple(naive))
