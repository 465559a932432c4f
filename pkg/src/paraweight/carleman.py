"""Space-time fields, the backward parabolic operator and Carleman probes.

    L = d_t + sum_jk d_j(a_jk d_k) + sum_j b_j d_j + c

Time is a uniform grid on ``[0, T]``; space is a :class:`TorusGrid`.  A
space-time field is a :class:`SpectralField` whose single batch axis
indexes time.  Time derivatives are second-order finite differences
(centered inside, one-sided at the ends).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, ndimage

from paraweight import spectral as sp
from paraweight.errors import BlockSupportError, ConfigurationError, DomainError, PreconditionError
from paraweight.modulus import CarlemanWeight, Modulus, get_modulus
from paraweight.paraproduct import CoefficientMatrix, Paramultiplier
from paraweight.reports import generator
from paraweight.spectral import SpectralField, TorusGrid

C_FLOOR = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if self.M < 64:
            raise ConfigurationError(f"time grid needs M >= 64 samples, got {self.M}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")

    @property
    def dt(self) -> float:
        return self.T / (self.M - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M)


@dataclass(frozen=True)
class SpaceTimeField:
    time_grid: TimeGrid
    field: SpectralField

    def __post_init__(self):
        if self.field.batch_shape != (self.time_grid.M,):
            raise ConfigurationError(
                f"field batch {self.field.batch_shape} does not match M = {self.time_grid.M}"
            )

    @property
    def grid(self) -> TorusGrid:
        return self.field.grid

    @property
    def coeffs(self) -> np.ndarray:
        return self.field.coeffs

    def slice(self, i: int) -> SpectralField:
        return self.field[i]

    @classmethod
    def separable(cls, tg: TimeGrid, profile, space: SpectralField) -> "SpaceTimeField":
        """``profile(t) * space(x)``."""
        p = np.asarray(profile(tg.t) if callable(profile) else profile, dtype=float)
        coeffs = p.reshape((-1,) + (1,) * space.grid.dim) * space.coeffs
        return cls(tg, SpectralField(space.grid, coeffs))

    def with_field(self, f: SpectralField) -> "SpaceTimeField":
        return SpaceTimeField(self.time_grid, f)


def time_derivative(coeffs: np.ndarray, dt: float) -> np.ndarray:
    return np.gradient(coeffs, dt, axis=0, edge_order=2)


# ---------------------------------------------------------------------------
# mollification in time
# ---------------------------------------------------------------------------


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 0.5
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * s[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def _rho_normalizer() -> float:
    val, _ = integrate.quad(lambda s: float(_bump(np.array(s))), -0.5, 0.5, epsabs=1e-14, epsrel=1e-13)
    return 1.0 / val


def rho(s) -> np.ndarray:
    """Even bump supported in ``[-1/2, 1/2]`` with unit integral."""
    return _rho_normalizer() * _bump(s)


@dataclass(frozen=True)
class MollifierKernel:
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.5:
            raise ConfigurationError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")

    def weights(self, dt: float) -> np.ndarray:
        """Discrete kernel on the time grid, renormalized to unit sum."""
        if self.epsilon / dt < 4.0:
            raise ConfigurationError(f"epsilon/dt = {self.epsilon / dt:.3g} < 4: kernel unresolved")
        L = int(math.floor(0.5 * self.epsilon / dt))
        w = rho(np.arange(-L, L + 1) * dt / self.epsilon)
        return w / w.sum()


def mollify_samples(values: np.ndarray, dt: float, kernel: MollifierKernel) -> np.ndarray:
    """Convolve along axis 0, continuing the data by its end values."""
    w = kernel.weights(dt)
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return mollify_samples(values.real, dt, kernel) + 1j * mollify_samples(values.imag, dt, kernel)
    return ndimage.convolve1d(values, w, axis=0, mode="nearest")


def mollify_time(a: SpaceTimeField, kernel: MollifierKernel) -> SpaceTimeField:
    tg = a.time_grid
    samples = mollify_samples(a.field.samples, tg.dt, kernel)
    return a.with_field(SpectralField.from_samples(a.grid, samples))


@dataclass(frozen=True)
class MollificationProbe:
    epsilons: tuple[float, ...]
    sup_error: tuple[float, ...]
    sup_derivative: tuple[float, ...]
    c_error: tuple[float, ...]  # sup|a_eps - a| / mu(eps)
    c_derivative: tuple[float, ...]  # sup|d_t a_eps| eps / mu(eps)

    def spread(self) -> tuple[float, float]:
        """max/min of each measured constant across epsilons."""
        e = np.asarray(self.c_error)
        d = np.asarray(self.c_derivative)
        return float(e.max() / e.min()), float(d.max() / d.min())


def mollification_probe(
    profile, mu: Modulus, tg: TimeGrid, epsilons: Sequence[float]
) -> MollificationProbe:
    """Measure the constants of ``|a_eps - a| <= C mu(eps)`` and ``|d_t a_eps| <= C mu(eps)/eps``."""
    t = tg.t
    a = np.asarray(profile(t), dtype=float)
    errs, ders, ce, cd = [], [], [], []
    for eps in epsilons:
        a_eps = mollify_samples(a, tg.dt, MollifierKernel(eps))
        err = float(np.max(np.abs(a_eps - a)))
        der = float(np.max(np.abs(time_derivative(a_eps, tg.dt))))
        m = float(mu(eps))
        errs.append(err)
        ders.append(der)
        ce.append(err / m)
        cd.append(der * eps / m)
    return MollificationProbe(tuple(map(float, epsilons)), tuple(errs), tuple(ders), tuple(ce), tuple(cd))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def _check_coefficients(u: SpaceTimeField, A: CoefficientMatrix):
    if A.grid != u.grid:
        raise ConfigurationError(f"coefficient grid {A.grid} differs from field grid {u.grid}")
    if A.size != u.grid.dim:
        raise ConfigurationError(f"{A.size}x{A.size} matrix on a {u.grid.dim}-d grid")
    for row in A.entries:
        for e in row:
            if e.batch_shape not in ((), (u.time_grid.M,)):
                raise ConfigurationError(
                    f"coefficient batch {e.batch_shape} is not aligned with M = {u.time_grid.M}"
                )


def principal_part(u: SpectralField, A: CoefficientMatrix) -> SpectralField:
    """``sum_jk d_j(a_jk d_k u)`` with dealiased products."""
    out = None
    d = A.size
    grads = sp.gradient(u)
    for j in range(d):
        inner_sum = None
        for k in range(d):
            a = A.entries[j][k]
            if not np.any(a.coeffs):
                continue
            term = sp.multiply(a, grads[k])
            inner_sum = term if inner_sum is None else inner_sum + term
        if inner_sum is None:
            continue
        t = sp.derivative(inner_sum, j)
        out = t if out is None else out + t
    return out if out is not None else u * 0.0


def para_principal_part(u: SpectralField, A: CoefficientMatrix, m: int) -> SpectralField:
    """``sum_jk d_j(T^m_{a_jk} d_k u)``."""
    out = None
    d = A.size
    grads = sp.gradient(u)
    for j in range(d):
        for k in range(d):
            a = A.entries[j][k]
            if not np.any(a.coeffs):
                continue
            t = sp.derivative(Paramultiplier(u.grid, m, a).apply(grads[k]), j)
            out = t if out is None else out + t
    return out if out is not None else u * 0.0


def apply_L(
    u: SpaceTimeField,
    A: CoefficientMatrix,
    b: Optional[Sequence[SpectralField]] = None,
    c: Optional[SpectralField] = None,
) -> SpaceTimeField:
    if u.time_grid.M < 3:
        raise ConfigurationError("apply_L needs at least 3 time samples")
    _check_coefficients(u, A)
    out = time_derivative(u.coeffs, u.time_grid.dt) + principal_part(u.field, A).coeffs
    if b is not None:
        if len(b) != u.grid.dim:
            raise ConfigurationError(f"need {u.grid.dim} drift fields, got {len(b)}")
        for j, bj in enumerate(b):
            out = out + sp.multiply(bj, sp.derivative(u.field, j)).coeffs
    if c is not None:
        out = out + sp.multiply(c, u.field).coeffs
    return u.with_field(SpectralField(u.grid, out))


def apply_P_para(u: SpaceTimeField, A: CoefficientMatrix, cfg: Union["CarlemanProbeConfig", int]) -> SpaceTimeField:
    """``d_t u + sum_jk d_j(T^m_{a_jk} d_k u)``; the weight term is added by the probes.

    ``cfg`` is a probe config or the shift ``m`` itself.
    """
    m = cfg if isinstance(cfg, (int, np.integer)) else cfg.m
    if u.time_grid.M < 3:
        raise ConfigurationError("apply_P_para needs at least 3 time samples")
    _check_coefficients(u, A)
    out = time_derivative(u.coeffs, u.time_grid.dt) + para_principal_part(u.field, A, m).coeffs
    return u.with_field(SpectralField(u.grid, out))


def para_difference_ratio(u: SpaceTimeField, A: CoefficientMatrix, m: int, s: float) -> np.ndarray:
    """Per slice ``||(L - P_para) u||_{H^{-s}} / (||A||_Lip ||grad u||_{H^{-s}})``."""
    diff = principal_part(u.field, A) - para_principal_part(u.field, A, m)
    num = sp.h_norm(diff, -s)
    den = A.lip() * np.sqrt(sum(sp.h_norm(g, -s) ** 2 for g in sp.gradient(u.field)))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


# ---------------------------------------------------------------------------
# coefficient recipes
# ---------------------------------------------------------------------------


def rough_time_profile(mu: Modulus, tg: TimeGrid) -> tuple[np.ndarray, str]:
    """Lacunary series ``sum_j mu(4^-j) cos(2 pi 4^j t / T)`` scaled to ``|theta| <= 1``.

    Frequencies stop at ``4^j <= M/16`` so every oscillation is resolved.
    """
    J = max(1, int(math.floor(math.log(tg.M / 16.0, 4))))
    amps = np.array([float(mu(4.0**-j)) for j in range(1, J + 1)])
    total = amps.sum()
    t = tg.t
    theta = sum(a * np.cos(2 * math.pi * 4.0**j * t / tg.T) for j, a in enumerate(amps, start=1)) / total
    recipe = f"theta(t)=sum_{{j=1}}^{{{J}}} {mu.name}(4^-j) cos(2pi 4^j t/T) / {total:.17g}"
    return theta, recipe


def coefficient_recipe(name: str, grid: TorusGrid, tg: Optional[TimeGrid] = None) -> CoefficientMatrix:
    """Named coefficient matrices: ``identity``, ``scalar:2+sin``, ``rough-in-time:<modulus>``."""
    key = name.strip().lower()
    if key == "identity":
        return CoefficientMatrix.identity(grid)
    if key == "scalar:2+sin":
        a = SpectralField.from_function(grid, lambda *x: 2.0 + np.sin(x[0]))
        return CoefficientMatrix.scalar_times_identity(a, grid.dim, 1.0, "(2+sin x_1) Id")
    if key.startswith("rough-in-time:"):
        if tg is None:
            raise ConfigurationError("rough-in-time coefficients need a time grid")
        mu = get_modulus(key.split(":", 1)[1])
        theta, recipe = rough_time_profile(mu, tg)
        one = SpectralField.from_samples(grid, np.ones(grid.shape))
        a = SpectralField(grid, (2.0 + theta).reshape((-1,) + (1,) * grid.dim) * one.coeffs)
        return CoefficientMatrix.scalar_times_identity(a, grid.dim, 1.0, f"(2+theta(t)) Id; {recipe}")
    raise ConfigurationError(f"unknown coefficient recipe {name!r}")


# ---------------------------------------------------------------------------
# Carleman probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CarlemanProbeConfig:
    s: float
    gamma_list: tuple[float, ...]
    weight: CarlemanWeight
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ConfigurationError(f"s must lie in (0, 1), got {self.s}")
        g = np.asarray(self.gamma_list, dtype=float)
        if g.size and (np.any(g <= 0) or np.any(np.diff(g) <= 0)):
            raise ConfigurationError("gamma_list must be positive and increasing")


def test_bump(t, T: float) -> np.ndarray:
    """The cutoff profile rescaled to a smooth bump supported in ``[T/8, 3T/8]``."""
    return sp.chi(sp.OUTER_SUPPORT * (np.asarray(t, dtype=float) - T / 4.0) / (T / 8.0))


def single_mode_ensemble(grid: TorusGrid, tg: TimeGrid, modes: Sequence[int]) -> list[SpaceTimeField]:
    out = []
    for M in modes:
        space = SpectralField.from_function(grid, lambda *x, M=M: np.exp(1j * M * x[0]))
        out.append(SpaceTimeField.separable(tg, lambda t: test_bump(t, tg.T), space))
    return out


def random_ensemble(grid: TorusGrid, tg: TimeGrid, seed: int, size: int, band: int = 16) -> list[SpaceTimeField]:
    out = []
    for i in range(size):
        space = sp.random_field(grid, generator(seed, 3, i), band=band, decay=1.0)
        out.append(SpaceTimeField.separable(tg, lambda t: test_bump(t, tg.T), space))
    return out


def _check_support(u: SpaceTimeField, atol: float = 1e-14):
    t = u.time_grid.t
    late = np.flatnonzero(t > u.time_grid.T / 2.0 + 1e-12)
    if late.size:
        mags = np.max(np.abs(u.field.samples[late]).reshape(late.size, -1), axis=1)
        bad = np.flatnonzero(mags > atol)
        if bad.size:
            i = late[bad[0]]
            raise PreconditionError(
                f"u is not supported in [0, T/2]: |u| = {mags[bad[0]]:.3e} at time sample {i} (t = {t[i]:.6g})"
            )


def _check_gamma(weight: CarlemanWeight, gamma: float, T: float):
    if gamma * T > weight.tau_max + 1e-12:
        raise DomainError(f"weight domain: gamma*T = {gamma * T:.6g} exceeds tau_max = {weight.tau_max:.6g}")


@dataclass(frozen=True)
class SliceNorms:
    """Per-time-sample ``H^{-s}`` norms squared on ``[0, T/2]``."""

    t: np.ndarray
    Lu: np.ndarray
    grad: np.ndarray
    u: np.ndarray


def slice_norms(u: SpaceTimeField, s: float, A: CoefficientMatrix) -> SliceNorms:
    _check_support(u)
    Lu = apply_L(u, A)
    keep = u.time_grid.t <= u.time_grid.T / 2.0 + 1e-12
    f = u.field
    lu = sp.h_norm(Lu.field, -s) ** 2
    gr = sum(sp.h_norm(g, -s) ** 2 for g in sp.gradient(f))
    uu = sp.h_norm(f, -s) ** 2
    return SliceNorms(u.time_grid.t[keep], lu[keep], np.asarray(gr)[keep], uu[keep])


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    h = np.diff(t)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


@dataclass(frozen=True)
class CarlemanSides:
    """Weighted integrals, each scaled by ``exp(-log_scale)``.

    True values are ``lhs * exp(log_scale)`` etc.; the ratio ``c`` is
    scale-free.
    """

    lhs: float
    rhs_grad: float
    rhs_l2: float
    log_scale: float
    gamma: float

    @property
    def c(self) -> float:
        den = math.sqrt(self.gamma) * self.rhs_grad + self.gamma * self.rhs_l2
        return self.lhs / den if den > 0 else math.inf

    def unscaled(self) -> tuple[float, float, float]:
        f = math.exp(self.log_scale)
        return self.lhs * f, self.rhs_grad * f, self.rhs_l2 * f


def _log_weights(weight: CarlemanWeight, gamma: float, T: float, t: np.ndarray) -> np.ndarray:
    return 2.0 * weight.Phi(gamma * (T - t)) / gamma


def sides_from_norms(norms: SliceNorms, gamma: float, weight: CarlemanWeight, T: float) -> CarlemanSides:
    _check_gamma(weight, gamma, T)
    lw = _log_weights(weight, gamma, T, norms.t)
    active = (norms.Lu > 0) | (norms.grad > 0) | (norms.u > 0)
    if not active.any():
        return CarlemanSides(0.0, 0.0, 0.0, 0.0, gamma)
    scale = float(np.max(lw[active]))
    q = _trapezoid_weights(norms.t) * np.exp(np.where(active, lw - scale, -np.inf))
    return CarlemanSides(
        float(np.sum(q * norms.Lu)), float(np.sum(q * norms.grad)), float(np.sum(q * norms.u)), scale, gamma
    )


def carleman_sides(
    u: SpaceTimeField, gamma: float, cfg: CarlemanProbeConfig, A: Optional[CoefficientMatrix] = None
) -> CarlemanSides:
    """Both sides of the weighted ``H^{-s}`` Carleman inequality for ``u``."""
    A = A or CoefficientMatrix.identity(u.grid)
    _check_gamma(cfg.weight, gamma, u.time_grid.T)
    return sides_from_norms(slice_norms(u, cfg.s, A), gamma, cfg.weight, u.time_grid.T)


def conjugated_lhs(
    u: SpaceTimeField, gamma: float, cfg: CarlemanProbeConfig, A: Optional[CoefficientMatrix] = None
) -> CarlemanSides:
    """Left side for ``v = e^{Phi(gamma(T-t))/gamma} u``: ``int ||d_t v + sum d_j(a d_k v) + Phi' v||^2``.

    ``d_t v`` is formed by the product rule from the discrete ``d_t u`` and
    the exact derivative of the weight.  Uses the same scale as
    :func:`carleman_sides`.
    """
    A = A or CoefficientMatrix.identity(u.grid)
    tg = u.time_grid
    _check_gamma(cfg.weight, gamma, tg.T)
    ref = carleman_sides(u, gamma, cfg, A)
    keep = tg.t <= tg.T / 2.0 + 1e-12
    t = tg.t[keep]
    tau = gamma * (tg.T - t)
    half = (cfg.weight.Phi(tau) / gamma - 0.5 * ref.log_scale).reshape((-1,) + (1,) * u.grid.dim)
    e = np.exp(half)
    dudt = time_derivative(u.coeffs, tg.dt)[keep]
    uk = u.coeffs[keep]
    dvdt = e * (dudt - cfg.weight.Phi_prime(tau).reshape(half.shape) * uk)
    v = SpectralField(u.grid, e * uk)
    total = dvdt + principal_part(v, A if not _time_dependent(A) else _restrict(A, keep)).coeffs
    total = total + cfg.weight.Phi_prime(tau).reshape(half.shape) * v.coeffs
    norms = sp.h_norm(SpectralField(u.grid, total), -cfg.s) ** 2
    lhs = float(np.sum(_trapezoid_weights(t) * norms))
    return CarlemanSides(lhs, ref.rhs_grad, ref.rhs_l2, ref.log_scale, gamma)


def _time_dependent(A: CoefficientMatrix) -> bool:
    return any(e.batch_shape for row in A.entries for e in row)


def _restrict(A: CoefficientMatrix, keep: np.ndarray) -> CoefficientMatrix:
    rows = tuple(tuple(e[keep] if e.batch_shape else e for e in row) for row in A.entries)
    return CoefficientMatrix(rows, A.lambda0, A.recipe)


def select_gamma0(weight: CarlemanWeight, gammas: Sequence[float], T: float, M: int = 257) -> float:
    """Smallest ``gamma`` with ``Phi''(gamma(T-t)) >= 1`` on ``t in [0, T/2]``."""
    t = np.linspace(0.0, T / 2.0, M)
    for g in gammas:
        _check_gamma(weight, g, T)
        if np.all(weight.Phi_second(g * (T - t)) >= 1.0 - 1e-12):
            return float(g)
    raise DomainError("no gamma in the sweep satisfies Phi'' >= 1 on [0, T/2]")


@dataclass(frozen=True)
class GammaSweep:
    gammas: tuple[float, ...]
    min_c: tuple[float, ...]
    argmin: tuple[int, ...]
    gamma0: float
    verdict: str
    # largest change of 2 Phi / gamma between adjacent samples where u != 0;
    # values far above 1 mean the weight is not resolved by the time grid
    max_log_jump: tuple[float, ...] = ()

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["gamma", "min_c", "argmin_member"])
            for g, c, i in zip(self.gammas, self.min_c, self.argmin):
                w.writerow([repr(float(g)), repr(float(c)), int(i)])
        return path


def gamma_sweep(
    ensemble: Sequence[SpaceTimeField], cfg: CarlemanProbeConfig, A: Optional[CoefficientMatrix] = None
) -> GammaSweep:
    """Minimum over the ensemble of ``c(gamma)`` for each ``gamma`` in the config."""
    if not ensemble:
        raise ConfigurationError("empty ensemble")
    tg = ensemble[0].time_grid
    A = A or CoefficientMatrix.identity(ensemble[0].grid)
    for g in cfg.gamma_list:
        _check_gamma(cfg.weight, g, tg.T)
    gamma0 = select_gamma0(cfg.weight, cfg.gamma_list, tg.T)
    norms = [slice_norms(u, cfg.s, A) for u in ensemble]
    support = np.logical_or.reduce([n.u > 0 for n in norms])
    mins, args, jumps = [], [], []
    for g in cfg.gamma_list:
        cs = [sides_from_norms(n, g, cfg.weight, tg.T).c for n in norms]
        i = int(np.argmin(cs))
        mins.append(float(cs[i]))
        args.append(i)
        lw = _log_weights(cfg.weight, g, tg.T, norms[0].t)[support]
        jumps.append(float(np.max(np.abs(np.diff(lw)))) if lw.size > 1 else 0.0)
    ok = all(c >= C_FLOOR for g, c in zip(cfg.gamma_list, mins) if g >= gamma0)
    return GammaSweep(
        tuple(map(float, cfg.gamma_list)), tuple(mins), tuple(args), gamma0, "pass" if ok else "fail", tuple(jumps)
    )


# ---------------------------------------------------------------------------
# block-level ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerRow:
    inequality: str
    t: float  # nan for time-integrated rows
    lhs: float
    rhs: float
    holds: bool
    note: str = ""


@dataclass
class ProofLedger:
    nu: int
    gamma: float
    epsilon: float
    rows: list[LedgerRow] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    def add(self, name, t, lhs, rhs, holds, note=""):
        self.rows.append(LedgerRow(name, float(t), float(lhs), float(rhs), bool(holds), note))

    def holds(self, name: str) -> bool:
        rows = [r for r in self.rows if r.inequality == name]
        if not rows:
            raise KeyError(name)
        return all(r.holds for r in rows)

    def names(self) -> list[str]:
        return sorted({r.inequality for r in self.rows})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["inequality", "t", "lhs", "rhs", "holds", "note"])
            for r in self.rows:
                w.writerow([r.inequality, repr(r.t), repr(r.lhs), repr(r.rhs), int(r.holds), r.note])
        return path


def _ge(lhs, rhs, rtol=1e-10):
    return lhs >= rhs - rtol * max(abs(lhs), abs(rhs), 1e-300)


def proof_ledger_probe(
    v_block: SpectralField,
    nu: int,
    gamma: float,
    cfg: CarlemanProbeConfig,
    A: CoefficientMatrix,
    tg: Optional[TimeGrid] = None,
) -> ProofLedger:
    """Evaluate the block-level inequalities on ``v = bump(t) v_block(x)``.

    ``epsilon = 1/2`` for ``nu = 0`` and ``2^{-2 nu}`` otherwise.  Rows
    cover the positivity chain, Bernstein bounds, the per-slice energy
    identity, the mollification split, the branch of ``Phi'`` against
    ``(lambda0/8) 4^nu``, and the final block bounds with measured
    constants.
    """
    grid = v_block.grid
    tg = tg or TimeGrid(1.0, 512)
    lam = A.lambda0
    lo, hi = sp.block_support_annulus(nu)
    if nu >= 1 and sp.support_violation(v_block, lo, hi) > 1e-14:
        raise BlockSupportError(f"not a {nu}-block: mass outside {lo:g} < |xi| < {hi:g}")
    for j in range(grid.dim):
        sp.bernstein_check(v_block, nu, j)
    _check_gamma(cfg.weight, gamma, tg.T)
    eps = 0.5 if nu == 0 else 2.0 ** (-2 * nu)
    ledger = ProofLedger(nu, gamma, eps)

    keep = tg.t <= tg.T / 2.0 + 1e-12
    t = tg.t[keep]
    v_all = SpaceTimeField.separable(tg, lambda s: test_bump(s, tg.T), v_block)
    dv_all = time_derivative(v_all.coeffs, tg.dt)
    Ak = _restrict(A, keep) if _time_dependent(A) else A
    v = SpectralField(grid, v_all.coeffs[keep])
    dv = SpectralField(grid, dv_all[keep])
    P = para_principal_part(v, Ak, cfg.m)
    tau = gamma * (tg.T - t)
    phi1 = cfg.weight.Phi_prime(tau).reshape((-1,) + (1,) * grid.dim)
    phi2 = cfg.weight.Phi_second(tau)
    quad = _trapezoid_weights(t)

    nv = sp.l2_norm(v)
    nP = sp.l2_norm(P)
    grads = sp.gradient(v)
    ngrad = np.sqrt(sum(sp.l2_norm(g) ** 2 for g in grads))
    pv = sp.inner(P, v)
    # sum_jk <T a_jk d_k v, d_j v>
    form = 0.0
    for j in range(grid.dim):
        for k in range(grid.dim):
            a = Ak.entries[j][k]
            if np.any(a.coeffs):
                form = form + sp.inner(Paramultiplier(grid, cfg.m, a).apply(grads[k]), grads[j])
    low_freq = sp.INNER_PLATEAU * 2.0 ** (nu - 1) if nu >= 1 else 0.0

    for i, ti in enumerate(t):
        ledger.add("cauchy_schwarz", ti, nP[i] * nv[i], abs(pv[i]), _ge(nP[i] * nv[i], abs(pv[i])))
        ledger.add("integration_by_parts", ti, abs(pv[i]), abs(form[i]),
                   abs(abs(pv[i]) - abs(form[i])) <= 1e-10 * max(abs(pv[i]), 1e-300) or nv[i] == 0)
        ledger.add("pos", ti, abs(form[i]), lam / 2 * ngrad[i] ** 2, _ge(form[i].real, lam / 2 * ngrad[i] ** 2))
        for j, g in enumerate(grads):
            ng = sp.l2_norm(g)[i]
            ledger.add("bernstein_v", ti, 2.0 ** (nu + 1) * nv[i], ng, _ge(2.0 ** (nu + 1) * nv[i], ng), f"axis {j}")
            ngt = sp.l2_norm(sp.derivative(dv, j))[i]
            ndt = sp.l2_norm(dv)[i]
            ledger.add("bernstein_dt_v", ti, 2.0 ** (nu + 1) * ndt, ngt, _ge(2.0 ** (nu + 1) * ndt, ngt), f"axis {j}")
        if nu >= 1:
            ledger.add("lower_frequency", ti, ngrad[i], low_freq * nv[i], _ge(ngrad[i], low_freq * nv[i]),
                       "min |xi| on the certified support")
            ledger.add("posest", ti, nP[i] * nv[i], lam / 8 * 4.0**nu * nv[i] ** 2,
                       _ge(nP[i] * nv[i], lam / 8 * 4.0**nu * nv[i] ** 2))
        B = P.coeffs[i] + phi1[i] * v.coeffs[i]
        lhs_e = sp.l2_norm(SpectralField(grid, dv.coeffs[i] + B)) ** 2
        rhs_e = (sp.l2_norm(dv[i]) ** 2 + sp.l2_norm(SpectralField(grid, B)) ** 2
                 + 2 * sp.inner(dv[i], SpectralField(grid, B)).real)
        ledger.add("energy_identity", ti, lhs_e, rhs_e, abs(lhs_e - rhs_e) <= 1e-12 * max(lhs_e, 1e-300) + 1e-300)
        branch = "phismall" if phi1[i].item() <= lam / 8 * 4.0**nu else "phibig"
        ledger.add("branch", ti, phi1[i].item(), lam / 8 * 4.0**nu, True, branch)

    # mollification split of the cross term
    cross = 2 * np.sum(quad * sp.inner(dv, P).real)
    if _time_dependent(A):
        kernel = MollifierKernel(eps)
        Aeps_full = _mollified(A, tg, kernel)
        Aeps = _restrict(Aeps_full, keep)
    else:
        Aeps = Ak
    first = 0.0
    second = 0.0
    mag = 0.0
    diff_ratio = 0.0
    for j in range(grid.dim):
        dj_dv = sp.derivative(dv, j)
        for k in range(grid.dim):
            a, ae = Ak.entries[j][k], Aeps.entries[j][k]
            if not (np.any(a.coeffs) or np.any(ae.coeffs)):
                continue
            Ta = Paramultiplier(grid, cfg.m, a).apply(grads[k])
            Te = Paramultiplier(grid, cfg.m, ae).apply(grads[k])
            first += -2 * np.sum(quad * sp.inner(dj_dv, Ta - Te).real)
            second += -2 * np.sum(quad * sp.inner(dj_dv, Te).real)
            mag += 2 * np.sum(quad * sp.l2_norm(dj_dv) * (sp.l2_norm(Ta) + sp.l2_norm(Te)))
            num = sp.l2_norm(Ta - Te)
            den = float(cfg.weight.mu(eps)) * sp.l2_norm(grads[k])
            with np.errstate(invalid="ignore", divide="ignore"):
                r = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
            diff_ratio = max(diff_ratio, float(np.max(r)))
    ledger.add("mollification_split", math.nan, cross, first + second,
               abs(cross - (first + second)) <= 1e-12 * mag + 1e-300, "tolerance relative to sum of |terms|")
    ledger.constants["C_T_diff"] = diff_ratio
    if _time_dependent(A):
        sup_err, sup_der = _coefficient_moduli(A, Aeps_full, tg)
        mu_e = float(cfg.weight.mu(eps))
        ledger.constants["C_a_minus_a_eps"] = sup_err / mu_e
        ledger.constants["C_dt_a_eps"] = sup_der * eps / mu_e
    else:
        ledger.constants["C_a_minus_a_eps"] = 0.0
        ledger.constants["C_dt_a_eps"] = 0.0

    # finalest with the measured constant
    full = SpectralField(grid, dv.coeffs + P.coeffs + phi1 * v.coeffs)
    lhs_fin = float(np.sum(quad * sp.l2_norm(full) ** 2))
    nPhi = sp.l2_norm(SpectralField(grid, P.coeffs + phi1 * v.coeffs)) ** 2
    base = float(np.sum(quad * (nPhi + gamma * phi2 * nv**2)))
    mu_e = float(cfg.weight.mu(eps))
    unit = float(np.sum(quad * (2.0 ** (4 * (nu + 1)) * mu_e + 2.0 ** (2 * (nu + 1)) * mu_e / eps) * nv**2))
    C_fin = max(0.0, base - lhs_fin) / unit if unit > 0 else 0.0
    ledger.constants["C_finalest"] = C_fin
    ledger.add("finalest", math.nan, lhs_fin, base - C_fin * unit, _ge(lhs_fin, base - C_fin * unit),
               "C measured as the smallest admissible constant")

    l2v = float(np.sum(quad * nv**2))
    if nu == 0:
        ledger.add("estnu=0", math.nan, lhs_fin, gamma / 2 * l2v, _ge(lhs_fin, gamma / 2 * l2v))
    else:
        scale = math.sqrt(gamma) * 4.0**nu * l2v
        c_meas = (lhs_fin - gamma / 2 * l2v) / scale if scale > 0 else 0.0
        ledger.constants["c_estnu>0"] = c_meas
        ledger.add("estnu>0", math.nan, lhs_fin, gamma / 2 * l2v, _ge(lhs_fin, gamma / 2 * l2v) and c_meas >= 0,
                   f"measured c = {c_meas:.6g}")
        integrand = (nP - phi1.ravel() * nv) ** 2 + gamma * phi2 * nv**2
        for name, mask in (("estphismall", phi1.ravel() <= lam / 8 * 4.0**nu),
                           ("estphibig", phi1.ravel() > lam / 8 * 4.0**nu)):
            sel = mask & (nv > 0)
            if not sel.any():
                continue
            c_branch = float(np.min((integrand[sel] - gamma / 2 * nv[sel] ** 2)
                                    / (math.sqrt(gamma) * 4.0**nu * nv[sel] ** 2)))
            ledger.constants[f"c_{name}"] = c_branch
            lhs_b = float(np.sum(quad[sel] * integrand[sel]))
            rhs_b = float(np.sum(quad[sel] * (gamma / 2) * nv[sel] ** 2))
            ledger.add(name, math.nan, lhs_b, rhs_b, _ge(lhs_b, rhs_b) and c_branch >= 0,
                       f"pointwise c = {c_branch:.6g}, K term omitted")
    return ledger


def _mollified(A: CoefficientMatrix, tg: TimeGrid, kernel: MollifierKernel) -> CoefficientMatrix:
    cache: dict[int, SpectralField] = {}

    def moll(e: SpectralField) -> SpectralField:
        if id(e) not in cache:
            if e.batch_shape:
                cache[id(e)] = mollify_time(SpaceTimeField(tg, e), kernel).field
            else:
                cache[id(e)] = e
        return cache[id(e)]

    rows = tuple(tuple(moll(e) for e in row) for row in A.entries)
    return CoefficientMatrix(rows, A.lambda0 * (1 - 1e-12), A.recipe + " (mollified)")


def _coefficient_moduli(A: CoefficientMatrix, Aeps: CoefficientMatrix, tg: TimeGrid) -> tuple[float, float]:
    err = 0.0
    der = 0.0
    for row, row_e in zip(A.entries, Aeps.entries):
        for a, ae in zip(row, row_e):
            err = max(err, float(np.max(np.abs(ae.samples - a.samples))))
            if ae.batch_shape:
                der = max(der, float(np.max(np.abs(time_derivative(ae.samples, tg.dt)))))
    return err, der
