"""Moduli of continuity, the Osgood condition and the Carleman weight.

A modulus ``mu`` on [0, 1] generates

    phi(t)  = int_{1/t}^1 ds / mu(s),          t >= 1
    Phi(tau) = int_0^tau phi^{-1}(sigma) dsigma

so that ``Phi' = phi^{-1}`` and ``Phi'' = (Phi')^2 mu(1 / Phi')``.

Everything is tabulated in the logarithmic variable ``r = log t``.  With
``g(r) = e^{-r} / mu(e^{-r})`` one has ``tau(r) = phi(e^r) = int_0^r g`` and
``Phi(tau(r)) = int_0^r dr' / mu(e^{-r'})``, so both tables are proper
integrals of bounded smooth integrands and ``Phi'`` at a knot is ``e^r``
exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from paraweight.errors import (
    DomainError,
    EvaluationError,
    WeightDomainError,
    WeightOverflowError,
)

ArrayFunc = Callable[[np.ndarray], np.ndarray]

# e^{-R_CAP} is still a normal double and 1/mu(e^{-R_CAP}) stays finite.
R_CAP = 700.0


@dataclass(frozen=True)
class Modulus:
    """A modulus of continuity on [0, 1].

    ``func`` must accept numpy arrays.  ``analytic_tail(delta)`` is an
    optional closed form of ``int_delta^1 ds / mu(s)`` used as an oracle.
    """

    name: str
    func: ArrayFunc = field(repr=False, compare=False)
    analytic_tail: Optional[Callable[[float], float]] = field(
        default=None, repr=False, compare=False
    )

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))

    def normalized(self) -> "Modulus":
        """Rescale so that ``mu(1) = 1``; the constant is absorbed by ``C``."""
        scale = float(self.func(np.array(1.0)))
        if not np.isfinite(scale) or scale <= 0:
            raise EvaluationError(f"mu(1) = {scale!r} cannot be normalized")
        if scale == 1.0:
            return self
        tail = None
        if self.analytic_tail is not None:
            tail = lambda d, _t=self.analytic_tail: scale * _t(d)  # noqa: E731
        return Modulus(self.name, lambda s, _f=self.func: _f(s) / scale, tail)


def _loglip(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] * (1.0 - np.log(s[pos]))
    return out


def _holder(alpha: float) -> Modulus:
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"Hoelder exponent must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        tail = lambda d: -math.log(d)  # noqa: E731
    else:
        tail = lambda d: (1.0 - d ** (1.0 - alpha)) / (1.0 - alpha)  # noqa: E731
    return Modulus(f"holder:{alpha:g}", lambda s: np.power(s, alpha), tail)


CATALOGUE = ("lip", "sqrt", "loglip", "holder:<alpha>")


def get_modulus(name: str) -> Modulus:
    """Look up a catalogue modulus: ``lip``, ``sqrt``, ``loglip`` or ``holder:<alpha>``."""
    key = name.strip().lower()
    if key == "lip":
        return Modulus("lip", lambda s: np.array(s, dtype=float), lambda d: -math.log(d))
    if key == "sqrt":
        return Modulus("sqrt", np.sqrt, lambda d: 2.0 * (1.0 - math.sqrt(d)))
    if key == "loglip":
        return Modulus("loglip", _loglip, lambda d: math.log(1.0 - math.log(d)))
    if key.startswith("holder:"):
        try:
            alpha = float(key.split(":", 1)[1])
        except ValueError as exc:
            raise DomainError(f"bad Hoelder exponent in {name!r}") from exc
        return _holder(alpha)
    raise DomainError(f"unknown modulus {name!r}; catalogue: {', '.join(CATALOGUE)}")


def _as_modulus(candidate: Union[Modulus, ArrayFunc]) -> Modulus:
    if isinstance(candidate, Modulus):
        return candidate
    return Modulus(getattr(candidate, "__name__", "candidate"), candidate)


def _checked(f: ArrayFunc) -> ArrayFunc:
    def wrapped(x):
        y = np.asarray(f(x), dtype=float)
        bad = ~np.isfinite(y)
        if bad.any():
            where = np.broadcast_to(x, y.shape)[bad].flat[0]
            raise EvaluationError(f"non-finite value {y[bad].flat[0]!r} at s = {where!r}")
        return y

    return wrapped


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    prop: str
    point: tuple
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple[Violation, ...]

    def properties(self) -> set[str]:
        return {v.prop for v in self.violations}


def validate_modulus(
    candidate: Union[Modulus, ArrayFunc],
    n_points: int = 1025,
    n_concavity: int = 64,
    atol: float = 1e-12,
) -> ValidationReport:
    """Check the defining properties of a modulus of continuity.

    Tested on a uniform grid of ``n_points`` nodes: the endpoint values,
    strict monotonicity, midpoint concavity on all pairs of an
    ``n_concavity``-point subgrid, and the lower bound ``mu(s) >= s``.
    Only the first witness of each violated property is reported.
    """
    mu = _as_modulus(candidate)
    f = _checked(mu.func)
    s = np.linspace(0.0, 1.0, max(n_points, 1024))
    y = f(s)
    violations: list[Violation] = []

    if abs(y[0]) > atol:
        violations.append(Violation("mu(0)=0", (0.0,), f"mu(0) = {y[0]:.3e}"))
    if abs(y[-1] - 1.0) > atol:
        violations.append(Violation("mu(1)=1", (1.0,), f"mu(1) = {y[-1]:.17g}"))

    dy = np.diff(y)
    bad = np.flatnonzero(dy <= 0)
    if bad.size:
        i = bad[0]
        violations.append(
            Violation("strictly increasing", (s[i], s[i + 1]), f"mu({s[i + 1]:.6g}) <= mu({s[i]:.6g})")
        )

    sub = np.linspace(0.0, 1.0, n_concavity)
    fy = f(sub)
    x, z = np.meshgrid(sub, sub, indexing="ij")
    gap = f(0.5 * (x + z)) - 0.5 * (fy[:, None] + fy[None, :])
    if (gap < -atol).any():
        i, j = np.unravel_index(np.argmin(gap), gap.shape)
        violations.append(
            Violation("concave", (sub[i], sub[j]), f"midpoint defect {gap[i, j]:.3e}")
        )

    below = y - s
    if (below < -atol).any():
        i = int(np.argmin(below))
        violations.append(Violation("mu(s)>=s", (s[i],), f"mu(s) - s = {below[i]:.3e}"))

    return ValidationReport(not violations, tuple(violations))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def adaptive_simpson(
    f: ArrayFunc, a, b, rtol: float = 1e-12, atol: float = 0.0, max_depth: int = 48
) -> np.ndarray:
    """Adaptive Simpson quadrature over many intervals at once.

    Each interval ``[a_i, b_i]`` is refined independently until the
    Richardson error estimate falls below ``max(rtol * |S_i|, atol)``,
    halving the tolerance on every split.  Returns one value per interval.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
    out = np.zeros(a.size)
    owner = np.arange(a.size)
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = np.maximum(rtol * np.abs(whole), atol)
    for depth in range(max_depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        done = np.abs(err) <= 15.0 * tol
        if depth == max_depth - 1:
            done[:] = True
        np.add.at(out, owner[done], (left + right + err / 15.0)[done])
        k = ~done
        if not k.any():
            break
        owner = np.concatenate([owner[k], owner[k]])
        a, m, b = (
            np.concatenate([a[k], m[k]]),
            np.concatenate([lm[k], rm[k]]),
            np.concatenate([m[k], b[k]]),
        )
        fa, fm, fb = (
            np.concatenate([fa[k], fm[k]]),
            np.concatenate([flm[k], frm[k]]),
            np.concatenate([fm[k], fb[k]]),
        )
        whole = np.concatenate([left[k], right[k]])
        tol = np.concatenate([tol[k], tol[k]]) * 0.5
    return out


def osgood_tail(mu: Modulus, delta: float, tol: float = 1e-11) -> float:
    """Return ``int_delta^1 ds / mu(s)``.

    The interval is cut into dyadic pieces ``[x, 2x]`` so that ``1/mu``
    varies by a bounded factor on each; the integrand is never evaluated
    below ``delta``.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    f = _checked(lambda s: 1.0 / mu.func(s))
    n = max(1, int(math.ceil(-math.log2(delta))))
    edges = np.geomspace(delta, 1.0, n + 1)
    edges[0], edges[-1] = delta, 1.0
    pieces = adaptive_simpson(f, edges[:-1], edges[1:], rtol=tol / n)
    return float(math.fsum(pieces))


def default_delta_sequence(length: int = 8) -> np.ndarray:
    """Doubly exponential sequence ``2^{-2^j}``, j = 1..length."""
    return np.array([2.0 ** -(2.0**j) for j in range(1, length + 1)])


@dataclass(frozen=True)
class OsgoodVerdict:
    verdict: str  # "diverges" | "converges" | "inconclusive"
    deltas: tuple[float, ...]
    tails: tuple[float, ...]
    ratios: tuple[float, ...]


def osgood_verdict(
    mu: Modulus,
    delta_sequence: Optional[Sequence[float]] = None,
    diverge_ratio: float = 0.9,
    converge_ratio: float = 0.5,
    window: int = 3,
) -> OsgoodVerdict:
    """Heuristic ratio test on successive tail increments.

    The increments ``tail(delta_{j+1}) - tail(delta_j)`` are compared over
    the last ``window`` ratios: all ``>= diverge_ratio`` means the tail keeps
    growing ("diverges"), all ``< converge_ratio`` means geometric decay
    ("converges").  Never a proof.
    """
    deltas = default_delta_sequence() if delta_sequence is None else np.asarray(delta_sequence, float)
    if deltas.size < 6:
        raise DomainError("delta_sequence needs at least 6 entries")
    if np.any(np.diff(deltas) >= 0):
        raise DomainError("delta_sequence must be strictly decreasing")
    tails = np.array([osgood_tail(mu, float(d)) for d in deltas])
    inc = np.diff(tails)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = inc[1:] / inc[:-1]
    last = ratios[-window:]
    if np.all(last >= diverge_ratio):
        verdict = "diverges"
    elif np.all(last < converge_ratio):
        verdict = "converges"
    else:
        verdict = "inconclusive"
    return OsgoodVerdict(verdict, tuple(deltas.tolist()), tuple(tails.tolist()), tuple(ratios.tolist()))


# ---------------------------------------------------------------------------
# Carleman weight
# ---------------------------------------------------------------------------


def _hermite(xk, yk, dk, xq):
    """Monotone cubic Hermite interpolation with Fritsch-Carlson limiting."""
    xq = np.asarray(xq, dtype=float)
    i = np.clip(np.searchsorted(xk, xq, side="right") - 1, 0, xk.size - 2)
    h = xk[i + 1] - xk[i]
    secant = (yk[i + 1] - yk[i]) / h
    d0, d1 = dk[i], dk[i + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(secant != 0, d0 / secant, 0.0)
        beta = np.where(secant != 0, d1 / secant, 0.0)
        norm = np.hypot(alpha, beta)
        scale = np.where(norm > 3.0, 3.0 / norm, 1.0)
    d0 = d0 * scale
    d1 = d1 * scale
    t = (xq - xk[i]) / h
    t2, t3 = t * t, t * t * t
    return (
        (2 * t3 - 3 * t2 + 1) * yk[i]
        + (t3 - 2 * t2 + t) * h * d0
        + (-2 * t3 + 3 * t2) * yk[i + 1]
        + (t3 - t2) * h * d1
    )


@dataclass(frozen=True)
class CarlemanWeight:
    """Tabulated weight ``Phi`` on ``[0, tau_max]``.

    Knots are ``r_i = i * step`` (``t_i = e^{r_i}`` geometric); ``tau[i]`` is
    ``phi(t_i)``, ``Phi[i]`` is ``Phi(tau[i])`` and ``Phi'(tau[i]) = t_i``.
    """

    mu: Modulus
    tau_max: float
    quadrature_tol: float
    step: float
    r: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    Phi_knots: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    # tables ---------------------------------------------------------------
    @property
    def phi_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Abscissae ``t_i`` and values ``phi(t_i)``."""
        return np.exp(self.r), self.tau

    @property
    def phi_inv_table(self) -> tuple[np.ndarray, np.ndarray]:
        return self.tau, np.exp(self.r)

    @property
    def Phi_table(self) -> tuple[np.ndarray, np.ndarray]:
        return self.tau, self.Phi_knots

    @property
    def tau_end(self) -> float:
        return float(self.tau[-1])

    def _check_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau > self.tau_end) or np.any(~np.isfinite(tau)):
            raise DomainError(f"tau outside weight domain [0, {self.tau_end:.6g}]")
        return tau

    # evaluation -----------------------------------------------------------
    def log_phi_inv(self, tau) -> np.ndarray:
        """``log phi^{-1}(tau) = log Phi'(tau)``."""
        tau = self._check_tau(tau)
        return _hermite(self.tau, self.r, 1.0 / self.g, tau)

    def phi_inv(self, tau) -> np.ndarray:
        return np.exp(self.log_phi_inv(tau))

    Phi_prime = phi_inv

    def phi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        r = np.log(t)
        if np.any(r < 0) or np.any(r > self.r[-1]):
            raise DomainError(f"t outside [1, {math.exp(self.r[-1]):.6g}]")
        return _hermite(self.r, self.tau, self.g, r)

    def Phi(self, tau) -> np.ndarray:
        tau = self._check_tau(tau)
        i = np.clip(np.searchsorted(self.tau, tau, side="right") - 1, 0, self.tau.size - 2)
        left = self.tau[i]
        mid = 0.5 * (left + tau)
        f0 = np.exp(self.r[i])
        fm = np.exp(_hermite(self.tau, self.r, 1.0 / self.g, mid))
        f1 = np.exp(_hermite(self.tau, self.r, 1.0 / self.g, tau))
        return self.Phi_knots[i] + (tau - left) / 6.0 * (f0 + 4.0 * fm + f1)

    def Phi_second(self, tau) -> np.ndarray:
        """``(Phi')^2 mu(1/Phi')`` evaluated through the table of ``r``."""
        r = self.log_phi_inv(tau)
        e = np.exp(r)
        return e * (e * self.mu.func(np.exp(-r)))

    def local_spacing(self, tau) -> np.ndarray:
        tau = self._check_tau(tau)
        i = np.clip(np.searchsorted(self.tau, tau, side="right") - 1, 0, self.tau.size - 2)
        return self.tau[i + 1] - self.tau[i]

    def to_csv(self, path: Union[str, Path], tau: Optional[Sequence[float]] = None) -> Path:
        """Write columns tau, phi_inv, Phi, Phi_prime, Phi_second."""
        grid = np.linspace(0.0, self.tau_max, 1001) if tau is None else np.asarray(tau, float)
        cols = (grid, self.phi_inv(grid), self.Phi(grid), self.Phi_prime(grid), self.Phi_second(grid))
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "phi_inv", "Phi", "Phi_prime", "Phi_second"])
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])
        return path


def build_weight(
    mu: Modulus,
    tau_max: float,
    tol: float = 1e-10,
    step: float = 1e-3,
    chunk: int = 1 << 15,
) -> CarlemanWeight:
    """Tabulate the Carleman weight of ``mu`` on ``[0, tau_max]``.

    Raises :class:`WeightDomainError` if ``phi`` saturates below ``tau_max``
    (non-Osgood moduli) and :class:`WeightOverflowError` if ``Phi'`` would
    leave double range first.
    """
    if not tau_max > 0:
        raise DomainError(f"tau_max must be positive, got {tau_max!r}")
    inv_mu = _checked(lambda s: 1.0 / mu.func(s))

    def g(r):
        return np.exp(-r) * inv_mu(np.exp(-r))

    def inv_mu_of_r(r):
        return inv_mu(np.exp(-r))

    # non-Osgood moduli saturate; detect cheaply before marching to R_CAP
    sup_phi = osgood_tail(mu, math.exp(-R_CAP))
    if sup_phi < tau_max:
        verdict = osgood_verdict(mu).verdict
        if verdict == "converges":
            raise WeightDomainError(sup_phi, tau_max)
        raise WeightOverflowError(
            f"phi reaches only {sup_phi:.6g} before Phi' = e^{R_CAP:g}; tau_max = {tau_max:g}"
        )

    r_parts = [np.zeros(1)]
    tau_parts = [np.zeros(1)]
    Phi_parts = [np.zeros(1)]
    tau_last = 0.0
    Phi_last = 0.0
    start = 0
    # two extra knots past tau_max keep centered stencils inside the table
    while True:
        idx = np.arange(start, start + chunk, dtype=float)
        lo, hi = idx * step, (idx + 1) * step
        if lo[0] >= R_CAP:
            raise WeightOverflowError(f"Phi' exceeds e^{R_CAP:g} before tau_max = {tau_max:g}")
        d_tau = adaptive_simpson(g, lo, hi, rtol=tol)
        d_Phi = adaptive_simpson(inv_mu_of_r, lo, hi, rtol=tol)
        tau_c = tau_last + np.cumsum(d_tau)
        Phi_c = Phi_last + np.cumsum(d_Phi)
        hit = np.flatnonzero(tau_c >= tau_max)
        if hit.size and hit[0] + 3 <= chunk:
            n = hit[0] + 3
            r_parts.append(hi[:n])
            tau_parts.append(tau_c[:n])
            Phi_parts.append(Phi_c[:n])
            break
        r_parts.append(hi)
        tau_parts.append(tau_c)
        Phi_parts.append(Phi_c)
        tau_last, Phi_last = tau_c[-1], Phi_c[-1]
        start += chunk

    r = np.concatenate(r_parts)
    tau = np.concatenate(tau_parts)
    Phi = np.concatenate(Phi_parts)
    if not np.all(np.isfinite(Phi)):
        raise WeightOverflowError("Phi overflowed double range")
    if np.any(np.diff(tau) <= 0):
        raise WeightDomainError(float(tau[-1]), tau_max)
    for arr in (r, tau, Phi):
        arr.setflags(write=False)
    gk = g(r)
    gk.setflags(write=False)
    return CarlemanWeight(mu, float(tau_max), float(tol), float(step), r, tau, Phi, gk)


@dataclass(frozen=True)
class ODECheck:
    max_residual: float
    residuals: np.ndarray = field(repr=False)
    second_derivative: np.ndarray = field(repr=False)
    nondecreasing: bool
    passed: bool


def check_weight_ode(w: CarlemanWeight, tau_grid: Sequence[float], tol: float = 1e-5) -> ODECheck:
    """Compare a finite-difference ``Phi''`` with ``(Phi')^2 mu(1/Phi')``.

    ``Phi''`` is the centered difference of ``Phi'`` with the local table
    spacing as step (one-sided second order where the left stencil would
    leave the domain).  Also reports whether ``Phi''`` is nondecreasing
    along ``tau_grid``.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0) or np.any(tau > w.tau_max):
        raise DomainError(f"tau_grid must lie in [0, {w.tau_max:g}]")
    h = w.local_spacing(tau)
    fp = w.Phi_prime
    centered = tau - h >= 0
    fd = np.empty_like(tau)
    c = centered
    fd[c] = (fp(tau[c] + h[c]) - fp(tau[c] - h[c])) / (2.0 * h[c])
    o = ~c
    if o.any():
        fd[o] = (-3.0 * fp(tau[o]) + 4.0 * fp(tau[o] + h[o]) - fp(tau[o] + 2 * h[o])) / (2.0 * h[o])
    p = fp(tau)
    rhs = p * (p * w.mu.func(1.0 / p))
    res = np.abs(fd - rhs) / np.abs(fd)
    nondecreasing = bool(np.all(np.diff(fd) >= -1e-12 * np.abs(fd[1:])))
    worst = float(res.max()) if res.size else 0.0
    return ODECheck(worst, res, fd, nondecreasing, worst <= tol and nondecreasing)
