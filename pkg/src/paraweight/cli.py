"""Command-line front end: ``paraweight <subcommand> [--config FILE] [--out DIR]``.

Subcommands write their artifacts to the output directory and exit 0 when
every probe passes, 1 when a probe fails and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from paraweight import carleman as cm
from paraweight import paraproduct as pp
from paraweight import spectral as sp
from paraweight.errors import ConfigurationError, ParaweightError
from paraweight.modulus import build_weight, check_weight_ode, get_modulus
from paraweight.reports import ProbeReport, generator, write_json
from paraweight.spectral import SpectralField, TorusGrid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
VOLATILE_KEYS = frozenset({"timestamp", "wall_clock", "seconds"})


@dataclass(frozen=True)
class RunConfig:
    dim: int = 1
    N: int = 256
    T: float = 1.0
    M: int = 512
    modulus: str = "lip"
    tau_max: float = 6.0
    s: float = 0.5
    m: Union[int, str] = "auto"
    m_max: int = 6
    coefficients: str = "identity"
    size: int = 32
    seed: int = 20240611
    gamma_start: float = 0.09375
    gamma_stop: float = 6.0
    gamma_count: int = 16
    gamma_spacing: str = "log"
    field: str = "random"
    output_dir: str = "paraweight-out"

    def gammas(self) -> tuple[float, ...]:
        if self.gamma_spacing == "log":
            g = np.geomspace(self.gamma_start, self.gamma_stop, self.gamma_count)
        else:
            g = np.linspace(self.gamma_start, self.gamma_stop, self.gamma_count)
        return tuple(float(x) for x in g)

    def grid(self) -> TorusGrid:
        return TorusGrid(self.dim, self.N)

    def time_grid(self) -> cm.TimeGrid:
        return cm.TimeGrid(self.T, self.M)


# INI section/key -> RunConfig field
_KEYS = {
    ("grid", "dim"): "dim",
    ("grid", "n"): "N",
    ("time", "t"): "T",
    ("time", "m"): "M",
    ("probe", "modulus"): "modulus",
    ("probe", "tau_max"): "tau_max",
    ("probe", "s"): "s",
    ("probe", "m"): "m",
    ("probe", "m_max"): "m_max",
    ("probe", "coefficients"): "coefficients",
    ("probe", "field"): "field",
    ("ensemble", "size"): "size",
    ("ensemble", "seed"): "seed",
    ("gamma", "start"): "gamma_start",
    ("gamma", "stop"): "gamma_stop",
    ("gamma", "count"): "gamma_count",
    ("gamma", "spacing"): "gamma_spacing",
    ("output", "dir"): "output_dir",
}


class ConfigErrors(ConfigurationError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


def _coerce(name: str, raw: str):
    default = getattr(RunConfig, name)
    if name == "m":
        return raw if raw.strip().lower() == "auto" else int(raw)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    values: dict[str, Any] = {}
    problems = []
    for section in parser.sections():
        for key, raw in parser.items(section):
            target = _KEYS.get((section.lower(), key.lower()))
            if target is None:
                problems.append(f"{section.lower()}.{key}: unknown key")
                continue
            try:
                values[target] = _coerce(target, raw)
            except ValueError:
                problems.append(f"{section.lower()}.{target}: cannot parse {raw!r}")
    if problems:
        raise ConfigErrors(problems)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def load_config(path: Union[str, Path, None]) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        validate_config(cfg)
        return cfg
    p = Path(path)
    if not p.is_file():
        raise ConfigErrors([f"config file {p} not found"])
    return parse_config(p.read_text())


def validate_config(cfg: RunConfig) -> None:
    problems = []
    if cfg.dim not in (1, 2):
        problems.append(f"grid.dim: must be 1 or 2, got {cfg.dim}")
    if cfg.N < 8 or cfg.N & (cfg.N - 1):
        problems.append(f"grid.N: must be a power of two >= 8, got {cfg.N}")
    if not 0 < cfg.s < 1:
        problems.append(f"probe.s: must lie in (0, 1), got {cfg.s}")
    if cfg.M < 64:
        problems.append(f"time.M: must be >= 64, got {cfg.M}")
    if not cfg.T > 0:
        problems.append(f"time.T: must be positive, got {cfg.T}")
    try:
        get_modulus(cfg.modulus)
    except (KeyError, ValueError) as exc:
        problems.append(f"probe.modulus: {exc}")
    coeff = cfg.coefficients.lower()
    if coeff not in ("identity", "scalar:2+sin") and not coeff.startswith("rough-in-time:"):
        problems.append(f"probe.coefficients: unknown recipe {cfg.coefficients!r}")
    elif coeff.startswith("rough-in-time:"):
        try:
            get_modulus(coeff.split(":", 1)[1])
        except (KeyError, ValueError) as exc:
            problems.append(f"probe.coefficients: {exc}")
    if isinstance(cfg.m, str) and cfg.m.lower() != "auto":
        problems.append(f"probe.m: must be an integer or 'auto', got {cfg.m!r}")
    if cfg.size < 1:
        problems.append(f"ensemble.size: must be positive, got {cfg.size}")
    if cfg.gamma_spacing not in ("log", "linear"):
        problems.append(f"gamma.spacing: must be 'log' or 'linear', got {cfg.gamma_spacing!r}")
    if not 0 < cfg.gamma_start < cfg.gamma_stop or cfg.gamma_count < 2:
        problems.append("gamma: need 0 < start < stop and count >= 2")
    elif cfg.gamma_stop * cfg.T > cfg.tau_max:
        problems.append(f"gamma.stop: gamma*T = {cfg.gamma_stop * cfg.T:g} exceeds probe.tau_max = {cfg.tau_max:g}")
    if cfg.field not in FIELDS:
        problems.append(f"probe.field: unknown field {cfg.field!r}; choose from {sorted(FIELDS)}")
    if problems:
        raise ConfigErrors(problems)


# ---------------------------------------------------------------------------
# named fields
# ---------------------------------------------------------------------------


def _random(grid: TorusGrid, seed: int) -> SpectralField:
    return sp.random_field(grid, generator(seed, 9), band=grid.N // 4, decay=1.0)


FIELDS: dict[str, Callable[[TorusGrid, int], SpectralField]] = {
    "random": _random,
    "sin": lambda g, seed: SpectralField.from_function(g, lambda *x: np.sin(x[0])),
    "sawtooth": lambda g, seed: SpectralField.from_function(g, lambda *x: (np.pi - x[0]) / 2.0),
    "abs-sin": lambda g, seed: SpectralField.from_function(g, lambda *x: np.abs(np.sin(x[0]))),
}


# ---------------------------------------------------------------------------
# suite results
# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    reports: list[ProbeReport] = field(default_factory=list)
    wall_clock: dict[str, float] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.reports and all(r.passed for r in self.reports) else "fail"

    def run(self, name: str, fn: Callable[[], ProbeReport]) -> ProbeReport:
        t0 = time.perf_counter()
        rep = fn()
        self.wall_clock[name] = time.perf_counter() - t0
        self.reports.append(rep)
        return rep

    def to_dict(self, timestamp: bool = True) -> dict[str, Any]:
        out = {
            "verdict": self.verdict,
            "reports": [r.to_dict() for r in self.reports],
            "wall_clock": dict(self.wall_clock),
        }
        if timestamp:
            out["timestamp"] = datetime.now(timezone.utc).isoformat()
        return out


def strip_volatile(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def _report(name: str, cfg: RunConfig, passed: bool, constant: float, details: dict, m=None, s=None) -> ProbeReport:
    return ProbeReport(
        inequality=name,
        m=m,
        s=s,
        N=cfg.N,
        dim=cfg.dim,
        ensemble=cfg.size,
        seed=cfg.seed,
        constant=float(constant),
        per_resolution=[{"N": cfg.N, "constant": float(constant)}],
        verdict="pass" if passed else "fail",
        details=details,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def probe_weights(cfg: RunConfig, out: Path) -> list[ProbeReport]:
    mu = get_modulus(cfg.modulus)
    w = build_weight(mu, cfg.tau_max)
    tau = np.linspace(0.0, cfg.tau_max, 1001)
    w.to_csv(out / f"weights_{_slug(cfg.modulus)}.csv", tau=tau)
    grid = np.linspace(0.0, cfg.tau_max, 401)[1:-1]
    ode = check_weight_ode(w, grid)
    return [
        _report(
            "weight_ode",
            cfg,
            ode.passed,
            ode.max_residual,
            {"modulus": mu.name, "tau_max": cfg.tau_max, "nondecreasing": ode.nondecreasing, "knots": int(w.r.size)},
        )
    ]


def probe_lp(cfg: RunConfig, out: Path) -> list[ProbeReport]:
    grid = cfg.grid()
    u = FIELDS[cfg.field](grid, cfg.seed)
    sp.write_field(u, out / f"field_{cfg.field}.spf")
    dec = sp.decompose(u, 0.0)
    dec.to_csv(out / f"lp_{cfg.field}.csv")
    err = float(sp.l2_norm(dec.reconstruct() - u) / max(sp.l2_norm(u), 1e-300))
    worst = 0.0
    bern = 0.0
    for k, blk in sp.iter_blocks(u):
        worst = max(worst, sp.support_violation(blk, *sp.block_support_annulus(k)))
        for j in range(grid.dim):
            bern = max(bern, float(sp.bernstein_check(blk, k, j)) / 2.0 ** (k + 1))
    return [
        _report("lp_reconstruction", cfg, err <= 1e-12, err, {"field": cfg.field}),
        _report("lp_support", cfg, worst <= 1e-14, worst, {"field": cfg.field}),
        _report("bernstein", cfg, bern <= 1.0 + 1e-12, bern, {"field": cfg.field, "normalized_by": "2^(nu+1)"}),
    ]


def _coefficients(cfg: RunConfig) -> pp.CoefficientMatrix:
    return cm.coefficient_recipe(cfg.coefficients, cfg.grid(), cfg.time_grid())


def _resolve_m(cfg: RunConfig, A: pp.CoefficientMatrix) -> tuple[int, dict]:
    if not isinstance(cfg.m, str):
        return int(cfg.m), {"m_source": "config"}
    grid = cfg.grid()
    static = _time_slice(A, 0)
    ens = pp.positivity_ensemble(grid, cfg.seed, cfg.size, stream=11)
    fresh = pp.positivity_ensemble(grid, cfg.seed, cfg.size, stream=12)
    res = pp.find_positive_m(static, ens, cfg.m_max, verify_ensemble=fresh)
    return res.m, {"m_source": "auto", "positivity_profile": res.profile, "target": res.target}


def _time_slice(A: pp.CoefficientMatrix, i: int) -> pp.CoefficientMatrix:
    rows = tuple(tuple(e[i] if e.batch_shape else e for e in row) for row in A.entries)
    return pp.CoefficientMatrix(rows, A.lambda0, A.recipe)


def probe_para(cfg: RunConfig, out: Path) -> list[ProbeReport]:
    grid = cfg.grid()
    A = _time_slice(_coefficients(cfg), 0)
    m, m_info = _resolve_m(cfg, A)
    pcfg = pp.ParaproductConfig(m, cfg.s, grid)
    u = pp.field_ensemble(grid, cfg.seed, cfg.size, stream=21)
    worst = {"remainder": 0.0, "commutator": 0.0, "adjoint_defect": 0.0}
    for row in A.entries:
        for a in row:
            if not np.any(a.coeffs):
                continue
            op = pp.Paramultiplier(grid, m, a)
            lip = float(sp.lip_values(a))
            lip = lip if lip > 1e-12 * float(sp.sup_norm(a)) else 1.0
            rem = sp.h_norm(sp.multiply(a, u) - op.apply(u), 1 - cfg.s) / sp.h_norm(u, -cfg.s)
            worst["remainder"] = max(worst["remainder"], float(np.max(rem)) / lip)
            for j in range(grid.dim):
                w = sp.derivative(u, j)
                adj = sp.l2_norm(op.apply(w) - op.adjoint(w)) / sp.l2_norm(u)
                worst["adjoint_defect"] = max(worst["adjoint_defect"], float(np.max(adj)) / lip)
                for h in range(grid.dim):
                    c = pp.commutator_lhs(pcfg, a, u, j, h) / sp.h_norm(u, 1 - cfg.s)
                    worst["commutator"] = max(worst["commutator"], float(np.max(c)) / lip)
    constant_coeffs = all(
        float(sp.lip_values(a)) <= 1e-12 * max(float(sp.sup_norm(a)), 1e-300) or not np.any(a.coeffs)
        for row in A.entries
        for a in row
    )
    reports = []
    for name, value in worst.items():
        # for constant coefficients the defects vanish identically
        ok = value <= 1e-12 if constant_coeffs else math.isfinite(value)
        reports.append(_report(f"coefficient_{name}", cfg, ok, value, {"recipe": A.recipe, **m_info}, m=m, s=cfg.s))
    resolutions = [cfg.N, 2 * cfg.N]
    size = min(cfg.size, 16) if cfg.dim == 2 else cfg.size
    for ineq in pp.PROBES:
        if cfg.dim == 2 and ineq == "estcomm":
            continue
        reports.append(pp.measure_probe(ineq, m, cfg.s, cfg.dim, resolutions, cfg.seed, size))
    write_json({"m": m, **m_info, "reports": [r.to_dict() for r in reports]}, out / "para.json")
    return reports


MOLLIFY_NUS = (2, 3, 4, 5, 6)


def probe_mollify(cfg: RunConfig, out: Path, nus: Sequence[int] = MOLLIFY_NUS) -> list[ProbeReport]:
    """|t - T/2|^(1/2) against mu = sqrt; the time grid resolves the smallest width 64-fold."""
    T = cfg.T
    eps = [2.0 ** (-2 * n) for n in nus]
    M = max(cfg.M, int(2 ** math.ceil(math.log2(64 * T / min(eps)))) + 1)
    tg = cm.TimeGrid(T, M)
    probe = cm.mollification_probe(lambda t: np.abs(t - T / 2) ** 0.5, get_modulus("sqrt"), tg, eps)
    spread_err, spread_der = probe.spread()
    reports = []
    for name, consts, spread in (
        ("a-a_eps", probe.c_error, spread_err),
        ("a'_eps", probe.c_derivative, spread_der),
    ):
        reports.append(
            ProbeReport(
                inequality=name,
                m=None,
                s=None,
                N=M,
                dim=0,
                ensemble=1,
                seed=cfg.seed,
                constant=float(max(consts)),
                per_resolution=[{"epsilon": e, "constant": c} for e, c in zip(eps, consts)],
                verdict="pass" if spread <= 2.0 else "fail",
                details={"spread": spread, "profile": "|t-T/2|^(1/2)", "modulus": "sqrt", "M": M},
            )
        )
    # linear profile is reproduced away from the ends
    lin = cm.mollify_samples(tg.t, tg.dt, cm.MollifierKernel(eps[0]))
    inner = (tg.t >= eps[0] / 2) & (tg.t <= T - eps[0] / 2)
    lin_err = float(np.max(np.abs(lin - tg.t)[inner]))
    reports.append(_report("mollify_linear", cfg, lin_err <= 1e-10, lin_err, {"epsilon": eps[0]}))
    write_json({"reports": [r.to_dict() for r in reports]}, out / "mollify.json")
    return reports


def probe_carleman(cfg: RunConfig, out: Path) -> list[ProbeReport]:
    grid = cfg.grid()
    tg = cfg.time_grid()
    w = build_weight(get_modulus(cfg.modulus), cfg.tau_max)
    A = _coefficients(cfg)
    m = int(cfg.m) if not isinstance(cfg.m, str) else _resolve_m(cfg, _time_slice(A, 0))[0]
    pcfg = cm.CarlemanProbeConfig(cfg.s, cfg.gammas(), w, m)
    ens = cm.single_mode_ensemble(grid, tg, range(1, 17)) + cm.random_ensemble(
        grid, tg, cfg.seed, cfg.size, band=min(16, grid.N // 4)
    )
    sweep = cm.gamma_sweep(ens, pcfg, A)
    slug = _slug(cfg.modulus)
    sweep.to_csv(out / f"gamma_sweep_{slug}.csv")
    reports = [
        ProbeReport(
            inequality="Carlest",
            m=m,
            s=cfg.s,
            N=cfg.N,
            dim=cfg.dim,
            ensemble=len(ens),
            seed=cfg.seed,
            constant=float(min(sweep.min_c)),
            per_resolution=[{"gamma": g, "constant": c} for g, c in zip(sweep.gammas, sweep.min_c)],
            verdict=sweep.verdict,
            details={"gamma0": sweep.gamma0, "max_log_jump": list(sweep.max_log_jump), "recipe": A.recipe},
        )
    ]
    # one dyadic block per frequency level of a seeded field
    u = sp.random_field(grid, generator(cfg.seed, 31), band=grid.N // 4, decay=1.0)
    gamma = sweep.gamma0
    rows = []
    all_hold = True
    consts: dict[str, float] = {}
    for nu in range(0, 4):
        if 2.0 ** (-2 * nu) < 4 * tg.dt and cm._time_dependent(A):
            break
        blk = sp.apply_delta(u, nu)
        led = cm.proof_ledger_probe(blk, nu, gamma, pcfg, A, tg)
        for r in led.rows:
            rows.append((nu, r))
            all_hold &= r.holds
        for k, v in led.constants.items():
            consts[f"nu={nu}:{k}"] = v
    with (out / f"proof_ledger_{slug}.csv").open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["nu", "inequality", "t", "lhs", "rhs", "holds", "note"])
        for nu, r in rows:
            wr.writerow([nu, r.inequality, repr(r.t), repr(r.lhs), repr(r.rhs), int(r.holds), r.note])
    reports.append(_report("proof_ledger", cfg, all_hold, len(rows), {"gamma": gamma, "constants": consts}, m=m, s=cfg.s))
    return reports


def _slug(name: str) -> str:
    return name.replace(":", "-").replace("/", "-")


def run_verify(cfg: RunConfig, out: Path) -> SuiteResult:
    suite = SuiteResult()
    groups = [
        ("weights", probe_weights),
        ("lp", probe_lp),
        ("para", probe_para),
        ("mollify", probe_mollify),
        ("carleman", probe_carleman),
    ]
    for name, fn in groups:
        t0 = time.perf_counter()
        reps = fn(cfg, out)
        suite.reports.extend(reps)
        suite.wall_clock[name] = time.perf_counter() - t0
    return suite


SUBCOMMANDS = {
    "weights": probe_weights,
    "lp": probe_lp,
    "para": probe_para,
    "mollify": probe_mollify,
    "carleman": probe_carleman,
}


# ---------------------------------------------------------------------------
# golden comparison
# ---------------------------------------------------------------------------


@dataclass
class GoldenDiff:
    structural: list[str] = field(default_factory=list)
    numeric: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.structural and not self.numeric


def _close(a: float, b: float, tol: float) -> bool:
    if math.isnan(a) and math.isnan(b):
        return True
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(abs(a), abs(b)) or a == b


def _as_number(x: str) -> Optional[float]:
    try:
        return float(x)
    except ValueError:
        return None


def _compare_json(a: Any, b: Any, tol: float, where: str, diff: GoldenDiff):
    if isinstance(a, dict) and isinstance(b, dict):
        ka, kb = set(a) - VOLATILE_KEYS, set(b) - VOLATILE_KEYS
        for k in sorted(ka ^ kb):
            diff.structural.append(f"{where}: key {k!r} only in {'result' if k in ka else 'golden'}")
        for k in sorted(ka & kb):
            _compare_json(a[k], b[k], tol, f"{where}.{k}", diff)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            diff.structural.append(f"{where}: length {len(a)} != {len(b)}")
        for i, (x, y) in enumerate(zip(a, b)):
            _compare_json(x, y, tol, f"{where}[{i}]", diff)
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        if not _close(float(a), float(b), tol):
            diff.numeric.append(f"{where}: {a!r} != {b!r}")
    elif a != b:
        diff.structural.append(f"{where}: {a!r} != {b!r}")


def _compare_csv(pa: Path, pb: Path, tol: float, diff: GoldenDiff):
    ra = list(csv.reader(pa.open()))
    rb = list(csv.reader(pb.open()))
    name = pa.name
    if not ra or not rb or ra[0] != rb[0]:
        diff.structural.append(f"{name}: header mismatch")
        return
    header = ra[0]
    if len(ra) != len(rb):
        diff.structural.append(f"{name}: {len(ra) - 1} rows != {len(rb) - 1} rows")
    for i, (x, y) in enumerate(zip(ra[1:], rb[1:]), start=1):
        for col, u, v in zip(header, x, y):
            fu, fv = _as_number(u), _as_number(v)
            if fu is None or fv is None:
                if u != v:
                    diff.structural.append(f"{name} row {i} column {col}: {u!r} != {v!r}")
            elif not _close(fu, fv, tol):
                diff.numeric.append(f"{name} row {i} column {col}: {u} != {v}")


def compare_golden(result_dir: Union[str, Path], golden_dir: Union[str, Path], tol: float = 1e-9) -> GoldenDiff:
    """Compare every file of two result directories; numbers use relative tolerance ``tol``."""
    ra, rb = Path(result_dir), Path(golden_dir)
    diff = GoldenDiff()
    fa = {p.relative_to(ra) for p in ra.rglob("*") if p.is_file()}
    fb = {p.relative_to(rb) for p in rb.rglob("*") if p.is_file()}
    for p in sorted(fa - fb):
        diff.structural.append(f"{p}: missing from golden")
    for p in sorted(fb - fa):
        diff.structural.append(f"{p}: missing from result")
    for p in sorted(fa & fb):
        a, b = ra / p, rb / p
        if p.suffix == ".json":
            _compare_json(json.loads(a.read_text()), json.loads(b.read_text()), tol, str(p), diff)
        elif p.suffix == ".csv":
            _compare_csv(a, b, tol, diff)
        elif p.suffix == ".spf":
            ua, ub = sp.read_field(a), sp.read_field(b)
            if ua.grid != ub.grid:
                diff.structural.append(f"{p}: grid {ua.grid} != {ub.grid}")
            else:
                err = float(np.max(np.abs(ua.coeffs - ub.coeffs)))
                ref = float(np.max(np.abs(ub.coeffs))) or 1.0
                if err > tol * ref:
                    diff.numeric.append(f"{p}: max coefficient difference {err:.3e}")
        elif a.read_bytes() != b.read_bytes():
            diff.structural.append(f"{p}: contents differ")
    return diff


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paraweight", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*SUBCOMMANDS, "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("compare")
    p.add_argument("result", type=Path)
    p.add_argument("golden", type=Path)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--quiet", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *a: None) if args.quiet else (lambda *a: print(*a))

    if args.command == "compare":
        diff = compare_golden(args.result, args.golden, args.tol)
        for line in diff.structural:
            say(f"STRUCTURE {line}")
        for line in diff.numeric:
            say(f"NUMERIC   {line}")
        say("compare: pass" if diff.passed else "compare: fail")
        return EXIT_OK if diff.passed else EXIT_FAIL

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigErrors([f"--seed: must be an unsigned 64-bit integer, got {args.seed}"])
            cfg = replace(cfg, seed=args.seed)
    except ConfigurationError as exc:
        print(f"paraweight: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "verify":
            suite = run_verify(cfg, out)
        else:
            suite = SuiteResult()
            t0 = time.perf_counter()
            suite.reports.extend(SUBCOMMANDS[args.command](cfg, out))
            suite.wall_clock[args.command] = time.perf_counter() - t0
    except (ParaweightError, ValueError) as exc:
        print(f"paraweight {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ConfigurationError) else EXIT_FAIL

    report_path = out / ("suite.json" if args.command == "verify" else f"{args.command}_suite.json")
    write_json(suite.to_dict(), report_path)
    for r in suite.reports:
        say(f"{r.verdict.upper():4s}  {r.inequality:24s} constant={r.constant:.6g}")
    if suite.verdict != "pass":
        failing = [r.inequality for r in suite.reports if not r.passed]
        print(f"paraweight {args.command}: failing probes {failing}; see {report_path}", file=sys.stderr)
        return EXIT_FAIL
    say(f"{args.command}: pass ({report_path})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
