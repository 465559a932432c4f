"""Acceptance criteria 1 to 10, each at its stated tolerance and runtime budget."""

import json
import time

import numpy as np
import pytest

from conftest import criterion
from paraweight import carleman as cm
from paraweight import cli
from paraweight import paraproduct as pp
from paraweight import spectral as sp
from paraweight.modulus import build_weight, check_weight_ode, get_modulus
from paraweight.reports import generator
from paraweight.spectral import SpectralField, TorusGrid

SEED = 20240611


def test_c01_weight_closed_form():
    with criterion(1, "weight closed form and ODE residual"):
        t0 = time.perf_counter()
        lip = build_weight(get_modulus("lip"), 10.0)
        tau = np.linspace(0.0, 10.0, 4001)[1:]
        rel = np.abs(lip.Phi(tau) - np.expm1(tau)) / np.expm1(tau)
        assert lip.Phi(0.0) == 0.0
        assert np.max(rel) <= 1e-8
        # the Osgood members of the catalogue
        for name, tau_max in (("lip", 10.0), ("loglip", 6.0), ("holder:1", 10.0)):
            w = lip if name == "lip" else build_weight(get_modulus(name), tau_max)
            chk = check_weight_ode(w, np.linspace(0.0, tau_max, 401)[1:-1])
            assert chk.max_residual <= 1e-5, name
        assert time.perf_counter() - t0 <= 5.0


def test_c02_littlewood_paley_exactness():
    with criterion(2, "Littlewood-Paley exactness at N = 512"):
        t0 = time.perf_counter()
        g = TorusGrid(1, 512)
        u = sp.random_field(g, generator(SEED, 2), batch=(1000,), real=False)
        dec = sp.decompose(u)
        err = sp.l2_norm(dec.reconstruct() - u) / sp.l2_norm(u)
        assert np.max(err) <= 1e-12
        blocks = 0
        for k, blk in enumerate(dec.blocks):
            assert sp.support_violation(blk, *sp.block_support_annulus(k)) <= 1e-14
            if k >= 1:
                ratio = sp.bernstein_check(blk, k, 0)
                assert np.all(ratio <= 2.0 ** (k + 1))
                blocks += ratio.size
        assert blocks >= 1000
        assert time.perf_counter() - t0 <= 30.0


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_c03_norm_equivalence(s):
    with criterion(3, "H^s norm equivalence, C <= 4 and growth <= 10%"):
        C = []
        for N in (256, 512):
            g = TorusGrid(1, N)
            u = sp.random_field(g, generator(SEED, 3), band=N // 4, batch=(100,))
            r = sp.h_norm(u, s, "lp") / sp.h_norm(u, s)
            C.append(max(float(r.max()), float(1 / r.min())))
        assert max(C) <= 4.0
        assert C[1] <= 1.10 * C[0]


@pytest.mark.parametrize("m", [1, 2, 3])
def test_c04_modified_paraproduct_identities(m):
    with criterion(4, "modified paraproduct identities for constant a"):
        g = TorusGrid(1, 512)
        cfg = pp.ParaproductConfig(m, 0.5, g)
        a = SpectralField.from_samples(g, np.full(g.shape, 1.75))
        u = sp.random_field(g, generator(SEED, 4, m), real=False)
        nu_ = sp.l2_norm(u)
        assert sp.l2_norm(pp.modified_T(cfg, a, u) - u * 1.75) <= 1e-12 * nu_
        assert sp.l2_norm(pp.remainder(cfg, a, u)) <= 1e-12 * nu_
        assert sp.l2_norm(pp.adjoint_defect(cfg, a, u, 0)) <= 1e-12 * nu_
        # two derivatives act on u inside the commutator
        scale = 1.75 * sp.l2_norm(sp.derivative(sp.derivative(u, 0), 0))
        assert pp.commutator_lhs(cfg, a, u, 0, 0) <= 1e-12 * scale
        b = sp.random_field(g, generator(SEED, 4, 10 + m), band=40, decay=2)
        bony = pp.bony_T(b, u).coeffs
        mod0 = pp.modified_T(pp.ParaproductConfig(0, 0.5, g), b, u).coeffs
        assert np.max(np.abs(mod0 - bony)) <= 1e-14 * np.max(np.abs(u.coeffs))


def test_c05_positivity_threshold():
    with criterion(5, "positivity threshold for 2 + sin x"):
        g = TorusGrid(1, 512)
        a = SpectralField.from_function(g, lambda x: 2 + np.sin(x))
        A = pp.CoefficientMatrix.scalar_times_identity(a, 1, 1.0, "2+sin")
        res = pp.find_positive_m(A, pp.positivity_ensemble(g, SEED, 64, stream=1), 6)
        fresh = pp.positivity_ensemble(g, SEED + 1, 64, stream=2)
        for m in range(res.m, res.m + 4):
            assert np.min(pp.positivity_ratios(A, fresh, m)) >= 0.5, m


MODES = (16, 24, 32, 48, 64, 96, 128)


@pytest.mark.parametrize("ineq", ["a-Ta", "estcomm", "adj"])
@pytest.mark.parametrize("coef", ["sin", "abs-sin"])
def test_c06_derivative_gain(ineq, coef):
    with criterion(6, "one-derivative gain and order drop over single modes"):
        f = np.sin if coef == "sin" else (lambda x: np.abs(np.sin(x)))
        sweeps = []
        for N in (512, 1024):
            g = TorusGrid(1, N)
            a = SpectralField.from_function(g, f)
            sweeps.append(pp.mode_sweep(ineq, pp.ParaproductConfig(1, 0.5, g), a, MODES))
        lo, hi = sweeps
        gained = np.array(lo.gained)
        # uniform in M: the top octave stays below the bottom octave's level
        assert gained[4:].max() <= 1.25 * gained[:3].max() + 1e-12
        naive_over_M = np.array(lo.naive) / np.array(MODES)
        assert naive_over_M[4:].min() >= 0.9 * naive_over_M[:3].min()
        assert max(hi.gained) <= 1.25 * max(lo.gained) + 1e-12
        rep = pp.measure_probe(ineq, 1, 0.5, 1, [512, 1024], SEED, 32)
        assert rep.passed, rep.per_resolution


def test_c07_locality():
    with criterion(7, "head and annulus locality over 100 pairs"):
        g = TorusGrid(1, 512)
        m = 1
        cfg = pp.ParaproductConfig(m, 0.5, g)
        a_ens = pp.lipschitz_ensemble(g, SEED, 100, stream=7)
        u_ens = pp.field_ensemble(g, SEED, 100, stream=8)
        for i in range(100):
            a, u = a_ens[i], u_ens[i]
            scale = sp.sup_norm(a) * sp.l2_norm(sp.derivative(sp.derivative(u, 0), 0))
            for nu in range(g.k_max + 1):
                pieces = pp.commutator_pieces(cfg, a, u, nu, 0, 0)
                if nu >= m + 4:
                    assert sp.l2_norm(pieces.head) <= 1e-12 * scale, (i, nu)
                for k, term in pieces.annulus.items():
                    if abs(k - nu) >= 4:
                        assert sp.l2_norm(term) <= 1e-12 * scale, (i, nu, k)


def test_c08_mollification_bounds():
    with criterion(8, "mollification constants vary at most 2x"):
        tg = cm.TimeGrid(1.0, 2**17 + 1)
        eps = [2.0 ** (-2 * nu) for nu in range(2, 7)]
        assert eps[-1] / tg.dt >= 4
        probe = cm.mollification_probe(lambda t: np.abs(t - 0.5) ** 0.5, get_modulus("sqrt"), tg, eps)
        err_spread, der_spread = probe.spread()
        assert err_spread <= 2.0
        assert der_spread <= 2.0


GAMMA_RANGES = {"lip": (6 / 64, 6.0), "loglip": (2 / 64, 2.0)}


@pytest.mark.parametrize("recipe", ["identity", "scalar:2+sin"])
@pytest.mark.parametrize("modulus", ["lip", "loglip"])
def test_c09_carleman_probe(modulus, recipe):
    with criterion(9, "Carleman probe c(gamma) >= 1e-6"):
        t0 = time.perf_counter()
        g = TorusGrid(1, 256)
        tg = cm.TimeGrid(1.0, 512)
        w = build_weight(get_modulus(modulus), 6.0)
        lo, hi = GAMMA_RANGES[modulus]
        gammas = tuple(np.geomspace(lo, hi, 16))
        gamma0 = cm.select_gamma0(w, gammas, tg.T)
        cfg = cm.CarlemanProbeConfig(0.5, tuple(x for x in gammas if x >= gamma0), w, 1)
        assert len(cfg.gamma_list) == 16
        A = cm.coefficient_recipe(recipe, g, tg)
        ens = cm.single_mode_ensemble(g, tg, range(1, 17)) + cm.random_ensemble(g, tg, SEED, 32)
        sweep = cm.gamma_sweep(ens, cfg, A)
        assert min(sweep.min_c) >= 1e-6
        assert sweep.passed
        # four runs share the 5 min budget
        assert time.perf_counter() - t0 <= 75.0


def test_c10_verify_determinism(tmp_path):
    with criterion(10, "verify is byte-identical across runs"):
        outs = []
        for d in ("one", "two"):
            assert cli.main(["verify", "--out", str(tmp_path / d), "--quiet"]) == 0
            outs.append(tmp_path / d)
        a, b = (json.loads((o / "suite.json").read_text()) for o in outs)
        dump = lambda x: json.dumps(cli.strip_volatile(x), sort_keys=True)  # noqa: E731
        assert dump(a) == dump(b)
        files = sorted(p.name for p in outs[0].iterdir())
        assert files == sorted(p.name for p in outs[1].iterdir())
        for name in files:
            if name == "suite.json":
                continue
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
