"""End-to-end acceptance checks.

Each test asserts one shipped claim: the p=2 spectral identities, the cell
Green identity, the corrector / Poincaré / operator-norm scaling laws in
both dimensions, the epsilon-rescaling identities, the bounded-host
crossover, the p != 2 lower-bound constructions, dense-oracle equivalence on
small grids, and the determinism / exit-status contract of the CLI.

The expensive 3-D sweep and the shipped 2-D sweep each run once as
module-scoped fixtures and are shared by every test that needs them.
"""

import json
import math
import os

import numpy as np
import pytest

from perfscale import geometry
from perfscale.calculus import assemble_laplacian
from perfscale.cli import main
from perfscale.config import SweepConfig, load_config
from perfscale.corrector import solve_corrector, spacing_for
from perfscale.geometry import DomainSpec, FaceMode, HoleShape, Host
from perfscale.linsolve import (
    dense_solve,
    dense_spectrum,
    smallest_eigenvalue,
    solve_spd,
)
from perfscale.opnorms import empirical_lower_bound_p, norm_p2, rescaling_check
from perfscale.scaling import run_sweep

BALL = HoleShape("ball", (0.25,))
CONFIG_PATH = os.path.join(os.path.dirname(__file__), os.pardir,
                           "configs", "default.ini")


@pytest.fixture(scope="module")
def d2_result():
    """The shipped default sweep: d=2, all quantities, p in {2, 4}."""
    return run_sweep(load_config(CONFIG_PATH))


@pytest.fixture(scope="module")
def d3_result():
    """The 3-D sweep over eta in {1/4, 1/8, 1/16} (cells up to 128^3)."""
    cfg = SweepConfig(
        d=3,
        etas=(0.25, 0.125, 0.0625),
        quantities=("D", "C", "B", "A", "poincare", "corrector-int",
                    "corrector-grad"),
        p=(2.0, 4.0),
    )
    return run_sweep(cfg)


def get_fit(result, quantity, p):
    fit = next((f for f in result.fits
                if f.quantity == quantity and f.p == p), None)
    assert fit is not None, f"missing fit for {quantity} at p={p}"
    return fit


def get_verdict(result, vid):
    v = next((v for v in result.verdicts if v["id"] == vid), None)
    assert v is not None, f"missing verdict {vid}"
    return v


# -------------------------------------------------- 1: spectral identities

def test_spectral_identities_on_bounded_domain():
    spec = DomainSpec(d=2, eta=0.125, shape=BALL, epsilon=0.25,
                      host=Host.BOUNDED)
    grid = geometry.build_bounded_domain(spec, 1 / 512)
    op = assemble_laplacian(grid)
    lam = smallest_eigenvalue(op, tol=1e-10, solve_tol=1e-12).value
    b = norm_p2(grid, "B", op=op, tol=1e-9, solve_tol=1e-12).value
    c = norm_p2(grid, "C", op=op, tol=1e-9, solve_tol=1e-12).value
    a = norm_p2(grid, "A", op=op, tol=1e-9, solve_tol=1e-12).value
    assert abs(b - c) / b <= 1e-6
    assert abs(b * b * lam - 1.0) <= 1e-6
    assert abs(a - 1.0) <= 1e-4


# -------------------------------------------------- 2: Green identity

def test_green_identity_every_solved_cell():
    cases = [(2, eta) for eta in (0.25, 0.125, 0.0625, 0.03125)]
    cases += [(3, eta) for eta in (0.25, 0.125)]
    for d, eta in cases:
        corr = solve_corrector(BALL, eta, spacing_for(eta), d, tol=1e-10)
        assert corr.green_identity_residual <= 1e-9, (d, eta)


# -------------------------------------------------- 3: corrector scalings

def test_corrector_scaling_d3(d3_result):
    fit = get_fit(d3_result, "corrector-grad", 2.0)
    assert abs(fit.b - 0.5) <= 0.1
    ints = [r["value"] for r in d3_result.rows
            if r["quantity"] == "corrector-int"]
    assert len(ints) == 3
    assert max(ints) / min(ints) <= 3.0


def test_corrector_scaling_d2(d2_result):
    fit = get_fit(d2_result, "corrector-int", 2.0)
    assert fit.model == "loglaw"
    assert fit.r2 >= 0.99
    assert fit.b > 0


# -------------------------------------------------- 4: Poincare scaling

def test_poincare_scaling_d3(d3_result):
    fit = get_fit(d3_result, "poincare", 2.0)
    assert abs(fit.b - (-1.0)) <= 0.15


def test_poincare_scaling_d2(d2_result):
    fit = get_fit(d2_result, "poincare", 2.0)
    assert fit.model == "loglaw"
    assert fit.r2 >= 0.98
    assert fit.b > 0


# -------------------------------------------------- 5 and 6: D2, C2 scaling

def test_d2_norm_scaling_d3(d3_result):
    fit = get_fit(d3_result, "D", 2.0)
    assert -1.15 <= fit.b <= -0.85


def test_d2_norm_loglaw_d2(d2_result):
    fit = get_fit(d2_result, "D", 2.0)
    assert fit.model == "loglaw"
    assert fit.r2 >= 0.98
    assert fit.b > 0


def test_c2_norm_scaling_d3(d3_result):
    fit = get_fit(d3_result, "C", 2.0)
    assert -0.65 <= fit.b <= -0.35


# -------------------------------------------------- 7: epsilon rescaling

def test_epsilon_rescaling_identities():
    out = rescaling_check(BALL, eta=0.125, epsilon=0.5, d=2)
    assert abs(out["D_ratio"] - 0.25) <= 0.02 * 0.25
    assert abs(out["C_ratio"] - 0.5) <= 0.02 * 0.5


# -------------------------------------------------- 8: bounded crossover

def test_bounded_domain_crossover():
    cfg = SweepConfig(
        d=2,
        etas=(0.25, 0.125, 0.0625),  # unused by the bounded job
        quantities=("bounded-D",),
        p=(2.0,),
        bounded_eta=0.125,
        bounded_epsilons=(1 / 32, 1 / 16),
    )
    result = run_sweep(cfg)
    assert not result.errors
    rows = {r["epsilon"]: r["value"] for r in result.rows}
    # the small-hole regime applies: eps^2 |ln(eta/2)| <= 0.1 at both points
    for eps in (1 / 32, 1 / 16):
        assert eps**2 * abs(math.log(0.125 / 2)) <= 0.1
    ratio = rows[1 / 16] / rows[1 / 32]
    assert abs(ratio - 4.0) <= 0.15 * 4.0
    saturation = rows[1.0] * (2 * math.pi**2)
    assert 1 / 3 <= saturation <= 3
    assert get_verdict(result, "bounded-crossover-d2")["status"] == "PASS"


# -------------------------------------------------- 9: p != 2 lower bounds

def test_lower_bound_exponents_d3(d3_result):
    d_fit = get_fit(d3_result, "D", 4.0)
    assert d_fit.b <= -0.8
    b_fit = get_fit(d3_result, "B", 4.0)
    assert b_fit.b <= -1.0


def test_p2_lower_bounds_never_exceed_exact():
    for d, eta in ((2, 0.25), (2, 0.125), (3, 0.25)):
        grid = geometry.build_cell_grid(BALL, eta, spacing_for(eta), d)
        op = assemble_laplacian(grid)
        corr = solve_corrector(BALL, eta, spacing_for(eta), d)
        for which in ("B", "C", "D"):
            exact = norm_p2(grid, which, op=op, tol=1e-10,
                            solve_tol=1e-12).value
            low = empirical_lower_bound_p(grid, which, 2.0, corrector=corr,
                                          op=op).value
            assert low <= exact * (1 + 1e-8), (d, eta, which)


# -------------------------------------------------- 10: oracle equivalence

def test_dense_oracle_equivalence_200_cases():
    rng = np.random.default_rng(20240817)
    shapes = [BALL, HoleShape("cube", (0.25,)),
              HoleShape("ellipsoid", (0.3, 0.2))]
    checked = 0
    for case in range(200):
        shape = shapes[case % 3]
        eta = float(rng.choice([1.0, 0.75]))
        n = int(rng.choice([16, 20, 24]))
        boundary = (FaceMode.PERIODIC, FaceMode.DIRICHLET)[case % 2]
        grid = geometry.build_cell_grid(shape, eta, 1.0 / n, 2,
                                        boundary=boundary)
        op = assemble_laplacian(grid)
        assert op.dimension <= 4096
        mode = case % 4
        if mode == 0:  # CG solution vs dense solve
            rhs = rng.standard_normal(op.dimension)
            x = solve_spd(op, rhs, tol=1e-13, method="jacobi-cg",
                          max_iters=20000).vector
            exact = dense_solve(op, rhs)
            assert np.linalg.norm(x - exact) <= 1e-8 * np.linalg.norm(exact)
        elif mode == 1:  # inverse iteration vs dense spectrum
            lam = smallest_eigenvalue(op, tol=1e-12, solve_tol=1e-13,
                                      seed=int(rng.integers(1 << 31))).value
            assert abs(lam - dense_spectrum(op)[0]) <= 1e-8 * lam
        elif mode == 2:  # power-iterated B2 vs dense lambda_min
            b = norm_p2(grid, "B", op=op, tol=1e-12, solve_tol=1e-13).value
            exact = dense_spectrum(op)[0] ** -0.5
            assert abs(b - exact) <= 1e-8 * exact
        else:  # power-iterated D2 vs dense lambda_min
            dval = norm_p2(grid, "D", op=op, tol=1e-12,
                           solve_tol=1e-13).value
            exact = 1.0 / dense_spectrum(op)[0]
            assert abs(dval - exact) <= 1e-8 * exact
        checked += 1
    assert checked == 200


# -------------------------------------------------- 11: determinism, exit

def test_verify_is_reproducible_and_exits_zero(tmp_path, capsys):
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    status1 = main(["--config", CONFIG_PATH, "--output", str(out1), "verify"])
    capsys.readouterr()
    status2 = main(["--config", CONFIG_PATH, "--output", str(out2), "verify"])
    capsys.readouterr()
    assert status1 == 0 and status2 == 0
    for name in ("report.csv", "report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_verify_corrupted_predictions_exit_one(tmp_path, capsys):
    override = tmp_path / "override.json"
    override.write_text(json.dumps({"D-d2-p2": {"r2_min": 1.1}}))
    cfg = load_config(CONFIG_PATH)
    cfg.prediction_override = str(override)
    cfg_path = tmp_path / "corrupted.ini"
    cfg_path.write_text(cfg.to_text())
    out = tmp_path / "out"
    status = main(["--config", str(cfg_path), "--output", str(out), "verify"])
    printed = capsys.readouterr().out
    assert status == 1
    assert "FAIL" in printed
