"""Scaling-law predictions, exponent fits, and the sweep orchestrator.

The prediction table encodes the closed-form eta-laws of the four operator
norms, the hole-pinned Poincaré constant, and the corrector statistics, for
both d=3 (power laws in eta) and d=2 (logarithmic laws, fitted against
``|ln(eta/2)|``). A sweep measures the requested quantities over an eta
list, fits each series, and turns fits into PASS/FAIL verdicts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .calculus import assemble_laplacian
from .config import SweepConfig
from .corrector import solve_corrector, spacing_for
from .geometry import DomainSpec, FaceMode, Host
from .opnorms import empirical_lower_bound_p, norm_p2, poincare_constant

POWER = "power"
LOGLAW = "loglaw"
BOUNDED_RATIO = "bounded-ratio"

TWO_SIDED = "two-sided"
LOWER = "lower"

#: slack added to lower-bound exponent checks (construction constants eat
#: a little exponent at desk-scale eta ranges); D's construction is tighter
LOWER_SLACK = {"D": 0.2}
DEFAULT_LOWER_SLACK = 0.25

TWO_SIDED_TOL = 0.15
R2_MIN = 0.98


@dataclass(frozen=True)
class TheoremPrediction:
    id: str
    quantity: str
    d: int
    p: float
    model: str  # power | loglaw | bounded-ratio
    eps_exponent: float
    eta_exponent: float | None = None  # power model
    log_power: float | None = None  # loglaw model: value ~ |ln(eta/2)|^log_power
    bound: str = TWO_SIDED
    delta_loss: bool = False
    regime: str = "lattice"
    tolerance: float = TWO_SIDED_TOL
    r2_min: float = R2_MIN
    ratio_max: float = 3.0  # bounded-ratio model

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "quantity": self.quantity,
            "d": self.d,
            "p": self.p,
            "model": self.model,
            "eps_exponent": self.eps_exponent,
            "eta_exponent": self.eta_exponent,
            "log_power": self.log_power,
            "bound": self.bound,
            "delta_loss": self.delta_loss,
            "regime": self.regime,
            "tolerance": self.tolerance,
            "r2_min": self.r2_min,
            "ratio_max": self.ratio_max,
        }


def _norm_predictions(d: int, p: float) -> list[TheoremPrediction]:
    out = []

    def pred(quantity, **kw):
        out.append(TheoremPrediction(
            id=f"{quantity}-d{d}-p{p:g}", quantity=quantity, d=d, p=p, **kw))

    if d >= 3:
        pred("D", model=POWER, eps_exponent=2, eta_exponent=2 - d,
             bound=TWO_SIDED)
        if p >= 2:
            pred("C", model=POWER, eps_exponent=1, eta_exponent=(2 - d) / 2,
                 bound=TWO_SIDED)
        else:
            pred("C", model=POWER, eps_exponent=1, eta_exponent=1 - d / p,
                 bound=LOWER, delta_loss=True,
                 tolerance=DEFAULT_LOWER_SLACK)
        if p <= 2:
            pred("B", model=POWER, eps_exponent=1, eta_exponent=1 - d / 2,
                 bound=TWO_SIDED)
        else:
            pred("B", model=POWER, eps_exponent=1,
                 eta_exponent=1 - d + d / p, bound=LOWER, delta_loss=True,
                 tolerance=DEFAULT_LOWER_SLACK)
        if p == 2:
            pred("A", model=POWER, eps_exponent=0, eta_exponent=0,
                 bound=TWO_SIDED)
        else:
            pred("A", model=POWER, eps_exponent=0,
                 eta_exponent=-d * abs(0.5 - 1 / p), bound=LOWER,
                 delta_loss=True, tolerance=DEFAULT_LOWER_SLACK)
    else:  # d == 2: logarithmic laws
        pred("D", model=LOGLAW, eps_exponent=2, log_power=1.0,
             bound=TWO_SIDED)
        if p >= 2:
            pred("C", model=LOGLAW, eps_exponent=1, log_power=0.5,
                 bound=TWO_SIDED)
        else:
            pred("C", model=POWER, eps_exponent=1, eta_exponent=1 - 2 / p,
                 bound=LOWER, delta_loss=True, tolerance=DEFAULT_LOWER_SLACK)
        if p <= 2:
            pred("B", model=LOGLAW, eps_exponent=1, log_power=0.5,
                 bound=TWO_SIDED)
        else:
            pred("B", model=POWER, eps_exponent=1, eta_exponent=-1 + 2 / p,
                 bound=LOWER, delta_loss=True, tolerance=DEFAULT_LOWER_SLACK)
        if p == 2:
            pred("A", model=POWER, eps_exponent=0, eta_exponent=0,
                 bound=TWO_SIDED)
        else:
            pred("A", model=POWER, eps_exponent=0,
                 eta_exponent=-2 * abs(0.5 - 1 / p), bound=LOWER,
                 delta_loss=True, tolerance=DEFAULT_LOWER_SLACK)
    return out


def theorem_predictions(d: int, p: float) -> list[TheoremPrediction]:
    """Closed-form scaling table for dimension d and exponent p.

    Operator-norm entries appear for every p; the p-independent entries
    (Poincaré constant at p=2, corrector statistics, bounded-host crossover)
    are listed once, under p=2.
    """
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    if not (1 < p < math.inf):
        raise ValueError("p must lie in (1, inf)")
    preds = _norm_predictions(d, p)
    if p == 2:
        if d >= 3:
            preds.append(TheoremPrediction(
                id=f"poincare-d{d}", quantity="poincare", d=d, p=2.0,
                model=POWER, eps_exponent=2, eta_exponent=2 - d,
                bound=TWO_SIDED, regime="cell"))
            preds.append(TheoremPrediction(
                id=f"corrector-grad-d{d}", quantity="corrector-grad", d=d,
                p=2.0, model=POWER, eps_exponent=0,
                eta_exponent=(d - 2) / 2, bound=TWO_SIDED, tolerance=0.1,
                regime="cell"))
            preds.append(TheoremPrediction(
                id=f"corrector-int-d{d}", quantity="corrector-int", d=d,
                p=2.0, model=BOUNDED_RATIO, eps_exponent=0, ratio_max=3.0,
                regime="cell"))
        else:
            preds.append(TheoremPrediction(
                id=f"poincare-d{d}", quantity="poincare", d=d, p=2.0,
                model=LOGLAW, eps_exponent=2, log_power=1.0,
                bound=TWO_SIDED, regime="cell"))
            preds.append(TheoremPrediction(
                id=f"corrector-grad-d{d}", quantity="corrector-grad", d=d,
                p=2.0, model=LOGLAW, eps_exponent=0, log_power=0.5,
                bound=TWO_SIDED, regime="cell"))
            preds.append(TheoremPrediction(
                id=f"corrector-int-d{d}", quantity="corrector-int", d=d,
                p=2.0, model=LOGLAW, eps_exponent=0, log_power=1.0,
                bound=TWO_SIDED, r2_min=0.99, regime="cell"))
        preds.append(TheoremPrediction(
            id=f"bounded-crossover-d{d}", quantity="bounded-D", d=d, p=2.0,
            model=BOUNDED_RATIO, eps_exponent=2, ratio_max=0.15,
            regime="bounded"))
    return preds


@dataclass
class ScalingFit:
    quantity: str
    p: float
    model: str
    a: float
    b: float
    stderr_b: float
    r2: float
    residual_max: float
    log_power: float = 1.0
    n_points: int = 0

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "p": self.p,
            "model": self.model,
            "a": self.a,
            "b": self.b,
            "stderr_b": self.stderr_b,
            "r2": self.r2,
            "residual_max": self.residual_max,
            "log_power": self.log_power,
            "n_points": self.n_points,
        }


def fit_scaling(pairs, model: str, log_power: float = 1.0,
                quantity: str = "", p: float = 2.0) -> ScalingFit:
    """Least squares fit of measured (eta, value) pairs.

    ``power``: ln value = ln a + b ln eta.
    ``loglaw``: value^(1/log_power) = a + b |ln(eta/2)| — a straight line in
    the transformed ordinate when the law holds.
    """
    pairs = [(float(e), float(v)) for e, v in pairs]
    if len(pairs) < 3:
        raise ValueError("need at least 3 points to fit")
    etas = np.array([e for e, _ in pairs])
    vals = np.array([v for _, v in pairs])
    if len(set(etas.tolist())) < 3:
        raise ValueError("degenerate abscissae: need 3 distinct eta values")
    if model == POWER:
        if np.any(vals <= 0):
            raise ValueError("power-law fit needs positive values")
        x, y = np.log(etas), np.log(vals)
    elif model == LOGLAW:
        x, y = np.abs(np.log(etas / 2.0)), vals ** (1.0 / log_power)
    else:
        raise ValueError(f"unknown fit model {model!r}")
    n = len(x)
    A = np.stack([np.ones(n), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(n - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr_b = math.sqrt(ss_res / dof / sxx) if sxx > 0 else math.inf
    a = math.exp(coef[0]) if model == POWER else float(coef[0])
    return ScalingFit(quantity=quantity, p=p, model=model, a=a,
                      b=float(coef[1]), stderr_b=stderr_b, r2=max(0.0, r2),
                      residual_max=float(np.max(np.abs(resid))),
                      log_power=log_power, n_points=n)


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[dict] = field(default_factory=list)
    fits: list[ScalingFit] = field(default_factory=list)
    verdicts: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config.digest(),
            "effective_config": self.config.to_text(),
            "rows": self.rows,
            "fits": [f.to_dict() for f in self.fits],
            "verdicts": self.verdicts,
            "errors": self.errors,
        }


def _cell_jobs(cfg: SweepConfig, eta: float) -> list[dict]:
    """All single-eta measurements on the unit periodicity cell."""
    shape = cfg.shape()
    d = cfg.d
    h = spacing_for(eta, cfg.cells_per_eta)
    rows = []
    wanted = set(cfg.quantities)
    norm_qs = [q for q in ("A", "B", "C", "D") if q in wanted]

    need_corrector = (
        "corrector-int" in wanted
        or "corrector-grad" in wanted
        or any(p != 2 for p in cfg.p) and norm_qs
    )
    corr = None
    if need_corrector:
        corr = solve_corrector(shape, eta, h, d, p_set=tuple(cfg.p) + (2.0,),
                               tol=cfg.tol)
        if "corrector-int" in wanted:
            rows.append({
                "quantity": "corrector-int", "d": d, "p": 2.0, "epsilon": 1.0,
                "eta": eta, "value": corr.integral, "kind": "measured",
                "h": h, "iterations": 1,
            })
        if "corrector-grad" in wanted:
            rows.append({
                "quantity": "corrector-grad", "d": d, "p": 2.0,
                "epsilon": 1.0, "eta": eta, "value": corr.grad_norms[2.0],
                "kind": "measured", "h": h, "iterations": 1,
            })

    if norm_qs:
        grid = geometry.build_cell_grid(shape, eta, h, d,
                                        boundary=FaceMode.PERIODIC)
        op = assemble_laplacian(grid)
        for q in norm_qs:
            for p in cfg.p:
                if p == 2:
                    est = norm_p2(grid, q, op=op, eta=eta, epsilon=1.0,
                                  tol=cfg.power_tol, solve_tol=min(cfg.tol, 1e-11),
                                  domain="lattice-cell")
                else:
                    if q in ("A", "C"):
                        # the tiled-corrector trial is not sharp for these;
                        # their p != 2 laws are exercised at p = 2 via duality
                        continue
                    est = empirical_lower_bound_p(
                        grid, q, p, corrector=corr, cutoff_R=None, op=op,
                        eta=eta, epsilon=1.0, domain="lattice-cell")
                row = est.to_dict()
                row["quantity"] = row.pop("which")
                row["d"] = d
                rows.append(row)

    if "poincare" in wanted:
        pgrid = geometry.build_cell_grid(shape, eta, h, d,
                                         boundary=FaceMode.NEUMANN)
        value = poincare_constant(pgrid, tol=cfg.power_tol,
                                  solve_tol=min(cfg.tol, 1e-11))
        rows.append({
            "quantity": "poincare", "d": d, "p": 2.0, "epsilon": 1.0,
            "eta": eta, "value": value, "kind": "measured", "h": h,
            "iterations": 1,
        })
    return rows


def _bounded_jobs(cfg: SweepConfig) -> list[dict]:
    """D₂ on the unit-cube host across the requested epsilon list."""
    if "bounded-D" not in cfg.quantities or not cfg.bounded_epsilons:
        return []
    shape = cfg.shape()
    rows = []
    eta = cfg.bounded_eta
    epsilons = sorted(set(cfg.bounded_epsilons))
    if 1.0 not in epsilons:
        epsilons = epsilons + [1.0]  # saturation reference point
    for eps in epsilons:
        limit = eps * eta * shape.c0 / geometry.RESOLUTION_CELLS
        h = 0.5 ** math.ceil(-math.log2(limit))
        spec = DomainSpec(d=cfg.d, eta=eta, shape=shape, epsilon=eps,
                          host=Host.BOUNDED)
        grid = geometry.build_bounded_domain(spec, h)
        # the low spectrum of a strongly perforated host is nearly
        # degenerate (one mode per interior cell), so a tight Rayleigh
        # settling tolerance is unreachable; the verdict only needs ~1e-2
        est = norm_p2(grid, "D", eta=eta, epsilon=eps,
                      tol=max(cfg.power_tol, 1e-3), solve_tol=1e-6,
                      domain="bounded")
        row = est.to_dict()
        row["quantity"] = "bounded-D"
        row.pop("which")
        row["d"] = cfg.d
        rows.append(row)
    return rows


ROW_KEY = ("quantity", "p", "epsilon", "eta")


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Execute all configured measurements, fit, and attach verdicts.

    Sweep points are independent jobs on a bounded worker pool; rows are
    merged in a deterministic key order regardless of completion order.
    Per-job failures become error records, not aborts.
    """
    result = SweepResult(config=cfg)
    jobs = []
    for eta in sorted(set(cfg.etas), reverse=True):
        jobs.append(("cell", eta, lambda e=eta: _cell_jobs(cfg, e)))
    jobs.append(("bounded", 0.0, lambda: _bounded_jobs(cfg)))

    rows: list[dict] = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [(name, eta, pool.submit(fn)) for name, eta, fn in jobs]
        for name, eta, fut in futures:
            try:
                rows.extend(fut.result())
            except Exception as exc:
                result.errors.append({
                    "job": name, "eta": eta, "error": f"{type(exc).__name__}: {exc}",
                })
    rows.sort(key=lambda r: (r["quantity"], r["p"],
                             -r["epsilon"], -r["eta"]))
    result.rows = rows
    result.fits = compute_fits(cfg, rows)
    result.verdicts = compute_verdicts(cfg, rows, result.fits,
                                       load_overrides(cfg))
    if result.errors:
        for err in result.errors:
            result.verdicts.append({
                "id": f"job-{err['job']}-eta-{err['eta']:g}",
                "quantity": err["job"], "predicted": None, "fitted": None,
                "stderr": None, "tolerance": None, "status": "FAIL",
                "detail": err["error"],
            })
    return result


def load_overrides(cfg: SweepConfig) -> dict:
    if not cfg.prediction_override:
        return {}
    import json

    with open(cfg.prediction_override, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _predictions_for(cfg: SweepConfig, overrides: dict) -> list[TheoremPrediction]:
    preds = []
    for p in sorted(set(cfg.p)):
        for pred in theorem_predictions(cfg.d, p):
            if pred.quantity not in cfg.quantities:
                continue
            if pred.id in overrides:
                values = pred.to_dict()
                values.update(overrides[pred.id])
                pred = TheoremPrediction(**values)
            preds.append(pred)
    return preds


def compute_fits(cfg: SweepConfig, rows: list[dict]) -> list[ScalingFit]:
    fits = []
    for pred in _predictions_for(cfg, {}):
        if pred.model == BOUNDED_RATIO:
            continue
        series = [
            (r["eta"], r["value"]) for r in rows
            if r["quantity"] == pred.quantity and r["p"] == pred.p
            and r["quantity"] != "bounded-D" and np.isfinite(r["value"])
        ]
        if len(series) < 3:
            continue
        fits.append(fit_scaling(series, pred.model,
                                log_power=pred.log_power or 1.0,
                                quantity=pred.quantity, p=pred.p))
    return fits


def _verdict_for(pred: TheoremPrediction, fits: list[ScalingFit],
                 rows: list[dict]) -> dict | None:
    base = {
        "id": pred.id,
        "quantity": pred.quantity,
        "predicted": pred.eta_exponent,
        "fitted": None,
        "stderr": None,
        "tolerance": pred.tolerance,
        "status": "FAIL",
        "detail": "",
    }
    if pred.model == BOUNDED_RATIO and pred.quantity == "bounded-D":
        series = sorted(
            ((r["epsilon"], r["value"]) for r in rows
             if r["quantity"] == "bounded-D"),
        )
        small = [(e, v) for e, v in series if e < 1.0]
        if len(small) < 2:
            return None
        (e1, v1), (e2, v2) = small[0], small[1]
        if abs(e2 - 2 * e1) > 1e-12:
            base["detail"] = "epsilon list is not a doubling pair"
            return base
        ratio = v2 / v1
        expected = (e2 / e1) ** 2
        ok = abs(ratio - expected) <= pred.ratio_max * expected
        base.update(predicted=expected, fitted=ratio,
                    tolerance=pred.ratio_max,
                    detail=f"doubling ratio at eps={e1:g}->{e2:g}")
        saturated = [(e, v) for e, v in series if e == 1.0]
        if saturated:
            # at eps=1 no cell is perforated; D₂ must sit within a factor 3
            # of the unperforated-host value 1/(d π²)
            ref = 1.0 / (pred.d * math.pi**2)
            factor = saturated[0][1] / ref
            ok = ok and (1 / 3 <= factor <= 3)
            base["detail"] += f"; saturation factor {factor:.3f} vs 1"
        base["status"] = "PASS" if ok else "FAIL"
        return base
    if pred.model == BOUNDED_RATIO and pred.quantity == "corrector-int":
        vals = [r["value"] for r in rows
                if r["quantity"] == "corrector-int" and r["p"] == pred.p]
        if len(vals) < 3:
            return None
        ratio = max(vals) / min(vals)
        base.update(predicted=1.0, fitted=ratio, tolerance=pred.ratio_max,
                    status="PASS" if ratio <= pred.ratio_max else "FAIL",
                    detail="max/min ratio across the eta sweep")
        return base

    fit = next((f for f in fits
                if f.quantity == pred.quantity and f.p == pred.p), None)
    if fit is None:
        return None
    if pred.model == LOGLAW:
        ok = fit.r2 >= pred.r2_min and fit.b > 0
        base.update(predicted=pred.r2_min, fitted=fit.r2,
                    stderr=fit.stderr_b, tolerance=pred.r2_min,
                    status="PASS" if ok else "FAIL",
                    detail=f"log-law linearity (power {pred.log_power})")
        return base
    # power model
    base.update(predicted=pred.eta_exponent, fitted=fit.b,
                stderr=fit.stderr_b)
    if pred.bound == TWO_SIDED:
        ok = abs(fit.b - pred.eta_exponent) <= pred.tolerance
        base["detail"] = "two-sided exponent match"
    else:
        slack = LOWER_SLACK.get(pred.quantity, pred.tolerance)
        ok = fit.b <= pred.eta_exponent + slack
        base["tolerance"] = slack
        base["detail"] = "lower-bound strength (fitted must not be weaker)"
    base["status"] = "PASS" if ok else "FAIL"
    return base


def compute_verdicts(cfg: SweepConfig, rows: list[dict],
                     fits: list[ScalingFit], overrides: dict) -> list[dict]:
    verdicts = []
    for pred in _predictions_for(cfg, overrides):
        v = _verdict_for(pred, fits, rows)
        if v is not None:
            verdicts.append(v)
    return verdicts


def verify_report(result: SweepResult) -> tuple[list[str], int]:
    """One line per verdict plus a summary; exit status 0 iff no FAIL."""
    lines = []
    for v in result.verdicts:
        pred = v["predicted"]
        fitted = v["fitted"]
        stderr = v.get("stderr")
        pm = f" ± {stderr:.3f}" if isinstance(stderr, float) else ""
        lines.append(
            f"{v['status']:4s} {v['id']:28s} predicted={_fmt(pred)} "
            f"fitted={_fmt(fitted)}{pm} tol={_fmt(v.get('tolerance'))} "
            f"{v.get('detail', '')}"
        )
    n_fail = sum(1 for v in result.verdicts if v["status"] != "PASS")
    lines.append(f"{len(result.verdicts)} checks, {n_fail} failures")
    return lines, (1 if n_fail else 0)


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)
