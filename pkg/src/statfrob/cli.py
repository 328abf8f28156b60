"""Command-line front end.

Spec files are JSON objects with keys ``omega_size``, ``stats``, ``beta`` and
optionally ``target`` and ``labels``. Reports are JSON with sorted keys and
shortest round-trip float rendering, so identical inputs give byte-identical
output. Exit status: 0 when every check passes, 1 when a check fails, 2 on a
malformed or inconsistent spec.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .errors import ParseError, RankDeficient, StatFrobError, ValidationError
from .expfam import (
    PROB_SUM_TOL,
    ExponentialFamily,
    density,
    dual_potential,
    expectation_params,
    fisher_metric,
    log_partition,
    random_family,
    score_matrix,
    skewness_tensor,
)
from .frobenius import (
    associativity_residual,
    christoffels,
    curvature,
    flatness_residual,
    hessian_consistency,
    metric_compatibility_residual,
    mixed_tensor,
    potential_consistency,
    wdvv_curvature_link_residual,
    wdvv_residual,
)
from .gws import gws_tensor
from .parageo import e_geodesic, geodesic_residual, learn, m_geodesic

SPEC_KEYS = ("omega_size", "stats", "beta", "target", "labels")

CONVENTIONS = {
    "density": "rho(w) = exp(-beta.X(w) - psi(beta)); d psi/d beta = -eta",
    "alpha_pencil": "Gamma^(alpha) = Gamma^(0) + (alpha/2) tbar = (1+alpha)/2 tbar in beta coordinates; "
                    "alpha=-1 is affine in beta (e-flat), alpha=+1 is affine in eta (m-flat)",
    "metric_compatibility": "nabla^(alpha) g = -alpha t under this pencil",
    "bregman_kl": "D_psi(b1, b2) = K(rho_b2, rho_b1)",
    "kl": "K(P, Q) = E_P[ln P - ln Q]",
    "wdvv_sign": "even case, sign factor 1",
}

SCORE_CENTERING_TOL = 1e-12
HESSIAN_TOL = 5e-6
FLAT_PLUS_TOL = 1e-8
NONFLAT_MIN = 1e-3
GWS_IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class FamilySpec:
    omega_size: int
    stats: np.ndarray
    beta: np.ndarray
    target: np.ndarray | None = None
    labels: tuple | None = None

    def family(self) -> ExponentialFamily:
        return ExponentialFamily(self.stats)


def _number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _vector(raw, key, length=None):
    if not isinstance(raw, list) or not raw or not all(_number(v) for v in raw):
        raise ValidationError(key, "must be a non-empty list of numbers")
    vec = np.array(raw, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise ValidationError(key, "entries must be finite")
    if length is not None and len(vec) != length:
        raise ValidationError(key, f"has length {len(vec)}, expected {length}")
    return vec


def spec_from_dict(data) -> FamilySpec:
    if not isinstance(data, dict):
        raise ValidationError("<root>", "spec must be a JSON object")
    for key in data:
        if key not in SPEC_KEYS:
            raise ValidationError(key, "unknown key")
    for key in ("omega_size", "stats", "beta"):
        if key not in data:
            raise ValidationError(key, "missing")
    m = data["omega_size"]
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        raise ValidationError("omega_size", "must be an integer >= 2")
    rows = data["stats"]
    if not isinstance(rows, list) or not rows:
        raise ValidationError("stats", "must be a non-empty list of rows")
    stats = np.array([_vector(r, "stats", m) for r in rows])
    try:
        ExponentialFamily(stats)
    except RankDeficient as exc:
        raise ValidationError("stats", str(exc)) from exc
    beta = _vector(data["beta"], "beta", len(stats))
    target = None
    if data.get("target") is not None:
        target = _vector(data["target"], "target", m)
        if np.any(target <= 0):
            raise ValidationError("target", "entries must be strictly positive")
        if abs(target.sum() - 1.0) > PROB_SUM_TOL:
            raise ValidationError("target", f"sums to {target.sum()!r}, not 1")
    labels = None
    if data.get("labels") is not None:
        lab = data["labels"]
        if not isinstance(lab, list) or len(lab) != m or not all(isinstance(x, str) for x in lab):
            raise ValidationError("labels", f"must be a list of {m} strings")
        labels = tuple(lab)
    return FamilySpec(m, stats, beta, target, labels)


def parse_spec(path) -> FamilySpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc.reason})") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    return spec_from_dict(data)


# -- reports -------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    return obj


def render(report) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _check(name, residual, tolerance, comparison="<=", note=None):
    if comparison == "<=":
        ok = residual <= tolerance
    else:
        ok = residual > tolerance
    entry = {"name": name, "residual": residual, "tolerance": tolerance,
             "comparison": comparison, "status": "pass" if ok else "fail"}
    if note:
        entry["note"] = note
    return entry


def _skipped(name, note):
    return {"name": name, "residual": None, "tolerance": None, "comparison": None,
            "status": "skipped", "note": note}


def check_suite(family: ExponentialFamily, beta, h=1e-4, h3=1e-3,
                tol_algebraic=1e-10, tol_numeric=1e-5, zero_skewness=False) -> list[dict]:
    """Run every Frobenius check at one parameter point, in a fixed order.

    ``zero_skewness`` forces t = 0 in the flatness block: every pencil member
    becomes the Levi-Civita connection and alpha = 0 is expected flat.
    """
    checks = []

    def add(name, fn, tolerance, comparison="<=", note=None):
        try:
            residual = fn()
        except StatFrobError as exc:
            raise StatFrobError(f"check {name}: {exc}") from exc
        checks.append(_check(name, residual, tolerance, comparison, note))

    metric = fisher_metric(family, beta)
    t = skewness_tensor(family, beta)
    tbar = mixed_tensor(metric, t)

    add("metric_positivity", lambda: float(np.linalg.eigvalsh(metric.g)[0]), 0.0, ">")
    add("score_centering",
        lambda: float(np.max(np.abs(score_matrix(family, beta) @ density(family, beta)))),
        SCORE_CENTERING_TOL)
    add("associativity", lambda: associativity_residual(metric, tbar), tol_algebraic)
    add("wdvv", lambda: wdvv_residual(metric, t), tol_algebraic)
    add("wdvv_curvature_link",
        lambda: wdvv_curvature_link_residual(family, beta, 0.0) / np.linalg.cond(metric.g), tol_algebraic,
        note="lowered R^(alpha) = (c - c^2) * WDVV defect with c = (1+alpha)/2; residual / cond(g) at alpha=0")
    add("potential_third_derivative", lambda: potential_consistency(family, beta, h3), tol_numeric)
    add("potential_hessian", lambda: hessian_consistency(family, beta, h), HESSIAN_TOL)
    for alpha in (-1.0, 0.0, 1.0):
        add(f"metric_compatibility[alpha={alpha:g}]",
            lambda a=alpha: metric_compatibility_residual(family, beta, a, h), tol_numeric)
    def flat(alpha):
        return lambda: flatness_residual(family, beta, alpha, zero_skewness)

    add("flatness[alpha=-1]", flat(-1.0), tol_algebraic)
    if family.n == 1:
        checks.append(_skipped("flatness[alpha=0]", "skipped: n=1 (trivially flat)"))
    elif zero_skewness:
        add("flatness[alpha=0]", flat(0.0), tol_algebraic, note="t artificially zeroed: expected flat")
    elif np.max(np.abs(t)) <= tol_algebraic:
        add("flatness[alpha=0]", flat(0.0), tol_algebraic, note="t = 0: expected flat")
    else:
        add("flatness[alpha=0]", flat(0.0), NONFLAT_MIN, ">", note="expected non-flat")
    add("flatness[alpha=1]", flat(1.0), FLAT_PLUS_TOL)
    add("gws_order2_equals_metric",
        lambda: float(np.max(np.abs(gws_tensor(family, beta, 2).y - metric.g))), GWS_IDENTITY_TOL)
    add("gws_order3_equals_skewness",
        lambda: float(np.max(np.abs(gws_tensor(family, beta, 3).y - t))), GWS_IDENTITY_TOL)
    return checks


def _overall(checks):
    return "fail" if any(c["status"] == "fail" for c in checks) else "pass"


def _family_block(spec: FamilySpec):
    block = {"omega_size": spec.omega_size, "n": int(spec.stats.shape[0]),
             "stats": spec.stats, "beta": spec.beta}
    if spec.labels is not None:
        block["labels"] = list(spec.labels)
    return block


def run_check(spec: FamilySpec, h=1e-4, h3=1e-3, tol_algebraic=1e-10, tol_numeric=1e-5,
              sweep=0, seed=0, zero_skewness=False) -> dict:
    family = spec.family()
    checks = check_suite(family, spec.beta, h, h3, tol_algebraic, tol_numeric, zero_skewness)
    report = {"command": "check", "conventions": CONVENTIONS, "family": _family_block(spec),
              "checks": checks}
    if zero_skewness:
        report["zero_skewness"] = True
    overall = _overall(checks)
    if sweep:
        rng = np.random.default_rng(seed)
        worst, fails, skips = {}, {}, {}
        for _ in range(sweep):
            fam = random_family(rng)
            beta = rng.uniform(-2.0, 2.0, fam.n)
            for c in check_suite(fam, beta, h, h3, tol_algebraic, tol_numeric, zero_skewness):
                name = c["name"]
                fails.setdefault(name, 0)
                skips.setdefault(name, 0)
                if c["status"] == "skipped":
                    skips[name] += 1
                    continue
                fails[name] += c["status"] == "fail"
                key = "min" if c["comparison"] == ">" else "max"
                prev = worst.get(name)
                r = c["residual"]
                worst[name] = {key: r if prev is None else (min(prev[key], r) if key == "min" else max(prev[key], r)),
                               "tolerance": c["tolerance"], "comparison": c["comparison"]}
        summary = [{"name": name, "failures": fails[name], "skipped": skips[name], **worst.get(name, {})}
                   for name in fails]
        report["sweep"] = {"count": sweep, "seed": seed, "checks": summary,
                           "status": "fail" if any(fails.values()) else "pass"}
        if any(fails.values()):
            overall = "fail"
    report["overall"] = overall
    return report


def tensors_report(spec: FamilySpec, alpha: float) -> dict:
    family = spec.family()
    beta = spec.beta
    metric = fisher_metric(family, beta)
    t = skewness_tensor(family, beta)
    return {
        "command": "tensors",
        "conventions": CONVENTIONS,
        "family": _family_block(spec),
        "alpha": alpha,
        "psi": log_partition(family, beta),
        "eta": expectation_params(family, beta),
        "dual_potential": dual_potential(family, beta),
        "g": metric.g,
        "g_inv": metric.g_inv,
        "t": t,
        "tbar": mixed_tensor(metric, t),
        "christoffel": christoffels(family, beta, alpha).gamma,
        "curvature": curvature(family, beta, alpha),
        "index_layout": {"tbar": "[k][i][j] = tbar^k_ij", "christoffel": "[k][i][j] = Gamma^k_ij",
                         "curvature": "[l][k][i][j] = R^l_kij"},
    }


def gws_report(spec: FamilySpec, order: int) -> dict:
    yt = gws_tensor(spec.family(), spec.beta, order)
    return {"command": "gws", "conventions": CONVENTIONS, "family": _family_block(spec),
            "order": order, "y": yt.y}


def learn_report(spec: FamilySpec, method: str, tol: float, max_iter: int, step: float,
                 intersection_tol: float) -> dict:
    if spec.target is None:
        raise ValidationError("target", "required by learn")
    trace = learn(spec.family(), spec.target, spec.beta, method=method, step=step, tol=tol,
                  max_iter=max_iter, intersection_tol=intersection_tol)
    return {
        "command": "learn",
        "conventions": CONVENTIONS,
        "family": _family_block(spec),
        "target": spec.target,
        "method": trace.method,
        "tol": tol,
        "objective": "K(target, rho_beta)",
        "iterates": [{"beta": b, "kl": k} for b, k in trace.iterates],
        "iterations": trace.n_iter,
        "stop_reason": trace.stop_reason,
        "converged": trace.converged,
        "beta_final": trace.beta_final,
        "beta_hat": trace.beta_hat,
        "intersections": {
            "count": trace.intersections,
            "coincident": trace.coincident,
            "tol": intersection_tol,
            "fiber_gap": trace.fiber_gap,
            "gamma_plus": trace.gamma_plus.points,
            "gamma_minus_projected": trace.gamma_minus_projected.points,
        },
        "overall": "pass" if trace.converged else "fail",
    }


def geodesic_report(spec: FamilySpec, beta1, kind: str, steps: int) -> dict:
    family = spec.family()
    if len(beta1) != family.n:
        raise ValidationError("--to", f"has length {len(beta1)}, expected {family.n}")
    if kind == "e":
        curve, alpha = e_geodesic(family, spec.beta, beta1, steps), -1.0
    else:
        curve, alpha = m_geodesic(family, spec.beta, beta1, steps), 1.0
    report = {"command": "geodesic", "conventions": CONVENTIONS, "family": _family_block(spec),
              "kind": kind, "alpha": alpha, "s": curve.s, "points": curve.points}
    if steps >= 3:
        report["geodesic_residual"] = geodesic_residual(family, curve, alpha)
    return report


# -- click wiring ----------------------------------------------------------------

def _load(path):
    try:
        return parse_spec(path)
    except (ParseError, ValidationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _guard(build):
    try:
        return build()
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except StatFrobError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _emit(report):
    click.echo(render(report), nl=False)
    sys.exit(0 if report.get("overall", "pass") == "pass" else 1)


@click.group()
def cli():
    """Frobenius-structure checks for finite exponential families."""


@cli.command()
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--h", "h", default=1e-4, show_default=True, help="Finite-difference step.")
@click.option("--h3", default=1e-3, show_default=True, help="Step for third differences of psi.")
@click.option("--tol-algebraic", default=1e-10, show_default=True)
@click.option("--tol-numeric", default=1e-5, show_default=True)
@click.option("--sweep", default=0, show_default=True, help="Also run the suite on N random families.")
@click.option("--seed", default=0, show_default=True)
@click.option("--zero-skewness", is_flag=True, help="Force t = 0 in the flatness checks (negative control).")
def check(spec, h, h3, tol_algebraic, tol_numeric, sweep, seed, zero_skewness):
    """Run the full check suite on SPEC."""
    fs = _load(spec)
    _emit(_guard(lambda: run_check(fs, h, h3, tol_algebraic, tol_numeric, sweep, seed, zero_skewness)))


@cli.command()
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--alpha", default=0.0, show_default=True)
def tensors(spec, alpha):
    """Dump g, t, tbar, Christoffel symbols and curvature."""
    fs = _load(spec)
    _emit(_guard(lambda: tensors_report(fs, alpha)))


@cli.command()
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--order", required=True, type=click.IntRange(2, 6))
def gws(spec, order):
    """Dump the order-N derivative tensor of the log-partition."""
    fs = _load(spec)
    _emit(_guard(lambda: gws_report(fs, order)))


@cli.command("learn")
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(["newton", "ngrad"]), default="newton", show_default=True)
@click.option("--tol", default=1e-12, show_default=True)
@click.option("--max-iter", default=50, show_default=True)
@click.option("--step", default=1.0, show_default=True, help="Natural-gradient step size.")
@click.option("--intersection-tol", default=1e-6, show_default=True)
def learn_cmd(spec, method, tol, max_iter, step, intersection_tol):
    """Minimise K(target, rho_beta) starting from the spec's beta."""
    fs = _load(spec)
    _emit(_guard(lambda: learn_report(fs, method, tol, max_iter, step, intersection_tol)))


@cli.command()
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--to", "to", required=True, help="Comma-separated end point beta1.")
@click.option("--kind", type=click.Choice(["e", "m"]), default="e", show_default=True)
@click.option("--steps", default=11, show_default=True, type=click.IntRange(2, None))
def geodesic(spec, to, kind, steps):
    """Sample the e- or m-geodesic from the spec's beta to --to."""
    fs = _load(spec)
    try:
        beta1 = np.array([float(x) for x in to.split(",")])
    except ValueError:
        click.echo(f"error: --to: cannot parse {to!r}", err=True)
        sys.exit(2)
    _emit(_guard(lambda: geodesic_report(fs, beta1, kind, steps)))


def main(argv=None):
    cli.main(args=argv, prog_name="statfrob")


if __name__ == "__main__":
    main()
