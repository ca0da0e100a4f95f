"""Weighted nonlinear least-squares fits of the sequence decay models.

Three models are supported: offset-plus-exponential ``A + B u^(m-1)`` for
trace-preserving noise, the two-exponential ``A lp^(m-1) + B lm^(m-1)`` for
trace-decreasing noise, and the pure exponential ``C S^(m-1)`` for the loss
protocol.  Rates are constrained to [0, 1] through logistic transforms and
optimized with a damped Gauss-Newton iteration that only ever accepts
steps that decrease the weighted residual.  Confidence intervals are
linearized (Jacobian-based) 95% intervals, with an optional parametric
bootstrap for small datasets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

MAX_ITERATIONS = 500
REL_TOL = 1e-12
_CONDITION_LIMIT = 1e10


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    ci95: dict[str, float]
    covariance: np.ndarray
    rms_residual: float
    converged: bool
    iterations: int
    lambda_sum: float | None = None
    fallback_to_tp: bool = False
    condition: float = 0.0
    message: str = ""

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "params": dict(self.params),
            "ci95": dict(self.ci95),
            "rms_residual": self.rms_residual,
            "converged": self.converged,
            "iterations": self.iterations,
        }
        if self.lambda_sum is not None:
            out["lambda_sum"] = self.lambda_sum
        if self.fallback_to_tp:
            out["fallback_to_tp"] = True
        if self.message:
            out["message"] = self.message
        return out


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return float(np.log(p / (1.0 - p)))


def _extract(data) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    if hasattr(data, "lengths"):
        x = np.asarray(data.lengths, dtype=float)
        y = np.asarray(data.mean, dtype=float)
        se = np.asarray(data.stderr, dtype=float)
        se = se if np.all(se > 0) else None
        return x, y, se
    if len(data) == 2:
        x, y = data
        return np.asarray(x, dtype=float), np.asarray(y, dtype=float), None
    x, y, se = data
    se = np.asarray(se, dtype=float) if se is not None else None
    if se is not None and not np.all(se > 0):
        se = None
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float), se


def _pow_m1(base: float, x: np.ndarray) -> np.ndarray:
    # base**(m-1) with 0**0 == 1
    return np.power(base, x - 1.0)


def _damped_gauss_newton(model, jacobian, theta0, x, y, w, trace: list | None = None):
    """Levenberg-damped Gauss-Newton; accepted steps never increase the residual."""
    theta = np.array(theta0, dtype=float)
    resid = w * (y - model(theta, x))
    ssr = float(resid @ resid)
    if trace is not None:
        trace.append(ssr)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        jac = w[:, None] * jacobian(theta, x)
        grad = jac.T @ resid
        hess = jac.T @ jac
        # Marquardt scaling with a relative floor so directions of nearly
        # zero curvature cannot blow up the step
        diag = np.diag(hess)
        damping = np.diag(np.maximum(diag, 1e-6 * max(float(diag.max()), 1e-300)))
        step_found = False
        for _ in range(60):
            try:
                delta = np.linalg.solve(hess + lam * damping, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            cand_resid = w * (y - model(cand, x))
            cand_ssr = float(cand_resid @ cand_resid)
            if np.isfinite(cand_ssr) and cand_ssr <= ssr:
                step_found = True
                break
            lam *= 10.0
        if not step_found:
            converged = True  # no downhill step exists at any damping: at a minimum
            break
        rel_drop = (ssr - cand_ssr) / max(ssr, 1e-300)
        step_size = float(np.linalg.norm(delta)) / (1.0 + float(np.linalg.norm(theta)))
        theta, resid, ssr = cand, cand_resid, cand_ssr
        if trace is not None:
            trace.append(ssr)
        lam = max(lam / 3.0, 1e-12)
        if rel_drop < REL_TOL or step_size < REL_TOL:
            converged = True
            break
    jac = w[:, None] * jacobian(theta, x)
    return theta, ssr, jac, converged, iterations


def _covariance(jac: np.ndarray, ssr: float, n_points: int, weighted: bool) -> np.ndarray:
    hess = jac.T @ jac
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(hess)
    if not weighted:
        dof = max(n_points - jac.shape[1], 1)
        cov = cov * (ssr / dof)
    return cov


def _finish(model_name, theta, names, transform, jac_transform, ssr, jac, x, y,
            converged, iterations, weighted) -> FitResult:
    natural = transform(theta)
    d_nat = jac_transform(theta)
    cov_theta = _covariance(jac, ssr, len(x), weighted)
    cov = d_nat @ cov_theta @ d_nat.T
    ci = 1.96 * np.sqrt(np.maximum(np.diag(cov), 0.0))
    cond = float(np.linalg.cond(jac)) if np.all(np.isfinite(jac)) else np.inf
    return FitResult(
        model=model_name,
        params={n: float(v) for n, v in zip(names, natural)},
        ci95={n: float(c) for n, c in zip(names, ci)},
        covariance=cov,
        rms_residual=float(np.sqrt(np.mean((y - _eval_natural(model_name, natural, x)) ** 2))),
        converged=converged,
        iterations=iterations,
        condition=cond,
        message="" if converged else "no convergence within the iteration limit",
    )


def _eval_natural(model_name: str, p, x: np.ndarray) -> np.ndarray:
    if model_name == "tp":
        return p[0] + p[1] * _pow_m1(p[2], x)
    if model_name == "td":
        return p[0] * _pow_m1(p[2], x) + p[1] * _pow_m1(p[3], x)
    return p[0] * _pow_m1(p[1], x)


def tp_model(p, x: np.ndarray) -> np.ndarray:
    """Offset decay A + B u^(m-1) evaluated at natural parameters (A, B, u)."""
    return _eval_natural("tp", p, x)


def td_model(p, x: np.ndarray) -> np.ndarray:
    """Two-exponential decay at natural parameters (A, B, lambda+, lambda-)."""
    return _eval_natural("td", p, x)


def loss_model(p, x: np.ndarray) -> np.ndarray:
    """Pure exponential C S^(m-1) at natural parameters (C, S)."""
    return _eval_natural("loss", p, x)


def _check_lengths(x: np.ndarray, minimum: int, model: str) -> None:
    if len(np.unique(x)) < minimum:
        raise ValueError(f"{model} fit needs at least {minimum} distinct sequence lengths")


def _rate_slope_init(x: np.ndarray, y: np.ndarray, offset: float) -> float:
    resid = np.abs(y - offset)
    mask = resid > 1e-300
    if mask.sum() < 2 or len(np.unique(x[mask])) < 2:
        return 0.9
    slope = np.polyfit(x[mask] - 1.0, np.log(resid[mask]), 1)[0]
    return float(np.clip(np.exp(slope), 1e-6, 1.0 - 1e-9))


def fit_tp_decay(data, bootstrap: bool = False, n_boot: int = 200, seed: int = 0) -> FitResult:
    """Fit A + B u^(m-1) with u constrained to [0, 1].

    ``data`` is a :class:`~purityrb.protocol.DecayDataset` or an (x, y) or
    (x, y, stderr) triple.  Weights come from the standard errors when all
    are positive, otherwise the fit is unweighted.
    """
    x, y, se = _extract(data)
    _check_lengths(x, 3, "tp")
    w = 1.0 / se if se is not None else np.ones_like(y)

    tail = max(1, int(round(0.1 * len(y))))
    a0 = float(np.mean(y[np.argsort(x)][-tail:]))
    b0 = float(y[np.argmin(x)] - a0)
    u0 = _rate_slope_init(x, y, a0)

    def model(theta, x):
        return theta[0] + theta[1] * _pow_m1(expit(theta[2]), x)

    def jacobian(theta, x):
        u = expit(theta[2])
        du_dt = u * (1.0 - u)
        powers = _pow_m1(u, x)
        dpow_du = np.where(x > 1, (x - 1.0) * _pow_m1(u, x - 1.0), 0.0)
        return np.column_stack([np.ones_like(x), powers, theta[1] * dpow_du * du_dt])

    theta0 = np.array([a0, b0, _logit(u0)])
    theta, ssr, jac, converged, iterations = _damped_gauss_newton(model, jacobian, theta0, x, y, w)

    def transform(theta):
        return np.array([theta[0], theta[1], expit(theta[2])])

    def jac_transform(theta):
        u = expit(theta[2])
        return np.diag([1.0, 1.0, u * (1.0 - u)])

    result = _finish("tp", theta, ("A", "B", "u"), transform, jac_transform,
                     ssr, jac, x, y, converged, iterations, se is not None)
    if bootstrap:
        result.ci95 = _bootstrap_ci(fit_tp_decay, result, x, y, se, n_boot, seed)
    return result


def fit_td_decay(data, bootstrap: bool = False, n_boot: int = 200, seed: int = 0) -> FitResult:
    """Fit A lp^(m-1) + B lm^(m-1) with 0 <= lm <= lp <= 1.

    Reports lambda_sum = lp + lm alongside the parameters.  When the two
    rates collapse the problem is ill-conditioned; the fit then falls back
    to the offset model and flags it.
    """
    x, y, se = _extract(data)
    _check_lengths(x, 5, "td")
    w = 1.0 / se if se is not None else np.ones_like(y)

    seed_fit = fit_tp_decay((x, y, se))
    a0, b0 = seed_fit.params["A"], seed_fit.params["B"]
    lp0 = 1.0 - 1e-6
    ratio0 = np.clip(seed_fit.params["u"] / lp0, 1e-6, 1.0 - 1e-9)

    def rates(theta):
        lp = expit(theta[2])
        return lp, lp * expit(theta[3])

    def model(theta, x):
        lp, lm = rates(theta)
        return theta[0] * _pow_m1(lp, x) + theta[1] * _pow_m1(lm, x)

    def jacobian(theta, x):
        lp, lm = rates(theta)
        ratio = expit(theta[3])
        dlp = lp * (1.0 - lp)
        dratio = ratio * (1.0 - ratio)
        dpow_lp = np.where(x > 1, (x - 1.0) * _pow_m1(lp, x - 1.0), 0.0)
        dpow_lm = np.where(x > 1, (x - 1.0) * _pow_m1(lm, x - 1.0), 0.0)
        col_a = _pow_m1(lp, x)
        col_b = _pow_m1(lm, x)
        col_tp = theta[0] * dpow_lp * dlp + theta[1] * dpow_lm * ratio * dlp
        col_tr = theta[1] * dpow_lm * lp * dratio
        return np.column_stack([col_a, col_b, col_tp, col_tr])

    theta0 = np.array([a0, b0, _logit(lp0), _logit(float(ratio0))])
    theta, ssr, jac, converged, iterations = _damped_gauss_newton(model, jacobian, theta0, x, y, w)

    def transform(theta):
        lp, lm = rates(theta)
        return np.array([theta[0], theta[1], lp, lm])

    def jac_transform(theta):
        lp, lm = rates(theta)
        ratio = expit(theta[3])
        d = np.zeros((4, 4))
        d[0, 0] = d[1, 1] = 1.0
        d[2, 2] = lp * (1.0 - lp)
        d[3, 2] = ratio * lp * (1.0 - lp)
        d[3, 3] = lp * ratio * (1.0 - ratio)
        return d

    result = _finish("td", theta, ("A", "B", "lambda_plus", "lambda_minus"),
                     transform, jac_transform, ssr, jac, x, y, converged, iterations,
                     se is not None)
    lp, lm = result.params["lambda_plus"], result.params["lambda_minus"]
    result.lambda_sum = lp + lm

    if result.condition > _CONDITION_LIMIT or abs(lp - lm) < 1e-6:
        fallback = fit_tp_decay((x, y, se), bootstrap=bootstrap, n_boot=n_boot, seed=seed)
        fallback.fallback_to_tp = True
        fallback.message = (
            f"two-exponential fit ill-conditioned (condition {result.condition:.2e}, "
            f"rate gap {abs(lp - lm):.2e}); reporting the single-rate model"
        )
        return fallback
    if bootstrap:
        result.ci95 = _bootstrap_ci(fit_td_decay, result, x, y, se, n_boot, seed)
    return result


def loss_fit(data, bootstrap: bool = False, n_boot: int = 200, seed: int = 0) -> FitResult:
    """Fit the pure exponential C S^(m-1) to first-moment (loss) data."""
    x, y, se = _extract(data)
    _check_lengths(x, 3, "loss")
    w = 1.0 / se if se is not None else np.ones_like(y)

    mask = np.abs(y) > 1e-300
    if mask.sum() >= 2 and len(np.unique(x[mask])) >= 2:
        slope, intercept = np.polyfit(x[mask] - 1.0, np.log(np.abs(y[mask])), 1)
        s0 = float(np.clip(np.exp(slope), 1e-6, 1.0 - 1e-9))
        c0 = float(np.sign(y[np.argmin(x)]) * np.exp(intercept))
    else:
        s0, c0 = 0.9, float(y[np.argmin(x)])

    def model(theta, x):
        return theta[0] * _pow_m1(expit(theta[1]), x)

    def jacobian(theta, x):
        s = expit(theta[1])
        dpow = np.where(x > 1, (x - 1.0) * _pow_m1(s, x - 1.0), 0.0)
        return np.column_stack([_pow_m1(s, x), theta[0] * dpow * s * (1.0 - s)])

    theta0 = np.array([c0, _logit(s0)])
    theta, ssr, jac, converged, iterations = _damped_gauss_newton(model, jacobian, theta0, x, y, w)

    def transform(theta):
        return np.array([theta[0], expit(theta[1])])

    def jac_transform(theta):
        s = expit(theta[1])
        return np.diag([1.0, s * (1.0 - s)])

    result = _finish("loss", theta, ("C", "S"), transform, jac_transform,
                     ssr, jac, x, y, converged, iterations, se is not None)
    if bootstrap:
        result.ci95 = _bootstrap_ci(loss_fit, result, x, y, se, n_boot, seed)
    return result


def _bootstrap_ci(fit_fn, result: FitResult, x, y, se, n_boot: int, seed: int):
    """Parametric bootstrap percentile intervals (residual resampling when
    no standard errors are available)."""
    gen = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xB007,)))
    natural = np.array(list(result.params.values()))
    fitted = _eval_natural(result.model, natural, np.asarray(x, dtype=float))
    residuals = np.asarray(y, dtype=float) - fitted
    samples = {name: [] for name in result.params}
    for _ in range(n_boot):
        if se is not None:
            y_b = fitted + se * gen.standard_normal(len(fitted))
        else:
            y_b = fitted + gen.choice(residuals, size=len(residuals), replace=True)
        try:
            boot = fit_fn((x, y_b, se))
        except (ValueError, np.linalg.LinAlgError):
            continue
        if boot.model != result.model:
            continue
        for name in samples:
            samples[name].append(boot.params[name])
    ci = {}
    for name, vals in samples.items():
        if len(vals) >= 20:
            lo, hi = np.percentile(vals, [2.5, 97.5])
            ci[name] = float((hi - lo) / 2.0)
        else:
            ci[name] = result.ci95[name]
    return ci
