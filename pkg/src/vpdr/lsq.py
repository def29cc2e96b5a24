"""Damped Gauss-Newton (Levenberg-Marquardt) least squares."""

from dataclasses import dataclass

import numpy as np


@dataclass
class LsqResult:
    x: np.ndarray
    residuals: np.ndarray
    jac: np.ndarray
    cost: float  # sum of squared residuals
    n_iter: int
    converged: bool
    message: str
    covariance: np.ndarray
    rank_deficient: bool

    @property
    def stderr(self):
        return np.sqrt(np.abs(np.diag(self.covariance)))


def _numeric_jac(fun, x, r0):
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = 1e-7 * max(abs(x[i]), 1.0)
        xp = x.copy()
        xp[i] += h
        J[:, i] = (fun(xp) - r0) / h
    return J


def levenberg_marquardt(fun, x0, jac=None, max_iter=200, ftol=1e-12, xtol=1e-12, lam0=1e-3, cond_limit=1e12):
    """Minimize sum(fun(x)**2).

    Stops when the relative cost change of an accepted step is below ``ftol``
    or the step norm is below ``xtol`` (relative to |x|), or after
    ``max_iter`` iterations.  The covariance is s^2 (J^T J)^-1 at the
    solution with s^2 = cost / (n - p).
    """
    x = np.array(x0, dtype=float)
    jac = jac or (lambda xx: _numeric_jac(fun, xx, fun(xx)))
    r = fun(x)
    cost = float(r @ r)
    lam = lam0
    converged, message = False, "maximum iterations reached"
    it = 0
    J = jac(x)
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            x_new = x + step
            r_new = fun(x_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        rel = (cost - cost_new) / cost if cost > 0 else 0.0
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
        x, r, cost = x_new, r_new, cost_new
        J = jac(x)
        lam = max(lam / 10, 1e-15)
        if cost == 0.0 or rel < ftol or small_step:
            converged = True
            message = "cost converged" if not small_step else "step converged"
            break
    sv = np.linalg.svd(J, compute_uv=False)
    rank_def = sv.size == 0 or sv[-1] <= sv[0] / cond_limit
    dof = max(r.size - x.size, 1)
    try:
        cov = np.linalg.pinv(J.T @ J) * (cost / dof)
    except np.linalg.LinAlgError:
        cov = np.full((x.size, x.size), np.nan)
    return LsqResult(x, r, J, cost, it, converged, message, cov, bool(rank_def))
