"""Least-squares fringe fitting.

The fringe model is Malus-law shaped, A cos^2(theta - phi) + C, with the
period pinned to 180 degrees because polarization analyzers repeat after a
half turn. A free-period variant exists as an escape hatch. Fitting is plain
Gauss-Newton with Levenberg damping and the analytic Jacobian; standard
errors come from the residual variance and the Gauss-Newton normal matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    offset: float
    phase_deg: float
    period_deg: float
    visibility: float
    amplitude_stderr: float
    offset_stderr: float
    phase_stderr_deg: float
    residual_norm: float
    converged: bool
    iterations: int

    def as_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "offset": self.offset,
            "phase_deg": self.phase_deg,
            "period_deg": self.period_deg,
            "visibility": self.visibility,
            "amplitude_stderr": self.amplitude_stderr,
            "offset_stderr": self.offset_stderr,
            "phase_stderr_deg": self.phase_stderr_deg,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def cos2_model(
    theta_deg: np.ndarray, amplitude: float, phase_deg: float, offset: float,
    period_deg: float = 180.0,
) -> np.ndarray:
    x = np.radians((theta_deg - phase_deg) * (180.0 / period_deg))
    return amplitude * np.cos(x) ** 2 + offset


def fit_cos_squared(
    theta_deg,
    values,
    free_period: bool = False,
    max_iterations: int = 200,
    tol: float = 1e-13,
) -> FitResult:
    """Fit A cos^2(theta - phi) + C to fringe data.

    The visibility (max - min)/(max + min) equals A / (A + 2C). A result that
    failed to converge is returned flagged, with its residual intact, never
    silently accepted.
    """
    theta = np.asarray(theta_deg, dtype=float)
    y = np.asarray(values, dtype=float)
    if theta.shape != y.shape or theta.ndim != 1:
        raise ValueError("theta and values must be equal-length 1-d arrays")
    if len(theta) < (4 if free_period else 3):
        raise ValueError("not enough points to constrain the fit")

    a0 = float(y.max() - y.min())
    c0 = float(y.min())
    phi0 = float(theta[int(np.argmax(y))])
    params = [max(a0, 1e-12), phi0, c0] + ([180.0] if free_period else [])

    def residuals(p):
        period = p[3] if free_period else 180.0
        return y - cos2_model(theta, p[0], p[1], p[2], period)

    def jacobian(p):
        period = p[3] if free_period else 180.0
        scale = 180.0 / period
        x = np.radians((theta - p[1]) * scale)
        cols = [
            np.cos(x) ** 2,
            p[0] * np.sin(2 * x) * math.radians(1.0) * scale,
            np.ones_like(theta),
        ]
        if free_period:
            dx_dperiod = -np.radians((theta - p[1]) * 180.0) / period**2
            cols.append(-p[0] * np.sin(2 * x) * dx_dperiod)
        return np.column_stack(cols)

    lam = 1e-3
    cost = float(np.sum(residuals(params) ** 2))
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        r = residuals(params)
        j = jacobian(params)
        jtj = j.T @ j
        g = j.T @ r
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-30), g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = [p + s for p, s in zip(params, step)]
        new_cost = float(np.sum(residuals(trial) ** 2))
        if new_cost <= cost:
            improvement = cost - new_cost
            params, cost = trial, new_cost
            lam = max(lam / 3.0, 1e-12)
            if improvement < tol * (1.0 + cost) and float(np.max(np.abs(step))) < 1e-10:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break

    r = residuals(params)
    j = jacobian(params)
    dof = max(len(theta) - len(params), 1)
    s2 = float(r @ r) / dof
    try:
        cov = s2 * np.linalg.inv(j.T @ j)
        stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        stderr = np.full(len(params), math.inf)

    amplitude, phase, offset = params[0], params[1] % 180.0, params[2]
    period = params[3] if free_period else 180.0
    denom = amplitude + 2.0 * offset
    visibility = amplitude / denom if denom > 0 else math.inf
    return FitResult(
        amplitude=amplitude,
        offset=offset,
        phase_deg=phase,
        period_deg=period,
        visibility=visibility,
        amplitude_stderr=float(stderr[0]),
        offset_stderr=float(stderr[2]),
        phase_stderr_deg=float(stderr[1]),
        residual_norm=float(np.linalg.norm(r)),
        converged=converged,
        iterations=it,
    )
