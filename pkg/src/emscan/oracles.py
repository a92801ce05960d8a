"""Slow, transparent reference implementations for tests and field debugging.

Everything here recomputes the library's answers from first principles:
exhaustive neighbor scans, a dense all-pairs responsibility matrix, and a
derivative-free pose fit.  None of it touches the grid index, so agreement
with the fast path is meaningful evidence.  Expect O(n^2) cost or worse;
these ship with the library because the command line exposes them through
``--oracle`` for debugging in the field.
"""

from __future__ import annotations

import math

import numpy as np

from .em import EmConfig, RegistrationResult
from .errors import (
    DegenerateGeometry,
    EmptyInput,
    NoCorrespondences,
    NoInliers,
    NonPositiveRadius,
)
from .geometry import Point, Pose, PrecisionMatrix, as_point_array, mahalanobis_sq
from .graph import MatchGraph

__all__ = [
    "brute_force_neighbors",
    "dense_em_register",
    "numerical_m_step",
    "slow_residual_covariance",
]


def brute_force_neighbors(points, q, w: float) -> np.ndarray:
    """Exhaustive scan for indices with ``||points[i] - q|| < w``.

    Uses the same squared-distance comparison as the grid index so both
    sides of the equivalence check round identically.
    """
    if not w > 0.0:
        raise NonPositiveRadius(f"radius must be > 0, got {w}")
    pts = as_point_array(points)
    qa = np.asarray(tuple(q) if isinstance(q, Point) else q, dtype=float)
    if pts.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    d = pts - qa
    return np.nonzero(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] < w * w)[0].astype(np.int64)


class _DenseGate:
    """All-pairs window gate with uniform per-row priors."""

    def __init__(self, scan, model, pose, w):
        proj = pose.apply(model)
        diff = scan[:, None, :] - proj[None, :, :]
        dsq = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
        self.adjacency = dsq < w * w
        self.degrees = self.adjacency.sum(axis=1)
        self.nonempty = self.degrees > 0
        self.log_prior = np.where(
            self.adjacency, -np.log(np.maximum(self.degrees, 1))[:, None], -np.inf
        )
        self.prior = np.where(
            self.adjacency, 1.0 / np.maximum(self.degrees, 1)[:, None], 0.0
        )

    def exponents(self, scan, model, pose, gamma):
        diff = scan[:, None, :] - pose.apply(model)[None, :, :]
        msq = mahalanobis_sq(diff, gamma)
        return np.where(self.adjacency, self.log_prior - 0.5 * msq, -np.inf)

    def responsibilities(self, scan, model, pose, gamma):
        expo = self.exponents(scan, model, pose, gamma)
        row_max = np.where(self.nonempty, expo.max(axis=1), 0.0)
        shifted = np.where(self.adjacency, np.exp(expo - row_max[:, None]), 0.0)
        denom = shifted.sum(axis=1)
        out = np.zeros_like(shifted)
        out[self.nonempty] = shifted[self.nonempty] / denom[self.nonempty, None]
        return out

    def loglik(self, scan, model, pose, gamma):
        expo = self.exponents(scan, model, pose, gamma)
        total = 0.0
        for j in np.nonzero(self.nonempty)[0]:
            row_max = expo[j].max()
            total += row_max + math.log(np.exp(expo[j] - row_max).sum())
        return total


def _dense_fit(scan, model, weights, gamma):
    total = float(weights.sum())
    if not np.any(weights > 0.0):
        raise NoCorrespondences("all responsibilities are zero")
    if total < 1e-12:
        raise DegenerateGeometry(f"total correspondence weight {total:.3e} is too small")
    row_w = weights.sum(axis=1)
    col_w = weights.sum(axis=0)
    c_s = row_w @ scan / total
    c_m = col_w @ model / total
    st = scan - c_s
    mt = model - c_m
    h = mt.T @ weights.T @ st
    theta = math.atan2(h[0, 1] - h[1, 0], h[0, 0] + h[1, 1])
    c, s = math.cos(theta), math.sin(theta)
    pose = Pose(c_s[0] - (c * c_m[0] - s * c_m[1]),
                c_s[1] - (s * c_m[0] + c * c_m[1]),
                theta)
    if not gamma.is_isotropic:
        rows, cols = np.nonzero(weights > 0.0)
        pose = _descend(scan[rows], model[cols], weights[rows, cols],
                        gamma, pose.to_array(), grad_tol=1e-9, max_steps=200)
    return pose


def dense_em_register(scan, model, pose0: Pose, config: EmConfig) -> RegistrationResult:
    """All-pairs registration: same math as ``register``, O(n*m) gating.

    The window gate is applied to the full distance matrix and the
    responsibility matrix is kept dense.  The contract matches ``register``
    exactly, including error behavior and the meaning of the trace,
    covariance, and optional modes.
    """
    scan = as_point_array(scan)
    model = as_point_array(model)
    if scan.shape[0] == 0:
        raise EmptyInput("empty scan")
    if model.shape[0] == 0:
        raise EmptyInput("empty model")
    w = config.resolved_window()
    gamma = config.gamma

    gate = _DenseGate(scan, model, pose0, w)
    if not gate.adjacency.any():
        raise NoCorrespondences(
            f"no scan point is within {w} m of the model at the initial pose"
        )

    def metric(gate_now, pose_now, gamma_now):
        # Mirror of the fast path's stopping metric: the det normalizer is
        # restored only when gamma varies between sweeps.
        value = gate_now.loglik(scan, model, pose_now, gamma_now)
        if config.reestimate_gamma:
            det = gamma_now.g00 * gamma_now.g11 - gamma_now.g01 * gamma_now.g01
            value += 0.5 * int(np.count_nonzero(gate_now.nonempty)) * math.log(det)
        return value

    pose = pose0
    value = metric(gate, pose, gamma)
    trace = [value]
    converged = False
    iterations = 0
    for iteration in range(1, config.max_iterations + 1):
        if config.regate_each_iteration and iteration > 1:
            gate = _DenseGate(scan, model, pose, w)
            if not gate.adjacency.any():
                raise NoCorrespondences("regating left no candidate pairs")
        weights = gate.responsibilities(scan, model, pose, gamma)
        pose = _dense_fit(scan, model, weights, gamma)
        if config.reestimate_gamma:
            gamma = _dense_refit_gamma(scan, model, weights, pose, gate, gamma)
        new_value = metric(gate, pose, gamma)
        trace.append(new_value)
        iterations = iteration
        if new_value - value < config.convergence_epsilon:
            converged = True
            break
        value = new_value

    weights = gate.responsibilities(scan, model, pose, gamma)
    cov, n_p = _dense_covariance(scan, model, weights, pose, gate)
    return RegistrationResult(
        pose=pose,
        residual_covariance=cov,
        iterations=iterations,
        loglik_trace=np.asarray(trace),
        n_inliers=n_p,
        converged=converged,
    )


def _dense_covariance(scan, model, weights, pose, gate):
    n_p = int(np.count_nonzero(gate.nonempty))
    if n_p == 0:
        raise NoInliers("every scan point is an outlier")
    diff = scan[:, None, :] - pose.apply(model)[None, :, :]
    rxx = float((weights * diff[..., 0] * diff[..., 0]).sum())
    rxy = float((weights * diff[..., 0] * diff[..., 1]).sum())
    ryy = float((weights * diff[..., 1] * diff[..., 1]).sum())
    return np.array([[rxx, rxy], [rxy, ryy]]) / n_p, n_p


def _dense_refit_gamma(scan, model, weights, pose, gate, fallback):
    cov, _ = _dense_covariance(scan, model, weights, pose, gate)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if not (math.isfinite(det) and det > 1e-300):
        return fallback
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
    try:
        return PrecisionMatrix.from_matrix(inv)
    except ValueError:
        return fallback


def slow_residual_covariance(graph: MatchGraph, pose: Pose) -> tuple[np.ndarray, int]:
    """Edge-by-edge evaluation of the weighted residual outer-product average."""
    inlier_rows = {int(j) for j in graph.scan_idx}
    n_p = len(inlier_rows)
    if n_p == 0:
        raise NoInliers("every scan point is an outlier")
    acc = np.zeros((2, 2))
    for e in range(graph.edge_count):
        s = graph.scan[graph.scan_idx[e]]
        m = pose.apply(graph.model[graph.model_idx[e]])
        r = s - m
        acc += graph.posterior[e] * np.outer(r, r)
    return acc / n_p, n_p


def _fd_gradient(fun, y, h=1e-6) -> np.ndarray:
    grad = np.zeros(3)
    for i in range(3):
        up, dn = y.copy(), y.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fun(up) - fun(dn)) / (2.0 * h)
    return grad


def _fd_hessian(fun, y, h=1e-4) -> np.ndarray:
    hess = np.zeros((3, 3))
    f0 = fun(y)
    for i in range(3):
        up, dn = y.copy(), y.copy()
        up[i] += h
        dn[i] -= h
        hess[i, i] = (fun(up) - 2.0 * f0 + fun(dn)) / (h * h)
    for i in range(3):
        for j in range(i + 1, 3):
            pp, pm, mp, mm = y.copy(), y.copy(), y.copy(), y.copy()
            pp[[i, j]] += h
            mm[[i, j]] -= h
            pm[i] += h
            pm[j] -= h
            mp[i] -= h
            mp[j] += h
            hess[i, j] = hess[j, i] = (fun(pp) - fun(pm) - fun(mp) + fun(mm)) / (4.0 * h * h)
    return hess


def _descend(scan_e, model_e, w, gamma, y0, *, grad_tol=1e-8, max_steps=60):
    """Finite-difference Newton descent on the weighted fit objective."""
    def fun(y):
        c, s = math.cos(y[2]), math.sin(y[2])
        rot = np.array([[c, -s], [s, c]])
        residual = scan_e - model_e @ rot.T - y[:2]
        return float(w @ mahalanobis_sq(residual, gamma))

    y = np.asarray(y0, dtype=float).copy()
    value = fun(y)
    for _ in range(max_steps):
        grad = _fd_gradient(fun, y)
        if np.linalg.norm(grad) < grad_tol:
            break
        hess = _fd_hessian(fun, y)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = -grad
        alpha = 1.0
        improved = False
        while alpha > 1e-10:
            trial = y + alpha * step
            trial_value = fun(trial)
            if trial_value < value:
                y, value = trial, trial_value
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return Pose.from_array(y)


def numerical_m_step(graph: MatchGraph, gamma, *, angle_samples: int = 72) -> Pose:
    """Minimize the weighted fit objective by grid search plus descent.

    Scans ``angle_samples`` rotations; for each one the translation is
    centered on the weighted-centroid offset and jittered over a small
    grid, and the best cell seeds a finite-difference Newton refinement.
    Matches ``m_step`` to about 1e-5 in pose on sane instances while
    sharing none of its algebra.
    """
    w = graph.posterior
    if graph.edge_count == 0 or not np.any(w > 0.0):
        raise NoCorrespondences("all responsibilities are zero")
    total = float(w.sum())
    if total < 1e-12:
        raise DegenerateGeometry(f"total correspondence weight {total:.3e} is too small")
    scan_e = graph.scan[graph.scan_idx]
    model_e = graph.model[graph.model_idx]

    def fun(y):
        c, s = math.cos(y[2]), math.sin(y[2])
        rot = np.array([[c, -s], [s, c]])
        residual = scan_e - model_e @ rot.T - y[:2]
        return float(w @ mahalanobis_sq(residual, gamma))

    c_s = w @ scan_e / total
    c_m = w @ model_e / total
    offsets = (-0.25, 0.0, 0.25)
    best_y, best_value = None, np.inf
    for theta in np.linspace(-math.pi, math.pi, angle_samples, endpoint=False):
        c, s = math.cos(theta), math.sin(theta)
        center = c_s - np.array([c * c_m[0] - s * c_m[1], s * c_m[0] + c * c_m[1]])
        for dx in offsets:
            for dy in offsets:
                y = np.array([center[0] + dx, center[1] + dy, theta])
                value = fun(y)
                if value < best_value:
                    best_y, best_value = y, value
    return _descend(scan_e, model_e, w, gamma, best_y)
