#!/usr/bin/env python3
"""End-to-end registration of a noisy, shifted rectangle scan.

Alternating responsibility updates and weighted rigid fits climbs the
marginal log-likelihood monotonically until the gain per sweep dies out.
The result carries the aligning pose, the residual covariance, and the
full likelihood trace; the dense all-pairs reference implementation
reproduces it to float precision.
"""

import math

import numpy as np

from emscan import EmConfig, Pose, dense_em_register, make_scene, register

truth = Pose(0.3, -0.2, math.radians(5.0))
model, scan, _ = make_scene("rectangle", 200, truth, noise_sigma=0.02, seed=1)
print(f"ground truth: tx={truth.tx}, ty={truth.ty}, "
      f"theta={math.degrees(truth.theta):.1f} deg")

config = EmConfig.isotropic(0.02, window_w=1.0)
result = register(scan, model, Pose.identity(), config)

pose = result.pose
print(f"recovered:    tx={pose.tx:.4f}, ty={pose.ty:.4f}, "
      f"theta={math.degrees(pose.theta):.3f} deg")
print(f"errors: {1e3 * math.hypot(pose.tx - truth.tx, pose.ty - truth.ty):.1f} mm, "
      f"{math.degrees(abs(pose.theta - truth.theta)) * 60:.1f} arcmin")
print(f"converged: {result.converged} after {result.iterations} sweeps, "
      f"{result.n_inliers} of {len(scan)} scan points gated")

diffs = np.diff(result.loglik_trace)
print(f"\nlog-likelihood climbed {result.loglik_trace[0]:.1f} -> "
      f"{result.loglik_trace[-1]:.1f}")
print(f"monotone trace: {bool((diffs > -1e-9).all())}")
print("per-sweep gains:", np.array2string(diffs[:8], precision=1), "...")

print(f"\nresidual covariance (m^2):\n{result.residual_covariance}")
sigmas = np.sqrt(np.linalg.eigvalsh(result.residual_covariance))
print(f"implied residual stds: {1e3 * sigmas[0]:.1f} mm, {1e3 * sigmas[1]:.1f} mm "
      f"(scene noise was 20 mm)")

reference = dense_em_register(scan, model, Pose.identity(), config)
gap = max(abs(pose.tx - reference.pose.tx), abs(pose.ty - reference.pose.ty),
          abs(pose.theta - reference.pose.theta))
print(f"\ndense all-pairs reference agrees to {gap:.1e}")
