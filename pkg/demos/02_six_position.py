"""Three-axis calibration from six turntable positions.

Each axis is rotated up and down once.  Stacking the six mean readings and the
six known rate vectors gives a linear system whose least-squares solution holds
the per-axis scale (diagonal minus one) and bias (last column).
"""

import numpy as np

from gyrocal.calibration import (SixPositionInput, calibrate_six_position, error_terms_from_matrix,
                                 six_position_gt_matrix)

rate = 78.0
scale = np.array([0.0039, -0.0021, 0.0044])
bias = np.array([-0.031, 0.012, -0.073])

gt = six_position_gt_matrix(rate)
z_true = np.hstack([np.diag(1 + scale), bias[:, None]])
rng = np.random.default_rng(0)
# each column is a 2 s average of 290 noisy samples
measured = z_true @ gt + rng.normal(0, 0.0324 / np.sqrt(290), (3, 6))

z = calibrate_six_position(SixPositionInput(measured, gt))
s_hat, b_hat = error_terms_from_matrix(z)
np.set_printoptions(precision=5, suppress=True)
print("error matrix\n", z)
print("scale  true", scale, " est", s_hat)
print("bias   true", bias, " est", b_hat)
