"""Bad theta at eps = 0: the set {|D_lj(theta)| < eta} is two explicit
intervals per site; the window mask is their union on the grid."""
import numpy as np

from kirchhoff_qp import FrequencyData, ProblemData, TorusFunction, forcing_preset
from kirchhoff_qp.multiscale import bad_theta_set, diniz_intervals, theta_grid

fd = FrequencyData.preset("sqrt2")
pd = ProblemData(fd, 0.0, forcing_preset("cos_phi_cos_x", 1, 1))
N, tau1, lam = 4, 2.0, 0.9
eta = 2.0 * N ** (-tau1)
for ell, j in [(0, 1), (1, 1), (-2, 3)]:
    print(f"(l, j) = ({ell}, {j}):",
          [(round(a, 4), round(b, 4)) for a, b in diniz_intervals(lam, 1.0, (ell,), (j,), fd.omega_bar, eta)])

grid = theta_grid(N, tau1, -3.0, 3.0)
bad = bad_theta_set(pd, lam, TorusFunction(1, 1, (N, N)), (1,), N, grid, tau1)
print(f"{len(bad)} bad theta intervals in [-3, 3] for the window around j0 = 1:")
for lo, hi in bad:
    print(f"  [{lo:+.4f}, {hi:+.4f}]")
print("grid step", grid[1] - grid[0], "total bad length", sum(b - a for a, b in bad) + len(bad) * (grid[1] - grid[0]))
