"""Conjugate L(u) to constant coefficients plus a smoothing remainder and
compare the literal conjugated operator with the assembled one."""
import numpy as np

from kirchhoff_qp import ExponentSet, FrequencyData, ProblemData, TorusFunction, forcing_preset
from kirchhoff_qp.fourier import sobolev_norm
from kirchhoff_qp.reduction import reduce

rng = np.random.default_rng(0)
fd, g = FrequencyData.preset("sqrt2"), forcing_preset("cos_phi_cos_x", 1, 1)
es = ExponentSet.greedy(1, 1)
u = TorusFunction.random(rng, 1, 1, (16, 16), decay=4)
u = u * (1 / sobolev_norm(u, es.s1))

for eps in (1e-3, 1e-4, 1e-5):
    red = reduce(ProblemData(fd, eps, g), 1.0, u)
    h = TorusFunction.random(rng, 1, 1, (16, 16), decay=3)
    rep = red.report(h)
    print(f"eps={eps:g}  mu-1={rep['mu'] - 1:.3e}  |R2|_s0={rep['decay_norm_R2_s0']:.3e}  "
          f"mean(a1)={abs(red.a1.coeff((0,))):.1e}  conj. residual={rep['conjugation_residual']:.1e}")
