"""Classify a small lambda grid at eps and eps / 4 and print the bad fractions."""
import numpy as np

from kirchhoff_qp import ExponentSet, FrequencyData, ProblemData, forcing_preset
from kirchhoff_qp.measure_scan import ScanSettings, scan_lambda, write_csv

fd, g = FrequencyData.preset("sqrt2"), forcing_preset("cos_phi_cos_x", 1, 1)
es = ExponentSet.greedy(1, 1)
grid = np.linspace(0.5, 1.5, 16)
reports = [scan_lambda(ProblemData(fd, eps, g), es, grid, ScanSettings(N_list=(4, 8)))
           for eps in (1e-2, 2.5e-3)]
for rep in reports:
    print(rep.summary())
with open("lambda_scan.csv", "w", newline="") as fh:
    write_csv(reports, fh)
print("per-lambda records written to lambda_scan.csv")
