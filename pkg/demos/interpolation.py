"""Interpolate f = x^2 through a learned channel; writes interpolation.csv."""
import csv

import numpy as np

from isolearn.experiments import interpolate_scalar, scalar_sample

x, f = scalar_sample(lambda x: x**2, 500, seed=1)
model = interpolate_scalar(x, f, 6, 6)
ys = np.linspace(x.min(), x.max(), 201)
f_max, p_max = model.max_probability(ys)
with open("interpolation.csv", "w", newline="") as fh:
    out = csv.writer(fh)
    out.writerow(["x", "f_exact", "f_RN", "f_LS", "f_maxP", "P_max"])
    out.writerows(zip(ys, ys**2, model.radon_nikodym(ys), model.least_squares(ys), f_max, p_max))
print(f"F={model.report.fidelity:.6f}; largest P_max {p_max.max():.6f}; wrote interpolation.csv")
