"""Optimal versus original fidelity of a random orthogonal channel kept to D rows."""
from isolearn.experiments import fidelity_sweep

print(f"{'D':>3} {'F_orig/M':>10} {'gain':>12} converged")
for row in fidelity_sweep(20, 1000, seed=1):
    print(f"{row.D:>3} {row.ratio:>10.6f} {row.gain:>12.4e} {row.converged}")
