"""Recover a 3D rotation from a 1000-step trajectory with random sign flips."""
import numpy as np

from isolearn.experiments import (
    SO3_ANGLES,
    SO3_START,
    euler_rotation,
    generate_trajectory,
    random_orthogonal,
    recover_dynamics,
    sign_invariant_difference,
)

u = euler_rotation(*SO3_ANGLES)
sample = generate_trajectory(u, SO3_START, 1000, seed=1)
found, report = recover_dynamics(sample, "gram")
print("generator:\n", u)
print("recovered:\n", found.u)
print(f"max difference {sign_invariant_difference(found, u):.2e} after {len(report.iterations)} iterations")

for dim in (3, 5, 7, 17):
    q = random_orthogonal(dim, 1)
    x0 = np.random.default_rng(dim).standard_normal(dim)
    s = generate_trajectory(q, x0 / np.linalg.norm(x0), 1000, seed=1)
    for channel in ("gram", "unit"):
        got, _ = recover_dynamics(s, channel)
        print(f"dim {dim:2d} {channel}: max difference {sign_invariant_difference(got, q):.2e}")
