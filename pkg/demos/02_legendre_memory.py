"""Legendre state-space memory: compress a sliding window into d coefficients."""

import numpy as np

from gcformer.legendre import legt_matrices, legt_project, legt_reconstruct, legt_system, spectral_radius

A, B = legt_matrices(3)
print("A (d=3):\n", A)
print("B (d=3):", B)

for theta in (64, 256, 1024):
    print(f"theta={theta:5d}  spectral radius of the discrete transition: "
          f"{spectral_radius(legt_system(64, theta).A):.4f}")

t = np.arange(336)
u = np.sin(2 * np.pi * t / 84) + 0.5 * np.sin(2 * np.pi * t / 36 + 1.0)
print("\nreconstruction of a 336-step two-sine window")
for d in (8, 16, 32, 64):
    rec = legt_reconstruct(legt_project(u, d))
    print(f"  d={d:3d}  relative MSE {np.mean((rec - u) ** 2) / np.var(u):.2e}")
