"""Monte Carlo checks of the two stability statements.

Noise pushed through a unitary transition for theta steps grows like
sigma*sqrt(theta); an expanding transition blows up. Dropping columns of a
well-conditioned matrix costs at most sqrt(d (n - s)) * a_min in Frobenius norm.
"""

from gcformer.theory import ColumnSelectConfig, NoiseAccumConfig, column_selection_check, noise_accumulation

for kind in ("unitary_random", "identity", "expanding"):
    for theta in (16, 256):
        r = noise_accumulation(NoiseAccumConfig(theta=theta, trials=2000, kind=kind))
        print(f"{kind:15s} theta={theta:4d}  scale {r.scale:10.3g}  ratio {r.ratio:10.3g}  {r.summary()}")

for projection in ("zero", "svd", "sampled"):
    r = column_selection_check(ColumnSelectConfig(rows=8, cols=32, keep=16, projection=projection))
    print(f"column selection ({projection:7s}): worst error {r.errors.max():.3f} "
          f"vs bound {r.bound:.3f}, violations {r.violations}")
