"""Long convolutions in O(n log n): FFT results against a direct O(n^2) sum."""

import time

import numpy as np

from gcformer.numerics import causal_convolve, circular_convolve

rng = np.random.default_rng(0)
for n in (96, 720, 4096):
    u, k = rng.standard_normal((2, n))
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    t0 = time.perf_counter()
    direct = np.where(lag >= 0, u[np.clip(lag, 0, None)], 0.0) @ k
    t_direct = time.perf_counter() - t0
    t0 = time.perf_counter()
    fast = causal_convolve(u, k)
    t_fast = time.perf_counter() - t0
    print(f"n={n:5d}  max |fft - direct| = {np.max(np.abs(fast - direct)):.1e}  "
          f"direct {1e3 * t_direct:7.2f} ms  fft {1e3 * t_fast:6.2f} ms")

# circular convolution wraps around; the causal version zero-pads instead
u = np.array([1.0, 2.0, 3.0, 4.0])
k = np.array([0.0, 1.0, 0.0, 0.0])
print("circular shift:", circular_convolve(u, k))
print("causal shift:  ", causal_convolve(u, k))
