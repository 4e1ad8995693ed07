import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from gcformer.errors import InvalidArgumentError, NumericError
from gcformer.legendre import (
    LegendreCoeffs,
    StateSpaceSystem,
    apply_leg_kernel,
    discretize,
    legendre_basis,
    legt_matrices,
    legt_project,
    legt_readout,
    legt_reconstruct,
    legt_system,
    materialize_leg_kernel,
    materialize_ssm_kernel,
    power_spectral_bound,
    readout_vector,
    spectral_radius,
    ssm_recurrence,
)
from gcformer.numerics import causal_convolve

from oracles import direct_causal, legendre_three_term


def test_legt_matrices_small_orders():
    A, B = legt_matrices(1)
    np.testing.assert_array_equal(A, [[1]])
    np.testing.assert_array_equal(B, [1])
    A, B = legt_matrices(2)
    np.testing.assert_array_equal(A, [[1, 1], [-3, 3]])
    np.testing.assert_array_equal(B, [1, -3])
    A, B = legt_matrices(3)
    np.testing.assert_array_equal(A, [[1, 1, 1], [-3, 3, 3], [5, -5, 5]])
    np.testing.assert_array_equal(B, [1, -3, 5])
    assert np.all(A == np.round(A))


def test_legt_matrices_rejects_zero():
    with pytest.raises(InvalidArgumentError):
        legt_matrices(0)


def test_discretize_limits():
    A = -np.diag([1.0, 2.0, 3.0])
    Ad, Bd = discretize(A, np.ones(3), dt=1e-8)
    np.testing.assert_allclose(Ad, np.eye(3), atol=1e-6)
    np.testing.assert_allclose(Bd, 0, atol=1e-6)
    a, _ = discretize([[-1.0]], [1.0], dt=0.1)
    assert a[0, 0] == pytest.approx(0.95 / 1.05, abs=1e-12)


def test_discretize_matches_zoh_to_second_order(rng):
    d = 5
    M = rng.standard_normal((d, d))
    A = -(M @ M.T) / d - np.eye(d)
    B = rng.standard_normal(d)
    for dt in (1e-3, 5e-4):
        Ad, Bd = discretize(A, B, dt)
        Az = expm(A * dt)
        assert np.max(np.abs(Ad - Az)) < 10 * dt ** 2
        Bz = np.linalg.solve(A, (Az - np.eye(d)) @ B)
        assert np.max(np.abs(Bd - Bz)) < 10 * dt ** 2


def test_discretize_singular():
    with pytest.raises(NumericError, match="condition"):
        discretize([[2.0]], [1.0], dt=1.0)


def test_recurrence_examples(rng):
    u = rng.standard_normal(9)
    s = StateSpaceSystem([[0.0]], [1.0], [1.0], 0.0, discrete=True)
    np.testing.assert_allclose(ssm_recurrence(s, u), u)
    s = StateSpaceSystem([[0.5]], [1.0], [1.0], 0.0, discrete=True)
    np.testing.assert_allclose(ssm_recurrence(s, [1, 0, 0]), [1, 0.5, 0.25])
    s = StateSpaceSystem(np.eye(2), [1.0, 1.0], [0.0, 0.0], 2.0, discrete=True)
    np.testing.assert_allclose(ssm_recurrence(s, u), 2 * u)


def test_recurrence_requires_discrete():
    with pytest.raises(InvalidArgumentError):
        ssm_recurrence(StateSpaceSystem([[0.5]], [1.0], [1.0]), [1.0])


def test_recurrence_divergence_names_step():
    s = StateSpaceSystem([[1e200]], [1.0], [1.0], discrete=True)
    with pytest.raises(NumericError, match="step 2"):
        ssm_recurrence(s, [1.0, 1.0, 1.0, 1.0])


def test_kernel_examples(rng):
    C, B = rng.standard_normal((2, 3))
    K = materialize_ssm_kernel(StateSpaceSystem(np.zeros((3, 3)), B, C, discrete=True), 5)
    np.testing.assert_allclose(K, [C @ B, 0, 0, 0, 0])
    K = materialize_ssm_kernel(StateSpaceSystem(np.eye(3), B, C, discrete=True), 5)
    np.testing.assert_allclose(K, np.full(5, C @ B))


def test_kernel_equals_recurrence_legt(rng):
    sys = legt_system(16, 128.0, D=0.3)
    u = rng.standard_normal(256)
    K = materialize_ssm_kernel(sys, 256)
    assert np.max(np.abs(causal_convolve(u, K) + sys.D * u - ssm_recurrence(sys, u))) < 1e-8


@pytest.mark.parametrize("theta", [64, 256, 1024])
def test_legt_stability(theta):
    A = legt_system(64, float(theta)).A
    assert spectral_radius(A) <= 1 + 1e-9
    assert power_spectral_bound(A, steps=400) <= 1 + 1e-2


def test_project_zero_signal():
    assert np.all(legt_project(np.zeros(20), 6).values == 0)


def test_project_shape_and_theta():
    c = legt_project(np.ones(30), 5)
    assert c.values.shape == (30, 5) and c.theta == 30.0 and len(c) == 30


def test_constant_reconstruction():
    theta = 64
    c = legt_project(np.full(4 * theta, 2.5), 8, theta)
    assert np.max(np.abs(legt_reconstruct(c) - 2.5)) < 1e-3


def test_cubic_reconstruction():
    theta = 64
    t = np.arange(8 * theta) / theta
    u = 0.5 - t + 0.3 * t ** 2 - 0.02 * t ** 3
    c = legt_project(u, 16, theta)
    assert np.max(np.abs(legt_reconstruct(c) - u[-theta:])) < 1e-3


def two_sines(n=336):
    t = np.arange(n)
    return np.sin(2 * np.pi * t / 84) + 0.5 * np.sin(2 * np.pi * t / 36 + 1.0)


def reconstruction_mse(u, d):
    return np.mean((legt_reconstruct(legt_project(u, d)) - u) ** 2) / np.var(u)


def test_two_sine_reconstruction_d64():
    assert reconstruction_mse(two_sines(), 64) < 1e-2


def test_reconstruction_error_trend():
    errs = [reconstruction_mse(two_sines(), d) for d in (8, 16, 32, 64)]
    for a, b in zip(errs, errs[1:]):
        assert b <= 1.05 * a
    assert errs[0] / errs[-1] >= 10


def test_reconstruct_zero_and_basis_element():
    z = LegendreCoeffs(np.zeros((1, 5)), 4.0)
    assert np.all(legt_reconstruct(z) == 0)
    c0 = LegendreCoeffs(np.array([[3.0, 0, 0]]), 4.0)
    np.testing.assert_allclose(legt_reconstruct(c0), np.full(4, 3.0))


def test_basis_orthonormal_and_three_term():
    order = 12
    x, wq = np.polynomial.legendre.leggauss(order + 2)
    r = (x + 1) / 2
    G = legendre_basis(order, r)
    np.testing.assert_allclose(G.T @ (G * wq[:, None] / 2), np.eye(order), atol=1e-12)
    ref = np.sqrt(2 * np.arange(order) + 1) * legendre_three_term(order, 2 * r - 1)
    np.testing.assert_allclose(G, ref, atol=1e-10)


def test_readout_matches_newest_reconstruction(rng):
    c = legt_project(rng.standard_normal(50), 7)
    np.testing.assert_allclose(legt_readout(c)[-1], legt_reconstruct(c)[-1], atol=1e-12)
    np.testing.assert_allclose(readout_vector(3, 2.0), legendre_three_term(3, [-0.5])[0])


@given(st.integers(1, 60), st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_project_linear(n, d, seed):
    r = np.random.default_rng(seed)
    u, v = r.standard_normal((2, n))
    lhs = legt_project(2 * u - 3 * v, d).values
    rhs = 2 * legt_project(u, d).values - 3 * legt_project(v, d).values
    assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_leg_kernel_zero_and_impulse(rng):
    u = rng.standard_normal(40)
    assert np.all(apply_leg_kernel(u, np.zeros((3, 6))) == 0)
    w = np.zeros((3, 6))
    w[0] = 1.0
    np.testing.assert_allclose(apply_leg_kernel(u, w), legt_readout(legt_project(u, 6)), atol=1e-12)


def test_leg_kernel_composition_oracle(rng):
    n, m, d = 64, 5, 8
    u = rng.standard_normal(n)
    w = rng.standard_normal((m, d))
    coeffs = legt_project(u, d)
    filtered = np.stack([direct_causal(coeffs.values[:, j], np.pad(w[:, j], (0, n - m))) for j in range(d)], axis=1)
    ref = np.array([legt_reconstruct(LegendreCoeffs(filtered, coeffs.theta), step=k)[-1] for k in range(n)])
    np.testing.assert_allclose(apply_leg_kernel(u, w), ref, atol=1e-8)


def test_leg_kernel_materialized_equivalence(rng):
    u = rng.standard_normal(48)
    w = rng.standard_normal((4, 10))
    k = materialize_leg_kernel(w, 48)
    np.testing.assert_allclose(causal_convolve(u, k), apply_leg_kernel(u, w), atol=1e-10)


def test_leg_kernel_errors():
    with pytest.raises(InvalidArgumentError):
        apply_leg_kernel(np.zeros(4), np.zeros((5, 3)))
