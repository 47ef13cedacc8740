import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elfkit.algebra import (
    DegenerateSubspaceError,
    IDENTITY,
    PAULI_X,
    PAULI_Z,
    canonical_angles,
    circuit_q,
    circuit_q_derivative,
    dagger,
    observable,
    reflection_u,
    reflection_v,
)

ANGLES = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
THETAS = st.floats(min_value=0.05, max_value=np.pi - 0.05)


def random_angles(rng, layers):
    return rng.uniform(-np.pi, np.pi, 2 * layers)


class TestCanonicalAngles:
    def test_rejects_odd_length(self):
        with pytest.raises(ValueError):
            canonical_angles([0.1, 0.2, 0.3])

    def test_rejects_empty_and_scalar(self):
        with pytest.raises(ValueError):
            canonical_angles([0.1])

    @given(st.lists(ANGLES, min_size=2, max_size=12).filter(lambda v: len(v) % 2 == 0))
    def test_range_and_idempotence(self, values):
        x = canonical_angles(values)
        assert np.all(x > -np.pi) and np.all(x <= np.pi)
        assert np.allclose(canonical_angles(x), x)

    def test_wraps_preserving_value(self):
        x = canonical_angles([3 * np.pi / 2, -np.pi])
        assert x[0] == pytest.approx(-np.pi / 2)
        assert x[1] == pytest.approx(np.pi)


class TestObservable:
    def test_symmetry_point_is_x(self):
        assert np.allclose(observable(np.pi / 2), PAULI_X)

    @given(THETAS)
    def test_trace_and_determinant(self, theta):
        p = observable(theta)
        assert np.trace(p) == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.det(p).real == pytest.approx(-1.0, abs=1e-12)

    def test_direct_evaluation(self):
        p = observable(1.0)
        expected = np.cos(1.0) * PAULI_Z + np.sin(1.0) * PAULI_X
        assert np.allclose(p, expected)

    @pytest.mark.parametrize("theta", [0.0, np.pi, -np.pi, 2 * np.pi])
    def test_degenerate_rejected(self, theta):
        with pytest.raises(DegenerateSubspaceError):
            observable(theta)


class TestReflections:
    def test_u_identity_at_zero(self):
        assert np.allclose(reflection_u(0.7, 0.0), IDENTITY)

    def test_u_quarter_turn(self):
        assert np.allclose(reflection_u(np.pi / 2, np.pi / 2), -1j * PAULI_X)

    def test_u_inverse_pair(self):
        prod = reflection_u(0.7, 0.3) @ reflection_u(0.7, -0.3)
        assert np.allclose(prod, IDENTITY, atol=1e-14)

    def test_v_identity_and_quarter(self):
        assert np.allclose(reflection_v(0.0), IDENTITY)
        assert np.allclose(reflection_v(np.pi / 2), -1j * PAULI_Z)

    def test_v_additive(self):
        assert np.allclose(reflection_v(0.2) @ reflection_v(0.5), reflection_v(0.7))


class TestCircuit:
    def test_all_zero_angles_is_identity(self):
        assert np.allclose(circuit_q(1.1, np.zeros(6)), IDENTITY)

    def test_single_layer_product(self):
        theta = 0.9
        q = circuit_q(theta, [np.pi / 2, np.pi / 2])
        expected = (-1j * PAULI_Z) @ (-1j * observable(theta))
        assert np.allclose(q, expected)

    @settings(max_examples=30, deadline=None)
    @given(THETAS, st.integers(min_value=1, max_value=6), st.integers())
    def test_unitarity(self, theta, layers, seed):
        rng = np.random.default_rng(seed % 2**32)
        x = random_angles(rng, layers)
        q = circuit_q(theta, x)
        assert np.max(np.abs(dagger(q) @ q - IDENTITY)) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(THETAS, st.integers(min_value=1, max_value=6), st.integers())
    def test_factor_determinants_unimodular(self, theta, layers, seed):
        rng = np.random.default_rng(seed % 2**32)
        for xj in random_angles(rng, layers):
            for factor in (reflection_u(theta, xj), reflection_v(xj)):
                assert abs(np.linalg.det(factor)) == pytest.approx(1.0, abs=1e-12)

    def test_theta_broadcasting(self):
        thetas = np.linspace(0.2, 3.0, 7)
        x = [0.3, -0.4, 1.2, 0.9]
        batch = circuit_q(thetas, x)
        assert batch.shape == (7, 2, 2)
        for i, th in enumerate(thetas):
            assert np.allclose(batch[i], circuit_q(th, x))

    def test_rejects_odd_length(self):
        with pytest.raises(ValueError):
            circuit_q(1.0, [0.1, 0.2, 0.3])


class TestCircuitDerivative:
    def test_zero_angles_zero_derivative(self):
        assert np.allclose(circuit_q_derivative(1.0, np.zeros(4)), 0.0)

    @settings(max_examples=25, deadline=None)
    @given(THETAS, st.integers(min_value=1, max_value=6), st.integers())
    def test_matches_finite_difference(self, theta, layers, seed):
        rng = np.random.default_rng(seed % 2**32)
        x = random_angles(rng, layers)
        h = 1e-6
        fd = (circuit_q(theta + h, x) - circuit_q(theta - h, x)) / (2 * h)
        assert np.max(np.abs(circuit_q_derivative(theta, x) - fd)) < 1e-6
