"""2x2 complex operator algebra on the virtual qubit span{|A>, P|A>}.

Every operator that appears in the generalized-reflection circuits leaves the
two-dimensional subspace spanned by the ansatz state and its image under the
target observable invariant, so the whole calculation can be done with 2x2
complex matrices in the {|0>, |1>} basis of that subspace.

Conventions:
  * matrices are numpy arrays of shape (..., 2, 2), complex128;
  * functions broadcast over ``theta`` and ``x`` (scalar or array inputs);
  * products are written in operator order, i.e. the rightmost factor in
    ``circuit_q`` is applied first.
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# Angles closer than this to a multiple of pi collapse the subspace to one
# dimension (the estimand would be +-1), so they are rejected.
DEGENERATE_TOL = 1e-12


class DegenerateSubspaceError(ValueError):
    """The estimand angle is (numerically) 0 or pi, so span{|A>, P|A>} is 1-D."""


def canonical_angles(values) -> np.ndarray:
    """Validate a vector of 2L reflection angles and map each into (-pi, pi]."""
    x = np.atleast_1d(np.asarray(values, dtype=float))
    if x.ndim != 1:
        raise ValueError("angle vector must be one-dimensional")
    if x.size < 2 or x.size % 2 != 0:
        raise ValueError(f"angle vector must have even length 2L >= 2, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("angles must be finite")
    return np.pi - np.remainder(np.pi - x, 2.0 * np.pi)


def layer_count(x: np.ndarray) -> int:
    """Number of circuit layers L encoded by a 2L-angle vector."""
    return x.size // 2


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    if np.any(np.abs(np.sin(theta)) < DEGENERATE_TOL):
        raise DegenerateSubspaceError("theta equal to a multiple of pi is degenerate")
    return theta


def _stack22(a00, a01, a10, a11) -> np.ndarray:
    """Assemble broadcastable scalars/arrays into a (..., 2, 2) matrix."""
    a00, a01, a10, a11 = np.broadcast_arrays(a00, a01, a10, a11)
    out = np.empty(a00.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a00
    out[..., 0, 1] = a01
    out[..., 1, 0] = a10
    out[..., 1, 1] = a11
    return out


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose of a (..., 2, 2) matrix stack."""
    return np.conj(np.swapaxes(m, -1, -2))


def observable(theta) -> np.ndarray:
    """Target observable on the virtual qubit: cos(theta) Z + sin(theta) X.

    Hermitian with eigenvalues +-1 for every valid theta.
    """
    theta = _check_theta(theta)
    c, s = np.cos(theta), np.sin(theta)
    return _stack22(c, s, s, -c)


def observable_derivative(theta) -> np.ndarray:
    """d/dtheta of ``observable``: -sin(theta) Z + cos(theta) X."""
    theta = _check_theta(theta)
    c, s = np.cos(theta), np.sin(theta)
    return _stack22(-s, c, c, s)


def reflection_u(theta, x) -> np.ndarray:
    """Generalized reflection about the observable: cos(x) I - i sin(x) P(theta)."""
    theta = _check_theta(theta)
    x = np.asarray(x, dtype=float)
    cx, sx = np.cos(x), np.sin(x)
    ct, st = np.cos(theta), np.sin(theta)
    return _stack22(cx - 1j * sx * ct, -1j * sx * st, -1j * sx * st, cx + 1j * sx * ct)


def reflection_u_derivative(theta, x) -> np.ndarray:
    """d/dtheta of ``reflection_u``: i sin(x) (sin(theta) Z - cos(theta) X)."""
    theta = _check_theta(theta)
    x = np.asarray(x, dtype=float)
    sx = np.sin(x)
    ct, st = np.cos(theta), np.sin(theta)
    return _stack22(1j * sx * st, -1j * sx * ct, -1j * sx * ct, -1j * sx * st)


def reflection_v(x) -> np.ndarray:
    """Generalized reflection about the ansatz state: cos(x) I - i sin(x) Z."""
    x = np.asarray(x, dtype=float)
    cx, sx = np.cos(x), np.sin(x)
    zero = np.zeros_like(cx)
    return _stack22(cx - 1j * sx, zero, zero, cx + 1j * sx)


def circuit_q(theta, x) -> np.ndarray:
    """Product of the 2L tunable reflections, rightmost factor applied first.

    The j-th factor (1-based, from the right) is ``reflection_u(theta, x_j)``
    for odd j and ``reflection_v(x_j)`` for even j.  ``theta`` may be an array;
    the result has shape ``theta.shape + (2, 2)``.
    """
    theta = _check_theta(theta)
    x = canonical_angles(x)
    q = np.broadcast_to(IDENTITY, np.shape(theta) + (2, 2)).copy()
    for idx, xj in enumerate(x):
        factor = reflection_u(theta, xj) if idx % 2 == 0 else reflection_v(xj)
        q = factor @ q
    return q


def circuit_q_derivative(theta, x) -> np.ndarray:
    """d/dtheta of ``circuit_q`` via the product rule over the U factors.

    Only the odd-position reflections depend on theta; the derivative is the
    sum of the L products with one U factor replaced by its theta-derivative.
    """
    theta = _check_theta(theta)
    x = canonical_angles(x)
    shape = np.shape(theta) + (2, 2)
    q = np.broadcast_to(IDENTITY, shape).copy()
    dq = np.zeros(shape, dtype=complex)
    for idx, xj in enumerate(x):
        if idx % 2 == 0:
            factor = reflection_u(theta, xj)
            dq = factor @ dq + reflection_u_derivative(theta, xj) @ q
        else:
            factor = reflection_v(xj)
            dq = factor @ dq
        q = factor @ q
    return dq
