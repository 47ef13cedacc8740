"""Cosine-sine(-bias) decomposition of the bias with respect to one angle.

For fixed theta and all other angles, the ancilla-free bias is a sinusoid of
2*x_j plus a constant and the ancilla-based bias is a sinusoid of x_j:

    AF:  bias(x_j) = c cos(2 x_j) + s sin(2 x_j) + b
    AB:  bias(x_j) = c cos(x_j)   + s sin(x_j)

with companion primed coefficients giving the theta-derivative of the bias in
the same form.  Both coefficient sets are obtained from prefix/suffix products
of the operator chain (plus their theta-derivatives, accumulated left-to-right
by the product rule), so a table built once per (scheme, theta, x) in O(L)
time serves all 2L coordinates in O(1) each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    IDENTITY,
    PAULI_Z,
    canonical_angles,
    observable,
    observable_derivative,
    reflection_u,
    reflection_u_derivative,
    reflection_v,
)
from .bias import IMAG_RESIDUE_TOL, Scheme

_ZERO = np.zeros((2, 2), dtype=complex)


@dataclass(frozen=True)
class CsbdCoefficients:
    """Decomposition coefficients of the bias and its theta-derivative.

    ``b`` and ``b_prime`` are identically zero for the ancilla-based scheme,
    whose bias has no constant term and period 2*pi in each angle.
    """

    scheme: Scheme
    c: float
    s: float
    b: float
    c_prime: float
    s_prime: float
    b_prime: float

    @property
    def angle_scale(self) -> float:
        """Multiplier on x_j inside the sinusoid: 2 for AF, 1 for AB."""
        return 2.0 if self.scheme is Scheme.AF else 1.0

    def bias_at(self, xj) -> float:
        """Reconstruct the bias as a function of the free angle x_j."""
        a = self.angle_scale * np.asarray(xj, dtype=float)
        return self.c * np.cos(a) + self.s * np.sin(a) + self.b

    def bias_derivative_at(self, xj) -> float:
        """Reconstruct d(bias)/dtheta as a function of the free angle x_j."""
        a = self.angle_scale * np.asarray(xj, dtype=float)
        return self.c_prime * np.cos(a) + self.s_prime * np.sin(a) + self.b_prime

    def bias_slope_in_xj(self, xj) -> float:
        """Partial derivative of the bias with respect to x_j itself."""
        k = self.angle_scale
        a = k * np.asarray(xj, dtype=float)
        return k * (-self.c * np.sin(a) + self.s * np.cos(a))

    def bias_derivative_slope_in_xj(self, xj) -> float:
        """Partial derivative of d(bias)/dtheta with respect to x_j."""
        k = self.angle_scale
        a = k * np.asarray(xj, dtype=float)
        return k * (-self.c_prime * np.sin(a) + self.s_prime * np.cos(a))


def _elem(m: np.ndarray) -> complex:
    return complex(m[0, 0])


def _sandwich_triple(a, b, c, k):
    """(cos 2x, sin 2x, const) coefficients of <0| A W(-x) B W(x) C |0>.

    ``k`` is the Hermitian generator of the conjugating reflection pair
    (Z for V-type coordinates, P(theta) for U-type ones).
    """
    kb = k @ b
    bk = b @ k
    kbk = kb @ k
    cc = 0.5 * _elem(a @ (b - kbk) @ c)
    ss = -0.5j * _elem(a @ (bk - kb) @ c)
    bb = 0.5 * _elem(a @ (b + kbk) @ c)
    return cc, ss, bb


class CoefficientTable:
    """Prefix/suffix product tables for one (scheme, theta, x).

    Immutable after construction; safe for concurrent queries.
    """

    def __init__(self, scheme: Scheme, theta: float, x) -> None:
        self.scheme = scheme
        self.theta = float(theta)
        self.x = canonical_angles(x)
        self.layers = self.x.size // 2
        self._p = observable(self.theta)
        self._p_prime = observable_derivative(self.theta)
        w, wp = self._build_chain()
        self._n = len(w)
        self._build_products(w, wp)
        if scheme is Scheme.AF:
            self._build_middles(w, wp)

    # -- chain construction ------------------------------------------------

    def _build_chain(self):
        theta, x, L = self.theta, self.x, self.layers
        x_odd, x_even = x[0::2], x[1::2]
        if self.scheme is Scheme.AF:
            # Chain of 4L+1 factors realizing Q^dag P Q; position of x_j
            # (1-based j) is a = j-1 on the left and b = 4L-j+1 on the right.
            n = 4 * L + 1
            w = np.empty((n, 2, 2), dtype=complex)
            wp = np.zeros((n, 2, 2), dtype=complex)
            w[0 : 2 * L : 2] = reflection_u(theta, -x_odd)
            wp[0 : 2 * L : 2] = reflection_u_derivative(theta, -x_odd)
            w[1 : 2 * L : 2] = reflection_v(-x_even)
            w[2 * L] = self._p
            wp[2 * L] = self._p_prime
            w[2 * L + 2 :: 2] = reflection_u(theta, x_odd)[::-1]
            wp[2 * L + 2 :: 2] = reflection_u_derivative(theta, x_odd)[::-1]
            w[2 * L + 1 : 4 * L : 2] = reflection_v(x_even)[::-1]
            return w, wp
        # AB: the chain is Q itself (2L factors); x_j sits at position 2L-j.
        n = 2 * L
        w = np.empty((n, 2, 2), dtype=complex)
        wp = np.zeros((n, 2, 2), dtype=complex)
        w[0::2] = reflection_v(x_even[::-1])
        w[1::2] = reflection_u(theta, x_odd[::-1])
        wp[1::2] = reflection_u_derivative(theta, x_odd[::-1])
        return w, wp

    def _build_products(self, w, wp) -> None:
        n = self._n
        pre = [None] * n
        dpre = [None] * n
        acc, dacc = IDENTITY, _ZERO
        for i in range(n):
            dacc = dacc @ w[i] + acc @ wp[i]
            acc = acc @ w[i]
            pre[i], dpre[i] = acc, dacc
        suf = [None] * n
        dsuf = [None] * n
        acc, dacc = IDENTITY, _ZERO
        for i in range(n - 1, -1, -1):
            dacc = w[i] @ dacc + wp[i] @ acc
            acc = w[i] @ acc
            suf[i], dsuf[i] = acc, dacc
        self._pre, self._dpre = pre, dpre
        self._suf, self._dsuf = suf, dsuf

    def _build_middles(self, w, wp) -> None:
        # mid[a] is the product of chain positions [a+1, 4L-a-1], the segment
        # strictly between the two occurrences of the coordinate at slot a;
        # dmid[a] is its full theta-derivative.
        L = self.layers
        mid = [None] * (2 * L)
        dmid = [None] * (2 * L)
        mid[2 * L - 1] = self._p
        dmid[2 * L - 1] = self._p_prime
        for a in range(2 * L - 1, 0, -1):
            left, right = w[a], w[4 * L - a]
            dleft, dright = wp[a], wp[4 * L - a]
            mid[a - 1] = left @ mid[a] @ right
            dmid[a - 1] = (
                dleft @ mid[a] @ right
                + left @ dmid[a] @ right
                + left @ mid[a] @ dright
            )
        self._mid, self._dmid = mid, dmid

    # -- table lookups with identity/zero sentinels --------------------------

    def _prefix(self, i):
        return (IDENTITY, _ZERO) if i < 0 else (self._pre[i], self._dpre[i])

    def _suffix(self, i):
        return (IDENTITY, _ZERO) if i >= self._n else (self._suf[i], self._dsuf[i])

    # -- coefficient queries -------------------------------------------------

    def coefficients(self, j: int) -> CsbdCoefficients:
        """CSBD coefficients of the bias with respect to x_j (1-based)."""
        if not 1 <= j <= 2 * self.layers:
            raise IndexError(f"coordinate index {j} out of range 1..{2 * self.layers}")
        raw = self._coefficients_af(j) if self.scheme is Scheme.AF else self._coefficients_ab(j)
        residue = max(abs(v.imag) for v in raw)
        if residue > IMAG_RESIDUE_TOL:
            raise ArithmeticError(f"CSBD coefficients have imaginary residue {residue:.3e}")
        c, s, b, cp, sp, bp = (v.real for v in raw)
        return CsbdCoefficients(self.scheme, c, s, b, cp, sp, bp)

    def _coefficients_af(self, j: int):
        L = self.layers
        a = j - 1
        b = 4 * L - a
        left, dleft = self._prefix(a - 1)
        right, dright = self._suffix(b + 1)
        midm, dmid = self._mid[a], self._dmid[a]
        k = PAULI_Z if j % 2 == 0 else self._p
        cc, ss, bb = _sandwich_triple(left, midm, right, k)
        cp = sp = bp = 0.0 + 0.0j
        for aa, mm, rr in ((dleft, midm, right), (left, dmid, right), (left, midm, dright)):
            t = _sandwich_triple(aa, mm, rr, k)
            cp, sp, bp = cp + t[0], sp + t[1], bp + t[2]
        if j % 2 == 1:
            # The U factors carrying x_j are theta-dependent themselves.
            p, pp = self._p, self._p_prime
            m1 = _elem(left @ pp @ midm @ p @ right)
            m2 = _elem(left @ pp @ midm @ right)
            m3 = _elem(left @ p @ midm @ pp @ right)
            m4 = _elem(left @ midm @ pp @ right)
            cp += -0.5 * m1 - 0.5 * m3
            sp += 0.5j * m2 - 0.5j * m4
            bp += 0.5 * m1 + 0.5 * m3
        return cc, ss, bb, cp, sp, bp

    def _coefficients_ab(self, j: int):
        L = self.layers
        m = 2 * L - j
        left, dleft = self._prefix(m - 1)
        right, dright = self._suffix(m + 1)
        k = PAULI_Z if j % 2 == 0 else self._p
        cc = _elem(left @ right).real + 0.0j
        ss = _elem(left @ k @ right).imag + 0.0j
        cp = (_elem(dleft @ right) + _elem(left @ dright)).real + 0.0j
        sp = (_elem(dleft @ k @ right) + _elem(left @ k @ dright)).imag + 0.0j
        if j % 2 == 1:
            sp += _elem(left @ self._p_prime @ right).imag
        return cc, ss, 0.0j, cp, sp, 0.0j


def coefficients_af(theta: float, x, j: int) -> CsbdCoefficients:
    """Ancilla-free CSBD coefficients of the bias with respect to x_j."""
    return CoefficientTable(Scheme.AF, theta, x).coefficients(j)


def coefficients_ab(theta: float, x, j: int) -> CsbdCoefficients:
    """Ancilla-based CSD coefficients of the bias with respect to x_j."""
    return CoefficientTable(Scheme.AB, theta, x).coefficients(j)
