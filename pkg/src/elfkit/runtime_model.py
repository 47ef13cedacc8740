"""Analytic model of estimation runtime on noisy hardware.

Noise enters through a per-time-unit decay exponent lam and a SPAM exponent
alpha via fidelity^2 = exp(-lam*m - alpha) with m = 2L + 1.  The model gives
the optimal-depth inverse-variance rate, constant-factor bounds on the best
Chebyshev rate, an ODE for the inverse variance interpolating the Heisenberg
(quadratic) and shot-noise (linear) regimes, closed-form runtime bounds
versus target error, and a mapping from hardware parameters (qubits, depth,
two-qubit fidelity, gate time) to runtime-in-seconds curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

E = math.e
RATE_LOWER_FACTOR = (E - 1.0) / E
RATE_UPPER_FACTOR = E / (E - 1.0)
MU_VALID_RANGE = (0.1 * math.pi, 0.9 * math.pi)


class RateDomainError(ValueError):
    """Inputs outside the validity region of the rate model."""


@dataclass(frozen=True)
class NoiseParams:
    """Reparameterized noise: fidelity^2 = exp(-lam * (2L+1) - alpha).

    The model requires lam <= 1 (deeper noise breaks the continuous-depth
    optimization).  ``alpha`` may be negative: with no SPAM error the layer
    share alone gives alpha = -lam.
    """

    lam: float
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise RateDomainError("lam must lie in [0, 1]")
        if not math.isfinite(self.alpha):
            raise RateDomainError("alpha must be finite")

    @classmethod
    def from_noise_model(cls, noise) -> "NoiseParams":
        """Exponents matching fidelity = spam * layer^L at every L."""
        lam = math.log(1.0 / noise.layer_fidelity)
        alpha = 2.0 * math.log(1.0 / noise.spam_fidelity) - lam
        return cls(lam, alpha)


@dataclass(frozen=True)
class HardwareParams:
    """Device-level inputs of the runtime-in-seconds mapping."""

    qubits: int
    depth: int  # two-qubit gate depth of one circuit layer
    gate_fidelity: float  # two-qubit gate fidelity
    gate_time: float  # seconds per two-qubit gate layer
    spam_fidelity: float = 1.0
    target_error: float = 1e-3

    def __post_init__(self) -> None:
        if self.qubits < 1 or self.depth < 1:
            raise ValueError("qubits and depth must be positive")
        if not 0.0 < self.gate_fidelity < 1.0:
            raise ValueError("gate_fidelity must be in (0, 1)")
        if self.gate_time <= 0.0 or self.target_error <= 0.0:
            raise ValueError("gate_time and target_error must be positive")
        if not 0.0 < self.spam_fidelity <= 1.0:
            raise ValueError("spam_fidelity must be in (0, 1]")

    def decay_exponent(self, gate_fidelity: float | None = None) -> float:
        """lam = (nD/2) ln(1/f2Q); the layer fidelity is f2Q^(nD/2)."""
        f2q = self.gate_fidelity if gate_fidelity is None else gate_fidelity
        return 0.5 * self.qubits * self.depth * math.log(1.0 / f2q)

    def spam_exponent(self, gate_fidelity: float | None = None) -> float:
        return 2.0 * math.log(1.0 / self.spam_fidelity) - self.decay_exponent(gate_fidelity)

    @property
    def seconds_per_time_unit(self) -> float:
        """One ansatz application: depth layers of two-qubit gates."""
        return self.depth * self.gate_time


def rbar(sigma, noise: NoiseParams):
    """Optimal-depth inverse-variance rate at prior width sigma.

    Continuous-depth optimum 1/m = (sqrt(lam^2 + 8 sigma^2) + lam)/2; the
    rate interpolates e^(-alpha-1/2)/(sqrt(2) sigma) at lam -> 0 and
    e^(-alpha-1)/lam for sigma << lam.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0.0):
        raise RateDomainError("sigma must be positive")
    lam, alpha = noise.lam, noise.alpha
    root = np.sqrt(lam * lam + 8.0 * sigma * sigma)
    out = (
        2.0 * math.exp(-alpha - 1.0) / (root + lam)
        * np.exp(2.0 * sigma * sigma / (4.0 * sigma * sigma + lam * lam + lam * root))
    )
    return out if out.ndim else float(out)


def chebyshev_rate_bounds(mu: float, sigma: float, noise: NoiseParams) -> tuple[float, float]:
    """Constant-factor envelope of the depth-optimized Chebyshev rate.

    Valid for mu in [0.1 pi, 0.9 pi]; the ratio of the bounds is
    (e/(e-1))^2 independent of the inputs.
    """
    if not MU_VALID_RANGE[0] <= mu <= MU_VALID_RANGE[1]:
        raise RateDomainError("mu must lie in [0.1 pi, 0.9 pi]")
    mid = rbar(sigma, noise)
    return RATE_LOWER_FACTOR * mid, RATE_UPPER_FACTOR * mid


@dataclass(frozen=True)
class InverseVarianceCurve:
    times: np.ndarray
    values: np.ndarray
    _dense: object

    def at(self, t):
        return self._dense(np.asarray(t, dtype=float))[0]

    def time_to(self, f_target: float) -> float:
        """First time the inverse variance reaches the target (monotone curve)."""
        if f_target <= self.values[0]:
            return float(self.times[0])
        if f_target > self.values[-1]:
            raise ValueError("target beyond integrated horizon")
        idx = int(np.searchsorted(self.values, f_target))
        lo, hi = self.times[max(idx - 1, 0)], self.times[idx]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.at(mid) < f_target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def integrate_inverse_variance(
    noise: NoiseParams,
    f0: float,
    t_max: float,
    n_points: int = 400,
    rtol: float = 1e-8,
) -> InverseVarianceCurve:
    """Integrate dF/dt = rbar(1/sqrt(F)) from F(0) = f0 up to t_max.

    Quadratic growth while F << 1/lam^2, linear growth for F >> 1/lam^2.
    """
    if f0 <= 0.0:
        raise ValueError("initial inverse variance must be positive")

    def rhs(_t, y):
        return [rbar(1.0 / math.sqrt(y[0]), noise)]

    sol = solve_ivp(
        rhs,
        (0.0, t_max),
        [f0],
        rtol=rtol,
        atol=f0 * 1e-12,
        dense_output=True,
        method="RK45",
    )
    if not sol.success:
        raise ArithmeticError(f"inverse-variance integration failed: {sol.message}")
    times = np.linspace(0.0, t_max, n_points)
    values = sol.sol(times)[0]
    return InverseVarianceCurve(times, values, sol.sol)


def runtime_bounds(eps_theta: float, noise: NoiseParams, spam: float = 1.0) -> tuple[float, float]:
    """Closed-form bounds on the time to reach phase error eps_theta.

    Lower bound pairs the fastest admissible rate with a bias-free estimate;
    the upper bound the slowest rate with bias equal to variance.
    """
    if eps_theta <= 0.0:
        raise ValueError("eps_theta must be positive")
    if not 0.0 < spam <= 1.0:
        raise ValueError("spam must be in (0, 1]")
    lam = noise.lam
    core_shared = math.sqrt((lam / eps_theta**2) ** 2 + (2.0 * math.sqrt(2.0) / eps_theta) ** 2)
    lower = (
        (E - 1.0)
        * math.exp(-lam)
        / (2.0 * spam**2)
        * (lam / eps_theta**2 + 1.0 / (math.sqrt(3.0) * eps_theta) + core_shared)
    )
    upper = (
        E**2
        / (E - 1.0)
        * math.exp(-lam)
        / spam**2
        * (lam / eps_theta**2 + 1.0 / (math.sqrt(2.0) * eps_theta) + core_shared)
    )
    return lower, upper


@dataclass(frozen=True)
class RuntimePoint:
    gate_fidelity: float
    eps: float
    t_lower_s: float
    t_upper_s: float
    t_mid_s: float
    valid: bool


def hardware_runtime_curve(
    hw: HardwareParams,
    eps_list,
    f2q_grid=None,
    pi: float = 0.0,
) -> list[RuntimePoint]:
    """Estimation runtime in seconds versus two-qubit gate fidelity.

    The phase error uses eps_theta^2 = eps_pi^2 / (1 - pi^2); rows whose
    decay exponent exceeds 1 are flagged invalid instead of silently plotted.
    The mid curve is the geometric mean of the bounds, consistent with a rate
    tracking the geometric mean of the rate envelope.
    """
    if f2q_grid is None:
        f2q_grid = 1.0 - np.geomspace(1e-2, 1e-8, 121)
    if not -1.0 < pi < 1.0:
        raise ValueError("pi must lie in (-1, 1)")
    scale = hw.seconds_per_time_unit
    points: list[RuntimePoint] = []
    for f2q in np.asarray(f2q_grid, dtype=float):
        lam = hw.decay_exponent(f2q)
        valid = lam <= 1.0
        for eps in eps_list:
            eps_theta = float(eps) / math.sqrt(1.0 - pi * pi)
            if valid:
                noise = NoiseParams(lam, hw.spam_exponent(f2q))
                lo, hi = runtime_bounds(eps_theta, noise, hw.spam_fidelity)
                lo_s, hi_s = lo * scale, hi * scale
                mid_s = math.sqrt(lo_s * hi_s)
            else:
                lo_s = hi_s = mid_s = math.nan
            points.append(RuntimePoint(float(f2q), float(eps), lo_s, hi_s, mid_s, valid))
    return points
