"""Adaptive Bayesian estimation loop with Gaussian beliefs.

The belief over theta = arccos(Pi) stays Gaussian throughout: each round
selects circuit angles for the current belief, fits the local bias with a
sinusoid arcsin-linear in theta, samples an outcome from the noisy
likelihood at the true theta, and applies the closed-form posterior-moment
update of the fitted model.  Conversions between theta- and Pi-beliefs are
analytic one way (moments of cos of a Gaussian) and numeric the other
(moments of arccos of a clipped Gaussian).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .algebra import canonical_angles
from .bias import Scheme, bias, clf_angles
from .metrics import GaussianBelief, NoiseModel

ARCSIN_CLAMP = 1e-12
PI_TO_THETA_NODES = 101
PI_TO_THETA_TAIL_Z = 12.0

TRACE_CSV_COLUMNS = (
    "round",
    "k_time",
    "outcome",
    "r",
    "b",
    "theta_mean",
    "theta_var",
    "pi_mean",
    "pi_var",
)


class DegenerateFitError(ArithmeticError):
    """The sinusoid fit's normal equations are singular."""


@dataclass(frozen=True)
class SinusoidFit:
    """Parameters of the local model bias(theta) ~ sin(r theta + b)."""

    r: float
    b: float


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    cumulative_time: int
    outcome: int
    fit: SinusoidFit
    theta_belief: GaussianBelief
    pi_belief: GaussianBelief


# -- belief conversions --------------------------------------------------------


def _cos_moments(mu, var):
    """Mean and variance of cos(X) for X ~ N(mu, var); exact and underflow-safe."""
    decay = np.exp(-var / 2.0)
    mean = decay * np.cos(mu)
    spread = -np.expm1(-var)  # 1 - exp(-var), accurate for tiny var
    second = 2.0 * np.sin(mu) ** 2 - np.cos(2.0 * mu) * np.expm1(-var)
    return mean, 0.5 * spread * second


def theta_to_pi(belief: GaussianBelief) -> GaussianBelief:
    """Moment-matched Gaussian belief over Pi = cos(theta)."""
    mean, var = _cos_moments(belief.mean, belief.variance)
    return GaussianBelief(float(mean), max(float(var), np.finfo(float).tiny))


@lru_cache(maxsize=4)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def pi_to_theta(
    belief: GaussianBelief,
    nodes: int = PI_TO_THETA_NODES,
    tail_z: float = PI_TO_THETA_TAIL_Z,
) -> GaussianBelief:
    """Moment-matched Gaussian belief over theta = arccos(clip(Pi, -1, 1)).

    Gauss-Legendre quadrature over the in-range part of the Gaussian plus
    explicit point masses at the clipped tails (theta = pi below -1, theta = 0
    above +1).  Moments are accumulated around arccos of the clipped mean so
    that tiny variances survive the subtraction.
    """
    mu, sd = belief.mean, belief.std
    w_lo = float(ndtr((-1.0 - mu) / sd))  # mass clipped to Pi = -1
    w_hi = float(ndtr((mu - 1.0) / sd))  # mass clipped to Pi = +1
    center = math.acos(min(1.0, max(-1.0, mu)))
    m1 = w_lo * (math.pi - center) + w_hi * (0.0 - center)
    m2 = w_lo * (math.pi - center) ** 2 + w_hi * center**2
    lo = max(-1.0, mu - tail_z * sd)
    hi = min(1.0, mu + tail_z * sd)
    if hi > lo:
        t, w = _leggauss(nodes)
        half = 0.5 * (hi - lo)
        pts = 0.5 * (hi + lo) + half * t
        pdf = np.exp(-((pts - mu) ** 2) / (2.0 * sd * sd)) / (sd * math.sqrt(2.0 * math.pi))
        g = np.arccos(pts) - center
        m1 += half * float(np.sum(w * pdf * g))
        m2 += half * float(np.sum(w * pdf * g * g))
    var = m2 - m1 * m1
    return GaussianBelief(center + m1, max(var, np.finfo(float).tiny))


# -- sinusoid fit and posterior update ----------------------------------------


def _fit_line(thetas: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares line z ~ r*theta + b along the last axis, centered form."""
    t_mean = thetas.mean(axis=-1, keepdims=True)
    z_mean = z.mean(axis=-1, keepdims=True)
    tc = thetas - t_mean
    denom = np.sum(tc * tc, axis=-1)
    if np.any(denom <= 0.0) or not np.all(np.isfinite(denom)):
        raise DegenerateFitError("singular normal equations in sinusoid fit")
    r = np.sum(tc * (z - z_mean), axis=-1) / denom
    b = z_mean[..., 0] - r * t_mean[..., 0]
    return r, b


def fit_points_grid(mean, std, fit_points: int) -> np.ndarray:
    """Fit abscissae: uniformly spaced theta values covering mean +- std."""
    offsets = np.linspace(-1.0, 1.0, fit_points)
    return np.asarray(mean)[..., None] + np.asarray(std)[..., None] * offsets


def fit_sinusoid(
    scheme: Scheme,
    x,
    f: float,
    belief: GaussianBelief,
    fit_points: int = 11,
) -> SinusoidFit:
    """Fit arcsin(bias) with a line in theta over the +-1 sigma prior window.

    The fidelity ``f`` identifies the model (1 + (-1)^d f sin(r theta + b))/2
    the fitted parameters belong to; the fit itself uses the noiseless bias.
    """
    if fit_points < 2:
        raise DegenerateFitError("sinusoid fit needs at least two points")
    x = canonical_angles(x)
    thetas = fit_points_grid(belief.mean, belief.std, fit_points)
    values = np.asarray(bias(scheme, thetas, x))
    z = np.arcsin(np.clip(values, -1.0 + ARCSIN_CLAMP, 1.0 - ARCSIN_CLAMP))
    r, b = _fit_line(thetas, z)
    return SinusoidFit(float(r), float(b))


def _posterior_moments(mu, var, r, b, f, d):
    """Closed-form posterior mean/variance for the sinusoidal likelihood."""
    sign = 1.0 - 2.0 * np.asarray(d, dtype=float)
    decay = np.exp(-(r**2) * var / 2.0)
    phase = r * mu + b
    s_, c_ = np.sin(phase), np.cos(phase)
    den = 1.0 + sign * f * decay * s_
    mu_next = mu + sign * f * decay * r * var * c_ / den
    var_next = var * (1.0 - f * r**2 * var * decay * (f * decay + sign * s_) / den**2)
    return mu_next, var_next


def bayes_update(belief: GaussianBelief, fit: SinusoidFit, f: float, d: int) -> GaussianBelief:
    """Gaussian posterior after observing outcome d under the fitted sinusoid."""
    if d not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    if not 0.0 <= f <= 1.0:
        raise ValueError("fidelity must be in [0, 1]")
    mu, var = _posterior_moments(belief.mean, belief.variance, fit.r, fit.b, f, d)
    return GaussianBelief(float(mu), float(var))


# -- the estimation loop -------------------------------------------------------


@dataclass
class EstimationConfig:
    """One adaptive estimation run against a synthetic noisy device."""

    scheme: Scheme
    layers: int
    noise: NoiseModel
    prior_pi: GaussianBelief
    true_pi: float
    seed: int = 0
    horizon: int | None = None  # total time budget, units of the ansatz duration
    target_pi_std: float | None = None
    angle_source: str = "table"  # "table" | "clf" | "tune"
    table: "object | None" = None  # tuner.LookupTable when angle_source == "table"
    fit_points: int = 11
    tune_restarts: int = 10
    max_rounds: int | None = None

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if not -1.0 < self.true_pi < 1.0:
            raise ValueError("true_pi must lie in (-1, 1)")
        if self.angle_source not in ("table", "clf", "tune"):
            raise ValueError("angle_source must be 'table', 'clf' or 'tune'")
        if self.horizon is None and self.target_pi_std is None:
            raise ValueError("either a time budget or a target precision is required")
        if self.angle_source == "table" and self.table is None:
            raise ValueError("angle_source 'table' requires a lookup table")

    @property
    def round_cost(self) -> int:
        return 2 * self.layers + 1

    def round_budget(self) -> int:
        if self.horizon is not None:
            budget = self.horizon // self.round_cost
        else:
            budget = self.max_rounds if self.max_rounds is not None else 10**6
        if self.max_rounds is not None:
            budget = min(budget, self.max_rounds)
        return int(budget)


def _select_angles(config: EstimationConfig, belief: GaussianBelief) -> np.ndarray:
    if config.angle_source == "clf":
        return clf_angles(config.layers)
    if config.angle_source == "table":
        pi_estimate = theta_to_pi(belief).mean
        return config.table.angles_for(pi_estimate)
    from .tuner import TuneSpec, tune  # local import to avoid a cycle

    spec = TuneSpec(
        scheme=config.scheme,
        layers=config.layers,
        mu=belief.mean,
        fidelity=config.noise.process_fidelity(config.layers),
        restarts=config.tune_restarts,
        seed=config.seed,
    )
    return tune(spec).x_opt


def run_estimation(config: EstimationConfig) -> list[RoundRecord]:
    """Run the adaptive loop and return the per-round trace.

    The belief is maintained over theta; the recorded Pi belief is its
    analytic cosine transform.  Outcomes are synthesized from the noisy
    likelihood at the true theta using the run's private random stream.
    """
    f = config.noise.process_fidelity(config.layers)
    theta_star = math.acos(config.true_pi)
    belief = pi_to_theta(config.prior_pi)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    records: list[RoundRecord] = []
    budget = config.round_budget()
    uniforms = rng.random(budget) if budget < 10**6 else None
    for k in range(1, budget + 1):
        x = _select_angles(config, belief)
        fit = fit_sinusoid(config.scheme, x, f, belief, config.fit_points)
        p0 = (1.0 + f * bias(config.scheme, theta_star, x)) / 2.0
        u = uniforms[k - 1] if uniforms is not None else rng.random()
        d = 0 if u < p0 else 1
        belief = bayes_update(belief, fit, f, d)
        pi_belief = theta_to_pi(belief)
        records.append(
            RoundRecord(
                round_index=k,
                cumulative_time=k * config.round_cost,
                outcome=d,
                fit=fit,
                theta_belief=belief,
                pi_belief=pi_belief,
            )
        )
        if config.target_pi_std is not None and pi_belief.std <= config.target_pi_std:
            break
    return records


def write_trace_csv(records: list[RoundRecord], fh) -> None:
    """Trace export; one row per round with the documented column set."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_CSV_COLUMNS)
    for rec in records:
        writer.writerow(
            [
                rec.round_index,
                rec.cumulative_time,
                rec.outcome,
                repr(rec.fit.r),
                repr(rec.fit.b),
                repr(rec.theta_belief.mean),
                repr(rec.theta_belief.variance),
                repr(rec.pi_belief.mean),
                repr(rec.pi_belief.variance),
            ]
        )
