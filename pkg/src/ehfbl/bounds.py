"""Closed-form rate bounds for the AWGN energy-harvesting channel.

All logarithms are natural; rates are in nats per channel use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special

from .specmath import RandomStream, gauss_expect, inv_phi

# rho < RHO_MAX  <=>  sqrt(42 rho)/21 < sqrt(1 - rho)/2
RHO_MAX = 441.0 / 609.0


class Infeasible(ValueError):
    """A configuration outside the region where a bound is defined."""


# --------------------------------------------------------------------------
# energy arrival laws


class EnergyDist:
    """Law of the per-slot (or per-block-head) harvested energy."""

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    # uniforms consumed per draw; sampling is from_uniform(stream.uniform(.))
    uniforms_per_draw = 1

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, stream: RandomStream, size: int) -> np.ndarray:
        if self.uniforms_per_draw == 0:
            return self.from_uniform(np.empty(size))
        return self.from_uniform(stream.uniform(size))

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SquaredGaussian(EnergyDist):
    """E = U^2 with U ~ N(0, P), so E[E] = P and E[E^2] = 3 P^2."""

    P: float

    def mean(self):
        return self.P

    def second_moment(self):
        return 3.0 * self.P ** 2

    def from_uniform(self, u):
        g = special.ndtri(u)
        return self.P * g * g

    def describe(self):
        return {"kind": "squared_gaussian", "P": self.P}


@dataclass(frozen=True)
class Constant(EnergyDist):
    P: float

    def mean(self):
        return self.P

    def second_moment(self):
        return self.P ** 2

    uniforms_per_draw = 0

    def from_uniform(self, u):
        return np.full(np.shape(u), float(self.P))

    def describe(self):
        return {"kind": "constant", "P": self.P}


@dataclass(frozen=True)
class TwoPoint(EnergyDist):
    """``v1`` with probability ``p``, otherwise ``v2``."""

    v1: float
    v2: float
    p: float

    def __post_init__(self):
        if min(self.v1, self.v2) < 0 or not 0.0 <= self.p <= 1.0:
            raise ValueError("TwoPoint needs nonnegative values and p in [0, 1]")

    def mean(self):
        return self.p * self.v1 + (1.0 - self.p) * self.v2

    def second_moment(self):
        return self.p * self.v1 ** 2 + (1.0 - self.p) * self.v2 ** 2

    def from_uniform(self, u):
        return np.where(u < self.p, float(self.v1), float(self.v2))

    def describe(self):
        return {"kind": "two_point", "v1": self.v1, "v2": self.v2, "p": self.p}


def energy_from_dict(d: dict) -> EnergyDist:
    kind = d.get("kind", "squared_gaussian")
    if kind == "squared_gaussian":
        return SquaredGaussian(float(d["P"]))
    if kind == "constant":
        return Constant(float(d["P"]))
    if kind == "two_point":
        return TwoPoint(float(d["v1"]), float(d["v2"]), float(d["p"]))
    raise ValueError(f"unknown energy distribution {kind!r}")


# --------------------------------------------------------------------------
# configuration records


@dataclass(frozen=True)
class ChannelSpec:
    """Recharge rate ``P``, energy law and energy block length ``L``.

    The energy law defaults to ``SquaredGaussian(P)``.
    """

    P: float
    energy: Optional[EnergyDist] = None
    L: int = 1

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError(f"P > 0 required, got {self.P!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        if self.energy is None:
            object.__setattr__(self, "energy", SquaredGaussian(self.P))
        if abs(self.energy.mean() - self.P) > 1e-9 * max(1.0, self.P):
            raise ValueError("energy distribution mean must equal P")

    @property
    def E2(self) -> float:
        return self.energy.second_moment()

    @classmethod
    def from_db(cls, snr_db: float, L: int = 1) -> "ChannelSpec":
        return cls(P=db_to_linear(snr_db), L=L)


@dataclass(frozen=True)
class SchemeConfig:
    """Free parameters of a (blockwise) save-and-transmit code.

    ``m`` counts saving *blocks*, so the saving phase lasts ``m * L`` slots.
    """

    n: int
    m: int
    rho: float
    eps1: float
    eps2: float

    def power(self, spec: ChannelSpec) -> float:
        return (1.0 - self.rho) * spec.P

    def n_m(self, spec: ChannelSpec) -> int:
        return self.n - self.m * spec.L

    def validate(self, spec: ChannelSpec) -> None:
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if not 0.0 < self.rho < 1.0 or not rho_admissible(self.rho):
            raise Infeasible(f"rho={self.rho!r} outside (0, 441/609)")
        if self.m * spec.L >= self.n:
            raise Infeasible("saving phase covers the whole blocklength (m L >= n)")
        if self.eps1 <= 0 or self.eps2 <= 0 or self.eps1 + self.eps2 >= 1:
            raise ValueError("need eps1, eps2 > 0 and eps1 + eps2 < 1")


@dataclass(frozen=True)
class InfoDensityMoments:
    mu: float
    sigma2: float
    T: float


@dataclass
class RateBound:
    """A log M lower bound. ``log_M`` and ``rate`` are ``None`` when infeasible."""

    n: int
    log_M: Optional[float]
    feasible: bool
    terms: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def rate(self) -> Optional[float]:
        return None if self.log_M is None else self.log_M / self.n

    def as_dict(self, scale: float = 1.0) -> dict:
        def sc(v):
            return None if v is None else v * scale
        return {
            "feasible": self.feasible,
            "rate": sc(self.rate),
            "log_M": sc(self.log_M),
            "terms": {k: sc(v) for k, v in self.terms.items()},
            "aux": dict(self.aux),
            "reason": self.reason,
        }


class BaselineKind(enum.Enum):
    FTO17_IID = "fto17_iid"
    FTO17_BLOCK = "fto17_block"
    POWER_CONSTRAINED = "noneh"


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


# --------------------------------------------------------------------------
# single-letter quantities


def capacity(P: float) -> float:
    if P < 0:
        raise ValueError("P must be nonnegative")
    return 0.5 * math.log1p(P)


def info_density(x, y, S: float):
    """log N(y; x, 1) / N(y; 0, S + 1), elementwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = 0.5 * np.log1p(S) + y * y / (2.0 * (S + 1.0)) - (y - x) ** 2 / 2.0
    return out if out.ndim else float(out)


@lru_cache(maxsize=4096)
def moments(S: float) -> InfoDensityMoments:
    """Mean, variance and third absolute central moment of i(X; X + Z)."""
    if not S > 0:
        raise ValueError("S > 0 required")
    mu = 0.5 * math.log1p(S)
    sigma2 = S / (S + 1.0)
    # i(X; X + Z) - mu is a quadratic form in the standardized inputs (x, z).
    # Integrating in its eigenbasis puts the null lines of the form, where
    # |.|^3 has kinks, on the diagonals for every S; gauss_expect's own
    # rotation then keeps them clear of the grid.
    rs = math.sqrt(S)
    A = 0.5 * np.array([[S / (S + 1.0), rs / (S + 1.0)],
                        [rs / (S + 1.0), 1.0 / (S + 1.0) - 1.0]])
    _, Q = np.linalg.eigh(A)

    def g(a, b):
        x = Q[0, 0] * a + Q[0, 1] * b
        z = Q[1, 0] * a + Q[1, 1] * b
        y = rs * x + z
        return np.abs(0.5 * (y * y / (S + 1.0) - z * z)) ** 3

    T = gauss_expect(g, tol=1e-6 * min(1.0, sigma2 ** 1.5))
    return InfoDensityMoments(mu, sigma2, T)


def rho_admissible(rho: float) -> bool:
    return 0.0 < rho < RHO_MAX


def alpha_beta(spec: ChannelSpec, rho: float) -> tuple[float, float]:
    if not rho_admissible(rho):
        raise Infeasible(f"rho={rho!r} outside (0, 441/609)")
    S = (1.0 - rho) * spec.P
    alpha = 2.0 * rho * spec.P / (spec.L * spec.E2 + 3.0 * S * S)
    beta = alpha / (1.0 + 63.0 * alpha * S)
    return alpha, beta


def chernoff_t(spec: ChannelSpec, S: float) -> float:
    """Positive root of t = 2(P - S) / (L E[E^2] + 3 S^2 (1 + 63 S t))."""
    if not 0.0 < S < spec.P:
        raise ValueError("need 0 < S < P")
    a = spec.L * spec.E2 + 3.0 * S * S
    c = 1512.0 * S ** 3 * (spec.P - S)
    # -a + sqrt(a^2 + c) rewritten to avoid cancellation when c << a^2
    return c / (a + math.sqrt(a * a + c)) / (378.0 * S ** 3)


def _mismatch_rate(spec: ChannelSpec, alpha: float, beta: float) -> float:
    """Per-block exponent L P beta + L^2 alpha^2 E[E^2] / 2."""
    L = spec.L
    return L * spec.P * beta + L * L * alpha * alpha * spec.E2 / 2.0


def mismatch_bound(spec: ChannelSpec, config: SchemeConfig, gamma: float) -> float:
    """Upper bound on P{|Q| >= L gamma + 1}."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    alpha, beta = alpha_beta(spec, config.rho)
    return math.exp(-(config.m + gamma) * _mismatch_rate(spec, alpha, beta))


def chernoff_mismatch_bound(spec: ChannelSpec, config: SchemeConfig, gamma: float) -> float:
    """The sharper form exp(-(m + gamma)(t L P - t^2 L^2 E[E^2] / 2))."""
    t = chernoff_t(spec, config.power(spec))
    L = spec.L
    return math.exp(-(config.m + gamma) * (t * L * spec.P - t * t * L * L * spec.E2 / 2.0))


def escape_bound(spec: ChannelSpec, config: SchemeConfig) -> float:
    """Bound on the probability that the battery walk ever goes negative."""
    return chernoff_mismatch_bound(spec, config, 0.0)


def gamma_for_eps2(spec: ChannelSpec, config: SchemeConfig) -> float:
    alpha, beta = alpha_beta(spec, config.rho)
    return max(math.log(1.0 / config.eps2) / _mismatch_rate(spec, alpha, beta) - config.m, 0.0)


# --------------------------------------------------------------------------
# non-asymptotic log M


def theorem_log_M(spec: ChannelSpec, config: SchemeConfig, gamma: Optional[float] = None) -> RateBound:
    """Save-and-transmit log M lower bound together with the threshold
    pipeline (log xi, Delta, Delta~, floor choice of log M) it comes from.

    ``gamma`` overrides gamma(eps2) for stress tests.
    """
    try:
        config.validate(spec)
    except Infeasible as exc:
        return RateBound(config.n, None, False, reason=str(exc))
    L = spec.L
    S = config.power(spec)
    n_m = config.n_m(spec)
    alpha, beta = alpha_beta(spec, config.rho)
    gam = gamma_for_eps2(spec, config) if gamma is None else float(gamma)
    mom = moments(S)
    sigma = math.sqrt(mom.sigma2)
    aux = {
        "S": S, "n_m": n_m, "alpha": alpha, "beta": beta, "gamma_eps2": gam,
        "t": chernoff_t(spec, S), "mu": mom.mu, "sigma2": mom.sigma2, "T": mom.T,
        "delta": L * math.log(2.0) + 3.0 * math.log(n_m),
        "delta_tilde": L * math.log(2.0) + 4.0 * math.log(n_m),
    }
    be_arg = config.eps1 - mom.T / (sigma ** 3 * math.sqrt(n_m)) - 4.0 / math.sqrt(n_m)
    aux["berry_esseen_arg"] = be_arg
    if be_arg <= 0:
        return RateBound(config.n, None, False, aux=aux,
                         reason="eps1 - T/(sigma^3 sqrt(n_m)) - 4/sqrt(n_m) <= 0")

    first = n_m * mom.mu
    dispersion = math.sqrt(n_m * mom.sigma2) * inv_phi(be_arg)
    penalty = -(L * (2.0 * S * math.log(2.0) + 0.5 * math.log1p(S))
                + (8.0 * S + 1.0) * math.log(n_m)) * (gam + 1.0)
    remainder = -0.5 * math.log(n_m) - 1.0

    log_xi = first + dispersion - 2.0 * S * aux["delta_tilde"] * (gam + 1.0)
    aux["xi_log"] = log_xi
    aux["log_M_floor"] = math.floor(
        log_xi - (gam + 1.0) * (0.5 * L * math.log1p(S) + math.log(n_m)) - 0.5 * math.log(n_m))
    terms = {"first_order": first, "dispersion": dispersion,
             "mismatch_penalty": penalty, "remainder": remainder}
    return RateBound(config.n, first + dispersion + penalty + remainder, True, terms, aux)


# --------------------------------------------------------------------------
# corollary parameter choices (kappa terms omitted)


@dataclass
class CorollaryPoint:
    rho: float
    m: Optional[int]
    bound: RateBound
    theorem: Optional[RateBound] = None

    def __iter__(self):
        return iter((self.rho, self.m, self.bound))


def corollary_save(spec: ChannelSpec, n: int, eps1: float, eps2: float) -> CorollaryPoint:
    """Explicit (rho, m) and rate of the saving-phase corollary."""
    P, L, E2 = spec.P, spec.L, spec.E2
    lg = math.log(1.0 / eps2)
    rho = math.sqrt((P + 1) * (L * E2 + 3 * P * P) * math.log1p(P) * lg) / (P * math.sqrt(2 * n * P))
    if not rho_admissible(rho):
        return CorollaryPoint(rho, None, RateBound(n, None, False, reason="rho >= 441/609"))
    alpha, beta = alpha_beta(spec, rho)
    m = math.ceil(lg / _mismatch_rate(spec, alpha, beta))
    if m * L >= n:
        return CorollaryPoint(rho, m, RateBound(n, None, False, reason="m L >= n"))
    first = capacity(P)
    backoff = -math.sqrt((L * E2 + 3 * P * P) * math.log1p(P) * lg / (2 * n * P * (P + 1)))
    dispersion = math.sqrt(P / ((P + 1) * n)) * inv_phi(eps1)
    rate = first + backoff + dispersion
    terms = {"first_order": first * n, "backoff": backoff * n,
             "dispersion": dispersion * n, "remainder": None}
    aux = {"rho": rho, "m": m, "alpha": alpha, "beta": beta}
    bound = RateBound(n, rate * n, True, terms, aux)
    thm = theorem_log_M(spec, SchemeConfig(n, m, rho, eps1, eps2))
    return CorollaryPoint(rho, m, bound, thm)


def best_effort_lambdas(P: float) -> tuple[float, float]:
    return 2 * P * math.log(2.0) + 0.5 * math.log1p(P), 8 * P + 1


def corollary_best_effort(spec: ChannelSpec, n: int, eps1: float, eps2: float) -> CorollaryPoint:
    """Explicit rho and rate of the best-effort corollary (m = 0).

    The dispersion term carries the minus sign exactly as printed for this
    corollary; ``aux['dispersion_sign']`` records it.
    """
    P, L, E2 = spec.P, spec.L, spec.E2
    lam1, lam2 = best_effort_lambdas(P)
    lg = math.log(1.0 / eps2)
    load = lam1 * L + lam2 * math.log(n)
    rho = math.sqrt(load * (P + 1) * (L * E2 + 3 * P * P) * lg) / (P * math.sqrt(P * L * n))
    aux = {"rho": rho, "lambda1": lam1, "lambda2": lam2, "dispersion_sign": -1}
    if not rho_admissible(rho):
        return CorollaryPoint(rho, 0, RateBound(n, None, False, aux=aux, reason="rho >= 441/609"))
    alpha, beta = alpha_beta(spec, rho)
    aux.update(alpha=alpha, beta=beta, gamma_eps2=lg / _mismatch_rate(spec, alpha, beta))
    first = capacity(P)
    backoff = -math.sqrt(load * (L * E2 + 3 * P * P) * lg / (L * P * (P + 1) * n))
    dispersion = -math.sqrt(P / ((P + 1) * n)) * inv_phi(eps1)
    rate = first + backoff + dispersion
    terms = {"first_order": first * n, "backoff": backoff * n,
             "dispersion": dispersion * n, "remainder": None}
    bound = RateBound(n, rate * n, True, terms, aux)
    thm = theorem_log_M(spec, SchemeConfig(n, 0, rho, eps1, eps2))
    return CorollaryPoint(rho, 0, bound, thm)


# --------------------------------------------------------------------------
# asymptotic curves and baselines


def save_backoff_coefficient(P: float, E2: float, eps: float) -> float:
    return math.sqrt(E2 * math.log1p(P) * math.log(1 / eps) / (2 * P * (P + 1)))


def best_effort_backoff_coefficient(P: float, E2: float, eps: float) -> float:
    lam1, _ = best_effort_lambdas(P)
    return math.sqrt(lam1 * E2 * math.log(1 / eps) / (P * (P + 1)))


def asymptotic_curves(spec: ChannelSpec, n: int, eps: float) -> tuple[float, float]:
    """Save-and-transmit and best-effort rates to the sqrt(L/n) term,
    o(sqrt(L/n)) dropped."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    P, E2 = spec.P, spec.E2
    scale = math.sqrt(spec.L / n)
    c = capacity(P)
    return (c - save_backoff_coefficient(P, E2, eps) * scale,
            c - best_effort_backoff_coefficient(P, E2, eps) * scale)


def baseline(kind: BaselineKind, spec: ChannelSpec, n: int,
             eps1: Optional[float] = None, eps2: Optional[float] = None,
             eps: Optional[float] = None) -> float:
    """Reference rates: the S = P save-and-transmit bounds for i.i.d. and
    block arrivals, and the power-constrained (no EH) normal approximation.

    The i.i.d. variant takes ``(eps1, eps2)``; the other two take ``eps``.
    """
    kind = BaselineKind(kind)
    P, E2 = spec.P, spec.E2
    c = capacity(P)
    if kind is BaselineKind.FTO17_IID:
        if eps1 is None or eps2 is None or eps is not None:
            raise ValueError("fto17_iid takes eps1 and eps2")
        if spec.L != 1:
            raise ValueError("fto17_iid is defined for L = 1")
        second = (-(math.log1p(P) / (2 * P)) * math.sqrt((E2 + P * P) * math.log(1 / eps2))
                  + math.sqrt(P / (P + 1)) * inv_phi(eps1))
        return c + second / math.sqrt(n)
    if eps is None:
        if eps1 is None or eps2 is None:
            raise ValueError(f"{kind.value} takes eps (or eps1 + eps2)")
        eps = eps1 + eps2
    if kind is BaselineKind.FTO17_BLOCK:
        return c - (math.log1p(P) / (2 * P)) * math.sqrt((E2 + P * P) * math.log(1 / eps)) \
            * math.sqrt(spec.L / n)
    return c + math.sqrt(P * (P + 2) / (2 * (P + 1) ** 2)) * inv_phi(eps) / math.sqrt(n)
