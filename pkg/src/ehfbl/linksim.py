"""Random-coding link simulation with the information-density threshold
decoder, plus Monte Carlo checks of the error-decomposition terms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .bounds import (ChannelSpec, Infeasible, SchemeConfig, info_density,
                     moments, theorem_log_M)
from .ehsim import MismatchStats, _n_blocks, encode_batch, trial_draws
from .specmath import ConfidenceEstimate, RandomStream, map_trial_chunks, uniform_rows

__all__ = [
    "Codebook",
    "DecodeResult",
    "decode_threshold",
    "mc_link_error",
    "miss_threshold",
    "mc_miss_term",
    "false_alarm_bound",
    "mc_false_alarm",
    "mc_shannon",
]

CHUNK = 1000
MAX_MESSAGES = 2 ** 16


@dataclass
class Codebook:
    """``M`` codewords of length ``n`` with i.i.d. N(0, S) entries."""

    S: float
    symbols: np.ndarray

    @property
    def M(self) -> int:
        return self.symbols.shape[0]

    @property
    def n(self) -> int:
        return self.symbols.shape[1]

    @classmethod
    def draw(cls, M: int, n: int, S: float, stream: RandomStream) -> "Codebook":
        return cls(S, math.sqrt(S) * stream.normal((M, n)))


@dataclass
class DecodeResult:
    """``declared`` is a 0-based message index."""

    declared: int
    unique_hit: bool
    threshold_log: float


def _scores(symbols, received, skip, S):
    return info_density(symbols[..., skip:], received[..., None, skip:], S).sum(axis=-1)


def decode_threshold(codebook: Codebook, received, skip: int, log_xi: float,
                     stream: Optional[RandomStream] = None) -> DecodeResult:
    """Declare the unique message whose information density over slots
    ``skip..n-1`` reaches ``log_xi``. With zero or several passes the
    decision is uniform over all messages, drawn from ``stream``.
    """
    y = np.asarray(received, dtype=float)
    if len(y) != codebook.n or not 0 <= skip < codebook.n:
        raise ValueError("need len(received) == n and 0 <= skip < n")
    passed = np.flatnonzero(_scores(codebook.symbols, y, skip, codebook.S) >= log_xi)
    if len(passed) == 1:
        return DecodeResult(int(passed[0]), True, log_xi)
    if stream is None:
        raise ValueError("a stream is needed for the uniform fallback")
    return DecodeResult(stream.integers(codebook.M), False, log_xi)


def mc_link_error(spec: ChannelSpec, config: SchemeConfig, M: int, trials: int, seed: int,
                  log_xi: Optional[float] = None, conf: float = 0.99) -> ConfidenceEstimate:
    """End-to-end error probability of message 0 with fresh codebook,
    energy trace and noise per trial.

    ``log_xi`` defaults to the theorem threshold; configurations where that
    threshold is undefined need an explicit value.
    """
    if not 1 <= M <= MAX_MESSAGES:
        raise ValueError(f"M must lie in [1, {MAX_MESSAGES}]")
    config.validate(spec)
    n, L, S = config.n, spec.L, config.power(spec)
    skip = config.m * L
    if log_xi is None:
        rb = theorem_log_M(spec, config)
        if not rb.feasible:
            raise Infeasible(f"threshold undefined: {rb.reason}; pass log_xi explicitly")
        log_xi = rb.aux["xi_log"]
    if M == 1:
        return ConfidenceEstimate(trials, 0, conf)
    nb = _n_blocks(n, L)

    def work(a, b):
        # per trial: block heads, codebook (M x n), noise (n), fallback uniform
        H, C, Z, U = trial_draws(seed, a, b, [(spec.energy, nb), ("normal", M * n),
                                              ("normal", n), ("uniform", 1)])
        C = math.sqrt(S) * C.reshape(b - a, M, n)
        tx, _ = encode_batch(C[:, 0, :], H, n, L, config.m)
        y = tx + Z
        passed = _scores(C, y, skip, S) >= log_xi
        unique = passed.sum(axis=1) == 1
        guess = np.minimum((U[:, 0] * M).astype(np.int64), M - 1)
        declared = np.where(unique, passed.argmax(axis=1), guess)
        return int(np.count_nonzero(declared != 0))

    errors = sum(map_trial_chunks(work, trials, CHUNK))
    return ConfidenceEstimate(trials, errors, conf)


# --------------------------------------------------------------------------
# error decomposition terms


def miss_threshold(spec: ChannelSpec, config: SchemeConfig, gamma: Optional[float] = None) -> float:
    """log xi + 2 S Delta~ (gamma + 1), the level the matched statistic must clear."""
    rb = theorem_log_M(spec, config, gamma)
    if not rb.feasible:
        raise Infeasible(rb.reason)
    a = rb.aux
    return a["xi_log"] + 2.0 * a["S"] * a["delta_tilde"] * (a["gamma_eps2"] + 1.0)


def mc_miss_term(spec: ChannelSpec, config: SchemeConfig, trials: int, seed: int,
                 threshold: Optional[float] = None, method: str = "auto",
                 conf: float = 0.99) -> ConfidenceEstimate:
    """P{sum over the transmission phase of i(X_k; X_k + Z_k) < threshold}.

    ``method="direct"`` sums per-symbol densities. ``"chi2"`` uses the exact
    law of the sum, n_m mu + (sigma/2)(C1 - C2) with C1, C2 independent
    chi-square(n_m); ``"auto"`` picks it once n_m exceeds 256.
    """
    if threshold is None:
        threshold = miss_threshold(spec, config)
    else:
        config.validate(spec)
    S = config.power(spec)
    n_m = config.n_m(spec)
    if method == "auto":
        method = "chi2" if n_m > 256 else "direct"
    if method not in ("direct", "chi2"):
        raise ValueError(f"unknown method {method!r}")
    mom = moments(S)
    half_sigma = 0.5 * math.sqrt(mom.sigma2)

    def work(a, b):
        if method == "chi2":
            U = uniform_rows(seed, range(a, b), 2)
            C = special.chdtri(n_m, U)
            stat = n_m * mom.mu + half_sigma * (C[:, 0] - C[:, 1])
        else:
            X, Z = trial_draws(seed, a, b, [("normal", n_m), ("normal", n_m)])
            X *= math.sqrt(S)
            stat = info_density(X, X + Z, S).sum(axis=1)
        return int(np.count_nonzero(stat < threshold))

    return ConfidenceEstimate(trials, sum(map_trial_chunks(work, trials, CHUNK)), conf)


def false_alarm_bound(n: int, m: int, L: int, S: float, M: int, gamma: float, delta: float) -> float:
    """(2 e^-delta / M) ((n - mL)(S + 1)^(L/2))^(gamma + 1)."""
    return 2.0 * math.exp(-delta) / M * ((n - m * L) * (S + 1.0) ** (L / 2.0)) ** (gamma + 1.0)


def mc_false_alarm(spec: ChannelSpec, config: SchemeConfig, M: int, gamma: float, delta: float,
              trials: int, seed: int, conf: float = 0.99) -> MismatchStats:
    """Probability that an independent codeword scores above log M + delta
    against the EH-distorted output while |Q| < L gamma + 1.

    The score is summed over the transmission phase; the analytical value
    is ``false_alarm_bound``.
    """
    config.validate(spec)
    n, L, S = config.n, spec.L, config.power(spec)
    skip = config.m * L
    nb = _n_blocks(n, L)
    level = math.log(M) + delta
    qmax = L * gamma + 1

    def work(a, b):
        # per trial: block heads, X(1), noise, X(2)
        H, X1, Z, X2 = trial_draws(seed, a, b, [(spec.energy, nb), ("normal", n),
                                                ("normal", n), ("normal", n)])
        rs = math.sqrt(S)
        tx, mism = encode_batch(rs * X1, H, n, L, config.m)
        y = tx + Z
        score = info_density(rs * X2[:, skip:], y[:, skip:], S).sum(axis=1)
        hit = (score > level) & (mism.sum(axis=1) < qmax)
        return int(np.count_nonzero(hit))

    est = ConfidenceEstimate(trials, sum(map_trial_chunks(work, trials, CHUNK)), conf)
    rhs = false_alarm_bound(n, config.m, L, S, M, gamma, delta)
    params = {"n": n, "m": config.m, "L": L, "S": S, "M": M, "gamma": gamma, "delta": delta}
    return MismatchStats(est, rhs, f"score > log M + delta, |Q| < {qmax:g}", params)


def mc_shannon(n: int, S: float, M: int, delta: float, trials: int, seed: int,
               conf: float = 0.99) -> MismatchStats:
    """No-EH counterpart: an independent codeword scored against the true
    output of a power-S Gaussian input exceeds log M + delta with
    probability at most e^-delta / M."""
    level = math.log(M) + delta
    rs = math.sqrt(S)

    def work(a, b):
        X1, Z, X2 = trial_draws(seed, a, b, [("normal", n), ("normal", n), ("normal", n)])
        score = info_density(rs * X2, rs * X1 + Z, S).sum(axis=1)
        return int(np.count_nonzero(score > level))

    est = ConfidenceEstimate(trials, sum(map_trial_chunks(work, trials, CHUNK)), conf)
    params = {"n": n, "S": S, "M": M, "delta": delta}
    return MismatchStats(est, math.exp(-delta) / M, "score > log M + delta", params)
