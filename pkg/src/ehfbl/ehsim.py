"""Energy arrivals, the save-and-transmit encoder and Monte Carlo estimates
of mismatch and escape probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .bounds import (ChannelSpec, EnergyDist, Infeasible, SchemeConfig,
                     escape_bound, mismatch_bound)
from .specmath import (ConfidenceEstimate, RandomStream, map_trial_chunks, uniform_rows,
                       verdict)

__all__ = [
    "EnergyTrace",
    "TraceOutcome",
    "EscapeProcess",
    "MismatchStats",
    "sample_energy_trace",
    "load_energy_trace",
    "encode_save_transmit",
    "trial_draws",
    "encode_batch",
    "mismatch_counts",
    "mc_mismatch",
    "mc_mismatch_grid",
    "escape_events",
    "mc_escape",
]

# trials per work unit; fixed so chunking never depends on the thread count
CHUNK = 1000


@dataclass
class EnergyTrace:
    """Per-slot harvested energy, constant within blocks of ``L`` slots."""

    values: np.ndarray
    L: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("energies must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def heads(self) -> np.ndarray:
        return self.values[::self.L]

    @classmethod
    def from_heads(cls, heads, n: int, L: int = 1) -> "EnergyTrace":
        heads = np.asarray(heads, dtype=float)
        nb = -(-n // L)
        if len(heads) < nb:
            raise ValueError(f"need {nb} block-head energies, got {len(heads)}")
        return cls(np.repeat(heads[:nb], L)[:n], L)


def _n_blocks(n: int, L: int) -> int:
    return -(-n // L)


def sample_energy_trace(dist: EnergyDist, n: int, L: int, stream: RandomStream) -> EnergyTrace:
    """Draw ceil(n/L) i.i.d. block heads and hold each for its block."""
    if n < 1 or L < 1:
        raise ValueError("need n >= 1 and L >= 1")
    heads = dist.sample(stream, _n_blocks(n, L))
    return EnergyTrace.from_heads(heads, n, L)


def load_energy_trace(path, n: int, L: int = 1) -> EnergyTrace:
    """Read block-head energies, one decimal number per line."""
    with open(path) as fh:
        vals = [float(line) for line in fh if line.strip()]
    return EnergyTrace.from_heads(vals, n, L)


@dataclass
class TraceOutcome:
    """Encoder output. ``mismatch_set`` holds 0-based slot indices."""

    transmitted: np.ndarray
    mismatch_set: np.ndarray
    battery: np.ndarray


def encode_save_transmit(codeword, trace: EnergyTrace, m: int, L: Optional[int] = None) -> TraceOutcome:
    """Blockwise save-and-transmit.

    Blocks ``0..m-1`` are silent. Every later block is sent whole when the
    battery at its first slot (arrivals up to and including that slot, minus
    everything spent so far) covers the block's energy; otherwise the block
    is silenced and all of its slots enter the mismatch set.
    """
    x = np.asarray(codeword, dtype=float)
    e = trace.values
    L = trace.L if L is None else int(L)
    n = len(x)
    if len(e) != n:
        raise ValueError("codeword and energy trace lengths differ")
    if m < 0 or m >= _n_blocks(n, L):
        raise ValueError("need 0 <= m < ceil(n/L): no transmission phase otherwise")
    out = np.zeros(n)
    mism = []
    arrived = 0.0
    spent = 0.0
    for start in range(0, n, L):
        stop = min(start + L, n)
        avail = arrived + e[start] - spent
        if start // L >= m:
            need = float(np.dot(x[start:stop], x[start:stop]))
            if need <= avail:
                out[start:stop] = x[start:stop]
                spent += need
            else:
                mism.extend(range(start, stop))
        arrived += float(e[start:stop].sum())
    battery = np.cumsum(e) - np.cumsum(out * out)
    return TraceOutcome(out, np.array(mism, dtype=np.int64), battery)


# --------------------------------------------------------------------------
# batched mismatch counting


def _block_sums(g: np.ndarray, L: int) -> np.ndarray:
    B, n = g.shape
    nb = _n_blocks(n, L)
    pad = nb * L - n
    if pad:
        g = np.concatenate([g, np.zeros((B, pad))], axis=1)
    return (g * g).reshape(B, nb, L).sum(axis=2)


def trial_draws(seed: int, start: int, stop: int, parts):
    """Per-trial random inputs for trials ``start..stop-1``.

    ``parts`` lists ``(kind, count)`` with kind an ``EnergyDist`` or
    ``"normal"`` / ``"uniform"``. Trial ``i`` consumes ``RandomStream(seed, i)`` in the
    listed order, so row ``r`` matches sampling part by part from that
    stream. Returns one (trials, count) array per part.
    """
    widths = []
    for kind, count in parts:
        per = 1 if isinstance(kind, str) else kind.uniforms_per_draw
        widths.append(per * count)
    U = uniform_rows(seed, range(start, stop), sum(widths))
    out = []
    col = 0
    for (kind, count), w in zip(parts, widths):
        u = U[:, col:col + w]
        col += w
        if isinstance(kind, str):
            if kind == "normal":
                out.append(special.ndtri(u))
            elif kind == "uniform":
                out.append(u)
            else:
                raise ValueError(f"unknown draw kind {kind!r}")
        else:
            out.append(kind.from_uniform(u) if w else kind.from_uniform(np.empty((stop - start, count))))
    return out


def _draw_trials(spec: ChannelSpec, n: int, start: int, stop: int, seed: int,
                 heads: Optional[np.ndarray]):
    """Per trial: block heads (unless replayed), then n standard normals."""
    if heads is None:
        return trial_draws(seed, start, stop, [(spec.energy, _n_blocks(n, spec.L)), ("normal", n)])
    (G,) = trial_draws(seed, start, stop, [("normal", n)])
    return np.broadcast_to(heads, (stop - start, len(heads))), G


def _count_mismatches(H, G2b, lens, ms, Ss) -> np.ndarray:
    """|Q| for each (m, S) plan and each trial; shape (plans, trials)."""
    ms = np.asarray(ms)[:, None]
    Ss = np.asarray(Ss, dtype=float)[:, None]
    C, B = len(ms), H.shape[0]
    arrived = np.zeros(B)
    spent = np.zeros((C, B))
    count = np.zeros((C, B), dtype=np.int64)
    for j in range(H.shape[1]):
        h = H[:, j]
        active = j >= ms
        if active.any():
            need = Ss * G2b[:, j]
            ok = need <= arrived + h - spent
            spent += np.where(active & ok, need, 0.0)
            count += np.where(active & ~ok, lens[j], 0)
        arrived += lens[j] * h
    return count


def encode_batch(X, H, n: int, L: int, m: int):
    """``encode_save_transmit`` over a batch: codewords ``X`` (B, n), block
    heads ``H`` (B, ceil(n/L)). Returns the sent symbols and a boolean
    mismatch mask, both (B, n)."""
    B = X.shape[0]
    nb = _n_blocks(n, L)
    need = _block_sums(X, L)
    lens = np.full(nb, L)
    lens[-1] = n - (nb - 1) * L
    # arrivals strictly before each block head
    before = np.concatenate([np.zeros((B, 1)), np.cumsum(H * lens, axis=1)[:, :-1]], axis=1)
    spent = np.zeros(B)
    sent = np.zeros((B, nb), dtype=bool)
    for j in range(m, nb):
        ok = need[:, j] <= before[:, j] + H[:, j] - spent
        spent += np.where(ok, need[:, j], 0.0)
        sent[:, j] = ok
    mask = np.repeat(sent, L, axis=1)[:, :n]
    mism = ~mask
    mism[:, :m * L] = False
    return np.where(mask, X, 0.0), mism


def mismatch_counts(spec: ChannelSpec, n: int, plans: Sequence[tuple], trials: int, seed: int,
                    trace: Optional[EnergyTrace] = None) -> np.ndarray:
    """Mismatch-set sizes for several ``(m, S)`` plans on shared draws.

    Trial ``i`` always uses ``RandomStream(seed, i)``, so the counts for a
    plan do not depend on which other plans ride along.
    """
    L = spec.L
    nb = _n_blocks(n, L)
    for m, S in plans:
        if m < 0 or m >= nb:
            raise Infeasible("need 0 <= m < ceil(n/L)")
        if S < 0:
            raise ValueError("S must be nonnegative")
    lens = np.full(nb, L)
    lens[-1] = n - (nb - 1) * L
    heads = None
    if trace is not None:
        if trace.n != n or trace.L != L:
            raise ValueError("replayed trace does not match (n, L)")
        heads = trace.heads
    ms = [p[0] for p in plans]
    Ss = [p[1] for p in plans]

    def work(a, b):
        H, G = _draw_trials(spec, n, a, b, seed, heads)
        return _count_mismatches(H, _block_sums(G, L), lens, ms, Ss)

    return np.concatenate(map_trial_chunks(work, trials, CHUNK), axis=1)


@dataclass
class MismatchStats:
    """MC estimate of an event probability next to its analytical bound."""

    estimate: ConfidenceEstimate
    bound: float
    event: str
    params: dict = field(default_factory=dict)
    # set when the event cannot occur at all, so its probability is exactly 0
    impossible: bool = False

    @property
    def verdict(self) -> str:
        if self.impossible and self.estimate.successes == 0:
            return "certified"
        return verdict(self.estimate, self.bound)

    def as_dict(self) -> dict:
        d = {"event": self.event, "bound": self.bound, "verdict": self.verdict,
             "impossible": self.impossible}
        d.update(self.estimate.as_dict())
        d["params"] = dict(self.params)
        return d


def _mismatch_stats(spec, config, gamma, sizes, conf):
    thresh = spec.L * gamma + 1
    hits = int(np.count_nonzero(sizes >= thresh))
    est = ConfidenceEstimate(len(sizes), hits, conf)
    params = {"n": config.n, "m": config.m, "rho": config.rho, "L": spec.L,
              "P": spec.P, "gamma": gamma}
    return MismatchStats(est, mismatch_bound(spec, config, gamma), f"|Q| >= {thresh:g}", params,
                         impossible=thresh > config.n_m(spec))


def mc_mismatch(spec: ChannelSpec, config: SchemeConfig, gamma: float, trials: int, seed: int,
                trace: Optional[EnergyTrace] = None, conf: float = 0.99) -> MismatchStats:
    """Estimate P{|Q| >= L gamma + 1} with a fresh codeword (and trace) per trial."""
    if trials < 1:
        raise ValueError("trials must be positive")
    config.validate(spec)
    sizes = mismatch_counts(spec, config.n, [(config.m, config.power(spec))], trials, seed, trace)[0]
    return _mismatch_stats(spec, config, gamma, sizes, conf)


def mc_mismatch_grid(spec: ChannelSpec, n: int, ms, rhos, gammas, trials: int, seed: int,
                     conf: float = 0.99) -> list[MismatchStats]:
    """``mc_mismatch`` over a grid, sharing the per-trial draws.

    Each entry equals the corresponding single ``mc_mismatch`` call with the
    same seed.
    """
    configs = [SchemeConfig(n, m, rho, 0.01, 0.01) for m in ms for rho in rhos]
    for c in configs:
        c.validate(spec)
    sizes = mismatch_counts(spec, n, [(c.m, c.power(spec)) for c in configs], trials, seed)
    out = []
    for c, row in zip(configs, sizes):
        for g in gammas:
            out.append(_mismatch_stats(spec, c, g, row, conf))
    return out


# --------------------------------------------------------------------------
# battery walk and escape probability


@dataclass(frozen=True)
class EscapeProcess:
    """Battery walk over energy blocks: ``m`` saving steps, then each step
    adds the block energy ``L E`` and removes the block's codeword energy.
    The walk is frozen once it goes negative."""

    m: int
    horizon: int

    def __post_init__(self):
        if self.m < 0 or self.horizon < 1:
            raise ValueError("need m >= 0 and horizon >= 1")

    def path(self, e_hat, x_hat2) -> np.ndarray:
        """B_1..B_horizon for one realization."""
        b = np.empty(self.horizon)
        cur = 0.0
        for k in range(self.horizon):
            if k < self.m:
                cur += e_hat[k]
            elif cur >= 0:
                cur += e_hat[k] - x_hat2[k]
            b[k] = cur
        return b

    def stopping_time(self, e_hat, x_hat2) -> Optional[int]:
        """First (1-based) step at which the walk is negative, if any."""
        neg = np.flatnonzero(self.path(e_hat, x_hat2) < 0)
        return int(neg[0]) + 1 if len(neg) else None


def escape_events(spec: ChannelSpec, S: float, ms: Sequence[int], horizon: int,
                  trials: int, seed: int) -> np.ndarray:
    """Indicator of {B_horizon < 0} per m and trial, shape (len(ms), trials).

    Trial ``i`` draws ``horizon`` energies then ``horizon * L`` normals from
    ``RandomStream(seed, i)``.
    """
    L = spec.L
    ms = [int(m) for m in ms]
    for m in ms:
        EscapeProcess(m, horizon)

    def work(a, b):
        E, g = trial_draws(seed, a, b, [(spec.energy, horizon), ("normal", horizon * L)])
        inc = L * E
        X2 = S * (g * g).reshape(b - a, horizon, L).sum(axis=2)
        out = np.zeros((len(ms), b - a), dtype=bool)
        for r, m in enumerate(ms):
            if m >= horizon:
                continue
            steps = inc.copy()
            steps[:, m:] -= X2[:, m:]
            # absorption makes B_horizon < 0 equivalent to a negative prefix sum
            out[r] = (np.cumsum(steps, axis=1)[:, m:] < 0).any(axis=1)
        return out

    return np.concatenate(map_trial_chunks(work, trials, CHUNK), axis=1)


def mc_escape(spec: ChannelSpec, config: SchemeConfig, trials: int, seed: int,
              horizon: Optional[int] = None, conf: float = 0.99) -> MismatchStats:
    """Estimate P{B_horizon < 0} against the Chernoff escape bound.

    The default horizon is ten times the number of transmission-phase blocks.
    Truncation can only shrink the event, so the bound still applies.
    """
    config.validate(spec)
    if horizon is None:
        horizon = 10 * _n_blocks(config.n_m(spec), spec.L)
    hits = escape_events(spec, config.power(spec), [config.m], horizon, trials, seed)[0]
    est = ConfidenceEstimate(trials, int(hits.sum()), conf)
    params = {"m": config.m, "rho": config.rho, "L": spec.L, "P": spec.P, "horizon": horizon}
    return MismatchStats(est, escape_bound(spec, config), "B_horizon < 0", params,
                         impossible=config.m >= horizon)
