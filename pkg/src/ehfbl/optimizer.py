"""Grid-then-golden-section search over (rho, m, eps1) for the largest
save-and-transmit log M bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import RHO_MAX, ChannelSpec, Infeasible, RateBound, SchemeConfig, theorem_log_M

__all__ = ["SearchSpec", "SearchResult", "optimize", "m_ladder"]

_INV_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def m_ladder(n: int, L: int, ratio: float = 1.5) -> list[int]:
    """{0} plus a geometric ladder of saving-block counts up to n / (2L)."""
    top = n // (2 * L)
    out = [0]
    v = 1.0
    while int(v) <= top:
        if int(v) != out[-1]:
            out.append(int(v))
        v *= ratio
    if top >= 1 and out[-1] != top:
        out.append(top)
    return out


@dataclass
class SearchSpec:
    """Candidate points. ``None`` entries fall back to the defaults: 64
    log-spaced rho values in (1e-4, 441/609), ``m_ladder`` and nine eps1
    fractions 0.1..0.9."""

    rho_values: Optional[Sequence[float]] = None
    m_values: Optional[Sequence[int]] = None
    eps1_fractions: Optional[Sequence[float]] = None
    refine: bool = True
    refine_iters: int = 40

    def rhos(self) -> np.ndarray:
        if self.rho_values is not None:
            r = np.asarray(self.rho_values, dtype=float)
        else:
            r = np.geomspace(1e-4, RHO_MAX * (1 - 1e-9), 64)
        if np.any(r <= 0) or np.any(r >= RHO_MAX):
            raise ValueError("rho values must lie in (0, 441/609)")
        return r

    def ms(self, n: int, L: int) -> list[int]:
        return list(self.m_values) if self.m_values is not None else m_ladder(n, L)

    def fractions(self) -> np.ndarray:
        f = np.asarray(self.eps1_fractions if self.eps1_fractions is not None
                       else np.linspace(0.1, 0.9, 9), dtype=float)
        if np.any(f <= 0) or np.any(f >= 1):
            raise ValueError("eps1 fractions must lie in (0, 1)")
        return f


@dataclass
class SearchResult:
    config: SchemeConfig
    bound: RateBound
    trace: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.config, self.bound, self.trace))


def _better(a, b) -> bool:
    """True if point ``a`` = (log_M, rho, m) beats ``b``; ties favor smaller rho then m."""
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    return (a[1], a[2]) < (b[1], b[2])


def optimize(spec: ChannelSpec, n: int, eps: float, search: Optional[SearchSpec] = None) -> SearchResult:
    """Maximize ``theorem_log_M`` with eps1 + eps2 = eps held fixed.

    Every evaluated point lands in ``trace`` as a dict (stage, rho, m,
    eps1, eps2, log_M or None).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    search = search or SearchSpec()
    trace = []
    best = None

    def evaluate(rho, m, frac, stage):
        e1 = float(eps * frac)
        cfg = SchemeConfig(n, int(m), float(rho), e1, eps - e1)
        rb = theorem_log_M(spec, cfg)
        trace.append({"stage": stage, "rho": float(rho), "m": int(m), "eps1": e1,
                      "eps2": eps - e1, "log_M": rb.log_M})
        return cfg, rb

    for m in search.ms(n, spec.L):
        for frac in search.fractions():
            for rho in search.rhos():
                cfg, rb = evaluate(rho, m, frac, "grid")
                if rb.feasible:
                    key = (rb.log_M, cfg.rho, cfg.m)
                    if _better(key, best and best[0]):
                        best = (key, cfg, rb, frac)
    if best is None:
        raise Infeasible("no grid point satisfies the theorem's feasibility condition")

    if search.refine:
        _, cfg0, _, frac = best
        rhos = search.rhos()
        i = int(np.searchsorted(rhos, cfg0.rho))
        lo = rhos[max(i - 1, 0)]
        hi = rhos[min(i + 1, len(rhos) - 1)]

        def f(r):
            cfg, rb = evaluate(r, cfg0.m, frac, "refine")
            return (rb.log_M if rb.feasible else -math.inf), cfg, rb

        a, b = lo, hi
        c = b - _INV_GOLD * (b - a)
        d = a + _INV_GOLD * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(search.refine_iters):
            for val in (fc, fd):
                if val[0] > -math.inf:
                    key = (val[0], val[1].rho, val[1].m)
                    if _better(key, best[0]):
                        best = (key, val[1], val[2], frac)
            if b - a < 1e-12 * max(1.0, b):
                break
            if fc[0] >= fd[0]:
                b, d, fd = d, c, fc
                c = b - _INV_GOLD * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INV_GOLD * (b - a)
                fd = f(d)
        for val in (fc, fd):
            if val[0] > -math.inf:
                key = (val[0], val[1].rho, val[1].m)
                if _better(key, best[0]):
                    best = (key, val[1], val[2], frac)

    _, cfg, rb, _ = best
    return SearchResult(cfg, rb, trace)
