"""Reference values for the test suite, computed without importing ehfbl.

High-precision quantities use mpmath at 50 digits; Monte Carlo references
use numpy's default PCG64 generator, which the package never touches.
Writes tests/data/oracles.json.
"""

import json
import math
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 50
OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"


def Phi(x):
    return mp.ncdf(x)


def Phi_inv(p):
    return -mp.sqrt(2) * mp.erfinv(1 - 2 * mp.mpf(p))


def cp_upper(k, n, conf):
    # upper Clopper-Pearson limit: solve I_p(k+1, n-k) = conf by bisection
    if k == n:
        return mp.mpf(1)
    lo, hi = mp.mpf(0), mp.mpf(1)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mp.betainc(k + 1, n - k, 0, mid, regularized=True) < conf:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def log_normal_pdf(y, mean, var):
    return -mp.log(2 * mp.pi * var) / 2 - (y - mean) ** 2 / (2 * var)


def info_density(x, y, S):
    x, y, S = mp.mpf(x), mp.mpf(y), mp.mpf(S)
    return log_normal_pdf(y, x, 1) - log_normal_pdf(y, 0, S + 1)


def chernoff_fixed_point(P, E2, L, S):
    P, E2, S = mp.mpf(P), mp.mpf(E2), mp.mpf(S)
    t = mp.mpf(0)
    for _ in range(500):
        t = 2 * (P - S) / (L * E2 + 3 * S * S * (1 + 63 * S * t))
    return t


def theorem_log_M(P, E2, L, n, m, rho, eps1, eps2):
    """Independent evaluation of the save-and-transmit log M bound,
    with T from the closed form 8 sigma^3 / pi."""
    P, E2, rho = mp.mpf(P), mp.mpf(E2), mp.mpf(rho)
    S = (1 - rho) * P
    nm = n - m * L
    alpha = 2 * rho * P / (L * E2 + 3 * S * S)
    beta = alpha / (1 + 63 * alpha * S)
    rate = L * P * beta + L * L * alpha * alpha * E2 / 2
    gamma = max(mp.log(1 / mp.mpf(eps2)) / rate - m, 0)
    mu = mp.log(1 + S) / 2
    s2 = S / (S + 1)
    T = 8 * s2 ** mp.mpf(1.5) / mp.pi
    arg = eps1 - T / (s2 ** mp.mpf(1.5) * mp.sqrt(nm)) - 4 / mp.sqrt(nm)
    val = (nm * mu + mp.sqrt(nm * s2) * Phi_inv(arg)
           - (L * (2 * S * mp.log(2) + mp.log(1 + S) / 2) + (8 * S + 1) * mp.log(nm)) * (gamma + 1)
           - mp.log(nm) / 2 - 1)
    return val, gamma, arg


def corollary_save(P, E2, L, n, eps1, eps2):
    P = mp.mpf(P)
    lg = mp.log(1 / mp.mpf(eps2))
    rho = mp.sqrt((P + 1) * (L * E2 + 3 * P * P) * mp.log(1 + P) * lg) / (P * mp.sqrt(2 * n * P))
    S = (1 - rho) * P
    alpha = 2 * rho * P / (L * E2 + 3 * S * S)
    beta = alpha / (1 + 63 * alpha * S)
    m = int(mp.ceil(lg / (L * P * beta + L * L * alpha * alpha * E2 / 2)))
    r = (mp.log(1 + P) / 2 - mp.sqrt((L * E2 + 3 * P * P) * mp.log(1 + P) * lg / (2 * n * P * (P + 1)))
         + mp.sqrt(P / ((P + 1) * n)) * Phi_inv(eps1))
    return rho, m, r


def mc_third_moment(S, samples, seed):
    rng = np.random.default_rng(seed)
    out = []
    left = samples
    while left:
        k = min(left, 1_000_000)
        x = rng.standard_normal(k) * math.sqrt(S)
        z = rng.standard_normal(k)
        y = x + z
        i = 0.5 * math.log1p(S) + y * y / (2 * (S + 1)) - z * z / 2
        out.append(np.abs(i - 0.5 * math.log1p(S)) ** 3)
        left -= k
    v = np.concatenate(out)
    return float(v.mean()), float(v.std() / math.sqrt(len(v)))


def main():
    o = {}
    o["phi_1.959964"] = float(Phi(mp.mpf("1.959964")))
    o["phi_-8"] = float(Phi(-8))
    o["inv_phi_0.975"] = float(Phi_inv("0.975"))
    o["inv_phi_0.01"] = float(Phi_inv("0.01"))
    o["abs_moment_3"] = float(2 * mp.sqrt(2 / mp.pi))
    o["cp_upper_0_100"] = float(1 - mp.mpf("0.01") ** (mp.mpf(1) / 100))
    o["cp_upper_50_100"] = float(cp_upper(50, 100, mp.mpf("0.99")))
    o["cp_upper_0_1e5"] = float(1 - mp.mpf("0.01") ** (mp.mpf(1) / 100000))
    o["capacity_1"] = float(mp.log(2) / 2)
    o["capacity_25db"] = float(mp.log(1 + mp.mpf(10) ** mp.mpf("2.5")) / 2)
    o["info_density_0_0_1"] = float(info_density(0, 0, 1))
    o["info_density_1_1_1"] = float(info_density(1, 1, 1))
    o["info_density_0.3_-1.2_2.5"] = float(info_density("0.3", "-1.2", "2.5"))

    # third absolute central moment: closed form 8 sigma^3 / pi and MC
    o["T_closed"] = {}
    o["T_mc"] = {}
    for k, S in enumerate([0.25, 1.0, 10.0, 316.2278]):
        s2 = mp.mpf(S) / (S + 1)
        o["T_closed"][repr(S)] = float(8 * s2 ** mp.mpf(1.5) / mp.pi)
    mean, se = mc_third_moment(1.0, 10_000_000, 20240601)
    o["T_mc"]["1.0"] = {"mean": mean, "se": se, "samples": 10_000_000}

    # scheme constants at (P=1, E2=3, L=1, rho=0.1)
    a = mp.mpf("0.2") / mp.mpf("5.43")
    b = a / (1 + 63 * a * mp.mpf("0.9"))
    o["alpha_p1_rho0.1"] = float(a)
    o["beta_p1_rho0.1"] = float(b)
    o["t_p1_s0.9"] = float(chernoff_fixed_point(1, 3, 1, "0.9"))
    o["mismatch_m100_p1_rho0.1"] = float(mp.exp(-100 * (b + a * a * 3 / 2)))
    o["gamma_m0_p1_rho0.1_eps0.01"] = float(mp.log(100) / (b + 3 * a * a / 2))
    o["save_second_term_p1_n1e6"] = float(mp.sqrt(6 * mp.log(2) * mp.log(100) / (4 * 10 ** 6)))
    o["lambda1_p1"] = float(2 * mp.log(2) + mp.log(2) / 2)
    o["noneh_p1_eps0.02_n1e4"] = float(mp.log(2) / 2 + mp.sqrt(mp.mpf(3) / 8) * Phi_inv("0.02") / 100)
    o["false_alarm_n8_M4_d4"] = float(2 * mp.exp(-4) / 4 * 8 * mp.sqrt(2))
    o["shannon_n8_m4_d2"] = float(mp.exp(-2) / 4)
    o["slot1_mismatch_p1_s0.5"] = float(2 * Phi(-mp.sqrt(2)))

    # corollary point and theorem bound at 0 dB, n = 1e6, eps1 = eps2 = 0.01
    rho, m, r = corollary_save(1, 3, 1, 10 ** 6, "0.01", "0.01")
    lm, gam, arg = theorem_log_M(1, 3, 1, 10 ** 6, m, rho, mp.mpf("0.01"), mp.mpf("0.01"))
    o["corollary_save_0db_1e6"] = {"rho": float(rho), "m": m, "rate": float(r),
                                   "theorem_log_M": float(lm), "gamma": float(gam)}
    # a block-arrival theorem point
    lm, gam, arg = theorem_log_M(10, 300, 4, 200000, 100, "0.1", mp.mpf("0.02"), mp.mpf("0.01"))
    o["theorem_p10_L4_n2e5_m100_rho0.1"] = {"log_M": float(lm), "gamma": float(gam),
                                            "berry_esseen_arg": float(arg)}
    # baselines at 25 dB, n = 1e6
    P = mp.mpf(10) ** mp.mpf("2.5")
    E2 = 3 * P * P
    c = mp.log(1 + P) / 2
    n = 10 ** 6
    o["fto17_iid_25db_1e6"] = float(
        c + (-(mp.log(1 + P) / (2 * P)) * mp.sqrt((E2 + P * P) * mp.log(100))
             + mp.sqrt(P / (P + 1)) * Phi_inv("0.01")) / mp.sqrt(n))
    o["fto17_block_25db_1e6_L1000"] = float(
        c - (mp.log(1 + P) / (2 * P)) * mp.sqrt((E2 + P * P) * mp.log(100)) * mp.sqrt(mp.mpf(1000) / n))
    # asymptotic curves at P = 1, eps = 0.01, L/n = 1e-4
    sv = mp.log(2) / 2 - mp.sqrt(3 * mp.log(2) * mp.log(100) / 4) * mp.mpf("0.01")
    lam1 = 2 * mp.log(2) + mp.log(2) / 2
    be = mp.log(2) / 2 - mp.sqrt(lam1 * 3 * mp.log(100) / 2) * mp.mpf("0.01")
    o["asymptotic_p1_eps0.01_ratio1e-4"] = [float(sv), float(be)]

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(o, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
