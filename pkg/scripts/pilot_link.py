"""Pilot run that fixes the acceptance threshold for the tiny end-to-end link.

Setting: M = 2, n = 64, P = 10 with constant energy arrivals, rho = 0.2,
m = 8, threshold log xi = n_m mu / 2. The threshold stored for the test is
the pilot's one-sided 99% Clopper-Pearson upper limit. The acceptance run
uses a different seed.
"""

import argparse
import json
from pathlib import Path

from ehfbl.bounds import ChannelSpec, Constant, SchemeConfig, moments
from ehfbl.linksim import mc_link_error

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "link_pilot.json"
PILOT_SEED = 20240917


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=PILOT_SEED)
    ap.add_argument("--out", default=str(OUT))
    args = ap.parse_args()

    spec = ChannelSpec(10.0, Constant(10.0))
    config = SchemeConfig(64, 8, 0.2, 0.01, 0.01)
    log_xi = config.n_m(spec) * moments(config.power(spec)).mu / 2
    est = mc_link_error(spec, config, 2, args.trials, args.seed, log_xi=log_xi)
    record = {
        "setting": {"M": 2, "n": 64, "P": 10.0, "energy": "constant", "rho": 0.2, "m": 8,
                    "log_xi": log_xi},
        "seed": args.seed,
        "estimate": est.as_dict(),
        "threshold": est.upper,
    }
    Path(args.out).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    print(json.dumps(record, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
