"""Creator outcome of the full-drain collusion attack across pool terms.

Sweeps deposit and collateral (collateral always above deposit) and reports the
creator's net value. Every row should be negative; the script exits 1 if any
row is not.
"""
import argparse
import csv
import sys

from micropool.sim import ScenarioConfig, collusion_attack_config, run_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--value", type=int, default=5, help="chunk value")
    ap.add_argument("--deposits", type=int, nargs="+", default=[25, 50, 100, 200])
    ap.add_argument("--excess", type=int, nargs="+", default=[1, 10, 50, 100],
                    help="collateral minus deposit")
    ap.add_argument("--peers", type=int, default=5)
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout)
    out.writerow(["deposit", "collateral", "pool_status", "creator_net_value", "coalition_net_value",
                  "burned"])
    bad = 0
    for d in args.deposits:
        for x in args.excess:
            base = ScenarioConfig(num_peers=args.peers, chunk_value=args.value, chunk_count=d // args.value,
                                  deposit=d, collateral=d + x)
            r = run_scenario(collusion_attack_config(base))
            bad += r.creator_net_value >= 0
            out.writerow([d, d + x, r.pool_status, r.creator_net_value, r.coalition_net_value,
                          r.burned_slashes])
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
