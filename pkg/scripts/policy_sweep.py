"""Cacher earnings under different settlement policies.

A single cacher serves the whole stream; each row shows how many settlements
the policy produced and what the cacher kept after fees.
"""
import argparse
import csv
import sys

from micropool.nodes import SettlementPolicy
from micropool.sim import ScenarioConfig, run_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chunks", type=int, default=10)
    ap.add_argument("--value", type=int, default=5)
    ap.add_argument("--fee", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--policies", nargs="+",
                    default=["every_chunk", "lazy:10", "lazy:15", "lazy:25", "at_expiry"])
    args = ap.parse_args(argv)

    total = args.chunks * args.value
    out = csv.writer(sys.stdout)
    out.writerow(["fee", "policy", "settlements", "earnings", "unpaid"])
    for fee in args.fee:
        for p in args.policies:
            cfg = ScenarioConfig(num_peers=1, chunk_count=args.chunks, chunk_value=args.value,
                                 deposit=total, collateral=total + 10, settlement_gas_fee=fee,
                                 settlement_policy=SettlementPolicy.parse(p))
            r = run_scenario(cfg)
            n = r.onchain_tx_by_type.get("settlement", 0)
            earned = r.per_peer_earnings["peer0"]
            out.writerow([fee, p, n, earned, total - earned - n * fee])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
