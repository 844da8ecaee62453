"""Pool versus channel mode over a range of peer counts.

Prints one CSV row per peer count: on-chain transactions in each mode, their
ratio, and the stall time the channel viewer spends waiting for openings.
``peers_used`` can trail ``num_peers`` because rotation hands each peer
ceil(m / n) chunks, so fewer peers may cover the stream.
"""
import argparse
import csv
import sys

from micropool.sim import ScenarioConfig, compare_modes, load_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--base", help="scenario file to start from (default: built-in defaults)")
    ap.add_argument("--peers", type=int, nargs="+", default=[1, 2, 4, 6, 8, 10, 15, 20])
    ap.add_argument("--depth", type=int, help="override confirmation depth")
    args = ap.parse_args(argv)

    base = load_scenario(args.base) if args.base else ScenarioConfig()
    if args.depth is not None:
        base = base.with_overrides(confirmation_depth=args.depth)
    out = csv.writer(sys.stdout)
    out.writerow(["num_peers", "peers_used", "pool_txs", "channel_txs", "ratio", "channel_stall_ticks",
                  "channel_cold_switches", "pool_max_switch_latency"])
    for n in args.peers:
        # keep every peer busy: at least one chunk each, deposit covers the stream
        m = max(base.chunk_count, n)
        cfg = base.with_overrides(num_peers=n, chunk_count=m, deposit=max(base.deposit, m * base.chunk_value),
                                  collateral=max(base.collateral, m * base.chunk_value + 1))
        c = compare_modes(cfg)
        cold = sum(1 for e in c.channel.switch_events if e.cold)
        pool_lat = max((e.latency_blocks for e in c.pool.switch_events), default=0)
        used = sum(1 for v in c.pool.per_peer_earnings.values() if v > 0)
        out.writerow([n, used, c.pool.onchain_tx_count, c.channel.onchain_tx_count, str(c.tx_ratio),
                      c.channel.stalled_ticks, cold, pool_lat])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
