"""Metrics reports and their JSON / CSV renderings.

CSV layout is two columns with the fixed header ``metric,value``; nested
mappings are flattened with dotted keys and switch events are summarised as
counts and latency lists. Both renderings sort keys so identical runs give
byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

CSV_HEADER = ("metric", "value")


@dataclass
class SwitchEvent:
    tick: int
    from_peer: str
    to_peer: str
    latency_blocks: int
    stall_ticks: int
    onchain_txs: int
    cold: bool


@dataclass
class MetricsReport:
    mode: str
    num_peers: int
    random_seed: int
    onchain_tx_count: int = 0
    onchain_tx_by_type: dict[str, int] = field(default_factory=dict)
    rejected_tx_count: int = 0
    switch_events: list[SwitchEvent] = field(default_factory=list)
    creator_net_value: int = 0
    coalition_net_value: Optional[int] = None
    per_peer_earnings: dict[str, int] = field(default_factory=dict)
    slash_events: int = 0
    settlements: int = 0
    chunks_delivered: int = 0
    chunks_paid_undelivered: int = 0
    chunks_from_cdn: int = 0
    payments_issued: int = 0
    viewer_loss: int = 0
    blacklist: list[str] = field(default_factory=list)
    stalled_ticks: int = 0
    startup_ticks: int = 0
    ticks: int = 0
    final_height: int = 0
    pool_status: Optional[str] = None
    burned_fees: int = 0
    burned_slashes: int = 0
    conservation_checks: int = 0
    conservation_violations: int = 0
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def rows(self) -> list[tuple[str, Any]]:
        d = self.to_dict()
        events = d.pop("switch_events")
        d["switch_count"] = len(events)
        d["switch_latency_blocks"] = " ".join(str(e["latency_blocks"]) for e in events)
        d["blacklist"] = " ".join(d["blacklist"])
        return _flatten(d)

    def to_csv(self) -> str:
        return _csv(self.rows())


@dataclass
class ComparisonReport:
    pool: MetricsReport
    channel: MetricsReport

    @property
    def tx_ratio(self) -> Fraction:
        return Fraction(self.channel.onchain_tx_count, self.pool.onchain_tx_count)

    @property
    def pool_switch_latencies(self) -> list[int]:
        return [e.latency_blocks for e in self.pool.switch_events]

    @property
    def channel_switch_latencies(self) -> list[int]:
        return [e.latency_blocks for e in self.channel.switch_events]

    def to_dict(self) -> dict:
        r = self.tx_ratio
        return {
            "tx_ratio": f"{r.numerator}/{r.denominator}",
            "tx_ratio_float": round(float(r), 6),
            "pool_switch_latencies": self.pool_switch_latencies,
            "channel_switch_latencies": self.channel_switch_latencies,
            "pool": self.pool.to_dict(),
            "channel": self.channel.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        d = self.to_dict()
        rows = [("tx_ratio", d["tx_ratio"]), ("tx_ratio_float", d["tx_ratio_float"])]
        rows += [(f"pool.{k}", v) for k, v in self.pool.rows()]
        rows += [(f"channel.{k}", v) for k, v in self.channel.rows()]
        return _csv(rows)


def _flatten(d: dict, prefix: str = "") -> list[tuple[str, Any]]:
    out = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, dict):
            out += _flatten(v, f"{prefix}{k}.")
        else:
            out.append((f"{prefix}{k}", "" if v is None else v))
    return out


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def write_report(report: Union[MetricsReport, ComparisonReport], path: Union[str, Path], fmt: str = "json") -> None:
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        text = report.to_csv()
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    Path(path).write_text(text)
