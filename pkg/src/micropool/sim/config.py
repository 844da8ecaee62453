"""Scenario configuration and its flat ``key = value`` file format.

Example::

    # ten honest cachers, settle once each
    mode = pool
    num_peers = 10
    chunk_count = 20
    chunk_value = 5
    deposit = 100
    collateral = 150
    settlement_policy = at_expiry        # every_chunk | lazy:<threshold> | at_expiry
    churn_schedule = 40:0>1, 55:1>2      # tick:from>to, empty = rotate automatically
    adversaries = 1:withholding          # peer:behavior (withholding | colluding)

Unknown keys, duplicate keys and malformed values raise ``ParseError`` with the
offending line number. Semantic checks raise ``InvalidConfig``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from ..errors import MicropoolError
from ..nodes import AT_EXPIRY, Behavior, SettlementPolicy

MODES = ("pool", "channel", "semi_trust")
_MODE_ALIASES = {"semiTrust": "semi_trust", "semi-trust": "semi_trust"}


class InvalidConfig(MicropoolError):
    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {m}" for k, m in problems))


class ParseError(InvalidConfig):
    def __init__(self, message: str, line: Optional[int] = None, field_name: Optional[str] = None):
        self.line = line
        self.field = field_name
        where = f"line {line}" if line is not None else "config"
        if field_name:
            where += f" ({field_name})"
        super().__init__([(where, message)])


@dataclass(frozen=True)
class ChurnEvent:
    tick: int
    from_peer: Optional[int]
    to_peer: int

    def __str__(self) -> str:
        src = "*" if self.from_peer is None else str(self.from_peer)
        return f"{self.tick}:{src}>{self.to_peer}"


@dataclass
class ScenarioConfig:
    mode: str = "pool"
    num_peers: int = 10
    chunk_count: int = 20
    chunk_value: int = 5
    deposit: int = 100
    collateral: int = 150
    duration: int = 60
    settlement_gas_fee: int = 1
    confirmation_depth: int = 6
    block_interval: int = 10
    churn_schedule: list[ChurnEvent] = field(default_factory=list)
    adversaries: list[tuple[int, Behavior]] = field(default_factory=list)
    settlement_policy: SettlementPolicy = AT_EXPIRY
    random_seed: int = 0
    chunk_size: int = 64
    rotation: int = 0               # chunks per peer before auto-switch, 0 = ceil(m / honest peers)
    channel_capacity: int = 0       # 0 = chunk_value * rotation
    withdraw_at_expiry: bool = False
    live_top_up: bool = False
    peer_initial_balance: int = 10
    expiry_margin: int = 1          # blocks of slack before the time-lock for at-expiry settlements
    max_ticks: int = 200_000

    def behavior_of(self, peer: int) -> Behavior:
        for pid, b in self.adversaries:
            if pid == peer:
                return b
        return Behavior.HONEST

    @property
    def streaming_peers(self) -> list[int]:
        return [i for i in range(self.num_peers) if self.behavior_of(i) is not Behavior.COLLUDING]

    @property
    def effective_rotation(self) -> int:
        if self.rotation:
            return self.rotation
        return math.ceil(self.chunk_count / max(len(self.streaming_peers), 1))

    @property
    def effective_channel_capacity(self) -> int:
        return self.channel_capacity or self.chunk_value * self.effective_rotation

    @property
    def honest(self) -> bool:
        return not self.adversaries

    def validate(self) -> ScenarioConfig:
        problems = []

        def need(cond, name, msg):
            if not cond:
                problems.append((name, msg))

        need(self.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
        need(self.num_peers >= 1, "num_peers", "must be >= 1")
        need(self.chunk_count >= 1, "chunk_count", "must be >= 1")
        need(self.chunk_value >= 1, "chunk_value", "must be >= 1")
        need(self.deposit >= 1, "deposit", "must be >= 1")
        need(self.collateral > self.deposit, "collateral",
             "must exceed deposit; with collateral <= deposit a double spend can pay off")
        need(self.duration >= 1, "duration", "must be >= 1 block")
        need(self.settlement_gas_fee >= 0, "settlement_gas_fee", "must be >= 0")
        need(self.confirmation_depth >= 1, "confirmation_depth", "must be >= 1")
        need(self.block_interval >= 1, "block_interval", "must be >= 1 tick")
        need(self.chunk_size >= 1, "chunk_size", "must be >= 1")
        need(self.rotation >= 0, "rotation", "must be >= 0")
        need(self.channel_capacity >= 0, "channel_capacity", "must be >= 0")
        need(self.peer_initial_balance >= 0, "peer_initial_balance", "must be >= 0")
        need(self.expiry_margin >= 1, "expiry_margin", "must be >= 1 block")
        need(self.max_ticks >= 1, "max_ticks", "must be >= 1")
        for pid, _ in self.adversaries:
            need(0 <= pid < self.num_peers, "adversaries", f"peer {pid} out of range 0..{self.num_peers - 1}")
        for ev in self.churn_schedule:
            for p in (ev.from_peer, ev.to_peer):
                need(p is None or 0 <= p < self.num_peers, "churn_schedule", f"peer {p} out of range")
        if self.mode in MODES and self.mode != "semi_trust":
            need(bool(self.streaming_peers), "adversaries", "at least one non-colluding peer is required")
            if self.honest:
                need(self.deposit >= self.chunk_count * self.chunk_value, "deposit",
                     "honest scenarios need deposit >= chunk_count * chunk_value")
        if self.mode == "semi_trust":
            need(not self.adversaries, "adversaries", "not supported in semi_trust mode")
            need(self.deposit >= self.chunk_count * self.chunk_value, "deposit",
                 "must cover the resource value chunk_count * chunk_value")
            total = self.num_peers * self.chunk_count * self.chunk_value
            if not self.live_top_up:
                need(self.deposit >= total, "deposit",
                     f"must cover every receipt ({total}) unless live_top_up is enabled")
            else:
                need(self.settlement_policy.kind.value != "at_expiry", "settlement_policy",
                     "live_top_up needs intermediate settlements")
        if problems:
            raise InvalidConfig(problems)
        return self

    def with_overrides(self, **kw) -> ScenarioConfig:
        return replace(self, **kw)


# -- text format -------------------------------------------------------------

def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_int(v: str) -> int:
    return int(v.replace("_", ""))


def _parse_churn(v: str) -> list[ChurnEvent]:
    out = []
    for item in filter(None, (s.strip() for s in v.split(","))):
        tick, _, move = item.partition(":")
        src, sep, dst = move.partition(">")
        if not sep:
            raise ValueError(f"churn entry {item!r} must look like tick:from>to")
        out.append(ChurnEvent(int(tick), None if src.strip() == "*" else int(src), int(dst)))
    return out


def _parse_adversaries(v: str) -> list[tuple[int, Behavior]]:
    out = []
    for item in filter(None, (s.strip() for s in v.split(","))):
        pid, sep, beh = item.partition(":")
        if not sep:
            raise ValueError(f"adversary entry {item!r} must look like peer:behavior")
        out.append((int(pid), Behavior(beh.strip())))
    return out


def _parse_mode(v: str) -> str:
    return _MODE_ALIASES.get(v, v)


_PARSERS = {
    "mode": _parse_mode,
    "churn_schedule": _parse_churn,
    "adversaries": _parse_adversaries,
    "settlement_policy": SettlementPolicy.parse,
    "withdraw_at_expiry": _parse_bool,
    "live_top_up": _parse_bool,
}
_KEYS = [f.name for f in fields(ScenarioConfig)]


def parse_scenario(text: str) -> ScenarioConfig:
    values, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ParseError("expected 'key = value'", lineno)
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno, key)
        if key in seen:
            raise ParseError(f"duplicate key (first set on line {seen[key]})", lineno, key)
        seen[key] = lineno
        try:
            values[key] = _PARSERS.get(key, _parse_int)(val)
        except ValueError as e:
            raise ParseError(str(e), lineno, key) from None
    cfg = ScenarioConfig(**values)
    try:
        return cfg.validate()
    except InvalidConfig as e:
        name, msg = e.problems[0]
        raise ParseError(msg, seen.get(name), name) from None


def format_scenario(cfg: ScenarioConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "churn_schedule":
            v = ", ".join(str(e) for e in v)
        elif f.name == "adversaries":
            v = ", ".join(f"{p}:{b.value}" for p, b in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text())


def save_scenario(cfg: ScenarioConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(format_scenario(cfg))
