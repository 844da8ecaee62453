"""Viewer (payer) and cacher (payee) agents plus the adversarial variants.

Exchange order is payment first: the viewer signs a ServicePayment, the
cacher checks it and then returns the chunk. A cacher that takes the payment
and returns nothing or garbage is blacklisted on the first offence, so the
viewer loses at most one chunk payment per bad peer.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Union

from . import codec
from .crypto import DIGEST_SIZE, KeyPair, sha256
from .errors import Blacklisted, NotHandshaked, ProtocolError
from .ledger import Ledger
from .payment import ServicePayment
from .protocol import (
    HandshakeExpectations,
    HandshakePacket,
    PayerLedgerView,
    PeerPaymentState,
    TargetBook,
    Verdict,
    build_handshake,
    next_service_payment,
    verify_handshake,
    verify_service_payment,
)
from .transactions import OnChainTx, Settlement, Transfer


# -- resource manifest -------------------------------------------------------

@dataclass(frozen=True)
class ChunkManifest:
    resource_id: bytes
    chunk_hashes: tuple[bytes, ...]
    chunk_value: int

    def __post_init__(self):
        if self.resource_id != self.compute_resource_id(self.chunk_hashes, self.chunk_value):
            raise ValueError("resource id does not match chunk hashes and chunk value")

    @staticmethod
    def compute_resource_id(chunk_hashes, chunk_value: int) -> bytes:
        return sha256(b"".join(chunk_hashes) + codec.u64(chunk_value))

    @classmethod
    def from_chunks(cls, chunks: list[bytes], chunk_value: int) -> ChunkManifest:
        hashes = tuple(sha256(c) for c in chunks)
        return cls(cls.compute_resource_id(hashes, chunk_value), hashes, chunk_value)

    def __len__(self) -> int:
        return len(self.chunk_hashes)

    @property
    def total_value(self) -> int:
        return self.chunk_value * len(self.chunk_hashes)

    def to_text(self) -> str:
        lines = [f"{self.resource_id.hex()} {self.chunk_value} {len(self.chunk_hashes)}"]
        lines += [h.hex() for h in self.chunk_hashes]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ChunkManifest:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty manifest")
        head = lines[0].split()
        if len(head) != 3:
            raise ValueError("manifest header must be: <resourceId hex> <chunk value> <chunk count>")
        rid, value, count = bytes.fromhex(head[0]), int(head[1]), int(head[2])
        hashes = tuple(bytes.fromhex(h) for h in lines[1:])
        if len(hashes) != count or any(len(h) != DIGEST_SIZE for h in hashes):
            raise ValueError(f"manifest declares {count} chunk hashes, found {len(hashes)}")
        return cls(rid, hashes, value)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> ChunkManifest:
        return cls.from_text(Path(path).read_text())


def make_chunks(seed: int, count: int, size: int) -> list[bytes]:
    rng = random.Random(seed)
    return [rng.randbytes(size) for _ in range(count)]


def verify_chunk(manifest: ChunkManifest, index: int, data: bytes) -> bool:
    if not 0 <= index < len(manifest):
        raise IndexError(f"chunk index {index} out of range")
    return sha256(data) == manifest.chunk_hashes[index]


# -- settlement policy ---------------------------------------------------------

class PolicyKind(Enum):
    EVERY_CHUNK = "every_chunk"
    LAZY = "lazy"
    AT_EXPIRY = "at_expiry"


@dataclass(frozen=True)
class SettlementPolicy:
    kind: PolicyKind = PolicyKind.AT_EXPIRY
    threshold: int = 0

    @classmethod
    def parse(cls, text: str) -> SettlementPolicy:
        name, _, arg = text.strip().partition(":")
        kind = PolicyKind(name)
        if kind is PolicyKind.LAZY:
            if not arg:
                raise ValueError("lazy policy needs a threshold, e.g. lazy:25")
            threshold = int(arg)
            if threshold <= 0:
                raise ValueError("lazy threshold must be positive")
            return cls(kind, threshold)
        if arg:
            raise ValueError(f"policy {name} takes no argument")
        return cls(kind)

    def __str__(self) -> str:
        return f"lazy:{self.threshold}" if self.kind is PolicyKind.LAZY else self.kind.value

    def due(self, unsettled: int, fee: int, expiring: bool) -> bool:
        if unsettled <= fee:
            return False
        if self.kind is PolicyKind.EVERY_CHUNK:
            return True
        if self.kind is PolicyKind.LAZY:
            return unsettled >= self.threshold or expiring
        return expiring


EVERY_CHUNK = SettlementPolicy(PolicyKind.EVERY_CHUNK)
AT_EXPIRY = SettlementPolicy(PolicyKind.AT_EXPIRY)


def settlement_schedule(amounts: list[int], policy: SettlementPolicy, fee: int) -> list[int]:
    """Indices into a cumulative payment stream at which a cacher settles.

    The last index is treated as the pre-expiry flush point.
    """
    out, settled = [], 0
    for i, amount in enumerate(amounts):
        if policy.due(amount - settled, fee, expiring=(i == len(amounts) - 1)):
            out.append(i)
            settled = amount
    return out


# -- agents --------------------------------------------------------------------

class Behavior(Enum):
    HONEST = "honest"
    WITHHOLDING = "withholding"
    COLLUDING = "colluding"


class CacherNode:
    def __init__(self, name: str, keys: KeyPair, inventory: dict[int, bytes],
                 behavior: Behavior = Behavior.HONEST, policy: SettlementPolicy = AT_EXPIRY):
        self.name = name
        self.keys = keys
        self.inventory = inventory
        self.behavior = behavior
        self.policy = policy
        self.peer_state: dict[bytes, PeerPaymentState] = {}
        self.received_payments: list[ServicePayment] = []
        self.latest: dict[bytes, ServicePayment] = {}
        self.submitted_amount: dict[bytes, int] = {}
        self.settlements_submitted = 0

    @property
    def address(self) -> bytes:
        return self.keys.address

    def __repr__(self) -> str:
        return f"CacherNode({self.name}, {self.behavior.value})"

    def has_chunk(self, index: int) -> bool:
        return index in self.inventory

    def accept_handshake(self, packet: HandshakePacket, chain, expect: HandshakeExpectations,
                         chunk_value: int) -> Verdict:
        verdict = verify_handshake(packet, expect, chain)
        if verdict.ok and packet.cptx_hash not in self.peer_state:
            self.peer_state[packet.cptx_hash] = PeerPaymentState(
                packet.cptx_hash, packet.terms.creator_key, chunk_value, self.address)
        return verdict

    def receive_payment(self, sp: ServicePayment) -> Verdict:
        state = self.peer_state.get(sp.cptx_hash)
        if state is None:
            return Verdict.WRONG_POOL
        verdict = verify_service_payment(sp, state.creator_key, state)
        if verdict.ok:
            state.last_amount = sp.amount
            self.latest[sp.cptx_hash] = sp
            self.received_payments.append(sp)
        return verdict

    def serve(self, index: int) -> Optional[bytes]:
        if self.behavior is Behavior.WITHHOLDING:
            return None
        return self.inventory.get(index)

    def unsettled(self, cptx_hash: bytes) -> int:
        sp = self.latest.get(cptx_hash)
        return 0 if sp is None else sp.amount - self.submitted_amount.get(cptx_hash, 0)

    def settlement_due(self, cptx_hash: bytes, fee: int, expiring: bool) -> bool:
        return self.policy.due(self.unsettled(cptx_hash), fee, expiring)

    def take_settlement(self, cptx_hash: bytes) -> OnChainTx:
        """Build the Settlement tx for the latest payment and advance tgtSeq.

        The caller must also notify the payer (``PayerLedgerView.note_settlement``)
        so that later payments carry the next sequence number.
        """
        sp = self.latest[cptx_hash]
        self.submitted_amount[cptx_hash] = sp.amount
        self.peer_state[cptx_hash].expected_tgt_seq += 1
        self.settlements_submitted += 1
        return OnChainTx.signed(self.keys, Settlement(sp))


class ViewerNode:
    def __init__(self, keys: KeyPair, manifest: ChunkManifest, deposit: int, honest: bool = True):
        self.keys = keys
        self.manifest = manifest
        self.view = PayerLedgerView(deposit)
        self.honest = honest
        self.pool_key: Optional[bytes] = None
        self.peers: list[str] = []
        self.blacklist: set[str] = set()
        self.handshaked: set[str] = set()
        self.received: dict[int, bytes] = {}
        self.cursor = 0
        self.current: Optional[str] = None
        self.paid_undelivered = 0
        self.undelivered_loss = 0
        self.from_cdn = 0

    @property
    def address(self) -> bytes:
        return self.keys.address

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.manifest)

    def handshake_expectations(self) -> HandshakeExpectations:
        total = self.manifest.total_value
        return HandshakeExpectations(self.manifest.resource_id, total, total + 1)

    def store(self, index: int, data: bytes) -> None:
        self.received[index] = data
        while self.cursor in self.received:
            self.cursor += 1

    def usable_peers(self) -> list[str]:
        return [p for p in self.peers if p not in self.blacklist]

    def next_peer(self, after: Optional[str], index: int, cachers: dict[str, CacherNode],
                  eligible: Optional[Callable[[str], bool]] = None) -> Optional[str]:
        """Next non-blacklisted peer in ring order (after ``after``) that holds ``index``."""
        ring = self.peers
        start = ring.index(after) + 1 if after in ring else 0
        for k in range(len(ring)):
            p = ring[(start + k) % len(ring)]
            if p not in self.blacklist and cachers[p].has_chunk(index) and (eligible is None or eligible(p)):
                return p
        return None


class ExchangeOutcome(Enum):
    DELIVERED = "delivered"
    PAID_UNDELIVERED = "paid_undelivered"
    PAYMENT_REJECTED = "payment_rejected"


def request_chunk(viewer: ViewerNode, cacher: CacherNode, index: int) -> ExchangeOutcome:
    if cacher.name in viewer.blacklist:
        raise Blacklisted(cacher.name)
    if cacher.name not in viewer.handshaked:
        raise NotHandshaked(cacher.name)
    if index in viewer.received:
        raise ProtocolError(f"chunk {index} already received")
    book = viewer.view.book(cacher.address)
    saved = (TargetBook(book.cumulative_amount, book.next_tgt_seq), viewer.view.total_promised)
    sp = next_service_payment(viewer.view, viewer.keys, cacher.address, viewer.pool_key,
                              viewer.manifest.chunk_value, honest=viewer.honest)
    if not cacher.receive_payment(sp).ok:
        viewer.view.per_target[cacher.address], viewer.view.total_promised = saved
        return ExchangeOutcome.PAYMENT_REJECTED
    data = cacher.serve(index)
    if data is not None and verify_chunk(viewer.manifest, index, data):
        viewer.store(index, data)
        return ExchangeOutcome.DELIVERED
    viewer.paid_undelivered += 1
    viewer.undelivered_loss += viewer.manifest.chunk_value
    return ExchangeOutcome.PAID_UNDELIVERED


def on_undelivered(viewer: ViewerNode, peer_id: str) -> ViewerNode:
    viewer.blacklist.add(peer_id)
    viewer.handshaked.discard(peer_id)
    if viewer.current == peer_id:
        viewer.current = None
    return viewer


def switch_peer(viewer: ViewerNode, from_peer: Optional[str], to_peer: CacherNode,
                ledger: Ledger) -> HandshakePacket:
    """Move to ``to_peer`` with an off-chain handshake only."""
    if to_peer.name in viewer.blacklist:
        raise Blacklisted(to_peer.name)
    packet = build_handshake(ledger, viewer.pool_key)
    verdict = to_peer.accept_handshake(packet, ledger, viewer.handshake_expectations(),
                                       viewer.manifest.chunk_value)
    if not verdict.ok:
        raise ProtocolError(f"{to_peer.name} rejected handshake: {verdict.value}")
    viewer.handshaked.add(to_peer.name)
    viewer.current = to_peer.name
    return packet


def fetch_from_cdn(viewer: ViewerNode, index: int, chunks: list[bytes]) -> None:
    viewer.store(index, chunks[index])
    viewer.from_cdn += 1


@dataclass
class DrainAttack:
    payment: ServicePayment
    settlement_tx: bytes
    kickback_tx: bytes
    kickback: int


def collude_full_drain(viewer: ViewerNode, colluder: CacherNode, ledger: Ledger, nonce: int = 0) -> DrainAttack:
    """Creator-colluder drain: sign the whole remaining deposit to a colluder
    who settles it first and hands the tokens back.

    Both transactions go into the mempool in this order, so the drain lands
    before any honest settlement submitted afterwards. The colluder returns
    the full amount and pays the settlement fee out of pocket.
    """
    pool = ledger.pool(viewer.pool_key)
    sp = next_service_payment(viewer.view, viewer.keys, colluder.address, pool.key,
                              pool.remaining_deposit, honest=False)
    colluder.latest[pool.key] = sp
    colluder.received_payments.append(sp)
    colluder.submitted_amount[pool.key] = sp.amount
    colluder.settlements_submitted += 1
    viewer.view.note_settlement(colluder.address)
    stx = ledger.submit(OnChainTx.signed(colluder.keys, Settlement(sp)))
    ktx = ledger.submit(OnChainTx.signed(colluder.keys, Transfer(viewer.address, sp.amount, nonce)))
    return DrainAttack(sp, stx, ktx, sp.amount)
