"""Off-chain pool protocol: payer bookkeeping, payment checks and the
pool-existence handshake.

HandshakePacket wire layout::

    0x02 || cptxHash(32) || header(80)
         || leafIndex(u64) || leafCount(u64) || nSiblings(u32) || siblings(32 each)
         || creatorKey(32) || resourceId(32) || deposit(u64) || collateral(u64)
         || duration(u64) || nonce(u64) || createHeight(u64)

The Merkle leaf for the pool is the CreatePool transaction hash, which is
recomputed from the terms carried in the packet. A peer therefore never has
to trust the payer's claims about deposit or collateral.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

from . import codec
from .crypto import DIGEST_SIZE, PUBKEY_SIZE, KeyPair, MerkleProof, merkle_verify, sha256, verify
from .errors import DepositExhausted
from .ledger import BlockHeader, Ledger
from .payment import ServicePayment
from .transactions import CreatePool, tx_body

TAG_HANDSHAKE = 0x02


class Verdict(Enum):
    ACCEPT = "accept"
    BAD_SIGNATURE = "BadSignature"
    WRONG_POOL = "WrongPool"
    WRONG_TARGET = "WrongTarget"
    WRONG_SEQUENCE = "WrongSequence"
    WRONG_AMOUNT = "WrongAmount"
    BAD_PROOF = "BadProof"
    RESOURCE_MISMATCH = "ResourceMismatch"
    DEPOSIT_TOO_SMALL = "DepositTooSmall"
    COLLATERAL_TOO_SMALL = "CollateralTooSmall"
    EXPIRED = "Expired"
    MALFORMED = "Malformed"

    @property
    def ok(self) -> bool:
        return self is Verdict.ACCEPT


# -- payer side -------------------------------------------------------------

@dataclass
class TargetBook:
    cumulative_amount: int = 0
    next_tgt_seq: int = 0


@dataclass
class PayerLedgerView:
    deposit: int
    per_target: dict[bytes, TargetBook] = field(default_factory=dict)
    total_promised: int = 0

    def book(self, target: bytes) -> TargetBook:
        return self.per_target.setdefault(target, TargetBook())

    def note_settlement(self, target: bytes) -> None:
        """The target announced it is publishing its latest payment on-chain."""
        self.book(target).next_tgt_seq += 1


def next_service_payment(view: PayerLedgerView, creator_keys: KeyPair, target: bytes,
                         cptx_hash: bytes, chunk_value: int, honest: bool = True) -> ServicePayment:
    if chunk_value <= 0:
        raise ValueError("chunk value must be positive")
    if honest and view.total_promised + chunk_value > view.deposit:
        raise DepositExhausted(f"promised {view.total_promised} + {chunk_value} > deposit {view.deposit}")
    book = view.book(target)
    sp = ServicePayment.signed(creator_keys, target, book.cumulative_amount + chunk_value,
                               cptx_hash, book.next_tgt_seq)
    book.cumulative_amount = sp.amount
    view.total_promised += chunk_value
    return sp


# -- payee side -------------------------------------------------------------

@dataclass
class PeerPaymentState:
    """What a payee expects from one payer's pool."""
    cptx_hash: bytes
    creator_key: bytes
    chunk_value: int
    own_address: bytes
    last_amount: int = 0
    expected_tgt_seq: int = 0


def verify_service_payment(sp: ServicePayment, creator_public_key: bytes, state: PeerPaymentState) -> Verdict:
    if not verify(creator_public_key, sp.signing_bytes(), sp.sigma):
        return Verdict.BAD_SIGNATURE
    if sp.cptx_hash != state.cptx_hash:
        return Verdict.WRONG_POOL
    if sp.target != state.own_address:
        return Verdict.WRONG_TARGET
    if sp.tgt_seq != state.expected_tgt_seq:
        return Verdict.WRONG_SEQUENCE
    if sp.amount != state.last_amount + state.chunk_value:
        return Verdict.WRONG_AMOUNT
    return Verdict.ACCEPT


# -- handshake --------------------------------------------------------------

@dataclass(frozen=True)
class PoolTerms:
    creator_key: bytes
    resource_id: bytes
    deposit: int
    collateral: int
    duration: int
    nonce: int
    create_height: int

    def create_pool_tx_hash(self) -> bytes:
        payload = CreatePool(self.resource_id, self.deposit, self.collateral, self.duration, self.nonce)
        return sha256(tx_body(payload, self.creator_key))

    def encode(self) -> bytes:
        return (self.creator_key + self.resource_id + codec.u64(self.deposit) + codec.u64(self.collateral)
                + codec.u64(self.duration) + codec.u64(self.nonce) + codec.u64(self.create_height))

    @classmethod
    def read(cls, r: codec.Reader) -> PoolTerms:
        return cls(r.take(PUBKEY_SIZE), r.take(DIGEST_SIZE), r.u64(), r.u64(), r.u64(), r.u64(), r.u64())


@dataclass(frozen=True)
class HandshakePacket:
    cptx_hash: bytes
    header: BlockHeader
    proof: MerkleProof
    terms: PoolTerms

    def encode(self) -> bytes:
        p = self.proof
        return (codec.u8(TAG_HANDSHAKE) + self.cptx_hash + self.header.encode()
                + codec.u64(p.leaf_index) + codec.u64(p.leaf_count) + codec.u32(len(p.siblings))
                + b"".join(p.siblings) + self.terms.encode())

    @classmethod
    def decode(cls, data: bytes) -> HandshakePacket:
        r = codec.Reader(data)
        if r.u8() != TAG_HANDSHAKE:
            raise codec.DecodeError("not a HandshakePacket")
        cptx = r.take(DIGEST_SIZE)
        header = BlockHeader.read(r)
        idx, count, nsib = r.u64(), r.u64(), r.u32()
        if nsib > 64:
            raise codec.DecodeError("implausible proof length")
        sibs = tuple(r.take(DIGEST_SIZE) for _ in range(nsib))
        terms = PoolTerms.read(r)
        r.done()
        return cls(cptx, header, MerkleProof(idx, sibs, count), terms)


class HeaderSource(Protocol):
    """Minimal light-client view a verifier needs."""

    @property
    def height(self) -> int: ...

    def header_at(self, height: int) -> Optional[BlockHeader]: ...


@dataclass(frozen=True)
class HandshakeExpectations:
    resource_id: bytes
    min_deposit: int
    min_collateral: int = 0


def build_handshake(ledger: Ledger, cptx_hash: bytes) -> HandshakePacket:
    header, proof = ledger.get_tx_inclusion(cptx_hash)
    pool = ledger.pool(cptx_hash)
    block = ledger.blocks[header.height]
    payload = block.txs[proof.leaf_index].payload
    terms = PoolTerms(pool.creator_key, pool.resource_id, payload.deposit, payload.collateral,
                      pool.duration, payload.nonce, pool.create_height)
    return HandshakePacket(cptx_hash, header, proof, terms)


def verify_handshake(packet: HandshakePacket, expect: HandshakeExpectations, chain: HeaderSource) -> Verdict:
    t = packet.terms
    trusted = chain.header_at(packet.header.height)
    if trusted is None or trusted != packet.header:
        return Verdict.BAD_PROOF
    if t.create_pool_tx_hash() != packet.cptx_hash or t.create_height != packet.header.height:
        return Verdict.BAD_PROOF
    if packet.proof.leaf_count != packet.header.tx_count:
        return Verdict.BAD_PROOF
    if not merkle_verify(packet.header.tx_root, packet.cptx_hash, packet.proof):
        return Verdict.BAD_PROOF
    if t.resource_id != expect.resource_id:
        return Verdict.RESOURCE_MISMATCH
    if t.deposit < expect.min_deposit:
        return Verdict.DEPOSIT_TOO_SMALL
    if t.collateral < expect.min_collateral:
        return Verdict.COLLATERAL_TOO_SMALL
    if chain.height >= t.create_height + t.duration:
        return Verdict.EXPIRED
    return Verdict.ACCEPT


def verify_handshake_bytes(data: bytes, expect: HandshakeExpectations, chain: HeaderSource) -> Verdict:
    try:
        packet = HandshakePacket.decode(data)
    except codec.DecodeError:
        return Verdict.MALFORMED
    return verify_handshake(packet, expect, chain)
