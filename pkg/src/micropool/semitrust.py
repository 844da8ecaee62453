"""Platform-funded pool with a Tracker and a Payment Service.

The platform funds the pool; a Tracker certifies which (sharer, receiver)
pairs may trade; viewers sign cumulative ServiceReceipts for what they
received; the Payment Service checks receipts against certificates and hands
the sharer an AccumulatedPayment it can settle on-chain through the normal
pool machinery. The AccumulatedPayment is signed over the same 68-byte layout
as a ServicePayment, with the platform as pool creator.

Wire layouts (tag byte first)::

    AuthCertificate    0x04 || sharer(20) || receiver(20) || validFrom(u64) || validUntil(u64) || sig(64)
    ServiceReceipt     0x03 || signerKey(32) || beneficiary(20) || resourceId(32)
                            || cumulativeAmount(u64) || receiptSeq(u64) || sig(64)
    AccumulatedPayment 0x05 || target(20) || transferAmount(u64) || createPoolTxHash(32)
                            || targetSettlementSequence(u64) || sig(64)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Optional

from . import codec
from .codec import U64_MAX
from .crypto import ADDRESS_SIZE, DIGEST_SIZE, PUBKEY_SIZE, SIGNATURE_SIZE, KeyPair, address_of, verify
from .errors import (
    BadReceiptSignature,
    CertExpired,
    DepositTooSmall,
    NonMonotoneAmount,
    ReceiptRejected,
    StaleReceipt,
    TooFewPeers,
    UnauthorizedPair,
)
from .ledger import Ledger, PoolState, PoolStatus
from .payment import ServicePayment, serialize_for_signing
from .protocol import HandshakePacket, build_handshake
from .transactions import CreatePool, OnChainTx, Settlement, TopUpPool

TAG_RECEIPT = 0x03
TAG_CERT = 0x04
TAG_ACCUMULATED = 0x05


@dataclass(frozen=True)
class AuthCertificate:
    sharer: bytes
    receiver: bytes
    valid_from: int
    valid_until: int
    tracker_sig: bytes

    @staticmethod
    def signing_bytes_for(sharer: bytes, receiver: bytes, valid_from: int, valid_until: int) -> bytes:
        return codec.u8(TAG_CERT) + sharer + receiver + codec.u64(valid_from) + codec.u64(valid_until)

    def signing_bytes(self) -> bytes:
        return self.signing_bytes_for(self.sharer, self.receiver, self.valid_from, self.valid_until)

    def encode(self) -> bytes:
        return self.signing_bytes() + self.tracker_sig

    @classmethod
    def decode(cls, data: bytes) -> AuthCertificate:
        r = codec.Reader(data)
        if r.u8() != TAG_CERT:
            raise codec.DecodeError("not an AuthCertificate")
        cert = cls(r.take(ADDRESS_SIZE), r.take(ADDRESS_SIZE), r.u64(), r.u64(), r.take(SIGNATURE_SIZE))
        r.done()
        return cert

    def verify(self, tracker_public_key: bytes) -> bool:
        return verify(tracker_public_key, self.signing_bytes(), self.tracker_sig)


class Tracker:
    def __init__(self, keys: KeyPair):
        self.keys = keys

    @property
    def public_key(self) -> bytes:
        return self.keys.public_key

    def certify(self, sharer: bytes, receiver: bytes, valid_from: int = 0,
                valid_until: int = U64_MAX) -> AuthCertificate:
        sig = self.keys.sign(AuthCertificate.signing_bytes_for(sharer, receiver, valid_from, valid_until))
        return AuthCertificate(sharer, receiver, valid_from, valid_until, sig)

    def group_peers(self, peers: list[bytes], sharers: Optional[Iterable[bytes]] = None,
                    valid_from: int = 0, valid_until: int = U64_MAX) -> list[AuthCertificate]:
        """Certificates for every ordered (sharer, receiver) pair in the group."""
        if len(set(peers)) < 2:
            raise TooFewPeers("a group needs at least two peers")
        allowed = set(peers) if sharers is None else set(sharers)
        return [self.certify(s, r, valid_from, valid_until)
                for s, r in permutations(peers, 2) if s in allowed]


def tracker_group_peers(tracker: Tracker, peers: list[bytes], **kw) -> list[AuthCertificate]:
    return tracker.group_peers(peers, **kw)


@dataclass(frozen=True)
class ServiceReceipt:
    signer_key: bytes
    beneficiary: bytes
    resource_id: bytes
    cumulative_amount: int
    receipt_seq: int
    signature: bytes

    @property
    def signer(self) -> bytes:
        return address_of(self.signer_key)

    @staticmethod
    def signing_bytes_for(signer_key, beneficiary, resource_id, amount, seq) -> bytes:
        return (codec.u8(TAG_RECEIPT) + signer_key + beneficiary + resource_id
                + codec.u64(amount) + codec.u64(seq))

    def signing_bytes(self) -> bytes:
        return self.signing_bytes_for(self.signer_key, self.beneficiary, self.resource_id,
                                      self.cumulative_amount, self.receipt_seq)

    def encode(self) -> bytes:
        return self.signing_bytes() + self.signature

    @classmethod
    def decode(cls, data: bytes) -> ServiceReceipt:
        r = codec.Reader(data)
        if r.u8() != TAG_RECEIPT:
            raise codec.DecodeError("not a ServiceReceipt")
        rc = cls(r.take(PUBKEY_SIZE), r.take(ADDRESS_SIZE), r.take(DIGEST_SIZE), r.u64(), r.u64(),
                 r.take(SIGNATURE_SIZE))
        r.done()
        return rc


@dataclass
class ReceiptWallet:
    """Viewer-side signer that keeps its own running counter per beneficiary."""
    keys: KeyPair
    issued: dict[bytes, tuple[int, int]] = field(default_factory=dict)

    def next_receipt(self, beneficiary: bytes, resource_id: bytes, increment: int) -> ServiceReceipt:
        amount, seq = self.issued.get(beneficiary, (0, -1))
        return sign_service_receipt(self, beneficiary, resource_id, amount + increment, seq + 1)


def sign_service_receipt(viewer: ReceiptWallet, beneficiary: bytes, resource_id: bytes,
                         new_cumulative_amount: int, receipt_seq: int) -> ServiceReceipt:
    prev_amount, _ = viewer.issued.get(beneficiary, (0, -1))
    if new_cumulative_amount <= prev_amount:
        raise NonMonotoneAmount(f"{new_cumulative_amount} <= previous {prev_amount}")
    msg = ServiceReceipt.signing_bytes_for(viewer.keys.public_key, beneficiary, resource_id,
                                           new_cumulative_amount, receipt_seq)
    viewer.issued[beneficiary] = (new_cumulative_amount, receipt_seq)
    return ServiceReceipt(viewer.keys.public_key, beneficiary, resource_id, new_cumulative_amount,
                          receipt_seq, viewer.keys.sign(msg))


@dataclass(frozen=True)
class AccumulatedPayment:
    target: bytes
    transfer_amount: int
    create_pool_tx_hash: bytes
    target_settlement_sequence: int
    platform_signature: bytes

    def signing_bytes(self) -> bytes:
        return serialize_for_signing(self.target, self.transfer_amount, self.create_pool_tx_hash,
                                     self.target_settlement_sequence)

    def to_service_payment(self) -> ServicePayment:
        return ServicePayment(self.target, self.transfer_amount, self.create_pool_tx_hash,
                              self.target_settlement_sequence, self.platform_signature)

    def encode(self) -> bytes:
        return codec.u8(TAG_ACCUMULATED) + self.signing_bytes() + self.platform_signature

    @classmethod
    def decode(cls, data: bytes) -> AccumulatedPayment:
        r = codec.Reader(data)
        if r.u8() != TAG_ACCUMULATED:
            raise codec.DecodeError("not an AccumulatedPayment")
        ap = cls(r.take(ADDRESS_SIZE), r.u64(), r.take(DIGEST_SIZE), r.u64(), r.take(SIGNATURE_SIZE))
        r.done()
        return ap


class PaymentService:
    """Verifies receipts and issues platform-signed accumulated payments.

    Also submits the platform's CreatePool and, in live mode, top-ups.
    """

    def __init__(self, platform: KeyPair, tracker_public_key: bytes, ledger: Ledger, resource_id: bytes):
        self.platform = platform
        self.tracker_public_key = tracker_public_key
        self.ledger = ledger
        self.resource_id = resource_id
        self.pool_key: Optional[bytes] = None
        self.target_deposit = 0
        self.totals: dict[bytes, int] = {}
        self.last_receipt: dict[tuple[bytes, bytes], tuple[int, int]] = {}
        self.settle_seq: dict[bytes, int] = {}
        self._nonce = 0

    def _next_nonce(self) -> int:
        self._nonce += 1
        return self._nonce

    def create_pool(self, deposit: int, collateral: int, duration: int,
                    resource_value: Optional[int] = None, strict: bool = True) -> bytes:
        if strict and resource_value is not None and deposit < resource_value:
            raise DepositTooSmall(f"deposit {deposit} < resource value {resource_value}")
        payload = CreatePool(self.resource_id, deposit, collateral, duration, self._next_nonce())
        self.pool_key = self.ledger.submit(OnChainTx.signed(self.platform, payload))
        self.target_deposit = deposit
        return self.pool_key

    def handshake(self) -> HandshakePacket:
        return build_handshake(self.ledger, self.pool_key)

    def submit_receipt(self, receipt: ServiceReceipt, cert: Optional[AuthCertificate]) -> AccumulatedPayment:
        if not verify(receipt.signer_key, receipt.signing_bytes(), receipt.signature):
            raise BadReceiptSignature("receipt signature invalid")
        if (cert is None or not cert.verify(self.tracker_public_key)
                or (cert.sharer, cert.receiver) != (receipt.beneficiary, receipt.signer)):
            raise UnauthorizedPair("no tracker certificate for this pair")
        if not cert.valid_from <= self.ledger.height <= cert.valid_until:
            raise CertExpired(f"height {self.ledger.height} outside [{cert.valid_from}, {cert.valid_until}]")
        if receipt.resource_id != self.resource_id:
            raise ReceiptRejected("receipt is for a different resource")
        pair = (receipt.signer, receipt.beneficiary)
        last_seq, last_amount = self.last_receipt.get(pair, (-1, 0))
        if receipt.receipt_seq != last_seq + 1 or receipt.cumulative_amount <= last_amount:
            raise StaleReceipt(f"seq {receipt.receipt_seq} / amount {receipt.cumulative_amount} not advancing")
        self.last_receipt[pair] = (receipt.receipt_seq, receipt.cumulative_amount)
        ben = receipt.beneficiary
        self.totals[ben] = self.totals.get(ben, 0) + receipt.cumulative_amount - last_amount
        return self.accumulated_for(ben)

    def accumulated_for(self, target: bytes) -> AccumulatedPayment:
        pool = self.ledger.pool(self.pool_key)
        seq = max(self.settle_seq.get(target, 0), pool.next_seq(target))
        amount = self.totals.get(target, 0)
        sig = self.platform.sign(serialize_for_signing(target, amount, self.pool_key, seq))
        return AccumulatedPayment(target, amount, self.pool_key, seq, sig)

    def note_settlement(self, target: bytes, seq: int) -> None:
        """The sharer published the accumulated payment carrying ``seq``."""
        self.settle_seq[target] = max(self.settle_seq.get(target, 0), seq + 1)

    def top_up_amount(self) -> int:
        pool = self.ledger.pool(self.pool_key)
        pending = sum(tx.payload.amount for tx in self.ledger.mempool if isinstance(tx.payload, TopUpPool))
        return max(self.target_deposit - pool.remaining_deposit - pending, 0)

    def maybe_top_up(self) -> Optional[bytes]:
        """Live-stream mode: refill the pool back to its original deposit."""
        if self.ledger.pool(self.pool_key).status is not PoolStatus.ACTIVE:
            return None
        amount = self.top_up_amount()
        if amount == 0:
            return None
        return self.ledger.submit(OnChainTx.signed(self.platform, TopUpPool(self.pool_key, amount, self._next_nonce())))


def platform_create_pool(ledger: Ledger, service: PaymentService, deposit: int, collateral: int,
                         duration: int, resource_value: Optional[int] = None,
                         strict: bool = True) -> tuple[PoolState, HandshakePacket]:
    """Submit the platform's CreatePool, commit it, and return the pool plus
    the handshake material relayed to sharers."""
    key = service.create_pool(deposit, collateral, duration, resource_value, strict)
    ledger.commit_block()
    rc = ledger.receipt(key)
    if rc is None or not rc.applied:
        raise ReceiptRejected(f"CreatePool rejected: {rc.error if rc else 'not committed'}")
    return ledger.pool(key), service.handshake()


def settle_accumulated(ledger: Ledger, ap: AccumulatedPayment, submitter: KeyPair,
                       service: Optional[PaymentService] = None) -> bytes:
    pool = ledger.pool(ap.create_pool_tx_hash)
    if not verify(pool.creator_key, ap.signing_bytes(), ap.platform_signature):
        raise BadReceiptSignature("accumulated payment not signed by the platform")
    if submitter.address != ap.target:
        raise UnauthorizedPair("only the target may settle its accumulated payment")
    h = ledger.submit(OnChainTx.signed(submitter, Settlement(ap.to_service_payment())))
    if service is not None:
        service.note_settlement(ap.target, ap.target_settlement_sequence)
    return h
