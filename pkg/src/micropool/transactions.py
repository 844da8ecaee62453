"""On-chain transaction variants and their canonical bytes.

body  = kind(1) || submitterKey(32) || payload
hash  = sha256(body)
wire  = body || signature(64), signature by the submitter over body
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Union

from . import codec
from .crypto import (
    ADDRESS_SIZE,
    DIGEST_SIZE,
    PUBKEY_SIZE,
    SIGNATURE_SIZE,
    KeyPair,
    address_of,
    sha256,
)
from .payment import ServicePayment

TAG_COMMITMENT = 0x20


class TxKind(IntEnum):
    CREATE_POOL = 0x10
    SETTLEMENT = 0x11
    CHANNEL_OPEN = 0x12
    CHANNEL_CLOSE = 0x13
    TRANSFER = 0x14
    WITHDRAW_EXPIRED = 0x15
    TOP_UP_POOL = 0x16


@dataclass(frozen=True)
class CreatePool:
    resource_id: bytes
    deposit: int
    collateral: int
    duration: int
    nonce: int = 0
    kind = TxKind.CREATE_POOL

    def encode(self) -> bytes:
        return (self.resource_id + codec.u64(self.deposit) + codec.u64(self.collateral)
                + codec.u64(self.duration) + codec.u64(self.nonce))

    @classmethod
    def read(cls, r: codec.Reader) -> CreatePool:
        return cls(r.take(DIGEST_SIZE), r.u64(), r.u64(), r.u64(), r.u64())


@dataclass(frozen=True)
class Settlement:
    payment: ServicePayment
    kind = TxKind.SETTLEMENT

    def encode(self) -> bytes:
        return self.payment.encode()

    @classmethod
    def read(cls, r: codec.Reader) -> Settlement:
        if r.u8() != 0x01:
            raise codec.DecodeError("settlement must carry a ServicePayment")
        return cls(ServicePayment._read(r))


@dataclass(frozen=True)
class ChannelOpen:
    counterparty_key: bytes
    capacity: int
    nonce: int = 0
    kind = TxKind.CHANNEL_OPEN

    @property
    def counterparty(self) -> bytes:
        return address_of(self.counterparty_key)

    def encode(self) -> bytes:
        return self.counterparty_key + codec.u64(self.capacity) + codec.u64(self.nonce)

    @classmethod
    def read(cls, r: codec.Reader) -> ChannelOpen:
        return cls(r.take(PUBKEY_SIZE), r.u64(), r.u64())


def commitment_bytes(channel_id: bytes, funder_balance: int, counterparty_balance: int, seq: int) -> bytes:
    return (codec.u8(TAG_COMMITMENT) + channel_id + codec.u64(funder_balance)
            + codec.u64(counterparty_balance) + codec.u64(seq))


@dataclass(frozen=True)
class ChannelClose:
    channel_id: bytes
    funder_balance: int
    counterparty_balance: int
    seq: int
    funder_sig: bytes
    counterparty_sig: bytes
    kind = TxKind.CHANNEL_CLOSE

    def commitment(self) -> bytes:
        return commitment_bytes(self.channel_id, self.funder_balance, self.counterparty_balance, self.seq)

    def encode(self) -> bytes:
        return (self.channel_id + codec.u64(self.funder_balance) + codec.u64(self.counterparty_balance)
                + codec.u64(self.seq) + self.funder_sig + self.counterparty_sig)

    @classmethod
    def read(cls, r: codec.Reader) -> ChannelClose:
        return cls(r.take(DIGEST_SIZE), r.u64(), r.u64(), r.u64(),
                   r.take(SIGNATURE_SIZE), r.take(SIGNATURE_SIZE))


@dataclass(frozen=True)
class Transfer:
    to: bytes
    amount: int
    nonce: int = 0
    kind = TxKind.TRANSFER

    def encode(self) -> bytes:
        return self.to + codec.u64(self.amount) + codec.u64(self.nonce)

    @classmethod
    def read(cls, r: codec.Reader) -> Transfer:
        return cls(r.take(ADDRESS_SIZE), r.u64(), r.u64())


@dataclass(frozen=True)
class WithdrawExpired:
    pool_key: bytes
    kind = TxKind.WITHDRAW_EXPIRED

    def encode(self) -> bytes:
        return self.pool_key

    @classmethod
    def read(cls, r: codec.Reader) -> WithdrawExpired:
        return cls(r.take(DIGEST_SIZE))


@dataclass(frozen=True)
class TopUpPool:
    pool_key: bytes
    amount: int
    nonce: int = 0
    kind = TxKind.TOP_UP_POOL

    def encode(self) -> bytes:
        return self.pool_key + codec.u64(self.amount) + codec.u64(self.nonce)

    @classmethod
    def read(cls, r: codec.Reader) -> TopUpPool:
        return cls(r.take(DIGEST_SIZE), r.u64(), r.u64())


Payload = Union[CreatePool, Settlement, ChannelOpen, ChannelClose, Transfer, WithdrawExpired, TopUpPool]

_PAYLOADS = {cls.kind: cls for cls in
             (CreatePool, Settlement, ChannelOpen, ChannelClose, Transfer, WithdrawExpired, TopUpPool)}


def tx_body(payload: Payload, submitter_key: bytes) -> bytes:
    return codec.u8(payload.kind) + submitter_key + payload.encode()


@dataclass(frozen=True)
class OnChainTx:
    payload: Payload
    submitter_key: bytes
    signature: bytes

    @classmethod
    def signed(cls, keys: KeyPair, payload: Payload) -> OnChainTx:
        return cls(payload, keys.public_key, keys.sign(tx_body(payload, keys.public_key)))

    @property
    def kind(self) -> TxKind:
        return self.payload.kind

    @property
    def submitter(self) -> bytes:
        return address_of(self.submitter_key)

    def body(self) -> bytes:
        return tx_body(self.payload, self.submitter_key)

    @property
    def hash(self) -> bytes:
        return sha256(self.body())

    def encode(self) -> bytes:
        return self.body() + self.signature

    @classmethod
    def decode(cls, data: bytes) -> OnChainTx:
        r = codec.Reader(data)
        kind = r.u8()
        if kind not in _PAYLOADS:
            raise codec.DecodeError(f"unknown tx kind {kind:#x}")
        key = r.take(PUBKEY_SIZE)
        payload = _PAYLOADS[TxKind(kind)].read(r)
        sig = r.take(SIGNATURE_SIZE)
        r.done()
        return cls(payload, key, sig)
