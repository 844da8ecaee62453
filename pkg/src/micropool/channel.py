"""Unidirectional two-party payment channel used as the comparison baseline.

A channel costs two on-chain transactions (open, close) and cannot carry
payments until the open transaction is ``confirmation_depth`` blocks deep.
Stale-commitment disputes are not modelled; the ledger simply refuses a close
whose sequence is not above the last one it has seen.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .crypto import KeyPair, verify
from .errors import BalancesDontSum, InsufficientBalance, InvalidSignature, NonMonotonePayment, NotOpen
from .ledger import Ledger
from .transactions import ChannelClose, ChannelOpen, OnChainTx, commitment_bytes


class ChannelPhase(Enum):
    PENDING_OPEN = "pending_open"
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class ChannelState:
    channel_id: bytes
    funder_key: bytes
    counterparty_key: bytes
    capacity: int
    funder_balance: int
    counterparty_balance: int
    commitment_seq: int = 0
    status: ChannelPhase = ChannelPhase.PENDING_OPEN
    open_height: Optional[int] = None
    funder_sig: bytes = b""
    counterparty_sig: bytes = b""

    def commitment(self) -> bytes:
        return commitment_bytes(self.channel_id, self.funder_balance, self.counterparty_balance,
                                self.commitment_seq)


def sign_commitment(keys: KeyPair, channel: ChannelState, funder_balance: int,
                    counterparty_balance: int, seq: int) -> bytes:
    return keys.sign(commitment_bytes(channel.channel_id, funder_balance, counterparty_balance, seq))


def open_channel(ledger: Ledger, funder: KeyPair, counterparty: KeyPair, capacity: int,
                 nonce: int = 0) -> ChannelState:
    if ledger.balance(funder.address) < capacity:
        raise InsufficientBalance(f"funder holds {ledger.balance(funder.address)} < {capacity}")
    tx = OnChainTx.signed(funder, ChannelOpen(counterparty.public_key, capacity, nonce))
    cid = ledger.submit(tx)
    ch = ChannelState(cid, funder.public_key, counterparty.public_key, capacity, capacity, 0)
    # the opening state (seq 0) is co-signed so the funder can always exit
    ch.funder_sig = sign_commitment(funder, ch, capacity, 0, 0)
    ch.counterparty_sig = sign_commitment(counterparty, ch, capacity, 0, 0)
    return ch


def refresh(channel: ChannelState, ledger: Ledger) -> ChannelPhase:
    """Promote PendingOpen to Open once the open tx is buried deep enough."""
    if channel.status is ChannelPhase.PENDING_OPEN:
        h = ledger.inclusion_height(channel.channel_id)
        if h is not None:
            channel.open_height = h
            if ledger.height >= h + ledger.config.confirmation_depth:
                channel.status = ChannelPhase.OPEN
    return channel.status


def usable_height(channel: ChannelState, ledger: Ledger) -> Optional[int]:
    h = ledger.inclusion_height(channel.channel_id)
    return None if h is None else h + ledger.config.confirmation_depth


def update_commitment(channel: ChannelState, funder_balance: int, counterparty_balance: int,
                      funder_sig: bytes, counterparty_sig: bytes) -> ChannelState:
    if channel.status is not ChannelPhase.OPEN:
        raise NotOpen(channel.status.value)
    if funder_balance + counterparty_balance != channel.capacity or min(funder_balance, counterparty_balance) < 0:
        raise BalancesDontSum(f"{funder_balance}+{counterparty_balance} != {channel.capacity}")
    if funder_balance >= channel.funder_balance:
        raise NonMonotonePayment("payments only flow funder -> counterparty")
    seq = channel.commitment_seq + 1
    msg = commitment_bytes(channel.channel_id, funder_balance, counterparty_balance, seq)
    if not (verify(channel.funder_key, msg, funder_sig) and verify(channel.counterparty_key, msg, counterparty_sig)):
        raise InvalidSignature("commitment must carry both signatures")
    channel.funder_balance, channel.counterparty_balance = funder_balance, counterparty_balance
    channel.commitment_seq = seq
    channel.funder_sig, channel.counterparty_sig = funder_sig, counterparty_sig
    return channel


def pay(channel: ChannelState, amount: int, funder: KeyPair, counterparty: KeyPair) -> ChannelState:
    """Both parties co-sign a commitment moving ``amount`` to the counterparty."""
    fb, cb = channel.funder_balance - amount, channel.counterparty_balance + amount
    seq = channel.commitment_seq + 1
    return update_commitment(channel, fb, cb,
                             sign_commitment(funder, channel, fb, cb, seq),
                             sign_commitment(counterparty, channel, fb, cb, seq))


def close_tx(channel: ChannelState, closer: KeyPair) -> OnChainTx:
    payload = ChannelClose(channel.channel_id, channel.funder_balance, channel.counterparty_balance,
                           channel.commitment_seq, channel.funder_sig, channel.counterparty_sig)
    return OnChainTx.signed(closer, payload)


def close_channel(ledger: Ledger, channel: ChannelState, closer: KeyPair) -> bytes:
    if channel.status is not ChannelPhase.OPEN:
        raise NotOpen(channel.status.value)
    h = ledger.submit(close_tx(channel, closer))
    channel.status = ChannelPhase.CLOSED
    return h
