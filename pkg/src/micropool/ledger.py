"""Deterministic single-chain ledger: accounts, blocks, micropayment pools
and payment channels.

All mutation goes through ``submit`` + ``commit_block``; the ``apply_*``
methods are the per-transaction state transitions and are public so they can
be exercised directly. Every ``apply_*`` validates fully before touching
state, so a failing transaction leaves the ledger unchanged.

Token accounting: fees and slashed collateral are burned. At any time
``balances + active pool funds + open channel capacity + burned`` equals the
genesis supply.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from . import codec, errors
from .crypto import ZERO_DIGEST, MerkleProof, address_of, merkle_prove, merkle_root, sha256, verify
from .payment import ServicePayment
from .transactions import (
    ChannelClose,
    ChannelOpen,
    CreatePool,
    OnChainTx,
    Settlement,
    TopUpPool,
    Transfer,
    TxKind,
    WithdrawExpired,
    tx_body,
)

log = logging.getLogger(__name__)


@dataclass
class LedgerConfig:
    settlement_gas_fee: int = 1
    confirmation_depth: int = 6

    def __post_init__(self):
        if self.settlement_gas_fee < 0:
            raise ValueError("settlement_gas_fee must be >= 0")
        if self.confirmation_depth < 1:
            raise ValueError("confirmation_depth must be >= 1")


class PoolStatus(Enum):
    ACTIVE = "active"
    SLASHED = "slashed"
    CLOSED = "closed"


@dataclass
class PoolState:
    key: bytes
    creator: bytes
    creator_key: bytes
    resource_id: bytes
    deposit: int
    remaining_deposit: int
    collateral: int
    create_height: int
    duration: int
    status: PoolStatus = PoolStatus.ACTIVE
    settled_per_target: dict[bytes, int] = field(default_factory=dict)
    seq_per_target: dict[bytes, int] = field(default_factory=dict)
    top_ups: int = 0

    @property
    def expiry_height(self) -> int:
        return self.create_height + self.duration

    @property
    def locked(self) -> int:
        return self.remaining_deposit + self.collateral if self.status is PoolStatus.ACTIVE else 0

    def next_seq(self, target: bytes) -> int:
        return self.seq_per_target.get(target, 0)

    def settled(self, target: bytes) -> int:
        return self.settled_per_target.get(target, 0)


class ChannelStatus(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class LedgerChannel:
    channel_id: bytes
    funder: bytes
    funder_key: bytes
    counterparty: bytes
    counterparty_key: bytes
    capacity: int
    open_height: int
    status: ChannelStatus = ChannelStatus.OPEN
    last_seq: int = -1


class SettlementKind(Enum):
    SETTLED = "settled"
    SLASH_TRIGGERED = "slash_triggered"


@dataclass(frozen=True)
class SettlementOutcome:
    kind: SettlementKind
    payout: int
    increment: int


@dataclass(frozen=True)
class BlockHeader:
    height: int
    parent_hash: bytes
    tx_root: bytes
    tx_count: int

    SIZE = 8 + 32 + 32 + 8

    def encode(self) -> bytes:
        return codec.u64(self.height) + self.parent_hash + self.tx_root + codec.u64(self.tx_count)

    @classmethod
    def read(cls, r: codec.Reader) -> BlockHeader:
        return cls(r.u64(), r.take(32), r.take(32), r.u64())

    @property
    def hash(self) -> bytes:
        return sha256(self.encode())


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    kind: TxKind
    applied: bool
    error: Optional[str] = None
    outcome: Any = None


@dataclass
class Block:
    header: BlockHeader
    txs: list[OnChainTx]
    receipts: list[Receipt]

    @property
    def height(self) -> int:
        return self.header.height


class Ledger:
    def __init__(self, genesis: dict[bytes, int], config: Optional[LedgerConfig] = None):
        if any(v < 0 for v in genesis.values()):
            raise ValueError("genesis balances must be non-negative")
        self.config = config or LedgerConfig()
        self.balances: dict[bytes, int] = dict(genesis)
        self.total_supply = sum(genesis.values())
        self.burned = 0
        self.burned_fees = 0
        self.burned_slashes = 0
        self.pools: dict[bytes, PoolState] = {}
        self.channels: dict[bytes, LedgerChannel] = {}
        self.mempool: list[OnChainTx] = []
        self._mempool_hashes: set[bytes] = set()
        self._tx_index: dict[bytes, tuple[int, int]] = {}
        self._receipts: dict[bytes, Receipt] = {}
        genesis_header = BlockHeader(0, ZERO_DIGEST, ZERO_DIGEST, 0)
        self.blocks: list[Block] = [Block(genesis_header, [], [])]
        self._apply_height = 1

    # -- chain view ---------------------------------------------------------

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    def header_at(self, height: int) -> Optional[BlockHeader]:
        if 0 <= height < len(self.blocks):
            return self.blocks[height].header
        return None

    def balance(self, address: bytes) -> int:
        return self.balances.get(address, 0)

    def pool(self, key: bytes) -> PoolState:
        try:
            return self.pools[key]
        except KeyError:
            raise errors.PoolNotFound(key.hex()) from None

    def receipt(self, tx_hash: bytes) -> Optional[Receipt]:
        """Receipt of the first inclusion of ``tx_hash``."""
        return self._receipts.get(tx_hash)

    def receipts(self, tx_hash: bytes) -> list[Receipt]:
        """Every receipt for ``tx_hash``; a rejected replay shares its hash with the original."""
        return [rc for b in self.blocks for rc in b.receipts if rc.tx_hash == tx_hash]

    def inclusion_height(self, tx_hash: bytes) -> Optional[int]:
        loc = self._tx_index.get(tx_hash)
        return None if loc is None else loc[0]

    def committed_txs(self):
        for block in self.blocks:
            for tx, rc in zip(block.txs, block.receipts):
                yield block.height, tx, rc

    def get_tx_inclusion(self, tx_hash: bytes) -> tuple[BlockHeader, MerkleProof]:
        if tx_hash not in self._tx_index:
            raise errors.TxNotCommitted(tx_hash.hex())
        height, idx = self._tx_index[tx_hash]
        block = self.blocks[height]
        proof = merkle_prove([tx.hash for tx in block.txs], idx)
        return block.header, proof

    # -- admission and block production ------------------------------------

    def submit(self, tx: OnChainTx) -> bytes:
        if not verify(tx.submitter_key, tx.body(), tx.signature):
            raise errors.InvalidSignature("bad submitter signature")
        if tx.submitter not in self.balances:
            raise errors.UnknownAccount(tx.submitter.hex())
        h = tx.hash
        if h in self._mempool_hashes:
            raise errors.DuplicateTx(h.hex())
        self.mempool.append(tx)
        self._mempool_hashes.add(h)
        return h

    def commit_block(self) -> Block:
        height = self.height + 1
        self._apply_height = height
        txs, self.mempool = self.mempool, []
        self._mempool_hashes = set()
        receipts = [self._apply(tx) for tx in txs]
        hashes = [tx.hash for tx in txs]
        root = merkle_root(hashes) if hashes else ZERO_DIGEST
        header = BlockHeader(height, self.blocks[-1].header.hash, root, len(txs))
        block = Block(header, txs, receipts)
        self.blocks.append(block)
        for i, (h, rc) in enumerate(zip(hashes, receipts)):
            self._tx_index.setdefault(h, (height, i))
            self._receipts.setdefault(h, rc)
        self._apply_height = height + 1
        return block

    def _apply(self, tx: OnChainTx) -> Receipt:
        p = tx.payload
        try:
            if isinstance(p, CreatePool):
                out = self.apply_create_pool(p, tx.submitter_key)
            elif isinstance(p, Settlement):
                out = self.apply_settlement(p.payment, tx.submitter)
            elif isinstance(p, ChannelOpen):
                out = self.apply_channel_open(p, tx.submitter_key)
            elif isinstance(p, ChannelClose):
                out = self.apply_channel_close(p, tx.submitter)
            elif isinstance(p, Transfer):
                out = self.apply_transfer(p, tx.submitter)
            elif isinstance(p, WithdrawExpired):
                out = self.withdraw_expired_pool(p.pool_key, tx.submitter)
            elif isinstance(p, TopUpPool):
                out = self.apply_top_up(p, tx.submitter)
            else:  # pragma: no cover
                raise TypeError(type(p))
        except errors.LedgerError as e:
            log.debug("tx %s rejected: %s", tx.hash.hex()[:12], type(e).__name__)
            return Receipt(tx.hash, tx.kind, False, type(e).__name__)
        return Receipt(tx.hash, tx.kind, True, None, out)

    # -- helpers ------------------------------------------------------------

    def _credit(self, address: bytes, amount: int) -> None:
        self.balances[address] = self.balances.get(address, 0) + amount

    def _require_funds(self, address: bytes, amount: int) -> None:
        if self.balances.get(address, 0) < amount:
            raise errors.InsufficientBalance(f"{address.hex()} needs {amount}")

    def _burn(self, fees: int = 0, slashed: int = 0) -> None:
        self.burned_fees += fees
        self.burned_slashes += slashed
        self.burned += fees + slashed

    # -- state transitions --------------------------------------------------

    def apply_transfer(self, p: Transfer, sender: bytes) -> int:
        if p.amount <= 0:
            raise errors.InvalidAmount("transfer amount must be positive")
        self._require_funds(sender, p.amount)
        self.balances[sender] -= p.amount
        self._credit(p.to, p.amount)
        return p.amount

    def apply_create_pool(self, p: CreatePool, creator_key: bytes) -> PoolState:
        creator = address_of(creator_key)
        if p.duration < 1:
            raise errors.ZeroDuration("duration must be at least one block")
        if p.deposit <= 0:
            raise errors.InvalidAmount("deposit must be positive")
        if p.collateral <= p.deposit:
            raise errors.CollateralTooSmall(f"collateral {p.collateral} must exceed deposit {p.deposit}")
        self._require_funds(creator, p.deposit + p.collateral)
        key = sha256(tx_body(p, creator_key))
        if key in self.pools:
            raise errors.DuplicateTx(f"pool {key.hex()} exists")
        self.balances[creator] -= p.deposit + p.collateral
        pool = PoolState(key, creator, creator_key, p.resource_id, p.deposit, p.deposit,
                         p.collateral, self._apply_height, p.duration)
        self.pools[key] = pool
        return pool

    def apply_settlement(self, sp: ServicePayment, submitter: bytes) -> SettlementOutcome:
        pool = self.pool(sp.cptx_hash)
        if sp.target != submitter:
            raise errors.WrongSubmitter("only the payment target may settle it")
        if not verify(pool.creator_key, sp.signing_bytes(), sp.sigma):
            raise errors.InvalidSignature("ServicePayment not signed by pool creator")
        # replay is checked before liveness so resubmissions always read as stale
        if sp.tgt_seq != pool.next_seq(sp.target):
            raise errors.StaleSequence(f"tgtSeq {sp.tgt_seq} != expected {pool.next_seq(sp.target)}")
        if pool.status is not PoolStatus.ACTIVE:
            raise errors.PoolNotActive(pool.status.value)
        if self._apply_height >= pool.expiry_height:
            raise errors.TimelockExpired(f"height {self._apply_height} >= {pool.expiry_height}")
        increment = sp.amount - pool.settled(sp.target)
        if increment <= 0:
            raise errors.NonPositiveIncrement(f"amount {sp.amount} already settled")
        fee = self.config.settlement_gas_fee
        if increment <= fee:
            raise errors.UneconomicalSettlement(f"increment {increment} <= fee {fee}")

        pool.seq_per_target[sp.target] = sp.tgt_seq + 1
        if increment <= pool.remaining_deposit:
            payout = increment - fee
            pool.remaining_deposit -= increment
            pool.settled_per_target[sp.target] = pool.settled(sp.target) + increment
            self._credit(sp.target, payout)
            self._burn(fees=fee)
            return SettlementOutcome(SettlementKind.SETTLED, payout, increment)

        # double spend: remaining deposit cannot cover the consolidated payment
        remaining = pool.remaining_deposit
        payout = max(remaining - fee, 0)
        pool.settled_per_target[sp.target] = pool.settled(sp.target) + remaining
        pool.remaining_deposit = 0
        self._credit(sp.target, payout)
        self._burn(fees=remaining - payout, slashed=pool.collateral)
        pool.status = PoolStatus.SLASHED
        log.info("pool %s slashed: collateral %d burned", pool.key.hex()[:12], pool.collateral)
        return SettlementOutcome(SettlementKind.SLASH_TRIGGERED, payout, increment)

    def apply_top_up(self, p: TopUpPool, caller: bytes) -> PoolState:
        pool = self.pool(p.pool_key)
        if caller != pool.creator:
            raise errors.NotCreator("only the pool creator may top up")
        if pool.status is not PoolStatus.ACTIVE:
            raise errors.PoolNotActive(pool.status.value)
        if self._apply_height >= pool.expiry_height:
            raise errors.TimelockExpired("pool expired")
        if p.amount <= 0:
            raise errors.InvalidAmount("top-up must be positive")
        if pool.collateral <= pool.remaining_deposit + p.amount:
            raise errors.CollateralTooSmall("collateral must exceed the remaining deposit")
        self._require_funds(caller, p.amount)
        self.balances[caller] -= p.amount
        pool.deposit += p.amount
        pool.remaining_deposit += p.amount
        pool.top_ups += 1
        return pool

    def withdraw_expired_pool(self, pool_key: bytes, caller: bytes) -> int:
        pool = self.pool(pool_key)
        if caller != pool.creator:
            raise errors.NotCreator("only the pool creator may withdraw")
        if pool.status is not PoolStatus.ACTIVE:
            raise errors.PoolNotActive(pool.status.value)
        if self._apply_height < pool.expiry_height:
            raise errors.TimelockNotExpired(f"height {self._apply_height} < {pool.expiry_height}")
        refund = pool.remaining_deposit + pool.collateral
        self._credit(caller, refund)
        pool.status = PoolStatus.CLOSED
        return refund

    def apply_channel_open(self, p: ChannelOpen, funder_key: bytes) -> LedgerChannel:
        funder = address_of(funder_key)
        if p.capacity <= 0:
            raise errors.InvalidAmount("capacity must be positive")
        self._require_funds(funder, p.capacity)
        cid = sha256(tx_body(p, funder_key))
        if cid in self.channels:
            raise errors.DuplicateTx(f"channel {cid.hex()} exists")
        self.balances[funder] -= p.capacity
        ch = LedgerChannel(cid, funder, funder_key, p.counterparty, p.counterparty_key,
                           p.capacity, self._apply_height)
        self.channels[cid] = ch
        return ch

    def apply_channel_close(self, p: ChannelClose, closer: bytes) -> dict[bytes, int]:
        ch = self.channels.get(p.channel_id)
        if ch is None:
            raise errors.ChannelNotFound(p.channel_id.hex())
        if closer not in (ch.funder, ch.counterparty):
            raise errors.WrongSubmitter("closer is not a channel party")
        if p.seq <= ch.last_seq:
            raise errors.StaleCommitment(f"seq {p.seq} <= last seen {ch.last_seq}")
        if ch.status is not ChannelStatus.OPEN:
            raise errors.ChannelNotOpen(ch.status.value)
        if p.funder_balance + p.counterparty_balance != ch.capacity:
            raise errors.BalancesDontSum(f"{p.funder_balance}+{p.counterparty_balance} != {ch.capacity}")
        msg = p.commitment()
        if not (verify(ch.funder_key, msg, p.funder_sig) and verify(ch.counterparty_key, msg, p.counterparty_sig)):
            raise errors.InvalidSignature("commitment needs both party signatures")
        fee = self.config.settlement_gas_fee
        payout = {ch.funder: p.funder_balance, ch.counterparty: p.counterparty_balance}
        shortfall = max(fee - payout[closer], 0)
        self._require_funds(closer, shortfall)
        self.balances[closer] = self.balances.get(closer, 0) - shortfall
        payout[closer] -= fee - shortfall
        for addr, amount in payout.items():
            self._credit(addr, amount)
        self._burn(fees=fee)
        ch.last_seq = p.seq
        ch.status = ChannelStatus.CLOSED
        return payout

    # -- invariants and dumps -----------------------------------------------

    def locked_in_pools(self) -> int:
        return sum(p.locked for p in self.pools.values())

    def locked_in_channels(self) -> int:
        return sum(c.capacity for c in self.channels.values() if c.status is ChannelStatus.OPEN)

    def conservation_holds(self) -> bool:
        return (sum(self.balances.values()) + self.locked_in_pools() + self.locked_in_channels()
                + self.burned) == self.total_supply

    def dump(self) -> str:
        """Line-oriented state dump, stable ordering, decimal token amounts."""
        lines = [f"height {self.height} {self.blocks[-1].header.hash.hex()}"]
        for addr in sorted(self.balances):
            lines.append(f"account {addr.hex()} {self.balances[addr]}")
        for key in sorted(self.pools):
            p = self.pools[key]
            lines.append(f"pool {key.hex()} {p.creator.hex()} {p.resource_id.hex()} {p.status.value} "
                         f"{p.deposit} {p.remaining_deposit} {p.collateral} {p.create_height} {p.duration}")
            for t in sorted(p.seq_per_target):
                lines.append(f"pooltarget {key.hex()} {t.hex()} {p.settled(t)} {p.seq_per_target[t]}")
        for cid in sorted(self.channels):
            c = self.channels[cid]
            lines.append(f"channel {cid.hex()} {c.funder.hex()} {c.counterparty.hex()} "
                         f"{c.capacity} {c.status.value} {c.open_height} {c.last_seq}")
        lines.append(f"supply {self.total_supply} burned {self.burned} "
                     f"fees {self.burned_fees} slashed {self.burned_slashes}")
        return "\n".join(lines) + "\n"
