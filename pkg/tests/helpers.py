"""Small builders shared by the test modules."""
from __future__ import annotations

from micropool.crypto import keygen_from_label, sha256
from micropool.ledger import Ledger, LedgerConfig
from micropool.payment import ServicePayment
from micropool.transactions import CreatePool, OnChainTx, Settlement

RESOURCE = sha256(b"resource")


def keys(name):
    return keygen_from_label(f"test/{name}")


def make_ledger(balances: dict, fee=1, depth=6) -> Ledger:
    return Ledger({keys(n).address: v for n, v in balances.items()}, LedgerConfig(fee, depth))


def open_pool(ledger, creator="alice", deposit=100, collateral=150, duration=60, nonce=0):
    tx = OnChainTx.signed(keys(creator), CreatePool(RESOURCE, deposit, collateral, duration, nonce))
    key = ledger.submit(tx)
    ledger.commit_block()
    return key


def settle(ledger, pool_key, target, amount, seq=None, creator="alice", commit=True):
    if seq is None:
        seq = ledger.pool(pool_key).next_seq(keys(target).address)
    sp = ServicePayment.signed(keys(creator), keys(target).address, amount, pool_key, seq)
    h = ledger.submit(OnChainTx.signed(keys(target), Settlement(sp)))
    if commit:
        ledger.commit_block()
        return ledger.receipts(h)[-1]
    return h
