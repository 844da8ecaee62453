import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import RESOURCE, keys, make_ledger, open_pool, settle
from micropool import errors
from micropool.codec import DecodeError
from micropool.crypto import ZERO_DIGEST
from micropool.ledger import BlockHeader, Ledger, LedgerConfig, PoolStatus, SettlementKind
from micropool.payment import ServicePayment
from micropool.transactions import (
    ChannelOpen,
    CreatePool,
    OnChainTx,
    Settlement,
    TopUpPool,
    Transfer,
    TxKind,
    WithdrawExpired,
)
from oracles import PoolReplay


def test_genesis_and_empty_block():
    lg = make_ledger({"alice": 300})
    assert lg.height == 0
    b = lg.commit_block()
    assert b.header.tx_root == ZERO_DIGEST and b.header.tx_count == 0
    assert b.header.parent_hash == lg.header_at(0).hash
    assert lg.conservation_holds()


def test_transfer_and_rejected_middle_tx():
    lg = make_ledger({"alice": 10, "bob": 0})
    a, b = keys("alice"), keys("bob")
    h1 = lg.submit(OnChainTx.signed(a, Transfer(b.address, 4, 1)))
    h2 = lg.submit(OnChainTx.signed(b, Transfer(a.address, 50, 1)))
    h3 = lg.submit(OnChainTx.signed(a, Transfer(b.address, 3, 2)))
    lg.commit_block()
    assert lg.receipt(h1).applied and lg.receipt(h3).applied
    assert not lg.receipt(h2).applied and lg.receipt(h2).error == "InsufficientBalance"
    assert lg.balance(a.address) == 3 and lg.balance(b.address) == 7
    assert lg.blocks[1].header.tx_count == 3


def test_submit_checks():
    lg = make_ledger({"alice": 10})
    tx = OnChainTx.signed(keys("alice"), Transfer(keys("bob").address, 1, 0))
    lg.submit(tx)
    with pytest.raises(errors.DuplicateTx):
        lg.submit(tx)
    with pytest.raises(errors.UnknownAccount):
        lg.submit(OnChainTx.signed(keys("mallory"), Transfer(keys("bob").address, 1, 0)))
    forged = OnChainTx(tx.payload, tx.submitter_key, bytes(64))
    with pytest.raises(errors.InvalidSignature):
        lg.submit(forged)


def test_create_pool_balances():
    lg = make_ledger({"alice": 300})
    key = open_pool(lg)
    pool = lg.pool(key)
    assert pool.status is PoolStatus.ACTIVE
    assert lg.balance(keys("alice").address) == 50
    assert pool.remaining_deposit == 100 and pool.create_height == 1 and pool.expiry_height == 61
    assert lg.inclusion_height(key) == 1


@pytest.mark.parametrize("deposit,collateral,duration,err", [
    (100, 100, 60, "CollateralTooSmall"),
    (100, 150, 0, "ZeroDuration"),
    (200, 250, 60, "InsufficientBalance"),
])
def test_create_pool_rejections(deposit, collateral, duration, err):
    lg = make_ledger({"alice": 300})
    h = lg.submit(OnChainTx.signed(keys("alice"), CreatePool(RESOURCE, deposit, collateral, duration)))
    lg.commit_block()
    assert lg.receipt(h).error == err
    assert lg.balance(keys("alice").address) == 300


def test_settlement_basic_and_replay():
    lg = make_ledger({"alice": 300, "bob": 0})
    key = open_pool(lg)
    rc = settle(lg, key, "bob", 30)
    assert rc.applied and rc.outcome.kind is SettlementKind.SETTLED
    bob = keys("bob").address
    pool = lg.pool(key)
    assert lg.balance(bob) == 29 and pool.remaining_deposit == 70 and pool.next_seq(bob) == 1
    rc2 = settle(lg, key, "bob", 30, seq=0)
    assert rc2.error == "StaleSequence"
    assert lg.burned_fees == 1


def test_settlement_check_order():
    lg = make_ledger({"alice": 300, "bob": 0, "carol": 0})
    key = open_pool(lg)
    bob = keys("bob")
    sp = ServicePayment.signed(keys("alice"), bob.address, 10, key, 0)
    h = lg.submit(OnChainTx.signed(keys("carol"), Settlement(sp)))
    lg.commit_block()
    assert lg.receipt(h).error == "WrongSubmitter"
    forged = ServicePayment.signed(keys("carol"), bob.address, 10, key, 0)
    h = lg.submit(OnChainTx.signed(bob, Settlement(forged)))
    lg.commit_block()
    assert lg.receipt(h).error == "InvalidSignature"
    missing = ServicePayment.signed(keys("alice"), bob.address, 10, bytes(32), 0)
    h = lg.submit(OnChainTx.signed(bob, Settlement(missing)))
    lg.commit_block()
    assert lg.receipt(h).error == "PoolNotFound"
    assert settle(lg, key, "bob", 1).error == "UneconomicalSettlement"
    assert settle(lg, key, "bob", 10).applied
    assert settle(lg, key, "bob", 10).error == "NonPositiveIncrement"


def test_double_spend_slashes():
    lg = make_ledger({"alice": 300, "bob": 0, "colluder": 0})
    key = open_pool(lg)
    assert settle(lg, key, "colluder", 100).applied
    rc = settle(lg, key, "bob", 100)
    assert rc.applied and rc.outcome.kind is SettlementKind.SLASH_TRIGGERED and rc.outcome.payout == 0
    pool = lg.pool(key)
    assert pool.status is PoolStatus.SLASHED and lg.burned_slashes == 150
    assert settle(lg, key, "bob", 110).error == "PoolNotActive"
    assert lg.conservation_holds()


def test_partial_slash_pays_remaining_minus_fee():
    lg = make_ledger({"alice": 300, "bob": 0, "colluder": 0})
    key = open_pool(lg)
    settle(lg, key, "colluder", 80)
    rc = settle(lg, key, "bob", 40)
    assert rc.outcome.kind is SettlementKind.SLASH_TRIGGERED and rc.outcome.payout == 19
    assert lg.balance(keys("bob").address) == 19
    assert lg.burned == 1 + 1 + 150


def test_timelock_and_withdraw():
    lg = make_ledger({"alice": 300, "bob": 0})
    key = open_pool(lg, duration=3)
    settle(lg, key, "bob", 30)  # height 2
    alice = keys("alice")
    w = lg.submit(OnChainTx.signed(alice, WithdrawExpired(key)))
    lg.commit_block()  # height 3 < 4
    assert lg.receipt(w).error == "TimelockNotExpired"
    assert settle(lg, key, "bob", 40).error == "TimelockExpired"  # height 4
    w = lg.submit(OnChainTx.signed(keys("bob"), WithdrawExpired(key)))
    lg.commit_block()
    assert lg.receipt(w).error == "NotCreator"
    w = lg.submit(OnChainTx.signed(alice, WithdrawExpired(key)))
    lg.commit_block()
    assert lg.receipts(w)[-1].outcome == 70 + 150
    assert lg.pool(key).status is PoolStatus.CLOSED
    assert lg.balance(alice.address) == 50 + 220


def test_top_up():
    lg = make_ledger({"alice": 400, "bob": 0})
    key = open_pool(lg)
    settle(lg, key, "bob", 30)
    h = lg.submit(OnChainTx.signed(keys("alice"), TopUpPool(key, 30, 1)))
    lg.commit_block()
    assert lg.receipt(h).applied and lg.pool(key).remaining_deposit == 100
    h = lg.submit(OnChainTx.signed(keys("alice"), TopUpPool(key, 50, 2)))
    lg.commit_block()
    assert lg.receipt(h).error == "CollateralTooSmall"


def test_inclusion_proof_and_header_encoding():
    lg = make_ledger({"alice": 300})
    key = open_pool(lg)
    header, proof = lg.get_tx_inclusion(key)
    assert header.height == 1 and proof.leaf_count == 1
    from micropool.codec import Reader
    assert BlockHeader.read(Reader(header.encode())) == header
    assert len(header.encode()) == 80
    with pytest.raises(errors.TxNotCommitted):
        lg.get_tx_inclusion(bytes(32))


@pytest.mark.parametrize("payload", [
    CreatePool(RESOURCE, 100, 150, 60, 7),
    Transfer(keys("bob").address, 5, 3),
    ChannelOpen(keys("bob").public_key, 50, 1),
    WithdrawExpired(bytes(range(32))),
    TopUpPool(bytes(range(32)), 9, 2),
    Settlement(ServicePayment.signed(keys("alice"), keys("bob").address, 5, bytes(32), 0)),
])
def test_tx_roundtrip(payload):
    tx = OnChainTx.signed(keys("alice"), payload)
    assert OnChainTx.decode(tx.encode()) == tx
    assert tx.body()[0] == int(payload.kind)
    with pytest.raises(DecodeError):
        OnChainTx.decode(tx.encode() + b"\x00")


def test_dump_is_stable():
    def run():
        lg = make_ledger({"alice": 300, "bob": 0})
        key = open_pool(lg)
        settle(lg, key, "bob", 30)
        return lg.dump()
    assert run() == run()
    assert "pooltarget" in run()


targets = st.lists(st.tuples(st.integers(0, 4), st.integers(1, 60)), min_size=1, max_size=12)


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 5), targets, st.integers(20, 120), st.integers(0, 3))
def test_ledger_matches_replay_oracle(n_targets, steps, deposit, fee):
    names = [f"t{i}" for i in range(n_targets)]
    lg = Ledger({keys("alice").address: deposit * 3, **{keys(n).address: 0 for n in names}},
                LedgerConfig(fee, 6))
    key = open_pool(lg, deposit=deposit, collateral=deposit + 1, duration=1000)
    oracle = PoolReplay(deposit, deposit + 1, fee)
    cum = {n: 0 for n in names}
    for ti, inc in steps:
        name = names[ti % n_targets]
        cum[name] += inc
        rc = settle(lg, key, name, cum[name])
        expected = oracle.settle(keys(name).address, cum[name])
        got = {None: None}.get(rc.error, rc.error)
        if rc.applied:
            got = "slash" if rc.outcome.kind is SettlementKind.SLASH_TRIGGERED else "settled"
        assert got == {"inactive": "PoolNotActive", "nonpositive": "NonPositiveIncrement",
                       "uneconomical": "UneconomicalSettlement"}.get(expected, expected)
        assert lg.conservation_holds()
    assert (lg.pool(key).status is PoolStatus.SLASHED) == oracle.slashed
    assert lg.burned == oracle.burned
    for n in names:
        assert lg.balance(keys(n).address) == oracle.paid.get(keys(n).address, 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["alice", "bob", "carol"]),
                          st.sampled_from(["alice", "bob", "carol"]), st.integers(-5, 80)), max_size=15))
def test_conservation_under_random_transfers(moves):
    lg = make_ledger({"alice": 100, "bob": 50, "carol": 0})
    for i, (src, dst, amt) in enumerate(moves):
        lg.submit(OnChainTx.signed(keys(src), Transfer(keys(dst).address, max(amt, 0), i)))
        if i % 3 == 0:
            lg.commit_block()
            assert lg.conservation_holds()
    lg.commit_block()
    assert lg.conservation_holds()
    assert all(v >= 0 for v in lg.balances.values())


def test_kind_codes():
    assert [int(k) for k in TxKind] == list(range(0x10, 0x17))
