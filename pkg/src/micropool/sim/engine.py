"""Deterministic tick-driven simulator.

One tick per chunk request, a block every ``block_interval`` ticks. Within a
tick the order is fixed: block production (on block ticks), churn events,
viewer action, cacher settlements. Nothing reads a clock or an unseeded RNG,
so a config always produces the same report.
"""
from __future__ import annotations

import logging
from typing import Optional

from ..channel import ChannelPhase, ChannelState, close_channel, open_channel, pay, refresh
from ..crypto import KeyPair, keygen, sha256
from ..errors import DepositExhausted, MicropoolError
from ..ledger import Ledger, LedgerConfig, PoolStatus, SettlementKind
from ..nodes import (
    Behavior,
    CacherNode,
    ChunkManifest,
    DrainAttack,
    ExchangeOutcome,
    ViewerNode,
    collude_full_drain,
    fetch_from_cdn,
    make_chunks,
    on_undelivered,
    request_chunk,
    switch_peer,
    verify_chunk,
)
from ..protocol import HandshakeExpectations, verify_handshake
from ..semitrust import PaymentService, ReceiptWallet, Tracker, settle_accumulated
from ..transactions import OnChainTx, WithdrawExpired
from .config import ScenarioConfig
from .report import ComparisonReport, MetricsReport, SwitchEvent

log = logging.getLogger(__name__)


class SimulationError(MicropoolError):
    pass


def _keys(seed: int, label: str) -> KeyPair:
    return keygen(sha256(f"micropool/{seed}/{label}".encode()))


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg.validate()
        seed = cfg.random_seed
        self.chunks = make_chunks(seed, cfg.chunk_count, cfg.chunk_size)
        self.manifest = ChunkManifest.from_chunks(self.chunks, cfg.chunk_value)
        self.names = [f"peer{i}" for i in range(cfg.num_peers)]
        self.cachers = {
            name: CacherNode(name, _keys(seed, name), dict(enumerate(self.chunks)),
                             cfg.behavior_of(i), cfg.settlement_policy)
            for i, name in enumerate(self.names)
        }
        self.viewer = ViewerNode(_keys(seed, "viewer"), self.manifest, cfg.deposit)
        self.viewer.peers = [self.names[i] for i in cfg.streaming_peers]
        self.colluders = [c for c in self.cachers.values() if c.behavior is Behavior.COLLUDING]

        genesis = {c.address: cfg.peer_initial_balance for c in self.cachers.values()}
        viewer_funds = cfg.deposit + cfg.collateral + cfg.num_peers * cfg.effective_channel_capacity
        genesis[self.viewer.address] = viewer_funds
        self.ledger = Ledger(genesis, LedgerConfig(cfg.settlement_gas_fee, cfg.confirmation_depth))
        self.genesis = dict(genesis)

        self.report = MetricsReport(cfg.mode, cfg.num_peers, cfg.random_seed)
        self.tick = 0
        self._nonce = 0
        self.ready = False
        self.last_peer: Optional[str] = None
        self.served_since_switch = 0
        self.channels: dict[str, ChannelState] = {}
        self.pending_open: Optional[tuple[int, Optional[str], str]] = None
        self.drain: Optional[DrainAttack] = None
        self.withdraw_tx: Optional[bytes] = None
        self.churn = sorted(cfg.churn_schedule, key=lambda e: e.tick)

    # -- plumbing -----------------------------------------------------------

    def nonce(self) -> int:
        self._nonce += 1
        return self._nonce

    def _tx_total(self) -> int:
        return sum(len(b.txs) for b in self.ledger.blocks) + len(self.ledger.mempool)

    def produce_block(self) -> None:
        self.ledger.commit_block()
        self.report.conservation_checks += 1
        if not self.ledger.conservation_holds():
            self.report.conservation_violations += 1
            log.error("conservation violated at height %d", self.ledger.height)

    def run(self) -> MetricsReport:
        self.start()
        while not self.finished():
            if self.tick >= self.cfg.max_ticks:
                raise SimulationError(f"scenario did not finish within {self.cfg.max_ticks} ticks")
            if self.tick > 0 and self.tick % self.cfg.block_interval == 0:
                self.produce_block()
            self.step()
            self.tick += 1
        # flush anything submitted on the final tick
        while self.ledger.mempool:
            self.produce_block()
        return self.finalize()

    # -- hooks overridden per mode --------------------------------------------

    def start(self) -> None:
        tx = OnChainTx.signed(self.viewer.keys, _create_pool(self.cfg, self.manifest, self.nonce()))
        self.viewer.pool_key = self.ledger.submit(tx)

    def step(self) -> None:
        self.apply_churn()
        self.viewer_step()
        self.cacher_step()

    # -- viewer -----------------------------------------------------------------

    def is_ready(self) -> bool:
        if not self.ready:
            h = self.ledger.inclusion_height(self.viewer.pool_key)
            if h is not None and self.ledger.height >= h + self.cfg.confirmation_depth:
                self.ready = True
                self.report.startup_ticks = self.tick
        return self.ready

    def apply_churn(self) -> None:
        while self.churn and self.churn[0].tick <= self.tick:
            ev = self.churn.pop(0)
            if not self.is_ready() or self.viewer.done or self.pending_open is not None:
                log.info("tick %d: churn event %s ignored", self.tick, ev)
                continue
            src = None if ev.from_peer is None else self.names[ev.from_peer]
            dst = self.names[ev.to_peer]
            if (src is None or self.viewer.current == src) and dst in self.viewer.peers \
                    and dst not in self.viewer.blacklist and dst != self.viewer.current:
                self.connect(dst)

    def eligible(self, name: str) -> bool:
        return True

    def needs_switch(self) -> bool:
        v = self.viewer
        cur = v.current
        if cur is None or cur in v.blacklist or not self.cachers[cur].has_chunk(v.cursor):
            return True
        if not self.eligible(cur):
            return True
        auto = not self.cfg.churn_schedule and self.served_since_switch >= self.cfg.effective_rotation
        return auto and len(v.usable_peers()) > 1

    def viewer_step(self) -> None:
        v = self.viewer
        if v.done:
            self.after_stream()
            return
        if not self.is_ready():
            return
        if self.waiting():
            return
        if self.needs_switch():
            nxt = v.next_peer(self.last_peer, v.cursor, self.cachers, self.eligible)
            if nxt is None:
                fetch_from_cdn(v, v.cursor, self.chunks)
                return
            if nxt != v.current:
                self.connect(nxt)
                if self.waiting():
                    return
        self.exchange(self.cachers[v.current])

    def waiting(self) -> bool:
        return False

    def connect(self, to: str) -> None:
        before = self._tx_total()
        cold = to not in self.viewer.handshaked
        switch_peer(self.viewer, self.last_peer, self.cachers[to], self.ledger)
        self._record_switch(to, 0, 0, self._tx_total() - before, cold)

    def _record_switch(self, to: str, latency_blocks: int, stall: int, txs: int, cold: bool,
                       tick: Optional[int] = None) -> None:
        if self.last_peer is not None and self.last_peer != to:
            self.report.switch_events.append(SwitchEvent(
                self.tick if tick is None else tick, self.last_peer, to, latency_blocks, stall, txs, cold))
            self.report.stalled_ticks += stall
        self.last_peer = to
        self.served_since_switch = 0

    def exchange(self, cacher: CacherNode) -> None:
        v = self.viewer
        try:
            outcome = request_chunk(v, cacher, v.cursor)
        except DepositExhausted:
            fetch_from_cdn(v, v.cursor, self.chunks)
            return
        self._after_exchange(cacher, outcome)

    def _after_exchange(self, cacher: CacherNode, outcome: ExchangeOutcome) -> None:
        self.report.payments_issued += outcome is not ExchangeOutcome.PAYMENT_REJECTED
        if outcome is ExchangeOutcome.DELIVERED:
            self.served_since_switch += 1
        else:
            log.info("tick %d: %s -> %s, blacklisting", self.tick, cacher.name, outcome.value)
            on_undelivered(self.viewer, cacher.name)

    def after_stream(self) -> None:
        if self.colluders and self.drain is None:
            pool = self.ledger.pool(self.viewer.pool_key)
            if pool.status is PoolStatus.ACTIVE and pool.remaining_deposit > 0:
                self.drain = collude_full_drain(self.viewer, self.colluders[0], self.ledger, self.nonce())
        if self.cfg.withdraw_at_expiry and self.withdraw_tx is None:
            pool = self.ledger.pool(self.viewer.pool_key)
            if pool.status is PoolStatus.ACTIVE and self.ledger.height + 1 >= pool.expiry_height:
                tx = OnChainTx.signed(self.viewer.keys, WithdrawExpired(pool.key))
                self.withdraw_tx = self.ledger.submit(tx)

    # -- cachers ----------------------------------------------------------------

    def _settle_window(self):
        pool = self.ledger.pools.get(self.viewer.pool_key)
        if pool is None:
            return None
        next_h = self.ledger.height + 1
        if pool.status is not PoolStatus.ACTIVE or next_h >= pool.expiry_height:
            return None
        return next_h + self.cfg.expiry_margin >= pool.expiry_height

    def cacher_step(self) -> None:
        if not self.ready:
            return
        expiring = self._settle_window()
        if expiring is None:
            return
        key = self.viewer.pool_key
        fee = self.cfg.settlement_gas_fee
        for name in self.names:
            c = self.cachers[name]
            if c.behavior is Behavior.COLLUDING or key not in c.peer_state:
                continue
            if c.settlement_due(key, fee, expiring):
                self.ledger.submit(c.take_settlement(key))
                self.viewer.view.note_settlement(c.address)

    def finished(self) -> bool:
        if not self.viewer.done or self.ledger.mempool:
            return False
        if self.colluders and self.drain is None:
            pool = self.ledger.pool(self.viewer.pool_key)
            if pool.status is PoolStatus.ACTIVE and pool.remaining_deposit > 0:
                return False
        pool = self.ledger.pool(self.viewer.pool_key)
        if pool.status is not PoolStatus.ACTIVE:
            return True
        if self._settle_window() is not None:
            fee = self.cfg.settlement_gas_fee
            for c in self.cachers.values():
                if c.behavior is not Behavior.COLLUDING and c.unsettled(pool.key) > fee:
                    return False
        if self.cfg.withdraw_at_expiry:
            return False
        return True

    # -- report -----------------------------------------------------------------

    def creator_position(self, address: bytes) -> int:
        lg = self.ledger
        return lg.balance(address) + sum(p.locked for p in lg.pools.values() if p.creator == address)

    def finalize(self) -> MetricsReport:
        r, lg, v = self.report, self.ledger, self.viewer
        r.ticks = self.tick
        r.final_height = lg.height
        for _, tx, rc in lg.committed_txs():
            r.onchain_tx_count += 1
            kind = tx.kind.name.lower()
            r.onchain_tx_by_type[kind] = r.onchain_tx_by_type.get(kind, 0) + 1
            if not rc.applied:
                r.rejected_tx_count += 1
            elif getattr(rc.outcome, "kind", None) is SettlementKind.SLASH_TRIGGERED:
                r.slash_events += 1
            if rc.applied and tx.kind.name in ("SETTLEMENT", "CHANNEL_CLOSE"):
                r.settlements += 1
        r.burned_fees, r.burned_slashes = lg.burned_fees, lg.burned_slashes
        self.finalize_viewer(r)
        return r

    def finalize_viewer(self, r: MetricsReport) -> None:
        lg, v = self.ledger, self.viewer
        r.chunks_delivered = len(v.received) - v.from_cdn
        r.chunks_from_cdn = v.from_cdn
        r.chunks_paid_undelivered = v.paid_undelivered
        r.viewer_loss = v.undelivered_loss
        r.blacklist = sorted(v.blacklist)
        value = self.manifest.chunk_value * len(v.received)
        r.creator_net_value = value + self.creator_position(v.address) - self.genesis[v.address]
        for name, c in self.cachers.items():
            r.per_peer_earnings[name] = lg.balance(c.address) - self.genesis[c.address]
        if self.colluders:
            r.coalition_net_value = r.creator_net_value + sum(r.per_peer_earnings[c.name] for c in self.colluders)
        if v.pool_key is not None and v.pool_key in lg.pools:
            r.pool_status = lg.pools[v.pool_key].status.value
        r.extras["payments_promised"] = v.view.total_promised


def _create_pool(cfg: ScenarioConfig, manifest: ChunkManifest, nonce: int):
    from ..transactions import CreatePool
    return CreatePool(manifest.resource_id, cfg.deposit, cfg.collateral, cfg.duration, nonce)


class ChannelSimulation(Simulation):
    """Baseline: one payment channel per peer, opened on first use."""

    def start(self) -> None:
        self.ready = True

    def is_ready(self) -> bool:
        return True

    def eligible(self, name: str) -> bool:
        ch = self.channels.get(name)
        return ch is None or ch.funder_balance >= self.cfg.chunk_value

    def waiting(self) -> bool:
        if self.pending_open is None:
            return False
        t0, prev, to = self.pending_open
        ch = self.channels[to]
        if refresh(ch, self.ledger) is not ChannelPhase.OPEN:
            return True
        latency = self.ledger.height - ch.open_height
        self.pending_open = None
        if prev is None:
            self.report.startup_ticks = self.tick
            self.last_peer = to
            self.served_since_switch = 0
        else:
            self._record_switch(to, latency, self.tick - t0, 1, True, tick=t0)
        return False

    def connect(self, to: str) -> None:
        v = self.viewer
        v.current = to
        if to in self.channels:
            self._record_switch(to, 0, 0, 0, False)
            return
        self.channels[to] = open_channel(self.ledger, v.keys, self.cachers[to].keys,
                                         self.cfg.effective_channel_capacity, self.nonce())
        self.pending_open = (self.tick, self.last_peer, to)

    def exchange(self, cacher: CacherNode) -> None:
        v = self.viewer
        pay(self.channels[cacher.name], self.cfg.chunk_value, v.keys, cacher.keys)
        data = cacher.serve(v.cursor)
        if data is not None and verify_chunk(self.manifest, v.cursor, data):
            v.store(v.cursor, data)
            outcome = ExchangeOutcome.DELIVERED
        else:
            v.paid_undelivered += 1
            v.undelivered_loss += self.cfg.chunk_value
            outcome = ExchangeOutcome.PAID_UNDELIVERED
        self._after_exchange(cacher, outcome)

    def after_stream(self) -> None:
        fee = self.cfg.settlement_gas_fee
        for name, ch in self.channels.items():
            if ch.status is ChannelPhase.CLOSED or refresh(ch, self.ledger) is not ChannelPhase.OPEN:
                continue
            closer = self.cachers[name].keys if ch.counterparty_balance > fee else self.viewer.keys
            close_channel(self.ledger, ch, closer)

    def cacher_step(self) -> None:
        pass

    def finished(self) -> bool:
        if not self.viewer.done or self.ledger.mempool:
            return False
        return all(ch.status is ChannelPhase.CLOSED for ch in self.channels.values())


class SemiTrustSimulation(Simulation):
    """Platform-funded pool: one sharer serves ``num_peers`` viewers and
    redeems their receipts through the Payment Service."""

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        seed = cfg.random_seed
        self.platform = _keys(seed, "platform")
        self.tracker = Tracker(_keys(seed, "tracker"))
        self.sharer = self.cachers[self.names[0]]
        self.wallets = [ReceiptWallet(_keys(seed, f"viewer{i}")) for i in range(cfg.num_peers)]
        self.cursors = [0] * cfg.num_peers
        budget = cfg.num_peers * cfg.chunk_count * cfg.chunk_value if cfg.live_top_up else 0
        genesis = {self.platform.address: cfg.deposit + cfg.collateral + budget,
                   self.sharer.address: cfg.peer_initial_balance}
        self.ledger = Ledger(genesis, LedgerConfig(cfg.settlement_gas_fee, cfg.confirmation_depth))
        self.genesis = dict(genesis)
        self.service = PaymentService(self.platform, self.tracker.public_key, self.ledger,
                                      self.manifest.resource_id)
        group = [self.sharer.address] + [w.keys.address for w in self.wallets]
        certs = self.tracker.group_peers(group, sharers=[self.sharer.address])
        self.certs = {(c.sharer, c.receiver): c for c in certs}
        self.latest_ap = None
        self.submitted = 0
        self.pending_settlement: Optional[bytes] = None
        self.delivered = 0
        self.top_ups = 0

    def start(self) -> None:
        self.viewer.pool_key = self.service.create_pool(
            self.cfg.deposit, self.cfg.collateral, self.cfg.duration,
            resource_value=self.manifest.total_value)

    def produce_block(self) -> None:
        super().produce_block()
        if self.cfg.live_top_up and self.ready and self.service.maybe_top_up() is not None:
            self.top_ups += 1

    def is_ready(self) -> bool:
        was = self.ready
        if super().is_ready() and not was:
            total = self.manifest.total_value
            expect = HandshakeExpectations(self.manifest.resource_id, total, total + 1)
            verdict = verify_handshake(self.service.handshake(), expect, self.ledger)
            if not verdict.ok:
                raise SimulationError(f"sharer rejected the platform handshake: {verdict.value}")
        return self.ready

    @property
    def total_deliveries(self) -> int:
        return self.cfg.num_peers * self.cfg.chunk_count

    def step(self) -> None:
        if self.is_ready() and self.delivered < self.total_deliveries:
            k = self.delivered % self.cfg.num_peers
            wallet, idx = self.wallets[k], self.cursors[k]
            data = self.sharer.serve(idx)
            if not verify_chunk(self.manifest, idx, data):
                raise SimulationError("sharer served a corrupt chunk")
            receipt = wallet.next_receipt(self.sharer.address, self.manifest.resource_id, self.cfg.chunk_value)
            self.latest_ap = self.service.submit_receipt(receipt, self.certs.get((self.sharer.address, wallet.keys.address)))
            self.cursors[k] += 1
            self.delivered += 1
        self.sharer_settle()

    def sharer_settle(self) -> None:
        if self.latest_ap is None:
            return
        expiring = self._settle_window()
        if expiring is None:
            return
        if self.pending_settlement is not None and self.ledger.receipt(self.pending_settlement) is None:
            return
        unsettled = self.latest_ap.transfer_amount - self.submitted
        if not self.cfg.settlement_policy.due(unsettled, self.cfg.settlement_gas_fee, expiring):
            return
        pool = self.ledger.pool(self.viewer.pool_key)
        if self.cfg.live_top_up and unsettled > pool.remaining_deposit and not expiring:
            return  # wait for the platform to refill
        ap = self.service.accumulated_for(self.sharer.address)
        self.pending_settlement = settle_accumulated(self.ledger, ap, self.sharer.keys, self.service)
        self.submitted = ap.transfer_amount

    def finished(self) -> bool:
        if self.delivered < self.total_deliveries or self.ledger.mempool:
            return False
        pool = self.ledger.pool(self.viewer.pool_key)
        if pool.status is not PoolStatus.ACTIVE or self._settle_window() is None:
            return True
        unsettled = self.latest_ap.transfer_amount - self.submitted
        return unsettled <= self.cfg.settlement_gas_fee

    def finalize_viewer(self, r: MetricsReport) -> None:
        lg = self.ledger
        r.chunks_delivered = self.delivered
        r.payments_issued = self.delivered
        r.creator_net_value = self.creator_position(self.platform.address) - self.genesis[self.platform.address]
        r.per_peer_earnings[self.sharer.name] = lg.balance(self.sharer.address) - self.genesis[self.sharer.address]
        pool = lg.pools[self.viewer.pool_key]
        r.pool_status = pool.status.value
        r.extras.update({
            "transfer_amount": self.latest_ap.transfer_amount if self.latest_ap else 0,
            "top_ups": self.top_ups,
            "remaining_deposit": pool.remaining_deposit,
        })


_MODES = {"pool": Simulation, "channel": ChannelSimulation, "semi_trust": SemiTrustSimulation}


def run_scenario(cfg: ScenarioConfig) -> MetricsReport:
    cfg.validate()
    return _MODES[cfg.mode](cfg).run()


def compare_modes(cfg: ScenarioConfig) -> ComparisonReport:
    pool = run_scenario(cfg.with_overrides(mode="pool"))
    channel = run_scenario(cfg.with_overrides(mode="channel"))
    return ComparisonReport(pool, channel)


def collusion_attack_config(base: ScenarioConfig) -> ScenarioConfig:
    """Creator colludes with the last peer: all honest peers stream and then
    the colluder drains the remaining deposit before they settle."""
    return base.with_overrides(mode="pool", adversaries=[(base.num_peers - 1, Behavior.COLLUDING)],
                               num_peers=max(base.num_peers, 2))


def withholding_attack_config(base: ScenarioConfig, k: int = 3) -> ScenarioConfig:
    """The first ``k`` peers take payment and never deliver. The deposit is
    raised to cover the stream plus one lost chunk per withholder."""
    n = max(base.num_peers, k + 1)
    deposit = max(base.deposit, (base.chunk_count + k) * base.chunk_value)
    return base.with_overrides(
        mode="pool", num_peers=n, deposit=deposit, collateral=max(base.collateral, deposit + 1),
        adversaries=[(i, Behavior.WITHHOLDING) for i in range(k)])


ATTACKS = {"collusion": collusion_attack_config, "withholding": withholding_attack_config}
# names used by the published command line interface
ATTACK_ALIASES = {"theorem1": "collusion", "theorem2": "withholding"}
