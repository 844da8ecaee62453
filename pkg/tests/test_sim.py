import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micropool.nodes import Behavior, SettlementPolicy
from micropool.sim import (
    ATTACK_ALIASES,
    ChurnEvent,
    ScenarioConfig,
    collusion_attack_config,
    compare_modes,
    run_scenario,
    withholding_attack_config,
)
from micropool.sim.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_pool_mode_counts():
    r = run_scenario(ScenarioConfig())
    assert r.onchain_tx_count == 11
    assert r.onchain_tx_by_type == {"create_pool": 1, "settlement": 10}
    assert r.chunks_delivered == 20 and r.chunks_from_cdn == 0
    assert all(v == 9 for v in r.per_peer_earnings.values())
    assert r.creator_net_value == 0 and r.conservation_violations == 0
    assert r.chunks_delivered + r.chunks_paid_undelivered <= r.payments_issued


def test_channel_mode_counts():
    r = run_scenario(ScenarioConfig(mode="channel"))
    assert r.onchain_tx_by_type == {"channel_open": 10, "channel_close": 10}
    assert all(e.latency_blocks == 6 and e.onchain_txs == 1 for e in r.switch_events)
    assert all(e.stall_ticks >= 6 * 10 for e in r.switch_events)
    assert r.stalled_ticks >= 9 * 60


def test_pool_switches_are_free():
    r = run_scenario(ScenarioConfig())
    assert len(r.switch_events) == 9
    assert all(e.latency_blocks == 0 and e.onchain_txs == 0 and e.stall_ticks == 0 for e in r.switch_events)
    assert r.stalled_ticks == 0


def test_compare_single_peer_ratio_one():
    c = compare_modes(ScenarioConfig(num_peers=1))
    assert c.tx_ratio == 1


def test_churn_schedule_followed():
    cfg = ScenarioConfig(num_peers=3, chunk_count=12, deposit=60, collateral=90,
                         churn_schedule=[ChurnEvent(75, 0, 1), ChurnEvent(80, 1, 2)])
    r = run_scenario(cfg)
    assert [(e.tick, e.from_peer, e.to_peer) for e in r.switch_events] == [(75, "peer0", "peer1"), (80, "peer1", "peer2")]


def test_channel_churn_reuses_warm_channel():
    # the first event lands while peer0's channel is still confirming and is ignored
    cfg = ScenarioConfig(mode="channel", num_peers=2, chunk_count=20, channel_capacity=100,
                         churn_schedule=[ChurnEvent(5, 0, 1), ChurnEvent(75, 0, 1), ChurnEvent(145, 1, 0)])
    r = run_scenario(cfg)
    cold = [e for e in r.switch_events if e.cold]
    warm = [e for e in r.switch_events if not e.cold]
    assert len(cold) == 1 and cold[0].latency_blocks == 6
    assert len(warm) == 1 and warm[0].latency_blocks == 0 and warm[0].onchain_txs == 0


def test_collusion_attack():
    r = run_scenario(collusion_attack_config(ScenarioConfig()))
    assert r.pool_status == "slashed" and r.slash_events == 1
    assert r.creator_net_value == -50 and r.burned_slashes == 150
    assert r.coalition_net_value == -50 - 1


def test_withholding_attack():
    r = run_scenario(withholding_attack_config(ScenarioConfig()))
    assert r.viewer_loss == 15 and len(r.blacklist) == 3
    assert r.chunks_delivered == 20 and r.chunks_paid_undelivered == 3


def test_withdraw_at_expiry():
    cfg = ScenarioConfig(num_peers=2, chunk_count=4, deposit=40, collateral=50, withdraw_at_expiry=True)
    r = run_scenario(cfg)
    assert r.onchain_tx_by_type["withdraw_expired"] == 1 and r.pool_status == "closed"
    assert r.onchain_tx_count <= cfg.num_peers + 1 + 1
    assert r.creator_net_value == 0


def test_semi_trust_runs():
    cfg = ScenarioConfig(mode="semi_trust", num_peers=2, chunk_count=4, deposit=20, collateral=30,
                         live_top_up=True, settlement_policy=SettlementPolicy.parse("lazy:20"))
    r = run_scenario(cfg)
    assert r.extras["transfer_amount"] == 40 and r.extras["remaining_deposit"] == 20
    assert r.slash_events == 0 and r.conservation_violations == 0
    assert r.per_peer_earnings["peer0"] == 40 - r.onchain_tx_by_type["settlement"]


def test_deterministic_bytes():
    cfg = ScenarioConfig(num_peers=4, chunk_count=9, deposit=45, collateral=50, random_seed=3)
    assert run_scenario(cfg).to_json() == run_scenario(cfg).to_json()
    assert run_scenario(cfg).to_csv() == run_scenario(cfg).to_csv()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 12), st.integers(2, 6), st.integers(1, 12), st.integers(0, 2),
       st.sampled_from(["at_expiry", "every_chunk", "lazy:12"]), st.booleans())
def test_pool_tx_bound_and_conservation(n, m, a, b, fee, policy, withdraw):
    cfg = ScenarioConfig(num_peers=n, chunk_count=m, chunk_value=a, deposit=m * a, collateral=m * a + 1,
                         block_interval=b, settlement_gas_fee=fee, withdraw_at_expiry=withdraw,
                         settlement_policy=SettlementPolicy.parse(policy), duration=40)
    r = run_scenario(cfg)
    assert r.conservation_violations == 0 and r.conservation_checks == r.final_height
    assert r.chunks_delivered == m
    if policy == "at_expiry":
        earners = sum(1 for v in r.per_peer_earnings.values() if v > 0)
        assert r.onchain_tx_by_type.get("settlement", 0) == earners
        assert r.onchain_tx_count == 1 + earners + int(withdraw)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 5), st.integers(6, 15))
def test_channel_stall_accounting(n, m):
    cfg = ScenarioConfig(mode="channel", num_peers=n, chunk_count=m, deposit=5 * m, collateral=5 * m + 1)
    r = run_scenario(cfg)
    for e in r.switch_events:
        if e.cold:
            assert e.latency_blocks == 6 and e.stall_ticks >= 60
    assert r.onchain_tx_count == 2 * len({e.to_peer for e in r.switch_events} | {"peer0"})


# -- CLI ----------------------------------------------------------------------

def test_cli_run_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", str(SCENARIOS / "default.scn"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["onchain_tx_count"] == 11


def test_cli_seed_and_csv(capsys):
    assert main(["run", str(SCENARIOS / "default.scn"), "--seed", "4", "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("metric,value\n") and "random_seed,4" in text


def test_cli_compare(capsys):
    assert main(["compare", str(SCENARIOS / "default.scn")]) == 0
    assert json.loads(capsys.readouterr().out)["tx_ratio"] == "20/11"


@pytest.mark.parametrize("attack,key,value", [("collusion", "creator_net_value", -50),
                                              ("withholding", "viewer_loss", 15)])
def test_cli_attacks(capsys, attack, key, value):
    assert main(["attack", attack, str(SCENARIOS / "default.scn")]) == 0
    assert json.loads(capsys.readouterr().out)[key] == value


def test_cli_attack_aliases(capsys):
    for alias, name in ATTACK_ALIASES.items():
        assert main(["attack", alias, str(SCENARIOS / "default.scn")]) == 0
        via_alias = capsys.readouterr().out
        main(["attack", name, str(SCENARIOS / "default.scn")])
        assert capsys.readouterr().out == via_alias


def test_cli_invalid_config_exit_code(capsys, tmp_path):
    assert main(["run", str(SCENARIOS / "bad_collateral.scn")]) == 2
    assert "collateral" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.scn")]) == 2


@pytest.mark.parametrize("name", ["default", "churn", "collusion", "withholding", "policy_every_chunk", "semi_trust"])
def test_shipped_scenarios_run(name, capsys):
    assert main(["run", str(SCENARIOS / f"{name}.scn")]) == 0
