"""Smoke test for the `smg` extension module.

Build and install first:
    pip install --no-build-isolation ./crates/py
then run:
    python python/smoke_test.py
"""

import smg


def check_market():
    cfg = smg.MarketConfig("action", price=-1.9)
    m = smg.Market(cfg, 2, 2)
    assert m.space_size == smg.action_market_space_size(2, 2) == 6
    assert m.decode(0, 3) == (0, "offer", 1, 1)
    # agent 0 cooperates and buys D from agent 1, who defects
    rewards, trades = m.step([3, 1], [-1.0, 2.0])
    assert trades == [(1, 0)]
    assert abs(rewards[0] - 0.9) < 1e-12 and abs(rewards[1] - 0.1) < 1e-12
    assert abs(sum(rewards) - 1.0) < 1e-12

    sm = smg.Market(smg.MarketConfig("shareholder", dividend=1.0), 2, 2)
    assert sm.space_size == smg.shareholder_space_size(2, 2) == 8
    sell = 2  # env 0, sell
    buy_from_1 = 1  # env 0, buy from agent 1
    sm.step([buy_from_1, sell + 1], [0.0, 5.0])
    assert sm.shares() == [[False, True], [False, False]]

    r, b = smg.settle_balances([5.0, 0.0], [[0.0, 1.9], [0.0, 0.0]])
    assert abs(r[0] - 3.1) < 1e-12 and b == [[0.0, 0.0], [0.0, 0.0]]


def check_frontier():
    assert smg.pareto_frontier(0.0) == 3.0
    assert smg.pareto_frontier(1.5) == 1.5
    assert smg.pareto_frontier(3.0) == 3.0


def check_environment():
    cfg = smg.ExperimentConfig("smartfactory")
    cfg.set("market.kind", "shareholder")
    cfg.set("steps_per_episode", 20)
    env = smg.Environment(cfg, seed=3)
    assert env.n_actions == smg.shareholder_space_size(4, 5)
    assert len(env.observe(0)) == env.observation_len
    for _ in range(20):
        out = env.step([0] * env.n_agents)
        assert abs(sum(out["rewards"]) - sum(out["raw"])) < 1e-9
        if out["done"]:
            break
    assert out["done"]
    assert env.render()


def check_training():
    cfg = smg.ExperimentConfig("pd")
    cfg.set("market.kind", "action")
    cfg.set("market.price", -1.9)
    cfg.set("n_runs", 4)
    cfg.set("n_episodes", 2000)
    out = smg.run_experiment(cfg, jobs=2)
    stats = out["stats"]
    assert stats["n_runs"] == 4 and len(out["metrics"]) == 4
    assert stats["max_conservation_error"] <= 1e-9
    again = smg.ExperimentConfig.parse(cfg.echo())
    assert again.echo() == cfg.echo()

    run = smg.run_training(cfg, run_id=1)
    assert len(run["raw_returns"]) == 2000
    assert run["seed"] == stats["seeds"][1]["seed"]

    u, z, p = smg.rank_sum_test([1.1, 2.2, 3.3, 4.4, 5.5, 6.6], [4, 7, 8, 9, 10, 11])
    assert u == 3.0 and abs(p - 0.020240570577077482) < 1e-9


def check_errors():
    for bad in (
        lambda: smg.MarketConfig("barter"),
        lambda: smg.ExperimentConfig("chess"),
        lambda: smg.Market(smg.MarketConfig(), 2, 2).step([0], [1.0, 1.0]),
        lambda: smg.Market(smg.MarketConfig("action"), 2, 2).decode(0, 6),
    ):
        try:
            bad()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    check_market()
    check_frontier()
    check_environment()
    check_training()
    check_errors()
    print("smg smoke test ok")
