"""Smoke test for the marketforge Python bindings.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o target/wheels
    pip install --force-reinstall target/wheels/marketforge-*.whl
"""

import math
import pathlib

import marketforge as mf

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check_dataset():
    ds = mf.Dataset.gbm(["AAA", "BBB"], 300, seed=3, mu=0.1, sigma=0.2)
    assert len(ds) == 300 and ds.tickers == ["AAA", "BBB"]
    ds = ds.with_indicator("macd").with_indicator("rsi", window=14).with_turbulence(60)
    assert {"macd_12_26", "rsi_14", "turbulence"} <= set(ds.columns), ds.columns
    closes = ds.closes()
    assert len(closes) == 300 and len(closes[0]) == 2
    assert all(v >= 0.0 for v in ds.column("rsi_14", 0))
    return ds


def check_env_and_agents(ds):
    env = mf.Env(ds.slice(0, 200), kind="portfolio", initial_capital=10_000.0, cost_rate=0.001)
    obs = env.reset(0)
    assert len(obs) == env.obs_dim
    obs, reward, done, info = env.step([0.0] * env.action_dim)
    assert math.isfinite(reward) and not done
    assert abs(info["value_after"] - env.value) < 1e-9

    trading = mf.Env(ds, kind="trading", hmax=50)
    trading.reset(1)
    _, _, _, info = trading.step([1.0, -1.0])
    assert info["trades"][1] == 0.0, "cannot sell shares that are not held"

    for agent in (
        mf.Agent.dqn(env, seed=1, batch_size=16),
        mf.Agent.a2c(env, seed=1),
        mf.Agent.random(env, seed=1),
    ):
        out = agent.train(env, 300, seed=2)
        assert out["steps"] == 300
        result = agent.backtest(env, seed=0)
        assert len(result["values"]) == 200
        assert "sharpe" in result["metrics"]
        blob = agent.save()
        agent.load(blob)


def check_liquidation():
    params = dict(
        total_shares=1e6, n_periods=5, period_length=1.0, initial_price=50.0,
        volatility=0.0, permanent_impact=0.0, temporary_impact=0.0,
        fixed_cost=0.0, risk_aversion=0.0, n_agents=1,
    )
    env = mf.LiquidationEnv(**params)
    env.reset(0)
    done = False
    while not done:
        _, _, done = env.step([1.0])
    assert abs(env.shortfall) < 1e-6


def check_optimizers_and_metrics():
    w = mf.mean_variance([0.1, 0.05], [[0.04, 0.0], [0.0, 0.01]], risk_aversion=2.0)
    assert abs(sum(w) - 1.0) < 1e-9 and min(w) >= 0.0
    w = mf.min_variance([[0.04, 0.0], [0.0, 0.01]])
    assert abs(w[0] - 0.2) < 1e-6 and abs(w[1] - 0.8) < 1e-6
    p = mf.simplex_projection([0.5, 0.5, 0.5])
    assert all(abs(x - 1 / 3) < 1e-12 for x in p)
    m = mf.metrics([100.0, 110.0, 99.0, 120.0])
    assert abs(m["max_drawdown"] + 0.1) < 1e-12, m


def check_ensemble():
    report = mf.run_ensemble(str(ROOT / "configs" / "ensemble_gbm.toml"))
    table = mf.render_table(report, "GBM ensemble")
    assert "ensemble" in table.lower()
    print(table)


if __name__ == "__main__":
    ds = check_dataset()
    check_env_and_agents(ds)
    check_liquidation()
    check_optimizers_and_metrics()
    check_ensemble()
    print("smoke test passed")
