import numpy as np
import pytest

from conftest import daily_series
from oracles import SyntheticPathSpec, brute_crossings, brute_ema, make_path
from quantbench.envs.trading import Action, TradingEnv, TradingEnvConfig, episode_return, run_actions
from quantbench.strategies import (
    MacdParams,
    TopkParams,
    buy_and_hold,
    ema,
    macd_signals,
    threshold_rule,
    topk_dropout,
)


class TestBuyAndHold:
    def test_lengths(self):
        assert buy_and_hold(1) == [Action.BUY]
        assert buy_and_hold(3) == [Action.BUY, Action.HOLD, Action.HOLD]

    def test_through_env_without_fees(self):
        closes = [100.0, 95.0, 104.0, 121.0]
        env = TradingEnv(TradingEnvConfig(series=daily_series("A", closes), fee_rate=0.0))
        _, records = run_actions(env, buy_and_hold(len(closes)))
        assert episode_return(records) == pytest.approx(121.0 / 100.0 - 1.0, abs=1e-9)

    def test_length_validation(self):
        with pytest.raises(ValueError):
            buy_and_hold(0)


class TestEma:
    def test_constant_series(self):
        assert np.allclose(ema([5.0] * 10, 4), 5.0)

    def test_span_one_is_identity(self):
        x = [1.0, 4.0, 2.0, 8.0]
        assert np.array_equal(ema(x, 1), np.array(x))

    def test_hand_recursion(self):
        out = ema([1.0, 2.0], 3)  # alpha = 0.5
        assert out.tolist() == [1.0, 1.5]

    def test_matches_oracle(self, rng):
        xs = [rng.uniform(10, 20) for _ in range(50)]
        assert np.allclose(ema(xs, 7), brute_ema(xs, 7), atol=1e-12)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            ema([], 3)


class TestMacd:
    def test_constant_prices_all_hold(self):
        dif, dea, actions = macd_signals([50.0] * 60)
        assert np.allclose(dif, 0.0) and np.allclose(dea, 0.0)
        assert set(actions) == {Action.HOLD}

    def test_tent_path_one_buy_then_one_sell(self):
        closes = make_path(SyntheticPathSpec("tent", 120, step=1.0))
        _, _, actions = macd_signals(closes)
        trades = [a for a in actions if a is not Action.HOLD]
        assert trades == [Action.BUY, Action.SELL]
        assert actions.index(Action.BUY) < actions.index(Action.SELL)

    def test_crossings_match_brute_force_scan(self):
        params = MacdParams()
        for seed in range(25):
            closes = make_path(SyntheticPathSpec("geometric-random", 150, seed=seed))
            dif, dea, actions = macd_signals(closes, params)
            want = brute_crossings(list(dif), list(dea), params.slow)
            got = [(t, "up" if a is Action.BUY else "down")
                   for t, a in enumerate(actions) if a is not Action.HOLD]
            assert got == want, f"seed {seed}"

    def test_warm_up_forced_hold(self):
        closes = make_path(SyntheticPathSpec("geometric-random", 80, seed=3))
        _, _, actions = macd_signals(closes)
        assert all(a is Action.HOLD for a in actions[:26])

    def test_position_consistency_automaton(self):
        for seed in range(10):
            closes = make_path(SyntheticPathSpec("geometric-random", 200, seed=seed))
            _, _, actions = macd_signals(closes)
            holding = False
            for a in actions:
                if a is Action.BUY:
                    assert not holding
                    holding = True
                elif a is Action.SELL:
                    assert holding
                    holding = False

    def test_too_short_series(self):
        with pytest.raises(ValueError, match="at least 26"):
            macd_signals([1.0] * 20)

    def test_active_from_defers_trading(self):
        closes = make_path(SyntheticPathSpec("geometric-random", 150, seed=8))
        _, _, actions = macd_signals(closes, active_from=100)
        assert all(a is Action.HOLD for a in actions[:100])


class TestThresholdRule:
    def test_strict_inequalities(self):
        assert threshold_rule([0.01], tau=0.01) == [Action.HOLD]
        assert threshold_rule([0.0], tau=0.0) == [Action.HOLD]

    def test_mapping(self):
        actions = threshold_rule([0.02, -0.02], tau=0.01)
        assert actions == [Action.BUY, Action.SELL]

    def test_monotone_in_tau(self, rng):
        preds = [rng.uniform(-0.1, 0.1) for _ in range(200)]
        lo = threshold_rule(preds, tau=0.01)
        hi = threshold_rule(preds, tau=0.05)
        for a, b in zip(lo, hi):
            if a is Action.HOLD:
                assert b is Action.HOLD

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            threshold_rule([0.1], tau=-0.1)


def scores_panel(rows):
    scores = np.array(rows, dtype=float)
    return scores, np.ones(scores.shape, dtype=bool)


class TestTopkDropout:
    def test_static_scores_never_rotate(self):
        scores, mask = scores_panel([[3.0] * 5, [2.0] * 5, [1.0] * 5])
        out = topk_dropout(scores, mask, ["A", "B", "C"], TopkParams(k=2, d=1))
        assert all(held == frozenset({"A", "B"}) for held, _ in out)

    def test_worked_swap_case(self):
        scores, mask = scores_panel([[3.0, 1.0], [2.0, 2.0], [1.0, 3.0]])
        out = topk_dropout(scores, mask, ["A", "B", "C"], TopkParams(k=2, d=1))
        assert out[0][0] == frozenset({"A", "B"})
        assert out[1][0] == frozenset({"B", "C"})

    def test_weights_equal_and_sum_to_one(self):
        scores, mask = scores_panel([[3.0], [2.0], [1.0]])
        out = topk_dropout(scores, mask, ["A", "B", "C"], TopkParams(k=2, d=1))
        _, weights = out[0]
        assert weights[0] == 0.0
        assert abs(sum(weights) - 1.0) < 1e-12
        assert sorted(weights[1:], reverse=True)[:2] == [0.5, 0.5]

    def test_monotone_transform_invariance(self, rng):
        n, t = 6, 8
        scores = np.array([[rng.gauss(0, 1) for _ in range(t)] for _ in range(n)])
        mask = np.ones(scores.shape, dtype=bool)
        symbols = [f"S{i}" for i in range(n)]
        params = TopkParams(k=3, d=1)
        base = [held for held, _ in topk_dropout(scores, mask, symbols, params)]
        transformed = np.exp(scores * 2.0) + 5.0
        same = [held for held, _ in topk_dropout(transformed, mask, symbols, params)]
        assert base == same

    def test_tie_break_lexicographic(self):
        scores, mask = scores_panel([[1.0], [1.0], [1.0]])
        out = topk_dropout(scores, mask, ["C", "A", "B"], TopkParams(k=2, d=1))
        assert out[0][0] == frozenset({"A", "B"})

    def test_insufficient_scorable_assets(self):
        scores = np.array([[1.0], [2.0], [3.0]])
        mask = np.array([[True], [False], [False]])
        with pytest.raises(ValueError, match="only 1 scorable"):
            topk_dropout(scores, mask, ["A", "B", "C"], TopkParams(k=2, d=1))

    def test_d_swaps_per_period(self):
        # all holdings outranked: d limits the rotation to d swaps per period
        scores, mask = scores_panel([
            [5.0, 1.0], [4.0, 2.0], [3.0, 9.0], [2.0, 8.0], [1.0, 7.0],
        ])
        out = topk_dropout(scores, mask, ["A", "B", "C", "D", "E"],
                           TopkParams(k=2, d=1))
        assert out[0][0] == frozenset({"A", "B"})
        # one swap only: worst holding A (score 1) out, best outsider C in
        assert out[1][0] == frozenset({"B", "C"})

    def test_determinism(self, rng):
        scores = np.array([[rng.gauss(0, 1) for _ in range(5)] for _ in range(4)])
        mask = np.ones(scores.shape, dtype=bool)
        args = (scores, mask, ["A", "B", "C", "D"], TopkParams(k=2, d=2))
        assert topk_dropout(*args) == topk_dropout(*args)
