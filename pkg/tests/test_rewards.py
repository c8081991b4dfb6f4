import math

import pytest

from quantbench.rewards import (
    ClipConfig,
    Group,
    RewardWeights,
    accuracy_reward,
    composite_reasoning_reward,
    composite_trading_reward,
    extract_boxed_answer,
    format_reward_action,
    format_reward_reasoning,
    group_advantages,
    grpo_objective,
    parse_reasoning_jsonl,
    reasoning_prompt,
    score_reasoning_output,
)


class TestGroupAdvantages:
    def test_all_equal_rewards_give_zeros(self):
        assert group_advantages(Group([1.0, 1.0, 1.0])).advantages == (0.0, 0.0, 0.0)

    def test_two_point_group(self):
        assert group_advantages(Group([0.0, 2.0])).advantages == (-1.0, 1.0)

    def test_advantages_center_at_zero(self, rng):
        for _ in range(50):
            rewards = [rng.uniform(-5, 5) for _ in range(rng.randint(1, 12))]
            adv = group_advantages(Group(rewards)).advantages
            assert abs(sum(adv) / len(adv)) < 1e-12

    def test_unit_population_std_when_above_floor(self, rng):
        rewards = [rng.uniform(-5, 5) for _ in range(8)]
        adv = group_advantages(Group(rewards)).advantages
        mean = sum(adv) / len(adv)
        std = math.sqrt(sum((a - mean) ** 2 for a in adv) / len(adv))
        assert abs(std - 1.0) < 1e-9

    def test_shift_invariance_bit_exact_tolerance(self, rng):
        rewards = [rng.uniform(0, 1) for _ in range(6)]
        a = group_advantages(Group(rewards)).advantages
        b = group_advantages(Group([r + 7.0 for r in rewards])).advantages
        assert all(abs(x - y) < 1e-12 for x, y in zip(a, b))

    def test_scale_invariance(self, rng):
        rewards = [rng.uniform(-1, 1) for _ in range(6)]
        a = group_advantages(Group(rewards)).advantages
        b = group_advantages(Group([r * 3.0 for r in rewards])).advantages
        assert all(abs(x - y) < 1e-12 for x, y in zip(a, b))

    def test_near_constant_group_floored_to_zero(self):
        adv = group_advantages(Group([1.0, 1.0 + 1e-12])).advantages
        assert adv == (0.0, 0.0)

    def test_non_finite_reward_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            Group([1.0, float("nan")])

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            Group([])


class TestGrpoObjective:
    def test_unit_ratios_reduce_to_mean_advantage(self):
        ratios = [[1.0, 1.0], [1.0, 1.0, 1.0]]
        advantages = [0.4, -0.2]
        got = grpo_objective(ratios, advantages)
        assert got == pytest.approx((0.4 - 0.2) / 2, abs=1e-15)

    def test_clip_caps_positive_advantage(self):
        got = grpo_objective([[2.0]], [1.0], ClipConfig(epsilon=0.2))
        assert got == pytest.approx(1.2, abs=1e-15)

    def test_negative_advantage_stays_pessimistic(self):
        got = grpo_objective([[2.0]], [-1.0], ClipConfig(epsilon=0.2))
        assert got == pytest.approx(-2.0, abs=1e-15)

    def test_huge_epsilon_equals_unclipped_mean(self, rng):
        ratios = [[rng.uniform(0.2, 3.0) for _ in range(rng.randint(1, 6))]
                  for _ in range(4)]
        advantages = [rng.uniform(-2, 2) for _ in range(4)]
        unclipped = sum(
            sum(r * a for r in row) / len(row)
            for row, a in zip(ratios, advantages)
        ) / len(ratios)
        got = grpo_objective(ratios, advantages, ClipConfig(epsilon=1e9))
        assert got == pytest.approx(unclipped, abs=1e-9)

    def test_monotone_when_tightening_epsilon(self):
        ratios = [[2.0, 1.5], [1.6]]
        advantages = [1.0, 0.5]
        values = [
            grpo_objective(ratios, advantages, ClipConfig(epsilon=eps))
            for eps in (1.0, 0.5, 0.2, 0.1)
        ]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_kl_term_subtracts(self):
        base = grpo_objective([[1.0]], [1.0], ClipConfig(epsilon=0.2, kl_coeff=0.0),
                              kl=[[0.3]])
        with_kl = grpo_objective([[1.0]], [1.0], ClipConfig(epsilon=0.2, kl_coeff=0.5),
                                 kl=[[0.3]])
        assert base == pytest.approx(1.0)
        assert with_kl == pytest.approx(1.0 - 0.5 * 0.3, abs=1e-15)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            grpo_objective([[1.0]], [1.0, 2.0])
        with pytest.raises(ValueError):
            grpo_objective([[1.0]], [1.0], kl=[[0.1, 0.2]])

    def test_non_positive_ratio_rejected(self):
        with pytest.raises(ValueError, match="ratio"):
            grpo_objective([[0.0]], [1.0])


class TestFormatRewardReasoning:
    def test_template_example_passes(self):
        assert format_reward_reasoning("<think>x</think>\\boxed{BUY}") == 1

    def test_whitespace_outside_is_fine(self):
        assert format_reward_reasoning("  <think>x</think>\n\\boxed{A}\n") == 1

    def test_missing_think_block(self):
        assert format_reward_reasoning("\\boxed{BUY}") == 0

    def test_content_between_sections(self):
        assert format_reward_reasoning("<think>a</think>extra\\boxed{B}") == 0

    def test_multiple_think_blocks(self):
        assert format_reward_reasoning(
            "<think>a</think><think>b</think>\\boxed{C}") == 0

    def test_multiple_boxes(self):
        assert format_reward_reasoning(
            "<think>a</think>\\boxed{A}\\boxed{B}") == 0

    def test_trailing_content(self):
        assert format_reward_reasoning("<think>a</think>\\boxed{A} and more") == 0

    def test_wrong_order(self):
        assert format_reward_reasoning("\\boxed{A}<think>a</think>") == 0

    def test_unbalanced_braces_scores_zero(self):
        assert format_reward_reasoning("<think>a</think>\\boxed{A") == 0

    def test_totality_on_fuzz(self, rng):
        alphabet = "<think></{}\\boxed ABC"
        for _ in range(300):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
            assert format_reward_reasoning(text) in (0, 1)
            assert format_reward_action(text) in (0, 1)


class TestExtractBoxedAnswer:
    def test_simple(self):
        assert extract_boxed_answer("\\boxed{42}") == "42"

    def test_nested_braces(self):
        assert extract_boxed_answer("\\boxed{{a}}") == "{a}"

    def test_missing_box_is_none_not_empty(self):
        assert extract_boxed_answer("no box here") is None
        assert extract_boxed_answer("\\boxed{}") == ""

    def test_unbalanced_raises(self):
        with pytest.raises(ValueError, match="unbalanced"):
            extract_boxed_answer("\\boxed{a")

    def test_first_box_wins(self):
        assert extract_boxed_answer("\\boxed{first}\\boxed{second}") == "first"


class TestFormatRewardAction:
    def test_valid_actions(self):
        for action in ("BUY", "HOLD", "SELL"):
            assert format_reward_action(f"<think>x</think>\\boxed{{{action}}}") == 1

    def test_lowercase_rejected(self):
        assert format_reward_action("<think>x</think>\\boxed{buy}") == 0

    def test_extra_content_in_box_rejected(self):
        assert format_reward_action("<think>x</think>\\boxed{BUY 10}") == 0


class TestAccuracyReward:
    def test_choice_case_insensitive(self):
        assert accuracy_reward("b", "B", "choice") == 1
        assert accuracy_reward("b.", "B", "choice") == 1
        assert accuracy_reward("c", "B", "choice") == 0
        assert accuracy_reward("bc", "B", "choice") == 0

    def test_multi_choice_set_equality(self):
        assert accuracy_reward("A,C", "C, A", "multi_choice") == 1
        assert accuracy_reward("AC", "c,a", "multi_choice") == 1
        assert accuracy_reward("A,A,C", "A,C", "multi_choice") == 1
        assert accuracy_reward("A,B", "A,C", "multi_choice") == 0

    def test_numeric_percent_and_symbols(self):
        assert accuracy_reward("12.5%", "0.125", "numeric") == 1
        assert accuracy_reward("$1,234.56", "1234.56", "numeric") == 1
        assert accuracy_reward("0.1251", "0.125", "numeric") == 0

    def test_numeric_relative_tolerance(self):
        assert accuracy_reward("100.005", "100.0", "numeric") == 1
        assert accuracy_reward("100.05", "100.0", "numeric") == 0

    def test_numeric_unparseable_scores_zero(self):
        assert accuracy_reward("around twelve", "12", "numeric") == 0

    def test_text_normalization(self):
        assert accuracy_reward("  Hello   World ", "hello world", "text") == 1
        assert accuracy_reward("hello", "world", "text") == 0

    def test_extraction_failure_scores_zero(self):
        assert accuracy_reward(None, "B", "choice") == 0

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError):
            accuracy_reward("a", "a", "essay")


class TestReasoningRecords:
    LINES = "\n".join([
        '{"question": "2+2?", "gold": "4", "answer_type": "numeric"}',
        '{"question": "Pick one", "gold": "B", "answer_type": "choice", "language": "en"}',
        '{"question": "选择", "gold": "A", "answer_type": "choice", "language": "zh"}',
    ])

    def test_parse_records(self):
        records = parse_reasoning_jsonl(self.LINES)
        assert len(records) == 3
        assert records[0].answer_type == "numeric"
        assert records[2].language == "zh"

    def test_bad_record_names_line(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_reasoning_jsonl('{"question": "q", "gold": "g", "answer_type": "text"}\n{"gold": "g"}')

    def test_prompt_uses_language_template(self):
        records = parse_reasoning_jsonl(self.LINES)
        en = reasoning_prompt(records[1])
        zh = reasoning_prompt(records[2])
        assert en.startswith("You FIRST think")
        assert en.endswith("Pick one")
        assert "内部独白" in zh

    def test_score_reasoning_output_composite(self):
        record = parse_reasoning_jsonl(self.LINES)[0]
        assert score_reasoning_output("<think>sum</think>\\boxed{4}", record) == 1.0
        assert score_reasoning_output("<think>sum</think>\\boxed{5}", record) == \
            pytest.approx(0.1, abs=1e-15)
        assert score_reasoning_output("\\boxed{4}", record) == pytest.approx(0.9, abs=1e-15)
        assert score_reasoning_output("garbage", record) == 0.0


class TestCompositeRewards:
    def test_reasoning_defaults(self):
        assert composite_reasoning_reward(1, 1) == pytest.approx(1.0, abs=1e-15)
        assert composite_reasoning_reward(1, 0) == pytest.approx(0.1, abs=1e-15)
        assert composite_reasoning_reward(0, 0) == 0.0

    def test_trading_defaults(self):
        assert composite_trading_reward(1, 0.0) == pytest.approx(0.1, abs=1e-15)
        assert composite_trading_reward(0, 0.05) == pytest.approx(0.045, abs=1e-15)

    def test_trading_gamma_zero_passes_through(self):
        w = RewardWeights(action_format_weight=0.0)
        assert composite_trading_reward(1, 0.07, w) == pytest.approx(0.07, abs=1e-15)

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            RewardWeights(format_weight=1.5)
