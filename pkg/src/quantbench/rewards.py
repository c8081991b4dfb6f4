"""Group-normalized advantages, the clipped surrogate objective, and the
rule-based format/accuracy/composite reward functions.

Reward functions are total: any input string maps to 0 or 1, never an
exception.  Advantage normalization uses population std with a small floor;
groups below the floor get all-zero advantages.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np

STD_FLOOR = 1e-8
VALID_ACTIONS = ("BUY", "HOLD", "SELL")
ANSWER_TYPES = ("choice", "multi_choice", "numeric", "text")


@dataclass(frozen=True)
class Group:
    """Rewards of the G sampled outcomes for one prompt."""

    rewards: tuple[float, ...]

    def __init__(self, rewards: Sequence[float]):
        object.__setattr__(self, "rewards", tuple(float(r) for r in rewards))
        if not self.rewards:
            raise ValueError("group must hold at least one reward")
        if not all(math.isfinite(r) for r in self.rewards):
            raise ValueError("rewards must be finite")

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class AdvantageSet:
    """One normalized advantage per sampled outcome (broadcast over tokens)."""

    advantages: tuple[float, ...]


@dataclass(frozen=True)
class ClipConfig:
    epsilon: float = 0.2
    kl_coeff: float = 0.0  # KL term off by default; switchable

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.kl_coeff < 0:
            raise ValueError("kl_coeff must be >= 0")


@dataclass(frozen=True)
class RewardWeights:
    format_weight: float = 0.1      # reasoning-stage format weight
    accuracy_weight: float = 0.9    # reasoning-stage accuracy weight
    action_format_weight: float = 0.1  # trading-stage format weight

    def __post_init__(self) -> None:
        for name in ("format_weight", "accuracy_weight", "action_format_weight"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def group_advantages(group: Group, std_floor: float = STD_FLOOR) -> AdvantageSet:
    """(r_i - mean) / population std; all zeros when std is below the floor."""
    r = np.array(group.rewards)
    std = float(r.std(ddof=0))
    if std < std_floor:
        return AdvantageSet((0.0,) * len(group))
    mean = float(r.mean())
    return AdvantageSet(tuple(float((x - mean) / std) for x in group.rewards))


def grpo_objective(
    ratios: Sequence[Sequence[float]],
    advantages: Sequence[float],
    cfg: ClipConfig = ClipConfig(),
    kl: Optional[Sequence[Sequence[float]]] = None,
) -> float:
    """Token-averaged clipped surrogate.

    ``ratios`` holds one row of importance ratios per sampled outcome and
    ``advantages`` one scalar per outcome, broadcast over its tokens:

        (1/G) sum_i (1/|o_i|) sum_t [ min(r * A, clip(r, 1-eps, 1+eps) * A)
                                      - kl_coeff * kl_{i,t} ]
    """
    if len(ratios) != len(advantages):
        raise ValueError("one advantage per ratio row required")
    if not ratios:
        raise ValueError("empty group")
    if kl is not None and (
        len(kl) != len(ratios) or any(len(a) != len(b) for a, b in zip(kl, ratios))
    ):
        raise ValueError("kl values must match the ratio row structure")

    lo, hi = 1.0 - cfg.epsilon, 1.0 + cfg.epsilon
    total = 0.0
    for i, row in enumerate(ratios):
        if not row:
            raise ValueError(f"outcome {i} has no tokens")
        adv = advantages[i]
        inner = 0.0
        for t, r in enumerate(row):
            if r <= 0:
                raise ValueError(f"importance ratio must be > 0, got {r}")
            clipped = min(max(r, lo), hi)
            inner += min(r * adv, clipped * adv)
            if kl is not None:
                inner -= cfg.kl_coeff * kl[i][t]
        total += inner / len(row)
    return total / len(ratios)


_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"
_BOXED = "\\boxed{"


def _scan_boxed(text: str, start: int) -> tuple[str, int]:
    """Return (content, index past closing brace) for the box opening at
    ``start``; raises on unbalanced braces."""
    depth = 1
    i = start + len(_BOXED)
    begin = i
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[begin:i], i + 1
        i += 1
    raise ValueError("unbalanced braces in boxed expression")


def extract_boxed_answer(text: str) -> Optional[str]:
    """Contents of the first boxed expression; None when no box is present.

    None signals extraction failure, distinct from an empty answer ("").
    """
    start = text.find(_BOXED)
    if start == -1:
        return None
    content, _ = _scan_boxed(text, start)
    return content


def format_reward_reasoning(text: str) -> int:
    """1 iff the text is exactly one think block followed by exactly one boxed
    answer, with only whitespace outside them."""
    if text.count(_THINK_OPEN) != 1 or text.count(_THINK_CLOSE) != 1:
        return 0
    if text.count(_BOXED) != 1:
        return 0
    open_at = text.find(_THINK_OPEN)
    close_at = text.find(_THINK_CLOSE)
    box_at = text.find(_BOXED)
    if not open_at < close_at < box_at:
        return 0
    if text[:open_at].strip():
        return 0
    between = text[close_at + len(_THINK_CLOSE):box_at]
    if between.strip():
        return 0
    try:
        _, end = _scan_boxed(text, box_at)
    except ValueError:
        return 0
    if text[end:].strip():
        return 0
    return 1


def format_reward_action(text: str) -> int:
    """1 iff the reasoning format holds and the boxed content is exactly one
    of BUY / HOLD / SELL (case-sensitive)."""
    if not format_reward_reasoning(text):
        return 0
    return 1 if extract_boxed_answer(text) in VALID_ACTIONS else 0


_NUMERIC_STRIP = re.compile(r"[,$\s]")


def _parse_number(text: str) -> Optional[float]:
    s = _NUMERIC_STRIP.sub("", text)
    percent = s.endswith("%")
    if percent:
        s = s[:-1]
    try:
        value = float(s)
    except ValueError:
        return None
    return value / 100.0 if percent else value


def _letters(text: str) -> frozenset[str]:
    standalone = re.findall(r"\b[A-Za-z]\b", text)
    if standalone:
        return frozenset(ch.casefold() for ch in standalone)
    # fall back to contiguous letters ("AC" means A and C)
    return frozenset(ch.casefold() for ch in text if ch.isalpha())


def accuracy_reward(extracted: Optional[str], gold: str, answer_type: str) -> int:
    """Binary rule-based correctness by declared answer type.

    choice: case-insensitive single-letter match; multi_choice: letter-set
    equality; numeric: parse both (tolerating %, commas, $) at 1e-4 relative
    tolerance; text: whitespace-collapsed casefolded match.  Unparseable
    inputs score 0, never raise.
    """
    if extracted is None:
        return 0
    if answer_type == "choice":
        a = extracted.strip().strip(".,()").casefold()
        b = gold.strip().strip(".,()").casefold()
        return 1 if len(a) == 1 and a.isalpha() and a == b else 0
    if answer_type == "multi_choice":
        got, want = _letters(extracted), _letters(gold)
        return 1 if got and got == want else 0
    if answer_type == "numeric":
        a, b = _parse_number(extracted), _parse_number(gold)
        if a is None or b is None:
            return 0
        return 1 if math.isclose(a, b, rel_tol=1e-4, abs_tol=1e-12) else 0
    if answer_type == "text":
        norm = lambda s: " ".join(s.split()).casefold()
        return 1 if norm(extracted) == norm(gold) else 0
    raise ValueError(f"unknown answer_type {answer_type!r}")


def composite_reasoning_reward(
    format_reward: float, accuracy: float, w: RewardWeights = RewardWeights()
) -> float:
    """format_weight * R_f + accuracy_weight * R_a."""
    return w.format_weight * format_reward + w.accuracy_weight * accuracy


def composite_trading_reward(
    format_reward: float, trading_return: float, w: RewardWeights = RewardWeights()
) -> float:
    """gamma * R_f + (1 - gamma) * R_t with gamma = action_format_weight."""
    g = w.action_format_weight
    return g * format_reward + (1.0 - g) * trading_return


# --- reasoning dataset records --------------------------------------------

@dataclass(frozen=True)
class ReasoningRecord:
    question: str
    gold: str
    answer_type: str
    language: str = "en"

    def __post_init__(self) -> None:
        if self.answer_type not in ANSWER_TYPES:
            raise ValueError(f"unknown answer_type {self.answer_type!r}")
        if self.language not in ("en", "zh"):
            raise ValueError(f"unknown language {self.language!r}")


def reasoning_template(language: str) -> str:
    """System-prompt text instructing the think/boxed output structure."""
    name = {"en": "reasoning_en.txt", "zh": "reasoning_zh.txt"}[language]
    return (resources.files("quantbench.templates") / name).read_text("utf-8").strip()


def parse_reasoning_jsonl(data: bytes | str) -> list[ReasoningRecord]:
    """One record per line: question, gold answer, answer_type, language."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for line_no, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(ReasoningRecord(
                question=str(raw["question"]),
                gold=str(raw["gold"]),
                answer_type=str(raw["answer_type"]),
                language=str(raw.get("language", "en")),
            ))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
    return records


def reasoning_prompt(record: ReasoningRecord) -> str:
    return f"{reasoning_template(record.language)}\n\n{record.question}"


def score_reasoning_output(
    text: str, record: ReasoningRecord, w: RewardWeights = RewardWeights()
) -> float:
    """Composite reward of one model output against a dataset record."""
    fmt = format_reward_reasoning(text)
    try:
        extracted = extract_boxed_answer(text)
    except ValueError:
        extracted = None
    acc = accuracy_reward(extracted, record.gold, record.answer_type)
    return composite_reasoning_reward(fmt, acc, w)
