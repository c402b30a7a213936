#!/usr/bin/env python3
"""
Causal learning rules and reward anticipation.

Two signals drive learning after every drop:
  delta property       a channel's bottom-up winner sits far from the winner
                       a recalled episode retro-activates
  delta contradiction  the observed reward misses the anticipated one

Per channel they select one of four rules:

    dP  dC   rule          effect
    T   F    elimination   gain 0, status Irrelevant
    T   T    growth        gain 1, status Dominant
    F   T    uncertainty   gain x0.8, status LikelyIrrelevant, certainty +0.25
    F   F    status quo    nothing

Dominant and Irrelevant are final. An Irrelevant channel always reports the
tag "none"; a Dominant one reports "growth" when a comparison confirms it
(dP and dC) and "none" otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence

from fable_models import CHANNELS, Channel, MapActivation, ObjectSpec

logger = logging.getLogger(__name__)


class CausalStatus(str, Enum):
    UNKNOWN = "Unknown"
    DOMINANT = "Dominant"
    IRRELEVANT = "Irrelevant"
    LIKELY_IRRELEVANT = "LikelyIrrelevant"


ABSORBING = (CausalStatus.DOMINANT, CausalStatus.IRRELEVANT)


class Rule(str, Enum):
    ELIMINATION = "elimination"
    GROWTH = "growth"
    UNCERTAINTY = "uncertainty"
    STATUS_QUO = "status_quo"
    NONE = "none"


# Merge order when several comparisons disagree about one channel.
RULE_PRIORITY = (Rule.GROWTH, Rule.ELIMINATION, Rule.UNCERTAINTY, Rule.STATUS_QUO, Rule.NONE)


@dataclass(frozen=True)
class RuleConfig:
    property_grid_threshold: int = 1
    contradiction_tolerance: float = 0.2
    contradiction_floor_cm3: float = 10.0
    uncertainty_gain_factor: float = 0.8
    certainty_step: float = 0.25
    certainty_cap: float = 0.99
    kernel_regularizer: float = 1.0

    @classmethod
    def from_config(cls, rules_cfg: Mapping) -> "RuleConfig":
        return cls(**{key: rules_cfg[key] for key in cls.__dataclass_fields__ if key in rules_cfg})


@dataclass
class ChannelKnowledge:
    status: CausalStatus = CausalStatus.UNKNOWN
    certainty: float = 0.0


@dataclass
class CausalLedger:
    entries: Dict[Channel, ChannelKnowledge] = field(
        default_factory=lambda: {ch: ChannelKnowledge() for ch in CHANNELS}
    )

    def __getitem__(self, channel: Channel) -> ChannelKnowledge:
        return self.entries[Channel(channel)]

    def is_absorbing(self, channel: Channel) -> bool:
        return self[channel].status in ABSORBING

    def dominant_channels(self) -> List[Channel]:
        return [ch for ch in CHANNELS if self[ch].status is CausalStatus.DOMINANT]

    def snapshot(self) -> Dict[str, Dict[str, object]]:
        return {
            ch.value: {"status": self[ch].status.value, "certainty": round(self[ch].certainty, 4)}
            for ch in CHANNELS
        }


@dataclass
class RuleInputs:
    delta_property: Dict[Channel, bool]
    delta_contradiction: bool
    expected_reward: Optional[float]
    observed_reward: float


@dataclass
class RuleOutcome:
    tags: Dict[Channel, Rule]
    encode_flag: bool


# ============================================================================
# Signals
# ============================================================================

def delta_property(bottom_up: MapActivation, top_down: MapActivation, threshold: int = 1) -> bool:
    if bottom_up.channel is not top_down.channel:
        raise ValueError(
            f"channel mismatch: {bottom_up.channel.value} vs {top_down.channel.value}"
        )
    if top_down.is_empty or bottom_up.winner is None:
        return False
    (r1, c1), (r2, c2) = bottom_up.winner, top_down.winner
    return max(abs(r1 - r2), abs(c1 - c2)) > threshold


def delta_contradiction(
    expected: Optional[float],
    observed: float,
    tolerance: float = 0.2,
    floor_cm3: float = 10.0,
) -> bool:
    if observed < 0:
        raise ValueError(f"observed reward must be >= 0, got {observed}")
    if expected is None:
        return False
    return abs(expected - observed) / max(observed, floor_cm3) > tolerance


def select_rule(dp: bool, dc: bool) -> Rule:
    if dp and not dc:
        return Rule.ELIMINATION
    if dp and dc:
        return Rule.GROWTH
    if dc:
        return Rule.UNCERTAINTY
    return Rule.STATUS_QUO


def evaluate_rules(inputs: RuleInputs, ledger: CausalLedger) -> Dict[Channel, Rule]:
    """One rule per channel for a single comparison.

    A Dominant channel can only confirm itself (growth on dP and dC). When a
    Dominant channel changed, it accounts for the contradiction and the other
    channels see none.
    """
    dc = inputs.delta_contradiction and inputs.expected_reward is not None
    dominant = ledger.dominant_channels()
    explained = dc and any(inputs.delta_property.get(ch) for ch in dominant)
    table = {}
    for ch in CHANNELS:
        dp = bool(inputs.delta_property.get(ch))
        if ch in dominant:
            table[ch] = Rule.GROWTH if dp and dc else Rule.NONE
        elif ledger.is_absorbing(ch):
            table[ch] = Rule.NONE
        else:
            table[ch] = select_rule(dp, dc and not explained)
    return table


def merge_rules(tables: Sequence[Mapping[Channel, Rule]]) -> Dict[Channel, Rule]:
    """Combine per-comparison rule tables, strongest rule per channel."""
    if not tables:
        return {ch: Rule.STATUS_QUO for ch in CHANNELS}
    merged = {}
    for ch in CHANNELS:
        merged[ch] = min((table[ch] for table in tables), key=RULE_PRIORITY.index)
    return merged


# ============================================================================
# Rule application
# ============================================================================

def apply_rule_table(
    table: Mapping[Channel, Rule],
    ledger: CausalLedger,
    conn,
    recalled_any: bool,
    config: Optional[RuleConfig] = None,
    novel_dominant_value: bool = False,
) -> RuleOutcome:
    """Apply one rule per channel to the ledger and the connectivity gains in place.

    ``recalled_any`` is false when no recalled episode could be compared;
    ``novel_dominant_value`` marks an object whose value on a Dominant
    channel no recalled episode shares. Either one, or any growth, asks for
    the episode to be encoded.
    """
    config = config or RuleConfig()
    tags: Dict[Channel, Rule] = {}
    for ch in CHANNELS:
        rule = table.get(ch, Rule.STATUS_QUO)
        knowledge = ledger[ch]
        if ledger.is_absorbing(ch):
            # growth on a Dominant channel confirms it; status and gain stay put
            confirmed = rule is Rule.GROWTH and knowledge.status is CausalStatus.DOMINANT
            tags[ch] = Rule.GROWTH if confirmed else Rule.NONE
            if confirmed:
                logger.debug("growth rule confirms %s (gain %.2f)", ch.value, conn.gains[ch])
            continue
        if rule is Rule.ELIMINATION:
            conn.set_gain(ch, 0.0)
            knowledge.status, knowledge.certainty = CausalStatus.IRRELEVANT, 1.0
        elif rule is Rule.GROWTH:
            conn.set_gain(ch, 1.0)
            knowledge.status, knowledge.certainty = CausalStatus.DOMINANT, 1.0
        elif rule is Rule.UNCERTAINTY:
            conn.set_gain(ch, conn.gains[ch] * config.uncertainty_gain_factor)
            knowledge.status = CausalStatus.LIKELY_IRRELEVANT
            knowledge.certainty = min(knowledge.certainty + config.certainty_step, config.certainty_cap)
        elif rule is Rule.NONE:
            rule = Rule.STATUS_QUO
        tags[ch] = rule
        if rule is not Rule.STATUS_QUO:
            logger.info("%s rule on %s -> %s (gain %.2f)", rule.value, ch.value, knowledge.status.value, conn.gains[ch])

    grew = any(rule is Rule.GROWTH for rule in tags.values())
    encode_flag = (not recalled_any) or grew or novel_dominant_value
    return RuleOutcome(tags=tags, encode_flag=encode_flag)


def apply_rules(
    inputs: RuleInputs,
    ledger: CausalLedger,
    conn,
    recalled_any: bool = True,
    config: Optional[RuleConfig] = None,
) -> RuleOutcome:
    return apply_rule_table(evaluate_rules(inputs, ledger), ledger, conn, recalled_any, config)


# ============================================================================
# Anticipation
# ============================================================================

def channel_value(obj: ObjectSpec, channel: Channel):
    if channel is Channel.WEIGHT:
        return obj.weight_g
    if channel is Channel.SIZE:
        return obj.characteristic_length_cm
    if channel is Channel.COLOR:
        return obj.color
    return obj.shape


def channel_distance(a: ObjectSpec, b: ObjectSpec, channel: Channel) -> float:
    va, vb = channel_value(a, channel), channel_value(b, channel)
    if channel in (Channel.WEIGHT, Channel.SIZE):
        return abs(va - vb)
    return 0.0 if va == vb else 1.0


def predict_reward(
    target: ObjectSpec,
    recalled: Sequence,
    ledger: CausalLedger,
    objects: Mapping[str, ObjectSpec],
    regularizer: float = 1.0,
) -> Optional[float]:
    """Weighted average of recalled rewards.

    ``recalled`` holds recall hits (``.episode.meta`` and ``.score``).
    With nothing Dominant the match scores weight the rewards. With a single
    scalar Dominant channel, only the nearest recalled values on either side
    of the target take part, weighted 1/(|d| + regularizer). Any other
    Dominant set uses inverse distance over every hit.
    """
    if not recalled:
        return None
    if len(recalled) == 1:
        return recalled[0].episode.meta.reward_cm3

    rewards = [hit.episode.meta.reward_cm3 for hit in recalled]
    dominant = ledger.dominant_channels()
    if not dominant:
        weights = [hit.score for hit in recalled]
    elif len(dominant) == 1 and dominant[0] in (Channel.WEIGHT, Channel.SIZE):
        channel = dominant[0]
        target_value = channel_value(target, channel)
        values = [channel_value(objects[hit.episode.meta.object_id], channel) for hit in recalled]
        below = [v for v in values if v <= target_value]
        above = [v for v in values if v >= target_value]
        bracket = set()
        if below:
            bracket.add(max(below))
        if above:
            bracket.add(min(above))
        weights = [
            1.0 / (abs(v - target_value) + regularizer) if v in bracket else 0.0 for v in values
        ]
    else:
        weights = []
        for hit in recalled:
            source = objects[hit.episode.meta.object_id]
            distance = sum(channel_distance(target, source, ch) for ch in dominant)
            weights.append(1.0 / (distance + regularizer))

    total = sum(weights)
    if total <= 0:
        return None
    return sum(w * r for w, r in zip(weights, rewards)) / total


def choose_object(
    candidates: Sequence[ObjectSpec], anticipate: Callable[[ObjectSpec], Optional[float]]
) -> int:
    """Index of the object to try next: anything unpredicted first, else the largest anticipated reward."""
    if not candidates:
        raise ValueError("no candidates to choose from")
    predictions = [anticipate(obj) for obj in candidates]
    for index, prediction in enumerate(predictions):
        if prediction is None:
            return index
    best = 0
    for index, prediction in enumerate(predictions):
        if prediction > predictions[best]:
            best = index
    return best
