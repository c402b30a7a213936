#!/usr/bin/env python3
"""
The learning agent: perceive, recall, anticipate, act, learn.

A FableAgent owns the per-run mutable state (connectivity and gains,
episodic memory, causal ledger). The property maps are shared and frozen, so
several agents can run different object orders from the same trained maps.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from causal_engine import (
    CausalLedger,
    ChannelKnowledge,
    Rule,
    RuleConfig,
    RuleInputs,
    apply_rule_table,
    choose_object,
    delta_contradiction,
    delta_property,
    evaluate_rules,
    merge_rules,
    predict_reward,
)
from episodic_memory import EpisodicNetwork, RecallHit, build_episode, object_cue
from fable_config import merge_defaults
from fable_models import CHANNELS, Channel, MapActivation, ObjectSpec
from fable_world import WorldState, displaced_volume, drop
from feature_maps import PropertyMap, bottom_up_activate, encode_feature
from hubs import (
    ActionGoal,
    BodyState,
    DualDyadConnectivity,
    HubCode,
    bind_object,
    code_distance,
    code_for,
    differing_channels,
    reproject_code,
    retro_activate,
)

logger = logging.getLogger(__name__)


@dataclass
class EpisodeRecord:
    episode: int
    object_id: str
    predicted_cm3: Optional[float]
    observed_cm3: float
    oracle_cm3: float
    abs_error_cm3: Optional[float]
    rules: Dict[Channel, Rule]
    ledger: Dict[Channel, ChannelKnowledge]
    reachable: bool
    encoded: bool
    recalled: List[str] = field(default_factory=list)
    body_before: BodyState = BodyState.GOAL_UNREACHABLE
    body_after: BodyState = BodyState.GOAL_FAILED


class FableAgent:
    def __init__(self, maps: Mapping[Channel, PropertyMap], config: Optional[Dict] = None, seed: int = 0):
        self.config = merge_defaults(config)
        self.maps = dict(maps)
        self.grid_size = self.maps[Channel.COLOR].grid_size
        self.temperature = float(self.config["som"]["temperature"])
        self.rules = RuleConfig.from_config(self.config["rules"])
        self.conn = DualDyadConnectivity.from_config(self.config["hub"], seed)
        self.memory = EpisodicNetwork.from_config(self.config["memory"])
        self.ledger = CausalLedger()
        self.known_objects: Dict[str, ObjectSpec] = {}
        self.episodes_run = 0

    # ------------------------------------------------------------ perception

    def perceive(self, obj: ObjectSpec) -> Dict[Channel, MapActivation]:
        """Bottom-up activity on every gain-positive map; other channels stay silent."""
        activations = {}
        for channel in CHANNELS:
            if self.conn.gains[channel] > 0:
                feature = encode_feature(obj, channel)
                activations[channel] = bottom_up_activate(self.maps[channel], feature, self.temperature)
            else:
                activations[channel] = MapActivation.empty(channel, self.grid_size)
        return activations

    def _reproject(self, code: HubCode) -> HubCode:
        return reproject_code(code, self.conn)

    def _distance(self, a: HubCode, b: HubCode) -> float:
        return code_distance(a, b, self.conn)

    def _changed(self, code: HubCode, hit: RecallHit) -> List[Channel]:
        return differing_channels(code, self._reproject(hit.episode.object_code), self.conn)

    def recall(self, code: HubCode) -> List[RecallHit]:
        return self.memory.recall(object_cue(code), reproject=self._reproject, distance=self._distance)

    def _support(self, code: HubCode, hits: Sequence[RecallHit]) -> List[RecallHit]:
        """Hits that differ from ``code`` only on Dominant channels, or every hit when none do."""
        dominant = set(self.ledger.dominant_channels())
        if not dominant:
            return list(hits)
        close = [hit for hit in hits if set(self._changed(code, hit)) <= dominant]
        return close or list(hits)

    def _predict(self, obj: ObjectSpec, code: HubCode, hits: Sequence[RecallHit]) -> Optional[float]:
        support = self._support(code, hits)
        return predict_reward(obj, support, self.ledger, self.known_objects, self.rules.kernel_regularizer)

    def anticipate(self, obj: ObjectSpec) -> Tuple[List[RecallHit], Optional[float]]:
        """Recall and prediction for ``obj`` without binding it or touching memory."""
        code = code_for(self.perceive(obj), self.conn)
        hits = self.recall(code)
        return hits, self._predict(obj, code, hits)

    def predict(self, obj: ObjectSpec) -> Optional[float]:
        return self.anticipate(obj)[1]

    def choose(self, candidates: Sequence[ObjectSpec]) -> int:
        return choose_object(candidates, self.predict)

    # -------------------------------------------------------------- learning

    def _novel_dominant_value(self, code: HubCode, hits: Sequence[RecallHit]) -> bool:
        dominant = self.ledger.dominant_channels()
        if not dominant:
            return False
        return not any(set(dominant).isdisjoint(self._changed(code, hit)) for hit in hits)

    def _comparisons(
        self,
        bottom_up: Mapping[Channel, MapActivation],
        code: HubCode,
        hits: Sequence[RecallHit],
        predicted: Optional[float],
        observed: float,
    ) -> List[Dict[Channel, Rule]]:
        """One rule table per recalled episode that differs from ``code`` in at most one channel.

        Before any channel is Dominant each episode is judged against its own
        reward; afterwards against the anticipated one.
        """
        anticipating = bool(self.ledger.dominant_channels())
        tables = []
        for hit in hits:
            changed = self._changed(code, hit)
            if len(changed) > 1:
                logger.debug("Episode %d differs in %s; not comparable", hit.episode.meta.index, changed)
                continue
            expected = predicted if anticipating else hit.episode.meta.reward_cm3
            top_down = retro_activate(hit.episode.object_code, self.conn, self.grid_size)
            inputs = RuleInputs(
                delta_property={
                    ch: delta_property(bottom_up[ch], top_down[ch], self.rules.property_grid_threshold)
                    for ch in CHANNELS
                },
                delta_contradiction=delta_contradiction(
                    expected,
                    observed,
                    self.rules.contradiction_tolerance,
                    self.rules.contradiction_floor_cm3,
                ),
                expected_reward=expected,
                observed_reward=observed,
            )
            tables.append(evaluate_rules(inputs, self.ledger))
        return tables

    def run_episode(self, world: WorldState, obj: ObjectSpec) -> EpisodeRecord:
        index = self.episodes_run + 1
        self.known_objects[obj.id] = obj

        bottom_up = self.perceive(obj)
        code = bind_object(bottom_up, self.conn)
        before = BodyState.IDLE if world.target_reachable else BodyState.GOAL_UNREACHABLE
        hits = self.recall(code)
        predicted = self._predict(obj, code, hits)
        novel = self._novel_dominant_value(code, hits)

        result = drop(world, obj)
        after = BodyState.GOAL_REALIZED if result.reachable else BodyState.GOAL_FAILED
        oracle = displaced_volume(obj, world.water_density)

        tables = self._comparisons(bottom_up, code, hits, predicted, result.observed_cm3)
        outcome = apply_rule_table(
            merge_rules(tables), self.ledger, self.conn,
            recalled_any=bool(tables), config=self.rules, novel_dominant_value=novel,
        )
        if outcome.encode_flag:
            self.memory.encode(build_episode(
                body=before,
                object_code=code,
                action=ActionGoal.DROP,
                reward_cm3=result.observed_cm3,
                object_id=obj.id,
                index=index,
                n_rows=self.memory.rows,
                outcome=after,
            ))

        self.episodes_run = index
        record = EpisodeRecord(
            episode=index,
            object_id=obj.id,
            predicted_cm3=predicted,
            observed_cm3=result.observed_cm3,
            oracle_cm3=oracle,
            abs_error_cm3=None if predicted is None else abs(predicted - oracle),
            rules=dict(outcome.tags),
            ledger={ch: copy.copy(self.ledger[ch]) for ch in CHANNELS},
            reachable=result.reachable,
            encoded=outcome.encode_flag,
            recalled=[hit.episode.meta.object_id for hit in hits],
            body_before=before,
            body_after=after,
        )
        logger.info(
            "Episode %d %s (%s): predicted=%s observed=%.2f recalled=%s encoded=%s",
            index, obj.id, obj.describe(),
            "none" if predicted is None else f"{predicted:.2f}",
            result.observed_cm3, record.recalled, record.encoded,
        )
        return record
