#!/usr/bin/env python3
"""
Scenario runner and CLI.

Runs the episode loop over each object order of a scenario, evaluates the
held-out probes after every episode (prediction only, never dropped) and
writes per-order CSV trajectories.

CLI modes:
  run             Run a scenario file, write episodes.csv / probes.csv per order
  probe-capacity  Store random episodes and measure cued recall accuracy
  replay-fable    Check the three-episode red/blue/light cylinder regression

Every mode prints one JSON object on stdout; logs go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from causal_engine import CausalStatus, Rule
from episodic_memory import EpisodicNetwork, capacity_probe
from fable_agent import EpisodeRecord, FableAgent
from fable_config import env_log_level, env_out_dir, env_seed, merge_defaults
from fable_models import CHANNELS, Channel, ObjectSpec, Shape
from fable_world import JarConfig, WorldState, displaced_volume
from feature_maps import PropertyMap, train_channel_maps
from scenario_parser import Scenario, parse_scenario

logger = logging.getLogger(__name__)

EPISODE_HEADER = (
    ["episode", "object_id", "predicted_cm3", "observed_cm3", "oracle_cm3", "abs_error_cm3"]
    + [f"rule_{ch.value}" for ch in CHANNELS]
    + [f"ledger_{ch.value}" for ch in CHANNELS]
    + [f"certainty_{ch.value}" for ch in CHANNELS]
    + ["reachable", "encoded"]
)
PROBE_HEADER = ["after_episode", "probe_id", "predicted_cm3", "oracle_cm3", "abs_error_cm3"]


@dataclass
class ProbeRecord:
    after_episode: int
    probe_id: str
    predicted_cm3: Optional[float]
    oracle_cm3: float

    @property
    def abs_error_cm3(self) -> Optional[float]:
        return None if self.predicted_cm3 is None else abs(self.predicted_cm3 - self.oracle_cm3)

    @property
    def scored_error_cm3(self) -> float:
        """Error for summary means; an unpredicted probe counts as predicting 0 cm3."""
        return self.oracle_cm3 if self.predicted_cm3 is None else abs(self.predicted_cm3 - self.oracle_cm3)


@dataclass
class ScenarioRun:
    order_index: int
    order: List[int]
    records: List[EpisodeRecord]
    probes: List[ProbeRecord] = field(default_factory=list)
    agent: Optional[FableAgent] = field(default=None, repr=False)

    @property
    def final_ledger(self) -> Dict[str, Dict[str, Any]]:
        return self.agent.ledger.snapshot() if self.agent else {}


# ============================================================================
# Running
# ============================================================================

def evaluate_probes(agent: FableAgent, probes: Sequence[ObjectSpec], after_episode: int, water_density: float) -> List[ProbeRecord]:
    return [
        ProbeRecord(
            after_episode=after_episode,
            probe_id=probe.id,
            predicted_cm3=agent.predict(probe),
            oracle_cm3=displaced_volume(probe, water_density),
        )
        for probe in probes
    ]


def run_scenario(
    scenario: Scenario,
    order_index: int,
    maps: Optional[Dict[Channel, PropertyMap]] = None,
    config: Optional[Dict] = None,
    seed: Optional[int] = None,
) -> ScenarioRun:
    """Fresh agent and jar, one pass over the chosen order."""
    cfg = merge_defaults(config)
    seed = scenario.seed if seed is None else seed
    objects = scenario.ordered_objects(order_index)
    if maps is None:
        maps = train_channel_maps(cfg["som"], seed)

    agent = FableAgent(maps, cfg, seed=seed)
    world = WorldState.from_jar(scenario.jar, noise_sigma=float(cfg["world"]["noise_sigma_cm3"]), seed=seed)
    run = ScenarioRun(order_index=order_index, order=list(scenario.orders[order_index]), records=[], agent=agent)
    for obj in objects:
        record = agent.run_episode(world, obj)
        run.records.append(record)
        run.probes.extend(evaluate_probes(agent, scenario.probes, record.episode, world.water_density))
    logger.info("Order %d finished: %s", order_index, json.dumps(run.final_ledger, sort_keys=True))
    return run


def mean_probe_error(probes: Sequence[ProbeRecord], after_episode: int, probe_ids: Optional[Sequence[str]] = None) -> Optional[float]:
    rows = [p for p in probes if p.after_episode == after_episode and (probe_ids is None or p.probe_id in probe_ids)]
    if not rows:
        return None
    return sum(p.scored_error_cm3 for p in rows) / len(rows)


def in_range_probe_ids(scenario: Scenario) -> List[str]:
    """Probes whose weight lies within the span of the scenario's object weights."""
    lo = min(obj.weight_g for obj in scenario.objects)
    hi = max(obj.weight_g for obj in scenario.objects)
    return [probe.id for probe in scenario.probes if lo <= probe.weight_g <= hi]


def relative_probe_error(probes: Sequence[ProbeRecord], after_episode: int, probe_ids: Sequence[str]) -> Optional[float]:
    rows = [p for p in probes if p.after_episode == after_episode and p.probe_id in probe_ids]
    oracle = sum(p.oracle_cm3 for p in rows)
    if not rows or oracle <= 0:
        return None
    return sum(p.scored_error_cm3 for p in rows) / oracle


# ============================================================================
# Reports
# ============================================================================

def _fmt(value: Optional[float], decimals: int) -> str:
    return "" if value is None else f"{value:.{decimals}f}"


def _flag(value: bool) -> str:
    return "true" if value else "false"


def emit_report(
    records: Sequence[EpisodeRecord],
    probes: Sequence[ProbeRecord],
    out_dir,
    decimals: int = 2,
) -> Dict[str, Path]:
    if not records:
        raise ValueError("no episode records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    episodes_path = out / "episodes.csv"
    with episodes_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EPISODE_HEADER)
        for rec in records:
            writer.writerow(
                [rec.episode, rec.object_id, _fmt(rec.predicted_cm3, decimals), _fmt(rec.observed_cm3, decimals),
                 _fmt(rec.oracle_cm3, decimals), _fmt(rec.abs_error_cm3, decimals)]
                + [rec.rules.get(ch, Rule.NONE).value for ch in CHANNELS]
                + [rec.ledger[ch].status.value for ch in CHANNELS]
                + [_fmt(rec.ledger[ch].certainty, decimals) for ch in CHANNELS]
                + [_flag(rec.reachable), _flag(rec.encoded)]
            )

    probes_path = out / "probes.csv"
    with probes_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROBE_HEADER)
        for probe in probes:
            writer.writerow([
                probe.after_episode, probe.probe_id, _fmt(probe.predicted_cm3, decimals),
                _fmt(probe.oracle_cm3, decimals), _fmt(probe.abs_error_cm3, decimals),
            ])
    return {"episodes_csv": episodes_path, "probes_csv": probes_path}


def run_command(
    scenario_path: str,
    order_index: Optional[int],
    out_dir: str,
    seed: Optional[int],
    config_json: Optional[str],
    snapshot: bool = False,
) -> Dict[str, Any]:
    cfg = merge_defaults(json.loads(config_json) if config_json else {})
    scenario = parse_scenario(scenario_path)
    seed = scenario.seed if seed is None else seed
    maps = train_channel_maps(cfg["som"], seed)
    indices = range(len(scenario.orders)) if order_index is None else [order_index]
    in_range = in_range_probe_ids(scenario)
    decimals = int(cfg["report"]["decimals"])

    orders = []
    for k in indices:
        run = run_scenario(scenario, k, maps=maps, config=cfg, seed=seed)
        order_dir = Path(out_dir) / f"order_{k}"
        paths = emit_report(run.records, run.probes, order_dir, decimals)
        last = run.records[-1].episode
        summary = {
            "order_index": k,
            "order": run.order,
            "final_ledger": run.final_ledger,
            "mean_probe_error_after_2": mean_probe_error(run.probes, 2) if last >= 2 else None,
            "mean_probe_error_final": mean_probe_error(run.probes, last),
            "relative_error_in_range": relative_probe_error(run.probes, last, in_range),
            **{key: str(path) for key, path in paths.items()},
        }
        if snapshot:
            summary["snapshot"] = str(run.agent.memory.save(order_dir / "memory.epimem"))
        orders.append(summary)
    return {"success": True, "scenario": scenario_path, "seed": seed, "orders": orders}


# ============================================================================
# Three-episode regression
# ============================================================================

def _twin_cylinder(obj_id: str, color: str, weight_g: float) -> ObjectSpec:
    return ObjectSpec(
        id=obj_id, color=color, shape=Shape.CYLINDER,
        dims={"radius_cm": 3.18, "height_cm": 11.5}, weight_g=weight_g,
    )


def replay_fable(seed: int = 42, config: Optional[Dict] = None) -> Dict[str, Any]:
    """Heavy red, heavy blue, then light red cylinder into the default jar."""
    cfg = merge_defaults(config)
    agent = FableAgent(train_channel_maps(cfg["som"], seed), cfg, seed=seed)
    world = WorldState.from_jar(JarConfig())
    e1 = agent.run_episode(world, _twin_cylinder("A", "red", 420))
    e2 = agent.run_episode(world, _twin_cylinder("B", "blue", 420))
    color_gain = agent.conn.gains[Channel.COLOR]
    e3 = agent.run_episode(world, _twin_cylinder("C", "red", 14))

    checks = [
        ("e1_predicted", None, e1.predicted_cm3),
        ("e1_observed", True, abs(e1.observed_cm3 - 365.3) <= 0.5),
        ("e1_reachable", True, e1.reachable),
        ("e1_encoded", True, e1.encoded),
        ("e2_predicted", True, e2.predicted_cm3 is not None and abs(e2.predicted_cm3 - 365.3) <= 5.0),
        ("e2_rule_color", Rule.ELIMINATION.value, e2.rules[Channel.COLOR].value),
        ("e2_color_gain", 0.0, color_gain),
        ("e2_encoded", False, e2.encoded),
        ("e3_observed", 14.0, round(e3.observed_cm3, 2)),
        ("e3_rule_weight", Rule.GROWTH.value, e3.rules[Channel.WEIGHT].value),
        ("e3_rule_shape", Rule.UNCERTAINTY.value, e3.rules[Channel.SHAPE].value),
        ("e3_rule_size", Rule.UNCERTAINTY.value, e3.rules[Channel.SIZE].value),
        ("e3_ledger_weight", CausalStatus.DOMINANT.value, e3.ledger[Channel.WEIGHT].status.value),
        ("e3_ledger_shape", CausalStatus.LIKELY_IRRELEVANT.value, e3.ledger[Channel.SHAPE].status.value),
        ("e3_encoded", True, e3.encoded),
    ]
    failures = [{"id": name, "expected": expected, "actual": actual} for name, expected, actual in checks if actual != expected]
    return {
        "success": not failures,
        "total": len(checks),
        "passed": len(checks) - len(failures),
        "failed": len(failures),
        "failures": failures,
    }


# ============================================================================
#  CLI entry point
# ============================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Causal learning agent for the crow-and-pitcher task")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run a scenario file")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--order-index", type=int)
    p_run.add_argument("--out-dir", default=env_out_dir())
    p_run.add_argument("--seed", type=int, default=env_seed())
    p_run.add_argument("--config-json", default="{}")
    p_run.add_argument("--snapshot", action="store_true", help="Also write each order's episodic memory")

    p_cap = sub.add_parser("probe-capacity", help="Cued recall accuracy of random episodes")
    p_cap.add_argument("--n", type=int, required=True)
    p_cap.add_argument("--cue", type=float, required=True)
    p_cap.add_argument("--seed", type=int, default=env_seed() or 0)
    p_cap.add_argument("--config-json", default="{}")

    p_replay = sub.add_parser("replay-fable", help="Three-episode regression")
    p_replay.add_argument("--seed", type=int, default=42)
    p_replay.add_argument("--config-json", default="{}")

    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=env_log_level(), format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "run":
            result = run_command(args.scenario, args.order_index, args.out_dir, args.seed, args.config_json, args.snapshot)
        elif args.command == "probe-capacity":
            cfg = merge_defaults(json.loads(args.config_json or "{}"))
            result = {"success": True, **capacity_probe(args.n, args.cue, args.seed, EpisodicNetwork.from_config(cfg["memory"]))}
        else:
            result = replay_fable(args.seed, json.loads(args.config_json or "{}"))
    except Exception as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(json.dumps({"success": False, "error": str(exc)}))
        return 1

    print(json.dumps(result, default=str))
    return 0 if result.get("success") else 1


if __name__ == "__main__":
    sys.exit(main())
