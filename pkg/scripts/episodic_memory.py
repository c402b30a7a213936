#!/usr/bin/env python3
"""
Auto-associative episodic memory.

An episode is a 20 x 50 bipolar sheet, one hub row per event:

    row 0   body state before acting
    row 1   object-hub code
    row 2   action goal
    row 3   reward (thermometer)
    row 4   body state after acting (padding when unknown)
    rows 5+ fixed padding

Episodes are stored one-shot with a Hebbian outer-product rule and recalled
by clamping the known rows and iterating synchronous sign updates over the
rest. Which stored episodes count as "recalled" is decided by comparing the
settled object row against the episode ledger.

Snapshot layout (little-endian):
    b"EPIMEM1"
    N x N float32 weights, row-major
    per episode: uint32 length + UTF-8 JSON metadata record
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from hubs import (
    ACTION_CODES,
    BODY_CODES,
    CHANNEL_SLOTS,
    HUB_WIDTH,
    PADDING_ROW,
    ActionGoal,
    BodyState,
    HubCode,
    HubKind,
    encode_reward,
)

logger = logging.getLogger(__name__)

SNAPSHOT_HEADER = b"EPIMEM1"
BODY_ROW, OBJECT_ROW, ACTION_ROW, REWARD_ROW, OUTCOME_ROW = 0, 1, 2, 3, 4
DEFAULT_ROWS = 20


class MemoryFullError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpisodeMeta:
    object_id: str
    reward_cm3: float
    index: int


@dataclass
class Episode:
    rows: np.ndarray  # (rows, width) of +/-1
    meta: EpisodeMeta

    @property
    def object_code(self) -> HubCode:
        return HubCode(HubKind.OBJECT, self.rows[OBJECT_ROW])

    def flatten(self) -> np.ndarray:
        return self.rows.reshape(-1).astype(np.float64)


def build_episode(
    body: BodyState,
    object_code: HubCode,
    action: ActionGoal,
    reward_cm3: float,
    object_id: str,
    index: int,
    n_rows: int = DEFAULT_ROWS,
    outcome: Optional[BodyState] = None,
) -> Episode:
    """Lay the event rows and the padding out as one sheet."""
    if n_rows < 5:
        raise ValueError(f"an episode needs at least 5 rows, got {n_rows}")
    reward = encode_reward(reward_cm3)
    rows = np.empty((n_rows, HUB_WIDTH), dtype=np.int8)
    rows[BODY_ROW] = BODY_CODES[BodyState(body)].bits
    rows[OBJECT_ROW] = object_code.bits
    rows[ACTION_ROW] = ACTION_CODES[ActionGoal(action)].bits
    rows[REWARD_ROW] = reward.bits
    rows[OUTCOME_ROW:] = PADDING_ROW
    if outcome is not None:
        rows[OUTCOME_ROW] = BODY_CODES[BodyState(outcome)].bits
    return Episode(rows=rows, meta=EpisodeMeta(object_id=object_id, reward_cm3=float(reward_cm3), index=index))


@dataclass
class SettleResult:
    pattern: np.ndarray  # (rows, width)
    iterations: int
    converged: bool
    energies: List[float] = field(default_factory=list)


@dataclass
class RecallHit:
    episode: Episode
    score: float
    distance: float


class EpisodicNetwork:
    def __init__(
        self,
        rows: int = DEFAULT_ROWS,
        width: int = HUB_WIDTH,
        capacity: int = 120,
        max_iterations: int = 100,
        recall_hamming: int = 5,
    ):
        self.rows = rows
        self.width = width
        self.size = rows * width
        self.capacity = capacity
        self.max_iterations = max_iterations
        self.recall_hamming = recall_hamming
        self.weights = np.zeros((self.size, self.size), dtype=np.float64)
        self.episodes: List[Episode] = []

    @classmethod
    def from_config(cls, memory_cfg: Mapping) -> "EpisodicNetwork":
        return cls(
            rows=int(memory_cfg["rows"]),
            capacity=int(memory_cfg["capacity"]),
            max_iterations=int(memory_cfg["max_iterations"]),
            recall_hamming=int(memory_cfg["recall_hamming"]),
        )

    @property
    def stored_count(self) -> int:
        return len(self.episodes)

    def encode(self, episode: Episode) -> None:
        if episode.rows.shape != (self.rows, self.width):
            raise ValueError(f"episode must be {self.rows}x{self.width}, got {episode.rows.shape}")
        if self.stored_count >= self.capacity:
            raise MemoryFullError("episodic memory full")
        xi = episode.flatten()
        update = np.outer(xi, xi)
        np.fill_diagonal(update, 0.0)
        self.weights += update / self.size
        self.episodes.append(episode)
        logger.debug(
            "Encoded episode %d (%s, %.2f cm3); %d stored",
            episode.meta.index, episode.meta.object_id, episode.meta.reward_cm3, self.stored_count,
        )

    def energy(self, state: np.ndarray, clamped: Optional[np.ndarray] = None) -> float:
        """Hopfield energy; with a clamp mask, that of the free units under the clamped field."""
        x = state.reshape(-1).astype(np.float64)
        if clamped is None:
            return float(-0.5 * x @ self.weights @ x)
        fixed = clamped.reshape(-1)
        free = ~fixed
        xf = x[free]
        field_from_clamped = self.weights[np.ix_(free, fixed)] @ x[fixed]
        return float(-0.5 * xf @ self.weights[np.ix_(free, free)] @ xf - xf @ field_from_clamped)

    def settle(self, cue: Mapping[int, np.ndarray]) -> SettleResult:
        """Synchronous sign dynamics with the cue rows held fixed."""
        if not cue:
            raise ValueError("cue must clamp at least one row")
        state = np.zeros((self.rows, self.width), dtype=np.float64)
        clamped = np.zeros((self.rows, self.width), dtype=bool)
        for row, bits in cue.items():
            if not 0 <= row < self.rows:
                raise ValueError(f"cue row {row} out of range")
            state[row] = np.asarray(bits, dtype=np.float64)
            clamped[row] = True
        x = state.reshape(-1)
        free = ~clamped.reshape(-1)

        energies = []
        converged = False
        iterations = 0
        for iterations in range(1, self.max_iterations + 1):
            nxt = np.where(self.weights @ x >= 0, 1.0, -1.0)
            nxt[~free] = x[~free]
            changed = not np.array_equal(nxt, x)
            x = nxt
            energies.append(self.energy(x, clamped))
            if not changed:
                converged = True
                break
        return SettleResult(
            pattern=x.reshape(self.rows, self.width).astype(np.int8),
            iterations=iterations,
            converged=converged,
            energies=energies,
        )

    def recall(
        self,
        cue: Mapping[int, np.ndarray],
        reproject: Optional[Callable[[HubCode], HubCode]] = None,
        distance: Optional[Callable[[HubCode, HubCode], float]] = None,
    ) -> List[RecallHit]:
        """Episodes whose object code lies within the recall radius of the settled object row.

        ``reproject`` maps a stored object code through the current
        connectivity before comparison; ``distance`` replaces the plain
        Hamming distance. Best score first, ties by storage order.
        """
        if not self.episodes:
            return []
        settled = self.settle(cue)
        row = settled.pattern[OBJECT_ROW]
        settled_code = HubCode(HubKind.OBJECT, row, active_bits=int(np.sum(row == 1)))
        measure = distance or (lambda a, b: a.hamming(b))
        hits = []
        for episode in self.episodes:
            stored = episode.object_code
            if reproject is not None:
                stored = reproject(stored)
            gap = float(measure(settled_code, stored))
            if gap <= self.recall_hamming:
                hits.append(RecallHit(episode=episode, score=(self.width - gap) / self.width, distance=gap))
        hits.sort(key=lambda hit: (-hit.score, hit.episode.meta.index))
        logger.debug("Recall settled in %d iterations; %d hit(s)", settled.iterations, len(hits))
        return hits

    # ------------------------------------------------------------- snapshots

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            fh.write(SNAPSHOT_HEADER)
            fh.write(self.weights.astype("<f4").tobytes(order="C"))
            for episode in self.episodes:
                record = {
                    "object_id": episode.meta.object_id,
                    "reward_cm3": episode.meta.reward_cm3,
                    "index": episode.meta.index,
                    "rows": ["".join("+" if b > 0 else "-" for b in row) for row in episode.rows],
                }
                payload = json.dumps(record, sort_keys=True).encode("utf-8")
                fh.write(struct.pack("<I", len(payload)))
                fh.write(payload)
        logger.info("Wrote episodic snapshot %s (%d episodes)", path, self.stored_count)
        return path

    @classmethod
    def load(cls, path, **kwargs) -> "EpisodicNetwork":
        net = cls(**kwargs)
        data = Path(path).read_bytes()
        if not data.startswith(SNAPSHOT_HEADER):
            raise ValueError(f"{path}: not an episodic memory snapshot")
        offset = len(SNAPSHOT_HEADER)
        n_bytes = net.size * net.size * 4
        if len(data) < offset + n_bytes:
            raise ValueError(f"{path}: truncated weight block")
        net.weights = np.frombuffer(data, dtype="<f4", count=net.size * net.size, offset=offset) \
            .reshape(net.size, net.size).astype(np.float64)
        offset += n_bytes
        while offset < len(data):
            (length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            record = json.loads(data[offset:offset + length].decode("utf-8"))
            offset += length
            rows = np.array([[1 if ch == "+" else -1 for ch in row] for row in record["rows"]], dtype=np.int8)
            meta = EpisodeMeta(record["object_id"], float(record["reward_cm3"]), int(record["index"]))
            net.episodes.append(Episode(rows=rows, meta=meta))
        return net


# ============================================================================
# Capacity probe
# ============================================================================

def _random_object_code(rng: np.random.Generator) -> HubCode:
    n_slots = sum(len(slots) for slots in CHANNEL_SLOTS.values())
    slot_width = HUB_WIDTH // n_slots
    bits = -np.ones(HUB_WIDTH, dtype=np.int8)
    for slot in range(n_slots):
        bits[slot * slot_width + int(rng.integers(slot_width))] = 1
    return HubCode(HubKind.OBJECT, bits)


def capacity_probe(
    n_patterns: int,
    cue_fraction: float,
    seed: int,
    net: Optional[EpisodicNetwork] = None,
) -> Dict[str, float]:
    """Store ``n_patterns`` random valid episodes, recue each from its leading rows.

    Returns the mean fraction of bits the settled sheet shares with the
    stored one, plus the bookkeeping the CLI reports.
    """
    net = net or EpisodicNetwork()
    if not 1 <= n_patterns <= net.capacity:
        raise ValueError(f"n_patterns must be in [1, {net.capacity}], got {n_patterns}")
    if not 0.0 < cue_fraction <= 1.0:
        raise ValueError(f"cue_fraction must be in (0, 1], got {cue_fraction}")

    rng = np.random.default_rng(seed)
    bodies = list(BodyState)
    actions = list(ActionGoal)
    episodes = []
    for index in range(n_patterns):
        ep = build_episode(
            body=bodies[int(rng.integers(len(bodies)))],
            object_code=_random_object_code(rng),
            action=actions[int(rng.integers(len(actions)))],
            reward_cm3=float(rng.uniform(0.0, 500.0)),
            object_id=f"probe-{index}",
            index=index,
            n_rows=net.rows,
        )
        net.encode(ep)
        episodes.append(ep)

    n_clamped = max(1, int(round(cue_fraction * net.rows)))
    accuracies = []
    iterations = []
    for ep in episodes:
        result = net.settle({row: ep.rows[row] for row in range(n_clamped)})
        accuracies.append(float(np.mean(result.pattern == ep.rows)))
        iterations.append(result.iterations)
    accuracy = float(np.mean(accuracies))
    logger.info("Capacity probe: %d patterns, %d clamped rows, accuracy %.4f", n_patterns, n_clamped, accuracy)
    return {
        "n_patterns": n_patterns,
        "cue_fraction": cue_fraction,
        "clamped_rows": n_clamped,
        "accuracy": accuracy,
        "mean_iterations": float(np.mean(iterations)),
    }


def object_cue(code: HubCode) -> Dict[int, np.ndarray]:
    """Cue clamping only the object row."""
    return {OBJECT_ROW: code.bits}
