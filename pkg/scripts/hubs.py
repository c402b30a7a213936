#!/usr/bin/env python3
"""
Layer-2 hubs and the map <-> hub connectivity.

The object hub binds the winners of the four property maps into one sparse
bipolar row. It is split into five slots of equal width (color, shape, size,
and two weight digits); every slot carries exactly one positive unit, so an
object code always has five positive bits. Unit 0 of a slot is reserved for
"this channel contributes nothing" (gain 0).

Single-slot channels place a winner on a seeded hash of it, probing past
claimed units. Weight winners are numbered in binding order and written as a
two-digit code over the nine free units of each weight slot, so up to 81
distinct weights stay collision free.

Forward connectivity W maps (channel, winner) to the hub units it drives;
W_back maps each unit back to the winners that use it. Channel gains live
here too, but only the causal engine moves them.

Action, body and reward hubs are fixed codebooks.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from fable_models import CHANNELS, Channel, GridCoord, MapActivation

logger = logging.getLogger(__name__)

HUB_WIDTH = 50
REWARD_MAX_CM3 = 500.0
RESERVED_UNIT = 0

# Slot order inside the object-hub row; weight owns two slots.
SLOT_CHANNELS: Tuple[Channel, ...] = (
    Channel.COLOR,
    Channel.SHAPE,
    Channel.SIZE,
    Channel.WEIGHT,
    Channel.WEIGHT,
)
CHANNEL_SLOTS: Dict[Channel, Tuple[int, ...]] = {
    ch: tuple(i for i, slot_ch in enumerate(SLOT_CHANNELS) if slot_ch is ch) for ch in CHANNELS
}


class HubKind(str, Enum):
    OBJECT = "object"
    ACTION = "action"
    BODY = "body"
    REWARD = "reward"


class BodyState(str, Enum):
    GOAL_UNREACHABLE = "goal_unreachable"
    GOAL_REALIZED = "goal_realized"
    GOAL_FAILED = "goal_failed"
    IDLE = "idle"


class ActionGoal(str, Enum):
    REACH = "reach"
    GRASP = "grasp"
    DROP = "drop"


class UnrepresentableObjectError(ValueError):
    pass


# ============================================================================
# Codes
# ============================================================================

class HubCode:
    """One 50-wide bipolar hub row."""

    __slots__ = ("hub", "bits")

    def __init__(self, hub: HubKind, bits: Sequence[int], active_bits: Optional[int] = None):
        arr = np.asarray(bits, dtype=np.int8).copy()
        if arr.ndim != 1 or len(arr) != HUB_WIDTH:
            raise ValueError(f"hub code must have {HUB_WIDTH} bits, got shape {arr.shape}")
        if not np.all((arr == 1) | (arr == -1)):
            raise ValueError("hub code bits must be +1 or -1")
        hub = HubKind(hub)
        if hub is HubKind.OBJECT:
            expected = active_bits if active_bits is not None else len(SLOT_CHANNELS)
            if int(np.sum(arr == 1)) != expected:
                raise ValueError(f"object code must have exactly {expected} positive bits")
        arr.setflags(write=False)
        self.hub = hub
        self.bits = arr

    @property
    def positive_units(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.bits == 1)]

    def hamming(self, other: "HubCode") -> int:
        return int(np.sum(self.bits != other.bits))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HubCode):
            return NotImplemented
        return self.hub is other.hub and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.hub, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"HubCode({self.hub.value}, +{self.positive_units})"


def _seeded_bipolar(name: str, width: int = HUB_WIDTH) -> np.ndarray:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return np.where(rng.random(width) < 0.5, 1, -1).astype(np.int8)


BODY_CODES: Dict[BodyState, HubCode] = {
    state: HubCode(HubKind.BODY, _seeded_bipolar(f"body:{state.value}")) for state in BodyState
}
ACTION_CODES: Dict[ActionGoal, HubCode] = {
    goal: HubCode(HubKind.ACTION, _seeded_bipolar(f"action:{goal.value}")) for goal in ActionGoal
}
PADDING_ROW: np.ndarray = _seeded_bipolar("padding")
PADDING_ROW.setflags(write=False)


# ============================================================================
# Reward thermometer
# ============================================================================

@dataclass(frozen=True)
class RewardCode:
    value: float
    code: HubCode
    clamped: bool = False

    @property
    def bits(self) -> np.ndarray:
        return self.code.bits


def encode_reward(volume_cm3: float) -> RewardCode:
    """Thermometer code, 10 cm^3 per bit over [0, 500] cm^3 (half-up rounding)."""
    clamped = False
    value = float(volume_cm3)
    if value > REWARD_MAX_CM3:
        logger.warning("Reward %.2f cm3 above %.0f cm3; clamping", value, REWARD_MAX_CM3)
        value, clamped = REWARD_MAX_CM3, True
    elif value < 0:
        logger.warning("Negative reward %.2f cm3; clamping to 0", value)
        value, clamped = 0.0, True
    n_on = int(np.floor(HUB_WIDTH * value / REWARD_MAX_CM3 + 0.5))
    bits = np.where(np.arange(HUB_WIDTH) < n_on, 1, -1)
    return RewardCode(value=value, code=HubCode(HubKind.REWARD, bits), clamped=clamped)


def decode_reward(code) -> float:
    bits = code.bits if isinstance(code, (RewardCode, HubCode)) else np.asarray(code)
    return float(np.sum(bits == 1)) * (REWARD_MAX_CM3 / HUB_WIDTH)


# ============================================================================
# Object hub and dual-dyad connectivity
# ============================================================================

@dataclass
class DualDyadConnectivity:
    """W, its inverse W_back, and per-channel gains."""
    seed: int = 0
    width: int = HUB_WIDTH
    active_bits: int = len(SLOT_CHANNELS)
    gains: Dict[Channel, float] = field(default_factory=lambda: {ch: 1.0 for ch in CHANNELS})
    W: Dict[Tuple[Channel, GridCoord], Tuple[int, ...]] = field(default_factory=dict)
    W_back: Dict[int, Dict[Channel, Set[GridCoord]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.width != HUB_WIDTH:
            raise ValueError(f"object hub width is fixed at {HUB_WIDTH}, got {self.width}")
        if self.active_bits != len(SLOT_CHANNELS):
            raise ValueError(f"object hub uses one active bit per slot ({len(SLOT_CHANNELS)}), got {self.active_bits}")

    @classmethod
    def from_config(cls, hub_cfg: Mapping, seed: int) -> "DualDyadConnectivity":
        return cls(seed=seed, width=int(hub_cfg["width"]), active_bits=int(hub_cfg["active_bits"]))

    @property
    def slot_width(self) -> int:
        return self.width // len(SLOT_CHANNELS)

    @property
    def free_units(self) -> int:
        return self.slot_width - 1

    def set_gain(self, channel: Channel, gain: float) -> None:
        if not 0.0 <= gain <= 1.0:
            raise ValueError(f"gain must be in [0, 1], got {gain}")
        self.gains[Channel(channel)] = float(gain)

    # ---------------------------------------------------------------- units

    def _offset(self, channel: Channel, winner: Optional[GridCoord], slot: int) -> int:
        target = "digit" if winner is None else f"{winner[0]},{winner[1]}"
        key = f"{self.seed}|{channel.value}|{target}|{slot}".encode("utf-8")
        return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") % self.free_units

    def _hashed_unit(self, channel: Channel, winner: GridCoord, slot: int) -> int:
        """First unclaimed unit of ``slot`` at or after the winner's hashed position."""
        base = slot * self.slot_width
        start = self._offset(channel, winner, slot)
        for step in range(self.free_units):
            unit = base + 1 + (start + step) % self.free_units
            if unit not in self.W_back:
                return unit
        raise UnrepresentableObjectError(
            f"object hub slot {slot} is full; no unit left for {channel.value} winner {winner}"
        )

    def _digit_units(self, channel: Channel, number: int) -> Tuple[int, ...]:
        """Units spelling ``number`` across the channel's slots, one digit per slot.

        The low digit steps with every new winner and each higher digit adds
        the carry to the digit below it, so the first nine winners differ in
        every slot.
        """
        slots = CHANNEL_SLOTS[channel]
        base_n = self.free_units
        if number >= base_n ** len(slots):
            raise UnrepresentableObjectError(
                f"{channel.value} has {number + 1} distinct winners; the hub spells at most {base_n ** len(slots)}"
            )
        units = []
        digit = 0
        for position, slot in enumerate(slots):
            digit = number % base_n if position == 0 else (number // base_n ** position + digit) % base_n
            local = 1 + (digit + self._offset(channel, None, slot)) % base_n
            units.append(slot * self.slot_width + local)
        return tuple(units)

    def _bound_count(self, channel: Channel) -> int:
        return sum(1 for ch, _ in self.W if ch is channel)

    def units_for(self, channel: Channel, winner: GridCoord) -> Tuple[int, ...]:
        known = self.W.get((channel, winner))
        if known is not None:
            return known
        slots = CHANNEL_SLOTS[channel]
        if len(slots) > 1:
            return self._digit_units(channel, self._bound_count(channel))
        return (self._hashed_unit(channel, winner, slots[0]),)

    def _register(self, channel: Channel, winner: GridCoord) -> Tuple[int, ...]:
        if (channel, winner) in self.W:
            return self.W[(channel, winner)]
        units = self.units_for(channel, winner)
        self.W[(channel, winner)] = units
        for unit in units:
            self.W_back.setdefault(unit, {}).setdefault(channel, set()).add(winner)
        logger.debug("Bound %s winner %s to hub units %s", channel.value, winner, units)
        return units

    def winner_of(self, channel: Channel, units: Sequence[int]) -> Optional[GridCoord]:
        """The single bound winner that uses every one of ``units``, else None."""
        owners: Optional[Set[GridCoord]] = None
        for unit in units:
            users = self.W_back.get(unit, {}).get(channel, set())
            owners = set(users) if owners is None else owners & users
        if owners is None or len(owners) != 1:
            return None
        return next(iter(owners))

    # ---------------------------------------------------------------- codes

    def _compose(self, winners: Mapping[Channel, GridCoord], register: bool) -> HubCode:
        if all(self.gains[ch] <= 0 for ch in CHANNELS):
            raise UnrepresentableObjectError("object unrepresentable")
        bits = -np.ones(self.width, dtype=np.int8)
        for channel in CHANNELS:
            if self.gains[channel] <= 0:
                for slot in CHANNEL_SLOTS[channel]:
                    bits[slot * self.slot_width + RESERVED_UNIT] = 1
                continue
            winner = winners.get(channel)
            if winner is None:
                raise ValueError(f"missing {channel.value} activation for a gain-positive channel")
            units = self._register(channel, winner) if register else self.units_for(channel, winner)
            bits[list(units)] = 1
        return HubCode(HubKind.OBJECT, bits, active_bits=self.active_bits)

    def check_consistency(self) -> List[str]:
        """Full scan of W against W_back; returns a list of problems (empty when consistent)."""
        problems = []
        spelled: Dict[Tuple[Channel, Tuple[int, ...]], GridCoord] = {}
        for (channel, winner), units in self.W.items():
            for unit in units:
                if winner not in self.W_back.get(unit, {}).get(channel, ()):
                    problems.append(f"unit {unit} of {channel.value} {winner} missing from W_back")
            other = spelled.setdefault((channel, units), winner)
            if other != winner:
                problems.append(f"units {units} shared by {channel.value} {other} and {winner}")
        for unit, owners in self.W_back.items():
            for channel, winners in owners.items():
                for winner in winners:
                    if unit not in self.W.get((channel, winner), ()):
                        problems.append(f"W_back unit {unit} -> {channel.value} {winner} not in W")
        return problems


def _winners(activations: Mapping[Channel, MapActivation]) -> Dict[Channel, GridCoord]:
    return {ch: act.winner for ch, act in activations.items() if act.winner is not None}


def bind_object(activations: Mapping[Channel, MapActivation], conn: DualDyadConnectivity) -> HubCode:
    """Bind the current winners into an object code, growing W and W_back in place."""
    return conn._compose(_winners(activations), register=True)


def code_for(activations: Mapping[Channel, MapActivation], conn: DualDyadConnectivity) -> HubCode:
    """Same code ``bind_object`` would produce, without touching the connectivity."""
    return conn._compose(_winners(activations), register=False)


def reproject_code(code: HubCode, conn: DualDyadConnectivity) -> HubCode:
    """Collapse every gain-0 channel of a stored code onto its reserved unit."""
    bits = code.bits.copy()
    for channel in CHANNELS:
        if conn.gains[channel] > 0:
            continue
        for slot in CHANNEL_SLOTS[channel]:
            base = slot * conn.slot_width
            bits[base:base + conn.slot_width] = -1
            bits[base + RESERVED_UNIT] = 1
    return HubCode(code.hub, bits, active_bits=conn.active_bits)


def _slot_mismatch(a: HubCode, b: HubCode, channel: Channel, slot_width: int) -> int:
    return max(
        int(np.sum(a.bits[slot * slot_width:(slot + 1) * slot_width] != b.bits[slot * slot_width:(slot + 1) * slot_width]))
        for slot in CHANNEL_SLOTS[channel]
    )


def differing_channels(a: HubCode, b: HubCode, conn: DualDyadConnectivity) -> List[Channel]:
    return [ch for ch in CHANNELS if _slot_mismatch(a, b, ch, conn.slot_width)]


def code_distance(a: HubCode, b: HubCode, conn: DualDyadConnectivity) -> float:
    """Gain-weighted mismatch between two object codes.

    Every channel counts as one slot whatever its slot count, so a differing
    channel costs 2 bits times its gain.
    """
    return float(sum(conn.gains[ch] * _slot_mismatch(a, b, ch, conn.slot_width) for ch in CHANNELS))


def retro_activate(
    code: HubCode, conn: DualDyadConnectivity, grid_size: int
) -> Dict[Channel, MapActivation]:
    """Top-down expectation per channel: a delta at the bound winner scaled by the gain.

    A code whose units do not spell a bound winner on some channel yields no
    expectation on any channel.
    """
    empty = {ch: MapActivation.empty(ch, grid_size) for ch in CHANNELS}
    units_by_channel: Dict[Channel, List[int]] = {}
    for unit in code.positive_units:
        slot, local = divmod(unit, conn.slot_width)
        if local == RESERVED_UNIT:
            continue
        units_by_channel.setdefault(SLOT_CHANNELS[slot], []).append(unit)

    winners: Dict[Channel, GridCoord] = {}
    for channel, units in units_by_channel.items():
        winner = conn.winner_of(channel, units)
        if winner is None:
            return empty
        winners[channel] = winner

    result = dict(empty)
    for channel, winner in winners.items():
        gain = conn.gains[channel]
        if gain <= 0:
            continue
        activity = np.zeros((grid_size, grid_size))
        activity[winner] = gain
        result[channel] = MapActivation(channel=channel, activity=activity, winner=winner)
    return result
