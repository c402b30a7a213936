#!/usr/bin/env python3
"""
Jar-of-water world: object volumes, Archimedes displacement and reachability.

The same displacement function is the agent's reward and, called separately,
the ground-truth oracle for prediction error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from fable_models import ObjectSpec, Shape

logger = logging.getLogger(__name__)


class DoubleDropError(RuntimeError):
    pass


@dataclass(frozen=True)
class JarConfig:
    cross_section_cm2: float = 100.0
    initial_level_cm: float = 10.0
    reach_level_cm: float = 13.5
    water_density: float = 1.0

    def __post_init__(self) -> None:
        for name in ("cross_section_cm2", "reach_level_cm", "water_density"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.initial_level_cm < 0:
            raise ValueError(f"initial_level_cm must be >= 0, got {self.initial_level_cm}")


@dataclass
class WorldState:
    cross_section: float
    level: float
    reach_level: float
    water_density: float = 1.0
    target_reachable: bool = False
    dropped: List[str] = field(default_factory=list)
    noise_sigma: float = 0.0
    rng: Optional[np.random.Generator] = field(default=None, repr=False)

    @classmethod
    def from_jar(cls, jar: JarConfig, noise_sigma: float = 0.0, seed: int = 0) -> "WorldState":
        world = cls(
            cross_section=jar.cross_section_cm2,
            level=jar.initial_level_cm,
            reach_level=jar.reach_level_cm,
            water_density=jar.water_density,
            noise_sigma=noise_sigma,
            rng=np.random.default_rng(seed) if noise_sigma > 0 else None,
        )
        if noise_sigma > 0:
            logger.warning("Observation noise enabled: uniform +-%.2f cm3", noise_sigma)
        world.target_reachable = is_reachable(world)
        return world


@dataclass(frozen=True)
class DropResult:
    observed_cm3: float
    displaced_cm3: float
    level_cm: float
    reachable: bool


def object_volume(obj: ObjectSpec) -> float:
    d = obj.dims
    if obj.shape is Shape.CYLINDER:
        return math.pi * d["radius_cm"] ** 2 * d["height_cm"]
    if obj.shape is Shape.CUBE:
        return d["edge_cm"] ** 3
    if obj.shape is Shape.SPHERE:
        return math.pi * d["diameter_cm"] ** 3 / 6.0
    return d["length_cm"] * d["width_cm"] * d["height_cm"]


def displaced_volume(obj: ObjectSpec, water_density: float = 1.0) -> float:
    """Sinkers (including neutral buoyancy) displace their volume; floaters their weight's worth."""
    volume = object_volume(obj)
    if obj.weight_g / volume >= water_density:
        return volume
    return obj.weight_g / water_density


def is_reachable(world: WorldState) -> bool:
    return world.level >= world.reach_level


def drop(world: WorldState, obj: ObjectSpec) -> DropResult:
    """Drop ``obj`` into the jar, raising the level in place."""
    if obj.id in world.dropped:
        raise DoubleDropError(f"object {obj.id} already dropped")
    displaced = displaced_volume(obj, world.water_density)
    world.level += displaced / world.cross_section
    world.target_reachable = is_reachable(world)
    world.dropped.append(obj.id)

    observed = displaced
    if world.noise_sigma > 0 and world.rng is not None:
        observed = max(0.0, displaced + float(world.rng.uniform(-world.noise_sigma, world.noise_sigma)))
    logger.debug("Dropped %s: %.2f cm3, level %.3f cm, reachable=%s", obj.id, displaced, world.level, world.target_reachable)
    return DropResult(
        observed_cm3=observed,
        displaced_cm3=displaced,
        level_cm=world.level,
        reachable=world.target_reachable,
    )
