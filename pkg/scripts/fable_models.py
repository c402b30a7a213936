#!/usr/bin/env python3
"""
Shared value types for the Aesop's-fable causal learning agent.

Everything that crosses a module boundary (object descriptions, property
channels, feature vectors) lives here so the maps, hubs, memory and world
modules agree on one vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

import numpy as np


# ============================================================================
# Vocabularies
# ============================================================================

class Channel(str, Enum):
    """Property channel; one self-organizing map per channel."""
    COLOR = "color"
    SHAPE = "shape"
    SIZE = "size"
    WEIGHT = "weight"


CHANNELS: Tuple[Channel, ...] = (Channel.COLOR, Channel.SHAPE, Channel.SIZE, Channel.WEIGHT)


class Color(str, Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    YELLOW = "yellow"
    WHITE = "white"
    BLACK = "black"


class Shape(str, Enum):
    CYLINDER = "cylinder"
    CUBE = "cube"
    SPHERE = "sphere"
    CUBOID = "cuboid"


SHAPES: Tuple[Shape, ...] = (Shape.CYLINDER, Shape.CUBE, Shape.SPHERE, Shape.CUBOID)

# Dimension keys each shape requires, in cm.
SHAPE_DIMENSIONS: Dict[Shape, Tuple[str, ...]] = {
    Shape.CYLINDER: ("radius_cm", "height_cm"),
    Shape.CUBE: ("edge_cm",),
    Shape.SPHERE: ("diameter_cm",),
    Shape.CUBOID: ("length_cm", "width_cm", "height_cm"),
}


# ============================================================================
# Objects
# ============================================================================

@dataclass(frozen=True)
class ObjectSpec:
    """Ground-truth physical description of one object."""
    id: str
    color: Color
    shape: Shape
    dims: Dict[str, float] = field(hash=False)
    weight_g: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("object id must not be empty")
        object.__setattr__(self, "color", Color(self.color))
        object.__setattr__(self, "shape", Shape(self.shape))
        required = SHAPE_DIMENSIONS[self.shape]
        missing = [key for key in required if key not in self.dims]
        if missing:
            raise ValueError(f"{self.id}: {self.shape.value} needs {', '.join(missing)}")
        extra = [key for key in self.dims if key not in required]
        if extra:
            raise ValueError(f"{self.id}: unexpected dimension(s) for {self.shape.value}: {', '.join(extra)}")
        for key in required:
            value = float(self.dims[key])
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{self.id}: {key} must be positive, got {self.dims[key]!r}")
        if not math.isfinite(self.weight_g) or self.weight_g <= 0:
            raise ValueError(f"{self.id}: weight_g must be positive, got {self.weight_g!r}")
        object.__setattr__(self, "dims", {key: float(self.dims[key]) for key in required})
        object.__setattr__(self, "weight_g", float(self.weight_g))

    @property
    def characteristic_length_cm(self) -> float:
        """Largest extent of the object; the quantity the size map perceives."""
        d = self.dims
        if self.shape is Shape.CYLINDER:
            return max(2.0 * d["radius_cm"], d["height_cm"])
        if self.shape is Shape.CUBE:
            return d["edge_cm"]
        if self.shape is Shape.SPHERE:
            return d["diameter_cm"]
        return max(d["length_cm"], d["width_cm"], d["height_cm"])

    def describe(self) -> str:
        return f"{self.color.value} {self.shape.value} {self.weight_g:g} g"


# ============================================================================
# Features and map activity
# ============================================================================

@dataclass(frozen=True)
class FeatureVector:
    """Encoded property of one channel; every component lies in [0, 1]."""
    channel: Channel
    values: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


GridCoord = Tuple[int, int]


@dataclass
class MapActivation:
    """Activity over a G x G property map.

    Bottom-up activity sums to 1. Top-down (expected) activity is a delta at
    the remembered winner scaled by the channel gain; an all-zero activity
    with ``winner=None`` means "no expectation".
    """
    channel: Channel
    activity: np.ndarray
    winner: GridCoord | None

    @property
    def is_empty(self) -> bool:
        return self.winner is None or not np.any(self.activity > 0)

    @classmethod
    def empty(cls, channel: Channel, grid_size: int) -> "MapActivation":
        return cls(channel=channel, activity=np.zeros((grid_size, grid_size)), winner=None)
