#!/usr/bin/env python3
"""
Property-specific self-organizing maps (layer 1 of the semantic memory).

Each perceptual channel (color, shape, size, weight) has its own G x G
Kohonen map. Raw object properties are first encoded as feature vectors in
[0, 1]; the maps are trained once on a uniform sweep of the channel's feature
space and then frozen, so perceiving an object never changes a codebook.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from fable_models import (
    CHANNELS,
    SHAPES,
    Channel,
    Color,
    FeatureVector,
    MapActivation,
    ObjectSpec,
)

logger = logging.getLogger(__name__)

SIZE_RANGE_CM = 30.0
WEIGHT_RANGE_G = 1000.0
DEFAULT_TEMPERATURE = 0.01

COLOR_RGB: Dict[Color, tuple] = {
    Color.RED: (1.0, 0.0, 0.0),
    Color.GREEN: (0.0, 1.0, 0.0),
    Color.BLUE: (0.0, 0.0, 1.0),
    Color.YELLOW: (1.0, 1.0, 0.0),
    Color.WHITE: (1.0, 1.0, 1.0),
    Color.BLACK: (0.0, 0.0, 0.0),
}


def _clamp01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def encode_feature(obj: ObjectSpec, channel: Channel) -> FeatureVector:
    """Encode one property of ``obj`` as a feature vector in [0, 1]."""
    channel = Channel(channel)
    if channel is Channel.COLOR:
        values = COLOR_RGB[obj.color]
    elif channel is Channel.SHAPE:
        values = tuple(1.0 if shape is obj.shape else 0.0 for shape in SHAPES)
    elif channel is Channel.SIZE:
        values = (_clamp01(obj.characteristic_length_cm / SIZE_RANGE_CM),)
    else:
        values = (_clamp01(obj.weight_g / WEIGHT_RANGE_G),)
    return FeatureVector(channel=channel, values=tuple(float(v) for v in values))


# ============================================================================
# Kohonen maps
# ============================================================================

@dataclass(frozen=True)
class SomConfig:
    """Hyperparameters for one map's training run."""
    grid_size: int = 10
    epochs: int = 40
    learning_rate: float = 0.5
    radius: float = 5.0

    @classmethod
    def from_config(cls, som_cfg: Dict) -> "SomConfig":
        return cls(
            grid_size=int(som_cfg["grid_size"]),
            epochs=int(som_cfg["epochs"]),
            learning_rate=float(som_cfg["learning_rate"]),
            radius=float(som_cfg["radius"]),
        )

    def validate(self) -> None:
        if self.grid_size < 2:
            raise ValueError(f"grid_size must be >= 2, got {self.grid_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.radius <= 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")


@dataclass
class PropertyMap:
    channel: Channel
    codebook: np.ndarray  # (G, G, D)
    trained: bool = False

    @property
    def grid_size(self) -> int:
        return int(self.codebook.shape[0])


def _linear_init(data: np.ndarray, grid_size: int) -> np.ndarray:
    """Spread the codebook over the plane of the two leading principal axes."""
    mean = data.mean(axis=0)
    cov = np.atleast_2d(np.cov(data, rowvar=False, bias=True))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    dim = data.shape[1]
    axes = []
    for k in range(2):
        if k < dim:
            idx = order[k]
            axes.append(eigvecs[:, idx] * math.sqrt(max(float(eigvals[idx]), 0.0)))
        else:
            axes.append(np.zeros(dim))
    # +-1.7 standard deviations covers a uniform sample end to end
    span = np.linspace(-1.7, 1.7, grid_size)
    codebook = (
        mean[None, None, :]
        + span[:, None, None] * axes[0][None, None, :]
        + span[None, :, None] * axes[1][None, None, :]
    )
    return np.clip(codebook, 0.0, 1.0)


def train_map(samples: Sequence[FeatureVector], config: SomConfig, seed: int) -> PropertyMap:
    """Online Kohonen training with a Gaussian neighbourhood.

    Learning rate and radius decay exponentially to e^-3 of their initial
    values over the run. The only randomness is the per-epoch presentation
    order, drawn from ``seed``.
    """
    if not samples:
        raise ValueError("no training data")
    config.validate()
    channel = samples[0].channel
    if any(s.channel is not channel for s in samples):
        raise ValueError("training samples mix channels")

    data = np.array([s.values for s in samples], dtype=np.float64)
    g = config.grid_size
    codebook = _linear_init(data, g)
    rows, cols = np.indices((g, g))
    rng = np.random.default_rng(seed)

    total_steps = config.epochs * len(data)
    tau = max(total_steps / 3.0, 1.0)
    step = 0
    for _ in range(config.epochs):
        for idx in rng.permutation(len(data)):
            x = data[idx]
            d2 = np.sum((codebook - x) ** 2, axis=-1)
            wr, wc = divmod(int(np.argmin(d2)), g)
            decay = math.exp(-step / tau)
            lr = config.learning_rate * decay
            sigma = config.radius * decay
            h = np.exp(-((rows - wr) ** 2 + (cols - wc) ** 2) / (2.0 * sigma * sigma))
            codebook += lr * h[..., None] * (x - codebook)
            step += 1

    logger.debug("Trained %s map on %d samples (%d steps)", channel.value, len(data), total_steps)
    return PropertyMap(channel=channel, codebook=codebook, trained=True)


def bottom_up_activate(
    prop_map: PropertyMap, feature: FeatureVector, temperature: float = DEFAULT_TEMPERATURE
) -> MapActivation:
    """Softmax activity over the map; the codebook is never modified."""
    if not prop_map.trained:
        raise ValueError(f"{prop_map.channel.value} map is not trained")
    if feature.channel is not prop_map.channel:
        raise ValueError(
            f"channel mismatch: {feature.channel.value} feature on {prop_map.channel.value} map"
        )
    d2 = np.sum((prop_map.codebook - feature.as_array()) ** 2, axis=-1)
    logits = -d2 / temperature
    logits -= logits.max()
    weights = np.exp(logits)
    activity = weights / weights.sum()
    winner = divmod(int(np.argmax(activity)), prop_map.grid_size)
    return MapActivation(channel=prop_map.channel, activity=activity, winner=(int(winner[0]), int(winner[1])))


# ============================================================================
# Per-scenario map set
# ============================================================================

def uniform_training_samples(channel: Channel, som_cfg: Optional[Dict] = None) -> List[FeatureVector]:
    """A uniform sweep of the channel's feature space (not the scenario objects)."""
    som_cfg = som_cfg or {}
    channel = Channel(channel)
    if channel is Channel.COLOR:
        levels = np.linspace(0.0, 1.0, int(som_cfg.get("color_levels", 5)))
        points: Iterable = itertools.product(levels, repeat=3)
    elif channel is Channel.SHAPE:
        points = np.eye(len(SHAPES))
    else:
        points = ((v,) for v in np.linspace(0.0, 1.0, int(som_cfg.get("scalar_samples", 101))))
    return [FeatureVector(channel=channel, values=tuple(float(v) for v in p)) for p in points]


def train_channel_maps(som_cfg: Dict, seed: int) -> Dict[Channel, PropertyMap]:
    """Train and freeze one map per channel; each channel gets its own derived seed."""
    config = SomConfig.from_config(som_cfg)
    maps = {}
    for offset, channel in enumerate(CHANNELS):
        maps[channel] = train_map(uniform_training_samples(channel, som_cfg), config, seed + offset)
    logger.info("Trained %d property maps (%dx%d, seed %d)", len(maps), config.grid_size, config.grid_size, seed)
    return maps
