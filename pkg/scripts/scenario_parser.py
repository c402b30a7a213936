#!/usr/bin/env python3
"""
Parser for line-based scenario files.

    [jar]               cross_section_cm2, initial_level_cm, reach_level_cm,
                        water_density (optional, default 1.0)
    [object]            repeated; id, color, shape, weight_g + shape dims
    [probe]             same fields as [object]; never dropped
    [orders]            order = i,j,k,...  (repeatable), seed = n,
                        shuffles = k  (k more orders drawn from the seed)

'#' starts a comment. Every error names the offending line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from fable_models import SHAPE_DIMENSIONS, ObjectSpec, Shape
from fable_world import JarConfig


class ScenarioError(ValueError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.message = message
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}" if line_number is not None else message)


@dataclass
class Scenario:
    jar: JarConfig
    objects: List[ObjectSpec]
    probes: List[ObjectSpec] = field(default_factory=list)
    orders: List[List[int]] = field(default_factory=list)
    seed: int = 0
    source: Optional[str] = None

    def ordered_objects(self, order_index: int) -> List[ObjectSpec]:
        if not 0 <= order_index < len(self.orders):
            raise ValueError(f"order index {order_index} out of range (0..{len(self.orders) - 1})")
        return [self.objects[i] for i in self.orders[order_index]]


@dataclass
class _Section:
    name: str
    line_number: int
    values: Dict[str, Tuple[str, int]] = field(default_factory=dict)
    orders: List[Tuple[str, int]] = field(default_factory=list)


JAR_REQUIRED = ("cross_section_cm2", "initial_level_cm", "reach_level_cm")
JAR_OPTIONAL = ("water_density",)
OBJECT_BASE = ("id", "color", "shape", "weight_g")
ALL_DIMENSIONS = sorted({key for keys in SHAPE_DIMENSIONS.values() for key in keys})
SECTIONS = ("jar", "object", "probe", "orders")


class ScenarioParser:
    SECTION_PATTERN = re.compile(r'^\[(\w+)\]$')
    KEY_VALUE_PATTERN = re.compile(r'^([A-Za-z_]\w*)\s*=\s*(.*)$')

    def parse_file(self, path) -> Scenario:
        text = Path(path).read_text(encoding="utf-8")
        scenario = self.parse_text(text)
        scenario.source = str(path)
        return scenario

    def parse_text(self, text: str) -> Scenario:
        sections = self._split_sections(text)
        jars = [s for s in sections if s.name == "jar"]
        if not jars:
            raise ScenarioError("missing [jar] section")
        if len(jars) > 1:
            raise ScenarioError("duplicate [jar] section", jars[1].line_number)

        jar = self._build_jar(jars[0])
        built = [(s, self._build_object(s)) for s in sections if s.name in ("object", "probe")]
        objects = [obj for s, obj in built if s.name == "object"]
        probes = [obj for s, obj in built if s.name == "probe"]
        if not objects:
            raise ScenarioError("no [object] sections")

        seen = set()
        for section, obj in built:
            if obj.id in seen:
                raise ScenarioError(f"duplicate id {obj.id!r}", section.values["id"][1])
            seen.add(obj.id)

        orders: List[List[int]] = []
        seed = 0
        shuffles = 0
        for section in (s for s in sections if s.name == "orders"):
            for raw, line_number in section.orders:
                orders.append(self._parse_order(raw, line_number, len(objects)))
            if "seed" in section.values:
                raw, line_number = section.values["seed"]
                seed = self._parse_int(raw, "seed", line_number)
            if "shuffles" in section.values:
                raw, line_number = section.values["shuffles"]
                shuffles = self._parse_int(raw, "shuffles", line_number)
                if shuffles < 0:
                    raise ScenarioError(f"shuffles must be >= 0, got {shuffles}", line_number)
        orders.extend(seeded_shuffles(len(objects), shuffles, seed))
        if not orders:
            orders.append(list(range(len(objects))))
        return Scenario(jar=jar, objects=objects, probes=probes, orders=orders, seed=seed)

    # ------------------------------------------------------------------ lines

    def _split_sections(self, text: str) -> List[_Section]:
        sections: List[_Section] = []
        current: Optional[_Section] = None
        for line_number, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            header = self.SECTION_PATTERN.match(line)
            if header:
                name = header.group(1).lower()
                if name not in SECTIONS:
                    raise ScenarioError(f"unknown section [{name}]", line_number)
                current = _Section(name=name, line_number=line_number)
                sections.append(current)
                continue
            pair = self.KEY_VALUE_PATTERN.match(line)
            if not pair:
                raise ScenarioError(f"expected 'key = value', got {line!r}", line_number)
            if current is None:
                raise ScenarioError("key outside of a section", line_number)
            key, value = pair.group(1).lower(), pair.group(2).strip()
            self._check_key(current, key, line_number)
            if current.name == "orders" and key == "order":
                current.orders.append((value, line_number))
                continue
            if key in current.values:
                raise ScenarioError(f"duplicate key {key!r}", line_number)
            current.values[key] = (value, line_number)
        return sections

    @staticmethod
    def _check_key(section: _Section, key: str, line_number: int) -> None:
        if section.name == "jar":
            allowed = JAR_REQUIRED + JAR_OPTIONAL
        elif section.name == "orders":
            allowed = ("order", "seed", "shuffles")
        else:
            allowed = tuple(OBJECT_BASE) + tuple(ALL_DIMENSIONS)
        if key not in allowed:
            raise ScenarioError(f"unknown key {key!r} in [{section.name}]", line_number)

    # ----------------------------------------------------------------- values

    @staticmethod
    def _parse_float(raw: str, key: str, line_number: int) -> float:
        try:
            return float(raw)
        except ValueError:
            raise ScenarioError(f"{key} must be a number, got {raw!r}", line_number) from None

    @staticmethod
    def _parse_int(raw: str, key: str, line_number: int) -> int:
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"{key} must be an integer, got {raw!r}", line_number) from None

    def _build_jar(self, section: _Section) -> JarConfig:
        missing = [key for key in JAR_REQUIRED if key not in section.values]
        if missing:
            raise ScenarioError(f"missing required field {missing[0]!r} in [jar]", section.line_number)
        kwargs = {}
        for key in JAR_REQUIRED + JAR_OPTIONAL:
            if key in section.values:
                raw, line_number = section.values[key]
                kwargs[key] = self._parse_float(raw, key, line_number)
        try:
            return JarConfig(**kwargs)
        except ValueError as exc:
            raise ScenarioError(str(exc), section.line_number) from None

    def _build_object(self, section: _Section) -> ObjectSpec:
        values = section.values
        for key in OBJECT_BASE:
            if key not in values:
                raise ScenarioError(f"missing required field {key!r} in [{section.name}]", section.line_number)
        shape_raw, shape_line = values["shape"]
        try:
            shape = Shape(shape_raw.lower())
        except ValueError:
            raise ScenarioError(f"unknown shape {shape_raw!r}", shape_line) from None
        for key in SHAPE_DIMENSIONS[shape]:
            if key not in values:
                raise ScenarioError(f"missing required field {key!r} for {shape.value}", section.line_number)
        for key in ALL_DIMENSIONS:
            if key in values and key not in SHAPE_DIMENSIONS[shape]:
                raise ScenarioError(f"unknown key {key!r} for {shape.value}", values[key][1])

        dims = {key: self._parse_float(values[key][0], key, values[key][1]) for key in SHAPE_DIMENSIONS[shape]}
        weight = self._parse_float(values["weight_g"][0], "weight_g", values["weight_g"][1])
        try:
            return ObjectSpec(
                id=values["id"][0],
                color=values["color"][0].lower(),
                shape=shape,
                dims=dims,
                weight_g=weight,
            )
        except ValueError as exc:
            raise ScenarioError(str(exc), section.line_number) from None

    def _parse_order(self, raw: str, line_number: int, n_objects: int) -> List[int]:
        try:
            order = [int(part) for part in raw.split(",") if part.strip()]
        except ValueError:
            raise ScenarioError(f"order must be comma-separated integers, got {raw!r}", line_number) from None
        if sorted(order) != list(range(n_objects)):
            raise ScenarioError("order is not a permutation", line_number)
        return order


def seeded_shuffles(n_objects: int, count: int, seed: int) -> List[List[int]]:
    """``count`` permutations of 0..n-1, drawn one after another from ``seed``."""
    rng = np.random.default_rng(seed)
    return [[int(i) for i in rng.permutation(n_objects)] for _ in range(count)]


def parse_scenario(path) -> Scenario:
    return ScenarioParser().parse_file(path)
