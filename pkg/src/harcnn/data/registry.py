"""Sensor placements, sensor configurations and activity groups."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import ConfigError

SAMPLE_RATE = 102.4
ACCEL_RANGE = 2.0  # g
GYRO_RANGE = 500.0  # dps
COMPONENTS = ("ax", "ay", "az", "gx", "gy", "gz")


class SensorId(str, Enum):
    RF = "RF"
    LF = "LF"
    RS = "RS"
    LS = "LS"
    LM = "LM"

    @property
    def side(self) -> str | None:
        if self is SensorId.LM:
            return None
        return "right" if self.value[0] == "R" else "left"


SENSORS = tuple(SensorId)


@dataclass(frozen=True)
class SensorConfig:
    sensors: tuple

    @property
    def name(self) -> str:
        return "".join(s.value for s in self.sensors)

    @property
    def arity(self) -> int:
        return len(self.sensors)

    @property
    def bilateral(self) -> bool:
        sides = {s.side for s in self.sensors} - {None}
        return sides == {"right", "left"}

    def __str__(self) -> str:
        return self.name


def _cfg(*names):
    return SensorConfig(tuple(SensorId(n) for n in names))


_DOUBLES = [_cfg("RS", "LS"), _cfg("RF", "LF"), _cfg("RS", "RF"), _cfg("LS", "LF")]

# column order of the F-score grid: singles, doubles, then triples
CONFIGS = (
    [_cfg(s.value) for s in SENSORS]
    + _DOUBLES
    + [SensorConfig(d.sensors + (SensorId.LM,)) for d in _DOUBLES]
)
CONFIGS_BY_NAME = {c.name: c for c in CONFIGS}


def get_config(name: str) -> SensorConfig:
    try:
        return CONFIGS_BY_NAME[name.upper()]
    except KeyError:
        raise ConfigError(
            f"unknown sensor configuration {name!r}; choose from {', '.join(CONFIGS_BY_NAME)}"
        ) from None


@dataclass(frozen=True)
class ActivityGroup:
    name: str
    labels: tuple
    # asymmetric activities cannot use sensors on both sides at once
    unilateral_only: bool = False

    @property
    def m(self) -> int:
        return len(self.labels)

    def allows(self, config: SensorConfig) -> bool:
        return not (self.unilateral_only and config.bilateral)

    def index(self, activity: str) -> int:
        return self.labels.index(activity)


GROUPS = {
    g.name: g
    for g in (
        ActivityGroup("walk", ("bawk", "sdwk", "wktrn")),
        ActivityGroup("walk_balance", ("hetowkbk", "hewk", "tdwk", "towk")),
        ActivityGroup("stand_balance", ("sls", "tdst")),
        ActivityGroup(
            "strength", ("knex", "knfx", "hpabd", "cars", "tors", "knbn", "sts"), unilateral_only=True
        ),
    )
}

ACTIVITIES = tuple(a for g in GROUPS.values() for a in g.labels)


def get_group(name: str) -> ActivityGroup:
    try:
        return GROUPS[name.lower().replace("-", "_")]
    except KeyError:
        raise ConfigError(f"unknown activity group {name!r}; choose from {', '.join(GROUPS)}") from None


def group_of(activity: str) -> ActivityGroup:
    for g in GROUPS.values():
        if activity in g.labels:
            return g
    raise ConfigError(f"unknown activity code {activity!r}")


def check_applicable(group: ActivityGroup, config: SensorConfig) -> None:
    if not group.allows(config):
        raise ConfigError(
            f"configuration {config.name} is not applicable to the {group.name} group: "
            "its activities are performed one leg at a time, so configurations with "
            "sensors on both the right and left sides are excluded"
        )


def applicable_configs(group: ActivityGroup) -> list:
    return [c for c in CONFIGS if group.allows(c)]
