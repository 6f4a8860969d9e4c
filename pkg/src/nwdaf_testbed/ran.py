"""gNB layout, a linear distance-to-dBm signal model and hysteresis handover decisions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .domain import CellId, Position


@dataclass(frozen=True)
class RadioConfig:
    dbm_per_unit: float = 1.0
    hysteresis_db: float = 3.0

    def __post_init__(self) -> None:
        if self.dbm_per_unit <= 0:
            raise ValueError("dbm_per_unit must be positive")
        if self.hysteresis_db < 0:
            raise ValueError("hysteresis_db must be non-negative")


DEFAULT_RADIO = RadioConfig()


@dataclass(frozen=True)
class CellSite:
    cell: CellId
    position: Position
    coverage_radius: float = 120.0
    threshold_dbm: float = -120.0

    def __post_init__(self) -> None:
        if self.coverage_radius <= 0:
            raise ValueError(f"{self.cell.id}: coverage_radius must be positive")
        if self.threshold_dbm >= 0:
            raise ValueError(f"{self.cell.id}: threshold_dbm must be negative")


def rsrp(site: CellSite, pos: Position, cfg: RadioConfig = DEFAULT_RADIO) -> float:
    """Received power in dBm: minus ``dbm_per_unit`` per unit of distance."""
    return -cfg.dbm_per_unit * math.hypot(pos.x - site.position.x, pos.y - site.position.y)


def best_cell(
    pos: Position, sites: Sequence[CellSite], cfg: RadioConfig = DEFAULT_RADIO
) -> Optional[tuple[CellId, float]]:
    best = None
    for site in sites:
        power = rsrp(site, pos, cfg)
        if power < site.threshold_dbm:
            continue
        if best is None or power > best[1] or (power == best[1] and site.cell.id < best[0].id):
            best = (site.cell, power)
    return best


@dataclass(frozen=True)
class Stay:
    pass


@dataclass(frozen=True)
class Handover:
    target: CellId


@dataclass(frozen=True)
class RadioLoss:
    pass


Decision = Union[Stay, Handover, RadioLoss]

STAY = Stay()
RADIO_LOSS = RadioLoss()


def handover_decision(
    serving: CellId, pos: Position, sites: Sequence[CellSite], cfg: RadioConfig = DEFAULT_RADIO
) -> Decision:
    """Hand over to the strongest in-range neighbour beating serving by the hysteresis margin."""
    serving_site = None
    powers = []
    for site in sites:
        power = rsrp(site, pos, cfg)
        powers.append((site, power))
        if site.cell == serving:
            serving_site = (site, power)
    if serving_site is None:
        raise ValueError(f"serving cell {serving.id} is not in the site list")
    if all(power < site.threshold_dbm for site, power in powers):
        return RADIO_LOSS
    margin = serving_site[1] + cfg.hysteresis_db
    target = None
    for site, power in powers:
        if site.cell == serving or power < site.threshold_dbm or power <= margin:
            continue
        if target is None or power > target[1] or (power == target[1] and site.cell.id < target[0].cell.id):
            target = (site, power)
    return Handover(target[0].cell) if target else STAY
