"""Activity-based mobility: time-of-day activity choice, travel, dwell, attach/detach."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import Position, SimInstant, Supi, TimeCategory, time_category_of

WeightTable = Mapping[TimeCategory, Mapping[str, float]]

PERSONAL_TYPES = ("home", "work")


@dataclass(frozen=True)
class ActivityLocation:
    name: str
    position: Position
    activity_type: str
    dwell_mean_s: float
    dwell_std_s: float
    personal_owner: Optional[Supi] = None

    def __post_init__(self) -> None:
        if self.dwell_mean_s <= 0:
            raise ValueError(f"{self.name}: dwell mean must be positive")
        if self.dwell_std_s < 0:
            raise ValueError(f"{self.name}: dwell std must be non-negative")
        if self.activity_type in PERSONAL_TYPES and self.personal_owner is None:
            raise ValueError(f"{self.name}: personal location needs an owner")
        if self.activity_type not in PERSONAL_TYPES and self.personal_owner is not None:
            raise ValueError(f"{self.name}: public location cannot have an owner")

    def accessible_to(self, supi: Supi) -> bool:
        return self.personal_owner is None or self.personal_owner == supi


@dataclass(frozen=True)
class MobilityProfile:
    epsilon: float = 0.3
    v_min: float = 1.0
    v_max: float = 2.0
    speed_modifiers: Mapping[tuple[str, TimeCategory], float] = field(default_factory=dict)
    dwell_floor_s: float = 60.0

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("speeds must satisfy 0 < v_min <= v_max")
        if any(s <= 0 for s in self.speed_modifiers.values()):
            raise ValueError("speed modifiers must be positive")
        if self.dwell_floor_s <= 0:
            raise ValueError("dwell floor must be positive")

    def speed_modifier(self, activity_type: str, category: TimeCategory) -> float:
        return self.speed_modifiers.get((activity_type, category), 1.0)

    @property
    def max_speed(self) -> float:
        return self.v_max * max([1.0, *self.speed_modifiers.values()])


def validate_weights(weights: WeightTable, known_types: set[str]) -> None:
    for cat in TimeCategory:
        row = weights.get(cat)
        if not row:
            raise ValueError(f"weight table has no entry for {cat.value}")
        if any(w < 0 for w in row.values()):
            raise ValueError(f"{cat.value}: negative weight")
        if not any(w > 0 for w in row.values()):
            raise ValueError(f"{cat.value}: needs at least one positive weight")
        unknown = set(row) - known_types
        if unknown:
            raise ValueError(f"{cat.value}: unknown activity types {sorted(unknown)}")


def adjusted_weights(weights: Mapping[str, float], current_type: Optional[str], epsilon: float) -> dict[str, float]:
    """Scale the current activity type's weight by ``epsilon``; others unchanged."""
    return {k: epsilon * w if k == current_type else w for k, w in weights.items()}


def activity_probabilities(weights: Mapping[str, float]) -> dict[str, float]:
    total = math.fsum(weights.values())
    if not total > 0:
        raise ValueError("weights must have a positive sum")
    return {k: w / total for k, w in weights.items()}


def sample_activity_type(rng: np.random.Generator, probs: Mapping[str, float]) -> str:
    """Categorical draw over ``probs`` (keys visited in sorted order for reproducibility)."""
    keys = sorted(k for k, p in probs.items() if p > 0)
    u = rng.random()
    acc = 0.0
    for k in keys:
        acc += probs[k]
        if u < acc:
            return k
    return keys[-1]


def eligible_destinations(
    activity_type: str, locations: Sequence[ActivityLocation], supi: Supi, current: Optional[ActivityLocation]
) -> list[ActivityLocation]:
    return [
        loc for loc in locations
        if loc.activity_type == activity_type and loc.accessible_to(supi) and loc != current
    ]


def select_destination(
    rng: np.random.Generator,
    activity_type: str,
    locations: Sequence[ActivityLocation],
    supi: Supi,
    current: Optional[ActivityLocation] = None,
) -> Optional[ActivityLocation]:
    """Uniform pick among eligible locations; None tells the caller to resample the type."""
    cands = eligible_destinations(activity_type, locations, supi, current)
    if not cands:
        return None
    return cands[int(rng.integers(len(cands)))] if len(cands) > 1 else cands[0]


def sample_speed(
    rng: np.random.Generator, profile: MobilityProfile, activity_type: str, category: TimeCategory
) -> float:
    v0 = profile.v_min if profile.v_min == profile.v_max else rng.uniform(profile.v_min, profile.v_max)
    return v0 * profile.speed_modifier(activity_type, category)


def heading(current: Position, dest: Position) -> float:
    if current == dest:
        raise ValueError("heading undefined when already at destination")
    return math.atan2(dest.y - current.y, dest.x - current.x)


def sample_truncated_normal(rng: np.random.Generator, mean: float, std: float, floor: float) -> float:
    value = mean if std == 0 else rng.normal(mean, std)
    return max(floor, value)


def ue_rng(seed: int, supi: Supi, stream: int) -> np.random.Generator:
    """Independent generator per (scenario seed, UE, purpose)."""
    key = int.from_bytes(hashlib.sha256(supi.encode()).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([seed, key, stream]))


MOBILITY_STREAM, ATTACH_STREAM, TRAFFIC_STREAM = 0, 1, 2


class UeMode(str, Enum):
    ALWAYS_ON = "ALWAYS_ON"
    DYNAMIC = "DYNAMIC"


class Phase(str, Enum):
    MOVING = "MOVING"
    DWELLING = "DWELLING"


@dataclass(frozen=True)
class NormalSpec:
    mean_s: float
    std_s: float

    def __post_init__(self) -> None:
        if self.mean_s <= 0 or self.std_s < 0:
            raise ValueError("duration needs mean > 0 and std >= 0")


@dataclass(frozen=True)
class UeBehavior:
    supi: Supi
    mode: UeMode
    home: ActivityLocation
    work: Optional[ActivityLocation] = None
    on_duration: NormalSpec = NormalSpec(101 * 60.0, 5 * 60.0)
    off_duration: NormalSpec = NormalSpec(38.5 * 60.0, 2 * 60.0)
    duration_floor_s: float = 60.0
    # fixed visiting order; overrides activity sampling when set
    itinerary: tuple[ActivityLocation, ...] = ()


@dataclass
class Arrival:
    location: ActivityLocation
    dwell_s: float


class UeAgent:
    """Runtime mobility and attach state of one UE."""

    def __init__(
        self,
        behavior: UeBehavior,
        profile: MobilityProfile,
        weights: WeightTable,
        locations: Sequence[ActivityLocation],
        seed: int,
        start: Optional[SimInstant] = None,
    ) -> None:
        self.behavior = behavior
        self.supi = behavior.supi
        self.profile = profile
        self.weights = weights
        self.locations = list(locations)
        self.rng = ue_rng(seed, behavior.supi, MOBILITY_STREAM)
        self.attach_rng = ue_rng(seed, behavior.supi, ATTACH_STREAM)
        self.position = behavior.home.position
        self.location: Optional[ActivityLocation] = behavior.home
        self.phase = Phase.DWELLING
        self.dest: Optional[ActivityLocation] = None
        self.speed = 0.0
        self.theta = 0.0
        self.dwell_remaining = self.sample_dwell(behavior.home)
        self.detached = False
        self._itinerary_idx = 0
        self.next_toggle_at = math.inf
        if behavior.mode is UeMode.DYNAMIC:
            t0 = start.offset_s if start else 0.0
            self.next_toggle_at = t0 + self._sample_interval(behavior.on_duration)

    def sample_dwell(self, loc: ActivityLocation) -> float:
        return sample_truncated_normal(self.rng, loc.dwell_mean_s, loc.dwell_std_s, self.profile.dwell_floor_s)

    def _sample_interval(self, spec: NormalSpec) -> float:
        return sample_truncated_normal(self.attach_rng, spec.mean_s, spec.std_s, self.behavior.duration_floor_s)

    def attach_detach_tick(self, now: SimInstant) -> Optional[str]:
        """Toggle attachment when the current on/off interval has elapsed."""
        if self.behavior.mode is UeMode.ALWAYS_ON or now.offset_s < self.next_toggle_at:
            return None
        if self.detached:
            self.detached = False
            self.next_toggle_at = now.offset_s + self._sample_interval(self.behavior.on_duration)
            return "attach"
        self.detached = True
        self.next_toggle_at = now.offset_s + self._sample_interval(self.behavior.off_duration)
        return "detach"

    def _choose_next(self, category: TimeCategory) -> Optional[tuple[str, ActivityLocation]]:
        if self.behavior.itinerary:
            route = self.behavior.itinerary
            self._itinerary_idx = (self._itinerary_idx + 1) % len(route)
            dest = route[self._itinerary_idx]
            return dest.activity_type, dest
        current_type = self.location.activity_type if self.location else None
        weights = adjusted_weights(self.weights[category], current_type, self.profile.epsilon)
        while any(w > 0 for w in weights.values()):
            k = sample_activity_type(self.rng, activity_probabilities(weights))
            dest = select_destination(self.rng, k, self.locations, self.supi, self.location)
            if dest is not None:
                return k, dest
            weights[k] = 0.0
        return None

    def plan_trip(self, now: SimInstant) -> None:
        category = time_category_of(now)
        choice = self._choose_next(category)
        if choice is None or choice[1].position == self.position:
            # nowhere else to go: stay put for another dwell period
            loc = choice[1] if choice else self.location
            self.location = loc
            self.dwell_remaining = self.sample_dwell(loc) if loc else self.profile.dwell_floor_s
            return
        k, dest = choice
        self.dest = dest
        self.speed = sample_speed(self.rng, self.profile, k, category)
        self.theta = heading(self.position, dest.position)
        self.location = None
        self.phase = Phase.MOVING

    def step(self, dt: float) -> Optional[Arrival]:
        """Move ``speed * dt`` along the heading, clamping onto the destination on arrival."""
        dest = self.dest.position
        remaining = math.hypot(dest.x - self.position.x, dest.y - self.position.y)
        travel = self.speed * dt
        if remaining <= travel:
            self.position = dest
            self.location = self.dest
            self.dest = None
            self.phase = Phase.DWELLING
            self.dwell_remaining = self.sample_dwell(self.location)
            return Arrival(self.location, self.dwell_remaining)
        self.position = Position(
            self.position.x + travel * math.cos(self.theta),
            self.position.y + travel * math.sin(self.theta),
        )
        return None

    def advance(self, now: SimInstant, dt: float) -> bool:
        """Advance one tick; returns True when the position changed."""
        if self.detached:
            return False
        if self.phase is Phase.MOVING:
            self.step(dt)
            return True
        self.dwell_remaining -= dt
        if self.dwell_remaining <= 0:
            self.plan_trip(now)
        return False
