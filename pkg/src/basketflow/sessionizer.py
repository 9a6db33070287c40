"""Cut each tourist's post history into attraction sets (baskets)."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from basketflow.errors import SchemaError, ValidationError
from basketflow.ingest import PostRecord

SETS_SCHEMA = "basketflow.attraction_sets/1"


@dataclass(frozen=True)
class WindowConfig:
    window_days: int = 7

    def __post_init__(self):
        if self.window_days < 1:
            raise ValidationError("window_days", "must be >= 1")


@dataclass(frozen=True)
class AttractionSet:
    tourist_id: str
    attractions: tuple[str, ...]  # sorted, unique
    first_date: dt.date
    last_date: dt.date
    source_post_count: int

    def to_json(self) -> dict:
        return {
            "tourist_id": self.tourist_id,
            "attractions": list(self.attractions),
            "first_date": self.first_date.isoformat(),
            "last_date": self.last_date.isoformat(),
            "source_post_count": self.source_post_count,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "AttractionSet":
        return cls(
            obj["tourist_id"],
            tuple(sorted(set(obj["attractions"]))),
            dt.date.fromisoformat(obj["first_date"]),
            dt.date.fromisoformat(obj["last_date"]),
            int(obj.get("source_post_count", len(obj["attractions"]))),
        )


def order_posts(records: Iterable[PostRecord]) -> dict[str, list[PostRecord]]:
    """Group posts by tourist (keys sorted) and sort each list by date, stably."""
    groups: dict[str, list[PostRecord]] = {}
    for r in records:
        groups.setdefault(r.tourist_id, []).append(r)
    return {t: sorted(groups[t], key=lambda r: r.date) for t in sorted(groups)}


def _close(tourist: str, posts: list[PostRecord]) -> AttractionSet:
    return AttractionSet(
        tourist,
        tuple(sorted({p.attraction_id for p in posts})),
        posts[0].date,
        posts[-1].date,
        len(posts),
    )


def build_attraction_sets(
    ordered: Mapping[str, Sequence[PostRecord]], cfg: WindowConfig = WindowConfig()
) -> list[AttractionSet]:
    """Chain consecutive posts whose day gap is at most ``cfg.window_days``.

    Output is ordered by tourist id, then first date.
    """
    out = []
    for tourist in sorted(ordered):
        posts = ordered[tourist]
        if not posts:
            continue
        current = [posts[0]]
        for prev, post in zip(posts, posts[1:]):
            if (post.date - prev.date).days <= cfg.window_days:
                current.append(post)
            else:
                out.append(_close(tourist, current))
                current = [post]
        out.append(_close(tourist, current))
    return out


def drop_singletons(sets: Iterable[AttractionSet]) -> list[AttractionSet]:
    return [s for s in sets if len(s.attractions) >= 2]


def sessionize(records: Iterable[PostRecord], cfg: WindowConfig = WindowConfig()) -> tuple[list[AttractionSet], int]:
    """Run all three steps; returns the kept sets and the pre-drop set count."""
    sets = build_attraction_sets(order_posts(records), cfg)
    return drop_singletons(sets), len(sets)


def sets_to_json(sets: Sequence[AttractionSet], window_days: int | None = None) -> dict:
    return {
        "schema": SETS_SCHEMA,
        "window_days": window_days,
        "attraction_sets": [s.to_json() for s in sets],
    }


def sets_from_json(doc) -> list[AttractionSet]:
    found = doc.get("schema") if isinstance(doc, dict) else None
    if found != SETS_SCHEMA:
        raise SchemaError(f"expected schema {SETS_SCHEMA!r}, found {found!r}")
    try:
        return [AttractionSet.from_json(o) for o in doc["attraction_sets"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed attraction set: {exc}") from exc
