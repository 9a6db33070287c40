"""Reading, writing, cleaning and synthesizing post records."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from basketflow.errors import InputError, ValidationError

CSV_HEADER = ("tourist_id", "attraction_id", "date")
FORMATS = ("csv", "jsonl")


@dataclass(frozen=True, order=True)
class PostRecord:
    tourist_id: str
    attraction_id: str
    date: dt.date

    def __post_init__(self):
        if not self.tourist_id.strip():
            raise ValueError("tourist_id is empty")
        if not self.attraction_id.strip():
            raise ValueError("attraction_id is empty")


@dataclass
class ParseResult:
    records: list[PostRecord]
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


def parse_date(value: str) -> dt.date:
    """Parse an ISO ``YYYY-MM-DD`` date; any time-of-day suffix is dropped."""
    value = value.strip()
    head, tail = value[:10], value[10:]
    if len(head) != 10 or (tail and tail[0] not in "T "):
        raise ValueError(f"bad date {value!r}")
    return dt.date.fromisoformat(head)


def _record(tourist, attraction, date) -> PostRecord:
    if not isinstance(tourist, (str, int)) or not isinstance(attraction, (str, int)):
        raise ValueError("ids must be strings")
    if not isinstance(date, str):
        raise ValueError("date must be a string")
    return PostRecord(str(tourist).strip(), str(attraction).strip(), parse_date(date))


def _lines(stream: IO) -> Iterable[str]:
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw.rstrip("\r\n")


def parse_posts(stream: IO, format: str = "csv") -> ParseResult:
    """Parse posts from a binary or text stream.

    Malformed lines are skipped and reported as ``(line_number, reason)``;
    blank lines and a leading CSV header are ignored.
    """
    if format not in FORMATS:
        raise ValidationError("format", f"expected one of {FORMATS}, got {format!r}")
    result = ParseResult([])
    try:
        for lineno, line in enumerate(_lines(stream), start=1):
            if not line.strip():
                continue
            try:
                if format == "csv":
                    row = next(csv.reader([line]))
                    if lineno == 1 and tuple(c.strip() for c in row) == CSV_HEADER:
                        continue
                    if len(row) != 3:
                        raise ValueError(f"expected 3 fields, got {len(row)}")
                    result.records.append(_record(*row))
                else:
                    obj = json.loads(line)
                    if not isinstance(obj, dict):
                        raise ValueError("not a JSON object")
                    result.records.append(_record(*(obj[k] for k in CSV_HEADER)))
            except (ValueError, KeyError, UnicodeDecodeError) as exc:
                result.skipped.append((lineno, str(exc)))
    except OSError as exc:
        raise InputError(f"cannot read input: {exc}") from exc
    return result


def read_posts(path, format: str = "csv") -> ParseResult:
    try:
        with open(path, "rb") as fh:
            return parse_posts(fh, format)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def write_posts(records: Iterable[PostRecord], stream: IO[str], format: str = "csv") -> None:
    if format == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow((r.tourist_id, r.attraction_id, r.date.isoformat()))
    elif format == "jsonl":
        for r in records:
            obj = {"tourist_id": r.tourist_id, "attraction_id": r.attraction_id, "date": r.date.isoformat()}
            stream.write(json.dumps(obj) + "\n")
    else:
        raise ValidationError("format", f"expected one of {FORMATS}, got {format!r}")


def posts_to_text(records: Iterable[PostRecord], format: str = "csv") -> str:
    buf = io.StringIO()
    write_posts(records, buf, format)
    return buf.getvalue()


def dedup_exact(records: Sequence[PostRecord]) -> list[PostRecord]:
    """Collapse exact (tourist, attraction, date) duplicates, keeping first occurrences."""
    return list(dict.fromkeys(records))


@dataclass(frozen=True)
class SyntheticParams:
    n_tourists: int
    n_attractions: int
    n_posts: int
    date_range: tuple[dt.date, dt.date] = (dt.date(2002, 6, 4), dt.date(2018, 3, 5))
    popularity_skew: float = 1.0
    session_burst_days: int = 3
    mean_trip_posts: float = 3.0

    def validate(self) -> None:
        if self.n_posts < 0:
            raise ValidationError("n_posts", "must be non-negative")
        if self.n_posts == 0:
            return
        for name in ("n_tourists", "n_attractions", "session_burst_days"):
            if getattr(self, name) < 1:
                raise ValidationError(name, "must be positive")
        if self.n_posts < self.n_tourists:
            raise ValidationError("n_posts", "must be at least n_tourists")
        if self.popularity_skew < 0:
            raise ValidationError("popularity_skew", "must be >= 0")
        if self.mean_trip_posts < 1:
            raise ValidationError("mean_trip_posts", "must be >= 1")
        start, end = self.date_range
        if end < start:
            raise ValidationError("date_range", "end precedes start")


def popularity_weights(n_attractions: int, skew: float) -> np.ndarray:
    ranks = np.arange(1, n_attractions + 1, dtype=float)
    w = ranks ** -skew
    return w / w.sum()


def generate_synthetic(params: SyntheticParams, seed: int) -> list[PostRecord]:
    """Draw a reproducible post stream.

    Each tourist gets at least one post. A tourist's posts are cut into trips
    of ``1 + Poisson(mean_trip_posts - 1)`` posts; every trip starts on a
    uniform day in ``date_range`` and its posts fall within
    ``session_burst_days`` consecutive days. Attractions are drawn i.i.d. from
    a power law over popularity ranks with exponent ``popularity_skew``.
    Records are returned ordered by date, then generation order.
    """
    params.validate()
    if params.n_posts == 0:
        return []
    rng = np.random.Generator(np.random.PCG64(seed))
    nt, na, n = params.n_tourists, params.n_attractions, params.n_posts
    start, end = params.date_range
    span = (end - start).days + 1

    per_tourist = 1 + rng.multinomial(n - nt, np.full(nt, 1.0 / nt))
    attractions = rng.choice(na, size=n, p=popularity_weights(na, params.popularity_skew))

    # Trip boundaries: draw a generous pool of trip lengths up front.
    lam = params.mean_trip_posts - 1.0
    trip_len = 1 + rng.poisson(lam, size=n)
    owner = np.repeat(np.arange(nt), per_tourist)
    trip_of_post = np.empty(n, dtype=np.int64)
    trip_id = 0
    cursor = 0
    for t in range(nt):
        c = int(per_tourist[t])
        filled = 0
        while filled < c:
            size = min(int(trip_len[trip_id]), c - filled)
            trip_of_post[cursor + filled : cursor + filled + size] = trip_id
            filled += size
            trip_id += 1
        cursor += c
    trip_start = rng.integers(0, span, size=trip_id)
    burst = min(params.session_burst_days, span)
    offset = rng.integers(0, burst, size=n)
    day = np.minimum(trip_start[trip_of_post] + offset, span - 1)

    width_t = len(str(nt - 1))
    width_a = len(str(na - 1))
    dates = {int(d): start + dt.timedelta(days=int(d)) for d in np.unique(day)}
    return [
        PostRecord(f"T{owner[i]:0{width_t}d}", f"A{attractions[i]:0{width_a}d}", dates[int(day[i])])
        for i in np.argsort(day, kind="stable")
    ]
