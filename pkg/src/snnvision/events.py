"""Event-stream front end.

Ingests address-event files (CSV or packed binary), downsamples the
240x180 sensor grid to the 16x16 input grid, bins timestamps into engine
timesteps (250 us each), and synthesizes jiggled bar-composition patterns
directly on the input grid as a parametric stand-in for camera recordings.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GRID_SIDE, N_PIXELS, partition_bounds, pixel_id

SENSOR_WIDTH = 240
SENSOR_HEIGHT = 180
STEP_US = 250

CSV_HEADER = "timestamp_us,x,y,polarity"
AER1_MAGIC = b"AER1"
_AER1_RECORD = struct.Struct("<IHHB")


class EventFormatError(ValueError):
    """Malformed event file; message carries the line or byte offset."""


@dataclass(frozen=True)
class RawEvent:
    timestamp_us: int
    x: int
    y: int
    polarity: int  # 1 = on, 0 = off

    def in_bounds(self) -> bool:
        return 0 <= self.x < SENSOR_WIDTH and 0 <= self.y < SENSOR_HEIGHT


@dataclass
class EventStream:
    """Loaded events in timestamp order plus the rejected-record count."""

    events: list[RawEvent]
    rejected: int = 0


# ---------------------------------------------------------------------------
# codecs


def _detect_format(path: Path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(4)
    return "aer1" if head == AER1_MAGIC else "csv"


def load_events(path: str | Path, fmt: str = "auto") -> EventStream:
    """Read an event file; out-of-bounds coordinates are counted and dropped,
    anything unparseable raises EventFormatError with its offset."""
    path = Path(path)
    if fmt == "auto":
        fmt = _detect_format(path)
    if fmt == "csv":
        stream = _load_csv(path)
    elif fmt == "aer1":
        stream = _load_aer1(path)
    else:
        raise ValueError(f"unknown event format {fmt!r}")
    stream.events.sort(key=lambda e: e.timestamp_us)
    return stream


def _load_csv(path: Path) -> EventStream:
    events: list[RawEvent] = []
    rejected = 0
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n\r")
        if header != CSV_HEADER:
            if header == "" and fh.readline() == "":
                return EventStream([], 0)
            raise EventFormatError(f"line 1: expected header {CSV_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise EventFormatError(f"line {lineno}: expected 4 fields")
            try:
                ts, x, y, pol = (int(p) for p in parts)
            except ValueError:
                raise EventFormatError(f"line {lineno}: non-integer field") from None
            if pol not in (0, 1) or ts < 0:
                raise EventFormatError(f"line {lineno}: bad polarity or timestamp")
            ev = RawEvent(ts, x, y, pol)
            if ev.in_bounds():
                events.append(ev)
            else:
                rejected += 1
    return EventStream(events, rejected)


def _load_aer1(path: Path) -> EventStream:
    data = Path(path).read_bytes()
    if len(data) == 0:
        return EventStream([], 0)
    if data[:4] != AER1_MAGIC:
        raise EventFormatError("byte 0: missing AER1 magic")
    body = data[4:]
    if len(body) % _AER1_RECORD.size:
        raise EventFormatError(
            f"byte {4 + len(body) - len(body) % _AER1_RECORD.size}: truncated record"
        )
    events: list[RawEvent] = []
    rejected = 0
    for off in range(0, len(body), _AER1_RECORD.size):
        ts, x, y, pol = _AER1_RECORD.unpack_from(body, off)
        if pol not in (0, 1):
            raise EventFormatError(f"byte {4 + off}: bad polarity {pol}")
        ev = RawEvent(ts, x, y, pol)
        if ev.in_bounds():
            events.append(ev)
        else:
            rejected += 1
    return EventStream(events, rejected)


def save_events(path: str | Path, events: list[RawEvent], fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", encoding="ascii") as fh:
            fh.write(CSV_HEADER + "\n")
            for e in events:
                fh.write(f"{e.timestamp_us},{e.x},{e.y},{e.polarity}\n")
    elif fmt == "aer1":
        with open(path, "wb") as fh:
            fh.write(AER1_MAGIC)
            for e in events:
                fh.write(_AER1_RECORD.pack(e.timestamp_us, e.x, e.y, e.polarity))
    else:
        raise ValueError(f"unknown event format {fmt!r}")


# ---------------------------------------------------------------------------
# binning


@dataclass
class BinnedInput:
    """Per-timestep active input pixels on the 16x16 grid."""

    n_steps: int
    spikes: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.spikes = {
            t: tuple(sorted(set(p))) for t, p in sorted(self.spikes.items()) if p
        }

    @property
    def total_spikes(self) -> int:
        return sum(len(p) for p in self.spikes.values())

    def active(self, step: int) -> tuple[int, ...]:
        return self.spikes.get(step, ())

    def to_forced(self, input_ids: np.ndarray, t_offset: int = 0) -> dict[int, list[int]]:
        """Translate pixel ids to engine neuron ids, shifted by t_offset."""
        return {
            t + t_offset: [int(input_ids[p]) for p in pix]
            for t, pix in self.spikes.items()
        }

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for t, pix in self.spikes.items():
                fh.write(json.dumps({"t": t, "pixels": list(pix)}) + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path, n_steps: int | None = None) -> "BinnedInput":
        spikes: dict[int, tuple[int, ...]] = {}
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                spikes[int(rec["t"])] = tuple(int(p) for p in rec["pixels"])
        top = max(spikes) + 1 if spikes else 0
        return cls(n_steps=n_steps if n_steps is not None else top, spikes=spikes)


def downsample_event(ev: RawEvent) -> tuple[int, int]:
    """(timestep, pixel id) of one raw event on the coarse grid."""
    gx = ev.x * GRID_SIDE // SENSOR_WIDTH
    gy = ev.y * GRID_SIDE // SENSOR_HEIGHT
    return ev.timestamp_us // STEP_US, pixel_id(gx, gy)


def downsample_bin(events: list[RawEvent]) -> BinnedInput:
    """Drop off-events, downsample to 16x16, bin into 250 us timesteps,
    collapsing duplicate (timestep, pixel) hits into one spike."""
    by_step: dict[int, set[int]] = {}
    last = 0
    for ev in events:
        if ev.polarity != 1:
            continue
        t, pid = downsample_event(ev)
        by_step.setdefault(t, set()).add(pid)
        last = max(last, t)
    return BinnedInput(
        n_steps=last + 1 if by_step else 0,
        spikes={t: tuple(sorted(p)) for t, p in by_step.items()},
    )


def upscale_to_events(binned: BinnedInput) -> list[RawEvent]:
    """Render a binned input back to raw on-events, one per spike, placed
    so that downsample_bin is an exact inverse."""
    events = []
    for t, pix in sorted(binned.spikes.items()):
        for pid in pix:
            gx, gy = pid % GRID_SIDE, pid // GRID_SIDE
            x = gx * (SENSOR_WIDTH // GRID_SIDE) + SENSOR_WIDTH // GRID_SIDE // 2
            y = int(gy * SENSOR_HEIGHT / GRID_SIDE) + 5
            events.append(RawEvent(t * STEP_US, x, y, 1))
    return events


# ---------------------------------------------------------------------------
# synthetic patterns

# A shape is a set of strokes on a 5x5 cell canvas: ("h", r) fills row r,
# ("v", c) fills column c.  Rendered at scale w (one of the recognition
# down-scale sizes), each cell covers one strip of the w-partition of the
# 16-pixel axis, so the drawing lands exactly on the pooling geometry.
Stroke = tuple[str, int]

SHAPES: dict[str, frozenset[Stroke]] = {
    "bar": frozenset({("h", 2)}),
    "tee": frozenset({("h", 0), ("v", 2)}),
    "ell": frozenset({("v", 0), ("h", 4)}),
    "plus": frozenset({("h", 2), ("v", 2)}),
    "corner": frozenset({("h", 1), ("v", 1)}),
    "hook": frozenset({("h", 2), ("v", 4)}),
    "zed": frozenset({("h", 3), ("v", 3)}),
}

# Default curriculum: stroke-disjoint shapes (no stroke appears in two of
# them), with zed -- also disjoint from all four -- reserved as the unseen
# probe.
TRAIN_SHAPES = ("tee", "hook", "ell", "corner")
NOVEL_SHAPE = "zed"

SCALE_SIZES = (5, 7, 9, 11)


def cells_of_shape(strokes: frozenset[Stroke]) -> list[tuple[int, int]]:
    """Sorted (row, col) cells of the 5x5 canvas covered by the strokes."""
    cells: set[tuple[int, int]] = set()
    for kind, idx in strokes:
        if kind == "h":
            cells.update((idx, c) for c in range(5))
        elif kind == "v":
            cells.update((r, idx) for r in range(5))
        else:
            raise ValueError(f"unknown stroke kind {kind!r}")
        if not 0 <= idx < 5:
            raise ValueError(f"stroke index {idx} outside the 5x5 canvas")
    return sorted(cells)


@dataclass(frozen=True)
class SynthPattern:
    """A bar-composed shape at one of the four size classes.

    scale is the recognition down-scale grid the drawing is aligned to
    (5 = full size, then 7, 9, 11 for progressively smaller patterns);
    position is the (row, col) strip offset of the drawing's 5x5 cell
    window inside that grid. The jiggle dithers the pixel drawing by
    +/- amplitude pixels, alternating axes every period timesteps.
    """

    shape: str
    scale: int = 5
    position: tuple[int, int] = (0, 0)
    jiggle_amplitude: int = 0
    jiggle_period: int = 100
    event_rate: float = 0.3

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r} (have {sorted(SHAPES)})")
        if self.scale not in SCALE_SIZES:
            raise ValueError(f"scale must be one of {SCALE_SIZES}")
        r, c = self.position
        if not (0 <= r <= self.scale - 5 and 0 <= c <= self.scale - 5):
            raise ValueError(
                f"position {self.position} leaves no room for a 5x5 window "
                f"in a {self.scale}x{self.scale} grid"
            )
        if not 0.0 <= self.event_rate <= 1.0:
            raise ValueError("event_rate must be in [0, 1]")
        if self.jiggle_amplitude < 0 or self.jiggle_period <= 0:
            raise ValueError("jiggle amplitude >= 0 and period > 0 required")
        for phase in range(4):
            self.pixels(phase)  # raises if any phase leaves the grid

    def base_pixels(self) -> list[tuple[int, int]]:
        """(x, y) pixels of the un-jiggled drawing."""
        bounds = partition_bounds(self.scale)
        r0, c0 = self.position
        pts: set[tuple[int, int]] = set()
        for r, c in cells_of_shape(SHAPES[self.shape]):
            for y in range(bounds[r0 + r], bounds[r0 + r + 1]):
                for x in range(bounds[c0 + c], bounds[c0 + c + 1]):
                    pts.add((x, y))
        return sorted(pts)

    def jiggle_offset(self, phase: int) -> tuple[int, int]:
        a = self.jiggle_amplitude
        return [(a, 0), (0, a), (-a, 0), (0, -a)][phase % 4]

    def pixels(self, phase: int) -> np.ndarray:
        """Sorted pixel ids of the drawing at one jiggle phase."""
        dx, dy = self.jiggle_offset(phase)
        ids = []
        for x, y in self.base_pixels():
            xx, yy = x + dx, y + dy
            if not (0 <= xx < GRID_SIDE and 0 <= yy < GRID_SIDE):
                raise ValueError(
                    f"jiggle amplitude {self.jiggle_amplitude} pushes pixel "
                    f"({x},{y}) off the grid"
                )
            ids.append(pixel_id(xx, yy))
        return np.array(sorted(ids), dtype=np.int64)


def synthesize(pattern: SynthPattern, duration_steps: int, seed: int) -> BinnedInput:
    """Emit spikes on the pattern's pixels, each pixel firing independently
    with probability event_rate per timestep; deterministic per seed."""
    if duration_steps < 0:
        raise ValueError("duration_steps must be >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    phases = [pattern.pixels(p) for p in range(4)]
    spikes: dict[int, tuple[int, ...]] = {}
    if pattern.event_rate > 0.0:
        for t in range(duration_steps):
            pix = phases[(t // pattern.jiggle_period) % 4]
            hit = rng.random(pix.shape[0]) < pattern.event_rate
            if hit.any():
                spikes[t] = tuple(int(p) for p in pix[hit])
    return BinnedInput(n_steps=duration_steps, spikes=spikes)


def inject_noise(binned: BinnedInput, noise_percent: float, seed: int) -> BinnedInput:
    """Add uniformly random extra (timestep, pixel) spikes totalling
    noise_percent/100 of the signal spike count (rounded half up), never
    colliding with existing spikes; deterministic per seed."""
    if noise_percent < 0:
        raise ValueError("noise_percent must be >= 0")
    n_signal = binned.total_spikes
    n_add = int(np.floor(n_signal * noise_percent / 100.0 + 0.5))
    if n_add == 0:
        return BinnedInput(binned.n_steps, dict(binned.spikes))
    if binned.n_steps == 0:
        raise ValueError("cannot add noise to a zero-length stream")
    capacity = binned.n_steps * N_PIXELS - n_signal
    if n_add > capacity:
        raise ValueError(f"not enough free (timestep, pixel) slots for {n_add} spikes")
    occupied = {
        t * N_PIXELS + p for t, pix in binned.spikes.items() for p in pix
    }
    rng = np.random.Generator(np.random.PCG64(seed))
    added: set[int] = set()
    while len(added) < n_add:
        draws = rng.integers(0, binned.n_steps * N_PIXELS, size=2 * (n_add - len(added)))
        for slot in draws:
            slot = int(slot)
            if slot not in occupied and slot not in added:
                added.add(slot)
                if len(added) == n_add:
                    break
    merged: dict[int, set[int]] = {t: set(p) for t, p in binned.spikes.items()}
    for slot in added:
        merged.setdefault(slot // N_PIXELS, set()).add(slot % N_PIXELS)
    return BinnedInput(
        n_steps=binned.n_steps,
        spikes={t: tuple(sorted(p)) for t, p in merged.items()},
    )
