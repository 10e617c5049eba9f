"""Trajectory records, seeded RNG streams and CSV output."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: Philox keyed by ``(seed, stream_id)``.

    Philox is counter based, so a variate is addressed by
    ``(seed, stream_id, counter)`` and streams never overlap.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for v in (self.seed, self.stream_id):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed and stream_id must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        key = (int(self.stream_id) << 64) | int(self.seed)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        """Derived stream for auxiliary randomness (e.g. one per driver channel)."""
        return RngStream(self.seed, (int(self.stream_id) * 1_000_003 + 7919 * (k + 1)) % 2**64)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(int(rng or 0), 0).generator()
    raise TypeError(f"cannot make a random generator from {rng!r}")


def parse_record(record) -> tuple[int, float]:
    """``"full"``, ``"endpoints"``, ``("grid", dt)`` or ``"grid:0.2"`` -> (mode, dt)."""
    if isinstance(record, tuple):
        name, dt = record
    elif isinstance(record, str) and record.startswith("grid"):
        name, _, dt = record.partition(":")
        dt = float(dt) if dt else 1.0
    else:
        name, dt = record, 0.0
    if name == "full":
        return K.FULL, 0.0
    if name == "endpoints":
        return K.ENDPOINTS, 0.0
    if name == "grid":
        if not float(dt) > 0:
            raise ValueError("grid spacing must be positive")
        return K.GRIDDED, float(dt)
    raise ValueError(f"unknown record mode {record!r}")


@dataclass
class Trajectory:
    """Piecewise record of a path.

    ``kinds`` holds one event code per row (see ``_kernels.KIND_NAMES``);
    ``channels`` the reaction/channel index for jumps, ``values`` auxiliary
    numbers (offending rate for failures).  ``log`` keeps annotations that are
    not state rows (projections, boundary residence), as ``(t, kind, index, value)``.
    """

    times: np.ndarray
    states: np.ndarray
    kinds: np.ndarray
    channels: np.ndarray
    values: np.ndarray
    log: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    stats: dict = field(default_factory=dict)
    species: tuple[str, ...] = ()

    @classmethod
    def from_rows(cls, rows: np.ndarray, d: int, log=None, stats=None, species=()):
        # keep times strictly increasing: a step landing on t_end merges with the END row
        if len(rows) >= 2 and rows[-1, 0] == rows[-2, 0] and rows[-1, 1 + d] == K.END:
            plain = int(rows[-2, 1 + d]) in (K.EULER, K.GRID, K.ODE, K.PROJECT, K.START)
            rows = np.delete(rows, -2 if plain else -1, axis=0)
        return cls(
            times=rows[:, 0].copy(),
            states=rows[:, 1:1 + d].copy(),
            kinds=rows[:, 1 + d].astype(np.int64),
            channels=rows[:, 2 + d].astype(np.int64),
            values=rows[:, 3 + d].copy(),
            log=np.empty((0, 4)) if log is None else log,
            stats=dict(stats or {}),
            species=tuple(species),
        )

    def __len__(self):
        return len(self.times)

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def jumps(self) -> np.ndarray:
        return np.flatnonzero(self.kinds == K.JUMP)

    def at(self, t) -> np.ndarray:
        """Cadlag left limit at each time in ``t`` (holding the last record).

        A record taken exactly at ``t`` is used unless it is a jump, in which
        case the state before the jump is returned.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.min() < self.times[0] - 1e-12 or t.max() > self.times[-1] + 1e-12:
            raise ValueError(f"times outside trajectory range [{self.t_start}, {self.t_end}]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 1)
        at_jump = (self.kinds[idx] == K.JUMP) & (self.times[idx] == t) & (idx > 0)
        idx = np.where(at_jump, idx - 1, idx)
        return self.states[idx]

    def event_labels(self) -> list[str]:
        out = []
        for k, c, v in zip(self.kinds, self.channels, self.values):
            name = K.KIND_NAMES[int(k)]
            if k == K.JUMP:
                name = f"jump:{int(c)}"
            elif k == K.FAILURE:
                name = f"failure:{int(c)}:{v:.6g}"
            out.append(name)
        return out

    def to_csv(self, path=None, include_log: bool = True) -> str:
        """Write ``t,x_1..x_d,event``; annotation log rows are merged in time order."""
        rows = [(float(t), tuple(float(v) for v in x), lab, i)
                for i, (t, x, lab) in enumerate(zip(self.times, self.states, self.event_labels()))]
        if include_log and len(self.log):
            for t, kind, idx, val in self.log:
                x = self.at(min(max(t, self.t_start), self.t_end))[0]
                lab = K.KIND_NAMES[int(kind)]
                if kind in (K.PROJECT, K.CLAMP, K.RES_START, K.RES_END, K.EXIT_DIAG):
                    lab = f"{lab}:{int(idx)}"
                rows.append((float(t), tuple(float(v) for v in x), lab, len(rows) + 0.5))
            rows.sort(key=lambda r: (r[0], r[3]))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(self.d)] + ["event"])
        for t, x, lab, _ in rows:
            w.writerow([repr(t)] + [repr(v) for v in x] + [lab])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Parse a trajectory CSV back into (times, states, event labels)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        d = len(header) - 2
        t, x, ev = [], [], []
        for row in r:
            t.append(float(row[0]))
            x.append([float(v) for v in row[1:1 + d]])
            ev.append(row[-1])
    return np.array(t), np.array(x).reshape(len(t), d), ev
