"""Datasets: REDD low-frequency loading, resampling, CSV I/O, synthetic homes.

Raw recordings keep one (timestamps, watts) pair per channel because channels
arrive unaligned; resample() turns a recording into the uniform-grid
TimeSeriesDataset everything downstream consumes.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

MAX_FILL_BUCKETS = 3


class DataError(Exception):
    """Unreadable, malformed, or inconsistent input data."""


@dataclass
class RawRecording:
    """Unaligned channels: name -> (timestamps ascending, watts)."""

    channels: dict


@dataclass
class TimeSeriesDataset:
    """Aligned series on an exactly uniform grid.

    All series share the timestamps; values are finite and non-negative watts.
    """

    sampling_rate: float  # Hz
    timestamps: np.ndarray
    mains: np.ndarray
    appliances: dict  # name -> ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.mains = np.asarray(self.mains, dtype=float)
        self.appliances = {k: np.asarray(v, dtype=float) for k, v in self.appliances.items()}
        n = self.timestamps.size
        if self.sampling_rate <= 0:
            raise DataError("sampling_rate must be positive")
        if n == 0 or self.mains.size != n or any(v.size != n for v in self.appliances.values()):
            raise DataError("all series must be non-empty and share one length")
        series = [self.mains, *self.appliances.values()]
        if any(not np.isfinite(v).all() for v in series):
            raise DataError("non-finite power values")
        if any(v.min() < 0 for v in series):
            raise DataError("negative power values")
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise DataError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def appliance_names(self) -> list:
        return list(self.appliances)

    def slice(self, start: int, stop: int) -> "TimeSeriesDataset":
        return TimeSeriesDataset(
            sampling_rate=self.sampling_rate,
            timestamps=self.timestamps[start:stop],
            mains=self.mains[start:stop],
            appliances={k: v[start:stop] for k, v in self.appliances.items()},
        )


def _read_channel(path: Path):
    """Parse 'unix_seconds watts' lines; names the offending line on failure."""
    if not path.exists():
        raise DataError(f"missing channel file {path}")
    try:
        raw = np.loadtxt(path, dtype=float, ndmin=2)
        if raw.size and raw.shape[1] != 2:
            raise ValueError("wrong column count")
    except Exception:
        # slow path only to produce a precise error message
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'timestamp watts', got {line!r}")
            try:
                float(parts[0]), float(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable numbers in {line!r}")
        raise DataError(f"{path}: unreadable channel data")
    if raw.size == 0:
        raise DataError(f"{path}: empty channel")
    ts, watts = raw[:, 0], raw[:, 1]
    if np.any(np.diff(ts) <= 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 2
        raise DataError(f"{path}:{bad}: timestamps not strictly increasing")
    return ts, watts


def load_redd(directory) -> RawRecording:
    """Load a REDD-format house directory.

    labels.dat maps channel numbers to names; channels 1 and 2 are the two
    mains phases and are summed (on the intersection of their timestamps) into
    a single "mains" channel. Duplicate appliance labels get _2, _3 suffixes.
    """
    directory = Path(directory)
    labels_path = directory / "labels.dat"
    if not labels_path.exists():
        raise DataError(f"missing labels file {labels_path}")
    labels = {}
    for lineno, line in enumerate(labels_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        m = re.fullmatch(r"\s*(\d+)\s+(\S+)\s*", line)
        if not m:
            raise DataError(f"{labels_path}:{lineno}: expected 'channel name', got {line!r}")
        labels[int(m.group(1))] = m.group(2)

    if 1 not in labels or 2 not in labels:
        raise DataError(f"{labels_path}: channels 1 and 2 (mains phases) are required")

    ts1, w1 = _read_channel(directory / "channel_1.dat")
    ts2, w2 = _read_channel(directory / "channel_2.dat")
    common, i1, i2 = np.intersect1d(ts1, ts2, return_indices=True)
    if common.size == 0:
        raise DataError("mains channels 1 and 2 share no timestamps")
    channels = {"mains": (common, w1[i1] + w2[i2])}

    seen: dict = {}
    for number in sorted(labels):
        if number in (1, 2):
            continue
        name = labels[number]
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            name = f"{name}_{seen[name]}"
        channels[name] = _read_channel(directory / f"channel_{number}.dat")
    return RawRecording(channels=channels)


def _bucket_means(ts, values, start, step, n_buckets):
    idx = np.floor((ts - start) / step).astype(int)
    keep = (idx >= 0) & (idx < n_buckets)
    idx, values = idx[keep], values[keep]
    counts = np.bincount(idx, minlength=n_buckets)
    sums = np.bincount(idx, weights=values, minlength=n_buckets)
    out = np.full(n_buckets, np.nan)
    nonzero = counts > 0
    out[nonzero] = sums[nonzero] / counts[nonzero]
    return out


def _forward_fill(values, max_run: int):
    """Fill nan runs of length <= max_run with the preceding value; longer runs stay."""
    out = values.copy()
    n = out.size
    i = 0
    while i < n:
        if not np.isnan(out[i]):
            i += 1
            continue
        j = i
        while j < n and np.isnan(out[j]):
            j += 1
        if i > 0 and (j - i) <= max_run:
            out[i:j] = out[i - 1]
        i = j
    return out


def resample(data, rate: float) -> TimeSeriesDataset:
    """Align all channels on a uniform grid at `rate` Hz by bucket means.

    The grid spans the overlap of all channels. Empty-bucket runs up to 3 long
    are forward-filled; longer gaps split the recording and the largest
    contiguous valid segment is kept (with a warning). A dataset already on
    the requested grid passes through unchanged.
    """
    if rate <= 0:
        raise DataError("rate must be positive")
    if isinstance(data, TimeSeriesDataset):
        if abs(data.sampling_rate - rate) < 1e-12:
            return data
        channels = {"mains": (data.timestamps, data.mains)}
        channels.update({k: (data.timestamps, v) for k, v in data.appliances.items()})
        data = RawRecording(channels=channels)

    step = 1.0 / rate
    start = max(ts[0] for ts, _ in data.channels.values())
    end = min(ts[-1] for ts, _ in data.channels.values())
    if start > end:
        raise DataError("channels share no overlapping time range")
    n_buckets = int(np.floor((end - start) / step)) + 1

    filled = {}
    for name, (ts, values) in data.channels.items():
        means = _bucket_means(ts, values, start, step, n_buckets)
        filled[name] = _forward_fill(means, MAX_FILL_BUCKETS)

    valid = np.ones(n_buckets, dtype=bool)
    for v in filled.values():
        valid &= ~np.isnan(v)
    if not valid.any():
        raise DataError("no valid buckets after resampling")
    if not valid.all():
        # keep the longest contiguous valid run
        best_len, best_start, run_start = 0, 0, None
        for i, ok in enumerate([*valid, False]):
            if ok and run_start is None:
                run_start = i
            elif not ok and run_start is not None:
                if i - run_start > best_len:
                    best_len, best_start = i - run_start, run_start
                run_start = None
        logger.warning("gaps longer than %d buckets: keeping %d of %d buckets",
                       MAX_FILL_BUCKETS, best_len, n_buckets)
        sel = slice(best_start, best_start + best_len)
    else:
        sel = slice(0, n_buckets)

    timestamps = start + np.arange(n_buckets) * step
    mains = filled.pop("mains")
    return TimeSeriesDataset(
        sampling_rate=rate,
        timestamps=timestamps[sel],
        mains=np.maximum(mains[sel], 0.0),
        appliances={k: np.maximum(v[sel], 0.0) for k, v in filled.items()},
    )


def load_csv(path) -> TimeSeriesDataset:
    """Read an aligned 'timestamp,mains,<appliance...>' CSV."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file {path}")
    lines = path.read_text().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) < 2 or header[0] != "timestamp" or header[1] != "mains":
        raise DataError(f"{path}: header must start with 'timestamp,mains'")
    names = header[2:]
    rows = np.empty((len(lines) - 1, len(header)))
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path}:{i}: expected {len(header)} columns, got {len(parts)}")
        try:
            rows[i - 2] = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"{path}:{i}: unparsable numbers in {line!r}")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least two samples")
    ts = rows[:, 0]
    steps = np.diff(ts)
    if np.any(steps <= 0):
        raise DataError(f"{path}: timestamps must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise DataError(f"{path}: timestamps are not uniformly spaced; resample first")
    return TimeSeriesDataset(
        sampling_rate=1.0 / steps[0],
        timestamps=ts,
        mains=rows[:, 1],
        appliances={name: rows[:, 2 + j] for j, name in enumerate(names)},
    )


def save_csv(dataset: TimeSeriesDataset, path) -> None:
    """Write a dataset with round-trippable float formatting."""
    names = dataset.appliance_names
    with open(path, "w") as fh:
        fh.write(",".join(["timestamp", "mains", *names]) + "\n")
        cols = [dataset.timestamps, dataset.mains] + [dataset.appliances[n] for n in names]
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class ApplianceSpec:
    """Markov-chain appliance: power levels and a row-stochastic transition matrix."""

    name: str
    levels: list
    transitions: list  # K x K rows summing to 1

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=float)
        k = len(self.levels)
        if t.shape != (k, k) or np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0):
            raise DataError(f"{self.name}: transitions must be a {k}x{k} row-stochastic matrix")


@dataclass
class SynthSpec:
    appliances: list = field(default_factory=list)
    duration_s: float = 10_000.0
    rate_hz: float = 1.0
    noise_sigma: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not self.appliances:
            raise DataError("need at least one appliance")
        if self.duration_s <= 0 or self.rate_hz <= 0 or self.noise_sigma < 0:
            raise DataError("duration, rate must be positive and noise_sigma >= 0")


def synth_spec_to_json(spec: SynthSpec) -> dict:
    return {
        "appliances": [
            {"name": a.name, "levels": list(a.levels),
             "transitions": [list(r) for r in a.transitions]}
            for a in spec.appliances
        ],
        "duration_s": spec.duration_s,
        "rate_hz": spec.rate_hz,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
    }


def synth_spec_from_json(doc: dict) -> SynthSpec:
    return SynthSpec(
        appliances=[ApplianceSpec(a["name"], a["levels"], a["transitions"])
                    for a in doc["appliances"]],
        duration_s=doc.get("duration_s", 10_000.0),
        rate_hz=doc.get("rate_hz", 1.0),
        noise_sigma=doc.get("noise_sigma", 5.0),
        seed=doc.get("seed", 0),
    )


def load_synth_spec(path) -> SynthSpec:
    try:
        return synth_spec_from_json(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"unreadable synthetic spec {path}: {exc}")


def default_synth_spec() -> SynthSpec:
    """Three two-state appliances with distinct switching speeds.

    Noise is deliberately large relative to the power-level gaps and one
    appliance switches nearly every sample, so per-sample decoders earn their
    keep only where the dynamics are genuinely informative.
    """
    return SynthSpec(
        appliances=[
            ApplianceSpec("app0", [0.0, 220.0], [[0.55, 0.45], [0.45, 0.55]]),
            ApplianceSpec("app1", [0.0, 160.0], [[0.90, 0.10], [0.10, 0.90]]),
            ApplianceSpec("app2", [0.0, 100.0], [[0.70, 0.30], [0.30, 0.70]]),
        ],
        duration_s=10_000.0,
        rate_hz=1.0,
        noise_sigma=40.0,
        seed=0,
    )


def generate_synthetic(spec: SynthSpec) -> TimeSeriesDataset:
    """Sample every appliance chain, add clipped Gaussian noise, sum into mains.

    Same spec (including seed), same dataset.
    """
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.rate_hz))
    if n < 2:
        raise DataError("duration too short for the sampling rate")
    step = 1.0 / spec.rate_hz

    appliances = {}
    total = np.zeros(n)
    for app in spec.appliances:
        levels = np.asarray(app.levels, dtype=float)
        trans = np.asarray(app.transitions, dtype=float)
        k = levels.size
        states = np.empty(n, dtype=int)
        states[0] = int(rng.integers(k))
        draws = rng.random(n - 1)
        cum = np.cumsum(trans, axis=1)
        for t in range(1, n):
            nxt = int(np.searchsorted(cum[states[t - 1]], draws[t - 1], side="right"))
            states[t] = min(nxt, k - 1)
        power = levels[states]
        if spec.noise_sigma > 0:
            power = power + rng.normal(0.0, spec.noise_sigma, n)
        power = np.maximum(power, 0.0)
        appliances[app.name] = power
        total += power

    mains = total
    if spec.noise_sigma > 0:
        mains = mains + rng.normal(0.0, spec.noise_sigma, n)
    mains = np.maximum(mains, 0.0)

    return TimeSeriesDataset(
        sampling_rate=spec.rate_hz,
        timestamps=np.arange(n) * step,
        mains=mains,
        appliances=appliances,
    )
