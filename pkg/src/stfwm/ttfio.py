"""Tag-file formats and the flat run-configuration format.

TT4F is a little-endian binary container for four-channel picosecond time
tags: a 24-byte header (magic "TT4F", u16 version = 1, u16 reserved = 0,
u64 repetition period in ps, u64 record count) followed by packed records of
u8 channel (1..4) and u64 timestamp.  A CSV twin ("channel,timestamp_ps")
exists for interoperability; both decode to the same four sorted streams.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .coinc import CoincConfig
from .core import OverlapModel
from .tagsim import DetectorConfig, PulseTrainConfig, SourceConfig

MAGIC = b"TT4F"
VERSION = 1
_HEADER = struct.Struct("<4sHHQQ")
_RECORD_DTYPE = np.dtype([("channel", "<u1"), ("timestamp", "<u8")])

CSV_HEADER = "channel,timestamp_ps"


class FormatError(ValueError):
    """Corrupt or unrecognized tag file."""


class ConfigError(ValueError):
    """Invalid or unknown run-configuration key/value."""


def write_tt4f(path, streams, period_ps: int) -> None:
    """Write four per-channel timestamp arrays, merged into global time order."""
    chans = np.concatenate(
        [np.full(len(s), ch + 1, dtype=np.uint8) for ch, s in enumerate(streams)]
    )
    times = np.concatenate([np.asarray(s, dtype=np.uint64) for s in streams])
    order = np.argsort(times, kind="stable")
    records = np.empty(times.size, dtype=_RECORD_DTYPE)
    records["channel"] = chans[order]
    records["timestamp"] = times[order]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0, period_ps, records.size))
        records.tofile(fh)


def read_tt4f(path) -> tuple[list[np.ndarray], int]:
    """Read a TT4F file back into four sorted int64 streams plus the period."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, _, period, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        body = fh.read()
    if len(body) != count * _RECORD_DTYPE.itemsize:
        raise FormatError(
            f"{path}: header promises {count} records, body holds "
            f"{len(body) // _RECORD_DTYPE.itemsize}"
        )
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    return _split_channels(records["channel"], records["timestamp"], path), int(period)


def write_csv_tags(path, streams) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        chans = np.concatenate(
            [np.full(len(s), ch + 1, dtype=np.int64) for ch, s in enumerate(streams)]
        )
        times = np.concatenate([np.asarray(s, dtype=np.int64) for s in streams])
        order = np.argsort(times, kind="stable")
        for c, t in zip(chans[order], times[order]):
            fh.write(f"{c},{t}\n")


def read_csv_tags(path) -> list[np.ndarray]:
    chans, times = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise FormatError(f"{path}: expected header '{CSV_HEADER}', got '{header}'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                c, t = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise FormatError(f"{path}:{lineno}: malformed record '{line}'") from None
            chans.append(c)
            times.append(t)
    return _split_channels(
        np.array(chans, dtype=np.int64), np.array(times, dtype=np.int64), path
    )


def read_tags(path) -> tuple[list[np.ndarray], int | None]:
    """Sniff TT4F vs CSV by magic; returns (streams, period or None for CSV)."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_tt4f(path)
    return read_csv_tags(path), None


def _split_channels(chans, times, path) -> list[np.ndarray]:
    streams = []
    bad = (chans < 1) | (chans > 4)
    if np.any(bad):
        raise FormatError(f"{path}: channel out of range 1..4")
    for ch in range(1, 5):
        t = times[chans == ch].astype(np.int64)
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise FormatError(f"{path}: channel {ch} timestamps not non-decreasing")
        streams.append(t)
    return streams


# --- run configuration ------------------------------------------------------

_INT_KEYS = {"n_pulses", "period_ps", "seed", "gate_ps", "max_lag"}
_FLOAT_KEYS = {
    "p1", "p2", "tau_ps", "tau0_ps", "sigma_tau_ps", "visibility", "loop_transmission"
}
_CHANNEL_KEYS = {"efficiency", "jitter_ps", "dark_hz", "dead_ps", "offset_ps"}

DEFAULTS: dict[str, float | int] = {
    "n_pulses": 1_000_000,
    "period_ps": 3125,
    "seed": 0,
    "gate_ps": 1280,
    "max_lag": 5,
    "p1": 0.03,
    "p2": 0.03,
    "tau_ps": 0.0,
    "tau0_ps": 0.0,
    "sigma_tau_ps": 4.25,
    "visibility": 0.71,
    "loop_transmission": 1.0,
}
for _ch in range(1, 5):
    DEFAULTS[f"ch{_ch}_efficiency"] = 0.10
    DEFAULTS[f"ch{_ch}_jitter_ps"] = 70.0
    DEFAULTS[f"ch{_ch}_dark_hz"] = 0.0
    DEFAULTS[f"ch{_ch}_dead_ps"] = 0.0
    DEFAULTS[f"ch{_ch}_offset_ps"] = 0.0


@dataclass
class RunConfig:
    """Typed bundle of everything one reproducible run needs."""

    pulse: PulseTrainConfig
    source: SourceConfig
    detectors: tuple[DetectorConfig, DetectorConfig, DetectorConfig, DetectorConfig]
    coinc: CoincConfig
    seed: int
    raw: dict[str, float | int] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_run_config(text: str) -> RunConfig:
    """Parse the flat key=value format; unknown keys are rejected.

    Lines are ``key = value``; blank lines and '#' comments are ignored.
    Units are picoseconds, Hz and plain probabilities as in the key names.
    """
    values: dict[str, float | int] = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got '{line}'")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        try:
            values[key] = int(val) if key in _INT_KEYS else float(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for '{key}': '{val}'") from None
    return build_run_config(values)


def build_run_config(values: dict[str, float | int]) -> RunConfig:
    try:
        pulse = PulseTrainConfig(
            period_ps=int(values["period_ps"]), n_pulses=int(values["n_pulses"])
        )
        source = SourceConfig(
            p1=float(values["p1"]),
            p2=float(values["p2"]),
            overlap=OverlapModel(
                visibility=float(values["visibility"]),
                sigma_tau_ps=float(values["sigma_tau_ps"]),
                tau0_ps=float(values["tau0_ps"]),
            ),
            tau_ps=float(values["tau_ps"]),
            loop_transmission=float(values["loop_transmission"]),
        )
        detectors = tuple(
            DetectorConfig(
                efficiency=float(values[f"ch{ch}_efficiency"]),
                jitter_sigma_ps=float(values[f"ch{ch}_jitter_ps"]),
                dark_rate_hz=float(values[f"ch{ch}_dark_hz"]),
                dead_time_ps=float(values[f"ch{ch}_dead_ps"]),
                nominal_offset_ps=float(values[f"ch{ch}_offset_ps"]),
            )
            for ch in range(1, 5)
        )
        coinc = CoincConfig(
            period_ps=int(values["period_ps"]),
            gate_halfwidth_ps=int(values["gate_ps"]),
            max_lag=int(values["max_lag"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(pulse, source, detectors, coinc, int(values["seed"]), dict(values))


def load_run_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_run_config(fh.read())
