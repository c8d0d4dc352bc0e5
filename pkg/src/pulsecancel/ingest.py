"""On-disk formats: raw cube (int16 interleaved I/Q + JSON sidecar) and
heart-rate trace CSV.

Cube payloads are little-endian signed 16-bit, frame-major, one I and one Q
word per sample.  The sidecar records the dimensions, the quantization scale
and the radar configuration, so a cube file is self-describing.
"""

import contextlib
import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import RadarConfig, RadarCube
from .types import HrTrace, TraceEntry

INT16_HEADROOM = 0.9
BPM_VALID = (20.0, 250.0)


class CubeFormatError(ValueError):
    """Raw cube file does not match its declared layout."""


@dataclass
class RawCubeHeader:
    frames: int
    fast_time: int
    scale: float
    config: RadarConfig
    sample_format: str = "int16"
    endianness: str = "little"


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_raw_cube(cube: RadarCube, path, scale: float | None = None) -> RawCubeHeader:
    """Quantize to int16 and write payload + sidecar.

    Without an explicit scale, floats are scaled so the largest I or Q
    component sits at 90% of int16 full scale.  Pass the scale from a
    previously read header to get a byte-identical rewrite.
    """
    path = Path(path)
    iq = cube.iq
    if scale is None:
        peak = float(max(np.max(np.abs(iq.real)), np.max(np.abs(iq.imag))))
        scale = INT16_HEADROOM * 32767.0 / peak if peak > 0 else 1.0
    words = np.empty((cube.n_frames, cube.n_fast, 2), dtype="<i2")
    words[:, :, 0] = np.clip(np.rint(iq.real * scale), -32768, 32767)
    words[:, :, 1] = np.clip(np.rint(iq.imag * scale), -32768, 32767)
    words.tofile(path)

    header = RawCubeHeader(cube.n_frames, cube.n_fast, scale, cube.config)
    doc = {
        "frames": header.frames,
        "fast_time": header.fast_time,
        "sample_format": header.sample_format,
        "endianness": header.endianness,
        "scale": header.scale,
        "config": dataclasses.asdict(cube.config),
    }
    sidecar_path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return header


def read_cube_header(path) -> RawCubeHeader:
    side = sidecar_path(path)
    if not side.exists():
        raise CubeFormatError(f"missing sidecar {side}")
    doc = json.loads(side.read_text())
    try:
        if doc.get("sample_format", "int16") != "int16":
            raise CubeFormatError(f"unsupported sample format "
                                  f"{doc['sample_format']!r}")
        if doc.get("endianness", "little") != "little":
            raise CubeFormatError(f"unsupported endianness "
                                  f"{doc['endianness']!r}")
        return RawCubeHeader(
            frames=int(doc["frames"]),
            fast_time=int(doc["fast_time"]),
            scale=float(doc.get("scale", 1.0)),
            config=RadarConfig(**doc["config"]),
        )
    except (KeyError, TypeError) as exc:
        raise CubeFormatError(f"malformed sidecar {side}: {exc}") from exc


def read_raw_cube(path, config: RadarConfig | None = None) -> RadarCube:
    """Load a cube file, using the sidecar when present.

    Without a sidecar a config is required; the frame count is then inferred
    from the file length, which must divide evenly into frame records.
    """
    path = Path(path)
    if not path.exists():
        raise CubeFormatError(f"no such cube file {path}")
    actual = path.stat().st_size

    if sidecar_path(path).exists():
        header = read_cube_header(path)
        if config is not None and config != header.config:
            raise CubeFormatError("explicit config disagrees with sidecar")
        expected = header.frames * header.fast_time * 4
        if actual != expected:
            raise CubeFormatError(
                f"{path}: sidecar declares {header.frames} x "
                f"{header.fast_time} samples = {expected} bytes, file has "
                f"{actual}")
    else:
        if config is None:
            raise CubeFormatError(f"{path} has no sidecar; a radar config "
                                  f"is required to interpret it")
        record = config.adc_samples_per_chirp * 4
        if actual == 0 or actual % record:
            raise CubeFormatError(f"{path}: {actual} bytes is not a "
                                  f"multiple of the {record}-byte frame "
                                  f"record")
        header = RawCubeHeader(actual // record,
                               config.adc_samples_per_chirp, 1.0, config)
    if header.frames == 0:
        raise CubeFormatError(f"{path} holds no frames")

    words = np.fromfile(path, dtype="<i2")
    words = words.reshape(header.frames, header.fast_time, 2)
    iq = (words[:, :, 0].astype(float)
          + 1j * words[:, :, 1].astype(float)) / header.scale
    return RadarCube(iq, header.config)


# --- trace CSV -------------------------------------------------------------

def _open_out(path_or_file):
    if hasattr(path_or_file, "write"):
        return contextlib.nullcontext(path_or_file)
    return open(path_or_file, "w", newline="")


def write_truth(trace: HrTrace, path) -> None:
    """Two-column ground-truth CSV: time_s, hr_bpm."""
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "hr_bpm"])
        for e in trace:
            writer.writerow([repr(float(e.time_s)), repr(float(e.hr_bpm))])


def write_trace(trace: HrTrace, path) -> None:
    """Full estimate CSV: time_s, hr_bpm, tag, delta_hz."""
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "hr_bpm", "tag", "delta_hz"])
        for e in trace:
            writer.writerow([repr(float(e.time_s)), repr(float(e.hr_bpm)),
                             e.tag, repr(float(e.delta_hz))])


def read_reference_trace(path) -> HrTrace:
    """Read a truth or estimate CSV; times must increase, BPM must be sane."""
    path = Path(path)
    trace = HrTrace()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["time_s",
                                                                 "hr_bpm"]:
            raise ValueError(f"{path}: expected a time_s,hr_bpm header, "
                             f"got {header}")
        prev_t = None
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[0])
                bpm = float(row[1])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path} row {row_num}: {exc}") from exc
            if prev_t is not None and t <= prev_t:
                raise ValueError(f"{path} row {row_num}: time {t} not "
                                 f"increasing")
            lo, hi = BPM_VALID
            if not lo < bpm < hi:
                raise ValueError(f"{path} row {row_num}: {bpm} BPM outside "
                                 f"({lo}, {hi})")
            tag = row[2] if len(row) > 2 else "reference"
            delta = float(row[3]) if len(row) > 3 else 0.0
            trace.append(TraceEntry(t, bpm, tag, delta))
            prev_t = t
    if len(trace) == 0:
        raise ValueError(f"{path} holds no samples")
    return trace
