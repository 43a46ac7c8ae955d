"""IMU recordings and their CSV / manifest file formats.

One CSV per subject per activity::

    subject,activity,t,RF_ax,RF_ay,RF_az,RF_gx,RF_gy,RF_gz,LF_ax,...,LM_gz

``t`` is the sample index. Accelerations are in g, angular velocities in
dps, sampled at 102.4 Hz. A manifest CSV (``file,subject,activity``) lists
the recording files of a dataset; paths are relative to the manifest.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .registry import ACCEL_RANGE, COMPONENTS, GYRO_RANGE, SAMPLE_RATE, SENSORS

SIGNAL_COLUMNS = tuple(f"{s.value}_{c}" for s in SENSORS for c in COMPONENTS)
HEADER = ("subject", "activity", "t") + SIGNAL_COLUMNS
MANIFEST_HEADER = ("file", "subject", "activity")


@dataclass
class ImuRecording:
    subject_id: int
    activity: str
    streams: dict  # SensorId -> (T, 6) array
    sample_rate: float = SAMPLE_RATE

    @property
    def length(self) -> int:
        return len(next(iter(self.streams.values())))

    def validate(self) -> "ImuRecording":
        missing = [s.value for s in SENSORS if s not in self.streams]
        if missing:
            raise DataError(f"recording missing sensors: {', '.join(missing)}")
        lengths = {s.value: self.streams[s].shape[0] for s in SENSORS}
        if len(set(lengths.values())) != 1:
            raise DataError(f"sensor streams differ in length: {lengths}")
        for s in SENSORS:
            arr = self.streams[s]
            if arr.ndim != 2 or arr.shape[1] != 6:
                raise DataError(f"{s.value} stream must be (T, 6), got {arr.shape}")
            _check_range(arr, s)
        return self


def _check_range(arr, sensor, row_offset=0):
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(f"non-finite sample at row {r + row_offset}, column {sensor.value}_{COMPONENTS[c]}")
    limits = np.array([ACCEL_RANGE] * 3 + [GYRO_RANGE] * 3)
    bad = np.abs(arr) > limits
    if bad.any():
        r, c = np.argwhere(bad)[0]
        unit = "g" if c < 3 else "dps"
        raise DataError(
            f"sample out of range at row {r + row_offset}, column {sensor.value}_{COMPONENTS[c]}: "
            f"{arr[r, c]} exceeds ±{limits[c]:g} {unit}"
        )


def ingest_csv(path) -> ImuRecording:
    """Read and validate one recording file. Nothing is clamped."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = tuple(h.strip() for h in lines[0].split(","))
    missing = [s.value for s in SENSORS if not any(h.startswith(s.value + "_") for h in header)]
    if missing:
        raise DataError(f"{path}: missing sensor columns for {', '.join(missing)}")
    if header != HEADER:
        raise DataError(f"{path}: header does not match the expected column layout")
    rows = lines[1:]
    if not rows:
        raise DataError(f"{path}: no samples")

    subject = activity = None
    for i, line in enumerate(rows, start=1):
        parts = line.split(",", 3)
        if len(parts) < 4 or line.count(",") != len(HEADER) - 1:
            raise DataError(f"{path}: malformed row {i}: expected {len(HEADER)} fields")
        if subject is None:
            subject, activity = parts[0], parts[1]
        elif (parts[0], parts[1]) != (subject, activity):
            raise DataError(f"{path}: row {i} changes subject/activity")
        if parts[2] != str(i - 1):
            raise DataError(f"{path}: row {i} has sample index {parts[2]!r}, expected {i - 1}")
    try:
        subject_id = int(subject)
    except ValueError:
        raise DataError(f"{path}: subject id {subject!r} is not an integer") from None
    try:
        data = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", usecols=range(3, len(HEADER)), ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: malformed numeric value ({exc})") from None

    streams = {}
    for k, s in enumerate(SENSORS):
        arr = data[:, 6 * k : 6 * k + 6].copy()
        try:
            _check_range(arr, s, row_offset=1)
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from None
        streams[s] = arr
    return ImuRecording(subject_id, activity, streams)


def write_csv(recording: ImuRecording, path) -> None:
    """Write ``recording`` in the CSV schema (six decimals, LF endings)."""
    recording.validate()
    data = np.hstack([recording.streams[s] for s in SENSORS])
    prefix = f"{recording.subject_id},{recording.activity},"
    fmt = ",".join(["%.6f"] * data.shape[1])
    out = [",".join(HEADER)]
    out.extend(prefix + str(t) + "," + fmt % tuple(row) for t, row in enumerate(data))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def write_manifest(entries, path) -> None:
    """``entries`` is an iterable of ``(relative_file, subject, activity)``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        w.writerows(entries)


def read_manifest(path) -> list:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_HEADER:
            raise DataError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}")
        entries = []
        for i, row in enumerate(reader, start=1):
            if len(row) != 3:
                raise DataError(f"{path}: malformed manifest row {i}")
            try:
                entries.append((path.parent / row[0], int(row[1]), row[2]))
            except ValueError:
                raise DataError(f"{path}: manifest row {i} has non-integer subject") from None
    return entries


def load_manifest(path, activities=None) -> list:
    """Load every recording listed in a manifest, optionally filtered by activity."""
    recordings = []
    for file, subject, activity in read_manifest(path):
        if activities is not None and activity not in activities:
            continue
        rec = ingest_csv(file)
        if (rec.subject_id, rec.activity) != (subject, activity):
            raise DataError(f"{file}: contents disagree with manifest entry ({subject}, {activity})")
        recordings.append(rec)
    return recordings
