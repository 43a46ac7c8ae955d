"""Seeded synthetic IMU cohorts.

Each activity has a fixed :class:`ActivityProfile`: a sum of up to three
harmonics of a gait-band fundamental per sensor component, on top of a
gravity-like baseline, plus Gaussian noise. Subjects differ by a random gain
(within ``gain_jitter``) and phase per sensor. Standing-balance profiles are
flat apart from one step transient halfway through the recording.

The model only has to exercise windowing, channel stacking and class
structure; it makes no biomechanical claims.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .data.recording import ImuRecording
from .data.registry import (
    ACCEL_RANGE,
    ACTIVITIES,
    COMPONENTS,
    GROUPS,
    GYRO_RANGE,
    SAMPLE_RATE,
    SENSORS,
    SensorId,
)
from .errors import DataError
from .seeding import substream

FREQ_BAND = (0.6, 5.0)
LIMITS = np.array([ACCEL_RANGE] * 3 + [GYRO_RANGE] * 3)

# fundamentals kept apart within each group
_FUNDAMENTALS = {
    "bawk": 0.9, "sdwk": 1.3, "wktrn": 1.8,
    "hetowkbk": 0.7, "hewk": 1.5, "tdwk": 1.0, "towk": 2.0,
    "knex": 0.6, "knfx": 0.8, "hpabd": 1.1, "cars": 1.4, "tors": 1.7, "knbn": 2.2, "sts": 2.6,
}  # fmt: skip


@dataclass(eq=False)
class ActivityProfile:
    """Signal recipe for one activity.

    ``amplitude`` and ``baseline`` are ``(5, 6)`` arrays (sensor x component,
    sensors in RF, LF, RS, LS, LM order). For non-periodic profiles
    ``amplitude`` is the height of the single step transient instead.
    """

    activity: str
    amplitude: np.ndarray
    frequency: float
    harmonics: tuple = (1.0,)
    noise: np.ndarray = field(default_factory=lambda: np.array([0.02] * 3 + [3.0] * 3))
    baseline: np.ndarray = field(default_factory=lambda: np.zeros((5, 6)))
    component_phase: np.ndarray = field(default_factory=lambda: np.zeros((5, 6)))
    periodic: bool = True
    transient_width: float = 0.2  # seconds

    def validate(self, gain_jitter: float = 0.1) -> "ActivityProfile":
        if self.amplitude.shape != (5, 6) or self.baseline.shape != (5, 6):
            raise DataError(f"{self.activity}: amplitude and baseline must be (5, 6)")
        if self.periodic:
            lo, hi = FREQ_BAND
            if not lo <= self.frequency <= hi:
                raise DataError(f"{self.activity}: fundamental {self.frequency} Hz outside {lo}-{hi} Hz")
            if not 1 <= len(self.harmonics) <= 3:
                raise DataError(f"{self.activity}: between 1 and 3 harmonics allowed")
            if any(abs(w) > abs(self.harmonics[0]) for w in self.harmonics[1:]):
                raise DataError(f"{self.activity}: the fundamental must carry the largest weight")
            swing = np.abs(self.amplitude) * sum(abs(w) for w in self.harmonics)
        else:
            swing = np.abs(self.amplitude)
        peak = np.abs(self.baseline) + swing * (1.0 + gain_jitter)
        if np.any(peak > LIMITS):
            s, c = np.argwhere(peak > LIMITS)[0]
            raise DataError(
                f"{self.activity}: {SENSORS[s].value}_{COMPONENTS[c]} can reach {peak[s, c]:.3f}, "
                f"beyond the ±{LIMITS[c]:g} sensor range"
            )
        return self

    def render(self, n: int, gain: np.ndarray, phase: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """``(5, n, 6)`` samples for one subject, clipped to the sensor ranges."""
        t = np.arange(n) / SAMPLE_RATE
        if self.periodic:
            # (5, n, 6) = sensor x time x component
            arg = 2 * np.pi * self.frequency * t[None, :, None] + (phase[:, None, None] + self.component_phase[:, None, :])
            wave = sum(w * np.sin((k + 1) * arg) for k, w in enumerate(self.harmonics))
        else:
            centre = t[n // 2]
            bump = np.exp(-(((t - centre) / self.transient_width) ** 2))
            wave = np.broadcast_to(bump[None, :, None], (5, n, 6))
        out = self.baseline[:, None, :] + (gain * self.amplitude)[:, None, :] * wave
        out = out + rng.normal(size=out.shape) * self.noise
        return np.clip(out, -LIMITS, LIMITS)


def _gravity(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def default_profile(activity: str) -> ActivityProfile:
    """The built-in profile for an activity code; independent of any cohort seed."""
    rng = np.random.default_rng(zlib.crc32(activity.encode()))
    baseline = np.zeros((5, 6))
    component_phase = rng.uniform(0, 2 * np.pi, (5, 6))
    for s in range(5):
        baseline[s, :3] = _gravity(rng)
        baseline[s, 3:] = rng.uniform(-10, 10, 3)
    lumbar = np.array([1.0, 1.0, 1.0, 1.0, 0.3])[:, None]
    if activity in GROUPS["stand_balance"].labels:
        amp = np.hstack([rng.uniform(0.03, 0.06, (5, 3)), rng.uniform(8, 15, (5, 3))])
        return ActivityProfile(
            activity,
            amp * lumbar,
            frequency=0.0,
            noise=np.array([0.002] * 3 + [0.3] * 3),
            baseline=baseline,
            component_phase=component_phase,
            periodic=False,
        ).validate()
    amp = np.hstack([rng.uniform(0.25, 0.5, (5, 3)), rng.uniform(60, 150, (5, 3))])
    harmonics = (1.0, float(rng.uniform(0, 0.4)), float(rng.uniform(0, 0.2)))
    return ActivityProfile(
        activity,
        amp * lumbar,
        frequency=_FUNDAMENTALS[activity],
        harmonics=harmonics,
        baseline=baseline,
        component_phase=component_phase,
    ).validate()


def default_profiles() -> dict:
    return {a: default_profile(a) for a in ACTIVITIES}


@dataclass
class CohortSpec:
    n_subjects: int = 19
    duration_s: float = 60.0
    gain_jitter: float = 0.1
    seed: int = 0
    activities: tuple = ACTIVITIES
    subject_ids: tuple | None = None

    def __post_init__(self):
        if self.n_subjects < 5:
            raise ValueError("a cohort needs at least 5 subjects for 5-fold cross-validation")
        if self.subject_ids is not None and len(self.subject_ids) != self.n_subjects:
            raise ValueError("subject_ids must list n_subjects ids")

    @property
    def ids(self) -> tuple:
        return tuple(self.subject_ids) if self.subject_ids is not None else tuple(range(1, self.n_subjects + 1))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * SAMPLE_RATE))


def generate_cohort(cohort: CohortSpec, profiles: dict | None = None) -> list:
    """Recordings for every subject x activity, subject-major.

    Each recording draws from its own substream keyed by ``(seed, subject,
    activity)``, so the output does not depend on generation order.
    """
    profiles = default_profiles() if profiles is None else profiles
    missing = [a for a in cohort.activities if a not in profiles]
    if missing:
        raise DataError(f"no profile for activities: {', '.join(missing)}")
    for a in cohort.activities:
        profiles[a].validate(cohort.gain_jitter)
    n = cohort.n_samples
    out = []
    for subject in cohort.ids:
        srng = substream(cohort.seed, "synth-subject", subject)
        gain = 1.0 + srng.uniform(-cohort.gain_jitter, cohort.gain_jitter, (5, 6))
        phase = srng.uniform(0, 2 * np.pi, 5)
        for activity in cohort.activities:
            rng = substream(cohort.seed, "synth", subject, ACTIVITIES.index(activity))
            data = profiles[activity].render(n, gain, phase + rng.uniform(0, 2 * np.pi), rng)
            streams = {s: np.ascontiguousarray(data[k]) for k, s in enumerate(SENSORS)}
            out.append(ImuRecording(subject, activity, streams))
    return out


def periodogram(x: np.ndarray, rate: float = SAMPLE_RATE) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean()
    power = np.abs(np.fft.rfft(x)) ** 2 / len(x)
    return np.fft.rfftfreq(len(x), d=1.0 / rate), power


def dominant_frequency(x: np.ndarray, rate: float = SAMPLE_RATE, min_peak_fraction: float = 0.2) -> float | None:
    """Frequency of the strongest non-DC periodogram bin, or ``None`` without a clear peak."""
    freqs, power = periodogram(x, rate)
    power = power[1:]
    total = power.sum()
    if total <= 1e-12 * max(1.0, float(np.abs(x).max()) ** 2):
        return None
    k = int(power.argmax())
    if power[k] < min_peak_fraction * total:
        return None
    return float(freqs[k + 1])


def spectral_check(recording: ImuRecording, min_peak_fraction: float = 0.2) -> dict:
    """Dominant frequency per ``(sensor, component)``; ``None`` marks no dominant peak."""
    duration = recording.length / recording.sample_rate
    if duration < 4.0:
        raise DataError(f"spectral check needs at least 4 s of signal, got {duration:.2f} s")
    out = {}
    for s in SENSORS:
        for c, comp in enumerate(COMPONENTS):
            out[(s.value, comp)] = dominant_frequency(
                recording.streams[SensorId(s)][:, c], recording.sample_rate, min_peak_fraction
            )
    return out
