"""
Seeded synthetic 9-channel sensor streams for the five travel modes.

Each channel is a sum of harmonics of a mode-specific fundamental, a slow
sinusoidal drift and white Gaussian noise. The profiles are labelled test
fixtures, not models of real gait or vehicle vibration.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InvalidInputError
from .ingest import CHANNELS, MODES, Channel, RawSample, TimeSeries


@dataclass(frozen=True)
class ChannelRecipe:
    base_freq: float
    harmonics: tuple[float, ...] = ()
    noise_sd: float = 0.0
    drift_amp: float = 0.0
    drift_freq: float = 0.1
    offset: float = 0.0
    phase: float = 0.0
    drift_phase: float = 0.0

    def validate(self, rate_hz: float):
        if not 0 < self.base_freq < rate_hz / 2:
            raise InvalidInputError(f"base frequency {self.base_freq} outside (0, {rate_hz / 2})")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be non-negative")
        if self.drift_freq < 0:
            raise InvalidInputError("drift_freq must be non-negative")

    def clean(self, t: np.ndarray) -> np.ndarray:
        """Noise-free part of the signal at times ``t`` (seconds)."""
        out = np.full(t.shape, self.offset, dtype=float)
        for h, amp in enumerate(self.harmonics, start=1):
            if amp:
                out += amp * np.sin(2 * np.pi * h * self.base_freq * t + h * self.phase)
        if self.drift_amp:
            out += self.drift_amp * np.sin(2 * np.pi * self.drift_freq * t + self.drift_phase)
        return out


@dataclass(frozen=True)
class ModeProfile:
    mode: str
    recipes: Mapping[Channel, ChannelRecipe]
    # per-trip relative spread of frequency, amplitude and noise level
    freq_jitter: float = 0.0
    gain_jitter: float = 0.0
    noise_jitter: float = 0.0

    def validate(self, rate_hz: float):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        for ch in CHANNELS:
            if ch not in self.recipes:
                raise InvalidInputError(f"profile {self.mode} lacks channel {ch}")
            self.recipes[ch].validate(rate_hz)

    def perturbed(self, rng: np.random.Generator) -> "ModeProfile":
        """A trip-level variant: jittered frequency, gains and noise, random phases."""
        f_scale = 1.0 + self.freq_jitter * rng.uniform(-1, 1)
        g_scale = float(np.exp(self.gain_jitter * rng.standard_normal()))
        recipes = {}
        for ch in CHANNELS:
            r = self.recipes[ch]
            # noise level varies independently per channel
            n_scale = float(np.exp(self.noise_jitter * rng.standard_normal()))
            recipes[ch] = dataclasses.replace(
                r,
                base_freq=r.base_freq * f_scale,
                harmonics=tuple(a * g_scale for a in r.harmonics),
                noise_sd=r.noise_sd * n_scale,
                phase=rng.uniform(0, 2 * np.pi),
                drift_phase=rng.uniform(0, 2 * np.pi),
            )
        return dataclasses.replace(self, recipes=recipes, freq_jitter=0.0, gain_jitter=0.0,
                                   noise_jitter=0.0)


def _profile(mode, acc, gyr, rot, **jitter) -> ModeProfile:
    """Build a profile from per-sensor recipes, staggering phases across axes."""
    recipes = {}
    gravity = {"x": 0.0, "y": 0.0, "z": 9.81}
    for ch in CHANNELS:
        base = {"accelerometer": acc, "gyroscope": gyr, "rotation_vector": rot}[ch.sensor]
        axis = "xyz".index(ch.axis)
        recipes[ch] = dataclasses.replace(
            base,
            phase=base.phase + axis * 2.1,
            drift_phase=base.drift_phase + axis * 1.3,
            offset=base.offset + (gravity[ch.axis] if ch.sensor == "accelerometer" else 0.0),
            harmonics=tuple(a * (1.0, 0.8, 0.6)[axis] for a in base.harmonics),
        )
    return ModeProfile(mode, recipes, **jitter)


R = ChannelRecipe

DEFAULT_PROFILES: dict[str, ModeProfile] = {
    "walk": _profile(
        "walk",
        acc=R(2.0, (1.6, 0.7, 0.3), noise_sd=0.35, drift_amp=0.2),
        gyr=R(2.0, (0.7, 0.25), noise_sd=0.08, drift_amp=0.05),
        rot=R(1.0, (0.012, 0.004), noise_sd=0.0015, drift_amp=0.02, drift_freq=0.05, offset=0.3),
        freq_jitter=0.12, gain_jitter=0.2, noise_jitter=0.15),
    "run": _profile(
        "run",
        acc=R(2.9, (4.0, 1.6, 0.6), noise_sd=0.6, drift_amp=0.3),
        gyr=R(2.9, (1.6, 0.5), noise_sd=0.15, drift_amp=0.05),
        rot=R(1.45, (0.025, 0.008), noise_sd=0.002, drift_amp=0.02, drift_freq=0.05, offset=0.3),
        freq_jitter=0.12, gain_jitter=0.2, noise_jitter=0.15),
    "bike": _profile(
        "bike",
        acc=R(1.5, (0.7, 0.12), noise_sd=0.3, drift_amp=0.3),
        gyr=R(1.5, (0.35, 0.05), noise_sd=0.06, drift_amp=0.08),
        rot=R(1.5, (0.006,), noise_sd=0.001, drift_amp=0.03, drift_freq=0.04, offset=0.3),
        freq_jitter=0.15, gain_jitter=0.25, noise_jitter=0.15),
    "bus": _profile(
        "bus",
        acc=R(0.7, (0.05,), noise_sd=0.27, drift_amp=0.45, drift_freq=0.15),
        gyr=R(0.7, (0.015,), noise_sd=0.2, drift_amp=0.04, drift_freq=0.1, offset=-0.035),
        rot=R(0.35, (0.001,), noise_sd=0.004, drift_amp=0.04, drift_freq=0.02, offset=0.3),
        freq_jitter=0.2, gain_jitter=0.2, noise_jitter=0.1),
    "car": _profile(
        "car",
        acc=R(0.9, (0.05,), noise_sd=0.23, drift_amp=0.4, drift_freq=0.2),
        gyr=R(0.9, (0.015,), noise_sd=0.17, drift_amp=0.04, drift_freq=0.12, offset=0.035),
        rot=R(0.45, (0.001,), noise_sd=0.0034, drift_amp=0.04, drift_freq=0.03, offset=0.3),
        freq_jitter=0.2, gain_jitter=0.2, noise_jitter=0.1),
}


def _check(profile: ModeProfile, duration_s: float, rate_hz: float):
    if not duration_s >= 1:
        raise InvalidInputError("duration must be at least 1 s")
    if not rate_hz > 0:
        raise InvalidInputError("rate_hz must be positive")
    profile.validate(rate_hz)


def generate(profile: ModeProfile, duration_s: float, rate_hz: float = 100.0,
             seed: int = 0) -> tuple[dict[Channel, TimeSeries], list[str]]:
    """Uniformly sampled streams for one trip plus one label per whole second.

    The seed drives only the noise; frequencies, amplitudes and phases come
    from the profile.
    """
    _check(profile, duration_s, rate_hz)
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    rng = np.random.default_rng(seed)
    streams = {}
    for ch in CHANNELS:
        r = profile.recipes[ch]
        noise = r.noise_sd * rng.standard_normal(n)
        streams[ch] = TimeSeries(ch, rate_hz, r.clean(t) + noise)
    return streams, [profile.mode] * int(duration_s)


def generate_raw(profile: ModeProfile, duration_s: float, raw_rate_hz: float = 25.0,
                 jitter_ms: int = 8, seed: int = 0, t0_ms: int = 0
                 ) -> dict[Channel, list[RawSample]]:
    """Irregular, per-channel unsynchronised samples as a phone would log them.

    Every channel gets a sample exactly at ``t0_ms`` and at ``t0_ms + duration``
    so that resampling covers the whole trip.
    """
    _check(profile, duration_s, raw_rate_hz)
    rng = np.random.default_rng(seed)
    period = 1000.0 / raw_rate_hz
    end = int(round(duration_s * 1000))
    out = {}
    for ch in CHANNELS:
        k = np.arange(1, int(end // period))
        ts = np.round(k * period + rng.integers(-jitter_ms, jitter_ms + 1, k.size)).astype(np.int64)
        ts = np.unique(np.concatenate([[0], ts[(ts > 0) & (ts < end)], [end]]))
        r = profile.recipes[ch]
        vals = r.clean(ts / 1000.0) + r.noise_sd * rng.standard_normal(ts.size)
        out[ch] = [RawSample(int(t + t0_ms), float(v)) for t, v in zip(ts, vals)]
    return out


@dataclass
class SyntheticSuite:
    samples: dict[Channel, list[RawSample]]
    labels: dict[int, str]
    trips: list[tuple[str, int, int]] = field(default_factory=list)  # (mode, first epoch, n epochs)


def generate_suite(epochs_per_mode: int = 1000, trip_seconds: int = 50, seed: int = 0,
                   profiles: Mapping[str, ModeProfile] | None = None,
                   raw_rate_hz: float = 25.0) -> SyntheticSuite:
    """Trips of every profiled mode laid end to end on one clock, in shuffled order.

    Trips are perturbed per-trip variants of the mode profiles. Each epoch at a
    trip boundary would mix two modes through interpolation, so a one-second gap
    is left between trips and only the fully covered epochs are labelled.
    """
    profiles = DEFAULT_PROFILES if profiles is None else profiles
    if epochs_per_mode < 1 or trip_seconds < 1:
        raise InvalidInputError("epochs_per_mode and trip_seconds must be positive")
    unknown = set(profiles) - set(MODES)
    if unknown:
        raise InvalidInputError(f"unknown modes {sorted(unknown)}")
    order_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    plan = []
    for mode in (m for m in MODES if m in profiles):
        left = epochs_per_mode
        while left > 0:
            plan.append((mode, min(trip_seconds, left)))
            left -= trip_seconds
    plan = [plan[i] for i in order_rng.permutation(len(plan))]
    trip_seeds = np.random.SeedSequence([seed, 1]).spawn(len(plan))

    samples: dict[Channel, list[RawSample]] = {ch: [] for ch in CHANNELS}
    labels: dict[int, str] = {}
    trips = []
    epoch = 0
    for (mode, n_epochs), ss in zip(plan, trip_seeds):
        rng = np.random.default_rng(ss)
        trip = profiles[mode].perturbed(rng)
        raw = generate_raw(trip, n_epochs, raw_rate_hz, seed=int(rng.integers(2 ** 63)),
                           t0_ms=epoch * 1000)
        for ch in CHANNELS:
            samples[ch].extend(raw[ch])
        for e in range(epoch, epoch + n_epochs):
            labels[e] = mode
        trips.append((mode, epoch, n_epochs))
        epoch += n_epochs + 1
    return SyntheticSuite(samples, labels, trips)
