"""Profile comparison and shape diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from .params import ExcitationProfile, rms_deviation


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Comparison:
    engine: str
    reference: str
    rms: float
    max_abs: float
    extremum_time: float
    extremum_value: float
    reference_extremum_time: float
    reference_extremum_value: float


def first_lobe_extremum(profile: ExcitationProfile, window: int = 21) -> tuple[float, float]:
    """(time, value) of the first lobe's extremum; falls back to the first local extremum."""
    found = lobes(profile.times, profile.amplitudes, window)
    if found:
        return found[0].time, found[0].extremum
    return profile.first_extremum()


def compare_profiles(profile: ExcitationProfile, reference: ExcitationProfile, engine: str = "", ref_name: str = "") -> Comparison:
    """RMS and maximum deviation on a shared grid; grids must match exactly.

    Extrema are first-lobe extrema of the smoothed profiles (see :func:`lobes`).
    """
    if profile.times.shape != reference.times.shape or not np.array_equal(profile.times, reference.times):
        raise GridMismatchError("profiles are sampled on different time grids")
    diff = np.abs(profile.amplitudes - reference.amplitudes)
    t1, v1 = first_lobe_extremum(profile)
    t0, v0 = first_lobe_extremum(reference)
    return Comparison(engine, ref_name, rms_deviation(profile, reference), float(diff.max(initial=0.0)), t1, v1, t0, v0)


@dataclass(frozen=True)
class Lobe:
    start: float
    stop: float
    time: float
    extremum: float


def lobes(times, values, window: int = 21) -> list[Lobe]:
    """Sign-constant stretches of a moving-average-smoothed profile.

    Smoothing over ``window`` samples suppresses the fast wiggles that ride on
    the slow nutation; stretches shorter than the window are dropped.
    """
    t = np.asarray(times, float)
    a = uniform_filter1d(np.asarray(values, float), window, mode="nearest")
    s = np.sign(a)
    cuts = np.where(s[1:] * s[:-1] < 0)[0] + 1
    out = []
    for seg in np.split(np.arange(a.size), cuts):
        if seg.size >= window:
            k = seg[np.argmax(np.abs(a[seg]))]
            out.append(Lobe(float(t[seg[0]]), float(t[seg[-1]]), float(t[k]), float(a[k])))
    return out


def zero_crossings(times, values) -> np.ndarray:
    """Linearly interpolated sign changes."""
    t = np.asarray(times, float)
    a = np.asarray(values, float)
    i = np.where(a[:-1] * a[1:] < 0)[0]
    return t[i] - a[i] * (t[i + 1] - t[i]) / (a[i + 1] - a[i])


def periodicity_defect(times, values) -> tuple[float, float]:
    """(period, max |a(t + T) - a(t)|) with T twice the mean zero-crossing spacing."""
    t = np.asarray(times, float)
    a = np.asarray(values, float)
    z = zero_crossings(t, a)
    if z.size < 3:
        raise ValueError("need at least three zero crossings to estimate a period")
    period = 2.0 * float(np.mean(np.diff(z)))
    m = t + period <= t[-1]
    return period, float(np.max(np.abs(np.interp(t[m] + period, t, a) - a[m])))
