"""Data augmentation: additive Gaussian noise and time warping."""

from __future__ import annotations

import numpy as np

from .dataset import Sample


def augment_noise(sample: Sample, sigma: float, rng: np.random.Generator) -> Sample:
    """Add i.i.d. N(0, sigma^2) to every input cell; the target stays clean."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    x = sample.input.copy()
    if sigma > 0:
        x += rng.normal(0.0, sigma, size=x.shape)
    return Sample(x, sample.target.copy(), sample.origin_step)


def warp_times(length: int, jitter_sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Jittered query times ``i + N(0, s^2)``, clipped to [0, length-1] and sorted."""
    t = np.arange(length, dtype=np.float64)
    if jitter_sigma > 0:
        t = t + rng.normal(0.0, jitter_sigma, size=length)
    return np.sort(np.clip(t, 0.0, length - 1))


def time_warp_series(series: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Linearly interpolate each channel of ``series`` [L, C] at ``query`` times."""
    grid = np.arange(series.shape[0], dtype=np.float64)
    return np.stack([np.interp(query, grid, series[:, c]) for c in range(series.shape[1])], axis=1)


def augment_time_warp(sample: Sample, jitter_sigma: float, rng: np.random.Generator) -> Sample:
    """Resample input and target jointly at warped times, then split again."""
    if jitter_sigma < 0:
        raise ValueError("jitter_sigma must be >= 0")
    full = np.concatenate([sample.input, sample.target], axis=0)
    if jitter_sigma == 0:
        warped = full.copy()
    else:
        warped = time_warp_series(full, warp_times(full.shape[0], jitter_sigma, rng))
    n = sample.input.shape[0]
    return Sample(warped[:n], warped[n:], sample.origin_step)


AUGMENTATIONS = {
    "noise": augment_noise,
    "warp": augment_time_warp,
}
DEFAULT_STRENGTH = {"noise": 0.02, "warp": 3.0}


def augment_samples(samples: list[Sample], kind: str, strength: float | None,
                    rng: np.random.Generator) -> list[Sample]:
    if kind == "none":
        return list(samples)
    if kind not in AUGMENTATIONS:
        raise ValueError(f"unknown augmentation {kind!r}; expected none, noise or warp")
    s = DEFAULT_STRENGTH[kind] if strength is None else strength
    fn = AUGMENTATIONS[kind]
    return [fn(x, s, rng) for x in samples]
