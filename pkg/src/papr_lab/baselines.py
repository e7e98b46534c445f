"""Limiter baselines: repeated clipping-and-filtering, adaptive-threshold
repeated C&F, and the companding transform.

None of these are budget-constrained; the comparison harness measures their
EVM/ACLR after the fact.  The C&F low-pass is a brick-wall over the occupied
band realized as a truncated time-domain tap set (applied as circular
convolution within the symbol), and its cost is booked as ``N_tap`` complex
multiplications per threshold-crossing sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import ComplexityCounter
from .ofdm import OfdmConfig

__all__ = [
    "CfConfig",
    "CompandConfig",
    "clip",
    "lowpass_taps",
    "repeated_cf",
    "adaptive_cf_threshold",
    "adaptive_cf",
    "compand",
]


@dataclass(frozen=True)
class CfConfig:
    clip_threshold: float
    n_iterations: int = 1
    n_taps: int = 65

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("N_it must be >= 1")
        if self.n_taps % 2 == 0:
            raise ValueError("N_tap must be odd (centered tap set)")
        if self.clip_threshold <= 0:
            raise ValueError("clip threshold must be > 0")


@dataclass(frozen=True)
class CompandConfig:
    v: float = 7.0
    a: float = 0.05
    a_th: float = 1.0

    def __post_init__(self):
        if min(self.v, self.a, self.a_th) <= 0:
            raise ValueError("companding parameters must be > 0")


def clip(sig: np.ndarray, a_th: float) -> tuple[np.ndarray, np.ndarray]:
    """Split a signal into its amplitude-limited part and the peak excess.

    ``clipped + excess == sig`` holds bit-exactly: whichever of the two parts
    is the larger share of a sample is re-derived by subtracting the smaller
    from the sample, which Sterbenz's lemma makes an exact float operation.
    """
    x = np.asarray(sig, dtype=complex)
    mag = np.abs(x)
    scale = np.ones_like(mag)
    # the guard absorbs the multiply rounding of a previous clip pass, so
    # already-clipped samples are never re-touched (exact idempotence)
    over = mag > a_th * (1.0 + 4.0 * np.finfo(float).eps)
    scale[over] = a_th / mag[over]
    clipped = x * scale
    excess = x - clipped
    deep = scale < 0.5  # excess dominates; recompute clipped exactly instead
    clipped[deep] = x[deep] - excess[deep]
    return clipped, excess


def lowpass_taps(cfg: OfdmConfig, n_taps: int) -> np.ndarray:
    """Truncated impulse response of the occupied-band brick-wall filter.

    Taps are the centered slice of the N_f-point inverse transform of the
    band indicator (unity passband gain before truncation).
    """
    mask = np.zeros(cfg.fft_size)
    mask[cfg.subcarrier_bins()] = 1.0
    h_full = np.fft.ifft(mask)  # peak at index 0, circular
    half = (n_taps - 1) // 2
    idx = np.arange(-half, half + 1) % cfg.fft_size
    return h_full[idx]


def _circular_filter(body: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Circular convolution with a centered tap set, via the symbol FFT."""
    n = body.shape[-1]
    half = (taps.size - 1) // 2
    h = np.zeros(n, dtype=complex)
    h[np.arange(-half, half + 1) % n] = taps
    return np.fft.ifft(np.fft.fft(body) * np.fft.fft(h))


def repeated_cf(body: np.ndarray, cfg_ofdm: OfdmConfig, cfg: CfConfig,
                counter: ComplexityCounter | None = None) -> np.ndarray:
    """Repeated C&F on one GI-stripped symbol body.

    Each iteration clips, band-limits only the excess, and subtracts the
    filtered excess, so out-of-band content never grows while clipped peaks
    partially regrow in-band.
    """
    x = np.asarray(body, dtype=complex).copy()
    taps = lowpass_taps(cfg_ofdm, cfg.n_taps)
    for _ in range(cfg.n_iterations):
        clipped, excess = clip(x, cfg.clip_threshold)
        n_th = int(np.count_nonzero(np.abs(x) > cfg.clip_threshold))
        if counter is not None:
            counter.add_filter_pass(cfg.n_taps, n_th)
        if n_th == 0:
            continue
        x = x - _circular_filter(excess, taps)
    if counter is not None:
        counter.symbols += 1
    return x


def adaptive_cf_threshold(body: np.ndarray, previous: float | None) -> float | None:
    """One step of the adaptive clip-threshold schedule.

    ``previous=None`` returns the mean-amplitude starting level; afterwards
    the level is raised by ``sqrt(N_f / N_p)`` where ``N_p`` counts samples
    above the previous level.  Returns None once nothing exceeds it.
    """
    mag = np.abs(np.asarray(body))
    if previous is None:
        return float(np.mean(mag))
    n_p = int(np.count_nonzero(mag > previous))
    if n_p == 0:
        return None
    return float(np.sqrt(mag.size / n_p) * previous)


def adaptive_cf(body: np.ndarray, cfg_ofdm: OfdmConfig, n_iterations: int,
                n_taps: int = 65, counter: ComplexityCounter | None = None) -> np.ndarray:
    """Repeated C&F with the adaptive threshold schedule."""
    x = np.asarray(body, dtype=complex).copy()
    taps = lowpass_taps(cfg_ofdm, n_taps)
    a_th = adaptive_cf_threshold(x, None)
    for _ in range(n_iterations):
        a_th = adaptive_cf_threshold(x, a_th)
        if a_th is None:
            break
        clipped, excess = clip(x, a_th)
        n_th = int(np.count_nonzero(np.abs(x) > a_th))
        if counter is not None:
            counter.add_filter_pass(n_taps, n_th)
        if n_th:
            x = x - _circular_filter(excess, taps)
    if counter is not None:
        counter.symbols += 1
    return x


def compand(sig: np.ndarray, cfg: CompandConfig) -> np.ndarray:
    """Memoryless companding limiter; zero samples pass through unchanged."""
    x = np.asarray(sig, dtype=complex)
    mag = np.abs(x)
    out = np.zeros_like(x)
    nz = mag > 0
    gain = cfg.a_th * (1.0 + (cfg.v / mag[nz]) ** (1.0 / cfg.a)) ** (-cfg.a)
    out[nz] = x[nz] / mag[nz] * gain
    return out
