"""Peak cancellation engine: kernel synthesis, optimum-threshold solver and
the iterative detect/estimate/scale/cancel loop with budget-safe stopping.

The cancellation kernel is a windowed all-subcarrier in-phase pulse with its
center sample normalized to one, so subtracting ``A_p * exp(j*theta0)`` times
the shifted kernel pulls the detected peak down to exactly the threshold.
Every addition raises in-band distortion by ``dp_in * A_p**2 / S_t`` and each
antenna's adjacent-channel leakage by ``M * dp_o * A_p**2 / S_t``; the tracker
accumulates those increments and the loop refuses any addition that would
push a running estimate past its budget, which is what makes the EVM/ACLR
guarantees unconditional.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from .ofdm import OfdmConfig

__all__ = [
    "WindowParams",
    "PcKernel",
    "PeakEvent",
    "DistortionTracker",
    "PcReport",
    "ThresholdSolution",
    "synthesize_kernel",
    "kernel_spectral_split",
    "kernel_alpha",
    "clip_excess_power",
    "clip_excess_power_quad",
    "solve_optimum_threshold",
    "detect_peak",
    "estimate_increments",
    "cancel_peaks",
]


@dataclass(frozen=True)
class WindowParams:
    """Flat-top raised-cosine truncation window, widths in units of the
    useful symbol duration T (so 0.125 means T/8)."""

    t1: float = 0.125
    t2: float = 0.25

    def __post_init__(self):
        if not 0 < self.t1 <= self.t2:
            raise ValueError(f"need 0 < T1 <= T2, got ({self.t1}, {self.t2})")
        if self.t2 > 0.5:
            raise ValueError(f"T2 = {self.t2} exceeds half the symbol duration")

    def sample_widths(self, fft_size: int) -> tuple[int, int]:
        return int(round(self.t1 * fft_size)), int(round(self.t2 * fft_size))


class PeakEvent(NamedTuple):
    antenna: int
    time_index: int
    excess: float  # |x(t0)| - A_th, > 0
    phase: float  # arg x(t0)


@dataclass(frozen=True)
class PcKernel:
    """Discretized truncated cancellation pulse plus its precomputed constants.

    ``samples`` is the full oversampled grid in DFT order (peak at index 0)
    so a peak at sample ``t0`` is cancelled with ``np.roll(samples, t0)``.
    ``dp_in``/``dp_o`` are the per-unit-excess in-band and out-of-band power
    increments on the measurement bands of the spectral split; ``e_i``/``e_o``
    are the band energies entering the threshold equation, normalized from
    the window energy of the scaled-pulse derivation (see synthesize_kernel).
    """

    samples: np.ndarray = field(repr=False)
    support: int  # samples inside [-T2, T2]
    dp_in: float
    dp_o: float
    e_i: float
    e_o: float
    alpha: float
    window: WindowParams = WindowParams()

    @property
    def n_multiplications(self) -> int:
        """Complex multiplications per PC addition (kernel support length)."""
        return self.support


def _window_samples(win: WindowParams, fft_size: int) -> np.ndarray:
    """Window evaluated on the DFT-ordered sample grid (center at index 0)."""
    t1, t2 = win.sample_widths(fft_size)
    s = np.arange(fft_size)
    d = np.minimum(s, fft_size - s)  # |t| in samples on the circular grid
    w = np.zeros(fft_size)
    w[d <= t1] = 1.0
    taper = (d > t1) & (d <= t2)
    if t2 > t1:
        w[taper] = 0.5 + 0.5 * np.cos(np.pi * (d[taper] - t1) / (t2 - t1))
    return w


def synthesize_kernel(cfg: OfdmConfig, win: WindowParams = WindowParams()) -> PcKernel:
    """Build the truncated cancellation pulse and its spectral constants.

    The basic pulse is the in-phase sum of all L occupied subcarriers with
    unit rectangular pulses, scaled to one at its center, then truncated by
    the raised-cosine window.  Band energies ``e_i``/``e_o`` come from the
    window-energy normalization ``sum(w^2)/L`` of the scaled-pulse energy
    (the subcarrier-shifted window spectra are treated as non-overlapping),
    apportioned between the two measured bands by the same spectral split
    that yields ``dp_in``/``dp_o``; spectrum beyond the two adjacent
    channels is excluded from both.
    """
    mask = np.zeros(cfg.fft_size)
    mask[cfg.subcarrier_bins()] = 1.0
    g = np.fft.ifft(mask) * (cfg.fft_size / cfg.num_subcarriers)
    w = _window_samples(win, cfg.fft_size)
    gp = w * g
    gp = gp / gp[0]  # center value exactly one
    t1, t2 = win.sample_widths(cfg.fft_size)
    support = 2 * t2 + 1

    kernel = PcKernel(samples=gp, support=support, dp_in=0.0, dp_o=0.0,
                      e_i=1.0, e_o=1.0, alpha=1.0, window=win)
    dp_in, dp_o = kernel_spectral_split(kernel, cfg)
    band_energy = float(np.sum(w**2)) / cfg.num_subcarriers
    e_i = band_energy * dp_in / (dp_in + dp_o)
    e_o = band_energy * dp_o / (dp_in + dp_o)
    alpha = kernel_alpha(kernel)
    return PcKernel(samples=gp, support=support, dp_in=dp_in, dp_o=dp_o,
                    e_i=e_i, e_o=e_o, alpha=alpha, window=win)


def kernel_spectral_split(k: PcKernel, cfg: OfdmConfig) -> tuple[float, float]:
    """In-band and adjacent-band power of the kernel on the N_f bin grid.

    In-band covers l in [-L/2+1, L/2]; the adjacent channels cover
    [L/2+2, 3L/2+1] and [-3L/2, -(L+2)/2] (one guard bin on each side).
    """
    n, L = cfg.fft_size, cfg.num_subcarriers
    power = np.abs(np.fft.fft(k.samples) / n) ** 2

    def band(lo: int, hi: int) -> float:
        return float(power[np.arange(lo, hi + 1) % n].sum())

    dp_in = band(-L // 2 + 1, L // 2)
    dp_o = band(L // 2 + 2, 3 * L // 2 + 1) + band(-3 * L // 2, -(L + 2) // 2)
    return dp_in, dp_o


def kernel_alpha(k: PcKernel) -> float:
    """Waveform constant: positive-side mass of Re g' over its absolute mass."""
    re = np.real(k.samples)
    denom = float(np.sum(np.abs(re)))
    if denom == 0.0:
        raise ValueError("degenerate kernel: Re g' vanishes everywhere")
    return float(np.sum(re[re > 0.0])) / denom


def clip_excess_power(a_th: float, sigma2: float = 1.0) -> float:
    """Closed form of ``D(A) = int_{A}^{inf} (z - A)^2 r(z^2) dz^2`` for the
    exponential instantaneous-power law with mean ``sigma2``."""
    sig = np.sqrt(sigma2)
    a = a_th / sig
    return float(sigma2 * np.exp(-a * a) - np.sqrt(np.pi) * sig * a_th * erfc(a))


def clip_excess_power_quad(a_th: float, sigma2: float = 1.0) -> float:
    """Adaptive-quadrature evaluation of the same integral (fallback oracle).

    Substituting ``p = A^2 + sigma2*u`` and factoring ``exp(-A^2/sigma2)``
    keeps the integrand well conditioned out to large thresholds.
    """
    a2 = a_th * a_th / sigma2
    f = lambda u: (np.sqrt(u + a2) - np.sqrt(a2)) ** 2 * np.exp(-u)
    val, _ = quad(f, 0.0, np.inf, epsabs=1e-300, epsrel=1e-12, limit=200)
    return float(sigma2 * np.exp(-a2) * val)


class ThresholdSolution(NamedTuple):
    a_th: float
    saturated: bool


def solve_optimum_threshold(evm_budget: float, kernel: PcKernel, sigma2: float = 1.0,
                            use_quadrature: bool = False) -> ThresholdSolution:
    """Minimum peak-detection threshold meeting a linear EVM budget.

    Solves ``D(A) * E_i = e_r`` with ``e_r = evm_budget * sigma2`` by
    bisection on ``A in (0, 6*sigma]`` until ``|D(A)*E_i - e_r| < 1e-6*e_r``.
    A budget too large to constrain anything returns ``A = 0`` flagged as
    saturated; a budget below what the 6-sigma cap can reach raises.
    """
    if evm_budget <= 0:
        raise ValueError("EVM budget must be > 0")
    if kernel.e_i <= 0:
        raise ValueError("kernel in-band energy must be > 0")
    e_r = evm_budget * sigma2
    d_fun = clip_excess_power_quad if use_quadrature else clip_excess_power

    def resid(a: float) -> float:
        return d_fun(a, sigma2) * kernel.e_i - e_r

    if resid(0.0) < 0.0:
        return ThresholdSolution(0.0, True)
    hi = 6.0 * np.sqrt(sigma2)
    if resid(hi) > 0.0:
        raise ValueError("EVM budget below the solver's 6-sigma bracket")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        if abs(r) < 1e-6 * e_r:
            return ThresholdSolution(mid, False)
        if r > 0.0:
            lo = mid
        else:
            hi = mid
    return ThresholdSolution(0.5 * (lo + hi), False)


def detect_peak(sig: np.ndarray, a_th: float, antenna: int = 0,
                iteration: int = 0) -> Optional[PeakEvent]:
    """Return the global-maximum sample above the threshold, or None.

    Ties resolve to the smallest index (argmax semantics).
    """
    if a_th <= 0:
        raise ValueError("A_th must be > 0")
    mag = np.abs(sig)
    idx = int(np.argmax(mag))
    peak = float(mag[idx])
    if peak <= a_th:
        return None
    return PeakEvent(antenna=antenna, time_index=idx, excess=peak - a_th,
                     phase=float(np.angle(sig[idx])))


@dataclass
class DistortionTracker:
    """Running recursive EVM/ACLR estimates against their budgets.

    Increments accumulate over the symbols a tracker has seen
    (``start_frame`` bumps the frame count), so the tracked quantities are
    running averages per symbol: reusing one tracker across a worker's
    symbol stream holds the stream-average EVM and per-antenna ACLR below
    budget, while a fresh tracker per symbol enforces the budgets symbol by
    symbol.  Estimates start at zero (undistorted input) and never decrease
    within a frame.
    """

    evm_budget: float
    aclr_budget: float
    n_antennas: int = 1
    total_power: float = 1.0
    average_over_antennas: bool = False  # True divides the EVM increment by M
    _evm_sum: float = 0.0
    _aclr_sums: np.ndarray = None
    _frames: int = 0

    def __post_init__(self):
        if self._aclr_sums is None:
            self._aclr_sums = np.zeros(self.n_antennas)

    def start_frame(self) -> None:
        self._frames += 1

    @property
    def frames(self) -> int:
        return self._frames

    @property
    def evm_estimate(self) -> float:
        return self._evm_sum / max(self._frames, 1)

    @property
    def aclr_estimates(self) -> np.ndarray:
        return self._aclr_sums / max(self._frames, 1)

    @property
    def max_aclr_estimate(self) -> float:
        return float(self.aclr_estimates.max())

    def would_fit(self, d_evm: float, d_aclr: np.ndarray) -> tuple[bool, bool]:
        """(EVM fits, ACLR fits) if the proposed increments were applied."""
        n = max(self._frames, 1)
        evm_ok = (self._evm_sum + d_evm) / n <= self.evm_budget
        aclr_ok = float((self._aclr_sums + d_aclr).max()) / n <= self.aclr_budget
        return evm_ok, aclr_ok

    def apply(self, d_evm: float, d_aclr: np.ndarray) -> None:
        self._evm_sum += d_evm
        self._aclr_sums = self._aclr_sums + d_aclr


@dataclass
class PcReport:
    """Outcome of one cancel_peaks run."""

    additions: int = 0
    stop_reason: str = "all-below-threshold"
    evm_estimate: float = 0.0
    max_aclr_estimate: float = 0.0
    complex_multiplications: int = 0


def estimate_increments(events: Sequence[Optional[PeakEvent]], kernel: PcKernel,
                        tracker: DistortionTracker) -> tuple[float, np.ndarray]:
    """Per-iteration EVM and per-antenna ACLR increments for the given peaks."""
    m = tracker.n_antennas
    st = tracker.total_power
    d_aclr = np.zeros(m)
    total_sq = 0.0
    for ev in events:
        if ev is None:
            continue
        sq = ev.excess * ev.excess
        total_sq += sq
        d_aclr[ev.antenna] = m * kernel.dp_o * sq / st
    d_evm = kernel.dp_in * total_sq / st
    if tracker.average_over_antennas:
        d_evm /= m
    return d_evm, d_aclr


def cancel_peaks(signals: np.ndarray, kernel: PcKernel, a_th, tracker: DistortionTracker,
                 max_iter: int = 32) -> tuple[np.ndarray, PcReport]:
    """Iteratively cancel per-antenna global peaks under the tracked budgets.

    ``signals`` is ``(M, N)`` (or 1-D for a single antenna) of GI-stripped
    symbol bodies sharing the kernel's sample grid; additions wrap around
    the symbol circularly, so the caller re-derives the guard interval
    afterward.
    ``a_th`` is a scalar or per-antenna array of detection thresholds.
    Budget checks happen before each addition (reject-then-stop): a rejected
    iteration leaves the signals unmodified.
    """
    sig = np.atleast_2d(np.asarray(signals, dtype=complex)).copy()
    m = sig.shape[0]
    if m != tracker.n_antennas:
        raise ValueError(f"tracker configured for {tracker.n_antennas} antennas, got {m}")
    if sig.shape[1] != kernel.samples.shape[0]:
        raise ValueError("signal grid does not match the kernel grid")
    thresholds = np.broadcast_to(np.asarray(a_th, dtype=float), (m,))

    tracker.start_frame()
    report = PcReport(stop_reason="max-iterations")
    while report.additions < max_iter:
        events = [detect_peak(sig[i], thresholds[i], antenna=i, iteration=report.additions)
                  for i in range(m)]
        live = [ev for ev in events if ev is not None]
        if not live:
            report.stop_reason = "all-below-threshold"
            break
        d_evm, d_aclr = estimate_increments(events, kernel, tracker)
        evm_ok, aclr_ok = tracker.would_fit(d_evm, d_aclr)
        if not evm_ok:
            report.stop_reason = "budget-evm"
            break
        if not aclr_ok:
            report.stop_reason = "budget-aclr"
            break
        for ev in live:
            sig[ev.antenna] -= ev.excess * np.exp(1j * ev.phase) * np.roll(kernel.samples, ev.time_index)
        tracker.apply(d_evm, d_aclr)
        report.additions += len(live)

    report.evm_estimate = tracker.evm_estimate
    report.max_aclr_estimate = tracker.max_aclr_estimate
    report.complex_multiplications = report.additions * kernel.n_multiplications
    out = sig[0] if np.asarray(signals).ndim == 1 else sig
    return out, report
