"""Ground-truth measurements: EVM, ACLR, PSD, power CCDF and the
complex-multiplication complexity counter.

The spectral estimates use non-overlapping per-symbol periodograms with a
rectangular window on the GI-stripped symbol bodies, which puts them on the
same N_f bin grid as the cancellation kernel's spectral split (estimator and
tracker stay commensurable).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ofdm import OfdmConfig
from .pc import PcKernel, PcReport

__all__ = [
    "CcdfCurve",
    "ComplexityCounter",
    "measure_evm",
    "measure_aclr",
    "psd_periodogram",
    "ccdf_power",
    "complexity_of_pc",
]

ACLR_MIN_SYMBOLS = 100


@dataclass(frozen=True)
class CcdfCurve:
    """Empirical exceedance of normalized instantaneous power."""

    abscissa_db: np.ndarray
    exceedance: np.ndarray
    n_samples: int

    def level_at(self, probability: float) -> float:
        """Abscissa (dB) where the curve crosses ``probability``, by
        log-linear interpolation between grid points."""
        p = np.asarray(self.exceedance, dtype=float)
        x = np.asarray(self.abscissa_db, dtype=float)
        above = np.nonzero(p >= probability)[0]
        below = np.nonzero(p < probability)[0]
        if len(above) == 0:
            return float(x[0])
        if len(below) == 0:
            return float(x[-1])
        i, j = above[-1], below[0]
        if p[i] <= 0 or p[j] <= 0:
            return float(x[i])
        li, lj, lp = np.log10(p[i]), np.log10(p[j]), np.log10(probability)
        return float(x[i] + (x[j] - x[i]) * (lp - li) / (lj - li))


@dataclass
class ComplexityCounter:
    """Complex-multiplication tally for PAPR-reduction processing only.

    Mergeable so that parallel trial shards can be combined associatively.
    """

    multiplications: int = 0
    additions: int = 0  # PC additions or C&F iterations observed
    threshold_crossings: list = field(default_factory=list)  # per-iteration N_th
    symbols: int = 0

    def add_pc(self, report: PcReport) -> None:
        self.multiplications += report.complex_multiplications
        self.additions += report.additions
        self.symbols += 1

    def add_filter_pass(self, n_tap: int, n_crossings: int) -> None:
        self.multiplications += n_tap * n_crossings
        self.additions += 1
        self.threshold_crossings.append(n_crossings)

    def merge(self, other: "ComplexityCounter") -> "ComplexityCounter":
        self.multiplications += other.multiplications
        self.additions += other.additions
        self.threshold_crossings.extend(other.threshold_crossings)
        self.symbols += other.symbols
        return self

    @property
    def per_symbol(self) -> float:
        return self.multiplications / max(self.symbols, 1)


def measure_evm(reference: np.ndarray, impaired: np.ndarray, subcarrier_power) -> float:
    """Error-vector power over reference power, averaged over the stream.

    ``reference``/``impaired`` are ``(n_sym, L)`` grids (or 1-D for a single
    symbol); ``subcarrier_power`` is the scalar or per-subcarrier average
    power S_t[l].
    """
    ref = np.atleast_2d(np.asarray(reference))
    imp = np.atleast_2d(np.asarray(impaired))
    if ref.shape != imp.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {imp.shape}")
    st = np.broadcast_to(np.asarray(subcarrier_power, dtype=float), ref.shape[-1:])
    denom = st.sum() * ref.shape[0]
    if denom <= 0:
        raise ValueError("reference power must be positive")
    return float(np.sum(np.abs(imp - ref) ** 2) / denom)


def psd_periodogram(bodies: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Average per-symbol periodogram on the N_f grid (DFT bin order).

    Conserves power exactly: ``psd.sum()`` equals the mean per-sample power.
    """
    x = np.atleast_2d(np.asarray(bodies, dtype=complex))
    if x.shape[-1] != cfg.fft_size:
        raise ValueError(f"expected GI-stripped bodies of {cfg.fft_size} samples")
    spec = np.fft.fft(x, axis=-1) / cfg.fft_size
    return np.mean(np.abs(spec) ** 2, axis=0)


def _band_bins(cfg: OfdmConfig, lo: int, hi: int) -> np.ndarray:
    return np.arange(lo, hi + 1) % cfg.fft_size


def measure_aclr(bodies: np.ndarray, cfg: OfdmConfig) -> float:
    """Worst of the upper/lower adjacent-channel powers over S_t.

    Bands follow the kernel spectral split exactly; fewer than
    ``ACLR_MIN_SYMBOLS`` symbols triggers a variance warning.
    """
    x = np.atleast_2d(np.asarray(bodies, dtype=complex))
    if x.shape[0] < ACLR_MIN_SYMBOLS:
        warnings.warn(
            f"ACLR estimate from {x.shape[0]} symbols (< {ACLR_MIN_SYMBOLS}); high variance",
            stacklevel=2,
        )
    psd = psd_periodogram(x, cfg)
    L = cfg.num_subcarriers
    upper = psd[_band_bins(cfg, L // 2 + 2, 3 * L // 2 + 1)].sum()
    lower = psd[_band_bins(cfg, -3 * L // 2, -(L + 2) // 2)].sum()
    return float(max(upper, lower) / cfg.average_power)


def ccdf_power(samples: np.ndarray, average_power: float, abscissa_db: np.ndarray) -> CcdfCurve:
    """Empirical CCDF of instantaneous power normalized by ``average_power``."""
    p = (np.abs(np.asarray(samples)) ** 2 / average_power).ravel()
    p.sort()
    thresholds = 10.0 ** (np.asarray(abscissa_db, dtype=float) / 10.0)
    # count of samples strictly above each threshold
    counts = p.size - np.searchsorted(p, thresholds, side="right")
    return CcdfCurve(abscissa_db=np.asarray(abscissa_db, dtype=float),
                     exceedance=counts / p.size, n_samples=p.size)


def complexity_of_pc(report: PcReport, kernel: PcKernel) -> int:
    """Complex multiplications spent on one symbol's cancellations."""
    return report.additions * kernel.n_multiplications
