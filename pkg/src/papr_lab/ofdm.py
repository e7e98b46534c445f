"""OFDM baseband core: Gray-coded QAM mapping, oversampled modulation with
cyclic prefix, and seeded AWGN injection.

Conventions used throughout the package:

* ``L`` occupied subcarriers live on the signed index set ``[-L/2+1, L/2]``
  (DC occupied) of an ``N_f``-point transform, so the time-domain waveform is
  oversampled by ``N_f/L``.
* ``modulate`` synthesizes ``x[s] = sum_l X_l exp(j 2 pi l s / N_f)``, which
  makes the mean power of a symbol body equal ``sum_l |X_l|^2``.  With the
  constellations normalized to ``S_t/L`` per subcarrier the mean transmit
  power is ``S_t``.
* Noise sigmas are per-axis standard deviations (real and imaginary parts
  each get variance ``sigma**2``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OfdmConfig",
    "ConstellationSpec",
    "map_bits",
    "demap_hard",
    "modulate",
    "demodulate",
    "add_awgn",
    "random_bits",
    "random_grid",
    "noise_sigma_for_ebn0",
]


# Per-axis Gray tables, one canonical table per modulation order.  Codes are
# listed for ascending amplitude levels; adjacent levels differ in exactly one
# bit and the leading (high-order) bit of each axis is the sign bit (0 = the
# positive half-axis), so bits "00" map to the (+A, +A) corner for QPSK.
_GRAY_AXIS_CODES = {
    1: ["1", "0"],  # levels -1, +1
    2: ["10", "11", "01", "00"],  # levels -3, -1, +1, +3
    3: ["100", "101", "111", "110", "010", "011", "001", "000"],
}


@dataclass(frozen=True)
class OfdmConfig:
    """Static OFDM numerology; immutable and shareable across workers."""

    num_subcarriers: int = 64
    fft_size: int = 512
    gi_length: int = 64
    modulation_order: int = 2  # bits per symbol: 2 (QPSK), 4 (16QAM), 6 (64QAM)
    average_power: float = 1.0

    def __post_init__(self):
        n, l = self.fft_size, self.num_subcarriers
        if n <= 0 or (n & (n - 1)) != 0:
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if not 0 < l < n:
            raise ValueError(f"num_subcarriers must satisfy 0 < L < N_f, got {l}")
        if n % l != 0 or n // l < 2:
            raise ValueError(f"oversampling N_f/L must be an integer >= 2, got {n}/{l}")
        if self.modulation_order not in (2, 4, 6):
            raise ValueError(f"modulation_order must be 2, 4 or 6, got {self.modulation_order}")
        if self.gi_length < 0 or self.gi_length >= n:
            raise ValueError(f"gi_length must be in [0, N_f), got {self.gi_length}")
        if self.average_power <= 0:
            raise ValueError("average_power must be > 0")

    @property
    def oversampling(self) -> int:
        return self.fft_size // self.num_subcarriers

    @property
    def symbol_length(self) -> int:
        """Samples per symbol including the guard interval."""
        return self.fft_size + self.gi_length

    def subcarrier_indices(self) -> np.ndarray:
        """Signed occupied indices l in [-L/2+1, L/2]."""
        l = self.num_subcarriers
        return np.arange(-l // 2 + 1, l // 2 + 1)

    def subcarrier_bins(self) -> np.ndarray:
        """Occupied FFT bin positions (signed indices modulo N_f)."""
        return self.subcarrier_indices() % self.fft_size


@dataclass(frozen=True)
class ConstellationSpec:
    """Square Gray-coded constellation normalized to a per-subcarrier power.

    ``delta`` is the half spacing between adjacent per-axis levels and
    ``amplitude`` the per-axis RMS value (equal to the QPSK axis amplitude).
    """

    order: int
    delta: float
    amplitude: float
    levels: np.ndarray = field(repr=False)  # per-axis levels, ascending, in amplitude units
    axis_bits: int = 1

    @classmethod
    def for_config(cls, cfg: OfdmConfig) -> "ConstellationSpec":
        return cls.create(cfg.modulation_order, cfg.average_power / cfg.num_subcarriers)

    @classmethod
    def create(cls, order: int, subcarrier_power: float) -> "ConstellationSpec":
        """Build the canonical constellation with mean power ``subcarrier_power``."""
        if order not in (2, 4, 6):
            raise ValueError(f"unsupported modulation order {order}")
        axis_bits = order // 2
        n_levels = 1 << axis_bits
        raw = np.arange(-(n_levels - 1), n_levels, 2, dtype=float)  # ..,-3,-1,1,3,..
        # two axes, each with mean square delta^2 * mean(raw^2)
        delta = np.sqrt(subcarrier_power / (2.0 * np.mean(raw**2)))
        amplitude = np.sqrt(subcarrier_power / 2.0)
        return cls(order=order, delta=delta, amplitude=amplitude,
                   levels=raw * delta, axis_bits=axis_bits)

    def axis_codes(self) -> list[str]:
        return _GRAY_AXIS_CODES[self.axis_bits]

    def points(self) -> np.ndarray:
        """All 2**order constellation points (I-major order)."""
        return (self.levels[:, None] + 1j * self.levels[None, :]).ravel()


def _axis_level_of_bits(spec: ConstellationSpec, bits: np.ndarray) -> np.ndarray:
    """Map (n, axis_bits) bit rows to per-axis levels through the Gray table."""
    codes = spec.axis_codes()
    code_to_level = {int(c, 2): lvl for c, lvl in zip(codes, spec.levels)}
    weights = 1 << np.arange(spec.axis_bits - 1, -1, -1)
    keys = bits @ weights
    lut = np.empty(1 << spec.axis_bits)
    for k, v in code_to_level.items():
        lut[k] = v
    return lut[keys]


def map_bits(bits: np.ndarray, spec: ConstellationSpec) -> np.ndarray:
    """Map a flat bit sequence onto Gray-coded constellation symbols.

    The first half of each ``order``-bit group drives the I axis, the second
    half the Q axis; the leading bit of each half is the axis sign bit.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % spec.order != 0:
        raise ValueError(f"bit count {bits.size} not divisible by modulation order {spec.order}")
    groups = bits.reshape(-1, spec.order)
    i_lvl = _axis_level_of_bits(spec, groups[:, : spec.axis_bits])
    q_lvl = _axis_level_of_bits(spec, groups[:, spec.axis_bits :])
    return i_lvl + 1j * q_lvl


def demap_hard(symbols: np.ndarray, spec: ConstellationSpec, shrink: float = 1.0) -> np.ndarray:
    """Hard-decide symbols back to bits using per-axis nearest-level regions.

    ``shrink`` scales the decision thresholds; passing the effective
    constellation shrink factor realizes the statistically optimal decision
    levels for a uniformly shrunk constellation (threshold midpoints move
    with the means).
    """
    symbols = np.asarray(symbols)
    edges = 0.5 * (spec.levels[1:] + spec.levels[:-1]) * shrink
    codes = spec.axis_codes()
    out = np.empty(symbols.shape + (spec.order,), dtype=np.int64)
    for axis, vals in ((0, symbols.real), (1, symbols.imag)):
        idx = np.searchsorted(edges, vals)
        bit_rows = np.array([[int(b) for b in codes[k]] for k in range(len(codes))])
        sl = slice(axis * spec.axis_bits, (axis + 1) * spec.axis_bits)
        out[..., sl] = bit_rows[idx]
    return out.reshape(-1)


def modulate(grid: np.ndarray, cfg: OfdmConfig, attach_gi: bool = True) -> np.ndarray:
    """Zero-padded inverse transform of the symbol grid, GI prepended.

    ``grid`` is ``(L,)`` or ``(n_sym, L)``; the output keeps the leading axis.
    """
    grid = np.asarray(grid, dtype=complex)
    single = grid.ndim == 1
    if single:
        grid = grid[None, :]
    if grid.shape[-1] != cfg.num_subcarriers:
        raise ValueError(f"grid has {grid.shape[-1]} entries, expected {cfg.num_subcarriers}")
    spec = np.zeros((grid.shape[0], cfg.fft_size), dtype=complex)
    spec[:, cfg.subcarrier_bins()] = grid
    body = np.fft.ifft(spec, axis=-1) * cfg.fft_size
    if attach_gi and cfg.gi_length:
        body = np.concatenate([body[:, -cfg.gi_length :], body], axis=-1)
    return body[0] if single else body


def demodulate(sig: np.ndarray, cfg: OfdmConfig, has_gi: bool = True) -> np.ndarray:
    """Strip the guard interval, forward transform, return the occupied bins."""
    sig = np.asarray(sig, dtype=complex)
    single = sig.ndim == 1
    if single:
        sig = sig[None, :]
    expected = cfg.symbol_length if has_gi else cfg.fft_size
    if sig.shape[-1] != expected:
        raise ValueError(f"signal length {sig.shape[-1]} != expected {expected} samples/symbol")
    body = sig[:, cfg.gi_length :] if has_gi else sig
    spec = np.fft.fft(body, axis=-1) / cfg.fft_size
    grid = spec[:, cfg.subcarrier_bins()]
    return grid[0] if single else grid


def add_awgn(sig: np.ndarray, sigma_n: float, seed) -> np.ndarray:
    """Add complex AWGN with per-axis variance ``sigma_n**2``; deterministic per seed."""
    if sigma_n < 0:
        raise ValueError("sigma_n must be >= 0")
    if sigma_n == 0:
        return np.array(sig, copy=True)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noise = rng.standard_normal(sig.shape) + 1j * rng.standard_normal(sig.shape)
    return sig + sigma_n * noise


def random_bits(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 2, size=count)


def random_grid(rng: np.random.Generator, cfg: OfdmConfig, n_symbols: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Draw random data and return ``(bits, grid)`` for ``n_symbols`` symbols."""
    spec = ConstellationSpec.for_config(cfg)
    bits = random_bits(rng, n_symbols * cfg.num_subcarriers * cfg.modulation_order)
    grid = map_bits(bits, spec).reshape(n_symbols, cfg.num_subcarriers)
    return bits, grid


def noise_sigma_for_ebn0(ebn0_db: float, cfg: OfdmConfig, n_streams: int = 1) -> float:
    """Per-axis noise sigma at the demodulated subcarrier for a target Eb/N0.

    Symbol energy per subcarrier (and per stream) is ``S_t/(K*L)``; Eb/N0 is
    defined against that reference, so the returned sigma applies to the
    frequency-domain decision variable.  The matching time-domain sigma for
    ``add_awgn`` on an ``N_f``-grid waveform is ``sigma * sqrt(N_f)``.
    """
    es = cfg.average_power / (cfg.num_subcarriers * n_streams)
    eb = es / cfg.modulation_order
    n0 = eb / (10.0 ** (ebn0_db / 10.0))
    return float(np.sqrt(n0 / 2.0))
