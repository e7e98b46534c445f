"""Multipath MIMO channel generation, per-subcarrier SVD and the eigen-beam
link equation.

Channels are 6-tap Rayleigh with an exponentially decaying power profile,
normalized so each subcarrier's channel matrix has unit-variance entries
(``E[|H|_F^2] = N*M``).  Precoding uses the right singular vectors, post-
coding the left ones, with a deterministic phase convention so precoders are
reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ofdm import OfdmConfig

__all__ = [
    "StreamConfig",
    "ChannelRealization",
    "SvdSet",
    "gen_channel",
    "svd_per_subcarrier",
    "esdm_link",
]

N_TAPS = 6


@dataclass(frozen=True)
class StreamConfig:
    n_tx: int = 4
    n_rx: int = 2
    n_streams: int = 2
    total_power: float = 1.0

    def __post_init__(self):
        if self.n_streams > min(self.n_tx, self.n_rx):
            raise ValueError("K must not exceed min(M, N)")
        if self.total_power <= 0:
            raise ValueError("total power must be > 0")

    @property
    def stream_power(self) -> float:
        return self.total_power / self.n_streams


@dataclass(frozen=True)
class ChannelRealization:
    """Tap gains ``taps[n, m, d]`` and their per-subcarrier transforms."""

    taps: np.ndarray = field(repr=False)  # (N, M, N_TAPS)
    decay_db_per_tap: float = 1.0

    def frequency_response(self, cfg: OfdmConfig) -> np.ndarray:
        """Per-subcarrier matrices ``H[l]`` of shape (L, N, M) on the
        occupied bins of the N_f grid."""
        l_signed = cfg.subcarrier_indices()
        d = np.arange(self.taps.shape[-1])
        phases = np.exp(-2j * np.pi * np.outer(l_signed, d) / cfg.fft_size)  # (L, D)
        return np.einsum("nmd,ld->lnm", self.taps, phases)


@dataclass(frozen=True)
class SvdSet:
    """Per-subcarrier factors ``H[l] = U[l] diag(s[l]) Vh[l]``."""

    u: np.ndarray = field(repr=False)  # (L, N, r)
    s: np.ndarray = field(repr=False)  # (L, r), descending
    vh: np.ndarray = field(repr=False)  # (L, r, M)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.s**2

    def reconstruct(self) -> np.ndarray:
        return np.einsum("lnr,lr,lrm->lnm", self.u, self.s, self.vh)


def gen_channel(cfg: StreamConfig, decay_db_per_tap: float = 1.0, seed=0) -> ChannelRealization:
    """Draw i.i.d. complex Gaussian taps with a normalized exponential
    power profile; deterministic per seed."""
    if decay_db_per_tap < 0:
        raise ValueError("decay must be >= 0 dB/tap")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    profile = 10.0 ** (-decay_db_per_tap * np.arange(N_TAPS) / 10.0)
    profile /= profile.sum()
    shape = (cfg.n_rx, cfg.n_tx, N_TAPS)
    taps = np.sqrt(profile / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return ChannelRealization(taps=taps, decay_db_per_tap=decay_db_per_tap)


def svd_per_subcarrier(h: np.ndarray) -> SvdSet:
    """Thin SVD of every subcarrier matrix with a fixed phase convention.

    The first nonzero element of each right-singular column is made real
    and positive (left vectors absorb the opposite phase), which pins an
    otherwise arbitrary per-column phase.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim == 2:
        h = h[None, :, :]
    try:
        u, s, vh = np.linalg.svd(h, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails here
        raise np.linalg.LinAlgError(f"SVD failed on a subcarrier matrix: {exc}") from exc
    v = vh.conj().transpose(0, 2, 1)  # (L, M, r)
    mags = np.abs(v)
    first_nz = np.argmax(mags > 1e-12 * mags.max(axis=1, keepdims=True), axis=1)  # (L, r)
    anchor = np.take_along_axis(v, first_nz[:, None, :], axis=1)[:, 0, :]  # (L, r)
    phase = anchor / np.where(np.abs(anchor) > 0, np.abs(anchor), 1.0)
    # rotating u_k and v_k by the same phase leaves u_k v_k^H invariant
    u = u * phase.conj()[:, None, :]
    vh = phase[:, :, None] * vh
    return SvdSet(u=u, s=s, vh=vh)


def esdm_link(stream_grids: np.ndarray, svd: SvdSet, sigma_n: float, seed=0) -> np.ndarray:
    """Algebraic eigen-beam link: ``y_k[l] = s_k[l] x_k[l] + (U^H n)_k``.

    ``stream_grids`` is (K, L); noise has per-axis variance ``sigma_n**2``
    per receive antenna, preserved through the unitary post-coder.
    """
    x = np.asarray(stream_grids, dtype=complex)
    k, l = x.shape
    if svd.s.shape[0] != l:
        raise ValueError(f"SVD has {svd.s.shape[0]} subcarriers, grids have {l}")
    if k > svd.s.shape[1]:
        raise ValueError(f"{k} streams exceed channel rank {svd.s.shape[1]}")
    y = svd.s[:, :k].T * x
    if sigma_n > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        n_rx = svd.u.shape[1]
        noise = sigma_n * (rng.standard_normal((l, n_rx)) + 1j * rng.standard_normal((l, n_rx)))
        post = np.einsum("lnr,ln->lr", svd.u.conj(), noise)  # U^H n per subcarrier
        y = y + post[:, :k].T
    return y
