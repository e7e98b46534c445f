import numpy as np
import pytest

from papr_lab.ofdm import (ConstellationSpec, OfdmConfig, add_awgn, demap_hard,
                           demodulate, map_bits, modulate, random_bits)


def test_config_invariants():
    with pytest.raises(ValueError):
        OfdmConfig(fft_size=500)  # not a power of two
    with pytest.raises(ValueError):
        OfdmConfig(num_subcarriers=512, fft_size=512)
    with pytest.raises(ValueError):
        OfdmConfig(num_subcarriers=384, fft_size=512)  # non-integer oversampling
    with pytest.raises(ValueError):
        OfdmConfig(modulation_order=3)
    assert OfdmConfig().oversampling == 8


def test_qpsk_bits00_map_to_positive_corner(cfg, qpsk_spec):
    a = np.sqrt(cfg.average_power / (2 * cfg.num_subcarriers))
    sym = map_bits(np.zeros(2, dtype=int), qpsk_spec)
    assert sym[0] == pytest.approx(a + 1j * a, rel=1e-12)


def test_constellation_power_normalization(cfg):
    for order in (2, 4, 6):
        spec = ConstellationSpec.create(order, cfg.average_power / cfg.num_subcarriers)
        pts = spec.points()
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(
            cfg.average_power / cfg.num_subcarriers, rel=1e-12)


def test_gray_codes_adjacent_levels_differ_one_bit():
    for order in (2, 4, 6):
        spec = ConstellationSpec.create(order, 1.0)
        codes = spec.axis_codes()
        for a, b in zip(codes, codes[1:]):
            assert sum(x != y for x, y in zip(a, b)) == 1


def test_16qam_high_bit_is_sign_bit():
    spec = ConstellationSpec.create(4, 1.0)
    for code, level in zip(spec.axis_codes(), spec.levels):
        assert (code[0] == "0") == (level > 0)
    # low bit separates outer from inner levels (decision at +-2*delta)
    for code, level in zip(spec.axis_codes(), spec.levels):
        assert (code[1] == "1") == (abs(level) < 2 * spec.delta)


def test_map_demap_round_trip_every_point():
    for order in (2, 4, 6):
        spec = ConstellationSpec.create(order, 1.0)
        n_points = 1 << order
        bits = np.array([[int(b) for b in format(k, f"0{order}b")] for k in range(n_points)])
        syms = map_bits(bits.ravel(), spec)
        assert len(np.unique(np.round(syms, 12))) == n_points
        back = demap_hard(syms, spec)
        np.testing.assert_array_equal(back, bits.ravel())


def test_map_bits_rejects_bad_length(qpsk_spec):
    with pytest.raises(ValueError):
        map_bits(np.zeros(3, dtype=int), qpsk_spec)


def test_modulate_zero_grid_gives_zero_signal(cfg):
    sig = modulate(np.zeros(cfg.num_subcarriers), cfg)
    assert np.all(sig == 0)


def test_single_subcarrier_is_constant_envelope(cfg):
    grid = np.zeros(cfg.num_subcarriers, dtype=complex)
    grid[cfg.num_subcarriers // 2] = 1.0  # signed index l=1
    body = modulate(grid, cfg, attach_gi=False)
    mags = np.abs(body)
    assert np.ptp(mags) < 1e-12


def test_modulate_demodulate_round_trip(cfg, qpsk_spec, rng):
    bits = random_bits(rng, 10 * cfg.num_subcarriers * cfg.modulation_order)
    grid = map_bits(bits, qpsk_spec).reshape(10, cfg.num_subcarriers)
    sig = modulate(grid, cfg)
    back = demodulate(sig, cfg)
    scale = np.max(np.abs(grid))
    assert np.max(np.abs(back - grid)) < 1e-10 * scale


def test_demodulate_zero_and_shape_check(cfg):
    assert np.all(demodulate(np.zeros(cfg.symbol_length, dtype=complex), cfg) == 0)
    with pytest.raises(ValueError):
        demodulate(np.zeros(cfg.fft_size + 1, dtype=complex), cfg)


def test_cyclic_shift_rotates_subcarrier_phases(cfg, qpsk_spec, rng):
    bits = random_bits(rng, cfg.num_subcarriers * cfg.modulation_order)
    grid = map_bits(bits, qpsk_spec)
    body = modulate(grid, cfg, attach_gi=False)
    k = 37
    shifted = np.roll(body, k)  # delay by k samples
    got = demodulate(shifted, cfg, has_gi=False)
    expected = grid * np.exp(-2j * np.pi * cfg.subcarrier_indices() * k / cfg.fft_size)
    assert np.max(np.abs(got - expected)) < 1e-10 * np.max(np.abs(grid))


def test_guard_interval_is_exact_tail_copy(cfg, qpsk_spec, rng):
    bits = random_bits(rng, cfg.num_subcarriers * cfg.modulation_order)
    sig = modulate(map_bits(bits, qpsk_spec), cfg)
    gi, body = sig[: cfg.gi_length], sig[cfg.gi_length :]
    np.testing.assert_array_equal(gi, body[-cfg.gi_length :])


def test_parseval_energy(cfg, qpsk_spec, rng):
    bits = random_bits(rng, cfg.num_subcarriers * cfg.modulation_order)
    grid = map_bits(bits, qpsk_spec)
    body = modulate(grid, cfg, attach_gi=False)
    time_power = np.mean(np.abs(body) ** 2)
    freq_power = np.sum(np.abs(grid) ** 2)
    assert time_power == pytest.approx(freq_power, rel=1e-10)


def test_mean_power_matches_s_t(cfg, qpsk_spec, rng):
    bits = random_bits(rng, 400 * cfg.num_subcarriers * cfg.modulation_order)
    grid = map_bits(bits, qpsk_spec).reshape(400, -1)
    body = modulate(grid, cfg, attach_gi=False)
    assert np.mean(np.abs(body) ** 2) == pytest.approx(cfg.average_power, rel=0.05)


def test_awgn_zero_sigma_and_determinism(cfg, rng):
    sig = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    assert np.array_equal(add_awgn(sig, 0.0, 7), sig)
    np.testing.assert_array_equal(add_awgn(sig, 0.3, 42), add_awgn(sig, 0.3, 42))
    with pytest.raises(ValueError):
        add_awgn(sig, -1.0, 0)


def test_awgn_complex_power():
    sigma = 0.7
    noisy = add_awgn(np.zeros(1_000_000, dtype=complex), sigma, 5)
    assert np.mean(np.abs(noisy) ** 2) == pytest.approx(2 * sigma**2, rel=0.01)


def test_instantaneous_power_is_near_exponential(cfg, qpsk_spec):
    # Gaussian-process approximation: P(|x|^2/S_t > p) ~ exp(-p); checked at
    # the 8 dB point within a factor of two over 1e5 symbols.
    n_total, chunk = 100_000, 10_000
    level = 10 ** 0.8 * cfg.average_power
    exceed = 0
    rng = np.random.default_rng(99)
    for _ in range(n_total // chunk):
        bits = random_bits(rng, chunk * cfg.num_subcarriers * cfg.modulation_order)
        grid = map_bits(bits, qpsk_spec).reshape(chunk, -1)
        body = modulate(grid, cfg, attach_gi=False)
        exceed += int(np.sum(np.abs(body) ** 2 > level))
    rate = exceed / (n_total * cfg.fft_size)
    expected = np.exp(-(10 ** 0.8))
    assert expected / 2 < rate < expected * 2
