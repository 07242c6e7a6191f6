import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparseprec.waveforms import (
    OFDM,
    SC_FDMA,
    BlockModSpec,
    band_bins,
    coherent_peak_block,
    demodulate,
    freq_window,
    modulate,
    ofdm_worst_case_papr,
    papr,
    sc_peak_power_bound,
    sc_peak_power_exact,
    sc_pulse,
    sc_pulse_cyclic,
)

# 30-digit mpmath evaluations of the two closed forms
EXACT = {2: 2.0, 4: 3.414213562373095, 8: 5.2304424973876633, 32: 10.042063032581888,
         128: 16.414035552880501, 512: 24.343998739803375, 2048: 33.831742519429153}
BOUND = {8: 3.6820602443026486, 32: 7.8479087628342465, 128: 13.571519459116908,
         512: 20.852892333150635, 2048: 29.692027384935425}


def qpsk(rng, *shape):
    return (1 - 2 * rng.integers(0, 2, shape)) + 1j * (1 - 2 * rng.integers(0, 2, shape))


def test_spec_validation():
    assert BlockModSpec(8).block_len == 16
    for M in (0, 2, 6, 10):
        with pytest.raises(ValueError):
            BlockModSpec(M)
    with pytest.raises(ValueError):
        BlockModSpec(8, "fbmc")
    with pytest.raises(ValueError):
        BlockModSpec(8, oversampling=4)


def test_pulse_values():
    assert sc_pulse(0, 16) == 1.0
    assert sc_pulse(2, 8) == pytest.approx(0.0, abs=1e-15)
    assert sc_pulse(1, 2) == pytest.approx(0.7071067811865476)
    with pytest.raises(ValueError):
        sc_pulse(16, 8)
    with pytest.raises(ValueError):
        sc_pulse(-1, 8)


@pytest.mark.parametrize("M", [4, 8, 32])
def test_cyclic_pulse_modulus_matches_closed_form(M):
    g = sc_pulse_cyclic(M)
    ref = np.array([abs(sc_pulse(n, M)) for n in range(2 * M)])
    assert np.allclose(np.abs(g), ref, atol=1e-12)


@pytest.mark.parametrize("M", [8, 32])
def test_window_is_dft_of_pulse(M):
    W = freq_window(M)
    assert W[0] == pytest.approx(1 / np.sqrt(8) if M == 8 else 1 / np.sqrt(M))
    assert W[M] == 0
    assert np.count_nonzero(W) == M
    Wg = np.fft.fft(sc_pulse_cyclic(M)) / (2 * np.sqrt(M))
    assert np.max(np.abs(Wg - W)) <= 1e-10


def test_band_is_m_lowest_bins():
    assert list(band_bins(8)) == [0, 1, 2, 3, 12, 13, 14, 15]


def test_sc_single_symbol_is_shifted_pulse():
    M = 16
    d = np.zeros(M, complex)
    d[0] = 1 - 1j
    x = modulate(d, BlockModSpec(M, SC_FDMA))
    assert np.allclose(x, (1 - 1j) * sc_pulse_cyclic(M), atol=1e-12)
    # even samples: the symbol itself at n = 0 and zeros elsewhere
    assert x[0] == pytest.approx(1 - 1j)
    assert np.allclose(x[2::2], 0, atol=1e-12)


def test_sc_modulation_is_cyclic_convolution():
    rng = np.random.default_rng(0)
    M = 8
    d = qpsk(rng, M)
    g = sc_pulse_cyclic(M)
    ref = np.array([sum(d[m] * g[(n - 2 * m) % (2 * M)] for m in range(M)) for n in range(2 * M)])
    assert np.allclose(modulate(d, BlockModSpec(M, SC_FDMA)), ref, atol=1e-12)


@pytest.mark.parametrize("scheme", [OFDM, SC_FDMA])
def test_round_trip_and_zero_block(scheme):
    rng = np.random.default_rng(1)
    spec = BlockModSpec(32, scheme)
    s = qpsk(rng, 50, 32)
    assert np.max(np.abs(demodulate(modulate(s, spec), spec) - s)) <= 1e-12
    assert np.all(modulate(np.zeros(32), spec) == 0)


@given(st.sampled_from([OFDM, SC_FDMA]), st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_demodulate_linear(scheme, a, b):
    rng = np.random.default_rng(2)
    spec = BlockModSpec(8, scheme)
    x = rng.normal(size=16) + 1j * rng.normal(size=16)
    y = rng.normal(size=16) + 1j * rng.normal(size=16)
    lhs = demodulate(a * x + b * y, spec)
    rhs = a * demodulate(x, spec) + b * demodulate(y, spec)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_length_mismatch():
    with pytest.raises(ValueError):
        modulate(np.ones(7), BlockModSpec(8))
    with pytest.raises(ValueError):
        demodulate(np.ones(15), BlockModSpec(8))


@pytest.mark.parametrize("scheme", [OFDM, SC_FDMA])
def test_mean_power_preserved(scheme):
    rng = np.random.default_rng(3)
    x = modulate(qpsk(rng, 2000, 16), BlockModSpec(16, scheme))
    assert np.mean(np.abs(x) ** 2) == pytest.approx(2.0, rel=0.01)


def test_time_domain_noise_maps_to_equal_symbol_noise():
    rng = np.random.default_rng(4)
    M = 16
    w = (rng.standard_normal((100_000 // M * 2, 2 * M)) + 1j * rng.standard_normal((100_000 // M * 2, 2 * M))) / np.sqrt(2)
    v = [np.var(demodulate(w, BlockModSpec(M, s))) for s in (OFDM, SC_FDMA)]
    assert v[0] == pytest.approx(v[1], rel=0.02)


@pytest.mark.parametrize("M", [16, 128])
def test_ofdm_identical_input_papr_is_m(M):
    x = modulate(np.ones(M), BlockModSpec(M, OFDM))
    assert papr(x) == pytest.approx(M, abs=1e-9)
    assert ofdm_worst_case_papr(M) == M


@pytest.mark.parametrize("M", sorted(EXACT))
def test_peak_exact_frozen(M):
    assert sc_peak_power_exact(M) == pytest.approx(EXACT[M], rel=1e-13)


def test_peak_exact_rejects_degenerate():
    with pytest.raises(ValueError):
        sc_peak_power_exact(1)


@pytest.mark.parametrize("M", [4, 8, 32, 128])
def test_coherent_peak_brute_force(M):
    x = modulate(coherent_peak_block(M), BlockModSpec(M, SC_FDMA))
    p = np.abs(x) ** 2
    assert p.max() == pytest.approx(sc_peak_power_exact(M), abs=1e-9)
    assert p.argmax() % 2 == 1
    # unit-modulus input keeps the average power at one
    assert p.mean() == pytest.approx(1.0, abs=1e-12)


def test_all_ones_sc_block_is_flat():
    # identical symbols excite one bin of the spreading DFT, so SC gives a
    # constant envelope instead of the OFDM spike
    x = modulate(np.ones(32), BlockModSpec(32, SC_FDMA))
    assert papr(x) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("M", sorted(BOUND))
def test_bound_frozen(M):
    assert sc_peak_power_bound(M) == pytest.approx(BOUND[M], rel=1e-13)


def test_bound_slowly_varying():
    r = [sc_peak_power_bound(2 * M) / sc_peak_power_bound(M) for M in (64, 1024, 2**14, 2**20)]
    assert all(a > b for a, b in zip(r, r[1:]))
    assert r[-1] < 1.15


def test_exact_grows_like_log_squared():
    Ms = 2 ** np.arange(3, 13)
    ratio = np.array([sc_peak_power_exact(int(M)) / np.log(M) ** 2 for M in Ms])
    # bounded above and decreasing toward the 4/pi^2 asymptote
    assert np.all(np.diff(ratio) < 0)
    assert ratio[-1] > 4 / np.pi**2
