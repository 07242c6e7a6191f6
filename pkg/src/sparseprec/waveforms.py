"""Block OFDM and SC-FDMA modulation at oversampling factor two.

A block of ``M`` symbols occupies the ``M`` lowest-frequency bins of a
``2M``-point spectrum (``M/2`` non-negative and ``M/2`` negative frequencies).
SC-FDMA first spreads the block with a unitary ``M``-point DFT. The resulting
cyclic pulse has modulus ``|sin(pi n/2) / (M sin(pi n/(2M)))|``; its phase is
a linear ramp from the half-bin offset of an even-width band.

Transforms are unitary, and the time block is scaled by sqrt(2) so that the
mean sample power equals the mean symbol power.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OFDM = "ofdm"
SC_FDMA = "sc-fdma"
SCHEMES = (OFDM, SC_FDMA)


@dataclass(frozen=True)
class BlockModSpec:
    M: int
    scheme: str = SC_FDMA
    oversampling: int = 2

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.oversampling != 2:
            raise ValueError("only oversampling factor 2 is supported")
        if self.M < 2 or self.M % 4:
            raise ValueError(f"M must be >= 2 and divisible by 4, got {self.M}")

    @property
    def block_len(self) -> int:
        return 2 * self.M


def band_bins(M: int) -> np.ndarray:
    """Indices of the ``M`` occupied bins in a ``2M``-point spectrum, in data order."""
    half = M // 2
    return np.concatenate([np.arange(half), np.arange(2 * M - half, 2 * M)])


def sc_pulse(n: int, M: int) -> float:
    """Cyclic pulse value ``p[n]``: 1 at n = 0, else sin(pi n/2)/(M sin(pi n/2M))."""
    if not 0 <= n < 2 * M:
        raise ValueError(f"n must lie in [0, {2 * M}), got {n}")
    if n == 0:
        return 1.0
    return float(np.sin(np.pi * n / 2) / (M * np.sin(np.pi * n / (2 * M))))


def sc_pulse_cyclic(M: int) -> np.ndarray:
    """The complex cyclic pulse realised by the SC-FDMA modulator, length ``2M``.

    ``modulate`` maps a block ``d`` to ``x[n] = sum_m d[m] g[(n - 2m) mod 2M]``
    with ``g`` returned here; ``|g[n]| == |sc_pulse(n, M)|``.
    """
    spectrum = np.zeros(2 * M, dtype=complex)
    spectrum[band_bins(M)] = 1.0
    return np.fft.ifft(spectrum) * 2


def freq_window(M: int) -> np.ndarray:
    """Frequency window of the SC pulse: 1/sqrt(M) on the ``M`` occupied bins, 0 elsewhere.

    Its scaled inverse DFT, ``sqrt(M)/M * sum_k W[k] exp(j pi k n / M)``, is
    ``sc_pulse_cyclic(M)``.
    """
    if M < 2 or M % 2:
        raise ValueError(f"M must be even and >= 2, got {M}")
    W = np.zeros(2 * M)
    W[band_bins(M)] = 1.0 / np.sqrt(M)
    return W


def _check_len(x: np.ndarray, n: int, what: str) -> None:
    if x.shape[-1] != n:
        raise ValueError(f"{what} length {x.shape[-1]} != {n}")


def modulate(symbols, spec: BlockModSpec) -> np.ndarray:
    """Map ``M`` symbols (last axis) to a ``2M``-sample time block."""
    d = np.asarray(symbols, dtype=complex)
    M = spec.M
    _check_len(d, M, "symbol block")
    if spec.scheme == SC_FDMA:
        d = np.fft.fft(d, norm="ortho", axis=-1)
    X = np.zeros(d.shape[:-1] + (2 * M,), dtype=complex)
    X[..., band_bins(M)] = d
    return np.sqrt(2) * np.fft.ifft(X, norm="ortho", axis=-1)


def demodulate(block, spec: BlockModSpec) -> np.ndarray:
    """Inverse of ``modulate`` on its range; out-of-band energy is discarded."""
    x = np.asarray(block, dtype=complex)
    M = spec.M
    _check_len(x, 2 * M, "time block")
    X = np.fft.fft(x / np.sqrt(2), norm="ortho", axis=-1)
    d = X[..., band_bins(M)]
    if spec.scheme == SC_FDMA:
        d = np.fft.ifft(d, norm="ortho", axis=-1)
    return d


def sc_peak_power_exact(M: int) -> float:
    """Worst-case SC-FDMA peak power: ``(sum_n 1/(M sin(pi(2n+1)/(2M))))^2``.

    Attained at an odd (between-symbol) sample when every unit-modulus symbol
    is phase-aligned with the pulse tap it meets. The average power is 1, so
    this is also the worst-case PAPR.
    """
    if M < 2:
        raise ValueError("a block needs at least two symbols to have an intermediate sample")
    n = np.arange(M)
    return float(np.sum(1.0 / (M * np.sin(np.pi * (2 * n + 1) / (2 * M)))) ** 2)


def sc_peak_power_bound(M: int) -> float:
    """Large-M logarithmic approximation ``(4/pi^2) ln(pi/(8M))^2``."""
    if M < 2:
        raise ValueError("M must be >= 2")
    return float(4.0 / np.pi**2 * np.log(np.pi / (8 * M)) ** 2)


def ofdm_worst_case_papr(M: int) -> float:
    return float(M)


def coherent_peak_block(M: int, n0: int = 1) -> np.ndarray:
    """Unit-modulus block whose SC-FDMA sample ``n0`` adds all taps in phase."""
    g = sc_pulse_cyclic(M)
    taps = g[(n0 - 2 * np.arange(M)) % (2 * M)]
    return np.exp(-1j * np.angle(taps))


def papr(x, axis=-1) -> np.ndarray:
    """Peak-to-average power ratio along ``axis`` (linear)."""
    p = np.abs(np.asarray(x)) ** 2
    return p.max(axis=axis) / p.mean(axis=axis)
