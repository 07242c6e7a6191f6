"""Elementwise transmit nonlinearities: 1-bit DACs and constant-envelope PAs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDEAL = "ideal"
ONE_BIT = "one-bit"
CONSTANT_ENVELOPE = "constant-envelope"
KINDS = (IDEAL, ONE_BIT, CONSTANT_ENVELOPE)


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = IDEAL
    # output for an exact-zero input (constant envelope only)
    zero_phase: complex = 1 + 0j
    # sign given to an exact-zero I or Q component (one-bit only)
    sign_zero: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"nonlinearity must be one of {KINDS}, got {self.kind!r}")
        if self.sign_zero not in (1, -1):
            raise ValueError("sign_zero must be +1 or -1")
        if not np.isclose(abs(self.zero_phase), 1.0):
            raise ValueError("zero_phase must have unit modulus")


def _sign(x: np.ndarray, zero: int) -> np.ndarray:
    return np.where(x > 0, 1.0, np.where(x < 0, -1.0, float(zero)))


def apply_nonlinearity(x, spec: NonlinearitySpec = NonlinearitySpec()) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if spec.kind == IDEAL:
        return x
    if spec.kind == ONE_BIT:
        return (_sign(x.real, spec.sign_zero) + 1j * _sign(x.imag, spec.sign_zero)) / np.sqrt(2)
    mag = np.abs(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mag > 0, x / np.where(mag > 0, mag, 1.0), spec.zero_phase)
