"""Complex-matrix primitives shared by the precoder designs.

Everything here is pure and deterministic. Functions accept a single matrix
or a stack of matrices with leading batch axes where that is cheap to
support, since the Monte-Carlo engine designs one precoder per channel draw.
"""
from __future__ import annotations

import numpy as np

MODULUS = "modulus"
SPLIT = "split"
ABS_VARIANTS = (MODULUS, SPLIT)

# condition-number ceiling for the K x K Gram solves
COND_LIMIT = 1e12


class DimensionError(ValueError):
    """Inconsistent or infeasible matrix dimensions (for example K > N)."""


class RankDeficientError(np.linalg.LinAlgError):
    """Gram matrix of the channel is singular to working precision."""


def _check_variant(variant: str) -> None:
    if variant not in ABS_VARIANTS:
        raise ValueError(f"abs variant must be one of {ABS_VARIANTS}, got {variant!r}")


def abs_values(A: np.ndarray, variant: str = MODULUS) -> np.ndarray:
    """Elementwise magnitude; ``split`` uses |Re| + |Im| (the 1-bit DAC measure)."""
    _check_variant(variant)
    if variant == SPLIT:
        return np.abs(A.real) + np.abs(A.imag)
    return np.abs(A)


def lpq_norm_q(A, p: float = 2.0, q: float = 2.0, variant: str = MODULUS) -> float:
    """Return ``||A||_{p,q}^q = sum_j (sum_i |a_ij|^p)^(q/p)``.

    The inner sum runs down each column. ``||P^T||_{1,2}^2`` is therefore
    ``lpq_norm_q(P.T, 1, 2)``, the sum of squared row l1 norms of ``P``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("lpq_norm_q needs a non-empty 2-D matrix")
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    col = (abs_values(A, variant) ** p).sum(axis=0)
    return float((col ** (q / p)).sum())


def row_l1_norms(P: np.ndarray, variant: str = MODULUS) -> np.ndarray:
    return abs_values(P, variant).sum(axis=-1)


def l12_sq(P: np.ndarray, variant: str = MODULUS) -> np.ndarray:
    """``||P^T||_{1,2}^2`` for a matrix or a stack of matrices."""
    return (row_l1_norms(P, variant) ** 2).sum(axis=-1)


def hermitian(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def _gram_solve(G: np.ndarray, B: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(G)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise RankDeficientError(
            f"Gram matrix condition number {np.max(cond):.3e} exceeds {COND_LIMIT:.0e}"
        )
    return np.linalg.solve(G, B)


def pseudo_inverse_fat(H) -> np.ndarray:
    """Minimum-Frobenius right inverse ``H^H (H H^H)^{-1}`` of a fat channel.

    Raises RankDeficientError if ``H H^H`` is numerically singular.
    """
    H = np.asarray(H, dtype=complex)
    K, N = H.shape[-2:]
    if K > N:
        raise DimensionError(f"need K <= N for a right inverse, got K={K}, N={N}")
    Hh = hermitian(H)
    eye = np.broadcast_to(np.eye(K), H.shape[:-2] + (K, K))
    # (H H^H)^{-1} is Hermitian, so P = H^H X with X = (H H^H)^{-1}
    return Hh @ _gram_solve(H @ Hh, eye)


def ridge_right_inverse(H, c: float, target) -> np.ndarray:
    """Minimizer of ``||H P - target||_F^2 + c ||P||_F^2``.

    Solved on the small side: ``P = H^H (H H^H + c I_K)^{-1} target``, which
    equals ``(H^H H + c I_N)^{-1} H^H target``. With ``c = 0`` this is the
    pseudo-inverse composed with ``target``.
    """
    if c < 0:
        raise ValueError("ridge weight must be non-negative")
    H = np.asarray(H, dtype=complex)
    target = np.asarray(target, dtype=complex)
    K = H.shape[-2]
    if target.shape[-2] != K:
        raise ValueError(f"target has {target.shape[-2]} rows, channel has {K}")
    Hh = hermitian(H)
    G = H @ Hh + c * np.eye(K)
    return Hh @ _gram_solve(G, target)


def soft_threshold(M, T, variant: str = MODULUS) -> np.ndarray:
    """Elementwise shrinkage ``exp(j angle m) * max(|m| - t, 0)``.

    With ``split`` the real and imaginary parts are shrunk independently by
    the same ``t``. ``T`` must broadcast to ``M`` and be non-negative.
    """
    _check_variant(variant)
    M = np.asarray(M, dtype=complex)
    T = np.asarray(T, dtype=float)
    if np.broadcast_shapes(M.shape, T.shape) != M.shape:
        raise ValueError(f"threshold shape {T.shape} does not match {M.shape}")
    if np.any(T < 0):
        raise ValueError("thresholds must be non-negative")
    if variant == SPLIT:
        re = np.sign(M.real) * np.maximum(np.abs(M.real) - T, 0.0)
        im = np.sign(M.imag) * np.maximum(np.abs(M.imag) - T, 0.0)
        return re + 1j * im
    mag = np.abs(M)
    keep = np.maximum(mag - T, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(mag > 0, M / np.where(mag > 0, mag, 1.0), 0.0)
    return phase * keep


def prox_squared_l1_rows(V, beta: float, variant: str = MODULUS) -> np.ndarray:
    """Row-wise prox of ``(beta/2) * (row l1 norm)^2``.

    Each row ``v`` maps to ``argmin_x 0.5||x - v||^2 + (beta/2)||x||_1^2``,
    which is a soft-threshold of ``v`` at ``tau = beta * ||x||_1``. Sorting the
    magnitudes gives ``tau`` in closed form. For ``split`` the magnitudes are
    those of the real and imaginary parts taken together.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    V = np.asarray(V, dtype=complex)
    if variant == SPLIT:
        a = np.concatenate([np.abs(V.real), np.abs(V.imag)], axis=-1)
    else:
        _check_variant(variant)
        a = np.abs(V)
    u = -np.sort(-a, axis=-1)
    m = np.arange(1, a.shape[-1] + 1)
    tau = beta * np.cumsum(u, axis=-1) / (1.0 + beta * m)
    support = (u > tau).sum(axis=-1)
    idx = np.maximum(support - 1, 0)[..., None]
    t = np.take_along_axis(tau, idx, axis=-1)[..., 0] * (support > 0)
    return soft_threshold(V, t[..., None], variant)
