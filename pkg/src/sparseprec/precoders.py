"""Linear precoder designs for downlinks with nonlinear front-ends.

Designs operate on a channel ``H`` of shape ``(K, N)`` and return an ``N x L``
precoder, ``L = K`` for direct precoding and ``L = 2K`` for 16-QAM
superposition. The ``*_batch`` variants take a stack ``(B, K, N)`` and are
what the Monte-Carlo engine uses; they run the same iteration on every
instance and freeze each one as soon as it meets its own stopping rule.

The elastic-net objective is

    F(P) = ||H P - T||^2 + 1/2 (c ||P||_F^2 + lam (||P^T||_{1,2}^2 + tr(P J P^H)))

with ``c = K sigma^2 / N`` and the trace term present only for superposition.
ISTA takes the step ``P - mu * Delta`` with
``Delta = (H^H H + c/2 I) P - H^H T + lam/2 P J`` and shrinks every row by
``mu * lam/2`` times its own l1 norm.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    ABS_VARIANTS,
    DimensionError,
    MODULUS,
    hermitian,
    l12_sq,
    prox_squared_l1_rows,
    pseudo_inverse_fat,
    ridge_right_inverse,
    row_l1_norms,
    soft_threshold,
)

INITS = ("zero", "pseudo-inverse", "ridge")
THRESHOLDS = ("lagged", "exact")
SOLVERS = ("ista", "admm")

# consecutive objective increases that count as divergence
DIVERGENCE_RUN = 10
RIDGE_MATCH_TOL = 1e-6


class DesignError(RuntimeError):
    pass


class IstaDivergenceError(DesignError):
    pass


@dataclass(frozen=True)
class IstaConfig:
    """Parameters of the regularized designs.

    ``lam`` weights the squared row-l1 term and has no default that fits every
    setup; calibrate it (see ``simulation.calibrate_lambda``).
    ``threshold="lagged"`` shrinks with the row norms of the current iterate,
    the usual lagged ISTA form; ``"exact"`` uses the true proximal map of the
    squared row-l1 norm. Both have the same fixed points.
    """

    mu: float = 0.01
    lam: float = 0.0
    sigma_eta_sq: float = 0.0
    abs_variant: str = MODULUS
    max_iters: int = 5000
    rel_tol: float = 1e-7
    init: str = "zero"
    threshold: str = "lagged"
    solver: str = "ista"
    admm_rho: float = 1.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("step size mu must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.sigma_eta_sq < 0:
            raise ValueError("sigma_eta_sq must be non-negative")
        if self.abs_variant not in ABS_VARIANTS:
            raise ValueError(f"abs_variant must be one of {ABS_VARIANTS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be non-negative")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.threshold not in THRESHOLDS:
            raise ValueError(f"threshold must be one of {THRESHOLDS}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.admm_rho <= 0:
            raise ValueError("admm_rho must be positive")

    def ridge_weight(self, K: int, N: int) -> float:
        """``c = K sigma^2 / N``; the closed-form lam = 0 fixed point uses ``c / 2``."""
        return K * self.sigma_eta_sq / N


@dataclass(frozen=True)
class SuperpositionSpec:
    """16-QAM as LSB + 2 * MSB of two QPSK layers per user."""

    n_users: int
    layers: int = 2

    def __post_init__(self):
        if self.layers != 2:
            raise ValueError("only two-layer (16-QAM) superposition is supported")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")

    @property
    def expansion(self) -> np.ndarray:
        """``Pi = I_K kron [1, 2]``, shape ``(K, 2K)``."""
        return np.kron(np.eye(self.n_users), [[1.0, 2.0]])

    @property
    def perturbation(self) -> np.ndarray:
        """``J = I_K kron (1 1^T - I_2)``, shape ``(2K, 2K)``."""
        return np.kron(np.eye(self.n_users), np.ones((2, 2)) - np.eye(2))


@dataclass
class DesignReport:
    precoder: np.ndarray
    method: str
    iterations_used: int = 0
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True
    row_l1_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sparsity_fraction: float = 0.0
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        P = self.precoder
        out = {
            "method": self.method,
            "shape": list(P.shape),
            "iterations_used": int(self.iterations_used),
            "converged": bool(self.converged),
            "sparsity_fraction": float(self.sparsity_fraction),
            "row_l1_norms": [float(v) for v in self.row_l1_norms],
            "objective_trace": [float(v) for v in self.objective_trace],
        }
        out.update(self.extras)
        return out


def sparsity_fraction(P: np.ndarray, rel_eps: float = 1e-6) -> float:
    """Fraction of entries with modulus at most ``rel_eps`` times the largest."""
    mag = np.abs(P)
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        return 1.0
    return float(np.mean(mag <= rel_eps * peak))


def _report(P, method, variant=MODULUS, **kw) -> DesignReport:
    return DesignReport(
        precoder=P,
        method=method,
        row_l1_norms=row_l1_norms(P, variant),
        sparsity_fraction=sparsity_fraction(P),
        **kw,
    )


def _as_channel(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError(f"channel must be a K x N matrix, got shape {H.shape}")
    K, N = H.shape
    if K > N:
        raise DimensionError(f"need K <= N, got K={K}, N={N}")
    return H


def design_zf(H, target=None) -> DesignReport:
    """Minimum-Frobenius zero-forcing precoder, ``H P = target`` (default ``I``)."""
    H = _as_channel(H)
    P = pseudo_inverse_fat(H)
    if target is not None:
        P = P @ np.asarray(target, dtype=complex)
    T = np.eye(H.shape[0]) if target is None else np.asarray(target)
    res = float(np.linalg.norm(H @ P - T))
    return _report(P, "zf", extras={"constraint_residual": res})


def design_zf_batch(H, target=None) -> np.ndarray:
    P = pseudo_inverse_fat(H)
    return P if target is None else P @ np.asarray(target, dtype=complex)


# --- objective and one ISTA step ------------------------------------------------


def _target_for(H: np.ndarray, target, spec: SuperpositionSpec | None) -> np.ndarray:
    K = H.shape[-2]
    if target is None:
        target = spec.expansion if spec is not None else np.eye(K)
    target = np.asarray(target, dtype=complex)
    if target.shape[0] != K:
        raise ValueError(f"target must have {K} rows, got {target.shape}")
    return target


def _objective_parts(H, P, R, c, lam, variant, J):
    F = np.sum(np.abs(R) ** 2, axis=(-2, -1))
    reg = c * np.sum(np.abs(P) ** 2, axis=(-2, -1))
    if lam:
        reg = reg + lam * l12_sq(P, variant)
        if J is not None:
            reg = reg + lam * np.real(np.sum(np.conj(P) * (P @ J), axis=(-2, -1)))
    return F + 0.5 * reg


def objective(H, P, cfg: IstaConfig, target=None, spec: SuperpositionSpec | None = None):
    """Elastic-net objective; adds the symmetry-breaking trace term when ``spec`` is given."""
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P, dtype=complex)
    K, N = H.shape[-2:]
    T = _target_for(H, target, spec)
    if P.shape[-2] != N or P.shape[-1] != T.shape[-1]:
        raise ValueError(f"precoder shape {P.shape} incompatible with channel {H.shape} and target {T.shape}")
    J = spec.perturbation if spec is not None else None
    R = H @ P - T
    val = _objective_parts(H, P, R, cfg.ridge_weight(K, N), cfg.lam, cfg.abs_variant, J)
    return float(val) if np.ndim(val) == 0 else val


def ista_direction(H, P, cfg: IstaConfig, target, J=None) -> np.ndarray:
    """``Delta = H^H (H P - T) + c/2 P (+ lam/2 P J)``."""
    K, N = H.shape[-2:]
    D = hermitian(H) @ (H @ P - target) + 0.5 * cfg.ridge_weight(K, N) * P
    if J is not None and cfg.lam:
        D = D + 0.5 * cfg.lam * (P @ J)
    return D


def _shrink(V, P, cfg: IstaConfig) -> np.ndarray:
    step = cfg.mu * cfg.lam / 2
    if cfg.threshold == "exact":
        return prox_squared_l1_rows(V, step, cfg.abs_variant)
    t = step * row_l1_norms(P, cfg.abs_variant)
    return soft_threshold(V, t[..., None], cfg.abs_variant)


def ista_step(H, P, cfg: IstaConfig, target=None, spec: SuperpositionSpec | None = None):
    H = np.asarray(H, dtype=complex)
    T = _target_for(H, target, spec)
    J = spec.perturbation if spec is not None else None
    V = P - cfg.mu * ista_direction(H, P, cfg, T, J)
    return _shrink(V, P, cfg)


def step_bound(H, cfg: IstaConfig, spec: SuperpositionSpec | None = None) -> np.ndarray:
    """``mu * L`` with L the gradient Lipschitz constant of the smooth part."""
    K, N = H.shape[-2:]
    lmax = np.linalg.eigvalsh(H @ hermitian(H))[..., -1]
    L = lmax + 0.5 * cfg.ridge_weight(K, N)
    if spec is not None:
        L = L + 0.5 * cfg.lam
    return cfg.mu * L


def _initial(H, cfg: IstaConfig, T) -> np.ndarray:
    N = H.shape[-1]
    if cfg.init == "zero":
        return np.zeros(H.shape[:-2] + (N, T.shape[-1]), dtype=complex)
    if cfg.init == "pseudo-inverse":
        return pseudo_inverse_fat(H) @ T
    return ridge_right_inverse(H, 0.5 * cfg.ridge_weight(*H.shape[-2:]), T)


def _rel_change(new, old) -> np.ndarray:
    num = np.linalg.norm(new - old, axis=(-2, -1))
    den = np.linalg.norm(old, axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out


@dataclass
class BatchResult:
    precoders: np.ndarray  # (B, N, L)
    iterations: np.ndarray  # (B,)
    converged: np.ndarray  # (B,) bool
    failed: np.ndarray  # (B,) bool, divergence detected
    traces: np.ndarray | None = None  # (iters + 1, B)


def ista_batch(H, cfg: IstaConfig, target=None, spec=None, keep_trace=False) -> BatchResult:
    """Run ISTA on a stack of channels ``(B, K, N)``."""
    H = np.asarray(H, dtype=complex)
    if H.ndim == 2:
        H = H[None]
    B, K, N = H.shape
    T = _target_for(H, target, spec)
    J = spec.perturbation if spec is not None else None
    c = cfg.ridge_weight(K, N)

    mu_l = step_bound(H, cfg, spec)
    if np.any(mu_l >= 2):
        warnings.warn(
            f"step size mu={cfg.mu} exceeds the stability bound (mu*L up to {mu_l.max():.2f} >= 2); "
            "descent may fail",
            RuntimeWarning,
            stacklevel=2,
        )

    Hh = hermitian(H)
    P = _initial(H, cfg, T)
    active = np.ones(B, dtype=bool)
    failed = np.zeros(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    ups = np.zeros(B, dtype=int)
    trace = [] if keep_trace else None

    R = H @ P - T
    F = _objective_parts(H, P, R, c, cfg.lam, cfg.abs_variant, J)
    if keep_trace:
        trace.append(F.copy())
    for _ in range(cfg.max_iters):
        D = Hh @ R + 0.5 * c * P
        if J is not None and cfg.lam:
            D = D + 0.5 * cfg.lam * (P @ J)
        P_new = _shrink(P - cfg.mu * D, P, cfg)
        change = _rel_change(P_new, P)
        R_new = H @ P_new - T
        F_new = _objective_parts(H, P_new, R_new, c, cfg.lam, cfg.abs_variant, J)

        upd = active[:, None, None]
        P = np.where(upd, P_new, P)
        R = np.where(upd, R_new, R)
        rising = F_new > F + 1e-12 * np.abs(F)
        ups = np.where(active & rising, ups + 1, np.where(active, 0, ups))
        F = np.where(active, F_new, F)
        iters += active
        if keep_trace:
            trace.append(F.copy())

        bad = active & ((ups >= DIVERGENCE_RUN) | ~np.isfinite(F))
        failed |= bad
        done = active & (change < cfg.rel_tol)
        converged |= done
        active &= ~(bad | done)
        if not active.any():
            break

    return BatchResult(P, iters, converged, failed, np.array(trace) if keep_trace else None)


def admm_batch(H, cfg: IstaConfig, target=None) -> BatchResult:
    """Minimize the (convex) elastic-net objective by ADMM.

    Splits the quadratic part from the squared row-l1 term; the quadratic
    update is a K x K solve per channel and the other update is the exact
    row-wise proximal map. Returns the sparse iterate.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim == 2:
        H = H[None]
    B, K, N = H.shape
    T = _target_for(H, target, None)
    c = cfg.ridge_weight(K, N)
    rho = cfg.admm_rho
    a = 0.5 * (c + rho)
    Hh = hermitian(H)
    # (H^H H + a I)^{-1} Y = (Y - H^H (H H^H + a I)^{-1} H Y) / a
    G = np.linalg.inv(H @ Hh + a * np.eye(K))
    HhT = Hh @ T

    Z = np.zeros((B, N, T.shape[-1]), dtype=complex)
    U = np.zeros_like(Z)
    iters = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    beta = cfg.lam / rho
    for _ in range(cfg.max_iters):
        Y = HhT + 0.5 * rho * (Z - U)
        P = (Y - Hh @ (G @ (H @ Y))) / a
        Z_new = prox_squared_l1_rows(P + U, beta, cfg.abs_variant)
        U_new = U + P - Z_new
        scale = np.maximum(np.linalg.norm(Z_new, axis=(-2, -1)), 1e-300)
        primal = np.linalg.norm(P - Z_new, axis=(-2, -1)) / scale
        dual = np.linalg.norm(Z_new - Z, axis=(-2, -1)) / scale
        upd = active[:, None, None]
        Z = np.where(upd, Z_new, Z)
        U = np.where(upd, U_new, U)
        iters += active
        done = active & (primal < cfg.rel_tol) & (dual < cfg.rel_tol)
        converged |= done
        active &= ~done
        if not active.any():
            break
    return BatchResult(Z, iters, converged, np.zeros(B, dtype=bool))


def l12_batch(H, variant=MODULUS, target=None, rho=1.0, max_iters=3000, tol=1e-10) -> BatchResult:
    """Minimum ``||P^T||_{1,2}^2`` subject to ``H P = target``, by ADMM.

    Alternates an affine projection onto the zero-forcing set with the exact
    row-wise prox; the returned precoder is the final prox iterate projected
    back onto the constraint, so it is feasible to rounding error.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim == 2:
        H = H[None]
    B, K, N = H.shape
    T = np.eye(K) if target is None else np.asarray(target, dtype=complex)
    Hp = pseudo_inverse_fat(H)

    def project(X):
        return X - Hp @ (H @ X - T)

    Z = Hp @ T
    U = np.zeros_like(Z)
    iters = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    beta = 2.0 / rho
    for _ in range(max_iters):
        P = project(Z - U)
        Z_new = prox_squared_l1_rows(P + U, beta, variant)
        U_new = U + P - Z_new
        scale = np.maximum(np.linalg.norm(Z_new, axis=(-2, -1)), 1e-300)
        primal = np.linalg.norm(P - Z_new, axis=(-2, -1)) / scale
        dual = np.linalg.norm(Z_new - Z, axis=(-2, -1)) / scale
        upd = active[:, None, None]
        Z = np.where(upd, Z_new, Z)
        U = np.where(upd, U_new, U)
        iters += active
        done = active & (primal < tol) & (dual < tol)
        converged |= done
        active &= ~done
        if not active.any():
            break
    return BatchResult(project(Z), iters, converged, np.zeros(B, dtype=bool))


# --- single-channel designs -------------------------------------------------------


def design_ista(H, cfg: IstaConfig, target=None, spec: SuperpositionSpec | None = None) -> DesignReport:
    """Elastic-net precoder by iterative shrinkage-thresholding.

    Raises IstaDivergenceError when the objective rises for ten iterations in
    a row; a smaller ``mu`` is the usual fix.
    """
    H = _as_channel(H)
    T = _target_for(H, target, spec)
    res = ista_batch(H, cfg, T, spec, keep_trace=True)
    if res.failed[0]:
        raise IstaDivergenceError(
            f"ISTA diverged after {res.iterations[0]} iterations with mu={cfg.mu}; reduce the step size"
        )
    P = res.precoders[0]
    n = int(res.iterations[0])
    return _report(
        P,
        "elastic-net" if spec is None else "superposition",
        cfg.abs_variant,
        iterations_used=n,
        objective_trace=res.traces[: n + 1, 0],
        converged=bool(res.converged[0]),
        extras={"constraint_residual": float(np.linalg.norm(H @ P - T))},
    )


def design_elastic_net(H, cfg: IstaConfig, target=None) -> DesignReport:
    """Elastic-net precoder with the solver named in ``cfg.solver``.

    The ADMM result is certified against the ISTA iteration: the report's
    ``ista_fixed_point_change`` is the relative change one ISTA step makes.
    """
    if cfg.solver == "ista":
        rep = design_ista(H, cfg, target)
    else:
        H = _as_channel(H)
        T = _target_for(H, target, None)
        res = admm_batch(H, cfg, T)
        P = res.precoders[0]
        check = float(_rel_change(ista_step(H, P, cfg, T), P))
        rep = _report(
            P,
            "elastic-net",
            cfg.abs_variant,
            iterations_used=int(res.iterations[0]),
            objective_trace=np.array([objective(H, P, cfg, T)]),
            converged=bool(res.converged[0]),
            extras={"ista_fixed_point_change": check, "constraint_residual": float(np.linalg.norm(H @ P - T))},
        )
    if cfg.lam == 0:
        # without the l1 term the fixed point is a ridge solution with weight c/2
        H = _as_channel(H)
        K, N = H.shape
        ridge = ridge_right_inverse(H, cfg.ridge_weight(K, N) / 2, _target_for(H, target, None))
        diff = float(np.max(np.abs(rep.precoder - ridge)))
        rep.extras["ridge_oracle_max_abs_diff"] = diff
        rep.extras["ridge_oracle_match"] = diff <= RIDGE_MATCH_TOL
    return rep


def design_l12(H, variant=MODULUS, target=None, max_iters=3000, tol=1e-10) -> DesignReport:
    """Zero-forcing precoder with minimal ``||P^T||_{1,2}^2``."""
    H = _as_channel(H)
    T = np.eye(H.shape[0]) if target is None else np.asarray(target, dtype=complex)
    res = l12_batch(H, variant, T, max_iters=max_iters, tol=tol)
    P = res.precoders[0]
    return _report(
        P,
        "l12",
        variant,
        iterations_used=int(res.iterations[0]),
        objective_trace=np.array([l12_sq(P, variant)]),
        converged=bool(res.converged[0]),
        extras={"constraint_residual": float(np.linalg.norm(H @ P - T))},
    )


# --- superposition ----------------------------------------------------------------

_QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])


def expand_superposition(s_qpsk, spec: SuperpositionSpec | None = None) -> np.ndarray:
    """Combine per-user (LSB, MSB) QPSK pairs into 16-QAM: ``LSB + 2 * MSB``.

    ``s_qpsk`` has ``2K`` entries along its first axis, ordered
    ``LSB_0, MSB_0, LSB_1, MSB_1, ...``.
    """
    s = np.asarray(s_qpsk, dtype=complex)
    if s.shape[0] % 2:
        raise ValueError("need an even number of layer symbols")
    if not np.all(np.isin(s, _QPSK_POINTS)):
        raise ValueError("layer symbols must lie in {+-1 +-1j}")
    K = s.shape[0] // 2
    spec = spec or SuperpositionSpec(K)
    if spec.n_users != K:
        raise ValueError(f"spec is for {spec.n_users} users, got {K}")
    return np.tensordot(spec.expansion, s, axes=(1, 0))


def pair_asymmetry(P) -> np.ndarray:
    """Per-user ``||p_msb - 2 p_lsb|| / ||p_lsb||``; zero when the MSB column is twice the LSB."""
    P = np.asarray(P)
    lsb, msb = P[..., 0::2], P[..., 1::2]
    num = np.linalg.norm(msb - 2 * lsb, axis=-2)
    den = np.linalg.norm(lsb, axis=-2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)


def design_superposition(H, cfg: IstaConfig, spec: SuperpositionSpec | None = None) -> DesignReport:
    """``N x 2K`` precoder for QPSK layers that add up to 16-QAM through the channel."""
    H = _as_channel(H)
    K, N = H.shape
    if N < 2 * K:
        raise DimensionError(f"superposition needs N >= 2K, got N={N}, K={K}")
    spec = spec or SuperpositionSpec(K)
    rep = design_ista(H, cfg, spec.expansion, spec)
    rep.method = "superposition"
    rep.extras["pair_asymmetry"] = [float(v) for v in pair_asymmetry(rep.precoder)]
    return rep
