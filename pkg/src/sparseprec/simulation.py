"""Monte-Carlo link simulation: BER curves and output-power CCDFs.

Random streams are keyed by purpose and channel-draw index (and SNR index
for noise) through ``numpy.random.SeedSequence`` spawn keys, so a draw's
channel, symbols and noise do not depend on batching or evaluation order.
All precoders in one run see the same channels, symbols and noise.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .frontend import IDEAL, KINDS, ONE_BIT, NonlinearitySpec, apply_nonlinearity
from .numerics import MODULUS, SPLIT, DimensionError, RankDeficientError
from .precoders import (
    BatchResult,
    IstaConfig,
    SuperpositionSpec,
    admm_batch,
    design_zf_batch,
    ista_batch,
    l12_batch,
)
from .waveforms import OFDM, SC_FDMA, BlockModSpec, modulate

log = logging.getLogger(__name__)

QPSK = "qpsk"
QAM16 = "16qam-superposition"
MODULATIONS = (QPSK, QAM16)
SYMBOL_RATE = "symbol-rate"
WAVEFORMS = (SYMBOL_RATE, OFDM, SC_FDMA)
PRECODERS = ("none", "zf", "l12", "elastic-net", "superposition")

# mean of |Re s| + |Im s| over the constellation
ABS_SUM_MEAN = {QPSK: 2.0, QAM16: 4.0}

# stream ids for SeedSequence spawn keys
_CHANNEL, _SYMBOLS, _NOISE = 0, 1, 2
_CALIBRATION = 100


@dataclass(frozen=True)
class CcdfConfig:
    start_db: float = 0.0
    stop_db: float = 12.0
    step_db: float = 0.1
    # extra waveforms the CLI sweeps in one run; empty means the experiment's own
    waveforms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "waveforms", tuple(self.waveforms))
        if self.step_db <= 0 or self.stop_db < self.start_db:
            raise ValueError("ccdf grid needs step_db > 0 and stop_db >= start_db")
        for w in self.waveforms:
            if w not in WAVEFORMS:
                raise ValueError(f"unknown waveform {w!r}; choose from {WAVEFORMS}")

    def values_db(self) -> np.ndarray:
        n = int(round((self.stop_db - self.start_db) / self.step_db)) + 1
        return self.start_db + self.step_db * np.arange(n)


@dataclass(frozen=True)
class CalibrationConfig:
    enabled: bool = False
    lam_grid: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 3.0, 10.0)
    snr_db: float | None = None  # None: highest point of the SNR grid
    n_channel_draws: int = 50
    n_symbols_per_draw: int = 1000

    def __post_init__(self):
        if not self.lam_grid or min(self.lam_grid) < 0:
            raise ValueError("lam_grid must be a non-empty list of non-negative values")
        if self.n_channel_draws < 1 or self.n_symbols_per_draw < 1:
            raise ValueError("calibration counts must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    n_antennas: int = 30
    n_users: int = 5
    modulation: str = QPSK
    waveform: str = SYMBOL_RATE
    block_size: int = 128
    nonlinearity: str = ONE_BIT
    precoders: tuple = ("zf",)
    snr_db: tuple = (10.0,)
    n_channel_draws: int = 10
    n_symbols_per_draw: int = 1000
    seed: int = 0
    batch_size: int = 50
    ista: IstaConfig = IstaConfig()
    ccdf: CcdfConfig = CcdfConfig()
    calibration: CalibrationConfig = CalibrationConfig()

    def __post_init__(self):
        object.__setattr__(self, "precoders", tuple(self.precoders))
        object.__setattr__(self, "snr_db", tuple(float(v) for v in self.snr_db))
        K, N = self.n_users, self.n_antennas
        if K < 1 or N < 1:
            raise ValueError("n_users and n_antennas must be >= 1")
        if K > N:
            raise DimensionError(f"n_users K={K} must not exceed n_antennas N={N}")
        if self.modulation not in MODULATIONS:
            raise ValueError(f"modulation must be one of {MODULATIONS}")
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"waveform must be one of {WAVEFORMS}")
        if self.nonlinearity not in KINDS:
            raise ValueError(f"nonlinearity must be one of {KINDS}")
        if not self.precoders:
            raise ValueError("at least one precoder is required")
        for p in self.precoders:
            if p not in PRECODERS:
                raise ValueError(f"unknown precoder {p!r}; choose from {PRECODERS}")
        if "superposition" in self.precoders and self.modulation != QAM16:
            raise ValueError("the superposition precoder needs modulation = 16qam-superposition")
        if self.modulation == QAM16 and N < 2 * K:
            raise DimensionError(f"16-QAM superposition needs N >= 2K, got N={N}, K={K}")
        if not self.snr_db:
            raise ValueError("snr_db must be non-empty")
        if self.n_channel_draws < 1 or self.n_symbols_per_draw < 1 or self.batch_size < 1:
            raise ValueError("draw, symbol and batch counts must be >= 1")
        if self.waveform != SYMBOL_RATE:
            BlockModSpec(self.block_size, self.waveform)
            if self.n_symbols_per_draw % self.block_size:
                raise ValueError("n_symbols_per_draw must be a multiple of block_size for block waveforms")

    @property
    def abs_variant(self) -> str:
        return SPLIT if self.nonlinearity == ONE_BIT else MODULUS

    @property
    def n_layers(self) -> int:
        return 2 * self.n_users if self.modulation == QAM16 else self.n_users

    def design_config(self, snr_db: float, lam: float | None = None) -> IstaConfig:
        kw = {"sigma_eta_sq": snr_to_noise_var(snr_db), "abs_variant": self.abs_variant}
        if lam is not None:
            kw["lam"] = lam
        return replace(self.ista, **kw)


@dataclass
class MetricSeries:
    kind: str  # "BER" or "CCDF"
    label: str
    x: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray
    failures: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.numerator = np.asarray(self.numerator, dtype=np.int64)
        self.denominator = np.asarray(self.denominator, dtype=np.int64)
        if self.failures is None:
            self.failures = np.zeros(len(self.x), dtype=np.int64)
        self.failures = np.asarray(self.failures, dtype=np.int64)

    @property
    def y(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.denominator > 0, self.numerator / np.maximum(self.denominator, 1), np.nan)

    def std_error(self) -> np.ndarray:
        y = self.y
        return np.sqrt(y * (1 - y) / np.maximum(self.denominator, 1))

    def to_csv(self) -> str:
        lines = ["x,y,numerator,denominator"]
        for x, y, n, d in zip(self.x, self.y, self.numerator, self.denominator):
            lines.append(f"{float(x)!r},{float(y)!r},{int(n)},{int(d)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "label": self.label,
            "x": self.x.tolist(),
            "y": [float(v) for v in self.y],
            "numerator": self.numerator.tolist(),
            "denominator": self.denominator.tolist(),
            "failures": self.failures.tolist(),
            "meta": self.meta,
        }


def snr_to_noise_var(snr_db: float) -> float:
    """The SNR axis is ``-10 log10(sigma^2)`` with unit per-antenna transmit power."""
    return 10.0 ** (-snr_db / 10.0)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def draw_channel(K: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) channel entries."""
    if K > N:
        raise DimensionError(f"need K <= N, got K={K}, N={N}")
    return (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) / np.sqrt(2)


def qpsk_symbols(rng: np.random.Generator, shape) -> np.ndarray:
    """Equiprobable symbols from ``{+-1 +-1j}``."""
    bits = rng.integers(0, 2, size=tuple(shape) + (2,))
    return (1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])


def complex_noise(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def transmit(s, P, H, nl: NonlinearitySpec, sigma_eta: float, rng=None, noise=None) -> np.ndarray:
    """Received block ``H Q(P s) + eta`` with ``eta ~ CN(0, sigma_eta^2)``.

    Pass either ``rng`` or pre-drawn unit-variance ``noise``.
    """
    if sigma_eta < 0:
        raise ValueError("sigma_eta must be non-negative")
    s, P, H = (np.asarray(a, dtype=complex) for a in (s, P, H))
    if P.shape[-1] != s.shape[-2] or H.shape[-1] != P.shape[-2]:
        raise ValueError(f"shape mismatch: H {H.shape}, P {P.shape}, s {s.shape}")
    y = H @ apply_nonlinearity(P @ s, nl)
    if sigma_eta > 0:
        if noise is None:
            if rng is None:
                raise ValueError("need rng or noise when sigma_eta > 0")
            noise = complex_noise(rng, y.shape)
        y = y + sigma_eta * noise
    return y


def blind_scale(y, constellation: str = QPSK) -> np.ndarray:
    """Per-user real gain ``T * E[|Re s|+|Im s|] / sum_t (|Re y_t| + |Im y_t|)`` over the last axis."""
    y = np.asarray(y, dtype=complex)
    denom = (np.abs(y.real) + np.abs(y.imag)).sum(axis=-1)
    if np.any(denom == 0):
        raise ValueError("cannot estimate a scale from an all-zero received sequence")
    return y.shape[-1] * ABS_SUM_MEAN[constellation] / denom


def qpsk_bits(s) -> np.ndarray:
    """Gray bits ``(Re < 0, Im < 0)`` along a new last axis."""
    s = np.asarray(s)
    return np.stack([s.real < 0, s.imag < 0], axis=-1).astype(np.uint8)


def _grid_axis(v):
    return np.clip(2 * np.floor(v / 2) + 1, -3, 3)


def qam16_layers(z):
    """Nearest 16-QAM grid point split into (LSB, MSB) QPSK layers, ``point = LSB + 2 MSB``."""
    z = np.asarray(z, dtype=complex)
    g = _grid_axis(z.real) + 1j * _grid_axis(z.imag)
    msb = np.sign(g.real) + 1j * np.sign(g.imag)
    return g - 2 * msb, msb


def detect(z, constellation: str = QPSK) -> np.ndarray:
    """Hard decisions as bits along a new last axis.

    QPSK gives ``(Re, Im)`` sign bits. 16-QAM gives the layer bits
    ``(LSB Re, LSB Im, MSB Re, MSB Im)``.
    """
    if constellation == QPSK:
        return qpsk_bits(z)
    lsb, msb = qam16_layers(z)
    return np.concatenate([qpsk_bits(lsb), qpsk_bits(msb)], axis=-1)


def layer_bits(s_layers) -> np.ndarray:
    """Bits of layer symbols ``(..., 2K, T)`` in the order ``detect`` emits for 16-QAM."""
    s = np.asarray(s_layers)
    return np.concatenate([qpsk_bits(s[..., 0::2, :]), qpsk_bits(s[..., 1::2, :])], axis=-1)


# --- designs over a batch of channels --------------------------------------------


def _design(name: str, H, cfg: ExperimentConfig, dcfg: IstaConfig | None) -> BatchResult:
    B = H.shape[0]
    spec = SuperpositionSpec(cfg.n_users) if cfg.modulation == QAM16 else None
    target = spec.expansion if spec is not None else None
    ok = np.zeros(B, dtype=bool)
    if name == "none":
        P = np.broadcast_to(np.eye(cfg.n_users, dtype=complex), (B, cfg.n_users, cfg.n_users)).copy()
        return BatchResult(P, np.zeros(B, int), ~ok, ok)
    if name == "zf":
        return BatchResult(design_zf_batch(H, target), np.zeros(B, int), ~ok, ok)
    if name == "l12":
        return l12_batch(H, cfg.abs_variant, target)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if name == "superposition":
            return ista_batch(H, dcfg, target, spec)
        if dcfg.solver == "admm":
            return admm_batch(H, dcfg, target)
        return ista_batch(H, dcfg, target)


def _snr_dependent(name: str) -> bool:
    return name in ("elastic-net", "superposition")


def _draw_block(cfg: ExperimentConfig, draws, base: int, n_symbols: int):
    H = np.stack([draw_channel(cfg.n_users, cfg.n_antennas, stream(cfg.seed, base + _CHANNEL, d)) for d in draws])
    s = np.stack([qpsk_symbols(stream(cfg.seed, base + _SYMBOLS, d), (cfg.n_layers, n_symbols)) for d in draws])
    return H, s


def _ber_counts(cfg, names, lams, n_draws, n_symbols, base):
    """Error and bit counts per precoder and SNR point."""
    nl = NonlinearitySpec(cfg.nonlinearity)
    S = len(cfg.snr_db)
    errs = {n: np.zeros(S, dtype=np.int64) for n in names}
    bits = {n: np.zeros(S, dtype=np.int64) for n in names}
    fails = {n: np.zeros(S, dtype=np.int64) for n in names}
    const = QAM16 if cfg.modulation == QAM16 else QPSK
    for start in range(0, n_draws, cfg.batch_size):
        draws = list(range(start, min(start + cfg.batch_size, n_draws)))
        H, s = _draw_block(cfg, draws, base, n_symbols)
        if const == QAM16:
            spec = SuperpositionSpec(cfg.n_users)
            truth = layer_bits(s)
            wanted = np.einsum("kl,blt->bkt", spec.expansion, s)
        else:
            truth = qpsk_bits(s)
        fixed = {}
        for i, snr in enumerate(cfg.snr_db):
            sigma = np.sqrt(snr_to_noise_var(snr))
            noise = np.stack(
                [complex_noise(stream(cfg.seed, base + _NOISE, d, i), (cfg.n_users, n_symbols)) for d in draws]
            )
            for name in names:
                if _snr_dependent(name):
                    res = _design(name, H, cfg, cfg.design_config(snr, lams.get(name)))
                else:
                    if name not in fixed:
                        try:
                            fixed[name] = _design(name, H, cfg, None)
                        except RankDeficientError:
                            fixed[name] = None
                    res = fixed[name]
                if res is None:
                    fails[name][i] += len(draws)
                    continue
                good = ~res.failed
                fails[name][i] += int((~good).sum())
                if not good.any():
                    continue
                y = transmit(s[good], res.precoders[good], H[good], nl, sigma, noise=noise[good])
                if const == QAM16:
                    y = y * blind_scale(y, QAM16)[..., None]
                dec = detect(y, const)
                errs[name][i] += int(np.count_nonzero(dec != truth[good]))
                bits[name][i] += dec.size
        del fixed
    return errs, bits, fails


def run_ber(cfg: ExperimentConfig, lams: dict | None = None) -> dict:
    """BER against ``-10 log10(sigma^2)`` for every precoder in ``cfg.precoders``.

    ``lams`` maps a regularized precoder name to the lam it should use
    (default ``cfg.ista.lam``). One design per channel draw, redone per SNR
    point for the noise-aware designs. For 16-QAM each user's block is
    rescaled blindly before detection.
    """
    lams = dict(lams or {})
    names = [n for n in cfg.precoders if n != "none"]
    if len(names) != len(cfg.precoders):
        raise ValueError("the unprecoded baseline has no BER definition for K users")
    errs, bits, fails = _ber_counts(cfg, names, lams, cfg.n_channel_draws, cfg.n_symbols_per_draw, 0)
    out = {}
    for name in names:
        meta = {"precoder": name}
        if _snr_dependent(name):
            meta["lam"] = float(lams.get(name, cfg.ista.lam))
        out[name] = MetricSeries("BER", name, cfg.snr_db, errs[name], bits[name], fails[name], meta)
        if fails[name].any():
            log.warning("%s: %d design failures excluded from BER counts", name, int(fails[name].sum()))
    return out


def calibrate_lambda(cfg: ExperimentConfig, precoder: str = "elastic-net", lam_grid=None, snr_db=None):
    """Pick the BER-minimizing lam on a log grid at one SNR.

    Uses channel, symbol and noise streams disjoint from ``run_ber``'s, so the
    evaluation run does not reuse the calibration draws. Ties go to the
    smallest lam. Returns ``(best_lam, [(lam, errors, bits), ...])``.
    """
    cal = cfg.calibration
    grid = tuple(lam_grid if lam_grid is not None else cal.lam_grid)
    target = snr_db if snr_db is not None else (cal.snr_db if cal.snr_db is not None else max(cfg.snr_db))
    sub = replace(cfg, snr_db=(target,), precoders=(precoder,))
    table = []
    for lam in grid:
        e, b, _ = _ber_counts(sub, [precoder], {precoder: lam}, cal.n_channel_draws, cal.n_symbols_per_draw, _CALIBRATION)
        table.append((float(lam), int(e[precoder][0]), int(b[precoder][0])))
    rates = [e / b if b else np.inf for _, e, b in table]
    best = table[int(np.argmin(rates))][0]
    return best, table


def lam_from_crossing(snr_db, ber_l2, ber_l1, n_users: int, n_antennas: int):
    """``K sigma_cross^2 / N`` at the SNR where the two BER curves cross.

    Linear interpolation of ``log10(BER_l2 / BER_l1)`` between grid points;
    returns None when the curves do not cross on the grid.
    """
    x = np.asarray(snr_db, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.log10(np.asarray(ber_l2, float)) - np.log10(np.asarray(ber_l1, float))
    for i in range(len(x) - 1):
        if np.isfinite(d[i]) and np.isfinite(d[i + 1]) and d[i] <= 0 < d[i + 1]:
            t = -d[i] / (d[i + 1] - d[i])
            cross = x[i] + t * (x[i + 1] - x[i])
            return n_users * snr_to_noise_var(cross) / n_antennas
    return None


# --- CCDF ---------------------------------------------------------------------------


def _normalized_powers(x, P, cfg: ExperimentConfig, nl: NonlinearitySpec):
    """Instantaneous powers of the antenna signals, each scaled to unit mean power."""
    if cfg.waveform != SYMBOL_RATE:
        spec = BlockModSpec(cfg.block_size, cfg.waveform)
        B, A, T = x.shape
        x = modulate(x.reshape(B, A, T // cfg.block_size, cfg.block_size), spec).reshape(B, A, -1)
    out = apply_nonlinearity(x, nl)
    power = np.abs(out) ** 2
    if nl.kind == IDEAL:
        # each layer symbol has power 2
        avg = 2.0 * np.sum(np.abs(P) ** 2, axis=-1)
    else:
        avg = np.ones(power.shape[:-1])
    live = avg > 0
    return (power / np.where(live, avg, 1.0)[..., None])[live]


def empirical_ccdf(powers, eta) -> np.ndarray:
    """Fraction of ``powers`` strictly above each ``eta``, ignoring relative rounding of 1e-12."""
    p = np.sort(np.ravel(powers))
    thr = np.asarray(eta, float) * (1 + 1e-12)
    return (p.size - np.searchsorted(p, thr, side="right")) / max(p.size, 1)


def run_ccdf(cfg: ExperimentConfig, lams: dict | None = None, eta_db=None) -> dict:
    """CCDF of instantaneous per-antenna output power, pooled over antennas, samples and draws.

    ``x`` is the threshold in dB relative to the average power. Noise-aware
    designs use the first SNR point of the grid.
    """
    lams = dict(lams or {})
    nl = NonlinearitySpec(cfg.nonlinearity)
    eta_db = np.asarray(cfg.ccdf.values_db() if eta_db is None else eta_db, float)
    thr = 10.0 ** (eta_db / 10.0) * (1 + 1e-12)
    counts = {n: np.zeros(len(eta_db), dtype=np.int64) for n in cfg.precoders}
    totals = dict.fromkeys(cfg.precoders, 0)
    fails = dict.fromkeys(cfg.precoders, 0)
    snr = cfg.snr_db[0]
    for start in range(0, cfg.n_channel_draws, cfg.batch_size):
        draws = list(range(start, min(start + cfg.batch_size, cfg.n_channel_draws)))
        H, s = _draw_block(cfg, draws, 0, cfg.n_symbols_per_draw)
        for name in cfg.precoders:
            dcfg = cfg.design_config(snr, lams.get(name)) if _snr_dependent(name) else None
            res = _design(name, H, cfg, dcfg)
            good = ~res.failed
            fails[name] += int((~good).sum())
            P = res.precoders[good]
            p = np.sort(_normalized_powers(P @ s[good], P, cfg, nl).ravel())
            counts[name] += p.size - np.searchsorted(p, thr, side="right")
            totals[name] += p.size
    out = {}
    for name in cfg.precoders:
        meta = {"precoder": name, "waveform": cfg.waveform, "nonlinearity": cfg.nonlinearity}
        if _snr_dependent(name):
            meta["lam"] = float(lams.get(name, cfg.ista.lam))
        n = len(eta_db)
        out[name] = MetricSeries(
            "CCDF", name, eta_db, counts[name], np.full(n, totals[name]), np.full(n, fails[name]), meta
        )
    return out


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
