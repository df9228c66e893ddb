"""Modulated waveform synthesis and AWGN channel.

Eleven schemes are generated from closed-form expressions with a sinusoidal
message and rectangular digital pulses. ``realize`` is the unit every batch
is built from: synthesize, scale to unit power, then add noise.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from amc_config import MFSK_LEVELS, SynthConfig
from amc_dsp import analytic
from amc_errors import ConfigurationError, DegenerateSignalError, ShapeError

logger = logging.getLogger(__name__)


class SchemeLabel(str, Enum):
    """Modulation scheme labels in canonical confusion-matrix order."""

    AM = "AM"
    DSB = "DSB"
    LSB = "LSB"
    USB = "USB"
    FM = "FM"
    ASK2 = "2ASK"
    ASK4 = "4ASK"
    FSK2 = "2FSK"
    FSK4 = "4FSK"
    PSK2 = "2PSK"
    PSK4 = "4PSK"
    UNKNOWN = "UNKNOWN"

    @classmethod
    def parse(cls, text: str) -> "SchemeLabel":
        try:
            return cls(text.strip().upper())
        except ValueError:
            valid = ", ".join(s.value for s in SCHEMES)
            raise ConfigurationError("scheme in the 11-label set", f"got {text!r}; valid: {valid}")

    def __str__(self) -> str:
        return self.value


SCHEMES = tuple(s for s in SchemeLabel if s is not SchemeLabel.UNKNOWN)

# scheme -> number of symbol levels
DIGITAL_LEVELS = {
    SchemeLabel.ASK2: 2,
    SchemeLabel.ASK4: 4,
    SchemeLabel.FSK2: 2,
    SchemeLabel.FSK4: MFSK_LEVELS,
    SchemeLabel.PSK2: 2,
    SchemeLabel.PSK4: 4,
}


@dataclass(frozen=True, eq=False)
class Waveform:
    """A labeled, sampled real signal.

    ``snr_db`` is +inf for noiseless waveforms. ``seed`` is the realization
    seed, or None when the waveform did not come from the generator.
    """

    samples: np.ndarray
    fs: float
    fc: float
    scheme: SchemeLabel
    snr_db: float = math.inf
    seed: Optional[int] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ShapeError(f"waveform samples must be 1-D, got shape {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def power(self) -> float:
        return float(np.mean(self.samples ** 2)) if self.num_samples else 0.0


def _symbol_stream(
    levels: int, cfg: SynthConfig, symbols: Optional[Sequence[int]]
) -> np.ndarray:
    """Per-sample symbol indices with rectangular pulses."""
    sps = cfg.samples_per_symbol
    count = math.ceil(cfg.num_samples / sps)
    if symbols is None:
        rng = np.random.default_rng([cfg.rng_seed, 0])
        drawn = rng.integers(0, levels, size=count)
    else:
        drawn = np.asarray(symbols, dtype=np.int64)
        if drawn.ndim != 1 or drawn.shape[0] < count:
            raise ShapeError(f"need at least {count} symbols, got {drawn.size}")
        if drawn.min() < 0 or drawn.max() >= levels:
            raise ShapeError(f"symbols must lie in [0, {levels - 1}]")
        drawn = drawn[:count]
    return np.repeat(drawn, sps)[: cfg.num_samples]


def synthesize(
    scheme: SchemeLabel, cfg: SynthConfig, symbols: Optional[Sequence[int]] = None
) -> Waveform:
    """Generate a noiseless waveform of ``cfg.num_samples`` samples.

    ``symbols`` overrides the seeded symbol draw for digital schemes.
    """
    cfg.check()
    scheme = SchemeLabel(scheme)
    if scheme is SchemeLabel.UNKNOWN:
        raise ConfigurationError("scheme in the 11-label set", "UNKNOWN cannot be synthesized")

    t = np.arange(cfg.num_samples) / cfg.sample_rate
    wc = 2 * np.pi * cfg.carrier
    wm = 2 * np.pi * cfg.message_freq
    message = np.cos(wm * t)

    if scheme is SchemeLabel.AM:
        x = (1.0 + cfg.am_depth * message) * np.cos(wc * t)
    elif scheme is SchemeLabel.DSB:
        x = message * np.cos(wc * t)
    elif scheme in (SchemeLabel.LSB, SchemeLabel.USB):
        quadrature = np.imag(analytic(message)[0])
        sign = 1.0 if scheme is SchemeLabel.LSB else -1.0
        x = message * np.cos(wc * t) + sign * quadrature * np.sin(wc * t)
    elif scheme is SchemeLabel.FM:
        x = np.cos(wc * t + cfg.fm_index * np.sin(wm * t))
    else:
        levels = DIGITAL_LEVELS[scheme]
        sym = _symbol_stream(levels, cfg, symbols)
        if scheme in (SchemeLabel.ASK2, SchemeLabel.ASK4):
            amplitude = np.linspace(0.0, 1.0, levels)[sym]
            x = amplitude * np.cos(wc * t)
        elif scheme in (SchemeLabel.FSK2, SchemeLabel.FSK4):
            offsets = (np.arange(levels) - (levels - 1) / 2) * cfg.fsk_deviation
            freq = cfg.carrier + offsets[sym]
            # continuous phase across symbol boundaries
            phase = 2 * np.pi * np.concatenate(([0.0], np.cumsum(freq[:-1]))) / cfg.sample_rate
            x = np.cos(phase)
        elif scheme is SchemeLabel.PSK2:
            x = np.cos(wc * t + np.pi * sym)
        else:
            x = np.cos(wc * t + (2 * sym + 1) * np.pi / 4)

    return Waveform(x, cfg.sample_rate, cfg.carrier, scheme, math.inf, cfg.rng_seed)


def normalize_power(w: Waveform) -> Waveform:
    """Scale a waveform to unit mean power."""
    power = w.power
    if not power > 0 or not math.isfinite(power):
        raise DegenerateSignalError(f"{w.scheme} waveform (seed {w.seed}) has zero power")
    return replace(w, samples=w.samples / math.sqrt(power))


def add_awgn(w: Waveform, snr_db: float, seed: int) -> Waveform:
    """Add zero-mean Gaussian noise at ``snr_db`` relative to the waveform power."""
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ConfigurationError("snr_db finite or +infinity", f"snr_db={snr_db}")
    if seed < 0:
        raise ConfigurationError("seed >= 0", f"seed={seed}")
    sig_power = w.power
    if not sig_power > 0:
        raise DegenerateSignalError(f"cannot add noise to a zero-power {w.scheme} waveform")
    if snr_db == math.inf:
        return replace(w, samples=w.samples.copy(), snr_db=math.inf)

    noise_var = sig_power / (10 ** (snr_db / 10))
    rng = np.random.default_rng([seed, 1])
    noise = rng.normal(0.0, math.sqrt(noise_var), size=w.num_samples)
    return replace(w, samples=w.samples + noise, snr_db=float(snr_db))


def measure_snr(clean: Waveform, noisy: Waveform) -> float:
    """SNR in dB of ``noisy`` against its noiseless source."""
    if clean.num_samples != noisy.num_samples:
        raise ShapeError(f"length mismatch: {clean.num_samples} vs {noisy.num_samples}")
    if clean.fs != noisy.fs:
        raise ShapeError(f"sample rate mismatch: {clean.fs} vs {noisy.fs}")
    noise = noisy.samples - clean.samples
    noise_power = float(np.mean(noise ** 2))
    if noise_power == 0.0:
        return math.inf
    return 10 * math.log10(clean.power / noise_power)


def derive_seeds(base: int, count: int) -> List[int]:
    return [base + index for index in range(count)]


def realize(scheme: SchemeLabel, cfg: SynthConfig, snr_db: float, seed: int) -> Waveform:
    """One unit-power realization of ``scheme`` at ``snr_db``."""
    clean = synthesize(scheme, cfg.with_updates(rng_seed=seed))
    return add_awgn(normalize_power(clean), snr_db, seed)


def realize_batch(
    schemes: Iterable[SchemeLabel],
    snr_list: Iterable[float],
    count: int,
    cfg: SynthConfig,
    base_seed: Optional[int] = None,
    progress: bool = True,
) -> List[Waveform]:
    """Realize ``count`` waveforms per (scheme, snr) with consecutive seeds.

    Seeds run ``base_seed, base_seed + 1, ...`` over the whole batch in
    scheme-major order, so no two realizations share a seed.
    """
    schemes = list(schemes)
    snr_list = list(snr_list)
    base = cfg.rng_seed if base_seed is None else base_seed
    seeds = derive_seeds(base, len(schemes) * len(snr_list) * count)
    jobs = [(scheme, snr) for scheme in schemes for snr in snr_list for _ in range(count)]

    waveforms = []
    for (scheme, snr), seed in tqdm(
        zip(jobs, seeds), total=len(jobs), desc="Synthesizing", disable=not progress
    ):
        waveforms.append(realize(scheme, cfg, snr, seed))
    logger.info(f"Realized {len(waveforms)} waveforms ({len(schemes)} schemes x {len(snr_list)} SNRs x {count})")
    return waveforms
