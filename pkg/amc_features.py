"""The nine spectral features used for modulation classification.

Features, in canonical order:

    gamma_max   peak PSD of the centered normalized amplitude
    sigma_dp    std of the direct nonlinear phase (masked)
    sigma_ap    std of the absolute nonlinear phase (masked)
    p           spectrum symmetry around the carrier
    sigma_aa    std of the absolute centered amplitude (all samples)
    sigma_af    std of the absolute centered frequency (masked)
    sigma_a     std of the centered amplitude (masked)
    mu42a       kurtosis of the centered amplitude
    mu42f       kurtosis of the centered frequency
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from amc_config import FeatureConfig
from amc_dsp import InstantaneousSeries, Spectrum, dft, instantaneous
from amc_errors import (
    AmcError,
    DegenerateSignalError,
    FeatureExtractionError,
    InsufficientSamplesError,
    NonFiniteInputError,
    NumericConsistencyError,
    ShapeError,
    ZeroSpectrumError,
)
from amc_synthesis import Waveform

logger = logging.getLogger(__name__)

FEATURE_NAMES = (
    "gamma_max",
    "sigma_dp",
    "sigma_ap",
    "p",
    "sigma_aa",
    "sigma_af",
    "sigma_a",
    "mu42a",
    "mu42f",
)
NUM_FEATURES = len(FEATURE_NAMES)

RADICAND_TOLERANCE = 1e-12
KURTOSIS_GUARD = 1e-12
MIN_PSD_LENGTH = 64


@dataclass(frozen=True)
class FeatureVector:
    gamma_max: float
    sigma_dp: float
    sigma_ap: float
    p_symmetry: float
    sigma_aa: float
    sigma_af: float
    sigma_a: float
    mu42_a: float
    mu42_f: float
    # names of kurtosis features that hit the degenerate guard
    degenerate: Tuple[str, ...] = ()

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise NonFiniteInputError(f"non-finite feature vector: {self.as_array().tolist()}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.gamma_max,
                self.sigma_dp,
                self.sigma_ap,
                self.p_symmetry,
                self.sigma_aa,
                self.sigma_af,
                self.sigma_a,
                self.mu42_a,
                self.mu42_f,
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (NUM_FEATURES,):
            raise ShapeError(f"expected {NUM_FEATURES} features, got shape {values.shape}")
        return cls(*(float(v) for v in values))


def _deviation(values: np.ndarray, second: np.ndarray, name: str) -> float:
    """sqrt(mean(values^2) - mean(second)^2) with a rounding guard."""
    radicand = float(np.mean(values ** 2) - np.mean(second) ** 2)
    if radicand < -RADICAND_TOLERANCE:
        raise NumericConsistencyError(f"{name}: negative radicand {radicand:.3e}")
    return math.sqrt(max(radicand, 0.0))


def _masked(inst: InstantaneousSeries, series: np.ndarray, name: str) -> np.ndarray:
    if inst.nc <= 1:
        raise InsufficientSamplesError(
            f"{name} needs Nc > 1 samples above At={inst.threshold}, got {inst.nc}"
        )
    return series[inst.mask]


def gamma_max(inst: InstantaneousSeries) -> float:
    length = inst.length
    if length < MIN_PSD_LENGTH:
        raise ShapeError(f"gamma_max needs at least {MIN_PSD_LENGTH} trimmed samples, got {length}")
    return float(np.max(np.abs(np.fft.fft(inst.acn)) ** 2) / length)


def sigma_dp(inst: InstantaneousSeries) -> float:
    phi = _masked(inst, inst.phi_nl, "sigma_dp")
    return _deviation(phi, phi, "sigma_dp")


def sigma_ap(inst: InstantaneousSeries) -> float:
    phi = _masked(inst, inst.phi_nl, "sigma_ap")
    return _deviation(phi, np.abs(phi), "sigma_ap")


def sideband_powers(spec: Spectrum) -> Tuple[float, float]:
    """Lower and upper sideband power around the carrier bin."""
    fcn = spec.fcn
    if fcn < 1 or spec.n < 2 * (fcn + 1):
        raise ShapeError(f"carrier bin {fcn} leaves no room for sidebands with N={spec.n}")
    power = np.abs(spec.bins) ** 2
    lower = float(np.sum(power[1 : fcn + 1]))
    upper = float(np.sum(power[fcn + 2 : 2 * fcn + 2]))
    return lower, upper


def spectrum_symmetry(spec: Spectrum) -> float:
    lower, upper = sideband_powers(spec)
    total = lower + upper
    if total < 1e-30:
        raise ZeroSpectrumError(f"sideband power {total:.3e} (Pl + Pu) is zero")
    return (lower - upper) / total


def sigma_aa(inst: InstantaneousSeries) -> float:
    return _deviation(inst.acn, np.abs(inst.acn), "sigma_aa")


def sigma_af(inst: InstantaneousSeries) -> float:
    fn = _masked(inst, inst.fn, "sigma_af")
    return _deviation(fn, np.abs(fn), "sigma_af")


def sigma_a(inst: InstantaneousSeries) -> float:
    acn = _masked(inst, inst.acn, "sigma_a")
    return _deviation(acn, acn, "sigma_a")


def kurtosis(x: np.ndarray) -> Tuple[float, bool]:
    """Fourth over squared second moment; (0, True) when the variance vanishes."""
    second = float(np.mean(x ** 2))
    if second < KURTOSIS_GUARD:
        return 0.0, True
    return float(np.mean(x ** 4)) / second ** 2, False


def mu42_amp(inst: InstantaneousSeries) -> float:
    return kurtosis(inst.acn)[0]


def mu42_freq(inst: InstantaneousSeries) -> float:
    return kurtosis(inst.fn)[0]


def _run(name: str, op: Callable, arg):
    try:
        return op(arg)
    except AmcError as e:
        raise FeatureExtractionError(name, e) from e


def extract_all(w: Waveform, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Run the dsp pipeline and compute all nine features in canonical order."""
    spec = dft(w)
    inst = instantaneous(w, w.fc, cfg.amplitude_threshold, cfg.edge_trim)

    mu42a, amp_degenerate = _run("mu42a", kurtosis, inst.acn)
    mu42f, freq_degenerate = _run("mu42f", kurtosis, inst.fn)
    degenerate = tuple(
        name for name, flag in (("mu42a", amp_degenerate), ("mu42f", freq_degenerate)) if flag
    )
    if degenerate:
        logger.debug(f"Degenerate kurtosis {degenerate} for {w.scheme} (seed {w.seed})")

    return FeatureVector(
        gamma_max=_run("gamma_max", gamma_max, inst),
        sigma_dp=_run("sigma_dp", sigma_dp, inst),
        sigma_ap=_run("sigma_ap", sigma_ap, inst),
        p_symmetry=_run("p", spectrum_symmetry, spec),
        sigma_aa=_run("sigma_aa", sigma_aa, inst),
        sigma_af=_run("sigma_af", sigma_af, inst),
        sigma_a=_run("sigma_a", sigma_a, inst),
        mu42_a=mu42a,
        mu42_f=mu42f,
        degenerate=degenerate,
    )


def extract_batch(
    waveforms: Iterable[Waveform], cfg: FeatureConfig = FeatureConfig(), progress: bool = True
) -> List[Tuple[Waveform, FeatureVector]]:
    """Extract features for every waveform, skipping zero-power ones."""
    waveforms = list(waveforms)
    results = []
    skipped = 0
    for w in tqdm(waveforms, desc="Extracting features", disable=not progress):
        if not w.power > 0:
            logger.warning(f"Skipping zero-power {w.scheme} waveform (seed {w.seed})")
            skipped += 1
            continue
        try:
            results.append((w, extract_all(w, cfg)))
        except DegenerateSignalError as e:
            logger.warning(f"Skipping {w.scheme} waveform (seed {w.seed}): {str(e)}")
            skipped += 1
    logger.info(f"Extracted {len(results)} feature vectors ({skipped} skipped)")
    return results
