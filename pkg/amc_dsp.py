"""Spectrum, analytic signal and instantaneous series.

All statistics downstream operate on the edge-trimmed window of the
instantaneous series; the spectrum is taken over the full waveform.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from scipy.signal import hilbert

from amc_errors import ConfigurationError, DegenerateSignalError, EmptyMaskError, ShapeError

if TYPE_CHECKING:
    from amc_synthesis import Waveform

logger = logging.getLogger(__name__)

DEFAULT_EDGE_TRIM = 32
DEFAULT_THRESHOLD = 1.0


@dataclass(frozen=True, eq=False)
class Spectrum:
    bins: np.ndarray
    fs: float
    n: int
    fcn: int


@dataclass(frozen=True, eq=False)
class InstantaneousSeries:
    """Per-sample amplitude, phase and frequency over the trimmed window.

    ``phi`` is the unwrapped instantaneous phase. ``phi_nl_raw`` is the
    nonlinear phase wrapped into [-pi/2, 3pi/2) before mean removal;
    ``phi_nl`` is the same series with its mean removed. ``mask`` marks
    the samples with ``an > threshold``.
    """

    a: np.ndarray
    an: np.ndarray
    acn: np.ndarray
    ma: float
    phi: np.ndarray
    phi_nl_raw: np.ndarray
    phi_nl: np.ndarray
    f: np.ndarray
    fn: np.ndarray
    threshold: float
    mask: np.ndarray
    fs: float
    fc: float
    edge_trim: int
    padded: bool = False

    @property
    def nc(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def length(self) -> int:
        return self.a.shape[0]


def carrier_bin(fc: float, fs: float, n: int) -> int:
    return int(round(fc * n / fs - 1))


def dft(w: "Waveform") -> Spectrum:
    """Unnormalized forward DFT of the waveform samples."""
    x = w.samples
    n = x.shape[0]
    if n < 2:
        raise ShapeError(f"DFT needs at least 2 samples, got {n}")
    fcn = carrier_bin(w.fc, w.fs, n)
    if not 0 <= fcn < n / 2 - 1:
        raise ShapeError(f"carrier bin {fcn} outside [0, {n / 2 - 1}) for N={n}")
    return Spectrum(np.fft.fft(x), w.fs, n, fcn)


def analytic(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Analytic signal of a real array via ``scipy.signal.hilbert``.

    Odd-length input is zero-padded by one sample and the result truncated;
    the second return value reports whether that happened.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ShapeError(f"analytic signal needs at least 2 samples, got {n}")
    padded = n % 2 == 1
    if padded:
        x = np.concatenate((x, [0.0]))
    z = hilbert(x)
    return z[:n], padded


def analytic_signal(w: "Waveform") -> np.ndarray:
    z, padded = analytic(w.samples)
    if padded:
        logger.debug(f"Zero-padded odd-length waveform (N={w.num_samples}, seed {w.seed})")
    return z


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Wrap phase into [-pi/2, 3pi/2)."""
    return np.mod(phi + np.pi / 2, 2 * np.pi) - np.pi / 2


def instantaneous(
    w: "Waveform",
    fc: Optional[float] = None,
    At: float = DEFAULT_THRESHOLD,
    edge_trim: int = DEFAULT_EDGE_TRIM,
) -> InstantaneousSeries:
    """Instantaneous amplitude, nonlinear phase and frequency of ``w``."""
    fc = w.fc if fc is None else fc
    if not math.isclose(fc, w.fc, rel_tol=1e-12):
        raise ConfigurationError("fc equals the waveform carrier", f"fc={fc}, waveform fc={w.fc}")
    n = w.num_samples
    if n - 2 * edge_trim < 2:
        raise ShapeError(f"N={n} leaves fewer than 2 samples after trimming {edge_trim} per end")

    z, padded = analytic(w.samples)
    if padded:
        logger.debug(f"Zero-padded odd-length waveform (N={n}, seed {w.seed})")

    a_full = np.abs(z)
    phi = np.unwrap(np.angle(z))
    linear = 2 * np.pi * fc * np.arange(n) / w.fs
    phi_nl_full = wrap_phase(phi - linear)
    # central difference (phi[n+1] - phi[n-1]) * fs / (4 pi)
    f_full = np.gradient(phi) * w.fs / (2 * np.pi)

    window = slice(edge_trim, n - edge_trim)
    a = a_full[window]
    ma = float(np.mean(a))
    if not ma > 0:
        raise DegenerateSignalError(f"zero mean amplitude for {w.scheme} waveform (seed {w.seed})")
    an = a / ma
    acn = an - 1.0
    phi_nl_raw = phi_nl_full[window]
    phi_nl = phi_nl_raw - np.mean(phi_nl_raw)
    f = f_full[window]
    fn = (f - np.mean(f)) / w.fs

    mask = an > At
    if not mask.any():
        raise EmptyMaskError(At)

    return InstantaneousSeries(
        a=a,
        an=an,
        acn=acn,
        ma=ma,
        phi=phi[window],
        phi_nl_raw=phi_nl_raw,
        phi_nl=phi_nl,
        f=f,
        fn=fn,
        threshold=At,
        mask=mask,
        fs=w.fs,
        fc=fc,
        edge_trim=edge_trim,
        padded=padded,
    )
