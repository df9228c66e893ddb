"""Configuration models and config-file loading.

Settings are layered: model defaults, then a ``key=value`` config file,
then explicit command-line overrides. The file format is the one
python-dotenv reads, so a config file can double as a ``.env``.
"""

import logging
import math
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from amc_errors import ConfigurationError

logger = logging.getLogger(__name__)

MFSK_LEVELS = 4


class MissAction(str, Enum):
    STRICT_MALICIOUS = "STRICT_MALICIOUS"
    CLASSIFY_FALLBACK = "CLASSIFY_FALLBACK"


def _split_floats(value: Any) -> Any:
    if isinstance(value, str):
        parts = [p.strip() for p in value.replace(";", ",").split(",")]
        return [float(p) for p in parts if p]
    return value


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    def with_updates(self, **changes):
        """Return a validated copy with the given fields replaced."""
        data = self.model_dump()
        data.update({k: v for k, v in changes.items() if v is not None})
        return type(self)(**data)


class SynthConfig(_Config):
    """Signal synthesis parameters (Hz, samples, dimensionless indices)."""

    sample_rate: float = 100_000.0
    carrier: float = 25_000.0
    message_freq: float = 1_000.0
    num_samples: int = 4096
    am_depth: float = 0.5
    fm_index: float = 5.0
    symbol_rate: float = 1_000.0
    fsk_deviation: float = 2_000.0
    rng_seed: int = 0

    @model_validator(mode="after")
    def _validate(self):
        self.check()
        return self

    def check(self) -> None:
        fs, fc, fm = self.sample_rate, self.carrier, self.message_freq
        if not fs > 0:
            raise ConfigurationError("fs > 0", f"sample_rate={fs}")
        if not 0 < fc < fs / 2:
            raise ConfigurationError("0 < fc < fs/2", f"carrier={fc}, sample_rate={fs}")
        if not 0 < fm < fc:
            raise ConfigurationError("0 < fm < fc", f"message_freq={fm}, carrier={fc}")
        if self.num_samples < 64:
            raise ConfigurationError("N >= 64", f"num_samples={self.num_samples}")
        # Ka = 0 is accepted: it is the pure-carrier limit of the AM formula.
        if not 0 <= self.am_depth <= 1:
            raise ConfigurationError("0 <= Ka <= 1", f"am_depth={self.am_depth}")
        if not self.fm_index > 0:
            raise ConfigurationError("kf > 0", f"fm_index={self.fm_index}")
        if not self.symbol_rate > 0:
            raise ConfigurationError("symbol_rate > 0", f"symbol_rate={self.symbol_rate}")
        ratio = fs / self.symbol_rate
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ConfigurationError(
                "symbol_rate divides fs evenly", f"fs/symbol_rate={ratio}"
            )
        if not self.fsk_deviation > 0:
            raise ConfigurationError("fsk_deviation > 0", f"fsk_deviation={self.fsk_deviation}")
        span = self.fsk_deviation * (MFSK_LEVELS - 1) / 2
        if not fc + span < fs / 2:
            raise ConfigurationError(
                "fc + fsk_deviation*(levels-1)/2 < fs/2", f"highest tone {fc + span} Hz"
            )
        if not fc - span > 0:
            raise ConfigurationError(
                "fc - fsk_deviation*(levels-1)/2 > 0", f"lowest tone {fc - span} Hz"
            )
        if self.rng_seed < 0:
            raise ConfigurationError("rng_seed >= 0", f"rng_seed={self.rng_seed}")

    @property
    def samples_per_symbol(self) -> int:
        return int(round(self.sample_rate / self.symbol_rate))


class FeatureConfig(_Config):
    edge_trim: int = 32
    amplitude_threshold: float = 1.0

    @model_validator(mode="after")
    def _validate(self):
        if self.edge_trim < 0:
            raise ConfigurationError("edge_trim >= 0", f"edge_trim={self.edge_trim}")
        if not math.isfinite(self.amplitude_threshold) or self.amplitude_threshold < 0:
            raise ConfigurationError(
                "amplitude_threshold finite and >= 0", f"At={self.amplitude_threshold}"
            )
        return self


class SvmConfig(_Config):
    c: float = 1.0
    tol: float = 1e-3
    kernel_degree: int = 1
    kernel_offset: float = 0.0
    max_passes: int = 10_000

    @model_validator(mode="after")
    def _validate(self):
        if not self.c > 0:
            raise ConfigurationError("C > 0", f"C={self.c}")
        if not self.tol > 0:
            raise ConfigurationError("tol > 0", f"tol={self.tol}")
        if self.kernel_degree < 1:
            raise ConfigurationError("kernel degree d >= 1", f"d={self.kernel_degree}")
        if self.kernel_offset < 0:
            raise ConfigurationError("kernel offset c0 >= 0", f"c0={self.kernel_offset}")
        if self.max_passes < 1:
            raise ConfigurationError("max_passes >= 1", f"max_passes={self.max_passes}")
        return self


class StoreConfig(_Config):
    tolerance_scale: float = 0.25
    tolerances: Optional[List[float]] = None
    miss_action: MissAction = MissAction.CLASSIFY_FALLBACK
    insert_on_classify: bool = False

    _split = field_validator("tolerances", mode="before")(_split_floats)

    @model_validator(mode="after")
    def _validate(self):
        if not self.tolerance_scale > 0:
            raise ConfigurationError("tolerance_scale > 0", f"tolerance_scale={self.tolerance_scale}")
        if self.tolerances is not None and any(not (t > 0) for t in self.tolerances):
            raise ConfigurationError("all tolerances > 0", f"tolerances={self.tolerances}")
        return self


class ExperimentConfig(_Config):
    train_count: int = 100
    test_count: int = 100
    snr_list: List[float] = [5.0, 15.0, 25.0]

    _split = field_validator("snr_list", mode="before")(_split_floats)

    @model_validator(mode="after")
    def _validate(self):
        if self.train_count < 2:
            raise ConfigurationError("train_count >= 2", f"train_count={self.train_count}")
        if self.test_count < 1:
            raise ConfigurationError("test_count >= 1", f"test_count={self.test_count}")
        return self


class Settings(_Config):
    synth: SynthConfig = SynthConfig()
    features: FeatureConfig = FeatureConfig()
    svm: SvmConfig = SvmConfig()
    store: StoreConfig = StoreConfig()
    experiment: ExperimentConfig = ExperimentConfig()


# flat config-file key -> (section, field)
CONFIG_KEYS: Dict[str, tuple] = {
    "sample_rate": ("synth", "sample_rate"),
    "carrier": ("synth", "carrier"),
    "message_freq": ("synth", "message_freq"),
    "num_samples": ("synth", "num_samples"),
    "am_depth": ("synth", "am_depth"),
    "fm_index": ("synth", "fm_index"),
    "symbol_rate": ("synth", "symbol_rate"),
    "fsk_deviation": ("synth", "fsk_deviation"),
    "rng_seed": ("synth", "rng_seed"),
    "edge_trim": ("features", "edge_trim"),
    "amplitude_threshold": ("features", "amplitude_threshold"),
    "svm_c": ("svm", "c"),
    "svm_tol": ("svm", "tol"),
    "kernel_degree": ("svm", "kernel_degree"),
    "kernel_offset": ("svm", "kernel_offset"),
    "max_passes": ("svm", "max_passes"),
    "tolerance_scale": ("store", "tolerance_scale"),
    "tolerances": ("store", "tolerances"),
    "miss_action": ("store", "miss_action"),
    "insert_on_classify": ("store", "insert_on_classify"),
    "train_count": ("experiment", "train_count"),
    "test_count": ("experiment", "test_count"),
    "snr_list": ("experiment", "snr_list"),
}


def read_config_file(path: str) -> Dict[str, str]:
    """Parse a ``key=value`` config file, rejecting unknown keys."""
    values = dotenv_values(path)
    unknown = sorted(k for k in values if k not in CONFIG_KEYS)
    if unknown:
        raise ConfigurationError("known config keys only", f"unknown: {', '.join(unknown)}")
    logger.info(f"Loaded {len(values)} config values from {path}")
    return {k: v for k, v in values.items() if v is not None}


def load_settings(
    config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> Settings:
    """Build validated settings from defaults, a config file and overrides.

    ``overrides`` uses the flat config-file keys; ``None`` values are ignored.
    """
    flat: Dict[str, Any] = {}
    if config_path:
        flat.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigurationError("known config keys only", f"unknown: {key}")
        flat[key] = value

    sections: Dict[str, Dict[str, Any]] = {}
    for key, value in flat.items():
        section, field = CONFIG_KEYS[key]
        sections.setdefault(section, {})[field] = value
    return Settings(**{name: data for name, data in sections.items()})
