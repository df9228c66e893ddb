"""Artifact files: waveform batches, feature CSV/ARFF and run manifests."""

import glob
import logging
import math
import os
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.io import arff

from amc_errors import FormatError
from amc_features import FEATURE_NAMES, FeatureVector
from amc_svm import LabeledDataset
from amc_synthesis import SCHEMES, SchemeLabel, Waveform

logger = logging.getLogger(__name__)

WAVEFORM_VERSION = "AMCWAV1"
WAVEFORM_SUFFIX = ".amcwav"
CSV_COLUMNS = list(FEATURE_NAMES) + ["label", "snr_db", "seed"]
MANIFEST_NAME = "manifest.json"


# Waveform batch files

def waveform_filename(scheme: SchemeLabel, snr_db: float) -> str:
    tag = "clean" if math.isinf(snr_db) else f"{snr_db:g}dB"
    return f"{SchemeLabel(scheme).value}_{tag}{WAVEFORM_SUFFIX}"


def write_waveforms(path: str, waveforms: Iterable[Waveform]) -> int:
    """Write records of a text header line followed by little-endian float64 samples."""
    count = 0
    with open(path, "wb") as f:
        for w in waveforms:
            seed = "none" if w.seed is None else str(w.seed)
            header = (
                f"{WAVEFORM_VERSION} {w.fs!r} {w.fc!r} {w.num_samples} "
                f"{w.scheme.value} {float(w.snr_db)!r} {seed}\n"
            )
            f.write(header.encode("ascii"))
            f.write(w.samples.astype("<f8").tobytes())
            count += 1
    logger.debug(f"Wrote {count} waveforms to {path}")
    return count


def read_waveforms(path: str) -> List[Waveform]:
    with open(path, "rb") as f:
        data = f.read()

    waveforms = []
    offset = 0
    while offset < len(data):
        end = data.find(b"\n", offset)
        if end < 0:
            raise FormatError("waveform header is not terminated", offset, path)
        try:
            parts = data[offset:end].decode("ascii").split()
        except UnicodeDecodeError:
            raise FormatError("waveform header is not ASCII", offset, path)
        if len(parts) != 7 or parts[0] != WAVEFORM_VERSION:
            raise FormatError(f"expected '{WAVEFORM_VERSION}' header with 6 fields", offset, path)
        try:
            fs, fc = float(parts[1]), float(parts[2])
            n = int(parts[3])
            scheme = SchemeLabel(parts[4])
            snr = float(parts[5])
            seed = None if parts[6] == "none" else int(parts[6])
        except ValueError:
            raise FormatError("malformed waveform header field", offset, path)
        start = end + 1
        stop = start + 8 * n
        if n < 0 or stop > len(data):
            raise FormatError(f"waveform truncated: {n} samples declared", offset, path)
        samples = np.frombuffer(data[start:stop], dtype="<f8").astype(np.float64)
        waveforms.append(Waveform(samples, fs, fc, scheme, snr, seed))
        offset = stop
    return waveforms


def waveform_files(inputs: Sequence[str]) -> List[str]:
    """Expand directories into the waveform files they contain, sorted."""
    files = []
    for item in inputs:
        if os.path.isdir(item):
            files.extend(sorted(glob.glob(os.path.join(item, f"*{WAVEFORM_SUFFIX}"))))
        else:
            files.append(item)
    return files


def read_waveform_inputs(inputs: Sequence[str]) -> List[Waveform]:
    waveforms = []
    for path in waveform_files(inputs):
        waveforms.extend(read_waveforms(path))
    logger.info(f"Read {len(waveforms)} waveforms from {len(inputs)} input(s)")
    return waveforms


# Feature tables

def features_frame(pairs: Iterable[Tuple[Waveform, FeatureVector]]) -> pd.DataFrame:
    rows = []
    for w, fv in pairs:
        row = dict(zip(FEATURE_NAMES, fv.as_array().tolist()))
        row.update(label=w.scheme.value, snr_db=float(w.snr_db), seed=w.seed)
        rows.append(row)
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    frame["seed"] = frame["seed"].astype("Int64")
    return frame


def dataset_from_frame(frame: pd.DataFrame) -> LabeledDataset:
    missing = [c for c in list(FEATURE_NAMES) + ["label"] if c not in frame.columns]
    if missing:
        raise FormatError(f"feature table lacks columns {missing}")
    seeds = None
    if "seed" in frame.columns:
        seeds = [None if pd.isna(s) else int(s) for s in frame["seed"]]
    snr = frame["snr_db"].to_numpy(dtype=np.float64) if "snr_db" in frame.columns else None
    return LabeledDataset(
        frame[list(FEATURE_NAMES)].to_numpy(dtype=np.float64),
        frame["label"].astype(str).tolist(),
        snr,
        seeds,
    )


def dataset_from_pairs(pairs: Iterable[Tuple[Waveform, FeatureVector]]) -> LabeledDataset:
    return dataset_from_frame(features_frame(pairs))


def dataset_frame(ds: LabeledDataset) -> pd.DataFrame:
    frame = pd.DataFrame(ds.features, columns=list(FEATURE_NAMES))
    frame["label"] = ds.labels
    frame["snr_db"] = ds.snr_db
    frame["seed"] = pd.array(ds.seeds, dtype="Int64")
    return frame


def write_features_csv(path: str, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(frame)} feature rows to {path}")


def read_features_csv(path: str) -> LabeledDataset:
    try:
        frame = pd.read_csv(path, float_precision="round_trip", dtype={"label": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"unreadable feature CSV: {str(e)}", path=path) from e
    return dataset_from_frame(frame)


def write_arff(path: str, ds: LabeledDataset, relation: str = "amc_features") -> None:
    """ARFF with the nine numeric features and a nominal class attribute."""
    classes = [s.value for s in SCHEMES]
    extra = sorted(set(ds.labels) - set(classes))
    lines = [f"@RELATION {relation}", ""]
    lines += [f"@ATTRIBUTE {name} NUMERIC" for name in FEATURE_NAMES]
    lines += ["@ATTRIBUTE class {" + ",".join(classes + extra) + "}", "", "@DATA"]
    for row, label in zip(ds.features, ds.labels):
        lines.append(",".join(f"{v:.17g}" for v in row) + f",{label}")
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"Wrote {len(ds)} ARFF rows to {path}")


def read_arff(path: str) -> LabeledDataset:
    try:
        data, meta = arff.loadarff(path)
    except (arff.ParseArffError, ValueError) as e:
        raise FormatError(f"unreadable ARFF: {str(e)}", path=path) from e
    names = meta.names()
    if names[: len(FEATURE_NAMES)] != list(FEATURE_NAMES) or "class" not in names:
        raise FormatError(f"unexpected ARFF attributes {names}", path=path)
    features = np.column_stack([data[name].astype(np.float64) for name in FEATURE_NAMES])
    labels = [v.decode("ascii") if isinstance(v, bytes) else str(v) for v in data["class"]]
    return LabeledDataset(features.reshape(len(labels), len(FEATURE_NAMES)), labels)


def read_dataset(path: str) -> LabeledDataset:
    """Load a feature table from CSV or ARFF, chosen by extension."""
    if path.lower().endswith(".arff"):
        return read_arff(path)
    return read_features_csv(path)


# Run manifests

def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManifest(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    command: str
    config: Dict[str, Any]
    seeds: List[int] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)
    parameters: Dict[str, Any] = Field(default_factory=dict)
    started_at: str = Field(default_factory=utc_now)
    finished_at: Optional[str] = None


def write_manifest(directory: str, manifest: RunManifest) -> str:
    path = os.path.join(directory, MANIFEST_NAME)
    finished = manifest.model_copy(update={"finished_at": utc_now()})
    with open(path, "w") as f:
        f.write(finished.model_dump_json(indent=2))
    logger.info(f"Manifest written to {path}")
    return path


def read_manifest(path: str) -> RunManifest:
    try:
        with open(path) as f:
            return RunManifest.model_validate_json(f.read())
    except ValueError as e:
        raise FormatError(f"invalid manifest: {str(e)}", path=path) from e
