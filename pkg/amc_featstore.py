"""Feature database of known (primary-user) signals.

Records live in an embedded sqlite database. Lookups go through an
in-memory grid index built over the record features: every feature is
quantized into cells of width 2*eps_i, the 9 cell coordinates are hashed
into one 64-bit key, and a query probes the at most 2**9 cells its
tolerance box can touch. Candidates from those cells are checked exactly.

``scan_match`` answers the same question by a linear pass over the flat
record rows and serves as the unindexed baseline.
"""

import logging
import math
import sqlite3
import threading
import time
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from amc_config import FeatureConfig, MissAction
from amc_errors import (
    ConfigurationError,
    DimensionMismatchError,
    FormatError,
    NonFiniteInputError,
    PersistenceError,
    RecordValidationError,
)
from amc_features import NUM_FEATURES, FeatureVector, extract_all
from amc_svm import LabeledDataset, MulticlassModel, predict_multiclass
from amc_synthesis import SchemeLabel, Waveform

logger = logging.getLogger(__name__)

STORE_VERSION = "AMCDB1"
LABEL_WIDTH = 8
TOLERANCE_FLOOR = 1e-12

# odd 64-bit multipliers for the cell hash
_HASH_MULTIPLIERS = np.array(
    [
        0x9E3779B97F4A7C15,
        0xC2B2AE3D27D4EB4F,
        0x165667B19E3779F9,
        0xD6E8FEB86659FD93,
        0xFF51AFD7ED558CCD,
        0xC4CEB9FE1A85EC53,
        0x94D049BB133111EB,
        0xBF58476D1CE4E5B9,
        0x2545F4914F6CDD1D,
    ],
    dtype=np.uint64,
)
_CELL_LIMIT = float(2 ** 62)
_CORNERS = np.array(list(product((0, 1), repeat=NUM_FEATURES)), dtype=np.int64)


class MatchPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerances: List[float]
    miss_action: MissAction = MissAction.CLASSIFY_FALLBACK
    insert_on_classify: bool = False

    @field_validator("tolerances", mode="before")
    @classmethod
    def _listify(cls, value):
        return [float(v) for v in np.asarray(value, dtype=np.float64).ravel()]

    @model_validator(mode="after")
    def _validate(self):
        if len(self.tolerances) != NUM_FEATURES:
            raise ConfigurationError(
                f"{NUM_FEATURES} tolerances", f"got {len(self.tolerances)}"
            )
        if any(not (t > 0) or math.isinf(t) for t in self.tolerances):
            raise ConfigurationError("all tolerances > 0", f"tolerances={self.tolerances}")
        return self

    @property
    def eps(self) -> np.ndarray:
        return np.asarray(self.tolerances, dtype=np.float64)


@dataclass(frozen=True)
class FeatureRecord:
    label: str
    features: Tuple[float, ...]
    snr_db: float = math.inf
    created_at: Optional[float] = None
    source_seed: Optional[int] = None
    id: Optional[int] = None

    @classmethod
    def create(cls, label, features, snr_db=math.inf, source_seed=None, created_at=None):
        if isinstance(features, FeatureVector):
            features = features.as_array()
        return cls(
            str(label),
            tuple(float(v) for v in np.asarray(features, dtype=np.float64).ravel()),
            float(snr_db),
            created_at,
            source_seed,
        )

    @property
    def vector(self) -> FeatureVector:
        return FeatureVector.from_array(self.features)


class OutcomeKind(str, Enum):
    DB_HIT = "DB_HIT"
    CLASSIFIER = "CLASSIFIER"
    MALICIOUS = "MALICIOUS"


@dataclass(frozen=True)
class ClassificationOutcome:
    kind: OutcomeKind
    label: Optional[str]
    matched_id: Optional[int]
    elapsed: int
    inserted_id: Optional[int] = None

    def __post_init__(self):
        if self.kind is OutcomeKind.DB_HIT and self.matched_id is None:
            raise ValueError("DB_HIT outcome needs a matched id")
        if self.kind is OutcomeKind.MALICIOUS and self.label is not None:
            raise ValueError("MALICIOUS outcome carries no label")


def _validate_record(record: FeatureRecord) -> None:
    valid_labels = {s.value for s in SchemeLabel}
    if record.label not in valid_labels:
        raise RecordValidationError(f"unknown label {record.label!r}")
    if len(record.features) != NUM_FEATURES:
        raise RecordValidationError(f"expected {NUM_FEATURES} features, got {len(record.features)}")
    if not all(math.isfinite(v) for v in record.features):
        raise RecordValidationError(f"non-finite features {record.features}")
    if math.isnan(record.snr_db):
        raise RecordValidationError("snr_db is NaN")


def _hash_cells(cells: np.ndarray) -> np.ndarray:
    """64-bit wraparound hash of integer cell rows."""
    with np.errstate(over="ignore"):
        return np.sum(cells.astype(np.uint64) * _HASH_MULTIPLIERS, axis=-1, dtype=np.uint64)


def _cells(values: np.ndarray, width: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values / width), -_CELL_LIMIT, _CELL_LIMIT).astype(np.int64)


def _best(ids: np.ndarray, rows: np.ndarray, x: np.ndarray, eps: np.ndarray) -> Optional[int]:
    """Position of the in-box row with least normalized Chebyshev distance, lowest id on ties."""
    if rows.shape[0] == 0:
        return None
    diff = np.abs(rows - x)
    inside = np.all(diff <= eps, axis=1)
    if not inside.any():
        return None
    positions = np.flatnonzero(inside)
    distance = np.max(diff[positions] / eps, axis=1)
    return int(positions[np.lexsort((ids[positions], distance))[0]])


class GridIndex:
    """Hash grid over feature rows for one tolerance vector."""

    def __init__(self, features: np.ndarray, eps: np.ndarray):
        self.eps = eps
        self.width = 2.0 * eps * (1 + 2e-9)
        self.size = int(features.shape[0])
        self.cells: Dict[int, List[int]] = {}
        if not self.size:
            return
        keys = _hash_cells(_cells(features, self.width))
        order = np.argsort(keys, kind="stable")
        unique, starts = np.unique(keys[order], return_index=True)
        for key, rows in zip(unique.tolist(), np.split(order, starts[1:])):
            self.cells[key] = rows.tolist()

    def add(self, position: int, row: np.ndarray):
        """Register one appended row under its cell."""
        key = int(_hash_cells(_cells(row, self.width)))
        self.cells.setdefault(key, []).append(position)
        self.size += 1

    def candidates(self, x: np.ndarray) -> np.ndarray:
        """Row positions in every cell the tolerance box around x touches."""
        reach = self.eps * (1 + 1e-9) + 1e-15 * np.maximum(1.0, np.abs(x))
        low = _cells(x - reach, self.width)
        high = _cells(x + reach, self.width)
        span = high - low
        if np.all(span <= 1):
            cells = low + _CORNERS * span
        elif np.prod((span + 1).astype(float)) > 3 ** NUM_FEATURES:
            # tolerance below float resolution of x: every row is a candidate
            return np.arange(self.size, dtype=np.int64)
        else:
            cells = np.array(list(product(*(range(a, b + 1) for a, b in zip(low, high)))))
        hits: List[int] = []
        for key in np.unique(_hash_cells(cells)).tolist():
            rows = self.cells.get(key)
            if rows:
                hits.extend(rows)
        return np.array(hits, dtype=np.int64)


class FeatureStore:
    """Labeled feature records in sqlite with an in-memory grid index."""

    def __init__(self, tolerances: Sequence[float], db_path: str = ":memory:"):
        self.db_path = db_path
        self.tolerances = MatchPolicy(tolerances=tolerances).tolerances
        self.conn = None
        self.cursor = None
        self._lock = threading.RLock()
        self._ids: List[int] = []
        self._labels: List[str] = []
        self._rows: List[Tuple[float, ...]] = []
        self._snr: List[float] = []
        self._created: List[float] = []
        self._seeds: List[Optional[int]] = []
        self._id_buffer = np.empty(0, dtype=np.int64)
        self._feature_buffer = np.empty((0, NUM_FEATURES), dtype=np.float64)
        self._indexes: Dict[Tuple[float, ...], GridIndex] = {}
        self.initialize_db()

    def initialize_db(self):
        """Open the database, create the records table and load existing rows."""
        try:
            self.conn = sqlite3.connect(self.db_path, check_same_thread=False)
            self.cursor = self.conn.cursor()
            columns = ", ".join(f"f{i + 1} REAL NOT NULL" for i in range(NUM_FEATURES))
            self.cursor.execute(f'''
            CREATE TABLE IF NOT EXISTS records (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                label TEXT NOT NULL,
                {columns},
                snr_db REAL,
                created_at REAL NOT NULL,
                source_seed INTEGER
            )
            ''')
            self.conn.commit()
            self.cursor.execute("SELECT * FROM records ORDER BY id")
            for row in self.cursor.fetchall():
                self._cache(self._from_row(row))
            logger.debug(f"Feature store opened: {self.db_path} ({len(self._ids)} records)")
        except sqlite3.Error as e:
            logger.error(f"Feature store initialization error: {str(e)}")
            if self.conn:
                self.conn.close()
            raise PersistenceError(f"cannot open feature store {self.db_path}: {str(e)}") from e

    def close(self):
        if self.conn:
            self.conn.close()

    @staticmethod
    def _from_row(row) -> FeatureRecord:
        features = tuple(float(v) for v in row[2 : 2 + NUM_FEATURES])
        snr, created, seed = row[2 + NUM_FEATURES :]
        return FeatureRecord(
            row[1], features, math.inf if snr is None else float(snr), float(created), seed, int(row[0])
        )

    def _cache(self, record: FeatureRecord):
        self._ids.append(record.id)
        self._labels.append(record.label)
        self._rows.append(record.features)
        self._snr.append(record.snr_db)
        self._created.append(record.created_at)
        self._seeds.append(record.source_seed)
        position = len(self._ids) - 1
        if position == self._id_buffer.shape[0]:
            self._grow(max(64, 2 * position))
        self._id_buffer[position] = record.id
        self._feature_buffer[position] = record.features
        for index in self._indexes.values():
            index.add(position, self._feature_buffer[position])

    def _grow(self, capacity: int):
        ids = np.empty(capacity, dtype=np.int64)
        features = np.empty((capacity, NUM_FEATURES), dtype=np.float64)
        size = self._id_buffer.shape[0]
        ids[:size] = self._id_buffer
        features[:size] = self._feature_buffer
        self._id_buffer, self._feature_buffer = ids, features

    def _execute_insert(self, record: FeatureRecord) -> FeatureRecord:
        _validate_record(record)
        created = time.time() if record.created_at is None else float(record.created_at)
        placeholders = ", ".join("?" for _ in range(NUM_FEATURES + 5))
        columns = ", ".join(f"f{i + 1}" for i in range(NUM_FEATURES))
        # NULL snr_db marks a noiseless record
        snr = None if math.isinf(record.snr_db) else record.snr_db
        self.cursor.execute(
            f"INSERT INTO records (id, label, {columns}, snr_db, created_at, source_seed) "
            f"VALUES ({placeholders})",
            (record.id, record.label, *record.features, snr, created, record.source_seed),
        )
        return FeatureRecord(
            record.label, record.features, record.snr_db, created, record.source_seed,
            int(self.cursor.lastrowid),
        )

    def insert(self, record: FeatureRecord) -> int:
        """Insert one record and return its id."""
        return self.insert_many([record])[0]

    def insert_many(self, records: Sequence[FeatureRecord]) -> List[int]:
        """Insert records in a single transaction; all or nothing."""
        with self._lock:
            stored = []
            try:
                for record in records:
                    stored.append(self._execute_insert(record))
                self.conn.commit()
            except sqlite3.Error as e:
                self.conn.rollback()
                logger.error(f"Error inserting feature records: {str(e)}")
                raise PersistenceError(f"insert failed: {str(e)}") from e
            except RecordValidationError:
                self.conn.rollback()
                raise
            for record in stored:
                self._cache(record)
        return [record.id for record in stored]

    def get(self, record_id: int) -> Optional[FeatureRecord]:
        with self._lock:
            self.cursor.execute("SELECT * FROM records WHERE id = ?", (record_id,))
            row = self.cursor.fetchone()
        return self._from_row(row) if row else None

    def __len__(self) -> int:
        return len(self._ids)

    def records(self) -> List[FeatureRecord]:
        with self._lock:
            return [
                FeatureRecord(*fields[1:], fields[0])
                for fields in zip(
                    self._ids, self._labels, self._rows, self._snr, self._created, self._seeds
                )
            ]

    def flat_rows(self) -> Tuple[np.ndarray, List[str], np.ndarray]:
        """(ids, labels, feature matrix) in id order, as views of the live buffers."""
        with self._lock:
            size = len(self._ids)
            return self._id_buffer[:size], self._labels, self._feature_buffer[:size]

    def index_for(self, eps: np.ndarray) -> GridIndex:
        """Grid index for one tolerance vector, built on first use and kept current by inserts."""
        with self._lock:
            key = tuple(eps.tolist())
            index = self._indexes.get(key)
            if index is None:
                _, _, matrix = self.flat_rows()
                index = GridIndex(matrix, eps)
                self._indexes[key] = index
                logger.debug(f"Built grid index over {matrix.shape[0]} records")
            return index

    def nearest(self, x: np.ndarray, eps: np.ndarray) -> Optional[Tuple[int, str]]:
        """Closest in-box record among the grid candidates of x."""
        with self._lock:
            index = self.index_for(eps)
            candidates = index.candidates(x)
            if not candidates.size:
                return None
            ids = self._id_buffer[candidates]
            position = _best(ids, self._feature_buffer[candidates], x, eps)
            if position is None:
                return None
            return int(ids[position]), self._labels[int(candidates[position])]


class FlatFileStore:
    """Records of an AMCDB1 file held as flat rows, with no index."""

    def __init__(self, tolerances, records: Sequence[FeatureRecord]):
        self.tolerances = list(tolerances)
        self._records = list(records)
        self._ids = np.array([r.id for r in self._records], dtype=np.int64)
        self._labels = [r.label for r in self._records]
        self._matrix = np.array([r.features for r in self._records], dtype=np.float64).reshape(
            -1, NUM_FEATURES
        )

    @classmethod
    def open(cls, path: str) -> "FlatFileStore":
        tolerances, records = read_store_file(path)
        return cls(tolerances, records)

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> List[FeatureRecord]:
        return list(self._records)

    def flat_rows(self) -> Tuple[np.ndarray, List[str], np.ndarray]:
        return self._ids, self._labels, self._matrix


def _query(x) -> np.ndarray:
    x = np.asarray(x.as_array() if isinstance(x, FeatureVector) else x, dtype=np.float64)
    if x.shape != (NUM_FEATURES,):
        raise DimensionMismatchError(f"expected {NUM_FEATURES} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError(f"non-finite query vector: {x.tolist()}")
    return x


def match(store: FeatureStore, x, policy: MatchPolicy) -> Optional[Tuple[int, str]]:
    """Indexed tolerance-box lookup: (id, label) of the closest record, or None."""
    return store.nearest(_query(x), policy.eps)


def scan_match(store, x, policy: MatchPolicy) -> Optional[Tuple[int, str]]:
    """Linear-scan lookup over flat rows with the same contract as ``match``."""
    x = _query(x)
    ids, labels, matrix = store.flat_rows()
    position = _best(ids, matrix, x, policy.eps)
    if position is None:
        return None
    return int(ids[position]), labels[position]


def classify_pipeline(
    store: FeatureStore,
    model: Optional[MulticlassModel],
    w: Waveform,
    policy: MatchPolicy,
    feature_cfg: FeatureConfig = FeatureConfig(),
) -> ClassificationOutcome:
    """Match against known signals, then classify or flag on a miss."""
    start = time.perf_counter_ns()
    features = extract_all(w, feature_cfg)
    hit = match(store, features, policy)
    if hit is not None:
        return ClassificationOutcome(
            OutcomeKind.DB_HIT, hit[1], hit[0], time.perf_counter_ns() - start
        )

    if policy.miss_action is MissAction.STRICT_MALICIOUS:
        logger.debug(f"No match for {w.scheme} waveform (seed {w.seed}), flagged malicious")
        return ClassificationOutcome(OutcomeKind.MALICIOUS, None, None, time.perf_counter_ns() - start)

    if model is None:
        raise ConfigurationError("classifier fallback needs a trained model")
    label = predict_multiclass(model, features).label
    inserted = None
    if policy.insert_on_classify:
        inserted = store.insert(FeatureRecord.create(label, features, w.snr_db, w.seed))
    return ClassificationOutcome(
        OutcomeKind.CLASSIFIER, label, None, time.perf_counter_ns() - start, inserted
    )


def default_tolerances(ds: LabeledDataset, scale: float = 0.25) -> List[float]:
    """Per-feature pooled within-class standard deviation times ``scale``."""
    if len(ds) == 0:
        raise ConfigurationError("tolerances need a nonempty dataset")
    labels = np.asarray(ds.labels)
    squares = np.zeros(ds.features.shape[1])
    classes = np.unique(labels)
    for label in classes:
        rows = ds.features[labels == label]
        squares += np.sum((rows - rows.mean(axis=0)) ** 2, axis=0)
    dof = max(len(ds) - classes.size, 1)
    pooled = np.sqrt(squares / dof)
    return [float(v) for v in np.maximum(pooled * scale, TOLERANCE_FLOOR)]


def ingest_dataset(store: FeatureStore, ds: LabeledDataset) -> List[int]:
    """Store every dataset row as a known-signal record."""
    records = [
        FeatureRecord.create(label, row, snr, seed)
        for row, label, snr, seed in zip(ds.features, ds.labels, ds.snr_db, ds.seeds)
    ]
    ids = store.insert_many(records)
    logger.info(f"Ingested {len(ids)} records into feature store")
    return ids


def _format_record(record: FeatureRecord) -> str:
    seed = "none" if record.source_seed is None else str(record.source_seed)
    values = " ".join(f"{v:>+24.17e}" for v in record.features)
    return (
        f"{record.id:>20d} {record.label:<{LABEL_WIDTH}s} {values} "
        f"{record.snr_db:>+24.17e} {record.created_at:>+24.17e} {seed:>20s}"
    )


def persist(store, path: str) -> None:
    """Write all records to an AMCDB1 store file."""
    records = store.records()
    header = f"{STORE_VERSION} {len(records)} " + " ".join(repr(float(t)) for t in store.tolerances)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(header + "\n")
        for record in records:
            f.write(_format_record(record) + "\n")
    logger.info(f"Persisted {len(records)} records to {path}")


def read_store_file(path: str) -> Tuple[List[float], List[FeatureRecord]]:
    """Parse an AMCDB1 file completely; any defect raises FormatError."""
    with open(path, "rb") as f:
        data = f.read()

    offset = 0
    lines = data.split(b"\n")
    if not data.endswith(b"\n"):
        raise FormatError("file does not end with a newline (truncated?)", len(data), path)
    lines = lines[:-1]
    if not lines:
        raise FormatError("missing AMCDB1 header", 0, path)

    def fail(message: str, at: int):
        raise FormatError(message, at, path)

    try:
        header = lines[0].decode("ascii").split()
    except UnicodeDecodeError:
        fail("header is not ASCII", 0)
    if not header or header[0] != STORE_VERSION:
        fail(f"unknown store version tag {header[0] if header else ''!r}", 0)
    if len(header) != 2 + NUM_FEATURES:
        fail(f"header needs a record count and {NUM_FEATURES} tolerances", 0)
    try:
        count = int(header[1])
        tolerances = [float(v) for v in header[2:]]
    except ValueError:
        fail("malformed header numbers", 0)
    offset = len(lines[0]) + 1

    records = []
    last_id = 0
    for raw in lines[1:]:
        try:
            parts = raw.decode("ascii").split()
        except UnicodeDecodeError:
            fail("record is not ASCII", offset)
        if len(parts) != 5 + NUM_FEATURES:
            fail(f"record has {len(parts)} fields, expected {5 + NUM_FEATURES}", offset)
        try:
            record_id = int(parts[0])
            features = tuple(float(v) for v in parts[2 : 2 + NUM_FEATURES])
            snr = float(parts[2 + NUM_FEATURES])
            created = float(parts[3 + NUM_FEATURES])
            seed_text = parts[4 + NUM_FEATURES]
            seed = None if seed_text == "none" else int(seed_text)
        except ValueError:
            fail("malformed record field", offset)
        if record_id <= last_id:
            fail(f"record id {record_id} is not increasing", offset)
        record = FeatureRecord(parts[1], features, snr, created, seed, record_id)
        try:
            _validate_record(record)
        except RecordValidationError as e:
            fail(str(e), offset)
        records.append(record)
        last_id = record_id
        offset += len(raw) + 1

    if len(records) != count:
        fail(f"header declares {count} records, found {len(records)}", offset)
    return tolerances, records


def load(path: str) -> FeatureStore:
    """Load an AMCDB1 file into a fresh in-memory store and rebuild its index."""
    tolerances, records = read_store_file(path)
    try:
        store = FeatureStore(tolerances)
    except ConfigurationError as e:
        raise FormatError(f"invalid tolerances in header: {str(e)}", 0, path) from e
    store.insert_many(records)
    logger.info(f"Loaded {len(store)} records from {path}")
    return store


def store_summary(store) -> List[List]:
    """Per-label record counts for display."""
    counts: Dict[str, int] = {}
    for record in store.records():
        counts[record.label] = counts.get(record.label, 0) + 1
    return [[label, counts[label]] for label in sorted(counts)]

