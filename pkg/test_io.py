import json
import math

import numpy as np
import pytest

from amc_config import SynthConfig
from amc_errors import FormatError
from amc_features import FEATURE_NAMES, extract_batch
from amc_io import (
    MANIFEST_NAME,
    RunManifest,
    dataset_frame,
    dataset_from_pairs,
    features_frame,
    read_dataset,
    read_features_csv,
    read_manifest,
    read_waveform_inputs,
    read_waveforms,
    waveform_filename,
    write_arff,
    write_features_csv,
    write_manifest,
    write_waveforms,
)
from amc_svm import LabeledDataset
from amc_synthesis import SchemeLabel, Waveform, realize_batch


@pytest.fixture
def waves():
    cfg = SynthConfig(num_samples=512)
    return realize_batch([SchemeLabel.AM, SchemeLabel.PSK2], [10.0], 2, cfg, base_seed=30, progress=False)


@pytest.fixture
def dataset(waves):
    return dataset_from_pairs(extract_batch(waves, progress=False))


class TestWaveformFiles:
    def test_filename(self):
        assert waveform_filename(SchemeLabel.FSK4, 15.0) == "4FSK_15dB.amcwav"
        assert waveform_filename(SchemeLabel.AM, math.inf) == "AM_clean.amcwav"

    def test_records_survive_a_write(self, waves, tmp_path):
        path = str(tmp_path / "batch.amcwav")
        assert write_waveforms(path, waves) == 4
        loaded = read_waveforms(path)
        assert [w.seed for w in loaded] == [30, 31, 32, 33]
        assert [w.scheme for w in loaded] == [w.scheme for w in waves]
        for original, copy in zip(waves, loaded):
            np.testing.assert_array_equal(copy.samples, original.samples)
            assert (copy.fs, copy.fc, copy.snr_db) == (original.fs, original.fc, original.snr_db)

    def test_noiseless_record_without_seed(self, tmp_path):
        w = Waveform(np.arange(8.0), 8.0, 2.0, SchemeLabel.AM)
        path = str(tmp_path / "clean.amcwav")
        write_waveforms(path, [w])
        (copy,) = read_waveforms(path)
        assert copy.seed is None
        assert math.isinf(copy.snr_db)

    def test_truncated_second_record(self, tmp_path):
        w = Waveform(np.ones(16), 8.0, 2.0, SchemeLabel.FM, 5.0, 1)
        twin = Waveform(np.ones(16), 8.0, 2.0, SchemeLabel.FM, 5.0, 2)
        path = tmp_path / "batch.amcwav"
        write_waveforms(str(path), [w, twin])
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FormatError, match="truncated") as info:
            read_waveforms(str(path))
        assert info.value.offset == len(data) // 2

    def test_wrong_version(self, tmp_path):
        path = tmp_path / "bad.amcwav"
        path.write_bytes(b"AMCWAV2 8.0 2.0 0 AM inf none\n")
        with pytest.raises(FormatError) as info:
            read_waveforms(str(path))
        assert info.value.offset == 0

    def test_directory_input(self, waves, tmp_path):
        write_waveforms(str(tmp_path / "b.amcwav"), waves[2:])
        write_waveforms(str(tmp_path / "a.amcwav"), waves[:2])
        (tmp_path / "notes.txt").write_text("ignored")
        loaded = read_waveform_inputs([str(tmp_path)])
        assert [w.seed for w in loaded] == [30, 31, 32, 33]


class TestFeatureTables:
    def test_frame_columns(self, waves):
        frame = features_frame(extract_batch(waves, progress=False))
        assert list(frame.columns) == list(FEATURE_NAMES) + ["label", "snr_db", "seed"]
        assert list(frame["label"]) == ["AM", "AM", "2PSK", "2PSK"]
        assert str(frame["seed"].dtype) == "Int64"

    def test_csv_reparses_exactly(self, dataset, tmp_path):
        path = str(tmp_path / "features.csv")
        write_features_csv(path, dataset_frame(dataset))
        loaded = read_features_csv(path)
        np.testing.assert_array_equal(loaded.features, dataset.features)
        assert loaded.labels == dataset.labels
        assert loaded.seeds == dataset.seeds
        np.testing.assert_array_equal(loaded.snr_db, dataset.snr_db)

    def test_csv_missing_seed_values(self, tmp_path):
        ds = LabeledDataset(np.eye(len(FEATURE_NAMES))[:2], ["AM", "4PSK"], seeds=[None, 5])
        path = str(tmp_path / "features.csv")
        write_features_csv(path, dataset_frame(ds))
        loaded = read_dataset(path)
        assert loaded.seeds == [None, 5]
        assert loaded.labels == ["AM", "4PSK"]

    def test_arff_reparses(self, dataset, tmp_path):
        path = str(tmp_path / "features.arff")
        write_arff(path, dataset)
        loaded = read_dataset(path)
        np.testing.assert_array_equal(loaded.features, dataset.features)
        assert loaded.labels == dataset.labels

    def test_csv_without_feature_columns(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("label,snr_db\nAM,5\n")
        with pytest.raises(FormatError, match="gamma_max"):
            read_features_csv(str(path))

    def test_empty_csv(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("")
        with pytest.raises(FormatError):
            read_features_csv(str(path))


class TestManifest:
    def test_infinite_values_survive(self, tmp_path):
        manifest = RunManifest(
            command="synth",
            config={"snr_db": math.inf},
            seeds=[1, 2],
            parameters={"snr_list": [5.0, math.inf]},
        )
        path = write_manifest(str(tmp_path), manifest)
        assert path.endswith(MANIFEST_NAME)
        raw = json.loads((tmp_path / MANIFEST_NAME).read_text())
        assert raw["command"] == "synth"
        assert raw["finished_at"] is not None
        loaded = read_manifest(path)
        assert loaded.seeds == [1, 2]
        assert math.isinf(loaded.parameters["snr_list"][1])
        assert math.isinf(loaded.config["snr_db"])

    def test_invalid_manifest(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        path.write_text('{"command": 3}')
        with pytest.raises(FormatError):
            read_manifest(str(path))
