import pytest
from pydantic import ValidationError

from amc_config import MissAction, Settings, SynthConfig, load_settings, read_config_file
from amc_errors import EXIT_ARGUMENT, ConfigurationError


class TestSynthConfig:
    def test_defaults_are_valid(self):
        cfg = SynthConfig()
        assert cfg.samples_per_symbol == 100
        cfg.check()

    @pytest.mark.parametrize(
        "changes, invariant",
        [
            ({"sample_rate": 0.0}, "fs > 0"),
            ({"carrier": 60_000.0}, "0 < fc < fs/2"),
            ({"message_freq": 30_000.0}, "0 < fm < fc"),
            ({"num_samples": 63}, "N >= 64"),
            ({"am_depth": 1.5}, "0 <= Ka <= 1"),
            ({"fm_index": 0.0}, "kf > 0"),
            ({"symbol_rate": 3_000.0}, "symbol_rate divides fs evenly"),
            ({"fsk_deviation": 20_000.0}, "fc + fsk_deviation*(levels-1)/2 < fs/2"),
            ({"rng_seed": -1}, "rng_seed >= 0"),
        ],
    )
    def test_invariant_violations_name_the_invariant(self, changes, invariant):
        with pytest.raises(ConfigurationError) as info:
            SynthConfig(**changes)
        assert info.value.invariant == invariant
        assert info.value.exit_code == EXIT_ARGUMENT

    def test_zero_am_depth_is_accepted(self):
        assert SynthConfig(am_depth=0.0).am_depth == 0.0

    def test_with_updates_revalidates_and_skips_none(self):
        cfg = SynthConfig()
        assert cfg.with_updates(rng_seed=5, carrier=None).rng_seed == 5
        with pytest.raises(ConfigurationError):
            cfg.with_updates(num_samples=10)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            SynthConfig(bogus=1)


class TestLoadSettings:
    def test_defaults(self):
        settings = load_settings()
        assert settings == Settings()
        assert settings.store.miss_action is MissAction.CLASSIFY_FALLBACK
        assert settings.experiment.snr_list == [5.0, 15.0, 25.0]

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "amc.env"
        path.write_text("num_samples=8192\nsvm_c=2.5\nsnr_list=10,20\ntolerances=0.1,0.2\n")
        settings = load_settings(str(path), {"svm_c": 4.0, "rng_seed": None})
        assert settings.synth.num_samples == 8192
        assert settings.svm.c == 4.0
        assert settings.experiment.snr_list == [10.0, 20.0]
        assert settings.store.tolerances == [0.1, 0.2]

    def test_unknown_file_key(self, tmp_path):
        path = tmp_path / "amc.env"
        path.write_text("carrier=20000\nwindow=hann\n")
        with pytest.raises(ConfigurationError, match="window"):
            read_config_file(str(path))

    def test_unknown_override_key(self):
        with pytest.raises(ConfigurationError):
            load_settings(overrides={"nonsense": 1})

    def test_bad_value_type_is_validation_error(self, tmp_path):
        path = tmp_path / "amc.env"
        path.write_text("num_samples=lots\n")
        with pytest.raises(ValidationError):
            load_settings(str(path))

    @pytest.mark.parametrize(
        "overrides",
        [{"svm_c": 0.0}, {"tolerance_scale": -1.0}, {"tolerances": "0.1,0"}, {"train_count": 1}],
    )
    def test_section_invariants(self, overrides):
        with pytest.raises(ConfigurationError):
            load_settings(overrides=overrides)

    def test_miss_action_parsed_from_text(self):
        settings = load_settings(overrides={"miss_action": "STRICT_MALICIOUS", "insert_on_classify": "true"})
        assert settings.store.miss_action is MissAction.STRICT_MALICIOUS
        assert settings.store.insert_on_classify is True
