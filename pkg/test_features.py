import math
from dataclasses import replace

import numpy as np
import pytest

from amc_config import FeatureConfig, SynthConfig
from amc_dsp import dft, instantaneous
from amc_errors import (
    EmptyMaskError,
    FeatureExtractionError,
    InsufficientSamplesError,
    NonFiniteInputError,
    ZeroSpectrumError,
)
from amc_features import (
    FEATURE_NAMES,
    NUM_FEATURES,
    FeatureVector,
    extract_all,
    extract_batch,
    gamma_max,
    kurtosis,
    mu42_amp,
    mu42_freq,
    sigma_a,
    sigma_aa,
    sigma_af,
    sigma_ap,
    sigma_dp,
    spectrum_symmetry,
)
from amc_synthesis import SCHEMES, SchemeLabel, Waveform, realize, realize_batch, synthesize


def masked_deviation(values, second):
    return math.sqrt(np.mean(values ** 2) - np.mean(second) ** 2)


class TestAmplitudeFeatures:
    def test_gamma_max_am_exact_bin(self, am_wave):
        inst = instantaneous(am_wave)
        # N * Ka^2 / 4 with N the trimmed length
        assert gamma_max(inst) == pytest.approx(inst.length * 0.5 ** 2 / 4, rel=1e-2)
        assert gamma_max(inst) == pytest.approx(256.0, rel=1e-2)

    def test_gamma_max_matches_direct_dft(self, exact_cfg):
        inst = instantaneous(synthesize(SchemeLabel.ASK2, exact_cfg))
        n = np.arange(inst.length)
        peak = max(
            abs(np.sum(inst.acn * np.exp(-2j * np.pi * k * n / inst.length))) ** 2
            for k in range(inst.length)
        )
        assert gamma_max(inst) == pytest.approx(peak / inst.length, rel=1e-9)
        assert gamma_max(inst) > 0

    def test_gamma_max_fm_is_flat(self, fm_wave):
        assert gamma_max(instantaneous(fm_wave)) < 1e-6

    def test_sigma_aa_am_closed_form(self, am_wave):
        expected = 0.5 * math.sqrt(0.5 - 4 / math.pi ** 2)
        assert sigma_aa(instantaneous(am_wave)) == pytest.approx(expected, rel=2e-2)

    def test_sigma_aa_fm(self, fm_wave):
        assert sigma_aa(instantaneous(fm_wave)) < 1e-3

    def test_sigma_aa_2ask_oracle(self, exact_cfg):
        inst = instantaneous(synthesize(SchemeLabel.ASK2, exact_cfg))
        acn = inst.acn
        assert sigma_aa(inst) == pytest.approx(masked_deviation(acn, np.abs(acn)), rel=1e-9)

    def test_sigma_a_am_masked_oracle(self, am_wave):
        inst = instantaneous(am_wave)
        acn = inst.acn[inst.an > 1.0]
        assert sigma_a(inst) == pytest.approx(masked_deviation(acn, acn), rel=1e-9)

    def test_sigma_a_fm(self, fm_wave):
        assert sigma_a(instantaneous(fm_wave)) < 1e-3

    def test_sigma_a_separates_ask_orders(self, exact_cfg):
        two = sigma_a(instantaneous(synthesize(SchemeLabel.ASK2, exact_cfg)))
        four = sigma_a(instantaneous(synthesize(SchemeLabel.ASK4, exact_cfg)))
        assert abs(two - four) > 1e-3

    def test_mu42_am_cosine_moment(self, am_wave):
        assert mu42_amp(instantaneous(am_wave)) == pytest.approx(1.5, rel=3e-2)


class TestPhaseFeatures:
    def test_carrier_phase_spread_is_zero(self, carrier):
        inst = instantaneous(carrier, At=0.5)
        assert sigma_dp(inst) < 1e-2
        assert sigma_ap(inst) < 1e-2
        assert sigma_af(inst) < 1e-4

    def test_am_phase_spread_is_zero(self, am_wave):
        inst = instantaneous(am_wave)
        assert sigma_dp(inst) < 1e-2
        assert sigma_ap(inst) < 1e-2
        assert sigma_af(inst) < 1e-3

    def test_sigma_dp_2psk_two_point(self, exact_cfg):
        count = math.ceil(exact_cfg.num_samples / exact_cfg.samples_per_symbol)
        w = synthesize(SchemeLabel.PSK2, exact_cfg, symbols=np.arange(count) % 2)
        assert sigma_dp(instantaneous(w)) == pytest.approx(math.pi / 2, rel=5e-2)

    def test_sigma_ap_4psk_oracle(self, exact_cfg):
        inst = instantaneous(synthesize(SchemeLabel.PSK4, exact_cfg))
        phi = inst.phi_nl[inst.an > inst.threshold]
        value = sigma_ap(inst)
        assert value > 0
        assert value == pytest.approx(masked_deviation(phi, np.abs(phi)), rel=1e-9)

    def test_sigma_af_2fsk_oracle(self, exact_cfg):
        inst = instantaneous(synthesize(SchemeLabel.FSK2, exact_cfg))
        fn = inst.fn[inst.an > inst.threshold]
        value = sigma_af(inst)
        assert value > 0
        assert value == pytest.approx(masked_deviation(fn, np.abs(fn)), rel=1e-9)

    def test_single_masked_sample_is_insufficient(self, am_wave):
        inst = instantaneous(am_wave)
        mask = np.zeros(inst.length, dtype=bool)
        mask[int(np.argmax(inst.an))] = True
        single = replace(inst, mask=mask)
        assert single.nc == 1
        with pytest.raises(InsufficientSamplesError):
            sigma_dp(single)


class TestSpectrumSymmetry:
    def test_am_is_symmetric(self, am_wave):
        assert abs(spectrum_symmetry(dft(am_wave))) < 0.05

    def test_lsb(self, exact_cfg):
        assert spectrum_symmetry(dft(synthesize(SchemeLabel.LSB, exact_cfg))) >= 0.95

    def test_usb(self, exact_cfg):
        assert spectrum_symmetry(dft(synthesize(SchemeLabel.USB, exact_cfg))) <= -0.95

    def test_carrier_only_is_zero_spectrum(self):
        # power only in the excluded carrier bin
        n, fs, fc = 256, 256.0, 65.0
        x = np.cos(2 * np.pi * fc * np.arange(n) / fs)
        spec = dft(Waveform(x, fs, fc, SchemeLabel.UNKNOWN))
        spec.bins[:] = 0
        spec.bins[spec.fcn + 1] = 1.0
        with pytest.raises(ZeroSpectrumError):
            spectrum_symmetry(spec)


class TestKurtosis:
    def test_gaussian_fourth_moment(self, rng):
        value, degenerate = kurtosis(rng.standard_normal(100_000))
        assert not degenerate
        assert value == pytest.approx(3.0, rel=5e-2)

    def test_constant_zero_is_degenerate(self):
        assert kurtosis(np.zeros(128)) == (0.0, True)

    def test_fm_frequency_cosine_moment(self, fm_wave):
        assert mu42_freq(instantaneous(fm_wave)) == pytest.approx(1.5, rel=3e-2)

    def test_fm_envelope_is_degenerate(self, fm_wave):
        fv = extract_all(fm_wave)
        assert fv.mu42_a == 0.0
        assert "mu42a" in fv.degenerate

    def test_carrier_frequency_is_degenerate(self, carrier):
        inst = instantaneous(carrier, At=0.5)
        assert kurtosis(inst.fn) == (0.0, True)


class TestExtractAll:
    def test_fm_vector(self, fm_wave):
        fv = extract_all(fm_wave)
        assert fv.gamma_max < 1e-6
        assert fv.sigma_aa < 1e-3
        assert fv.mu42_f == pytest.approx(1.5, rel=3e-2)

    def test_deterministic(self, am_wave):
        np.testing.assert_array_equal(extract_all(am_wave).as_array(), extract_all(am_wave).as_array())

    def test_canonical_order(self, am_wave):
        fv = extract_all(am_wave)
        values = fv.as_array()
        assert values.shape == (NUM_FEATURES,)
        assert FEATURE_NAMES[0] == "gamma_max" and FEATURE_NAMES[-1] == "mu42f"
        assert values[0] == fv.gamma_max
        assert values[3] == fv.p_symmetry
        assert FeatureVector.from_array(values).as_array().tolist() == values.tolist()

    def test_non_finite_vector_rejected(self):
        with pytest.raises(NonFiniteInputError):
            FeatureVector.from_array([0.0] * 8 + [float("nan")])

    def test_threshold_above_envelope(self, carrier):
        with pytest.raises(EmptyMaskError, match="At=1.5"):
            extract_all(carrier, FeatureConfig(amplitude_threshold=1.5))

    def test_failing_feature_is_named(self):
        w = realize(SchemeLabel.AM, SynthConfig(), 10.0, seed=3)
        an = instantaneous(w).an
        # keep only the single largest envelope sample
        cfg = FeatureConfig(amplitude_threshold=float(np.sort(an)[-2]))
        with pytest.raises(FeatureExtractionError) as info:
            extract_all(w, cfg)
        assert info.value.feature == "sigma_dp"
        assert isinstance(info.value.cause, InsufficientSamplesError)

    def test_batch_at_15_db_is_finite(self):
        waves = realize_batch(SCHEMES, [15.0], 50, SynthConfig(), base_seed=500, progress=False)
        pairs = extract_batch(waves, progress=False)
        assert len(pairs) == 550
        matrix = np.array([fv.as_array() for _, fv in pairs])
        assert np.all(np.isfinite(matrix))
        assert np.all(matrix[:, [0, 1, 2, 4, 5, 6, 7, 8]] >= 0)
        assert np.all(np.abs(matrix[:, 3]) <= 1)

    def test_batch_skips_zero_power(self, am_wave, caplog):
        silent = Waveform(np.zeros(am_wave.num_samples), am_wave.fs, am_wave.fc, SchemeLabel.AM, seed=77)
        with caplog.at_level("WARNING"):
            pairs = extract_batch([am_wave, silent], progress=False)
        assert len(pairs) == 1
        assert "seed 77" in caplog.text


def oracle_features(w, edge_trim=32, At=1.0):
    """All nine features from their defining formulas, with O(N^2) DFTs."""
    x = np.asarray(w.samples, dtype=np.float64)
    n = x.shape[0]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    spectrum = basis @ x

    h = np.zeros(n)
    h[0] = h[n // 2] = 1.0
    h[1 : n // 2] = 2.0
    z = (basis.conj() @ (spectrum * h)) / n

    phi = np.unwrap(np.angle(z))
    window = slice(edge_trim, n - edge_trim)
    a = np.abs(z)[window]
    an = a / a.mean()
    acn = an - 1.0
    mask = an > At

    linear = 2 * np.pi * w.fc * k / w.fs
    wrapped = np.mod(phi - linear + np.pi / 2, 2 * np.pi) - np.pi / 2
    phi_nl = wrapped[window] - wrapped[window].mean()
    f = np.zeros(n)
    f[1:-1] = (phi[2:] - phi[:-2]) / 2 * w.fs / (2 * np.pi)
    f = f[window]
    fn = (f - f.mean()) / w.fs

    length = acn.shape[0]
    m = np.arange(length)
    psd = np.abs(np.exp(-2j * np.pi * np.outer(m, m) / length) @ acn) ** 2
    fcn = int(round(w.fc * n / w.fs - 1))
    lower = np.sum(np.abs(spectrum[1 : fcn + 1]) ** 2)
    upper = np.sum(np.abs(spectrum[fcn + 2 : 2 * fcn + 2]) ** 2)

    return np.array(
        [
            psd.max() / length,
            masked_deviation(phi_nl[mask], phi_nl[mask]),
            masked_deviation(phi_nl[mask], np.abs(phi_nl[mask])),
            (lower - upper) / (lower + upper),
            masked_deviation(acn, np.abs(acn)),
            masked_deviation(fn[mask], np.abs(fn[mask])),
            masked_deviation(acn[mask], acn[mask]),
            np.mean(acn ** 4) / np.mean(acn ** 2) ** 2,
            np.mean(fn ** 4) / np.mean(fn ** 2) ** 2,
        ]
    )


def separated(first, second, spread=2.0):
    """Class means further apart than ``spread`` pooled standard deviations."""
    pooled = math.sqrt((np.var(first, ddof=1) + np.var(second, ddof=1)) / 2)
    return abs(np.mean(first) - np.mean(second)) > spread * pooled


class TestFeatureInvariants:
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_amplitude_scale_leaves_features_unchanged(self, scheme):
        w = realize(scheme, SynthConfig(), 15.0, seed=12)
        louder = replace(w, samples=w.samples * 10.0)
        np.testing.assert_allclose(
            extract_all(louder).as_array(), extract_all(w).as_array(), rtol=1e-9, atol=1e-12
        )

    @pytest.mark.parametrize("snr", [math.inf, 15.0])
    def test_lsb_and_usb_mirror(self, snr):
        for seed in range(10):
            lsb = extract_all(realize(SchemeLabel.LSB, SynthConfig(), snr, seed)).p_symmetry
            usb = extract_all(realize(SchemeLabel.USB, SynthConfig(), snr, seed)).p_symmetry
            assert lsb > 0.9
            assert lsb == pytest.approx(-usb, abs=0.05)

    def test_discriminators_separate_their_classes_at_15_db(self):
        schemes = [SchemeLabel.AM, SchemeLabel.FM, SchemeLabel.ASK2, SchemeLabel.ASK4, SchemeLabel.PSK2]
        waves = realize_batch(schemes, [15.0], 50, SynthConfig(), base_seed=3000, progress=False)
        by_class = {}
        for w, fv in extract_batch(waves, progress=False):
            by_class.setdefault(w.scheme, []).append(fv)

        def column(scheme, name):
            return np.array([getattr(fv, name) for fv in by_class[scheme]])

        assert all(len(vectors) == 50 for vectors in by_class.values())
        assert separated(column(SchemeLabel.PSK2, "sigma_dp"), column(SchemeLabel.ASK2, "sigma_dp"))
        assert separated(column(SchemeLabel.ASK2, "sigma_a"), column(SchemeLabel.ASK4, "sigma_a"))
        assert separated(column(SchemeLabel.AM, "mu42_a"), column(SchemeLabel.FM, "mu42_a"))
        assert separated(column(SchemeLabel.FM, "mu42_f"), column(SchemeLabel.AM, "mu42_f"))

    def test_all_features_match_direct_formulas(self, rng):
        cfg = SynthConfig(num_samples=256)
        for seed in range(100):
            scheme = SCHEMES[seed % len(SCHEMES)]
            w = realize(scheme, cfg, float(rng.uniform(5.0, 25.0)), seed)
            np.testing.assert_allclose(
                extract_all(w).as_array(), oracle_features(w), rtol=1e-9, atol=1e-12,
                err_msg=f"{scheme.value} seed {seed}",
            )
