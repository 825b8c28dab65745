import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvpseg.errors import (ConfigExceedsSignal, CutoffAboveNyquist, IncrementOutOfRange,
                           InvalidConfig, LengthMismatch)
from bvpseg.noise import (CLEAN_MARKER, NoiseConfig, NoiseVersion, band_limited_noise, compute_snr,
                          corrupt, corrupt_sweep, format_snr, parse_snr, with_version)
from bvpseg.signal import Signal, SynthesisConfig, synthesize_bvp


@pytest.fixture(scope="module")
def short_clean():
    return synthesize_bvp(SynthesisConfig(duration_s=30), seed=0)


def short_cfg(**kw):
    return NoiseConfig(substitution_s=25.0, **kw)


def test_default_increment_count(clean_bvp):
    cfg = NoiseConfig()
    assert cfg.segment_len(64) == 32
    assert cfg.increments(64) == 550


def test_zero_increments_is_identity(clean_bvp):
    v = corrupt(clean_bvp, NoiseConfig(), 0, 1)
    assert np.array_equal(v.signal.samples, clean_bvp.samples)
    assert not v.mask.any()
    assert compute_snr(clean_bvp, v) == float("inf")


def test_full_v1_substitution_covers_275_of_300_s(clean_bvp):
    v = corrupt(clean_bvp, NoiseConfig(version="V1"), 550, 1)
    assert v.mask.sum() == 275 * 64
    assert v.mask[:275 * 64].all() and not v.mask[275 * 64:].any()
    assert np.array_equal(v.signal.samples[275 * 64:], clean_bvp.samples[275 * 64:])


def test_v1_blocks_are_cumulative_and_prefix(short_clean):
    cfg = short_cfg(version="V1")
    states = list(corrupt_sweep(short_clean, cfg, [3, 10, 25], 7))
    for v in states:
        n = v.increment_index * 32
        assert v.mask.sum() == n and v.mask[:n].all()
    # earlier substituted blocks keep their values
    np.testing.assert_array_equal(states[0].signal.samples[:96], states[2].signal.samples[:96])


def test_sweep_matches_separate_calls(short_clean):
    cfg = short_cfg()
    swept = list(corrupt_sweep(short_clean, cfg, [0, 5, 17, 50], 3))
    for v in swept:
        single = corrupt(short_clean, cfg, v.increment_index, 3)
        np.testing.assert_array_equal(v.signal.samples, single.signal.samples)
        np.testing.assert_array_equal(v.mask, single.mask)


def test_versions_share_substituted_blocks(short_clean):
    v1 = corrupt(short_clean, short_cfg(version="V1"), 20, 11)
    v3 = corrupt(short_clean, short_cfg(version="V3"), 20, 11)
    blocks1 = v1.signal.samples[:640]
    # V3 additions may land inside substituted blocks, so compare where V3 adds nothing extra
    untouched = ~(v3.mask & ~v1.mask)[:640]
    assert v3.mask[:640].all()
    assert np.array_equal(v1.mask[:640], v3.mask[:640])
    assert np.mean(blocks1[untouched] == v3.signal.samples[:640][untouched]) > 0.5


def test_versions_nest(short_clean):
    masks = {ver: corrupt(short_clean, short_cfg(version=ver), 40, 5).mask for ver in ("V1", "V2", "V3")}
    assert np.all(masks["V1"] <= masks["V2"])
    assert np.all(masks["V2"] <= masks["V3"])
    assert masks["V2"].sum() > masks["V1"].sum()


def test_mask_marks_every_changed_sample(short_clean):
    for ver in ("V1", "V2", "V3"):
        v = corrupt(short_clean, short_cfg(version=ver, impulse_prob=1.0), 30, 9)
        changed = v.signal.samples != short_clean.samples
        assert np.all(v.mask[changed])


def test_impulses_are_large(short_clean):
    v2 = corrupt(short_clean, short_cfg(version="V2"), 50, 4)
    v3 = corrupt(short_clean, short_cfg(version="V3", impulse_prob=1.0), 50, 4)
    jumps = np.abs(v3.signal.samples - v2.signal.samples)
    assert 0 < np.count_nonzero(jumps) <= 50
    np.testing.assert_allclose(jumps[jumps > 0], 5.0)


def test_determinism(short_clean):
    a = corrupt(short_clean, short_cfg(), 33, 99)
    b = corrupt(short_clean, short_cfg(), 33, np.random.default_rng(99))
    assert np.array_equal(a.signal.samples, b.signal.samples)
    assert np.array_equal(a.mask, b.mask)


def test_band_limited_noise_energy_above_18_hz():
    x = band_limited_noise(6400, 20.0, 1.0, 64.0, 0)
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, 1 / 64)
    assert power[freqs > 18].sum() / power.sum() >= 0.95


def test_band_limited_noise_exact_std():
    for std in (1.0, 0.25, 3.0):
        assert band_limited_noise(6400, 20.0, std, 64.0, 1).std() == pytest.approx(std, abs=1e-9)


def test_band_limited_noise_cutoff_error():
    with pytest.raises(CutoffAboveNyquist):
        band_limited_noise(100, 40.0, 1.0, 64.0, 0)


def test_snr_definition():
    clean = Signal(np.array([0.5, -0.5, 0.5, -0.5]), 64)
    noisy = Signal(clean.samples + np.array([1.0, -1.0, 1.0, -1.0]), 64)
    assert compute_snr(clean, noisy) == pytest.approx(0.5)
    assert compute_snr(clean, clean) == float("inf")
    with pytest.raises(LengthMismatch):
        compute_snr(clean, Signal(np.zeros(3), 64))


def test_snr_marker_round_trip():
    assert format_snr(float("inf")) == CLEAN_MARKER
    assert parse_snr(CLEAN_MARKER) == float("inf")
    assert parse_snr(format_snr(0.123456789)) == 0.123456789


def test_snr_decreases_along_sweep(clean_bvp):
    snrs = [compute_snr(clean_bvp, v) for v in corrupt_sweep(clean_bvp, NoiseConfig(), [10, 50, 150, 550], 0)]
    assert all(a > b for a, b in zip(snrs, snrs[1:]))
    assert snrs[0] > 0.75 * 0.9
    assert snrs[-1] < 0.10 * 1.1


def test_errors(short_clean):
    with pytest.raises(IncrementOutOfRange):
        corrupt(short_clean, short_cfg(), 51, 0)
    with pytest.raises(IncrementOutOfRange):
        corrupt(short_clean, short_cfg(), -1, 0)
    with pytest.raises(ConfigExceedsSignal):
        corrupt(short_clean, NoiseConfig(), 1, 0)
    with pytest.raises(InvalidConfig):
        corrupt(short_clean, short_cfg(impulse_prob=1.5), 1, 0)
    with pytest.raises(CutoffAboveNyquist):
        corrupt(short_clean, short_cfg(hf_cutoff_hz=40.0), 1, 0)
    with pytest.raises(ValueError):
        NoiseConfig(version="V4")


def test_with_version_and_serialization():
    cfg = with_version(NoiseConfig(), "V2")
    assert cfg.version is NoiseVersion.V2
    d = cfg.to_dict()
    assert d["version"] == "V2"
    assert NoiseConfig(**d) == cfg


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 50), st.integers(0, 2**32 - 1), st.sampled_from(["V1", "V2", "V3"]))
def test_mask_properties(s, seed, version):
    clean = synthesize_bvp(SynthesisConfig(duration_s=30), seed=0)
    v = corrupt(clean, short_cfg(version=version), s, seed)
    assert v.mask[:32 * s].all()
    assert np.array_equal(v.signal.samples[~v.mask], clean.samples[~v.mask])
    if version == "V1":
        assert v.mask.sum() == 32 * s


def test_snr_rank_correlation_over_full_sweep(clean_bvp):
    from scipy.stats import spearmanr
    steps = list(range(10, 551, 10))
    snrs = [compute_snr(clean_bvp, v) for v in corrupt_sweep(clean_bvp, NoiseConfig(), steps, 0)]
    assert spearmanr(steps, snrs)[0] < -0.95


def test_white_draws_shared_across_versions(short_clean):
    # with the additive stages switched off, V3 consumes the stream exactly like V1
    v1 = corrupt(short_clean, short_cfg(version="V1"), 50, 21)
    v3 = corrupt(short_clean, short_cfg(version="V3", hf_noise_std=0.0, impulse_prob=0.0), 50, 21)
    assert np.array_equal(v1.signal.samples, v3.signal.samples)


def test_higher_versions_only_add_on_replaced_blocks(short_clean):
    v1 = corrupt(short_clean, short_cfg(version="V1"), 50, 21)
    v3 = corrupt(short_clean, short_cfg(version="V3"), 50, 21)
    diff = v3.signal.samples - v1.signal.samples
    # differences come only from bursts and impulses, which are zero-mean additions
    extra = v3.mask & ~v1.mask
    assert np.count_nonzero(diff[~v3.mask]) == 0
    assert np.count_nonzero(diff[extra]) == np.count_nonzero(extra)
