import dataclasses
import json

import numpy as np
import pandas as pd
import pytest

from bvpseg.errors import InvalidConfig, TargetOutOfRange
from bvpseg.experiment import (METHODS, RECORD_COLUMNS, RunConfig, aggregate, increment_snr,
                               iteration_rng, nearest_snr_slice, read_records, run_experiment,
                               run_iteration, segment_size_sweep, write_records, write_sidecar)
from bvpseg.features import FEATURE_IDS
from bvpseg.signal import SynthesisConfig

SMALL = RunConfig(synthesis=SynthesisConfig(jitter=0.01), iterations=2, increment_stride=110)


@pytest.fixture(scope="module")
def small_records():
    return run_experiment(SMALL)


def test_increment_grid():
    assert SMALL.increments(64) == [0, 110, 220, 330, 440, 550]
    assert RunConfig(increment_stride=100).increments(64)[-2:] == [500, 550]
    assert len(RunConfig().increments(64)) == 56


def test_cardinality(small_records):
    assert list(small_records.columns) == list(RECORD_COLUMNS)
    assert len(small_records) == 2 * 6 * 4 * 26
    missing = small_records[small_records["missing"]]
    assert missing["value"].isna().all() and missing["rel_diff"].isna().all()
    assert len(missing) % 26 == 0
    assert small_records.loc[~small_records["missing"], "value"].notna().all()


def test_record_order(small_records):
    first = small_records.iloc[:26 * 4]
    assert (first["s"] == 0).all() and (first["iteration"] == 0).all()
    assert list(first["method"].iloc[::26]) == list(METHODS)
    assert list(first["feature"].iloc[:26]) == list(FEATURE_IDS)


def test_uncorrupted_raw_is_exact(small_records):
    raw0 = small_records[(small_records["s"] == 0) & (small_records["method"] == "raw")]
    assert (raw0["rel_diff"] == 0.0).all()
    assert np.isinf(raw0["snr"]).all()


def test_snr_shared_across_methods(small_records):
    per = small_records.groupby(["iteration", "s"])["snr"].nunique()
    assert (per == 1).all()


def test_raw_std_error_grows_with_noise(small_records):
    curves = aggregate(small_records, absolute=True)
    c = curves[(curves["method"] == "raw") & (curves["feature"] == "time.std")]
    c = c[np.isfinite(c["snr_center"])].sort_values("snr_center")
    assert c["mean"].iloc[0] > c["mean"].iloc[-1]


def test_iteration_streams_are_independent():
    a = iteration_rng(0, 0).standard_normal(4)
    b = iteration_rng(0, 1).standard_normal(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, iteration_rng(0, 0).standard_normal(4))


def test_iteration_reproducible_alone(small_records):
    again = pd.DataFrame(run_iteration(SMALL, 1), columns=list(RECORD_COLUMNS))
    ref = small_records[small_records["iteration"] == 1].reset_index(drop=True)
    pd.testing.assert_frame_equal(again, ref, check_dtype=False)


def test_workers_do_not_change_results(small_records, tmp_path):
    par = run_experiment(SMALL, workers=2)
    write_records(small_records, tmp_path / "a.csv")
    write_records(par, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_records_round_trip(small_records, tmp_path):
    p = tmp_path / "r.csv"
    write_records(small_records, p)
    back = read_records(p)
    pd.testing.assert_frame_equal(back, small_records, check_dtype=False)
    assert "clean" in p.read_text().splitlines()[1]


def test_sidecar(tmp_path):
    write_sidecar(SMALL, tmp_path / "r.json", {"records": 5})
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["records"] == 5
    assert RunConfig.from_dict(d["config"]) == SMALL


def test_config_round_trip_and_validation(tmp_path):
    d = SMALL.to_dict()
    assert RunConfig.from_dict(json.loads(json.dumps(d))) == SMALL
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({**d, "iterations": 1})
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({**d, "bogus": 1})
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({**d, "noise": {**d["noise"], "bogus": 1}})
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({**d, "methods": ["raw", "magic"]})
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InvalidConfig):
        RunConfig.from_json(p)


def toy_records(rel_diffs_by_s, snr_by_s):
    rows = []
    for s, values in rel_diffs_by_s.items():
        for it, v in enumerate(values):
            rows.append((it, s, snr_by_s[s], "raw", "time.avg", v, v, False, np.isnan(v)))
    return pd.DataFrame(rows, columns=list(RECORD_COLUMNS))


def test_aggregate_mean_and_sem():
    rec = toy_records({10: [0.1, 0.3]}, {10: 0.5})
    row = aggregate(rec).iloc[0]
    assert row["mean"] == pytest.approx(0.2)
    assert row["sem"] == pytest.approx(np.std([0.1, 0.3], ddof=1) / np.sqrt(2))
    assert row["n"] == 2 and not row["empty"]


def test_aggregate_empty_and_single():
    rec = toy_records({10: [np.nan, np.nan], 20: [0.4, np.nan]}, {10: 0.5, 20: 0.3})
    out = aggregate(rec).set_index("bucket")
    assert out.loc[10, "n"] == 0 and out.loc[10, "empty"]
    assert out.loc[20, "n"] == 1 and np.isnan(out.loc[20, "sem"])


def test_aggregate_snr_grid():
    rec = toy_records({10: [0.1, 0.2], 20: [0.3, 0.5], 30: [0.7, 0.9]}, {10: 0.8, 20: 0.55, 30: 0.2})
    out = aggregate(rec, bucketing=[0.0, 0.5, 1.0])
    means = dict(zip(out["bucket"], out["mean"]))
    assert means[1] == pytest.approx(0.8)
    assert means[2] == pytest.approx(0.275)


def test_nearest_slice():
    rec = toy_records({10: [0, 0], 20: [0, 0], 30: [0, 0]}, {10: 0.53, 20: 0.48, 30: 0.2})
    sl = nearest_snr_slice(rec, [0.5, 0.25])
    assert sl[0.5][0] == 20
    assert sl[0.25][0] == 30
    with pytest.raises(TargetOutOfRange):
        nearest_snr_slice(rec, [5.0])


def test_nearest_slice_tie_prefers_smaller_increment():
    rec = toy_records({10: [0, 0], 20: [0, 0]}, {10: 0.6, 20: 0.4})
    assert nearest_snr_slice(rec, [0.5])[0.5][0] == 10


def test_increment_snr_ignores_methods(small_records):
    snr = increment_snr(small_records)
    assert list(snr.index) == [0, 110, 220, 330, 440, 550]
    assert np.isinf(snr[0])
    assert np.all(np.diff(snr.to_numpy()[1:]) < 0)


def test_segment_size_sweep_cardinality():
    cfg = dataclasses.replace(SMALL, synthesis=SynthesisConfig(duration_s=60, jitter=0.01),
                              noise=dataclasses.replace(SMALL.noise, substitution_s=55.0))
    df = segment_size_sweep(cfg, [2, 3, 5, 8, 10])
    assert sorted(df["window_s"].unique()) == [2, 3, 5, 8, 10]
    assert set(df["method"]) == {"segmentation"}
    per = df.groupby("window_s").size()
    assert (per == 2 * len(cfg.increments(64)) * 26).all()


def test_baseline_at_zero_noise_is_finite(small_records):
    base0 = small_records[(small_records["s"] == 0) & (small_records["method"] == "baseline")]
    assert np.isfinite(base0["rel_diff"]).all()
    assert (base0["rel_diff"] != 0).any()


def test_bucket_centres_decrease(small_records):
    c = aggregate(small_records)
    raw = c[(c["method"] == "raw") & (c["feature"] == "time.avg")].sort_values("bucket")
    assert np.all(np.diff(raw["snr_center"].to_numpy()[1:]) < 0)


def test_five_second_sweep_matches_main_run(small_records):
    sweep = segment_size_sweep(SMALL, [5.0])
    main_seg = small_records[small_records["method"] == "segmentation"].reset_index(drop=True)
    pd.testing.assert_frame_equal(sweep.drop(columns="window_s"), main_seg)


def test_oracle_dominates_on_average_under_v1():
    cfg = dataclasses.replace(RunConfig.from_dict(SMALL.to_dict()), iterations=20, increment_stride=10,
                              methods=("segmentation", "oracle"),
                              noise=dataclasses.replace(SMALL.noise, version="V1"))
    rec = run_experiment(cfg)
    rec = rec[~rec["missing"] & np.isfinite(rec["snr"])]
    for f in ("time.avg", "time.med", "time.std"):
        sub = rec[rec["feature"] == f]
        means = sub.assign(a=sub["rel_diff"].abs()).groupby("method")["a"].mean()
        assert means["oracle"] <= means["segmentation"], f
