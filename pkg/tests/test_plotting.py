import logging
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from bvpseg.plotting import feature_filename, plot_feature, plot_window_sweep, write_all

SVG = "{http://www.w3.org/2000/svg}"


def curves(methods=("raw", "baseline", "segmentation", "oracle"), n=3, sem=0.01):
    rows = []
    for m in methods:
        for b, snr in enumerate((float("inf"), 0.8, 0.4, 0.1)):
            rows.append({"method": m, "feature": "time.std", "bucket": b * 10, "snr_center": snr,
                         "mean": 0.1 * b, "sem": sem, "n": n, "empty": False})
    return pd.DataFrame(rows)


def groups(path):
    root = ET.parse(path).getroot()
    return {g.get("id") for g in root.iter(f"{SVG}g") if g.get("id")}


def test_all_methods_have_line_and_band(tmp_path):
    p = tmp_path / "f.svg"
    drawn = plot_feature(curves(), "time.std", p)
    assert drawn == ["raw", "baseline", "segmentation", "oracle"]
    ids = groups(p)
    for m in drawn:
        assert f"line-{m}" in ids and f"band-{m}" in ids
    text = p.read_text()
    assert "4th-order Butterworth" in text and "raw noisy signal" in text
    assert "SNR" in text and "relative difference" in text


def test_single_method(tmp_path, caplog):
    p = tmp_path / "f.svg"
    with caplog.at_level(logging.WARNING):
        drawn = plot_feature(curves(methods=("raw",)), "time.std", p)
    assert drawn == ["raw"]
    assert "baseline" in caplog.text
    ids = groups(p)
    assert {i for i in ids if i.startswith("line-")} == {"line-raw"}


def test_band_omitted_without_sem(tmp_path):
    p = tmp_path / "f.svg"
    plot_feature(curves(methods=("raw",), n=1, sem=np.nan), "time.std", p)
    ids = groups(p)
    assert "line-raw" in ids and "band-raw" not in ids


def test_empty_buckets_skipped(tmp_path):
    c = curves(methods=("raw",))
    c.loc[c["bucket"] == 20, ["mean", "sem", "n", "empty"]] = [np.nan, np.nan, 0, True]
    plot_feature(c, "time.std", tmp_path / "f.svg")
    ET.parse(tmp_path / "f.svg")


def test_deterministic_bytes(tmp_path):
    plot_feature(curves(), "time.std", tmp_path / "a.svg")
    plot_feature(curves(), "time.std", tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_linear_axis_differs(tmp_path):
    plot_feature(curves(), "time.std", tmp_path / "log.svg")
    plot_feature(curves(), "time.std", tmp_path / "lin.svg", log_x=False)
    assert (tmp_path / "log.svg").read_bytes() != (tmp_path / "lin.svg").read_bytes()


def test_window_sweep_plot(tmp_path):
    by_size = {w: curves(methods=("segmentation",)) for w in (2.0, 5.0, 10.0)}
    p = tmp_path / "w.svg"
    plot_window_sweep(by_size, "time.std", p)
    ids = groups(p)
    assert {"line-w2", "line-w5", "line-w10"} <= ids


def test_write_all(tmp_path):
    paths = write_all(curves(), ["time.std"], tmp_path / "figs")
    assert [p.name for p in paths] == [feature_filename("time.std")] == ["time_std.svg"]
    assert paths[0].exists()
