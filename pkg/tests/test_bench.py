import csv
import gzip
import os
import shlex
import sys

import numpy as np
import pytest
from PIL import Image

from mldict import bench
from mldict.bench import (
    BenchRow, RoundTripError, aggregate, bench_image, format_table, parse_codec, run_corpus,
    write_csv,
)
from mldict.codec import encode
from mldict.errors import InputError
from mldict.imgproc import BinaryImage, save_pbm, write_pbm

from conftest import make_dicts, random_image

GZIP = (f"{shlex.quote(sys.executable)} -c "
        "\"import gzip,sys; open(sys.argv[2],'wb').write(gzip.compress(open(sys.argv[1],'rb').read(), mtime=0))\" "
        "{in} {out}")

DICTS = make_dicts(L16={"0" * 64: 100}, L8={"0" * 16: 50}, L4={"0000": 40, "FFFF": 20})


@pytest.fixture
def corpus(tmp_path, rng):
    d = tmp_path / "corpus"
    d.mkdir()
    save_pbm(BinaryImage(np.zeros((64, 64), np.uint8)), d / "a_blank.pbm")
    save_pbm(random_image(rng, 40, 50, p=0.1), d / "b_sparse.pbm")
    gray = (rng.random((30, 30)) * 255).astype(np.uint8)
    Image.fromarray(gray).save(d / "c_gray.png")
    (d / "notes.txt").write_text("not an image")
    return d


def test_no_codecs(corpus):
    rows, means = run_corpus(str(corpus), DICTS)
    assert [r.image for r in rows] == ["a_blank.pbm", "b_sparse.pbm", "c_gray.png"]
    assert set(means) == {"proposed"}
    assert means["proposed"] == pytest.approx(np.mean([r.proposed_ratio for r in rows]))
    table = format_table(rows, [], means)
    assert table.splitlines()[0].split() == ["image", "pixels", "proposed", "best"]
    assert len(table.splitlines()) == 5


def test_ratio_cells_follow_definition(corpus):
    rows, _ = run_corpus(str(corpus), DICTS)
    for r in rows:
        assert r.proposed_ratio == r.pixels / (8 * r.proposed_bytes)
    assert rows[0].pixels == 64 * 64


def test_external_codec(corpus):
    codecs = dict([parse_codec(f"gz={GZIP}")])
    rows, means = run_corpus(str(corpus), DICTS, codecs)
    row = rows[0]
    expected = len(gzip.compress(write_pbm(BinaryImage(np.zeros((64, 64), np.uint8))), mtime=0))
    assert row.external["gz"] == expected
    assert row.ratios()["gz"] == 4096 / (8 * expected)
    assert means["gz"] is not None


def test_blank_row_beats_baseline(corpus):
    rows, _ = run_corpus(str(corpus), DICTS)
    blank = rows[0]
    # raw packed PBM body is already the 1 bpp baseline
    assert blank.proposed_bytes < len(write_pbm(BinaryImage(np.zeros((64, 64), np.uint8))))
    assert blank.proposed_ratio > 1


def test_missing_and_failing_tools(corpus, caplog):
    codecs = {"nope": "definitely-not-a-real-binary-xyz {in} {out}",
              "fails": f"{shlex.quote(sys.executable)} -c \"raise SystemExit(3)\" {{in}} {{out}}"}
    rows, means = run_corpus(str(corpus), DICTS, codecs)
    assert all(r.external == {"nope": None, "fails": None} for r in rows)
    assert means["nope"] is None and means["fails"] is None
    assert "failed to run" in caplog.text and "exited with 3" in caplog.text
    assert all(r.best() == "proposed" for r in rows)


def test_round_trip_failure_aborts(corpus, monkeypatch):
    real = bench.encode

    def tampered(img, dicts):
        c = real(img, dicts)
        c.payload = bytes([c.payload[0] ^ 0x80]) + c.payload[1:]
        return c

    monkeypatch.setattr(bench, "encode", tampered)
    with pytest.raises(RoundTripError):
        run_corpus(str(corpus), DICTS)


def test_wrong_pixels_abort(corpus, monkeypatch):
    monkeypatch.setattr(bench, "encode",
                        lambda img, dicts: encode(BinaryImage(1 - img.bits), dicts))
    with pytest.raises(RoundTripError):
        bench_image(str(corpus / "a_blank.pbm"), DICTS)


def test_best_marker_matches_brute_force():
    rows = [BenchRow("x", 800, 10, {"a": 5, "b": None}),
            BenchRow("y", 800, 4, {"a": 5, "b": 8})]
    for r in rows:
        vals = {"proposed": 800 / (8 * r.proposed_bytes)}
        vals.update({k: 800 / (8 * v) for k, v in r.external.items() if v})
        assert r.best() == max(vals, key=vals.get)
    lines = format_table(rows, ["a", "b"]).splitlines()
    assert "20.00*" in lines[1] and "25.00*" in lines[2]


def test_aggregate_from_csv(corpus, tmp_path):
    codecs = {"gz": GZIP}
    rows, means = run_corpus(str(corpus), DICTS, codecs)
    path = tmp_path / "bench.csv"
    write_csv(rows, codecs, path)
    with open(path, newline="") as f:
        table = list(csv.DictReader(f))
    assert list(table[0]) == ["image", "pixels", "proposed_bytes", "proposed_ratio",
                              "gz_bytes", "gz_ratio", "best"]
    for name in ("proposed", "gz"):
        vals = [int(r["pixels"]) / (8 * int(r[f"{name}_bytes"])) for r in table]
        assert means[name] == pytest.approx(sum(vals) / len(vals), rel=1e-12)


def test_constant_corpus_mean(tmp_path, rng):
    img = random_image(rng, 48, 48, p=0.2)
    for i in range(3):
        save_pbm(img, tmp_path / f"img{i}.pbm")
    rows, means = run_corpus(str(tmp_path), DICTS)
    assert len(rows) == 3
    assert means["proposed"] == pytest.approx(rows[0].proposed_ratio, rel=1e-12)
    assert aggregate(rows)["proposed"] == means["proposed"]


def test_parse_codec():
    assert parse_codec("png=optipng {in} -out {out}") == ("png", "optipng {in} -out {out}")
    for bad in ("png", "=cmd", "p g=cmd", "png="):
        with pytest.raises(InputError):
            parse_codec(bad)
