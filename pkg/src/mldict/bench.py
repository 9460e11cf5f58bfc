"""Corpus evaluation: binarize, encode, verify, measure, tabulate.

External codecs are opaque command templates run on the binarized PBM;
``{in}`` and ``{out}`` are replaced by the input and output paths. A codec
that is missing or exits nonzero leaves an empty cell.
"""

import csv
import logging
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field

from .codec import decode, encode
from .errors import CorruptionError, InputError, MLDictError
from .imgproc import load_binary, write_pbm

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".pgm", ".ppm", ".pbm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".gif"}


class RoundTripError(CorruptionError):
    """The proposed codec failed to reproduce an image bit-exactly."""


@dataclass
class BenchRow:
    image: str
    pixels: int
    proposed_bytes: int
    external: dict = field(default_factory=dict)  # codec name -> bytes or None

    @property
    def proposed_ratio(self):
        return ratio(self.pixels, self.proposed_bytes)

    def ratios(self):
        out = {"proposed": self.proposed_ratio}
        for name, nbytes in self.external.items():
            out[name] = ratio(self.pixels, nbytes)
        return out

    def best(self):
        r = {k: v for k, v in self.ratios().items() if v is not None}
        return max(r, key=r.get)


def ratio(pixels, nbytes):
    if nbytes is None:
        return None
    return pixels / (8 * nbytes) if nbytes else float("inf")


def parse_codec(text):
    name, sep, template = text.partition("=")
    name = name.strip()
    if not sep or not name or not template.strip():
        raise InputError(f"codec must look like NAME=COMMAND, got {text!r}")
    if not name.replace("_", "").replace("-", "").isalnum():
        raise InputError(f"codec name {name!r} must be alphanumeric")
    return name, template.strip()


def list_images(directory):
    return sorted(
        os.path.join(directory, f) for f in os.listdir(directory)
        if os.path.splitext(f)[1].lower() in IMAGE_EXTENSIONS
        and os.path.isfile(os.path.join(directory, f)))


def run_external(template, in_path, out_path, timeout=300):
    """Output size in bytes, or None if the command is unavailable or fails."""
    argv = [a.replace("{in}", in_path).replace("{out}", out_path) for a in shlex.split(template)]
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout)
    except (OSError, subprocess.TimeoutExpired) as e:
        log.warning("codec command %r failed to run: %s", argv[0], e)
        return None
    if proc.returncode != 0:
        log.warning("codec command %r exited with %d", argv[0], proc.returncode)
        return None
    try:
        return os.path.getsize(out_path)
    except OSError:
        log.warning("codec command %r produced no output file", argv[0])
        return None


def bench_image(path, dicts, codecs=None, workdir=None):
    img = load_binary(path)
    data = encode(img, dicts).to_bytes()
    try:
        ok = decode(data, dicts) == img
    except MLDictError as e:
        raise RoundTripError(f"{path}: container failed to decode: {e}") from e
    if not ok:
        raise RoundTripError(f"{path}: decoded image differs from the original")
    row = BenchRow(os.path.basename(path), img.width * img.height, len(data))
    if codecs:
        with tempfile.TemporaryDirectory(dir=workdir) as tmp:
            pbm = os.path.join(tmp, "input.pbm")
            with open(pbm, "wb") as f:
                f.write(write_pbm(img))
            for name, template in codecs.items():
                row.external[name] = run_external(template, pbm, os.path.join(tmp, f"out.{name}"))
    return row


def run_corpus(directory, dicts, codecs=None):
    """Bench every image in ``directory`` (filename order).

    Returns (rows, means) where ``means`` maps each codec to the mean ratio over
    the rows it produced output for.
    """
    codecs = dict(codecs or {})
    rows = [bench_image(p, dicts, codecs) for p in list_images(directory)]
    return rows, aggregate(rows, codecs)


def aggregate(rows, codecs=()):
    means = {}
    for name in ["proposed", *codecs]:
        vals = [r.ratios().get(name) for r in rows]
        vals = [v for v in vals if v is not None]
        means[name] = sum(vals) / len(vals) if vals else None
    return means


def columns(codecs):
    cols = ["image", "pixels", "proposed_bytes", "proposed_ratio"]
    for name in codecs:
        cols += [f"{name}_bytes", f"{name}_ratio"]
    return cols + ["best"]


def _cells(row, codecs):
    cells = [row.image, str(row.pixels), str(row.proposed_bytes), f"{row.proposed_ratio:.4f}"]
    for name in codecs:
        nbytes = row.external.get(name)
        cells += ["", ""] if nbytes is None else [str(nbytes), f"{ratio(row.pixels, nbytes):.4f}"]
    return cells + [row.best()]


def write_csv(rows, codecs, path):
    codecs = list(codecs)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns(codecs))
        for row in rows:
            w.writerow(_cells(row, codecs))


def format_table(rows, codecs, means=None):
    codecs = list(codecs)
    header = ["image", "pixels", "proposed"] + codecs + ["best"]
    body = []
    for row in rows:
        r = row.ratios()
        line = [row.image, str(row.pixels)]
        for name in ["proposed"] + codecs:
            v = r.get(name)
            cell = "" if v is None else f"{v:.2f}"
            line.append(cell + ("*" if name == row.best() else ""))
        body.append(line + [row.best()])
    if means is not None:
        body.append(["mean", ""] + ["" if means.get(n) is None else f"{means[n]:.2f}"
                                    for n in ["proposed"] + codecs] + [""])
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    fmt = lambda cells: "  ".join(c.rjust(w) if i else c.ljust(w)
                                  for i, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([fmt(header)] + [fmt(b) for b in body])
