"""``mldict`` command line: train | encode | decode | stats | bench | inspect.

Exit codes: 0 success, 1 unexpected failure, 2 input error, 3 format error,
4 corruption, 5 wrong dictionary.
"""

import argparse
import logging
import os
import sys

from . import analysis, bench
from .codec import Container, compression_ratio, decode, encode
from .config import load_config
from .dictionary import LEVELS, DICT_MAGIC, Dictionary, DictionarySet, Trainer, prune
from .errors import InputError, MLDictError
from .imgproc import load_binary, save_pbm
from .patchkey import format_key

log = logging.getLogger("mldict")

EXIT_OK, EXIT_FAILURE = 0, 1


def _config(args):
    codecs = dict(bench.parse_codec(c) for c in args.codec) if args.codec else None
    return load_config(args.config, dicts=args.dicts, seed=args.seed, chunk_size=args.chunk_size,
                       mass_fraction=args.mass_fraction, max_entries=args.max_entries,
                       codecs=codecs)


def cmd_train(args, cfg, out=sys.stdout):
    trainer = Trainer(seed=cfg.seed, chunk_size=cfg.chunk_size, track=cfg.track,
                      epsilon=cfg.epsilon,
                      tags=[os.path.basename(os.path.normpath(d)) for d in args.corpus])
    used = skipped = 0
    for directory in args.corpus:
        if not os.path.isdir(directory):
            raise InputError(f"corpus directory {directory} does not exist")
        for path in bench.list_images(directory):
            try:
                img = load_binary(path)
            except (OSError, ValueError, MLDictError) as e:
                log.warning("skipping %s: %s", path, e)
                skipped += 1
                continue
            trainer.ingest(img)
            used += 1
        # one shuffle + chunking pass per directory
        trainer.flush()
    if used == 0:
        raise InputError("no usable images in the corpus")
    raw = trainer.finalize()
    policy = cfg.prune_policy()
    dset = DictionarySet({n: prune(d, policy) for n, d in raw.items()})
    target = args.out or cfg.dicts
    dset.save(target)
    for n, mon in trainer.monitors.items():
        analysis.export_convergence(mon, os.path.join(target, f"convergence_L{n}.csv"))

    print(f"trained on {used} images ({skipped} skipped); dictionaries in {target}", file=out)
    print(f"manifest {dset.manifest_hash.hex()}", file=out)
    for n in LEVELS:
        d = dset.originals[n]
        mon = trainer.monitors.get(n)
        status = "no samples"
        if mon is not None:
            state = mon.check()
            first = mon.first_converged()
            status = {None: "undetermined", True: "converged", False: "not converged"}[state.converged]
            if first is not None:
                status += f" (first at chunk {first})"
            status += f", {len(mon)} chunks"
        top90 = analysis.top_k_for_mass(d, 0.9) if len(d) else 0
        print(f"  L{n:<2} entries={len(d):<8} raw={len(raw[n]):<8} top90={top90:<6} {status}",
              file=out)
    return EXIT_OK


def cmd_encode(args, cfg, out=sys.stdout):
    dset = DictionarySet.load(cfg.dicts)
    img = load_binary(args.input)
    data = encode(img, dset).to_bytes()
    target = args.out or os.path.splitext(args.input)[0] + ".mlbc"
    with open(target, "wb") as f:
        f.write(data)
    print(f"{target}: {len(data)} bytes, ratio {compression_ratio(img, data):.4f}", file=out)
    return EXIT_OK


def cmd_decode(args, cfg, out=sys.stdout):
    dset = DictionarySet.load(cfg.dicts)
    with open(args.input, "rb") as f:
        data = f.read()
    img = decode(data, dset)
    target = args.out or os.path.splitext(args.input)[0] + ".pbm"
    save_pbm(img, target)
    print(f"{target}: {img.width}x{img.height}", file=out)
    return EXIT_OK


def cmd_stats(args, cfg, out=sys.stdout):
    dset = DictionarySet.load(cfg.dicts)
    target = args.out or cfg.dicts
    os.makedirs(target, exist_ok=True)
    for n in LEVELS:
        d = dset.originals[n]
        if not len(d):
            print(f"L{n}: empty", file=out)
            continue
        hist = analysis.log_histogram(d, bins=args.bins)
        analysis.export_histogram(hist, os.path.join(target, f"histogram_L{n}.csv"))
        analysis.export_mass_curve(d, os.path.join(target, f"mass_L{n}.csv"))
        ks = {f: analysis.top_k_for_mass(d, f) for f in (0.5, 0.9, 0.95, 0.99)}
        top = ", ".join(f"{format_key(k)}={c / d.total:.5f}" for k, c in d.ranked()[:2])
        print(f"L{n}: entries={len(d)} total={d.total} "
              + " ".join(f"top{int(f * 100)}={k}" for f, k in ks.items()) + f" head: {top}",
              file=out)
    return EXIT_OK


def cmd_bench(args, cfg, out=sys.stdout):
    dset = DictionarySet.load(cfg.dicts)
    rows, means = bench.run_corpus(args.corpus, dset, cfg.codecs)
    if args.out:
        bench.write_csv(rows, cfg.codecs, args.out)
    print(bench.format_table(rows, cfg.codecs, means), file=out)
    return EXIT_OK


def cmd_inspect(args, cfg, out=sys.stdout):
    path = args.input
    if os.path.isdir(path):
        dset = DictionarySet.load(path)
        print(f"manifest {dset.manifest_hash.hex()}", file=out)
        for n in LEVELS:
            d = dset.originals[n]
            print(f"  L{n}: {len(d)} entries, total {d.total}, sha256 {dset.file_hashes[n]}", file=out)
        return EXIT_OK
    with open(path, "rb") as f:
        data = f.read()
    if data.startswith(DICT_MAGIC):
        d = Dictionary.from_bytes(data)
        print(f"level {d.level}: {len(d)} entries, total {d.total}, meta {d.meta}", file=out)
        for rank, (key, c) in enumerate(d.ranked()[:args.top]):
            print(f"  {rank:>6} {format_key(key)} {c} {c / d.total:.6g}", file=out)
        return EXIT_OK
    c = Container.from_bytes(data)
    print(f"container v{c.version}: {c.orig_width}x{c.orig_height}, {len(data)} bytes, "
          f"payload {c.payload_bits} bits, manifest {c.manifest_hash.hex()}", file=out)
    dset = None
    if args.dicts or os.path.isdir(cfg.dicts):
        dset = DictionarySet.load(cfg.dicts)
    for n, entries in c.tables.items():
        print(f"  L{n}: {len(entries)} symbols", file=out)
        if dset is not None and dset.manifest_hash == c.manifest_hash and entries:
            book = c.codebooks(dset)[n]
            for sym, length, code in list(zip(book.symbols, book.lengths, book.codes))[:args.top]:
                label = sym if sym == "ESC" else format_key(sym)
                print(f"    {label} {code:0{length}b}", file=out)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train, "encode": cmd_encode, "decode": cmd_decode,
    "stats": cmd_stats, "bench": cmd_bench, "inspect": cmd_inspect,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file; flags override it")
    common.add_argument("--dicts", help="dictionary directory (default: dicts)")
    common.add_argument("--seed", type=int)
    common.add_argument("--chunk-size", type=int)
    common.add_argument("--mass-fraction", type=float)
    common.add_argument("--max-entries", type=int)
    common.add_argument("--codec", action="append", metavar="NAME=CMDTEMPLATE",
                        help="external codec, {in}/{out} are substituted (repeatable)")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mldict", description="Multi-level dictionary binary image codec")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", parents=[common], help="learn dictionaries from image directories")
    t.add_argument("corpus", nargs="+")
    e = sub.add_parser("encode", parents=[common], help="compress an image")
    e.add_argument("input")
    d = sub.add_parser("decode", parents=[common], help="decompress to PBM")
    d.add_argument("input")
    s = sub.add_parser("stats", parents=[common], help="histogram and mass-curve CSVs")
    s.add_argument("--bins", type=int, default=analysis.DEFAULT_BINS)
    b = sub.add_parser("bench", parents=[common], help="compression ratio table over a corpus")
    b.add_argument("corpus")
    i = sub.add_parser("inspect", parents=[common], help="describe a container, dictionary or set")
    i.add_argument("input")
    i.add_argument("--top", type=int, default=10)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg, out=out)
    except MLDictError as e:
        print(f"mldict: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"mldict: {e}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
