"""Train on the bundled sample corpus, then print dictionary statistics and a
ratio table. Optional external codecs are passed as NAME=CMD arguments.

    python3 scripts/sample_experiment.py [--out results] ["png=optipng {in} -out {out}" ...]
"""

import argparse
import os
import sys

from mldict import analysis, bench
from mldict.dictionary import DictionarySet, LEVELS, PrunePolicy, prune, train
from mldict.imgproc import load_binary

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORPUS = os.path.join(ROOT, "data", "sample_corpus")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("codecs", nargs="*")
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mass-fraction", type=float, default=0.99)
    args = p.parse_args(argv)

    paths = bench.list_images(CORPUS)
    trainer = train([load_binary(x) for x in paths], seed=args.seed)
    policy = PrunePolicy(mass_fraction=args.mass_fraction)
    dicts = DictionarySet({n: prune(d, policy) for n, d in trainer.dicts.items()})
    os.makedirs(args.out, exist_ok=True)
    dicts.save(os.path.join(args.out, "dicts"))

    for n in LEVELS:
        raw, kept = trainer.dicts[n], dicts.originals[n]
        mon = trainer.monitors[n]
        print(f"L{n:<2} raw={len(raw):<7} kept={len(kept):<6} "
              f"top90={analysis.top_k_for_mass(raw, 0.9):<6} "
              f"chunks={len(mon)} converged={mon.check().converged}")
        analysis.export_convergence(mon, os.path.join(args.out, f"convergence_L{n}.csv"))
        analysis.export_mass_curve(raw, os.path.join(args.out, f"mass_L{n}.csv"))
    d2 = trainer.dicts[2]
    print("level-2 ranking:", " ".join(f"{k}:{c / d2.total:.4f}" for k, c in d2.ranked()))

    codecs = dict(bench.parse_codec(c) for c in args.codecs)
    rows, means = bench.run_corpus(CORPUS, dicts, codecs)
    bench.write_csv(rows, codecs, os.path.join(args.out, "bench.csv"))
    print(bench.format_table(rows, codecs, means))
    return 0


if __name__ == "__main__":
    sys.exit(main())
