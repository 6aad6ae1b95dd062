"""Per-iteration time of the pure-Python and compiled kernels.

    python3 benchmarks/bench_backends.py --tokens 3000 --iterations 3

Both backends follow the same random streams, so the script also checks that
they end in the same tag assignment.
"""

import argparse
import statistics
import sys

from lexhmm.backend import have_compiled
from lexhmm.inference import SamplerConfig, run_training
from lexhmm.synthetic import zipf_corpus

MODES = [("lex", "uniform"), ("lex", "charlm"), ("pyp-type", "uniform"), ("local", "uniform")]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tokens", type=int, default=3000)
    p.add_argument("--tags", type=int, default=12)
    p.add_argument("--types-per-tag", type=int, default=40)
    p.add_argument("--particles", type=int, default=10)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not have_compiled():
        sys.exit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    corpus = zipf_corpus(args.tokens, n_tags=args.tags, types_per_tag=args.types_per_tag, seed=args.seed)
    print(f"{corpus.n_tokens} tokens, {corpus.n_types} types, {args.tags} tags, "
          f"{args.particles} particles, {args.iterations} iterations")
    print(f"{'sampler':<10}{'emission':<10}{'python s/it':>12}{'compiled s/it':>15}{'speedup':>9}  same")
    for kind, emission in MODES:
        secs, tags = {}, {}
        for backend in ("python", "compiled"):
            cfg = SamplerConfig(n_tags=args.tags, kind=kind, emission=emission, particles=args.particles,
                                iterations=args.iterations, seed=args.seed, backend=backend)
            _, t, diag = run_training(corpus, cfg)
            secs[backend] = statistics.median(d["seconds"] for d in diag)
            tags[backend] = t.tolist()
        same = "yes" if tags["python"] == tags["compiled"] else "NO"
        print(f"{kind:<10}{emission:<10}{secs['python']:>12.3f}{secs['compiled']:>15.4f}"
              f"{secs['python'] / secs['compiled']:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
