"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py --sizes 2000 20000 100000

Both backends are checked for agreement on every input before timing.
"""

import argparse
import json
import time

import numpy as np

from memaudit import _fallback, kernels


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n, vocab, repeat, rng):
    text = rng.integers(1, vocab, size=n).astype(np.int32)
    text[-1] = 0  # sentinel, as the index writes it
    ext = kernels._ext
    rows = {}

    sa_c = ext.suffix_array(text)
    sa_p = _fallback.suffix_array(text)
    assert np.array_equal(sa_c, sa_p), "suffix arrays differ"
    rows["suffix_array"] = (_time(lambda: ext.suffix_array(text), repeat),
                            _time(lambda: _fallback.suffix_array(text), repeat))

    tl = text.tolist()
    sa64 = sa_c.astype(np.int64)
    queries = [text[s : s + 6].copy() for s in rng.integers(0, n - 6, size=200)]
    for q in queries:
        assert ext.sa_range(text, sa64, q) == _fallback.sa_range(tl, sa_c, q)
    rows["sa_range x200"] = (_time(lambda: [ext.sa_range(text, sa64, q) for q in queries], repeat),
                             _time(lambda: [_fallback.sa_range(tl, sa_c, q) for q in queries], repeat))

    m = min(n, 2000)
    a = text[:128].copy()
    b = text[:m].copy()
    assert ext.lcs(a, b) == _fallback.lcs(a, b)
    rows[f"lcs 128x{m}"] = (_time(lambda: ext.lcs(a, b), repeat), _time(lambda: _fallback.lcs(a, b), repeat))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2000, 20000, 100000])
    ap.add_argument("--vocab", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)
    if kernels._ext is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(args.seed)
    out = []
    print(f"{'n':>8}  {'kernel':<16} {'cython ms':>10} {'python ms':>10} {'speedup':>8}")
    for n in args.sizes:
        for name, (tc, tp) in bench(n, args.vocab, args.repeat, rng).items():
            print(f"{n:>8}  {name:<16} {tc * 1e3:>10.2f} {tp * 1e3:>10.2f} {tp / tc:>7.1f}x")
            out.append({"n": n, "kernel": name, "cython_s": tc, "python_s": tp})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
