"""Compare the compiled kernels against the numpy ones.

Times individual kernels across sizes and a full model training step, and
reports the per-size speedup so the import-time default (prefer compiled)
can be sanity-checked on the machine at hand.

Run:  python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import sys
import time

import numpy as np

from stacklstm import backend
from stacklstm import tensor as T
from stacklstm.model import StackLSTM
from stacklstm.optim import Adam, clip_global_norm
from stacklstm.vocab import EncodedSequence, KIND_CODES


def timeit(fn, repeats):
    fn()  # warm up caches and any lazy allocation
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for n in (16, 32, 64, 128, 256):
        a = np.ascontiguousarray(rng.standard_normal((n, n)))
        b = np.ascontiguousarray(rng.standard_normal((n, n)))
        times = {}
        for name in ("python", "compiled"):
            k = backend.use_backend(name)
            times[name] = timeit(lambda: k.matmul(a, b), repeats)
        rows.append(("matmul %dx%d" % (n, n), times))
    x = np.ascontiguousarray(rng.standard_normal((64, 256)))
    for kernel in ("sigmoid", "tanh"):
        times = {}
        for name in ("python", "compiled"):
            k = backend.use_backend(name)
            fn = getattr(k, kernel)
            times[name] = timeit(lambda: fn(x), repeats)
        rows.append(("%s 64x256" % kernel, times))
    logits = np.ascontiguousarray(rng.standard_normal((64, 512)))
    targets = np.ascontiguousarray(rng.integers(0, 512, size=64).astype(np.int64))
    times = {}
    for name in ("python", "compiled"):
        k = backend.use_backend(name)
        times[name] = timeit(lambda: k.softmax_xent(logits, targets), repeats)
    rows.append(("softmax_xent 64x512", times))
    return rows


def _balanced_sequence(length, vocab_size, seed):
    """A well-nested id/kind stream so strict mode accepts it."""
    rng = np.random.default_rng(seed)
    ids, kinds, depth = [], [], 0
    while len(ids) < length - 1:
        room = length - 1 - len(ids) - depth  # keep space to close everything
        if depth > 0 and (room <= 0 or rng.uniform() < 0.25):
            ids.append(3)
            kinds.append(KIND_CODES["CLOSE"])
            depth -= 1
        elif room >= 2 and rng.uniform() < 0.3:
            ids.append(2)
            kinds.append(KIND_CODES["OPEN"])
            depth += 1
        else:
            ids.append(int(rng.integers(4, vocab_size)))
            kinds.append(KIND_CODES["NT"])
    while depth > 0:
        ids.append(3)
        kinds.append(KIND_CODES["CLOSE"])
        depth -= 1
    ids.append(4)
    kinds.append(KIND_CODES["T"])
    return EncodedSequence(
        np.array(ids, dtype=np.int64), np.array(kinds, dtype=np.int64), len(ids)
    )


def bench_model_step(repeats, hidden, seq_len):
    enc = _balanced_sequence(seq_len, 50, seed=1)
    times = {}
    for name in ("python", "compiled"):
        backend.use_backend(name)
        model = StackLSTM(50, hidden, layers=2, alpha="summarization", seed=0)
        opt = Adam(model.parameters(), lr=1e-3)

        def step():
            with T.Tape() as tape:
                trace = model.run_sequence(enc, mode="strict")
                h = trace.final_hidden()
                loss = T.sum_all(T.mul(h, h))
                grads = tape.backward(loss, params=model.parameters())
            clip_global_norm(grads, 5.0)
            opt.step(grads)

        times[name] = timeit(step, repeats)
    return "train step h=%d len=%d" % (hidden, seq_len), times


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    if "compiled" not in backend.available_backends():
        print("compiled extension is not built; nothing to compare", file=sys.stderr)
        return 1

    rows = bench_kernels(args.repeats)
    rows.append(bench_model_step(args.repeats, hidden=64, seq_len=100))
    rows.append(bench_model_step(args.repeats, hidden=200, seq_len=100))

    width = max(len(r[0]) for r in rows)
    print("%-*s %12s %12s %9s" % (width, "case", "python(ms)", "compiled(ms)", "speedup"))
    for label, times in rows:
        py, c = times["python"], times["compiled"]
        print("%-*s %12.3f %12.3f %8.2fx" % (width, label, py * 1e3, c * 1e3, py / c))
    print()
    print("default backend on this machine: %s" % _default_backend())
    return 0


def _default_backend():
    # Re-derive what __init__ would pick without the env override.
    return "compiled" if "compiled" in backend.available_backends() else "python"


if __name__ == "__main__":
    sys.exit(main())
