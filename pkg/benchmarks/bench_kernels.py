"""Time the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 20]

Reports best-of-N wall time for im2col, col2im, a conv2d forward+backward
and one micro_cnn training step, and checks the backends agree bit for bit.
"""

import argparse
import timeit

import numpy as np

from fusetl import autodiff as ad
from fusetl.autodiff import kernels
from fusetl.models import build_model, predict


def cases(rng):
    x = rng.standard_normal((32, 8, 34, 34))
    w = ad.Parameter(rng.standard_normal((16, 8, 3, 3)), "w")
    b = ad.Parameter(np.zeros(16), "b")
    cols = kernels._kernels_py.im2col(x, 3, 1, 32, 32)
    model = build_model("micro_cnn", seed=0)
    batch = rng.random((32, 3, 64, 64))
    labels = (rng.random(32) < 0.5).astype(float)

    def conv_step():
        xt = ad.Tensor(x, requires_grad=True)
        ad.sum_all(ad.conv2d(xt, w, b, stride=1, padding=1)).backward()

    def train_step():
        model.zero_grad()
        ad.bce_loss(predict(model, batch, training=True), labels).backward()

    return {
        "im2col 32x8x34x34 k3": lambda: kernels.im2col(x, 3, 1, 32, 32),
        "col2im 32x8x34x34 k3": lambda: kernels.col2im(cols, 34, 34, 1),
        "conv2d fwd+bwd": conv_step,
        "micro_cnn train step": train_step,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    results = {}
    for name in kernels.BACKENDS:
        kernels.set_backend(name)
        for case, fn in cases(np.random.default_rng(0)).items():
            results.setdefault(case, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))

    x = rng.standard_normal((4, 5, 11, 11))
    outs = {}
    for name in kernels.BACKENDS:
        kernels.set_backend(name)
        c = kernels.im2col(x, 3, 2, 5, 5)
        outs[name] = (c, kernels.col2im(c, 11, 11, 2))
    kernels.set_backend(kernels.BACKENDS[0])

    print(f"{'case':24s}" + "".join(f"{b:>12s}" for b in kernels.BACKENDS) + "   speedup")
    for case, by in results.items():
        row = f"{case:24s}" + "".join(f"{by[b] * 1e3:10.3f}ms" for b in kernels.BACKENDS)
        if len(by) == 2:
            row += f"   {by['python'] / by['cython']:6.2f}x"
        print(row)
    if len(outs) == 2:
        same = all(np.array_equal(a, b) for a, b in zip(outs["cython"], outs["python"]))
        print("backends bit-identical:", same)


if __name__ == "__main__":
    main()
