"""Compare the compiled and pure-Python polynomial kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Times mixed-partial evaluation and the (D, D_x) Newton corrector on the
chain4dof tensor, checks that both backends agree, and prints the speedup.
"""
import argparse
import timeit

import numpy as np

from critdamp import assemble, builtin_model
from critdamp import _kernels_py as py

try:
    from critdamp import _ckernels as cy
except ImportError:
    cy = None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    cf = assemble(*builtin_model("chain4dof"))
    T = cf.tensor
    u, v = 1.0 - cf.p_center, 0.06 - cf.q_center
    x0, q0 = -1.46, 0.06
    cases = {
        "derivatives(2,1,1)": lambda m: m.derivatives(T, -1.4, u, v, 2, 1, 1),
        "correct": lambda m: m.correct(T, 1.2521846535861894 - cf.p_center, x0, q0 - cf.q_center, 1e-10, 8),
    }
    if cy is None:
        print("compiled kernels not built; only the pure-Python backend is available")
    print(f"{'kernel':<22}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(py), number=args.repeat // 10, repeat=5)) / (args.repeat // 10)
        line = f"{name:<22}{t_py * 1e6:>12.2f}"
        if cy is not None:
            a, b = fn(py), fn(cy)
            a = np.asarray(a[:2] if isinstance(a, tuple) else a, dtype=float)
            b = np.asarray(b[:2] if isinstance(b, tuple) else b, dtype=float)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), f"{name}: backends disagree"
            t_cy = min(timeit.repeat(lambda: fn(cy), number=args.repeat, repeat=5)) / args.repeat
            line += f"{t_cy * 1e6:>12.2f}{t_py / t_cy:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
