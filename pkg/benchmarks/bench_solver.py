"""Time the compiled Frank-Wolfe kernel against the pure-Python fallback.

    python3 benchmarks/bench_solver.py [--repeat N]

Problems are simplex QPs drawn from the two-factor design at T0 = 2J, the
shape the Monte Carlo loop solves. Both kernels get identical Gram inputs;
the script also reports the largest weight difference between them.
"""
import argparse
import time

import numpy as np

from syncon import _fw_py
from syncon.dgp import ScenarioConfig, make_scenario_panel
from syncon.solver import DEFAULT_MAX_ITER, DEFAULT_TOL

try:
    from syncon import _fw
except ImportError:
    _fw = None


def gram_inputs(J, reps):
    s = ScenarioConfig(kind="two_factor_groups", J=J, t0_rule="2J", seed=1234)
    out = []
    for r in range(reps):
        panel, _ = make_scenario_panel(s, r)
        Y, y0 = panel.Y_pre, panel.y0_pre
        T = Y.shape[0]
        G = np.ascontiguousarray(Y.T @ Y / T)
        c = np.ascontiguousarray(Y.T @ y0 / T)
        w0 = np.full(J, 1.0 / J)
        f0 = float(w0 @ G @ w0 - 2 * c @ w0 + y0 @ y0 / T)
        out.append((G, c, w0, DEFAULT_TOL * max(1.0, f0)))
    return out


def run(kernel, problems):
    t = time.perf_counter()
    ws = [kernel(G, c, w0.copy(), eps, DEFAULT_MAX_ITER)[0] for G, c, w0, eps in problems]
    return time.perf_counter() - t, ws


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20, help="problems per size")
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 100])
    args = ap.parse_args()
    if _fw is None:
        print("compiled kernel not built; only the fallback can be timed")
    print(f"{'J':>5} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max |dw|':>10}")
    for J in args.sizes:
        problems = gram_inputs(J, args.repeat)
        t_py, w_py = run(_fw_py.simplex_fw, problems)
        if _fw is None:
            print(f"{J:>5} {1e3 * t_py / len(problems):>10.2f}")
            continue
        t_cy, w_cy = run(_fw.simplex_fw, problems)
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(w_py, w_cy))
        print(f"{J:>5} {1e3 * t_py / len(problems):>10.2f} {1e3 * t_cy / len(problems):>10.2f} "
              f"{t_py / t_cy:>8.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
