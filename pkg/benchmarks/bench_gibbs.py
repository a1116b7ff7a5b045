"""Time one Gibbs sweep with the compiled kernel and with the numpy fallback.

    python benchmarks/bench_gibbs.py [--docs 50] [--sweeps 20]

Both backends start from the same state and consume the same uniforms, so
the script also checks that their count tables agree exactly afterwards.
"""

import argparse
import copy
import time

import numpy as np

from review_insight.mglda import MgldaParams
from review_insight.mglda.backend import compiled_sweep, python_sweep
from review_insight.mglda.model import init_state, run_sweep
from review_insight.synthetic import generate_mglda_corpus


def time_backend(state, params, uniforms, sweep):
    t0 = time.perf_counter()
    for u in uniforms:
        run_sweep(state, params, u, sweep)
    return (time.perf_counter() - t0) / len(uniforms)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--docs", type=int, default=50)
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--k-glo", type=int, default=40)
    ap.add_argument("--k-loc", type=int, default=15)
    args = ap.parse_args()

    corpus = generate_mglda_corpus(n_docs=args.docs, seed=1)
    params = MgldaParams(k_glo=args.k_glo, k_loc=args.k_loc)
    rng = np.random.default_rng(0)
    base = init_state(corpus.docs, params, corpus.V, rng)
    uniforms = [rng.random(base.n_tokens) for _ in range(args.sweeps)]
    print(f"{args.docs} docs, {base.n_tokens} tokens, K_glo={params.k_glo} K_loc={params.k_loc}, "
          f"{args.sweeps} sweeps")

    py_state = copy.deepcopy(base)
    t_py = time_backend(py_state, params, uniforms, python_sweep)
    print(f"python  {t_py * 1e3:9.2f} ms/sweep")
    if compiled_sweep is None:
        print("cython  (extension not built)")
        return
    cy_state = copy.deepcopy(base)
    t_cy = time_backend(cy_state, params, uniforms, compiled_sweep)
    same = all(np.array_equal(a, b) for a, b in zip(py_state.recount().values(), cy_state.recount().values()))
    same &= np.array_equal(py_state.tok_z, cy_state.tok_z)
    print(f"cython  {t_cy * 1e3:9.2f} ms/sweep  ({t_py / t_cy:.0f}x faster)")
    print(f"identical assignments: {same}")


if __name__ == "__main__":
    main()
