"""Compare the compiled and pure-Python kernels on the [[9,3,3]] decode model.

    python3 benchmarks/bench_kernels.py [--sweeps N] [--repeat R]

Both backends receive identical pre-drawn random numbers, so the script also
checks that they produce the same chain.
"""
import argparse
import time

import numpy as np

from cpcising import kernels
from cpcising.cpc import build_propagation_model, derive_check_sets, load_code
from cpcising.error_model import ErrorModel
from cpcising.ising import build_decode_hamiltonian, build_time_extended, syndrome_from_bits


def decode_model():
    prop = build_propagation_model(load_code("933"))
    checks = derive_check_sets(prop)
    em = ErrorModel.family("f1", 0.05, prop.n)
    return build_decode_hamiltonian(checks, syndrome_from_bits("010011"), em)


def time_extended_model():
    prop = build_propagation_model(load_code("933"))
    checks = derive_check_sets(prop)
    em = ErrorModel.family("f1", 0.05, prop.n)
    s = syndrome_from_bits("010011")
    return build_time_extended(checks, [s, s], em)


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_enumerate(backends, model, repeat):
    masks, coeffs = model.masks(), model.coeffs()
    results = {}
    for name, mod in backends.items():
        t, e = best_of(lambda: mod.enumerate_energies(masks, coeffs, model.offset, model.num_spins), repeat)
        results[name] = (t, e)
    return results


def bench_sweeps(backends, model, sweeps, repeat):
    term_ptr, term_vars, spin_ptr, spin_terms = model.adjacency()
    coeffs = model.coeffs()
    n = model.num_spins
    rng = np.random.default_rng(0)
    order = rng.permuted(np.tile(np.arange(n, dtype=np.int32), (sweeps, 1)), axis=1).astype(np.int32)
    uniforms = rng.random((sweeps, n))
    betas = np.ones(sweeps)
    init = np.ones(n, np.int8)

    results = {}
    for name, mod in backends.items():
        def run():
            state = init.copy()
            out = np.empty((sweeps, n), np.int8)
            trace = np.empty(sweeps)
            best = np.empty(n, np.int8)
            e0 = float(-coeffs.sum())
            mod.run_sweeps(state, term_ptr, term_vars, coeffs, spin_ptr, spin_terms, order,
                           uniforms, betas, False, out, True, trace, e0, best)
            return out
        results[name] = best_of(run, repeat)
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sweeps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the fallback only")

    model = decode_model()
    print(f"model: {model.num_spins} spins, {len(model.terms)} terms")

    for m in (model, time_extended_model()):
        res = bench_enumerate(backends, m, args.repeat)
        for name, (t, _) in res.items():
            print(f"enumerate_energies ({m.num_spins} spins) {name:7s} {t * 1e3:9.2f} ms")
        if len(res) == 2:
            same = np.allclose(res["cython"][1], res["python"][1], rtol=0, atol=1e-9)
            print(f"  speedup {res['python'][0] / res['cython'][0]:.1f}x, energies agree: {same}")

    res = bench_sweeps(backends, model, args.sweeps, args.repeat)
    for name, (t, _) in res.items():
        print(f"run_sweeps ({args.sweeps}) {name:7s} {t * 1e3:9.2f} ms")
    if len(res) == 2:
        same = np.array_equal(res["cython"][1], res["python"][1])
        print(f"  speedup {res['python'][0] / res['cython'][0]:.1f}x, chains identical: {same}")


if __name__ == "__main__":
    main()
