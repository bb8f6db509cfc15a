"""Benchmark the numba kernels against their pure-numpy fallbacks.

Covers the two loop-bound kernels: the collapsed-Gibbs sweep and the
oscillator recurrence (forward + backward). Also verifies both backends
produce identical results before timing. Run:

    python benchmarks/bench_kernels.py

The numpy rows correspond to what you get with CANOE_NUMBA=0.
"""

import time

import numpy as np

from canoe import kernels


def bench(fn, *args, repeat=5, warmup=True):
    if warmup:
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_oscillator():
    rng = np.random.default_rng(0)
    s = rng.random((256, 2, 19, 24)) * 2
    args = (1.0, -1.0, 1.0, 1.0, 0.0, 0.0)
    n_steps = 4

    e_np, i_np, ge, gi = kernels.oscillator_forward_numpy(s, *args, n_steps)
    d_e = rng.normal(size=s.shape)
    d_i = rng.normal(size=s.shape)

    rows = [("oscillator fwd numpy",
             bench(kernels.oscillator_forward_numpy, s, *args, n_steps)),
            ("oscillator bwd numpy",
             bench(kernels.oscillator_backward_numpy, d_e, d_i, ge, gi, *args[:4]))]
    if kernels.NUMBA_ENABLED:
        e_nb, i_nb, ge_nb, gi_nb = kernels.oscillator_forward(s, *args, n_steps)
        assert np.array_equal(e_np, e_nb) and np.array_equal(i_np, i_nb), \
            "backend mismatch"
        rows.append(("oscillator fwd numba",
                     bench(kernels.oscillator_forward, s, *args, n_steps)))
        rows.append(("oscillator bwd numba",
                     bench(kernels.oscillator_backward, d_e, d_i, ge_nb, gi_nb,
                           *args[:4])))
    return rows


def bench_gibbs(n_users=400, n_locs=200, n_topics=64, n_tokens=60_000):
    rng = np.random.default_rng(1)
    token_user = rng.integers(0, n_users, n_tokens).astype(np.int64)
    token_loc = rng.integers(0, n_locs, n_tokens).astype(np.int64)

    def setup():
        z = np.random.default_rng(2).integers(0, n_topics, n_tokens).astype(np.int64)
        n_ut = np.zeros((n_users, n_topics), dtype=np.int64)
        n_tl = np.zeros((n_topics, n_locs), dtype=np.int64)
        n_t = np.zeros(n_topics, dtype=np.int64)
        np.add.at(n_ut, (token_user, z), 1)
        np.add.at(n_tl, (z, token_loc), 1)
        np.add.at(n_t, z, 1)
        return z, n_ut, n_tl, n_t

    uniforms = rng.random(n_tokens)

    def run(sweep_fn):
        z, n_ut, n_tl, n_t = setup()
        t0 = time.perf_counter()
        sweep_fn(token_user, token_loc, z, n_ut, n_tl, n_t, 0.5, 0.01, uniforms)
        return time.perf_counter() - t0, z

    rows = []
    t_np, z_np = run(kernels.gibbs_sweep_numpy)
    rows.append((f"gibbs sweep numpy ({n_tokens} tokens x {n_topics} topics)", t_np))
    if kernels.NUMBA_ENABLED:
        run(kernels.gibbs_sweep)  # compile
        t_nb, z_nb = run(kernels.gibbs_sweep)
        assert np.array_equal(z_np, z_nb), "backend mismatch"
        rows.append((f"gibbs sweep numba ({n_tokens} tokens x {n_topics} topics)", t_nb))
    return rows


def main():
    print(f"backend: {kernels.BACKEND}")
    rows = bench_oscillator() + bench_gibbs()
    width = max(len(r[0]) for r in rows)
    by_name = dict(rows)
    for name, dt in rows:
        print(f"{name.ljust(width)}  {dt * 1000:9.2f} ms")
    if kernels.NUMBA_ENABLED:
        for base in ("oscillator fwd", "oscillator bwd"):
            t_np = by_name[f"{base} numpy"]
            t_nb = by_name[f"{base} numba"]
            print(f"{base}: numba speedup {t_np / t_nb:.1f}x")
        np_key = next(k for k in by_name if k.startswith("gibbs sweep numpy"))
        nb_key = next(k for k in by_name if k.startswith("gibbs sweep numba"))
        print(f"gibbs sweep: numba speedup {by_name[np_key] / by_name[nb_key]:.1f}x")


if __name__ == "__main__":
    main()
