"""How much work the triangle-inequality bounds save, by data shape.

Clustered data prunes hard (points sit deep inside their cluster, so the
point-skip test fires almost everywhere); uniform data is the worst case
because points are near several centroids at once.  The table reports
distance computations as a fraction of the n*k a plain pass would spend,
plus where the savings came from.
"""

from numakmeans import EngineConfig, SyntheticSpec, gen_synthetic, kmeans

N, D, K = 50_000, 8, 10

for family, sep in (("gaussian-mixture", 10.0), ("gaussian-mixture", 3.0), ("uniform", 0.0)):
    spec = SyntheticSpec(family, N, D, seed=11, k_true=K, separation=sep)
    matrix = gen_synthetic(spec)
    cfg = EngineConfig(k=K, seed=5, T=2, pruning=True, max_iters=15)
    res = kmeans(matrix, cfg)
    label = family if family == "uniform" else f"{family} (sep={sep:g})"
    print(f"\n{label}: {res.n_iterations} iterations, converged={res.converged}")
    print(f"{'t':>3} {'dists/nk':>9} {'skipped':>8} {'pruned(stale)':>14} {'pruned(tight)':>14}")
    for st in res.iterations:
        print(f"{st.t:>3} {st.dist_comps / (N * K):>9.3f} {st.skips:>8} "
              f"{st.pruned_stale:>14} {st.pruned_tight:>14}")
    total = sum(st.dist_comps for st in res.iterations)
    print(f"total distance computations: {total:,} "
          f"({total / (res.n_iterations * N * K):.1%} of a full-pass run)")
