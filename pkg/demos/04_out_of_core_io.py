"""Out-of-core runs: bytes requested vs bytes actually read from disk.

Row data stays on disk and is fetched at 4KB page granularity.  Three
configurations mirror the classic ablation:

* pruning off, cache off  -- every row is requested every iteration;
* pruning on,  cache off  -- requests shrink with the active set, but
  scattered small rows still drag in whole pages (fragmentation);
* pruning on,  cache on   -- the row cache pins active rows after the first
  refresh, collapsing what has to be read.
"""

import os
import tempfile

from numakmeans import (
    CacheSchedule,
    EngineConfig,
    RowStore,
    SyntheticSpec,
    gen_synthetic,
    kmeans_ondisk,
    save_matrix,
)

N, D, K = 40_000, 8, 8

spec = SyntheticSpec("gaussian-mixture", N, D, seed=23, k_true=K, separation=4.0)
matrix = gen_synthetic(spec)
path = os.path.join(tempfile.mkdtemp(), "rows.raw")
save_matrix(matrix, path, raw=True)
print(f"on-disk dataset: {os.path.getsize(path):,} bytes ({N} x {D} float64)")


def run(pruning, cache):
    cfg = EngineConfig(k=K, seed=13, T=2, pruning=pruning, mode="sem", max_iters=25)
    with RowStore(path, N, D) as store:
        return kmeans_ondisk(store, cfg, cache_enabled=cache,
                             cache_capacity=N * D * 8, schedule=CacheSchedule(5))


variants = [
    ("no pruning, no cache", run(False, False)),
    ("pruning,    no cache", run(True, False)),
    ("pruning,    cache   ", run(True, True)),
]

for label, res in variants:
    print(f"\n{label}: {res.n_iterations} iterations")
    print(f"{'t':>3} {'requested':>12} {'read':>12} {'elided rows':>12} {'cache hits':>11}")
    for st in res.iterations[:10]:
        io = st.io
        print(f"{st.t:>3} {io.bytes_requested:>12,} {io.bytes_read:>12,} "
              f"{io.rows_elided:>12,} {io.cache_hits:>11,}")
    tot = res.io_totals
    print(f"totals: requested {tot.bytes_requested:,}  read {tot.bytes_read:,}")
