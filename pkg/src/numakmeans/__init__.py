"""NUMA-aware parallel k-means with pruning and out-of-core execution.

The package splits into small layers:

* :mod:`numakmeans.matrix` -- binary matrix files, synthetic data, partitioning
* :mod:`numakmeans.distance` -- the one Euclidean kernel everything shares
* :mod:`numakmeans.centroids` -- centroid state, initialization, merging
* :mod:`numakmeans.pruning` -- triangle-inequality bounds and candidate scans
* :mod:`numakmeans.scheduler` -- partitioned work-stealing task queue
* :mod:`numakmeans.engine` -- the threaded Lloyd's engine (in-memory)
* :mod:`numakmeans.outofcore` -- disk-resident rows, I/O accounting, row cache
* :mod:`numakmeans.report` -- machine-readable run reports
* :mod:`numakmeans.cli` -- the ``numakmeans`` command
"""

from .centroids import (
    Accumulator,
    CentroidSet,
    finalize_centroids,
    init_centroids,
    merge_accumulators,
)
from .distance import block_distances, euclidean_distance, nearest_centroid
from .engine import (
    EngineConfig,
    IoDelta,
    IterationStats,
    KmeansResult,
    kmeans,
)
from .matrix import (
    RowRange,
    SyntheticSpec,
    gen_synthetic,
    load_matrix,
    partition_rows,
    save_matrix,
)
from .outofcore import (
    CacheSchedule,
    IoStats,
    RowCache,
    RowStore,
    fetch_rows,
    kmeans_ondisk,
    should_refresh,
)
from .pruning import (
    CentroidGeometry,
    PruneState,
    centroid_geometry,
    can_skip_point,
    inflate_bounds,
    scan_point,
    tighten_bound,
)
from .scheduler import PartitionedTaskQueue, Task, Topology, build_topology

__version__ = "0.1.0"

__all__ = [
    "Accumulator",
    "CacheSchedule",
    "CentroidGeometry",
    "CentroidSet",
    "EngineConfig",
    "IoDelta",
    "IoStats",
    "IterationStats",
    "KmeansResult",
    "PartitionedTaskQueue",
    "PruneState",
    "RowCache",
    "RowRange",
    "RowStore",
    "SyntheticSpec",
    "Task",
    "Topology",
    "block_distances",
    "build_topology",
    "can_skip_point",
    "centroid_geometry",
    "euclidean_distance",
    "fetch_rows",
    "finalize_centroids",
    "gen_synthetic",
    "inflate_bounds",
    "init_centroids",
    "kmeans",
    "kmeans_ondisk",
    "load_matrix",
    "merge_accumulators",
    "nearest_centroid",
    "partition_rows",
    "save_matrix",
    "scan_point",
    "should_refresh",
    "tighten_bound",
]
