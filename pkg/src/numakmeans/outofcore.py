"""Out-of-core execution: disk-resident rows, page-granular I/O, row caching.

Row data stays on disk in the raw row-major float64 layout; only O(n)
per-point state lives in memory.  Reads happen at page granularity (4KB by
default), so fetching scattered rows pulls in more bytes than requested; the
accounting here tracks both quantities.  A partitioned row cache pins active
rows in memory at row granularity and is refreshed lazily on an exponential
schedule, because rows that stay active tend to keep staying active.
"""

from __future__ import annotations

import os
import struct
import threading
from dataclasses import dataclass

import numpy as np

from .centroids import CentroidSet
from .distance import block_distances
from .engine import EngineConfig, IoDelta, KmeansResult, _Engine
from .matrix import (
    DTYPE_F64,
    FORMAT_VERSION,
    HEADER_SIZE,
    MAGIC,
    ROW_DTYPE,
    MatrixFormatError,
    _HEADER_FMT,
)

DEFAULT_PAGE_SIZE = 4096
DEFAULT_CACHE_BYTES = 64 * 1024 * 1024
DEFAULT_REFRESH_START = 5


class RowStore:
    """Raw on-disk row matrix read through positional I/O.

    ``payload_offset`` lets a header-carrying file be streamed as well; page
    arithmetic is always relative to the payload.  Safe for concurrent
    readers: reads use pread on a shared descriptor.
    """

    def __init__(self, path, n: int, d: int, page_size: int = DEFAULT_PAGE_SIZE,
                 payload_offset: int = 0):
        if n < 1 or d < 1:
            raise ValueError("n and d must be >= 1")
        if page_size < 1:
            raise ValueError("page_size must be >= 1")
        self.path = str(path)
        self.n = n
        self.d = d
        self.page_size = page_size
        self.payload_offset = payload_offset
        self.row_bytes = 8 * d
        expected = payload_offset + n * d * 8
        actual = os.path.getsize(path)
        if actual != expected:
            raise MatrixFormatError(
                f"{path}: expected {expected} bytes for {n}x{d} (+{payload_offset} offset), got {actual}"
            )
        self._fd = os.open(self.path, os.O_RDONLY)

    @classmethod
    def open(cls, path, raw: bool = False, n: int | None = None, d: int | None = None,
             page_size: int = DEFAULT_PAGE_SIZE) -> "RowStore":
        """Open a matrix file for streaming; header files supply their own shape."""
        if raw:
            if n is None or d is None:
                raise MatrixFormatError("raw files carry no shape; pass n and d explicitly")
            return cls(path, n, d, page_size=page_size)
        header = load_matrix_header(path)
        return cls(path, header[0], header[1], page_size=page_size, payload_offset=HEADER_SIZE)

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _pread(self, offset: int, size: int) -> bytes:
        # Single override point so tests can shim in byte-level counting.
        return os.pread(self._fd, size, offset)

    def read_pages(self, first_page: int, n_pages: int) -> bytes:
        """Raw bytes of a contiguous page run, truncated at end of payload."""
        start = first_page * self.page_size
        end = min((first_page + n_pages) * self.page_size, self.n * self.row_bytes)
        if end <= start:
            return b""
        blob = self._pread(self.payload_offset + start, end - start)
        if len(blob) != end - start:
            raise MatrixFormatError(
                f"{self.path}: short read at page {first_page} "
                f"(wanted {end - start} bytes, got {len(blob)})"
            )
        return blob


def load_matrix_header(path) -> tuple[int, int]:
    """(n, d) from a header-carrying matrix file, without reading the payload."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_SIZE)
    if len(head) < HEADER_SIZE:
        raise MatrixFormatError(f"{path}: file too short for header")
    magic, version, n, d, dtype_code = struct.unpack(_HEADER_FMT, head)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MatrixFormatError(f"{path}: unsupported format version {version}")
    if dtype_code != DTYPE_F64:
        raise MatrixFormatError(f"{path}: unknown dtype code {dtype_code}")
    return int(n), int(d)


def page_runs(ids: np.ndarray, row_bytes: int, page_size: int):
    """Coalesced runs of distinct pages covering the given ascending row ids.

    Returns (runs, total_pages) where each run is (first_page, n_pages) and
    adjacent pages are merged into one run.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        return [], 0
    starts = ids * row_bytes
    first = starts // page_size
    last = (starts + row_bytes - 1) // page_size
    brk = np.flatnonzero(first[1:] > last[:-1] + 1)
    run_lo = np.concatenate(([0], brk + 1))
    run_hi = np.concatenate((brk, [ids.size - 1]))
    runs = []
    total = 0
    for lo, hi in zip(run_lo, run_hi):
        fp = int(first[lo])
        np_ = int(last[hi]) - fp + 1
        runs.append((fp, np_))
        total += np_
    return runs, total


@dataclass
class IoStats:
    """Monotone I/O counters for one run."""

    bytes_requested: int = 0
    bytes_read: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    rows_elided: int = 0

    def snapshot(self) -> IoDelta:
        return IoDelta(self.bytes_requested, self.bytes_read,
                       self.cache_hits, self.cache_misses, self.rows_elided)


def fetch_rows(store: RowStore, ids: np.ndarray, cache: "RowCache | None" = None,
               stats: IoStats | None = None) -> np.ndarray:
    """Row data for ascending ids; rows[i] corresponds to ids[i].

    Cached rows are served from the published index; the rest are read in
    batched, coalesced page runs.  ``bytes_requested`` grows by one row width
    per id, ``bytes_read`` by page_size per distinct uncached page.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size:
        if np.any(np.diff(ids) < 0):
            raise ValueError("row ids must be sorted ascending")
        if ids[0] < 0 or ids[-1] >= store.n:
            bad = ids[0] if ids[0] < 0 else ids[-1]
            raise IndexError(f"row id {int(bad)} out of range [0, {store.n})")
    d = store.d
    out = np.empty((ids.size, d), dtype=np.float64)
    if stats is not None:
        stats.bytes_requested += store.row_bytes * int(ids.size)
    if ids.size == 0:
        return out

    if cache is not None:
        index = cache.published
        miss_pos = []
        hits = 0
        for i, rid in enumerate(ids):
            row = index.get(int(rid))
            if row is None:
                miss_pos.append(i)
            else:
                out[i] = row
                hits += 1
        if stats is not None:
            stats.cache_hits += hits
            stats.cache_misses += len(miss_pos)
        if not miss_pos:
            return out
        miss_pos = np.asarray(miss_pos, dtype=np.int64)
        miss_ids = ids[miss_pos]
    else:
        # No cache configured: hit/miss counters stay untouched.
        miss_pos = np.arange(ids.size, dtype=np.int64)
        miss_ids = ids

    runs, total_pages = page_runs(miss_ids, store.row_bytes, store.page_size)
    if stats is not None:
        stats.bytes_read += store.page_size * total_pages
    cursor = 0
    for first_page, n_pages in runs:
        run_start = first_page * store.page_size
        run_stop = (first_page + n_pages) * store.page_size
        blob = store.read_pages(first_page, n_pages)
        flat = np.frombuffer(blob, dtype=ROW_DTYPE)
        take = cursor
        while take < miss_ids.size and miss_ids[take] * store.row_bytes < run_stop:
            take += 1
        batch = miss_ids[cursor:take]
        offsets = (batch * store.row_bytes - run_start) // 8
        out[miss_pos[cursor:take]] = flat[offsets[:, None] + np.arange(d)]
        cursor = take
    assert cursor == miss_ids.size
    return out


class RowCache:
    """Partitioned row cache with an immutable published index.

    Each partition holds its owner's active rows up to an equal share of the
    byte capacity, admitted in ascending id order.  The merged id->row index
    is republished atomically at refresh barriers and read lock-free between
    them.
    """

    def __init__(self, n_partitions: int, capacity_bytes: int, row_bytes: int):
        if n_partitions < 1:
            raise ValueError("need at least one partition")
        if capacity_bytes < 0:
            raise ValueError("capacity must be >= 0")
        self.n_partitions = n_partitions
        self.capacity_bytes = capacity_bytes
        self.row_bytes = row_bytes
        self.rows_per_partition = (capacity_bytes // n_partitions) // row_bytes
        self.partitions: list[dict[int, np.ndarray]] = [{} for _ in range(n_partitions)]
        self.published: dict[int, np.ndarray] = {}
        self.refresh_count = 0

    def cached_rows(self) -> int:
        return len(self.published)

    def cached_bytes(self) -> int:
        return len(self.published) * self.row_bytes

    def rebuild(self, collected: list[list[tuple[np.ndarray, np.ndarray]]]) -> None:
        """Flush and repopulate each partition from its active rows, then publish."""
        merged: dict[int, np.ndarray] = {}
        for p in range(self.n_partitions):
            part: dict[int, np.ndarray] = {}
            chunks = collected[p]
            if chunks and self.rows_per_partition > 0:
                all_ids = np.concatenate([c[0] for c in chunks])
                all_rows = np.concatenate([c[1] for c in chunks], axis=0)
                order = np.argsort(all_ids, kind="stable")[: self.rows_per_partition]
                for i in order:
                    part[int(all_ids[i])] = all_rows[i].copy()
            self.partitions[p] = part
            merged.update(part)
        self.published = merged
        self.refresh_count += 1


@dataclass(frozen=True)
class CacheSchedule:
    """Refresh at iteration ``start``, then with doubling gaps (start, 2*start, ...)."""

    start: int = DEFAULT_REFRESH_START

    def __post_init__(self):
        if self.start < 1:
            raise ValueError("refresh start must be >= 1")


def should_refresh(iteration: int, sched: CacheSchedule) -> bool:
    """True at iterations start, 3*start, 7*start, 15*start, ..."""
    if iteration < sched.start or iteration % sched.start != 0:
        return False
    q = iteration // sched.start + 1
    return q & (q - 1) == 0


class _DiskSource:
    """Engine row source backed by a RowStore, cache, and I/O accounting."""

    def __init__(self, store: RowStore, T: int, cache_enabled: bool,
                 cache_capacity: int, schedule: CacheSchedule):
        self.store = store
        self.n, self.d = store.n, store.d
        self.schedule = schedule
        self.cache = (
            RowCache(T, cache_capacity, store.row_bytes) if cache_enabled else None
        )
        self.stats = IoStats()
        self._lock = threading.Lock()
        self._collecting = False
        self._pending: list[list[tuple[np.ndarray, np.ndarray]]] = [[] for _ in range(T)]
        self._last = IoDelta()

    def _fetch(self, task, ids: np.ndarray) -> np.ndarray:
        local = IoStats()
        rows = fetch_rows(self.store, ids, self.cache, local)
        with self._lock:
            self.stats.bytes_requested += local.bytes_requested
            self.stats.bytes_read += local.bytes_read
            self.stats.cache_hits += local.cache_hits
            self.stats.cache_misses += local.cache_misses
            if self._collecting:
                self._pending[task.owner].append((ids, rows))
        return rows

    def task_rows(self, task) -> np.ndarray:
        return self._fetch(task, np.arange(task.start, task.stop, dtype=np.int64))

    def rows_by_ids(self, task, ids) -> np.ndarray:
        return self._fetch(task, np.asarray(ids, dtype=np.int64))

    def note_elided(self, task, count: int) -> None:
        if count:
            with self._lock:
                self.stats.rows_elided += count

    def begin_iteration(self, t: int) -> None:
        self._collecting = self.cache is not None and should_refresh(t, self.schedule)

    def finish_iteration(self) -> IoDelta:
        if self._collecting:
            self.cache.rebuild(self._pending)
            self._pending = [[] for _ in range(len(self._pending))]
            self._collecting = False
        snap = self.stats.snapshot()
        delta = IoDelta(
            snap.bytes_requested - self._last.bytes_requested,
            snap.bytes_read - self._last.bytes_read,
            snap.cache_hits - self._last.cache_hits,
            snap.cache_misses - self._last.cache_misses,
            snap.rows_elided - self._last.rows_elided,
        )
        self._last = snap
        return delta

    def total_io(self) -> IoDelta:
        return self.stats.snapshot()

    def state_bytes(self) -> int:
        # Row data lives on disk; the cache and fetch buffers are accounted
        # separately from resident engine state.
        return 0

    # -- initialization reads happen before the run; their I/O is setup cost
    #    and is excluded from the per-iteration report.

    def init_centroids(self, cfg: EngineConfig) -> CentroidSet:
        c = _init_from_store(self.store, cfg)
        self.stats = IoStats()
        self._last = IoDelta()
        return c


def _init_rows(store: RowStore, ids: np.ndarray) -> np.ndarray:
    return fetch_rows(store, np.sort(np.asarray(ids, dtype=np.int64)))


def _init_from_store(store: RowStore, cfg: EngineConfig) -> CentroidSet:
    """Seeded initialization from disk; draws match the in-memory path exactly."""
    n, d, k = store.n, store.d, cfg.k
    if cfg.init == "given":
        if cfg.initial_centroids is None:
            raise ValueError("init method 'given' requires initial centroids")
        initial = np.ascontiguousarray(cfg.initial_centroids, dtype=np.float64)
        if initial.shape != (k, d):
            raise ValueError(f"initial centroids must be ({k}, {d}), got {initial.shape}")
        if not np.isfinite(initial).all():
            raise ValueError("initial centroids must be finite")
        return CentroidSet.from_means(initial)

    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "forgy":
        if k > n:
            raise ValueError(f"forgy needs k <= n (k={k}, n={n})")
        rows = rng.choice(n, size=k, replace=False)
        return CentroidSet.from_means(_init_rows(store, rows))

    if cfg.init == "random-partition":
        order = rng.permutation(n)
        groups = np.array_split(order, k)
        means = np.empty((k, d), dtype=np.float64)
        for j, g in enumerate(groups):
            if g.size == 0:
                means[j] = _chunked_mean(store, np.arange(n, dtype=np.int64))
            else:
                means[j] = _init_rows(store, g).mean(axis=0)
        return CentroidSet.from_means(means)

    # kmeanspp
    if k > n:
        raise ValueError(f"kmeanspp needs k <= n (k={k}, n={n})")
    chosen = [int(rng.integers(n))]
    d2 = _chunked_sqdist(store, _init_rows(store, [chosen[-1]])[0])
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        cand = _chunked_sqdist(store, _init_rows(store, [idx])[0])
        np.minimum(d2, cand, out=d2)
    chosen_arr = np.asarray(chosen, dtype=np.int64)
    order = np.argsort(chosen_arr, kind="stable")
    means = np.empty((k, d), dtype=np.float64)
    means[order] = fetch_rows(store, chosen_arr[order])
    return CentroidSet.from_means(means)


def _chunked_sqdist(store: RowStore, center: np.ndarray, chunk: int = 8192) -> np.ndarray:
    d2 = np.empty(store.n, dtype=np.float64)
    for lo in range(0, store.n, chunk):
        hi = min(lo + chunk, store.n)
        rows = fetch_rows(store, np.arange(lo, hi, dtype=np.int64))
        d2[lo:hi] = block_distances(rows, center[None, :])[:, 0] ** 2
    return d2


def _chunked_mean(store: RowStore, ids: np.ndarray) -> np.ndarray:
    rows = fetch_rows(store, ids)
    return rows.mean(axis=0)


def kmeans_ondisk(store: RowStore, cfg: EngineConfig, *,
                  cache_enabled: bool = True,
                  cache_capacity: int = DEFAULT_CACHE_BYTES,
                  schedule: CacheSchedule | None = None) -> KmeansResult:
    """Cluster a disk-resident matrix with O(n) in-memory state.

    Produces exactly the same per-iteration assignments as the in-memory
    engine on the same configuration; with pruning enabled, rows skipped by
    the point-skip test are never read.
    """
    if cfg.mode != "sem":
        raise ValueError("kmeans_ondisk() runs in sem mode; set cfg.mode='sem'")
    source = _DiskSource(
        store, cfg.T, cache_enabled, cache_capacity, schedule or CacheSchedule()
    )
    return _Engine(source, cfg).run()
