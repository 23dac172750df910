import random
import threading

import pytest

from numakmeans.matrix import RowRange
from numakmeans.scheduler import (
    PartitionedTaskQueue,
    build_topology,
    detect_node_count,
)


def topo(T, N):
    return build_topology(T, override_N=N)


def even_ranges(n, T, node_of):
    size = n // T
    return [RowRange(w * size, (w + 1) * size, node_of[w]) for w in range(T)]


def test_topology_single_node():
    t = topo(4, 1)
    assert t.node_of == (0, 0, 0, 0)
    assert t.source == "override"


def test_topology_two_node_blocks():
    t = topo(4, 2)
    assert t.node_of == (0, 0, 1, 1)


def test_topology_remainder_to_low_nodes():
    t = topo(5, 2)
    assert t.node_of == (0, 0, 0, 1, 1)


def test_topology_detection_fallback(monkeypatch):
    monkeypatch.setattr("numakmeans.scheduler.detect_node_count", lambda: 1)
    t = build_topology(3)
    assert t.source == "detected"
    assert t.n_nodes == 1


def test_detect_env_override(monkeypatch):
    monkeypatch.setenv("NUMAKMEANS_NODES", "3")
    assert detect_node_count() == 3
    t = build_topology(6)
    assert t.n_nodes == 3
    assert t.node_of == (0, 0, 1, 1, 2, 2)


def test_enqueue_one_task_per_partition_at_default_size():
    q = PartitionedTaskQueue(topo(2, 1))
    q.enqueue_iteration(even_ranges(16384, 2, (0, 0)), task_size=8192)
    assert q.remaining() == 2
    a = q.next_task(0, "static")
    b = q.next_task(1, "static")
    assert (a.start, a.stop, a.owner) == (0, 8192, 0)
    assert (b.start, b.stop, b.owner) == (8192, 16384, 1)


def test_enqueue_splits_with_short_tail():
    q = PartitionedTaskQueue(topo(1, 1))
    q.enqueue_iteration([RowRange(0, 10, 0)], task_size=3)
    sizes = []
    while (t := q.next_task(0)) is not None:
        sizes.append(len(t))
    assert sizes == [3, 3, 3, 1]


def test_empty_input_is_immediately_exhausted():
    q = PartitionedTaskQueue(topo(2, 1))
    q.enqueue_iteration([RowRange(0, 0, 0), RowRange(0, 0, 0)], task_size=4)
    assert q.next_task(0) is None
    assert q.next_task(1) is None


def test_enqueue_requires_empty_queue():
    q = PartitionedTaskQueue(topo(1, 1))
    q.enqueue_iteration([RowRange(0, 4, 0)], task_size=4)
    with pytest.raises(RuntimeError):
        q.enqueue_iteration([RowRange(0, 4, 0)], task_size=4)


def test_own_partition_first():
    q = PartitionedTaskQueue(topo(2, 1))
    q.enqueue_iteration(even_ranges(8, 2, (0, 0)), task_size=4)
    t = q.next_task(1)
    assert t.owner == 1
    assert q.taken_local == [0, 1]


def test_same_node_steal_preferred():
    # worker 1 (node 0) must steal from worker 0 (node 0) before 2/3 (node 1)
    q = PartitionedTaskQueue(topo(4, 2))
    q.enqueue_iteration(
        [RowRange(0, 4, 0), RowRange(4, 4, 0), RowRange(4, 8, 1), RowRange(8, 12, 1)],
        task_size=4,
    )
    t = q.next_task(1, "numa")
    assert t.owner == 0
    assert q.stolen_same_node == [1, 0, 0, 0]
    assert q.stolen_remote == [0, 0, 0, 0]


def test_remote_steal_when_same_node_empty():
    q = PartitionedTaskQueue(topo(4, 2))
    q.enqueue_iteration(
        [RowRange(0, 0, 0), RowRange(0, 0, 0), RowRange(0, 4, 1), RowRange(4, 8, 1)],
        task_size=4,
    )
    t = q.next_task(0, "numa")
    assert t.owner == 2  # ascending scan over the remote node
    assert q.stolen_remote == [0, 0, 1, 0]


def test_static_never_steals():
    q = PartitionedTaskQueue(topo(2, 1))
    q.enqueue_iteration([RowRange(0, 0, 0), RowRange(0, 8, 0)], task_size=4)
    assert q.next_task(0, "static") is None
    assert q.remaining() == 2
    while q.next_task(1, "static") is not None:
        pass
    assert q.counter_totals() == (2, 0, 0)


def test_fifo_steals_in_worker_order():
    q = PartitionedTaskQueue(topo(4, 2))
    q.enqueue_iteration(
        [RowRange(0, 0, 0), RowRange(0, 0, 0), RowRange(0, 4, 1), RowRange(4, 8, 1)],
        task_size=4,
    )
    t = q.next_task(0, "fifo")
    assert t.owner == 2


def drain_concurrently(q, T, policy, stall_prob=0.0, seed=0):
    """Workers drain the queue; returns (dispensed task lists, premature flags)."""
    out = [[] for _ in range(T)]
    premature = []
    rngs = [random.Random(seed * 1000 + w) for w in range(T)]

    def work(w):
        r = rngs[w]
        while True:
            task = q.next_task(w, policy)
            if task is None:
                if q.remaining():
                    premature.append(w)
                return
            out[w].append(task)
            if stall_prob and r.random() < stall_prob:
                threading.Event().wait(r.random() * 0.002)

    threads = [threading.Thread(target=work, args=(w,)) for w in range(T)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return out, premature


@pytest.mark.parametrize("policy", ["numa", "fifo"])
def test_concurrent_drain_dispenses_exactly_once(policy):
    T = 4
    q = PartitionedTaskQueue(topo(T, 2))
    # heavy skew: all tasks in partitions 0 and 2
    q.enqueue_iteration(
        [RowRange(0, 500, 0), RowRange(500, 500, 0), RowRange(500, 1000, 1), RowRange(1000, 1000, 1)],
        task_size=2,
    )
    total = q.remaining()
    out, premature = drain_concurrently(q, T, policy, stall_prob=0.05)
    got = [t.index for worker in out for t in worker]
    assert len(got) == total
    assert len(set(got)) == total
    assert not premature
    assert q.remaining() == 0


def test_straggler_partition_fully_drained_by_thieves():
    T = 4
    q = PartitionedTaskQueue(topo(T, 2))
    q.enqueue_iteration(
        [RowRange(0, 40, 0), RowRange(40, 40, 0), RowRange(40, 40, 1), RowRange(40, 40, 1)],
        task_size=4,
    )
    out, premature = drain_concurrently(q, T, "numa", stall_prob=0.2, seed=3)
    assert sum(len(o) for o in out) == 10
    assert not premature


def test_numa_policy_prefers_same_node_steals_under_skew():
    # one loaded partition per node: thieves should hit their own node first
    T, trials = 4, 20
    same_total = remote_total = 0
    for trial in range(trials):
        q = PartitionedTaskQueue(topo(T, 2))
        q.enqueue_iteration(
            [RowRange(0, 600, 0), RowRange(600, 600, 0),
             RowRange(600, 1200, 1), RowRange(1200, 1200, 1)],
            task_size=2,
        )
        drain_concurrently(q, T, "numa", stall_prob=0.01, seed=trial)
        _, same, remote = q.counter_totals()
        same_total += same
        remote_total += remote
    assert same_total >= remote_total
