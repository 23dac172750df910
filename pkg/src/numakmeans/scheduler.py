"""Topology-aware partitioned task queue with local-first work stealing.

The queue holds one partition per worker, each under its own lock.  A worker
drains its own partition first, then steals from workers bound to the same
node, and only then from remote nodes; the front of a partition is its
highest-priority task.  Tasks are only removed during an iteration, so a
single scan that observes every partition empty is a safe exhaustion check.
"""

from __future__ import annotations

import os
import threading
from collections import deque
from dataclasses import dataclass

from .matrix import RowRange, worker_nodes

POLICIES = ("numa", "fifo", "static")


@dataclass(frozen=True)
class Topology:
    n_nodes: int
    n_workers: int
    node_of: tuple[int, ...]
    source: str  # "detected" or "override"


def detect_node_count() -> int:
    """Number of NUMA nodes reported by the platform, 1 if unknown.

    The NUMAKMEANS_NODES environment variable overrides detection, which lets
    tests exercise multi-node scheduling on non-NUMA machines.
    """
    forced = os.environ.get("NUMAKMEANS_NODES")
    if forced:
        try:
            return max(1, int(forced))
        except ValueError:
            pass
    try:
        nodes = [
            name for name in os.listdir("/sys/devices/system/node")
            if name.startswith("node") and name[4:].isdigit()
        ]
        return max(1, len(nodes))
    except OSError:
        return 1


def node_cpus(node: int) -> set[int]:
    """CPU ids belonging to a node, empty when unknown."""
    try:
        with open(f"/sys/devices/system/node/node{node}/cpulist") as fh:
            text = fh.read().strip()
        cpus: set[int] = set()
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                cpus.update(range(int(lo), int(hi) + 1))
            elif part:
                cpus.add(int(part))
        return cpus
    except (OSError, ValueError):
        return set()


def build_topology(requested_T: int, override_N: int | None = None) -> Topology:
    """Assign workers to nodes in contiguous blocks of T/N.

    With ``override_N`` the layout is forced (useful on non-NUMA test
    machines); otherwise the node count is detected, falling back to 1.
    """
    if requested_T < 1:
        raise ValueError("need at least one worker")
    if override_N is not None:
        if override_N < 1:
            raise ValueError("node override must be >= 1")
        n_nodes = min(override_N, requested_T)
        source = "override"
    else:
        n_nodes = min(detect_node_count(), requested_T)
        source = "detected"
    node_of = tuple(worker_nodes(requested_T, n_nodes))
    return Topology(n_nodes=n_nodes, n_workers=requested_T, node_of=node_of, source=source)


def bind_to_node(topology: Topology, worker: int) -> bool:
    """Best-effort affinity of the calling thread to the worker's node CPUs."""
    if topology.source != "detected" or topology.n_nodes <= 1:
        return False
    cpus = node_cpus(topology.node_of[worker])
    if not cpus:
        return False
    try:
        os.sched_setaffinity(0, cpus)
        return True
    except (AttributeError, OSError):
        return False


@dataclass(frozen=True)
class Task:
    start: int
    stop: int
    home_node: int
    owner: int   # worker whose partition holds the task
    index: int   # global position, fixes the deterministic reduce order

    def __len__(self):
        return self.stop - self.start


class PartitionedTaskQueue:
    """T locked partitions of row-range tasks with per-partition counters."""

    def __init__(self, topology: Topology):
        self.topology = topology
        T = topology.n_workers
        self._parts: list[deque[Task]] = [deque() for _ in range(T)]
        self._locks = [threading.Lock() for _ in range(T)]
        self.taken_local = [0] * T
        self.stolen_same_node = [0] * T
        self.stolen_remote = [0] * T
        self._steal_order = self._build_steal_orders()

    def _build_steal_orders(self):
        topo = self.topology
        orders = {}
        for w in range(topo.n_workers):
            same = [p for p in range(topo.n_workers)
                    if p != w and topo.node_of[p] == topo.node_of[w]]
            remote = [p for p in range(topo.n_workers)
                      if topo.node_of[p] != topo.node_of[w]]
            any_order = [p for p in range(topo.n_workers) if p != w]
            orders[w] = (same, remote, any_order)
        return orders

    def reset_counters(self) -> None:
        T = self.topology.n_workers
        self.taken_local = [0] * T
        self.stolen_same_node = [0] * T
        self.stolen_remote = [0] * T

    def counter_totals(self) -> tuple[int, int, int]:
        return (sum(self.taken_local), sum(self.stolen_same_node), sum(self.stolen_remote))

    def remaining(self) -> int:
        return sum(len(p) for p in self._parts)

    def enqueue_iteration(self, ranges: list[RowRange], task_size: int) -> None:
        """Fill each worker's partition with its range split into task blocks."""
        if task_size < 1:
            raise ValueError("task_size must be >= 1")
        if len(ranges) != self.topology.n_workers:
            raise ValueError(f"expected {self.topology.n_workers} ranges, got {len(ranges)}")
        if self.remaining():
            raise RuntimeError("queue must be empty before a new iteration is enqueued")
        index = 0
        for w, rr in enumerate(ranges):
            part = self._parts[w]
            for lo in range(rr.start, rr.stop, task_size):
                hi = min(lo + task_size, rr.stop)
                part.append(Task(start=lo, stop=hi, home_node=rr.node, owner=w, index=index))
                index += 1

    def _pop_from(self, p: int, w: int) -> Task | None:
        with self._locks[p]:
            if not self._parts[p]:
                return None
            task = self._parts[p].popleft()
            if p == w:
                self.taken_local[p] += 1
            elif self.topology.node_of[p] == self.topology.node_of[w]:
                self.stolen_same_node[p] += 1
            else:
                self.stolen_remote[p] += 1
            return task

    def next_task(self, worker: int, policy: str = "numa") -> Task | None:
        """Dispense one task to ``worker`` or None when every partition is empty.

        numa steals same-node first, then remote; fifo steals from any
        partition in worker order; static never steals.  Tasks are removed,
        never added, during an iteration, so observing all partitions empty
        in one scan proves exhaustion.
        """
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        task = self._pop_from(worker, worker)
        if task is not None or policy == "static":
            return task
        if policy == "numa":
            scan_groups = self._steal_order[worker][:2]
        else:
            scan_groups = (self._steal_order[worker][2],)
        while True:
            seen_any = False
            for group in scan_groups:
                for p in group:
                    if self._parts[p]:
                        seen_any = True
                        task = self._pop_from(p, worker)
                        if task is not None:
                            return task
            if not seen_any:
                if self._parts[worker]:
                    continue  # cannot happen mid-iteration; defensive re-scan
                return None
