"""Shared pattern and assignment types plus the closed-form resource formulas."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import prod

from ..errors import DomainError, InvalidArgumentError
from ..model import (
    Communicator,
    EndpointsComm,
    InfoHints,
    OpDescriptor,
    OpKind,
    PartitionedRequest,
    Window,
)
from ..semantics import can_match, requests_match


class PatternKind(Enum):
    STENCIL_2D_5PT = "stencil-2d-5pt"
    STENCIL_2D_9PT = "stencil-2d-9pt"
    STENCIL_3D_27PT = "stencil-3d-27pt"
    LEGION_POLLING = "legion-polling"
    BSPMM_RMA = "bspmm-rma"
    MULTITHREADED_ALLREDUCE = "multithreaded-allreduce"
    DYNAMIC_GRAPH = "dynamic-graph"


STENCIL_KINDS = frozenset({
    PatternKind.STENCIL_2D_5PT,
    PatternKind.STENCIL_2D_9PT,
    PatternKind.STENCIL_3D_27PT,
})


class Mechanism(Enum):
    COMMUNICATORS = "communicators"
    TAGS_WITH_HINTS = "tags"
    ENDPOINTS = "endpoints"
    PARTITIONED = "partitioned"
    WINDOWS = "windows"


@dataclass(frozen=True)
class PatternOp:
    """One per-iteration operation of a communication pattern.

    ``direction`` is the neighbor offset for stencils; ``partner`` names the
    remote pattern op this one matches; ``phase`` groups ops that travel
    together (per traffic direction for stencils).  ``tag_key`` is the
    application-level tag value before any mechanism-specific encoding.
    """

    op_id: int
    process: int
    thread: int
    kind: OpKind
    direction: tuple[int, ...] | None = None
    peer_process: int | None = None
    peer_thread: int | None = None
    partner: int | None = None
    phase: int = 0
    tag_key: int = 0
    location: int | None = None
    is_wildcard_recv: bool = False


@dataclass
class CommPattern:
    """A set of processes x threads x per-iteration operations.

    Stencil patterns are torus-wrapped, so every process carries the same
    thread-level structure; concurrency intent is therefore evaluated on a
    representative process.  Intended-concurrency holds for operation pairs
    of distinct communicating threads, and for distinct-direction pairs of a
    single non-corner thread (a corner thread's directions proceed serially
    from its one issue stream).
    """

    kind: PatternKind
    process_grid: tuple[int, ...]
    thread_grid: tuple[int, ...]
    iterations: int
    payload_bytes: int
    ops: tuple[PatternOp, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    communicating_threads: frozenset[int] = frozenset()
    corner_threads: frozenset[int] = frozenset()
    num_phases: int = 1
    seed: int = 0

    def __post_init__(self):
        self._by_id = {op.op_id: op for op in self.ops}

    @property
    def num_processes(self) -> int:
        return prod(self.process_grid)

    @property
    def threads_per_process(self) -> int:
        return prod(self.thread_grid)

    @property
    def representative_process(self) -> int:
        return 0

    def op(self, op_id: int) -> PatternOp:
        return self._by_id[op_id]

    def matched_pairs(self):
        return self.pairs

    def process_ops(self, process: int):
        return [op for op in self.ops if op.process == process]

    def intended_concurrent(self, a: PatternOp, b: PatternOp) -> bool:
        if a.op_id == b.op_id or a.process != b.process:
            return False
        if a.thread != b.thread:
            if self.kind in STENCIL_KINDS:
                return (a.thread in self.communicating_threads
                        and b.thread in self.communicating_threads)
            return True
        if self.kind in STENCIL_KINDS:
            return (
                a.thread not in self.corner_threads
                and a.direction is not None
                and b.direction is not None
                and a.direction != b.direction
            )
        return False


@dataclass
class Assignment:
    """A mechanism-specific binding of every pattern operation.

    ``bindings`` maps op ids to fully addressed descriptors.  ``entity_of``
    maps op ids to the matching entity a channel policy would key on (the
    communicator, the thread's tag bits, the endpoint, the partition, or the
    window); distinct-thread ops sharing an entity serialize on its channel.
    """

    mechanism: Mechanism
    hints: InfoHints
    bindings: dict[int, OpDescriptor]
    entity_of: dict[int, object]
    objects_created: dict[str, int]
    variant: str = ""
    comms: list[Communicator] = field(default_factory=list)
    endpoints_comm: EndpointsComm | None = None
    requests: dict[int, PartitionedRequest] = field(default_factory=dict)
    request_of_op: dict[int, int] = field(default_factory=dict)
    windows: list[Window] = field(default_factory=list)

    def pair_matches(self, send_id: int, recv_id: int) -> bool:
        if self.mechanism is Mechanism.PARTITIONED:
            sreq = self.requests[self.request_of_op[send_id]]
            rreq = self.requests[self.request_of_op[recv_id]]
            return requests_match(sreq, rreq)
        send, recv = self.bindings[send_id], self.bindings[recv_id]
        if send.kind is OpKind.SEND and recv.kind is OpKind.RECV:
            return can_match(send, recv)
        return True  # RMA and collectives have no pairwise matching rule

    def describe_objects(self) -> str:
        return ", ".join(f"{k}={v}" for k, v in sorted(self.objects_created.items()))


# --------------------------------------------------------------------------
# closed-form resource formulas for the 3D box-neighborhood exchange


def _check_3d_domain(x: int, y: int, z: int):
    if min(x, y, z) < 2:
        raise DomainError(
            f"formula holds for thread dims >= 2 per axis, got {(x, y, z)}"
        )


def min_communicators_3d(x: int, y: int, z: int) -> int:
    """Least number of communicators exposing all concurrency of a 3D
    box-neighborhood exchange over an [x, y, z] thread arrangement.

    Face terms, the eight corner diagonals, and the edge diagonals sum up
    separately; each term sizes one family of mirrored communicator sets.
    """
    _check_3d_domain(x, y, z)
    faces = 2 * x * y + 2 * y * z + 2 * x * z
    corner_diagonals = 8 * (x * y + y * z + x * z - 1)
    edge_diagonals = (
        4 * (x * z + y * z - z)
        + 4 * (x * y + y * z - y)
        + 4 * (x * y + x * z - x)
    )
    return faces + corner_diagonals + edge_diagonals


def min_channels_3d(x: int, y: int, z: int) -> int:
    """Parallel channels the same pattern actually needs: the count of
    threads whose patch touches the process boundary."""
    _check_3d_domain(x, y, z)
    return x * y * z - (x - 2) * (y - 2) * (z - 2)


def min_channels_2d(x: int, y: int) -> int:
    if min(x, y) < 2:
        raise DomainError(f"thread dims must be >= 2 per axis, got {(x, y)}")
    return x * y - (x - 2) * (y - 2)


def boundary_thread_count(thread_grid: tuple[int, ...]) -> int:
    if len(thread_grid) == 2:
        return min_channels_2d(*thread_grid)
    if len(thread_grid) == 3:
        return min_channels_3d(*thread_grid)
    raise InvalidArgumentError("thread grids are 2- or 3-dimensional")
