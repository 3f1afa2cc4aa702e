"""Domain types for multithreaded MPI communication scenarios.

Everything a scenario is made of lives here: info hints, tag bit layouts,
communicators, endpoint communicators, RMA windows, partitioned requests,
and the operation descriptor that the matching/ordering rules consume.

Value types are immutable after construction.  The one exception is
:class:`PartitionedRequest`, whose state transitions are applied only by the
single-threaded simulation engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    DoubleReadyError,
    InvalidArgumentError,
    InvalidTransitionError,
    TagOverflowError,
)

TAG_WIDTH_DEFAULT = 23  # usable tag bits; a common floor across MPI libraries

# Wildcard sentinels.  Both sit outside every encodable value range.
ANY_SOURCE = -2


class Placement(Enum):
    """Where the thread-id bits sit inside the encoded tag word."""

    MOST_SIGNIFICANT = "msb"
    LEAST_SIGNIFICANT = "lsb"


class HashType(Enum):
    """How a library maps thread-id bits extracted from tags onto channels."""

    ONE_TO_ONE = "one-to-one"
    HASHED = "hashed"


@dataclass(frozen=True)
class TagBitLayout:
    """Partition of the tag word into sender-tid, receiver-tid and app fields.

    ``num_app_bits`` defaults to whatever the tag width leaves over once both
    thread-id fields are accounted for.
    """

    num_vcis: int
    num_tid_bits: int
    num_app_bits: int | None = None
    placement: Placement = Placement.MOST_SIGNIFICANT
    hash_type: HashType = HashType.ONE_TO_ONE
    tag_width: int = TAG_WIDTH_DEFAULT

    def __post_init__(self):
        if self.num_vcis < 1:
            raise InvalidArgumentError("num_vcis must be positive")
        if self.num_tid_bits < 1:
            raise InvalidArgumentError("num_tid_bits must be positive")
        if self.num_app_bits is None:
            object.__setattr__(
                self, "num_app_bits", self.tag_width - 2 * self.num_tid_bits
            )
        if self.num_app_bits < 0:
            raise InvalidArgumentError("negative app-bit width")
        if 2 * self.num_tid_bits + self.num_app_bits > self.tag_width:
            raise TagOverflowError(
                f"layout needs {2 * self.num_tid_bits + self.num_app_bits} bits, "
                f"tag width is {self.tag_width}"
            )
        if (
            self.hash_type is HashType.ONE_TO_ONE
            and self.num_vcis > 1 << self.num_tid_bits
        ):
            raise InvalidArgumentError(
                "one-to-one mapping requires num_vcis <= 2**num_tid_bits"
            )


@dataclass(frozen=True)
class Tag:
    """A match tag: a raw unsigned value of configurable width.

    ``ANY_TAG`` is the distinguished wildcard; its raw value is negative and
    therefore outside every encodable range.
    """

    raw: int
    width: int = field(default=TAG_WIDTH_DEFAULT, compare=False)

    def __post_init__(self):
        if self.raw >= 0 and self.raw >= 1 << self.width:
            raise TagOverflowError(f"raw tag {self.raw} exceeds {self.width} bits")
        if self.raw < 0 and self.raw != -1:
            raise InvalidArgumentError("negative tags are reserved for ANY_TAG")

    @property
    def is_wildcard(self) -> bool:
        return self.raw < 0

    def __repr__(self):
        return "ANY_TAG" if self.is_wildcard else f"Tag({self.raw})"


ANY_TAG = Tag(-1)


def encode_tag(src_tid: int, dst_tid: int, app_bits: int, layout: TagBitLayout) -> Tag:
    """Pack (sender tid, receiver tid, app payload) into one tag word.

    Field overflow raises :class:`TagOverflowError`; applications that already
    use most of the tag space genuinely run out of bits here.
    """
    for name, value, nbits in (
        ("src_tid", src_tid, layout.num_tid_bits),
        ("dst_tid", dst_tid, layout.num_tid_bits),
        ("app_bits", app_bits, layout.num_app_bits),
    ):
        if value < 0 or value >= 1 << nbits:
            raise TagOverflowError(f"{name}={value} does not fit {nbits} bits")
    if layout.placement is Placement.MOST_SIGNIFICANT:
        # tid fields above the app field, packed from bit 0 upward
        raw = (
            src_tid << (layout.num_tid_bits + layout.num_app_bits)
            | dst_tid << layout.num_app_bits
            | app_bits
        )
    else:
        raw = (
            app_bits << (2 * layout.num_tid_bits)
            | src_tid << layout.num_tid_bits
            | dst_tid
        )
    return Tag(raw, layout.tag_width)


def decode_tag(tag: Tag, layout: TagBitLayout) -> tuple[int, int, int]:
    """Invert :func:`encode_tag`, returning (src_tid, dst_tid, app_bits)."""
    if tag.is_wildcard:
        raise InvalidArgumentError("cannot decode the wildcard tag")
    tid_mask = (1 << layout.num_tid_bits) - 1
    app_mask = (1 << layout.num_app_bits) - 1 if layout.num_app_bits else 0
    if layout.placement is Placement.MOST_SIGNIFICANT:
        src = (tag.raw >> (layout.num_tid_bits + layout.num_app_bits)) & tid_mask
        dst = (tag.raw >> layout.num_app_bits) & tid_mask
        app = tag.raw & app_mask
    else:
        app = (tag.raw >> (2 * layout.num_tid_bits)) & app_mask
        src = (tag.raw >> layout.num_tid_bits) & tid_mask
        dst = tag.raw & tid_mask
    return src, dst, app


@dataclass(frozen=True)
class InfoHints:
    """Per-communicator assertions that relax default matching semantics.

    All flags default to off, i.e. full MPI default semantics.  A tag bit
    layout may be attached only once both wildcard assertions hold, because
    splitting matching by tag bits is unsafe while wildcards remain possible.
    """

    allow_overtaking: bool = False
    no_any_tag: bool = False
    no_any_source: bool = False
    accumulate_ordering_none: bool = False
    tag_vci_bits: TagBitLayout | None = None

    def __post_init__(self):
        if self.tag_vci_bits is not None and not (
            self.no_any_tag and self.no_any_source
        ):
            raise InvalidArgumentError(
                "tag_vci_bits requires no_any_tag and no_any_source"
            )

    @property
    def wildcards_possible(self) -> bool:
        return not (self.no_any_tag and self.no_any_source)


class Purpose(Enum):
    """Why a communicator was created.  Metadata only; never affects matching."""

    GENERAL = "general"
    PARALLELISM_EXPOSURE = "parallelism"


class IdAllocator:
    """Allocates scenario-unique ids for communicators, windows and requests."""

    def __init__(self):
        self._context = itertools.count()
        self._window = itertools.count()
        self._request = itertools.count()

    def fresh_context(self) -> int:
        return next(self._context)

    def fresh_window(self) -> int:
        return next(self._window)

    def fresh_request(self) -> int:
        return next(self._request)


@dataclass(frozen=True)
class Communicator:
    context_id: int
    group: tuple[int, ...]
    hints: InfoHints = InfoHints()
    purpose: Purpose = Purpose.GENERAL

    def __post_init__(self):
        if len(set(self.group)) != len(self.group):
            raise InvalidArgumentError("communicator group has duplicate ranks")


def world_communicator(num_processes: int, ids: IdAllocator,
                       hints: InfoHints = InfoHints()) -> Communicator:
    return Communicator(ids.fresh_context(), tuple(range(num_processes)), hints)


def dup_communicator(comm: Communicator, ids: IdAllocator,
                     hints: InfoHints | None = None,
                     purpose: Purpose | None = None) -> Communicator:
    """Duplicate: fresh context id, same group."""
    return Communicator(
        ids.fresh_context(),
        comm.group,
        comm.hints if hints is None else hints,
        comm.purpose if purpose is None else purpose,
    )


@dataclass(frozen=True)
class Window:
    window_id: int
    hints: InfoHints = InfoHints()


@dataclass(frozen=True)
class EndpointsComm:
    """A communicator whose addressable ranks are per-process endpoints.

    Endpoint ``e`` of process ``p`` has global rank ``prefix(p) + e`` where
    ``prefix`` is the running sum of endpoint counts of earlier processes.
    With uniform counts this reduces to ``p * n_ep + e``.  Each endpoint takes
    on the matching and ordering semantics of an ordinary rank.
    """

    context_id: int
    parent: Communicator
    eps_per_process: tuple[int, ...]

    @property
    def prefix(self) -> tuple[int, ...]:
        out, acc = [], 0
        for n in self.eps_per_process:
            out.append(acc)
            acc += n
        return tuple(out)

    @property
    def total_endpoints(self) -> int:
        return sum(self.eps_per_process)

    def endpoint_rank(self, process: int, local_ep: int) -> int:
        if not 0 <= process < len(self.eps_per_process):
            raise InvalidArgumentError(f"no process {process} in endpoints comm")
        if not 0 <= local_ep < self.eps_per_process[process]:
            raise InvalidArgumentError(
                f"process {process} has {self.eps_per_process[process]} endpoints, "
                f"asked for {local_ep}"
            )
        return self.prefix[process] + local_ep

    def owner_of(self, ep_rank: int) -> tuple[int, int]:
        """Inverse of :meth:`endpoint_rank`: global rank -> (process, local)."""
        if not 0 <= ep_rank < self.total_endpoints:
            raise InvalidArgumentError(f"endpoint rank {ep_rank} out of range")
        prefix = self.prefix
        for p in range(len(prefix) - 1, -1, -1):
            if ep_rank >= prefix[p]:
                return p, ep_rank - prefix[p]
        raise AssertionError("unreachable")


def create_endpoints_comm(parent: Communicator, eps_per_process,
                          ids: IdAllocator) -> EndpointsComm:
    """Create a communicator exposing per-process endpoint ranks.

    ``eps_per_process`` is either one count applied to every process of the
    parent group or a per-process sequence.  Every count must be >= 1.
    """
    if isinstance(eps_per_process, int):
        counts = tuple([eps_per_process] * len(parent.group))
    else:
        counts = tuple(eps_per_process)
        if len(counts) != len(parent.group):
            raise InvalidArgumentError(
                "eps_per_process length must equal the parent group size"
            )
    if any(n < 1 for n in counts):
        raise InvalidArgumentError("every process needs at least one endpoint")
    return EndpointsComm(ids.fresh_context(), parent, counts)


class Direction(Enum):
    SEND = "send"
    RECV = "recv"


class RequestState(Enum):
    INACTIVE = "inactive"
    ACTIVE = "active"
    COMPLETING = "completing"
    COMPLETE = "complete"


class PartitionEvent(Enum):
    START = "start"
    PREADY = "pready"
    PARRIVED_QUERY = "parrived"
    WAIT_ALL = "waitall"


class PartitionedRequest:
    """Persistent partitioned message: one request, many partition slots.

    State transitions only along INACTIVE -> ACTIVE -> COMPLETING -> COMPLETE
    -> ACTIVE (re-activation for the next iteration).  For a send request the
    per-partition flags record Pready calls; for a receive request they record
    partition arrival.  All flags reset on re-activation.
    """

    def __init__(self, request_id: int, direction: Direction, num_partitions: int,
                 partition_size: int, peer: int, tag: Tag, comm: Communicator,
                 owner: int):
        if num_partitions < 1:
            raise InvalidArgumentError("num_partitions must be positive")
        if partition_size < 1:
            raise InvalidArgumentError("partition_size must be positive")
        self.request_id = request_id
        self.direction = direction
        self.num_partitions = num_partitions
        self.partition_size = partition_size
        self.peer = peer
        self.tag = tag
        self.comm = comm
        self.owner = owner
        self.state = RequestState.INACTIVE
        self.partition_flags = [False] * num_partitions

    def _check_partition(self, i: int):
        if not 0 <= i < self.num_partitions:
            raise InvalidArgumentError(
                f"partition {i} out of range 0..{self.num_partitions - 1}"
            )

    def start(self):
        if self.state not in (RequestState.INACTIVE, RequestState.COMPLETE):
            raise InvalidTransitionError(f"start while {self.state.value}")
        self.state = RequestState.ACTIVE
        self.partition_flags = [False] * self.num_partitions

    def pready(self, i: int):
        # COMPLETING is allowed: one thread may already be blocked in the
        # wait while the others still contribute their partitions
        self._check_partition(i)
        if self.direction is not Direction.SEND:
            raise InvalidTransitionError("pready on a receive request")
        if self.state not in (RequestState.ACTIVE, RequestState.COMPLETING):
            raise InvalidTransitionError(f"pready while {self.state.value}")
        if self.partition_flags[i]:
            raise DoubleReadyError(f"partition {i} already marked ready")
        self.partition_flags[i] = True
        if self.state is RequestState.COMPLETING and all(self.partition_flags):
            self.state = RequestState.COMPLETE

    def parrived(self, i: int) -> bool:
        """Pure arrival query; never changes state."""
        self._check_partition(i)
        if self.direction is not Direction.RECV:
            raise InvalidTransitionError("parrived on a send request")
        if self.state not in (RequestState.ACTIVE, RequestState.COMPLETING,
                              RequestState.COMPLETE):
            raise InvalidTransitionError(f"parrived while {self.state.value}")
        return self.partition_flags[i]

    def deliver(self, i: int):
        """Engine-side: mark partition ``i`` of a receive request as arrived."""
        self._check_partition(i)
        if self.direction is not Direction.RECV:
            raise InvalidTransitionError("deliver on a send request")
        self.partition_flags[i] = True
        if self.state is RequestState.COMPLETING and all(self.partition_flags):
            self.state = RequestState.COMPLETE

    def wait_all(self) -> bool:
        """Attempt completion.  Returns True when the request completed.

        When partitions are still outstanding the request parks in the
        COMPLETING state; the caller (the simulation engine) records the wait
        and retries after further deliveries.  Waiting on an already complete
        request returns immediately.
        """
        if self.state is RequestState.COMPLETE:
            return True
        if self.state not in (RequestState.ACTIVE, RequestState.COMPLETING):
            raise InvalidTransitionError(f"wait_all while {self.state.value}")
        if all(self.partition_flags):
            self.state = RequestState.COMPLETE
            return True
        self.state = RequestState.COMPLETING
        return False


def partitioned_transition(req: PartitionedRequest, event: PartitionEvent,
                           partition: int | None = None):
    """Apply one lifecycle event to a partitioned request.

    Returns ``(req, outcome)`` where the outcome is the queried flag for
    PARRIVED_QUERY, True/False (completed or blocked) for WAIT_ALL, and None
    for the state-only events.
    """
    if event is PartitionEvent.START:
        req.start()
        return req, None
    if event is PartitionEvent.PREADY:
        if partition is None:
            raise InvalidArgumentError("pready needs a partition index")
        req.pready(partition)
        return req, None
    if event is PartitionEvent.PARRIVED_QUERY:
        if partition is None:
            raise InvalidArgumentError("parrived needs a partition index")
        return req, req.parrived(partition)
    if event is PartitionEvent.WAIT_ALL:
        return req, req.wait_all()
    raise InvalidArgumentError(f"unknown event {event}")


class OpKind(Enum):
    SEND = "send"
    RECV = "recv"
    PUT = "put"
    GET = "get"
    ACCUMULATE = "accumulate"
    COLLECTIVE = "collective"
    PARTITION_READY = "pready"
    PARTITION_ARRIVED_TEST = "parrived"
    WIN_FLUSH = "win-flush"  # window synchronization issued alongside RMA


TWO_SIDED = frozenset({OpKind.SEND, OpKind.RECV})
RMA_KINDS = frozenset({OpKind.PUT, OpKind.GET, OpKind.ACCUMULATE,
                       OpKind.WIN_FLUSH})
PARTITION_KINDS = frozenset({OpKind.PARTITION_READY, OpKind.PARTITION_ARRIVED_TEST})


class ContextFamily(Enum):
    COMM = "comm"
    ENDPOINT = "endpoint"
    WINDOW = "window"
    PARTITIONED = "partitioned"


@dataclass(frozen=True)
class MatchContextId:
    """Isolation unit for matching: communicator context, endpoint-bearing
    context, window, or partitioned request.  ``key`` is the owning object's
    id within its family."""

    family: ContextFamily
    key: int


@dataclass(frozen=True)
class OpDescriptor:
    """One communication operation with its full matching coordinates.

    ``source`` is the issuing (process, thread).  For two-sided operations
    ``target`` is the peer process rank, or the peer endpoint rank when the
    context family is ENDPOINT, or ``ANY_SOURCE`` on a wildcard receive.
    ``endpoint`` carries the global rank of the endpoint the op is issued at.
    Exactly one addressing family (context / window / partition) is populated,
    as dictated by ``kind``.
    """

    kind: OpKind
    source: tuple[int, int]
    program_index: int
    context: MatchContextId | None = None
    target: int | None = None
    tag: Tag | None = None
    endpoint: int | None = None
    window: int | None = None
    target_location: int | None = None
    partition: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind in TWO_SIDED or self.kind is OpKind.COLLECTIVE:
            if self.context is None or self.window is not None or self.partition is not None:
                raise InvalidArgumentError(f"{self.kind.value} ops address a context")
            if self.context.family is ContextFamily.ENDPOINT and self.endpoint is None:
                raise InvalidArgumentError("endpoint-context ops need an endpoint rank")
        elif self.kind in RMA_KINDS:
            if self.window is None or self.context is not None or self.partition is not None:
                raise InvalidArgumentError(f"{self.kind.value} ops address a window")
        elif self.kind in PARTITION_KINDS:
            if self.partition is None or self.context is not None or self.window is not None:
                raise InvalidArgumentError(
                    f"{self.kind.value} ops address a partitioned request"
                )

    @property
    def process(self) -> int:
        return self.source[0]

    @property
    def thread(self) -> int:
        return self.source[1]

    @property
    def origin_rank(self) -> int:
        """The rank this op originates from for matching purposes: the global
        endpoint rank under an endpoint context, the process rank otherwise."""
        if self.context is not None and self.context.family is ContextFamily.ENDPOINT:
            return self.endpoint
        return self.source[0]


def check_wildcards_allowed(op: OpDescriptor, hints: InfoHints):
    """Reject receive wildcards that the owning context's hints forbid."""
    if op.kind is not OpKind.RECV:
        return
    if op.tag is not None and op.tag.is_wildcard and hints.no_any_tag:
        raise InvalidArgumentError("ANY_TAG receive under a no_any_tag context")
    if op.target == ANY_SOURCE and hints.no_any_source:
        raise InvalidArgumentError("ANY_SOURCE receive under a no_any_source context")
