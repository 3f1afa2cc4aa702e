"""Matching, ordering, and the logical-parallelism classifier.

Two operations are logically parallel when no semantic order relation links
them in either direction and no shared potential matching target can force
the library to serialize them under the active hints.  The classifier
evaluates closed-form rules per mechanism; :func:`oracle_logically_parallel`
answers the same question by brute-force enumeration over a small operation
universe and is kept independent of the rule code so the two can check each
other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

from .errors import (
    IncompleteAssignmentError,
    InvalidArgumentError,
    OracleBoundError,
)
from .model import (
    ANY_SOURCE,
    ANY_TAG,
    ContextFamily,
    InfoHints,
    MatchContextId,
    OpDescriptor,
    OpKind,
    PartitionedRequest,
    Direction,
    PARTITION_KINDS,
    RMA_KINDS,
    TWO_SIDED,
    Tag,
)

if TYPE_CHECKING:
    from .patterns.base import Assignment, CommPattern

ORACLE_MAX_OPS = 12


def match_context_of(op: OpDescriptor) -> MatchContextId:
    """The isolation unit this op matches within."""
    if op.context is not None:
        return op.context
    if op.window is not None:
        return MatchContextId(ContextFamily.WINDOW, op.window)
    if op.partition is not None:
        return MatchContextId(ContextFamily.PARTITIONED, op.partition[0])
    raise InvalidArgumentError("descriptor carries no addressing information")


def _tags_equal(a: Tag | None, b: Tag | None) -> bool:
    return a is not None and b is not None and not a.is_wildcard \
        and not b.is_wildcard and a.raw == b.raw


def can_match(send: OpDescriptor, recv: OpDescriptor) -> bool:
    """Does MPI's triplet rule pair this send with this receive?

    Same context, the receive posted at the send's destination, the receive's
    source selector naming the send's origin rank (or ANY_SOURCE), and equal
    tags (or ANY_TAG).  Under an endpoint context both rank comparisons use
    global endpoint ranks.
    """
    if send.kind is not OpKind.SEND or recv.kind is not OpKind.RECV:
        return False
    sctx, rctx = send.context, recv.context
    if sctx is None or rctx is None or sctx != rctx:
        return False
    if sctx.family is ContextFamily.ENDPOINT:
        if send.target != recv.endpoint:
            return False
    else:
        if send.target != recv.process:
            return False
    if recv.target != ANY_SOURCE and recv.target != send.origin_rank:
        return False
    if recv.tag is None or send.tag is None:
        return False
    return recv.tag.is_wildcard or recv.tag.raw == send.tag.raw


def requests_match(send_req: PartitionedRequest, recv_req: PartitionedRequest) -> bool:
    """Partitioned matching happens once per request pair, not per partition."""
    return (
        send_req.direction is Direction.SEND
        and recv_req.direction is Direction.RECV
        and send_req.comm.context_id == recv_req.comm.context_id
        and send_req.peer == recv_req.owner
        and recv_req.peer == send_req.owner
        and send_req.tag.raw == recv_req.tag.raw
    )


def _thread_order(a: OpDescriptor, b: OpDescriptor) -> bool:
    """Deterministic precedence for constraint pairs: program order within a
    thread, (thread, index) lexicographic across threads."""
    if a.thread == b.thread:
        return a.program_index < b.program_index
    return (a.thread, a.program_index) < (b.thread, b.program_index)


def ordered_before(a: OpDescriptor, b: OpDescriptor, hints: InfoHints) -> bool:
    """True iff MPI semantics impose matching/completion order of ``a`` before
    ``b``.

    Covers: same-thread sends on one context whose triplets could compete for
    a common receive while overtaking is not relaxed; the mirror rule for
    posted receives; atomic updates to the same window, target and location
    without the accumulate-ordering relaxation; and collectives issued on the
    same communicator.
    """
    if a.process != b.process:
        return False

    if OpKind.WIN_FLUSH in (a.kind, b.kind):
        # a flush synchronizes against every in-flight op on its window;
        # modeled as an ordering edge rather than a liveness hazard
        if a.kind in RMA_KINDS and b.kind in RMA_KINDS and a.window == b.window:
            return _thread_order(a, b)
        return False

    if a.kind is OpKind.ACCUMULATE and b.kind is OpKind.ACCUMULATE:
        if (
            a.window == b.window
            and a.target == b.target
            and a.endpoint == b.endpoint  # distinct endpoints: distinct origins
            and a.target_location is not None
            and a.target_location == b.target_location
            and not hints.accumulate_ordering_none
        ):
            return _thread_order(a, b)
        return False

    if a.kind is OpKind.COLLECTIVE and b.kind is OpKind.COLLECTIVE:
        if a.context == b.context:
            return _thread_order(a, b)
        return False

    if a.kind in TWO_SIDED and b.kind in TWO_SIDED:
        if a.kind is not b.kind:
            return False  # a send is never ordered against a receive
        if a.thread != b.thread or a.program_index >= b.program_index:
            return False
        if a.context != b.context or hints.allow_overtaking:
            return False
        if a.kind is OpKind.SEND:
            if a.origin_rank != b.origin_rank or a.target != b.target:
                return False
            # nonovertaking binds the pair when one receive could match both
            return _tags_equal(a.tag, b.tag) or not hints.no_any_tag
        # two posted receives: ordered when one message could match both
        if a.endpoint != b.endpoint:
            return False  # distinct endpoints are distinct ranks
        tags_overlap = (
            a.tag.is_wildcard or b.tag.is_wildcard or a.tag.raw == b.tag.raw
        )
        srcs_overlap = (
            a.target == ANY_SOURCE or b.target == ANY_SOURCE or a.target == b.target
        )
        return tags_overlap and srcs_overlap

    return False


class Reason(Enum):
    """Decisive rule behind a parallelism verdict."""

    DIFFERENT_COMMUNICATORS = "different-communicators"
    DIFFERENT_ENDPOINTS = "different-endpoints"
    DIFFERENT_WINDOWS = "different-windows"
    TAG_RELAXED_NO_WILDCARDS = "tag-relaxed-no-wildcards"
    OVERTAKING_SENDS_ONLY = "overtaking-sends-only"
    PARTITION_SAME_REQUEST = "partition-same-request"
    ORDERED_SAME_TRIPLET = "ordered-same-triplet"
    WILDCARD_RISK = "wildcard-risk"
    ATOMIC_SAME_LOCATION = "atomic-same-location"
    COLLECTIVE_SERIAL_ON_COMM = "collective-serial-on-comm"
    RMA_UNORDERED = "rma-unordered"
    DISJOINT_TARGETS = "disjoint-targets"


PARALLEL_REASONS = frozenset({
    Reason.DIFFERENT_COMMUNICATORS,
    Reason.DIFFERENT_ENDPOINTS,
    Reason.DIFFERENT_WINDOWS,
    Reason.TAG_RELAXED_NO_WILDCARDS,
    Reason.OVERTAKING_SENDS_ONLY,
    Reason.PARTITION_SAME_REQUEST,
    Reason.RMA_UNORDERED,
    Reason.DISJOINT_TARGETS,
})


@dataclass(frozen=True)
class ParallelismVerdict:
    parallel: bool
    reason: Reason

    def __post_init__(self):
        if self.parallel != (self.reason in PARALLEL_REASONS):
            raise InvalidArgumentError(
                f"reason {self.reason} inconsistent with parallel={self.parallel}"
            )


def _verdict(parallel: bool, reason: Reason) -> ParallelismVerdict:
    return ParallelismVerdict(parallel, reason)


def logically_parallel(a: OpDescriptor, b: OpDescriptor,
                       hints: InfoHints) -> ParallelismVerdict:
    """Classify whether two operations of one process may proceed on distinct
    channels without violating matching or ordering semantics.

    Send pairs sharing a communicator are judged by whether a common receive
    could capture both under the active hints; any pair of receives sharing a
    communicator stays conservatively serial while wildcards remain possible,
    because the posted queue must stay one structure that a wildcard could
    scan.  Two contributions to one partitioned request transfer in parallel
    but are flagged as sharing that request's completion.
    """
    if a == b:
        raise InvalidArgumentError("need two distinct operations")
    if a.process != b.process:
        raise InvalidArgumentError("classifier compares ops of one process")

    if ordered_before(a, b, hints) or ordered_before(b, a, hints):
        if (a.kind is OpKind.ACCUMULATE and b.kind is OpKind.ACCUMULATE):
            return _verdict(False, Reason.ATOMIC_SAME_LOCATION)
        if a.kind is OpKind.COLLECTIVE:
            return _verdict(False, Reason.COLLECTIVE_SERIAL_ON_COMM)
        # covers two-sided program order and window-flush edges alike
        return _verdict(False, Reason.ORDERED_SAME_TRIPLET)

    if a.kind is OpKind.COLLECTIVE and b.kind is OpKind.COLLECTIVE:
        if a.context == b.context:
            return _verdict(False, Reason.COLLECTIVE_SERIAL_ON_COMM)
        return _verdict(True, Reason.DIFFERENT_COMMUNICATORS)

    if a.kind in PARTITION_KINDS and b.kind in PARTITION_KINDS:
        if a.partition[0] == b.partition[0]:
            return _verdict(True, Reason.PARTITION_SAME_REQUEST)
        return _verdict(True, Reason.DIFFERENT_COMMUNICATORS)

    if a.kind in RMA_KINDS and b.kind in RMA_KINDS:
        if a.window != b.window:
            return _verdict(True, Reason.DIFFERENT_WINDOWS)
        if a.endpoint is not None and b.endpoint is not None \
                and a.endpoint != b.endpoint:
            return _verdict(True, Reason.DIFFERENT_ENDPOINTS)
        return _verdict(True, Reason.RMA_UNORDERED)

    if a.kind in TWO_SIDED and b.kind in TWO_SIDED:
        return _two_sided_verdict(a, b, hints)

    # mixed families never share a matching domain
    return _verdict(True, Reason.DISJOINT_TARGETS)


def _two_sided_verdict(a, b, hints) -> ParallelismVerdict:
    if a.context != b.context:
        return _verdict(True, Reason.DIFFERENT_COMMUNICATORS)
    if a.context.family is ContextFamily.ENDPOINT and a.endpoint != b.endpoint:
        return _verdict(True, Reason.DIFFERENT_ENDPOINTS)

    if a.kind is OpKind.SEND and b.kind is OpKind.SEND:
        if a.target != b.target:
            return _verdict(True, Reason.DISJOINT_TARGETS)
        competing = _tags_equal(a.tag, b.tag) or not hints.no_any_tag
        if not competing:
            return _verdict(True, Reason.TAG_RELAXED_NO_WILDCARDS)
        if hints.allow_overtaking:
            return _verdict(True, Reason.OVERTAKING_SENDS_ONLY)
        if _tags_equal(a.tag, b.tag):
            return _verdict(False, Reason.ORDERED_SAME_TRIPLET)
        return _verdict(False, Reason.WILDCARD_RISK)

    if a.kind is OpKind.RECV and b.kind is OpKind.RECV:
        tags_overlap = (
            a.tag.is_wildcard or b.tag.is_wildcard or a.tag.raw == b.tag.raw
            or not hints.no_any_tag
        )
        srcs_overlap = (
            a.target == ANY_SOURCE or b.target == ANY_SOURCE
            or a.target == b.target or not hints.no_any_source
        )
        if not (tags_overlap and srcs_overlap):
            return _verdict(True, Reason.TAG_RELAXED_NO_WILDCARDS)
        if not hints.wildcards_possible:
            return _verdict(False, Reason.ORDERED_SAME_TRIPLET)
        return _verdict(False, Reason.WILDCARD_RISK)

    # one send, one receive: their potential match sets never intersect
    # (a receive only pairs with remote traffic addressed to it)
    return _verdict(True, Reason.DISJOINT_TARGETS)


# --------------------------------------------------------------------------
# brute-force oracle


_SYNTH_THREAD_BASE = 10_000


def _home_of(op: OpDescriptor):
    """Where receives competing with this op would be posted."""
    if op.kind is OpKind.SEND:
        return op.target
    if op.context.family is ContextFamily.ENDPOINT:
        return op.endpoint
    return op.process


def _complete_universe(ops: list[OpDescriptor], hints: InfoHints) -> list[OpDescriptor]:
    """Extend a universe with every potential counterpart the hints permit.

    For each send the exactly-matching receive, for each receive the exactly
    matching send, and for every (context, destination) the wildcard receives
    that remain legal.  These hypothetical ops realize the worst case the
    active hints allow, which is what a library must provision for.
    """
    extra: dict[tuple, OpDescriptor] = {}
    synth = itertools.count(_SYNTH_THREAD_BASE)
    two_sided = [op for op in ops if op.kind in TWO_SIDED]

    def add_recv(ctx, home, src, tag):
        key = ("r", ctx, home, src, None if tag.is_wildcard else tag.raw)
        if key in extra:
            return
        if ctx.family is ContextFamily.ENDPOINT:
            source, ep = (10_000 + home, next(synth)), home
        else:
            source, ep = (home, next(synth)), None
        extra[key] = OpDescriptor(
            kind=OpKind.RECV,
            source=source,
            program_index=0,
            context=ctx,
            target=src,
            tag=tag,
            endpoint=ep,
        )

    def add_send(ctx, origin, dest, tag):
        key = ("s", ctx, origin, dest, tag.raw)
        if key in extra:
            return
        if ctx.family is ContextFamily.ENDPOINT:
            source = (20_000 + origin, next(synth))
            ep = origin
        else:
            source = (origin, next(synth))
            ep = None
        extra[key] = OpDescriptor(
            kind=OpKind.SEND,
            source=source,
            program_index=0,
            context=ctx,
            target=dest,
            tag=tag,
            endpoint=ep,
        )

    homes: set[tuple[MatchContextId, int]] = set()
    srcs_by_ctx: dict[MatchContextId, set[int]] = {}
    tags_by_ctx: dict[MatchContextId, set[int]] = {}
    for o in two_sided:
        ctx = o.context
        homes.add((ctx, _home_of(o)))
        srcs = srcs_by_ctx.setdefault(ctx, set())
        tags = tags_by_ctx.setdefault(ctx, set())
        if o.kind is OpKind.SEND:
            srcs.add(o.origin_rank)
            tags.add(o.tag.raw)
            add_recv(ctx, o.target, o.origin_rank, o.tag)
        else:
            if o.target != ANY_SOURCE:
                srcs.add(o.target)
            if not o.tag.is_wildcard:
                tags.add(o.tag.raw)
            src = o.target if o.target != ANY_SOURCE else 30_000
            tag = o.tag if not o.tag.is_wildcard else Tag(0)
            add_send(ctx, src, _home_of(o), tag)

    for ctx, home in homes:
        if not hints.no_any_tag and not hints.no_any_source:
            add_recv(ctx, home, ANY_SOURCE, ANY_TAG)
        elif not hints.no_any_tag:
            for src in srcs_by_ctx.get(ctx, ()):
                add_recv(ctx, home, src, ANY_TAG)
        elif not hints.no_any_source:
            for raw in tags_by_ctx.get(ctx, ()):
                add_recv(ctx, home, ANY_SOURCE, Tag(raw))

    return ops + list(extra.values())


def _oracle_components(universe: list[OpDescriptor], hints: InfoHints):
    """Union-find over serialization edges harvested by enumeration."""
    aug = _complete_universe(universe, hints)
    index = {id(op): i for i, op in enumerate(aug)}
    parent = list(range(len(aug)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(x, y):
        rx, ry = find(index[id(x)]), find(index[id(y)])
        if rx != ry:
            parent[rx] = ry

    sends = [o for o in aug if o.kind is OpKind.SEND]
    recvs = [o for o in aug if o.kind is OpKind.RECV]

    if not hints.allow_overtaking:
        # nonovertaking binds only same-origin sends; messages from distinct
        # ranks (or endpoints) may legally match a shared receive in any order
        for x, y in itertools.combinations(sends, 2):
            if x.origin_rank != y.origin_rank:
                continue
            if any(can_match(x, r) and can_match(y, r) for r in recvs):
                union(x, y)
    for x, y in itertools.combinations(recvs, 2):
        if any(can_match(s, x) and can_match(s, y) for s in sends):
            union(x, y)

    real = universe
    for x, y in itertools.combinations(real, 2):
        if x.process != y.process:
            continue
        if ordered_before(x, y, hints) or ordered_before(y, x, hints):
            union(x, y)
        if (
            x.kind is OpKind.COLLECTIVE
            and y.kind is OpKind.COLLECTIVE
            and x.context == y.context
        ):
            union(x, y)

    return aug, index, find


def oracle_logically_parallel(a: OpDescriptor, b: OpDescriptor,
                              universe: Iterable[OpDescriptor],
                              hints: InfoHints = InfoHints()) -> bool:
    """Brute-force reference for :func:`logically_parallel`.

    The universe (at most 12 operations) is completed with every counterpart
    and wildcard receive the hints permit; the oracle then enumerates, over
    all operation pairs, which ones can compete for a common matching target
    or are linked by an ordering constraint, and declares ``a`` and ``b``
    parallel exactly when no chain of such links connects them.
    """
    ops = list(universe)
    for extra_op in (a, b):
        if not any(extra_op == o for o in ops):
            ops.append(extra_op)
    if len(ops) > ORACLE_MAX_OPS:
        raise OracleBoundError(
            f"universe of {len(ops)} ops exceeds the enumeration bound "
            f"{ORACLE_MAX_OPS}"
        )
    aug, index, find = _oracle_components(ops, hints)
    ia = next(i for i, o in enumerate(aug) if o == a)
    ib = next(i for i, o in enumerate(aug) if o == b)
    return find(ia) != find(ib)


# --------------------------------------------------------------------------
# classifier/oracle equivalence sweep


def _hint_combinations():
    for overtaking in (False, True):
        for no_tag in (False, True):
            for no_src in (False, True):
                yield InfoHints(allow_overtaking=overtaking, no_any_tag=no_tag,
                                no_any_source=no_src)


def equivalence_scenarios(max_ops: int = 12):
    """Yield (name, universe, hints) families for the classifier/oracle check.

    Covers matched send/receive batches over one or two contexts with tag and
    destination variations, wildcard receives wherever the hints permit them,
    endpoint-scoped ops, RMA sets over one or two windows, collectives, and
    partitioned contributions; at most 2 processes, 3 threads per process,
    and ``max_ops`` operations per universe.
    """
    from .model import MatchContextId as Ctx  # local alias for brevity

    c1 = Ctx(ContextFamily.COMM, 1)
    c2 = Ctx(ContextFamily.COMM, 2)
    e1 = Ctx(ContextFamily.ENDPOINT, 3)

    def send(ctx, thr, idx, dst, tag, ep=None):
        return OpDescriptor(OpKind.SEND, (0, thr), idx, context=ctx,
                            target=dst, tag=Tag(tag), endpoint=ep)

    def recv(ctx, thr, idx, src, tag, ep=None):
        return OpDescriptor(OpKind.RECV, (1, thr), idx, context=ctx,
                            target=src, tag=tag, endpoint=ep)

    def local_recv(ctx, thr, idx, src, tag):
        return OpDescriptor(OpKind.RECV, (0, thr), idx, context=ctx,
                            target=src, tag=tag)

    def rma(kind, thr, idx, win, loc, target=1, ep=None):
        return OpDescriptor(kind, (0, thr), idx, window=win, target=target,
                            target_location=loc, endpoint=ep)

    for hints in _hint_combinations():
        wild_tag = not hints.no_any_tag
        wild_src = not hints.no_any_source

        batches = {
            "sends-two-comms": [send(c1, 0, 0, 1, 3), send(c2, 1, 0, 1, 3),
                                recv(c1, 0, 0, 0, Tag(3)),
                                recv(c2, 1, 0, 0, Tag(3))],
            "sends-one-comm-tags": [send(c1, 0, 0, 1, 3), send(c1, 1, 0, 1, 4),
                                    recv(c1, 0, 0, 0, Tag(3)),
                                    recv(c1, 1, 0, 0, Tag(4))],
            "sends-one-comm-same-triplet": [
                send(c1, 0, 0, 1, 7), send(c1, 1, 0, 1, 7),
                recv(c1, 0, 0, 0, Tag(7)), recv(c1, 1, 0, 0, Tag(7))],
            "sends-same-thread": [send(c1, 0, 0, 1, 3), send(c1, 0, 1, 1, 4),
                                  recv(c1, 0, 0, 0, Tag(3)),
                                  recv(c1, 1, 0, 0, Tag(4))],
            "sends-different-dests": [
                send(c1, 0, 0, 1, 3),
                OpDescriptor(OpKind.SEND, (0, 1), 0, context=c1, target=2,
                             tag=Tag(4)),
                recv(c1, 0, 0, 0, Tag(3))],
            "recv-pair-local": [local_recv(c1, 0, 0, 1, Tag(3)),
                                local_recv(c1, 1, 0, 1, Tag(4))],
            "recv-same-thread": [local_recv(c1, 0, 0, 1, Tag(3)),
                                 local_recv(c1, 0, 1, 1, Tag(3))],
            "mixed-send-recv": [send(c1, 0, 0, 1, 3),
                                local_recv(c1, 1, 0, 1, Tag(5)),
                                recv(c1, 2, 0, 0, Tag(3))],
            "endpoints-distinct": [
                send(e1, 0, 0, 9, 3, ep=0), send(e1, 1, 0, 9, 3, ep=1),
                recv(e1, 0, 0, 0, Tag(3), ep=9), recv(e1, 0, 1, 1, Tag(3), ep=9)],
            "endpoints-same-ep": [
                send(e1, 0, 0, 9, 3, ep=0), send(e1, 1, 1, 9, 4, ep=0),
                recv(e1, 0, 0, ANY_SOURCE if wild_src else 0,
                     ANY_TAG if wild_tag else Tag(3), ep=9),
                recv(e1, 0, 1, 0 if hints.no_any_source else ANY_SOURCE,
                     Tag(4), ep=9)],
            "rma-windows": [rma(OpKind.PUT, 0, 0, 1, 10),
                            rma(OpKind.PUT, 1, 0, 2, 10),
                            rma(OpKind.ACCUMULATE, 0, 1, 1, 10),
                            rma(OpKind.ACCUMULATE, 1, 1, 1, 10),
                            rma(OpKind.ACCUMULATE, 2, 0, 1, 11)],
            "collectives": [
                OpDescriptor(OpKind.COLLECTIVE, (0, 0), 0, context=c1),
                OpDescriptor(OpKind.COLLECTIVE, (0, 1), 0, context=c1),
                OpDescriptor(OpKind.COLLECTIVE, (0, 2), 0, context=c2)],
            "partitioned": [
                OpDescriptor(OpKind.PARTITION_READY, (0, 0), 0, partition=(1, 0)),
                OpDescriptor(OpKind.PARTITION_READY, (0, 1), 0, partition=(1, 1)),
                OpDescriptor(OpKind.PARTITION_READY, (0, 2), 0, partition=(2, 0))],
        }
        if wild_tag or wild_src:
            batches["wildcard-recv"] = [
                send(c1, 0, 0, 1, 3), send(c1, 1, 0, 1, 4),
                recv(c1, 0, 0,
                     ANY_SOURCE if wild_src else 0,
                     ANY_TAG if wild_tag else Tag(3)),
                recv(c1, 1, 1, 0, Tag(4))]
        for name, universe in batches.items():
            if not universe:
                continue
            if len(universe) > max_ops:
                continue
            yield name, universe, hints


def oracle_equivalence_check(max_ops: int = 12):
    """Compare classifier and oracle over the generated families.

    Returns (comparisons, mismatches) where each mismatch records the family
    name, the two descriptors, the hints, and both verdicts.
    """
    if max_ops > ORACLE_MAX_OPS:
        raise OracleBoundError(
            f"bound {max_ops} exceeds the enumeration limit {ORACLE_MAX_OPS}"
        )
    comparisons = 0
    mismatches = []
    for name, universe, hints in equivalence_scenarios(max_ops):
        for a, b in itertools.combinations(universe, 2):
            if a.process != b.process or a == b:
                continue
            verdict = logically_parallel(a, b, hints)
            reference = oracle_logically_parallel(a, b, universe, hints)
            comparisons += 1
            if verdict.parallel != reference:
                mismatches.append((name, a, b, hints, verdict, reference))
    return comparisons, mismatches


# --------------------------------------------------------------------------
# assignment validation


@dataclass
class ValidationReport:
    """Outcome of checking an assignment against its pattern."""

    matching_violations: list = field(default_factory=list)
    lost_parallelism: list = field(default_factory=list)
    contexts_used: int = 0

    @property
    def clean(self) -> bool:
        return not self.matching_violations and not self.lost_parallelism


def _serial_bucket_keys(op: OpDescriptor, hints: InfoHints):
    """Bucket keys under which this op could be classifier-serial with peers.

    Only ops sharing a bucket can yield a non-parallel verdict, which keeps
    validation near-linear instead of quadratic in the pattern size.
    """
    keys = []
    if op.kind in TWO_SIDED:
        ctx = op.context
        if hints.wildcards_possible:
            scope = op.endpoint if ctx.family is ContextFamily.ENDPOINT else None
            keys.append(("ctx", ctx, scope))
        else:
            if op.kind is OpKind.SEND:
                keys.append(("s", ctx, op.endpoint, op.target,
                             op.tag.raw if op.tag else None))
            else:
                keys.append(("r", ctx, op.endpoint, op.target,
                             op.tag.raw if op.tag else None))
    elif op.kind is OpKind.COLLECTIVE:
        keys.append(("coll", op.context))
    elif op.kind is OpKind.ACCUMULATE and not hints.accumulate_ordering_none:
        keys.append(("atomic", op.window, op.target, op.target_location))
    return keys


def validate_assignment(pattern: "CommPattern", assignment: "Assignment") -> ValidationReport:
    """Check matching correctness and surviving concurrency of an assignment.

    Violations are intended send/receive pairs whose bound descriptors fail
    the matching rule.  Lost parallelism is every intended-concurrent pair
    that either the classifier deems serial or that the assignment binds to
    one matching entity across distinct threads (which a per-entity channel
    map would serialize).  Pairs within a single thread are exempt from the
    entity rule: one thread issues serially anyway.
    """
    report = ValidationReport()
    hints = assignment.hints
    bindings = assignment.bindings

    missing = [op.op_id for op in pattern.ops if op.op_id not in bindings]
    if missing:
        raise IncompleteAssignmentError(
            f"assignment leaves {len(missing)} ops unbound (first: {missing[0]})"
        )

    for send_id, recv_id in pattern.matched_pairs():
        if not assignment.pair_matches(send_id, recv_id):
            report.matching_violations.append(
                (send_id, recv_id, "bound contexts cannot match")
            )

    # lost parallelism, representative process: patterns are torus-symmetric
    probe = pattern.representative_process
    ops = [op for op in pattern.ops if op.process == probe]
    by_entity: dict = {}
    by_bucket: dict = {}
    for pop in ops:
        desc = bindings[pop.op_id]
        by_entity.setdefault(assignment.entity_of[pop.op_id], []).append(pop)
        for key in _serial_bucket_keys(desc, hints):
            by_bucket.setdefault(key, []).append(pop)

    seen = set()

    def consider(x, y):
        pair = (min(x.op_id, y.op_id), max(x.op_id, y.op_id))
        if pair in seen:
            return
        seen.add(pair)
        if not pattern.intended_concurrent(x, y):
            return
        va, vb = bindings[x.op_id], bindings[y.op_id]
        serial = not logically_parallel(va, vb, hints).parallel
        shared_entity = (
            x.thread != y.thread
            and assignment.entity_of[x.op_id] == assignment.entity_of[y.op_id]
        )
        if serial or shared_entity:
            report.lost_parallelism.append(pair)

    for group in itertools.chain(by_entity.values(), by_bucket.values()):
        for x, y in itertools.combinations(group, 2):
            consider(x, y)

    report.lost_parallelism.sort()
    report.contexts_used = len(
        {match_context_of(d) for d in bindings.values()}
    )
    return report
