"""Halo-exchange pattern generation and per-mechanism context assignments.

Patterns are torus-wrapped: every process sees the full neighbor set, so the
per-process structure is uniform and mirrored context maps close around the
torus.  Thread and process coordinates are row-major with x fastest; "north"
is the negative-y side (row 0), so a process's northern partner row is its
neighbor's row ty-1.

The ideal communicator map follows the neighbor-pair scheme: each exchange
pair of threads across a boundary owns one communicator, selected by a
parity bit of the boundary it crosses so that the map mirrors from process
to process.  Communicator sets are sized by the closed-form terms of
``min_communicators_3d``; for the corner diagonals that allocation is
sheet-structured and deliberately leaves a few slots idle.
"""

from __future__ import annotations

import itertools
from dataclasses import replace
from math import ceil, log2, prod

from ..errors import InvalidArgumentError, TagOverflowError, UnsupportedPatternError
from ..model import (
    ANY_SOURCE,
    ANY_TAG,
    ContextFamily,
    Direction,
    IdAllocator,
    InfoHints,
    MatchContextId,
    OpDescriptor,
    OpKind,
    PartitionedRequest,
    Purpose,
    Tag,
    TagBitLayout,
    create_endpoints_comm,
    dup_communicator,
    encode_tag,
    world_communicator,
)
from .base import (
    Assignment,
    CommPattern,
    Mechanism,
    PatternKind,
    PatternOp,
    STENCIL_KINDS,
)


def stencil_directions(dims: int, points: int) -> list[tuple[int, ...]]:
    """Neighbor offsets for a 5/9-point (2D) or 27-point (3D) exchange."""
    if dims == 2 and points == 5:
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=2)
                if sum(map(abs, d)) == 1]
    elif dims == 2 and points == 9:
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=2) if any(d)]
    elif dims == 3 and points == 27:
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)]
    else:
        raise InvalidArgumentError(
            f"no {points}-point neighborhood in {dims} dimensions"
        )
    return sorted(dirs)


def _neg(d):
    return tuple(-c for c in d)


class StencilGeometry:
    """Coordinate arithmetic for a process grid x thread grid torus."""

    def __init__(self, process_grid, thread_grid):
        if len(process_grid) != len(thread_grid):
            raise InvalidArgumentError("process and thread grids must agree in rank")
        if any(n < 1 for n in process_grid + thread_grid):
            raise InvalidArgumentError("grid dims must be positive")
        self.P = tuple(process_grid)
        self.T = tuple(thread_grid)
        self.dims = len(self.P)

    def thread_coords(self, flat: int) -> tuple[int, ...]:
        out = []
        for n in self.T:
            out.append(flat % n)
            flat //= n
        return tuple(out)

    def thread_flat(self, coords) -> int:
        flat = 0
        for c, n in zip(reversed(coords), reversed(self.T)):
            flat = flat * n + c
        return flat

    def proc_coords(self, flat: int) -> tuple[int, ...]:
        out = []
        for n in self.P:
            out.append(flat % n)
            flat //= n
        return tuple(out)

    def proc_flat(self, coords) -> int:
        flat = 0
        for c, n in zip(reversed(coords), reversed(self.P)):
            flat = flat * n + c
        return flat

    def crossing(self, tc, d) -> bool:
        return any(not 0 <= tc[i] + d[i] < self.T[i] for i in range(self.dims))

    def neighbor(self, pc, tc, d):
        """Torus neighbor of a thread patch: (peer process coords, peer thread
        coords)."""
        ppc, ptc = [], []
        for i in range(self.dims):
            g = pc[i] * self.T[i] + tc[i] + d[i]
            g %= self.P[i] * self.T[i]
            ppc.append(g // self.T[i])
            ptc.append(g % self.T[i])
        return tuple(ppc), tuple(ptc)

    def is_corner(self, tc) -> bool:
        return all(c in (0, n - 1) for c, n in zip(tc, self.T))


def gen_stencil(dims: int, points: int, process_grid, thread_grid,
                iterations: int = 1, payload: int = 8192) -> CommPattern:
    """Generate the per-iteration halo exchange of a stencil decomposition.

    Every boundary thread sends to and receives from each neighbor direction
    its patch borders across the process boundary.  Ops carry a per-direction
    tag and a phase index so the simulator can drive one traffic direction at
    a time.
    """
    geo = StencilGeometry(process_grid, thread_grid)
    if geo.dims != dims:
        raise InvalidArgumentError(f"grids are {geo.dims}-dimensional, dims={dims}")
    dirs = stencil_directions(dims, points)
    dir_index = {d: i for i, d in enumerate(dirs)}
    kind = {
        (2, 5): PatternKind.STENCIL_2D_5PT,
        (2, 9): PatternKind.STENCIL_2D_9PT,
        (3, 27): PatternKind.STENCIL_3D_27PT,
    }[(dims, points)]

    ops: list[PatternOp] = []
    locate: dict[tuple, int] = {}
    for p in range(prod(geo.P)):
        pc = geo.proc_coords(p)
        for t in range(prod(geo.T)):
            tc = geo.thread_coords(t)
            for d in dirs:
                if not geo.crossing(tc, d):
                    continue
                ppc, ptc = geo.neighbor(pc, tc, d)
                peer_p, peer_t = geo.proc_flat(ppc), geo.thread_flat(ptc)
                for op_kind in (OpKind.RECV, OpKind.SEND):
                    traffic = dir_index[d] if op_kind is OpKind.SEND else dir_index[_neg(d)]
                    op = PatternOp(
                        op_id=len(ops),
                        process=p,
                        thread=t,
                        kind=op_kind,
                        direction=d,
                        peer_process=peer_p,
                        peer_thread=peer_t,
                        phase=traffic,
                        tag_key=traffic,
                    )
                    locate[(p, t, d, op_kind)] = op.op_id
                    ops.append(op)

    pairs = []
    linked_ops = []
    for op in ops:
        wanted = OpKind.RECV if op.kind is OpKind.SEND else OpKind.SEND
        partner = locate[(op.peer_process, op.peer_thread, _neg(op.direction),
                          wanted)]
        if op.kind is OpKind.SEND:
            pairs.append((op.op_id, partner))
        linked_ops.append(replace(op, partner=partner))
    ops = linked_ops

    communicating = frozenset(
        t for t in range(prod(geo.T))
        if any(geo.crossing(geo.thread_coords(t), d) for d in dirs)
    )
    corners = frozenset(
        t for t in range(prod(geo.T)) if geo.is_corner(geo.thread_coords(t))
    )
    return CommPattern(
        kind=kind,
        process_grid=tuple(process_grid),
        thread_grid=tuple(thread_grid),
        iterations=iterations,
        payload_bytes=payload,
        ops=tuple(ops),
        pairs=tuple(pairs),
        communicating_threads=communicating,
        corner_threads=corners,
        num_phases=len(dirs),
    )


def _program_indexes(pattern: CommPattern) -> dict[int, int]:
    """Issue order within each thread: post all receives, then all sends,
    each in direction order (the usual nonblocking halo-exchange shape)."""
    out = {}
    by_thread: dict[tuple[int, int], list[PatternOp]] = {}
    for op in pattern.ops:
        by_thread.setdefault((op.process, op.thread), []).append(op)
    for ops in by_thread.values():
        ops.sort(key=lambda o: (0 if o.kind is OpKind.RECV else 1, o.phase, o.op_id))
        for i, op in enumerate(ops):
            out[op.op_id] = i
    return out


def _require_stencil(pattern: CommPattern, what: str):
    if pattern.kind not in STENCIL_KINDS:
        raise UnsupportedPatternError(f"{what} assignment needs a stencil pattern")


# --------------------------------------------------------------------------
# naive per-thread communicator map


def assign_communicators_naive(pattern: CommPattern,
                               num_comms: int | None = None) -> Assignment:
    """Per-thread communicators: thread i sends on communicator i and
    receives on the communicator of the remote sending thread.

    Matching is correct, but opposite-boundary threads reuse each other's
    communicators, so half of the boundary concurrency funnels through shared
    contexts.
    """
    ids = IdAllocator()
    world = world_communicator(pattern.num_processes, ids)
    K = num_comms if num_comms is not None else pattern.threads_per_process
    if K < 1:
        raise InvalidArgumentError("need at least one communicator")
    comms = [
        dup_communicator(world, ids, purpose=Purpose.PARALLELISM_EXPOSURE)
        for _ in range(K)
    ]
    prog = _program_indexes(pattern)
    bindings, entity = {}, {}
    for op in pattern.ops:
        comm = comms[(op.thread if op.kind is OpKind.SEND else op.peer_thread) % K]
        ctx = MatchContextId(ContextFamily.COMM, comm.context_id)
        target = op.peer_process
        tag = Tag(op.tag_key)
        if op.is_wildcard_recv:
            target, tag = ANY_SOURCE, ANY_TAG
        bindings[op.op_id] = OpDescriptor(
            kind=op.kind,
            source=(op.process, op.thread),
            program_index=prog[op.op_id],
            context=ctx,
            target=target,
            tag=tag,
        )
        entity[op.op_id] = ("comm", comm.context_id)
    return Assignment(
        mechanism=Mechanism.COMMUNICATORS,
        variant="naive",
        hints=InfoHints(),
        bindings=bindings,
        entity_of=entity,
        objects_created={"communicators": K},
        comms=[world] + comms,
    )


# --------------------------------------------------------------------------
# ideal mirrored communicator map


def _positive_rep(d):
    return d if d > tuple([0] * len(d)) else _neg(d)


def _pair_key(geo: StencilGeometry, pattern: CommPattern, op: PatternOp):
    """Communicator key of the exchange pair this op belongs to.

    The pair is identified by its positive-direction sender; the parity bit
    of the first crossed boundary alternates between adjacent pairs of one
    chain, which is exactly the mirroring that keeps facing processes on the
    same communicator and same-process neighbors apart.  Requires even
    process dims along communicating axes for the alternation to close
    around the torus.
    """
    d = op.direction
    rep = _positive_rep(d)
    pc = geo.proc_coords(op.process)
    tc = geo.thread_coords(op.thread)
    if d == rep:
        s_pc, s_tc = pc, tc
    else:
        s_pc, s_tc = geo.neighbor(pc, tc, d)

    cross_pos = {
        c: (geo.T[c] - 1 if rep[c] > 0 else 0)
        for c in range(geo.dims) if rep[c] != 0
    }
    crossed = [c for c, pos in cross_pos.items() if s_tc[c] == pos]
    c0 = min(crossed)
    boundary = (s_pc[c0] + 1) % geo.P[c0] if rep[c0] > 0 else s_pc[c0]
    bit = boundary % 2

    nonzero = sum(1 for c in rep if c != 0)
    if nonzero == 1:
        axis = next(c for c in range(geo.dims) if rep[c] != 0)
        slot = ("perp",) + tuple(v for i, v in enumerate(s_tc) if i != axis)
    elif geo.dims == 3 and nonzero == 3:
        if s_tc[2] == cross_pos[2]:
            slot = ("z", s_tc[0], s_tc[1])
        elif s_tc[1] == cross_pos[1]:
            slot = ("y", s_tc[0], s_tc[2])
        else:
            slot = ("x", s_tc[1], s_tc[2])
    else:
        slot = ("full",) + s_tc
    return ("pair", rep, bit, slot)


def _corner_orbit_key(geo: StencilGeometry, op: PatternOp):
    """Key shared by the four-corner orbit a corner-to-corner exchange sits
    in: anchored at the process owning the all-minimum corner of the orbit."""
    pc = geo.proc_coords(op.process)
    tc = geo.thread_coords(op.thread)
    anchor = tuple(
        (pc[i] + (1 if tc[i] == geo.T[i] - 1 else 0)) % geo.P[i]
        for i in range(geo.dims)
    )
    return ("corner", anchor)


def _ideal_key(geo, pattern, op):
    if pattern.kind is PatternKind.STENCIL_2D_9PT:
        tc = geo.thread_coords(op.thread)
        d = op.direction
        _, ptc = geo.neighbor(geo.proc_coords(op.process), tc, d)
        crossed = [not 0 <= tc[i] + d[i] < geo.T[i] for i in range(geo.dims)]
        aligned = all(c or tc[i] == ptc[i]
                      for i, c in enumerate(crossed))
        # corner-to-corner exchanges whose uncrossed coordinates align fold
        # into one communicator per corner orbit
        if geo.is_corner(tc) and geo.is_corner(ptc) and aligned:
            return _corner_orbit_key(geo, op)
    return _pair_key(geo, pattern, op)


def _full_slot_space(geo: StencilGeometry, dirs) -> list:
    """Every communicator key the closed-form allocation provisions.

    Axis and edge-diagonal sets are exactly the keys the binding uses; the
    corner-diagonal sets allocate three full coordinate sheets minus one
    fixed redundant slot, a superset of the bound keys.
    """
    keys = []
    reps = sorted({_positive_rep(d) for d in dirs})
    for rep in reps:
        nonzero = [c for c in range(geo.dims) if rep[c] != 0]
        cross_pos = {c: (geo.T[c] - 1 if rep[c] > 0 else 0) for c in nonzero}
        for bit in (0, 1):
            if len(nonzero) == 1:
                axis = nonzero[0]
                perp = [range(geo.T[i]) for i in range(geo.dims) if i != axis]
                for coords in itertools.product(*perp):
                    keys.append(("pair", rep, bit, ("perp",) + coords))
            elif geo.dims == 3 and len(nonzero) == 3:
                for i, j in itertools.product(range(geo.T[0]), range(geo.T[1])):
                    keys.append(("pair", rep, bit, ("z", i, j)))
                for i, k in itertools.product(range(geo.T[0]), range(geo.T[2])):
                    keys.append(("pair", rep, bit, ("y", i, k)))
                for j, k in itertools.product(range(geo.T[1]), range(geo.T[2])):
                    if (j, k) == (cross_pos[1], cross_pos[2]):
                        continue  # redundant: its only claimant binds via the z sheet
                    keys.append(("pair", rep, bit, ("x", j, k)))
            else:
                # edge diagonals: one slot per crossing positive-side sender
                for t in range(prod(geo.T)):
                    tc = geo.thread_coords(t)
                    if any(tc[c] == cross_pos[c] for c in nonzero):
                        keys.append(("pair", rep, bit, ("full",) + tc))
    return keys


def assign_communicators_ideal(pattern: CommPattern) -> Assignment:
    """Minimal mirrored communicator map for a stencil pattern.

    Every cross-boundary exchange pair of threads gets one communicator,
    mirrored by boundary parity, so matching closes around the torus and no
    two threads of one process share a context.  For the 2D 9-point case,
    corner-to-corner exchanges collapse onto one communicator per corner
    orbit; for the 3D case the per-family set sizes equal the closed-form
    communicator count term by term.
    """
    _require_stencil(pattern, "ideal communicator")
    geo = StencilGeometry(pattern.process_grid, pattern.thread_grid)
    dirs = stencil_directions(
        geo.dims, {PatternKind.STENCIL_2D_5PT: 5, PatternKind.STENCIL_2D_9PT: 9,
                   PatternKind.STENCIL_3D_27PT: 27}[pattern.kind]
    )

    if pattern.kind is PatternKind.STENCIL_3D_27PT:
        keys = _full_slot_space(geo, dirs)
    else:
        keys = sorted({_ideal_key(geo, pattern, op) for op in pattern.ops},
                      key=repr)

    ids = IdAllocator()
    world = world_communicator(pattern.num_processes, ids)
    comm_of_key = {}
    comms = [world]
    for key in sorted(keys, key=repr):
        comm = dup_communicator(world, ids, purpose=Purpose.PARALLELISM_EXPOSURE)
        comm_of_key[key] = comm
        comms.append(comm)

    prog = _program_indexes(pattern)
    bindings, entity = {}, {}
    for op in pattern.ops:
        comm = comm_of_key[_ideal_key(geo, pattern, op)]
        ctx = MatchContextId(ContextFamily.COMM, comm.context_id)
        bindings[op.op_id] = OpDescriptor(
            kind=op.kind,
            source=(op.process, op.thread),
            program_index=prog[op.op_id],
            context=ctx,
            target=op.peer_process,
            tag=Tag(op.tag_key),
        )
        entity[op.op_id] = ("comm", comm.context_id)
    return Assignment(
        mechanism=Mechanism.COMMUNICATORS,
        variant="ideal",
        hints=InfoHints(),
        bindings=bindings,
        entity_of=entity,
        objects_created={"communicators": len(comm_of_key)},
        comms=comms,
    )


# --------------------------------------------------------------------------
# tags with hints


def assign_tags_with_hints(pattern: CommPattern) -> Assignment:
    """One duplicated communicator with wildcard-excluding hints; thread ids
    ride in the tag bits so the library can split matching per thread pair."""
    _require_stencil(pattern, "tag-bit")
    T = pattern.threads_per_process
    tid_bits = max(1, ceil(log2(T))) if T > 1 else 1
    max_app = max((op.tag_key for op in pattern.ops), default=0)
    app_bits = max(1, max_app.bit_length())
    if 2 * tid_bits + app_bits > 23:
        raise TagOverflowError(
            f"{T} threads plus {app_bits} app bits exceed the 23-bit tag space"
        )
    layout = TagBitLayout(num_vcis=min(T, 1 << tid_bits), num_tid_bits=tid_bits,
                          num_app_bits=app_bits)
    hints = InfoHints(no_any_tag=True, no_any_source=True, tag_vci_bits=layout)

    ids = IdAllocator()
    world = world_communicator(pattern.num_processes, ids)
    comm = dup_communicator(world, ids, hints=hints,
                            purpose=Purpose.PARALLELISM_EXPOSURE)
    ctx = MatchContextId(ContextFamily.COMM, comm.context_id)
    prog = _program_indexes(pattern)
    bindings, entity = {}, {}
    for op in pattern.ops:
        if op.kind is OpKind.SEND:
            tag = encode_tag(op.thread, op.peer_thread, op.tag_key, layout)
        else:
            tag = encode_tag(op.peer_thread, op.thread, op.tag_key, layout)
        bindings[op.op_id] = OpDescriptor(
            kind=op.kind,
            source=(op.process, op.thread),
            program_index=prog[op.op_id],
            context=ctx,
            target=op.peer_process,
            tag=tag,
        )
        entity[op.op_id] = ("tag", comm.context_id, op.thread)
    return Assignment(
        mechanism=Mechanism.TAGS_WITH_HINTS,
        hints=hints,
        bindings=bindings,
        entity_of=entity,
        objects_created={"communicators": 1},
        comms=[world, comm],
    )


# --------------------------------------------------------------------------
# endpoints


def assign_endpoints(pattern: CommPattern) -> Assignment:
    """One endpoints communicator; every thread owns the endpoint matching
    its thread id, and targets are global endpoint ranks of facing threads.

    The communicator hands out one handle per thread (rank = process * T +
    thread), but only the communicating threads' endpoints are ever bound,
    and that bound count is what the object tally reports.
    """
    T = pattern.threads_per_process
    ids = IdAllocator()
    world = world_communicator(pattern.num_processes, ids)
    epcomm = create_endpoints_comm(world, T, ids)
    ctx = MatchContextId(ContextFamily.ENDPOINT, epcomm.context_id)
    prog = _program_indexes(pattern)
    bindings, entity = {}, {}
    used_endpoints = set()
    for op in pattern.ops:
        ep = epcomm.endpoint_rank(op.process, op.thread)
        used_endpoints.add(ep)
        if op.is_wildcard_recv:
            target, tag = ANY_SOURCE, ANY_TAG
        else:
            target = epcomm.endpoint_rank(op.peer_process, op.peer_thread)
            tag = Tag(op.tag_key)
        bindings[op.op_id] = OpDescriptor(
            kind=op.kind,
            source=(op.process, op.thread),
            program_index=prog[op.op_id],
            context=ctx,
            target=target,
            tag=tag,
            endpoint=ep,
        )
        entity[op.op_id] = ("ep", ep)
    per_process = len({op.thread for op in pattern.ops if op.process == 0})
    return Assignment(
        mechanism=Mechanism.ENDPOINTS,
        hints=InfoHints(),
        bindings=bindings,
        entity_of=entity,
        objects_created={
            "communicators": 1,
            "endpoints_per_process": per_process,
            "endpoints_total": len(used_endpoints),
        },
        comms=[world],
        endpoints_comm=epcomm,
    )


# --------------------------------------------------------------------------
# partitioned


def assign_partitioned(pattern: CommPattern) -> Assignment:
    """One persistent request per (direction, neighbor) with one partition
    per contributing thread; threads contribute partitions and one thread per
    process completes the shared requests each iteration.

    Wildcard-driven patterns cannot use this mechanism: the requests are
    persistent by definition and a partitioned receive names its peer.
    """
    if pattern.kind not in STENCIL_KINDS:
        raise UnsupportedPatternError(
            "partitioned unsupported: requests are persistent and cannot "
            "match wildcard receives"
        )
    ids = IdAllocator()
    world = world_communicator(pattern.num_processes, ids)
    prog = _program_indexes(pattern)

    groups: dict[tuple, list[PatternOp]] = {}
    for op in pattern.ops:
        key = (op.process, op.kind, op.direction, op.peer_process)
        groups.setdefault(key, []).append(op)

    requests: dict[int, PartitionedRequest] = {}
    request_of_op: dict[int, int] = {}
    bindings, entity = {}, {}
    slot_of_op: dict[int, tuple[int, int]] = {}
    for key in sorted(groups, key=repr):
        process, kind, direction, peer = key
        members = sorted(groups[key], key=lambda o: o.thread)
        req = PartitionedRequest(
            request_id=ids.fresh_request(),
            direction=Direction.SEND if kind is OpKind.SEND else Direction.RECV,
            num_partitions=len(members),
            partition_size=pattern.payload_bytes,
            peer=peer,
            tag=Tag(members[0].tag_key),
            comm=world,
            owner=process,
        )
        requests[req.request_id] = req
        for index, op in enumerate(members):
            request_of_op[op.op_id] = req.request_id
            slot_of_op[op.op_id] = (req.request_id, index)

    for op in pattern.ops:
        slot = slot_of_op[op.op_id]
        kind = (OpKind.PARTITION_READY if op.kind is OpKind.SEND
                else OpKind.PARTITION_ARRIVED_TEST)
        bindings[op.op_id] = OpDescriptor(
            kind=kind,
            source=(op.process, op.thread),
            program_index=prog[op.op_id],
            partition=slot,
        )
        entity[op.op_id] = ("part",) + slot
    return Assignment(
        mechanism=Mechanism.PARTITIONED,
        hints=InfoHints(),
        bindings=bindings,
        entity_of=entity,
        objects_created={
            "communicators": 1,
            "requests": len(requests),
            "requests_per_process": len(requests) // pattern.num_processes,
        },
        comms=[world],
        requests=requests,
        request_of_op=request_of_op,
    )
