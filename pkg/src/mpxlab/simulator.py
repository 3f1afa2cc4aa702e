"""Deterministic discrete-event engine for (pattern, assignment, channels).

Time is abstract integer ticks; all claims the engine supports are ratios or
counts, never wall-clock predictions.  Threads are simulation actors stepped
in (process, thread) order, transfers serialize per channel instance (one
per (process, channel index)), and operations whose classifier verdict is
serial are ordered even when they land on distinct channels.

Matching bookkeeping follows the posted/unexpected two-queue scheme: a
receive first scans the unexpected queue, a message scans the posted queue,
and every position traversed counts one match attempt.  Wildcard receives
take the earliest-posted matchable message; under ``allow_overtaking`` the
scan order becomes earliest-by-arrival (a published deterministic rule in
place of the standard's nondeterminism).

Partitioned requests match once per message: one attempt and one success per
request pair per iteration, independent of the partition count.  Their
shared-completion cost appears instead as per-iteration wait-block events
for every thread but the completing one, plus one barrier per iteration.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

from .channels import ChannelPool, MappingPolicy, PolicyKind, map_entity
from .errors import InvalidAssignmentError, MpxlabError
from .model import ContextFamily, Direction, OpKind
from .patterns.base import Assignment, CommPattern, Mechanism, PatternKind
from .patterns.irregular import collective_footprint
from .semantics import (
    can_match,
    logically_parallel,
    requests_match,
    validate_assignment,
    _serial_bucket_keys,
)


class EventKind(Enum):
    ISSUE = "issue"
    CHANNEL_ACQUIRE = "channel-acquire"
    TRANSFER = "transfer"
    MATCH_ATTEMPT = "match-attempt"
    MATCH_SUCCESS = "match-success"
    WAIT_BLOCK = "wait-block"
    WAIT_RELEASE = "wait-release"
    BARRIER = "barrier"
    PROBE_ITERATION = "probe-iteration"


@dataclass(frozen=True)
class Event:
    time: int
    kind: EventKind
    op_id: int | None = None
    channel: tuple[int, int] | None = None
    iteration: int = 0


@dataclass(frozen=True)
class CostModel:
    """Abstract tick costs; the defaults are published configuration."""

    per_message_issue: int = 1
    per_match_attempt: int = 1
    per_channel_transfer: int = 4
    sync_wait: int = 2
    probe: int = 1

    def __post_init__(self):
        if min(self.per_message_issue, self.per_match_attempt,
               self.per_channel_transfer, self.sync_wait, self.probe) < 0:
            raise MpxlabError("cost constants must be non-negative")


CSV_HEADER = [
    "mechanism", "makespan", "max_concurrency", "match_attempts",
    "sync_waits", "probes", "objects", "footprint_bytes",
]


@dataclass
class SimReport:
    mechanism: str
    variant: str
    seed: int
    makespan: int
    max_concurrent_transfers: int
    match_attempts_total: int
    matches_total: int
    sync_wait_events: int
    probe_iterations: int
    barriers_total: int
    channel_occupancy: dict[str, int]
    memory_footprint_bytes: int
    objects: dict[str, int]
    phase_concurrency: dict[int, int]
    events: list[Event] = field(default_factory=list, repr=False)

    @property
    def objects_total(self) -> int:
        return sum(v for k, v in self.objects.items()
                   if not k.endswith("per_process"))

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "variant": self.variant,
            "seed": self.seed,
            "makespan": self.makespan,
            "max_concurrent_transfers": self.max_concurrent_transfers,
            "match_attempts_total": self.match_attempts_total,
            "matches_total": self.matches_total,
            "sync_wait_events": self.sync_wait_events,
            "probe_iterations": self.probe_iterations,
            "barriers_total": self.barriers_total,
            "channel_occupancy": self.channel_occupancy,
            "memory_footprint_bytes": self.memory_footprint_bytes,
            "objects": self.objects,
            "phase_concurrency": {str(k): v for k, v in self.phase_concurrency.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def csv_row(self) -> list:
        label = self.mechanism + (f"-{self.variant}" if self.variant else "")
        return [label, self.makespan, self.max_concurrent_transfers,
                self.match_attempts_total, self.sync_wait_events,
                self.probe_iterations, self.objects_total,
                self.memory_footprint_bytes]


def default_policy(assignment: Assignment, pool: ChannelPool) -> MappingPolicy:
    """The channel policy a library would pair with each mechanism."""
    mech = assignment.mechanism
    if mech is Mechanism.COMMUNICATORS:
        policy = MappingPolicy(PolicyKind.ROUND_ROBIN_PER_COMMUNICATOR)
        for comm in assignment.comms:
            policy.register_communicator(comm.context_id, pool)
        return policy
    if mech is Mechanism.TAGS_WITH_HINTS:
        return MappingPolicy(PolicyKind.TAG_BITS_ONE_TO_ONE,
                             layout=assignment.hints.tag_vci_bits)
    if mech is Mechanism.ENDPOINTS:
        return MappingPolicy(PolicyKind.ENDPOINT_IDENTITY)
    if mech is Mechanism.PARTITIONED:
        return MappingPolicy(PolicyKind.PARTITION_INDEX)
    return MappingPolicy(PolicyKind.HASH_COMMUNICATOR)


def _footprint(pattern: CommPattern, assignment: Assignment) -> int:
    """Payload bytes resident per run: message buffers plus, for collectives,
    the per-mechanism result duplication."""
    if assignment.mechanism is Mechanism.PARTITIONED and assignment.requests:
        total = sum(r.num_partitions * r.partition_size
                    for r in assignment.requests.values())
    else:
        total = len(pattern.ops) * pattern.payload_bytes
    if pattern.kind is PatternKind.MULTITHREADED_ALLREDUCE:
        _, result = collective_footprint(
            assignment.mechanism, pattern.threads_per_process,
            pattern.payload_bytes,
        )
        total += pattern.num_processes * result
    return total


def _max_overlap(intervals) -> int:
    if not intervals:
        return 0
    points = []
    for s, e in intervals:
        points.append((s, 1))
        points.append((e, -1))
    points.sort()
    best = cur = 0
    for _, delta in points:
        cur += delta
        best = max(best, cur)
    return best


class _Engine:
    def __init__(self, pattern, assignment, pool, policy, cost, seed,
                 partitioned_buffers=1):
        self.pattern = pattern
        self.assignment = assignment
        self.pool = pool
        self.policy = policy
        self.cost = cost
        self.seed = seed
        self.partitioned_buffers = max(1, partitioned_buffers)
        self.events: list[Event] = []
        self.clocks: dict[tuple[int, int], int] = {}
        self.channel_free: dict[tuple[int, int], int] = {}
        self.channel_busy: dict[tuple[int, int], int] = {}
        self.attempts = 0
        self.matches = 0
        self.waitblocks = 0
        self.barriers = 0
        self.probes = 0
        self.transfers: list[tuple[int, int, tuple[int, ...], int]] = []
        self._verdicts: dict[tuple[int, int], bool] = {}
        self._completion: dict[int, int] = {}
        self._partition_arrivals: dict[int, list[int]] = {}
        self.iteration = 0

    # -- small helpers ------------------------------------------------

    def clock(self, p, t) -> int:
        return self.clocks.get((p, t), 0)

    def bump(self, p, t, dt):
        self.clocks[(p, t)] = self.clock(p, t) + dt

    def emit(self, time, kind, op_id=None, channel=None):
        self.events.append(Event(time, kind, op_id, channel, self.iteration))

    def serial(self, a_id, b_id) -> bool:
        key = (min(a_id, b_id), max(a_id, b_id))
        if key not in self._verdicts:
            da = self.assignment.bindings[key[0]]
            db = self.assignment.bindings[key[1]]
            verdict = logically_parallel(da, db, self.assignment.hints)
            self._verdicts[key] = not verdict.parallel
        return self._verdicts[key]

    @staticmethod
    def _recv_scope(desc):
        home = (desc.endpoint
                if desc.context.family is ContextFamily.ENDPOINT
                else desc.process)
        return (desc.context.family, desc.context.key, home)

    @staticmethod
    def _send_scope(desc):
        return (desc.context.family, desc.context.key, desc.target)

    # -- main loops ----------------------------------------------------

    def run(self) -> SimReport:
        if self.pattern.kind is PatternKind.LEGION_POLLING:
            self._run_polling()
        else:
            self._run_phased()
        return self._report()

    def _schedule_transfer(self, op, desc, t_issue, buckets):
        lch, rch = map_entity(self.policy, desc, self.pool)
        resources = {(op.process, lch)}
        peer = op.peer_process
        if peer is None and desc.partition is not None:
            peer = self.assignment.requests[desc.partition[0]].peer
        if peer is not None:
            resources.add((peer, rch))
        start = t_issue
        for r in resources:
            start = max(start, self.channel_free.get(r, 0))
        for key in _serial_bucket_keys(desc, self.assignment.hints):
            for prev_id, prev_end in buckets.get((op.process, key), ()):
                if self.serial(prev_id, op.op_id):
                    start = max(start, prev_end)
        end = start + self.cost.per_channel_transfer
        for r in resources:
            self.channel_free[r] = end
            self.channel_busy[r] = self.channel_busy.get(r, 0) + (end - start)
        self.emit(start, EventKind.CHANNEL_ACQUIRE, op.op_id, min(resources))
        self.emit(start, EventKind.TRANSFER, op.op_id, min(resources))
        self.transfers.append((start, end, tuple(sorted({p for p, _ in resources})),
                               op.phase))
        for key in _serial_bucket_keys(desc, self.assignment.hints):
            buckets.setdefault((op.process, key), []).append((op.op_id, end))
        self._completion[op.op_id] = end
        return end

    def _run_phased(self):
        pattern, assignment = self.pattern, self.assignment
        cost = self.cost
        partitioned = assignment.mechanism is Mechanism.PARTITIONED
        pair_of = {}
        if partitioned:
            sends = sorted(
                (r for r in assignment.requests.values()
                 if r.direction is Direction.SEND),
                key=lambda r: r.request_id,
            )
            recvs = [r for r in assignment.requests.values()
                     if r.direction is Direction.RECV]
            taken = set()
            for s in sends:
                for r in sorted(recvs, key=lambda r: r.request_id):
                    if r.request_id not in taken and requests_match(s, r):
                        pair_of[s.request_id] = r.request_id
                        taken.add(r.request_id)
                        break

        phases = sorted({op.phase for op in pattern.ops})
        order_key = lambda op: (op.process, op.thread, op.op_id)
        for p in range(pattern.num_processes):
            for t in range(pattern.threads_per_process):
                self.clocks.setdefault((p, t), 0)

        for it in range(pattern.iterations):
            self.iteration = it
            if partitioned:
                t0 = max(self.clocks.values(), default=0)
                for rid in sorted(assignment.requests):
                    assignment.requests[rid].start()
                for sid, rid in sorted(pair_of.items()):
                    self.emit(t0, EventKind.MATCH_ATTEMPT)
                    self.emit(t0, EventKind.MATCH_SUCCESS)
                    self.attempts += 1
                    self.matches += 1

            posted: dict = {}
            unexpected: dict = {}
            buckets: dict = {}
            for ph in phases:
                ph_ops = [op for op in pattern.ops if op.phase == ph]
                recv_like = sorted(
                    (op for op in ph_ops if op.kind is OpKind.RECV), key=order_key
                )
                send_like = sorted(
                    (op for op in ph_ops if op.kind is not OpKind.RECV),
                    key=order_key,
                )
                mark = len(self.transfers)
                for op in recv_like:
                    self._post_recv(op, posted, unexpected)
                for op in send_like:
                    self._issue_send(op, posted, unexpected, buckets, pair_of)
                # one traffic direction at a time: the next phase starts after
                # this one drains, so per-phase concurrency is well defined
                phase_end = max(
                    [e for _, e, _, _ in self.transfers[mark:]]
                    + list(self.clocks.values()) + [0]
                )
                for key in self.clocks:
                    self.clocks[key] = phase_end

            leftovers = sum(len(v) for v in unexpected.values())
            if leftovers:
                raise MpxlabError(
                    f"{leftovers} sends stayed unmatched; the pattern is not closed"
                )

            # thread completion: each thread waits on its own ops
            for op in pattern.ops:
                end = self._completion.get(op.op_id)
                if end is not None:
                    key = (op.process, op.thread)
                    self.clocks[key] = max(self.clock(*key), end)

            if partitioned:
                self._partitioned_iteration_end(pair_of, it)
            elif (pattern.kind is PatternKind.MULTITHREADED_ALLREDUCE
                  and assignment.mechanism is Mechanism.COMMUNICATORS):
                # user-driven intranode reduction step
                for p in range(pattern.num_processes):
                    for t in range(pattern.threads_per_process):
                        self.bump(p, t, cost.sync_wait)

    def _post_recv(self, op, posted, unexpected):
        desc = self.assignment.bindings[op.op_id]
        p, t = op.process, op.thread
        t_issue = self.clock(p, t)
        self.emit(t_issue, EventKind.ISSUE, op.op_id)
        self.bump(p, t, self.cost.per_message_issue)
        if desc.kind is OpKind.PARTITION_ARRIVED_TEST:
            return  # arrival is tracked on the shared request
        scope = self._recv_scope(desc)
        queue = unexpected.get(scope, [])
        if self.assignment.hints.allow_overtaking:
            scan = sorted(range(len(queue)), key=lambda i: (queue[i][2], i))
        else:
            scan = range(len(queue))
        matched = None
        for pos in scan:
            self.attempts += 1
            self.emit(t_issue, EventKind.MATCH_ATTEMPT, op.op_id)
            if can_match(queue[pos][0], desc):
                matched = pos
                break
        if matched is not None:
            sdesc, sid, s_end = queue.pop(matched)
            self.matches += 1
            self.emit(max(t_issue, s_end), EventKind.MATCH_SUCCESS, op.op_id)
            self._completion[op.op_id] = max(t_issue, s_end)
        else:
            posted.setdefault(scope, []).append((desc, op.op_id))

    def _issue_send(self, op, posted, unexpected, buckets, pair_of):
        desc = self.assignment.bindings[op.op_id]
        p, t = op.process, op.thread
        t_issue = self.clock(p, t)
        self.emit(t_issue, EventKind.ISSUE, op.op_id)
        self.bump(p, t, self.cost.per_message_issue)
        end = self._schedule_transfer(op, desc, t_issue, buckets)

        if desc.kind is OpKind.PARTITION_READY:
            rid, idx = desc.partition
            req = self.assignment.requests[rid]
            req.pready(idx)
            peer_rid = pair_of.get(rid)
            if peer_rid is not None:
                peer_req = self.assignment.requests[peer_rid]
                peer_req.deliver(idx)
                self._partition_arrivals.setdefault(peer_rid, []).append(end)
            return
        if desc.kind is not OpKind.SEND:
            return  # collectives and RMA carry no pairwise matching
        scope = self._send_scope(desc)
        queue = posted.get(scope, [])
        matched = None
        for pos in range(len(queue)):
            self.attempts += 1
            self.emit(end, EventKind.MATCH_ATTEMPT, op.op_id)
            if can_match(desc, queue[pos][0]):
                matched = pos
                break
        if matched is not None:
            rdesc, rid = queue.pop(matched)
            self.matches += 1
            self.emit(end, EventKind.MATCH_SUCCESS, op.op_id)
            self._completion[rid] = end
        else:
            unexpected.setdefault(scope, []).append((desc, op.op_id, end))

    def _partitioned_iteration_end(self, pair_of, it):
        pattern, assignment, cost = self.pattern, self.assignment, self.cost
        sync_now = ((it + 1) % self.partitioned_buffers == 0
                    or it == pattern.iterations - 1)
        for p in range(pattern.num_processes):
            proc_reqs = [assignment.requests[rid]
                         for rid in sorted(assignment.requests)
                         if assignment.requests[rid].owner == p]
            done = 0
            for r in proc_reqs:
                if r.direction is Direction.RECV:
                    done = max(done, max(self._partition_arrivals.get(
                        r.request_id, [0])))
            all_threads = range(pattern.threads_per_process)
            owner = 0
            done = max([done] + [self.clock(p, t) for t in all_threads])
            if not sync_now:
                for r in proc_reqs:
                    r.wait_all()
                continue
            for t in all_threads:
                if t == owner:
                    self.clocks[(p, t)] = done
                    continue
                self.emit(self.clock(p, t), EventKind.WAIT_BLOCK)
                self.waitblocks += 1
                self.clocks[(p, t)] = done + cost.sync_wait
                self.emit(self.clocks[(p, t)], EventKind.WAIT_RELEASE)
            for r in proc_reqs:
                if not r.wait_all():
                    raise MpxlabError(
                        f"request {r.request_id} incomplete at iteration end"
                    )
        if sync_now:
            barrier_time = max(self.clocks.values(), default=0)
            self.emit(barrier_time, EventKind.BARRIER)
            self.barriers += 1
            for key in self.clocks:
                self.clocks[key] = barrier_time

    def _run_polling(self):
        pattern, assignment, cost = self.pattern, self.assignment, self.cost
        buckets: dict = {}
        incoming: dict[int, list[tuple[int, int]]] = {}
        sends = sorted((op for op in pattern.ops if op.kind is OpKind.SEND),
                       key=lambda op: (op.process, op.thread, op.op_id))
        for op in sends:
            desc = assignment.bindings[op.op_id]
            t_issue = self.clock(op.process, op.thread)
            self.emit(t_issue, EventKind.ISSUE, op.op_id)
            self.bump(op.process, op.thread, cost.per_message_issue)
            end = self._schedule_transfer(op, desc, t_issue, buckets)
            incoming.setdefault(op.peer_process, []).append((end, op.op_id))

        if assignment.mechanism is Mechanism.COMMUNICATORS:
            contexts = assignment.objects_created["communicators"]
        else:
            contexts = 1

        for node in sorted(incoming):
            msgs = sorted(incoming[node])
            poller = 0
            pc = self.clock(node, poller)
            sweeps = len(msgs) + 1
            consumed = 0
            for _ in range(sweeps):
                for _ in range(contexts):
                    self.emit(pc, EventKind.PROBE_ITERATION)
                    self.probes += 1
                    pc += cost.probe
                if consumed < len(msgs):
                    end, sid = msgs[consumed]
                    consumed += 1
                    pc = max(pc, end)
                    self.attempts += 1
                    self.matches += 1
                    self.emit(pc, EventKind.MATCH_ATTEMPT, sid)
                    self.emit(pc, EventKind.MATCH_SUCCESS, sid)
            self.clocks[(node, poller)] = pc

    # -- reporting ------------------------------------------------------

    def _report(self) -> SimReport:
        pattern, assignment = self.pattern, self.assignment
        makespan = max(
            [t for t in self.clocks.values()] + [e for _, e, _, _ in self.transfers]
            or [0]
        )
        procs = range(pattern.num_processes)
        max_conc = 0
        phase_conc: dict[int, int] = {}
        for p in procs:
            mine = [(s, e) for s, e, owners, _ in self.transfers if p in owners]
            max_conc = max(max_conc, _max_overlap(mine))
        for ph in sorted({ph for _, _, _, ph in self.transfers}):
            best = 0
            for p in procs:
                mine = [(s, e) for s, e, owners, f in self.transfers
                        if p in owners and f == ph]
                best = max(best, _max_overlap(mine))
            phase_conc[ph] = best
        occupancy = {
            f"p{p}c{c}": busy
            for (p, c), busy in sorted(self.channel_busy.items())
        }
        self.events.sort(key=lambda ev: ev.time)  # stable: ties keep issue order
        return SimReport(
            mechanism=assignment.mechanism.value,
            variant=assignment.variant,
            seed=self.seed,
            makespan=makespan,
            max_concurrent_transfers=max_conc,
            match_attempts_total=self.attempts,
            matches_total=self.matches,
            sync_wait_events=self.waitblocks,
            probe_iterations=self.probes,
            barriers_total=self.barriers,
            channel_occupancy=occupancy,
            memory_footprint_bytes=_footprint(pattern, assignment),
            objects=dict(assignment.objects_created),
            phase_concurrency=phase_conc,
            events=self.events,
        )


def run(pattern: CommPattern, assignment: Assignment,
        pool: ChannelPool | None = None, policy: MappingPolicy | None = None,
        cost: CostModel | None = None, seed: int = 0,
        partitioned_buffers: int = 1) -> SimReport:
    """Execute one scenario and measure concurrency, matching and sync cost.

    Refuses to run when the assignment fails matching validation.  Identical
    inputs always produce identical reports.
    """
    pool = pool or ChannelPool()
    cost = cost or CostModel()
    check = validate_assignment(pattern, assignment)
    if check.matching_violations:
        raise InvalidAssignmentError(
            f"{len(check.matching_violations)} matching violations; "
            f"first: {check.matching_violations[0]}"
        )
    policy = policy or default_policy(assignment, pool)
    engine = _Engine(pattern, assignment, pool, policy, cost, seed,
                     partitioned_buffers)
    report = engine.run()
    expected = _expected_messages(pattern, assignment)
    if report.matches_total != expected:
        raise MpxlabError(
            f"message conservation violated: {report.matches_total} matches "
            f"for {expected} messages"
        )
    return report


def _expected_messages(pattern: CommPattern, assignment: Assignment) -> int:
    if assignment.mechanism is Mechanism.PARTITIONED:
        n_pairs = sum(1 for r in assignment.requests.values()
                      if r.direction is Direction.SEND)
        return n_pairs * pattern.iterations
    sends = sum(1 for op in pattern.ops if op.kind is OpKind.SEND)
    return sends * pattern.iterations


@dataclass
class Comparison:
    """Per-mechanism reports for one pattern plus derived ratios."""

    rows: list[SimReport]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_HEADER)
        for report in self.rows:
            writer.writerow(report.csv_row())
        return buf.getvalue()

    def ratios(self, metric: str = "makespan") -> dict[str, float]:
        base = getattr(self.rows[0], metric)
        out = {}
        for report in self.rows:
            value = getattr(report, metric)
            label = report.mechanism + (f"-{report.variant}" if report.variant else "")
            out[label] = value / base if base else float("inf")
        return out


def compare_mechanisms(pattern: CommPattern, assignments: list[Assignment],
                       pool: ChannelPool | None = None,
                       cost: CostModel | None = None, seed: int = 0) -> Comparison:
    """Run the same pattern under several bindings; unsupported combinations
    raise before any simulation starts."""
    rows = [run(pattern, a, pool=pool, cost=cost, seed=seed) for a in assignments]
    return Comparison(rows)
