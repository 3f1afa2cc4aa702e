"""Engine behavior: determinism, matching cost, sync events, concurrency."""

import pytest

from mpxlab.channels import ChannelPool
from mpxlab.errors import InvalidAssignmentError, MpxlabError
from mpxlab.model import ContextFamily, MatchContextId, OpKind, Tag
from mpxlab.patterns import (
    Mechanism,
    assign_allreduce,
    assign_communicators_ideal,
    assign_communicators_naive,
    assign_endpoints,
    assign_partitioned,
    assign_tags_with_hints,
    gen_allreduce,
    gen_fan_in,
    gen_legion,
    gen_stencil,
)
from mpxlab.simulator import (
    Comparison,
    CostModel,
    EventKind,
    compare_mechanisms,
    run,
)


class TestBasics:
    def test_two_process_ping(self):
        p = gen_fan_in(1)
        report = run(p, assign_communicators_naive(p, num_comms=1))
        assert report.matches_total == 1
        assert report.match_attempts_total == 1

    def test_determinism_bytes(self):
        p = gen_stencil(2, 9, [2, 2], [3, 3], iterations=2)
        a = assign_endpoints(p)
        r1 = run(p, a, seed=5)
        r2 = run(p, assign_endpoints(p), seed=5)
        assert r1.to_json() == r2.to_json()

    def test_conservation_and_queue_drain(self):
        p = gen_stencil(2, 9, [2, 2], [3, 3], iterations=3)
        sends = sum(1 for op in p.ops if op.kind is OpKind.SEND)
        report = run(p, assign_communicators_ideal(p))
        assert report.matches_total == sends * 3

    def test_concurrency_bounded_by_pool(self):
        p = gen_stencil(2, 9, [2, 2], [4, 4])
        pool = ChannelPool(2)
        report = run(p, assign_endpoints(p), pool=pool)
        assert report.max_concurrent_transfers <= 2

    def test_refuses_mismatched_assignment(self):
        p = gen_stencil(2, 5, [2, 2], [3, 3])
        a = assign_endpoints(p)
        bad = next(op.op_id for op in p.ops if op.kind is OpKind.RECV)
        desc = a.bindings[bad]
        a.bindings[bad] = type(desc)(
            kind=desc.kind, source=desc.source, program_index=desc.program_index,
            context=MatchContextId(ContextFamily.ENDPOINT, desc.context.key),
            target=desc.target, tag=Tag(999), endpoint=desc.endpoint,
        )
        with pytest.raises(InvalidAssignmentError):
            run(p, a)

    def test_cost_model_validation(self):
        with pytest.raises(MpxlabError):
            CostModel(per_channel_transfer=-1)

    def test_event_log_invariants(self):
        p = gen_stencil(2, 9, [2, 2], [3, 3], iterations=2)
        report = run(p, assign_communicators_naive(p))
        times = [ev.time for ev in report.events]
        assert times == sorted(times)
        attempted = set()
        for ev in report.events:
            if ev.kind is EventKind.MATCH_ATTEMPT:
                attempted.add(ev.op_id)
            elif ev.kind is EventKind.MATCH_SUCCESS and ev.op_id is not None:
                assert ev.op_id in attempted


class TestMatchingCost:
    def test_shared_comm_fan_in_is_quadratic(self):
        totals = {}
        for n in (2, 4, 8, 16):
            p = gen_fan_in(n)
            report = run(p, assign_communicators_naive(p, num_comms=1))
            totals[n] = report.match_attempts_total
        assert totals == {2: 3, 4: 10, 8: 36, 16: 136}  # n(n+1)/2

    def test_per_thread_contexts_are_linear(self):
        for n in (2, 8):
            p = gen_fan_in(n)
            report = run(p, assign_communicators_naive(p))
            assert report.match_attempts_total == n

    def test_partitioned_matches_once_per_message(self):
        for parts in (1, 4, 16):
            p = gen_stencil(2, 5, [2, 2], [parts, 1], iterations=2)
            report = run(p, assign_partitioned(p))
            assert report.match_attempts_total == report.matches_total


class TestPartitionedSync:
    def test_waitblocks_and_barrier_per_iteration(self):
        iterations = 3
        p = gen_stencil(2, 5, [2, 2], [3, 3], iterations=iterations)
        report = run(p, assign_partitioned(p))
        T = p.threads_per_process
        per_iter_blocks = {}
        per_iter_barriers = {}
        for ev in report.events:
            if ev.kind is EventKind.WAIT_BLOCK:
                per_iter_blocks[ev.iteration] = per_iter_blocks.get(ev.iteration, 0) + 1
            if ev.kind is EventKind.BARRIER:
                per_iter_barriers[ev.iteration] = per_iter_barriers.get(ev.iteration, 0) + 1
        for it in range(iterations):
            assert per_iter_blocks[it] >= T - 1
            assert per_iter_barriers[it] == 1
        assert report.barriers_total == iterations

    def test_other_mechanisms_never_block(self):
        p = gen_stencil(2, 5, [2, 2], [3, 3], iterations=2)
        for a in (assign_communicators_ideal(p), assign_endpoints(p)):
            report = run(p, a)
            assert report.sync_wait_events == 0
            assert report.barriers_total == 0

    def test_double_buffering_skips_intermediate_syncs(self):
        p = gen_stencil(2, 5, [2, 2], [3, 3], iterations=4)
        single = run(p, assign_partitioned(p), partitioned_buffers=1)
        double = run(p, assign_partitioned(p), partitioned_buffers=2)
        assert double.barriers_total < single.barriers_total


class TestConcurrencyRatios:
    @pytest.mark.parametrize("t", [3, 4, 5])
    def test_ideal_doubles_naive_phase_concurrency(self, t):
        p = gen_stencil(2, 9, [2, 2], [t, t])
        pool = ChannelPool(4096)
        ideal = run(p, assign_communicators_ideal(p), pool=pool)
        naive = run(p, assign_communicators_naive(p), pool=pool)
        for phase, value in ideal.phase_concurrency.items():
            assert value == 2 * naive.phase_concurrency[phase]


class TestLegionProbing:
    def test_probes_scale_with_contexts(self):
        p = gen_legion(2, 4, 16, seed=3)
        probes = {}
        for k in (1, 2, 4, 8):
            report = run(p, assign_communicators_naive(p, num_comms=k))
            probes[k] = report.probe_iterations
        assert probes[2] == 2 * probes[1]
        assert probes[8] == 8 * probes[1]
        ep_report = run(p, assign_endpoints(p))
        assert ep_report.probe_iterations == probes[1]


class TestHintMonotonicity:
    def test_tag_relaxation_never_slows_the_stencil(self):
        # one shared communicator without hints vs the tag-bit mechanism
        # (same single context, wildcards excluded, per-thread channels)
        for t in (3, 4):
            p = gen_stencil(2, 9, [2, 2], [t, t])
            shared = run(p, assign_communicators_naive(p, num_comms=1))
            tagged = run(p, assign_tags_with_hints(p))
            assert tagged.makespan <= shared.makespan


class TestAllreduce:
    def test_footprint_reflects_duplication(self):
        p = gen_allreduce(2, 4, 128)  # 1024-byte buffers
        comm = run(p, assign_allreduce(p, Mechanism.COMMUNICATORS))
        eps = run(p, assign_allreduce(p, Mechanism.ENDPOINTS))
        part = run(p, assign_allreduce(p, Mechanism.PARTITIONED))
        assert eps.memory_footprint_bytes > comm.memory_footprint_bytes
        assert part.memory_footprint_bytes <= comm.memory_footprint_bytes


class TestComparison:
    def test_csv_table(self):
        p = gen_stencil(2, 5, [2, 2], [3, 3])
        comparison = compare_mechanisms(
            p, [assign_communicators_ideal(p), assign_endpoints(p),
                assign_partitioned(p)])
        csv_text = comparison.to_csv()
        lines = csv_text.strip().splitlines()
        assert lines[0].startswith("mechanism,makespan,max_concurrency")
        assert len(lines) == 4
        assert any(line.startswith("endpoints,") for line in lines)
        ratios = comparison.ratios("makespan")
        assert ratios["communicators-ideal"] == 1.0
