#!/usr/bin/env python3
"""Message-matching cost: shared queues grow, partitions stay flat.

When n threads funnel through one communicator, the receiver's posted queue
is scanned deeper and deeper: total traversal work grows quadratically in n.
Per-thread contexts keep every queue at depth one.  Partitioned requests
match once per message no matter how many partitions feed it.

Run: python demos/demo_matching_costs.py
"""

import mpxlab as m

print("fan-in: n senders, one receiver posting receives in reverse tag order")
print(f"{'n':>4} {'shared comm':>12} {'per-thread':>11}")
for n in (2, 4, 8, 16, 32):
    pattern = m.gen_fan_in(n)
    shared = m.run(pattern, m.assign_communicators_naive(pattern, num_comms=1))
    split = m.run(pattern, m.assign_communicators_naive(pattern))
    print(f"{n:>4} {shared.match_attempts_total:>12} "
          f"{split.match_attempts_total:>11}")
print("(shared column is n(n+1)/2: every message walks the whole queue)")
print()

print("partitioned halo exchange: matching is per request, not per partition")
print(f"{'partitions':>10} {'messages':>9} {'attempts/message':>17}")
for parts in (1, 2, 4, 8, 16):
    pattern = m.gen_stencil(2, 5, [2, 2], [parts, 1], iterations=2)
    report = m.run(pattern, m.assign_partitioned(pattern))
    ratio = report.match_attempts_total / report.matches_total
    print(f"{parts:>10} {report.matches_total:>9} {ratio:>17.1f}")
print()

print("the price partitions pay instead: shared-request synchronization")
pattern = m.gen_stencil(2, 5, [2, 2], [3, 3], iterations=3)
part = m.run(pattern, m.assign_partitioned(pattern))
eps = m.run(pattern, m.assign_endpoints(pattern))
print(f"  partitioned: {part.sync_wait_events} wait-blocks, "
      f"{part.barriers_total} barriers over 3 iterations")
print(f"  endpoints:   {eps.sync_wait_events} wait-blocks, "
      f"{eps.barriers_total} barriers")
