"""Scenario spec files: a small JSON schema binding pattern, mechanism,
hints, channel pool and policy into one reproducible run.

Recognized keys: ``kind``, ``process_grid``, ``thread_grid``, ``iterations``,
``payload_bytes``, ``mechanism``, ``hints``, ``channel_pool``, ``policy``,
``seed``.  Unknown keys are rejected.  For the irregular kinds the grids are
reused: a polling pattern reads nodes from ``process_grid[0]`` and task
threads from ``thread_grid[0] - 1``, and fires ``iterations`` events per task
thread; the RMA pattern draws twice as many tiles as there are workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from ..channels import ChannelPool, MappingPolicy, PolicyKind
from ..errors import SpecFileError
from .base import Assignment, CommPattern, Mechanism, PatternKind
from . import (
    build_assignment,
    gen_allreduce,
    gen_bspmm,
    gen_dynamic_graph,
    gen_fan_in,
    gen_legion,
    gen_stencil,
)

_ALLOWED_KEYS = {
    "kind", "process_grid", "thread_grid", "iterations", "payload_bytes",
    "mechanism", "hints", "channel_pool", "policy", "seed",
}

_KINDS = {k.value: k for k in PatternKind}
_KINDS["fan-in"] = None  # synthetic worst-case matching scenario

_MECHANISMS = {
    "communicators": (Mechanism.COMMUNICATORS, "ideal"),
    "communicators-naive": (Mechanism.COMMUNICATORS, "naive"),
    "tags": (Mechanism.TAGS_WITH_HINTS, ""),
    "endpoints": (Mechanism.ENDPOINTS, ""),
    "partitioned": (Mechanism.PARTITIONED, ""),
    "windows": (Mechanism.WINDOWS, ""),
}

_HINT_FLAGS = {
    "allow_overtaking", "no_any_tag", "no_any_source",
    "accumulate_ordering_none",
}

_POLICIES = {p.value: p for p in PolicyKind}


@dataclass
class Scenario:
    """A fully resolvable run description."""

    kind: str
    process_grid: tuple[int, ...]
    thread_grid: tuple[int, ...]
    iterations: int = 1
    payload_bytes: int = 8192
    mechanism: str = "communicators"
    hints: dict = field(default_factory=dict)
    channel_pool: int = 16
    policy: str | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "process_grid": list(self.process_grid),
            "thread_grid": list(self.thread_grid),
            "iterations": self.iterations,
            "payload_bytes": self.payload_bytes,
            "mechanism": self.mechanism,
            "hints": dict(self.hints),
            "channel_pool": self.channel_pool,
            "seed": self.seed,
        }
        if self.policy is not None:
            out["policy"] = self.policy
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    # -- resolution ------------------------------------------------------

    def build_pattern(self) -> CommPattern:
        kind = self.kind
        px = self.process_grid
        tx = self.thread_grid
        if kind == "stencil-2d-5pt":
            return gen_stencil(2, 5, px, tx, self.iterations, self.payload_bytes)
        if kind == "stencil-2d-9pt":
            return gen_stencil(2, 9, px, tx, self.iterations, self.payload_bytes)
        if kind == "stencil-3d-27pt":
            return gen_stencil(3, 27, px, tx, self.iterations, self.payload_bytes)
        if kind == "legion-polling":
            nodes = px[0]
            task_threads = max(1, tx[0] - 1)
            events = self.iterations * nodes * task_threads
            return gen_legion(nodes, task_threads, events, seed=self.seed,
                              payload=self.payload_bytes)
        if kind == "bspmm-rma":
            procs, threads = px[0], tx[0]
            return gen_bspmm(procs, threads, tiles=2 * procs * threads,
                             seed=self.seed, payload=self.payload_bytes)
        if kind == "multithreaded-allreduce":
            return gen_allreduce(px[0], tx[0],
                                 buffer_elems=max(1, self.payload_bytes // 8))
        if kind == "dynamic-graph":
            return gen_dynamic_graph(px[0], tx[0], rounds=self.iterations,
                                     seed=self.seed, payload=self.payload_bytes)
        if kind == "fan-in":
            return gen_fan_in(tx[0], payload=self.payload_bytes)
        raise SpecFileError(f"field 'kind': unknown pattern {kind!r}")

    def build_assignment(self, pattern: CommPattern) -> Assignment:
        mechanism, variant = _MECHANISMS[self.mechanism]
        num_comms = None
        if self.kind == "fan-in" and mechanism is Mechanism.COMMUNICATORS:
            num_comms = 1 if variant == "naive" else None
        assignment = build_assignment(
            pattern, mechanism, variant=variant, num_comms=num_comms,
            ordering_none=bool(self.hints.get("accumulate_ordering_none")),
        )
        overrides = {k: True for k in _HINT_FLAGS
                     if self.hints.get(k) and not getattr(assignment.hints, k)}
        if overrides:
            assignment.hints = replace(assignment.hints, **overrides)
        return assignment

    def build_pool(self) -> ChannelPool:
        return ChannelPool(self.channel_pool)

    def build_policy(self) -> MappingPolicy | None:
        if self.policy is None:
            return None
        return MappingPolicy(_POLICIES[self.policy])


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise SpecFileError("spec must be a JSON object")
    unknown = set(raw) - _ALLOWED_KEYS
    if unknown:
        raise SpecFileError(f"unknown keys: {', '.join(sorted(unknown))}")
    for required in ("kind", "process_grid", "thread_grid"):
        if required not in raw:
            raise SpecFileError(f"field {required!r}: missing")
    if raw["kind"] not in _KINDS:
        raise SpecFileError(f"field 'kind': unknown pattern {raw['kind']!r}")

    def _grid(name):
        value = raw[name]
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, int) and v > 0 for v in value)):
            raise SpecFileError(f"field {name!r}: expected positive integers")
        return tuple(value)

    def _posint(name, default):
        value = raw.get(name, default)
        if not isinstance(value, int) or value < 1:
            raise SpecFileError(f"field {name!r}: expected a positive integer")
        return value

    mechanism = raw.get("mechanism", "communicators")
    if mechanism not in _MECHANISMS:
        raise SpecFileError(
            f"field 'mechanism': {mechanism!r} not one of "
            f"{sorted(_MECHANISMS)}"
        )
    hints = raw.get("hints", {})
    if not isinstance(hints, dict) or not set(hints) <= _HINT_FLAGS:
        raise SpecFileError(
            f"field 'hints': flags limited to {sorted(_HINT_FLAGS)}"
        )
    policy = raw.get("policy")
    if policy is not None and policy not in _POLICIES:
        raise SpecFileError(
            f"field 'policy': {policy!r} not one of {sorted(_POLICIES)}"
        )
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise SpecFileError("field 'seed': expected a non-negative integer")

    return Scenario(
        kind=raw["kind"],
        process_grid=_grid("process_grid"),
        thread_grid=_grid("thread_grid"),
        iterations=_posint("iterations", 1),
        payload_bytes=_posint("payload_bytes", 8192),
        mechanism=mechanism,
        hints=dict(hints),
        channel_pool=_posint("channel_pool", 16),
        policy=policy,
        seed=seed,
    )


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise SpecFileError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpecFileError(f"invalid JSON in {path}: {exc}")
    return scenario_from_dict(raw)
