"""Synchronous-round simulation with auditing.

Messages sent at round k are delivered at round k + 1; the initial
broadcasts count as round -1 traffic consumed at round 0.  The engine never
holds a float: the network-wide average is kept as a reduced integer
fraction and every convergence check cross-multiplies.

The simulator also watches two structural invariants of the protocol while
it runs: no node's state pair may lexicographically exceed the current
leading mass once all substates are injected, and once only lex-equal
masses remain the mass-adoption trigger must stay quiet with all traffic
dying out within n - 1 further rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .graph import Digraph, is_strongly_connected, max_out_degree
from .protocol import (
    MassTransfer,
    Message,
    NodeState,
    StateBroadcast,
    TriggersFired,
    init_node,
    step_node,
)
from .schedule import SubstateSchedule

INT64_MAX = 2**63 - 1


class InvalidScheduleError(ValueError):
    """A schedule handed to the engine fails its structural constraints."""


class SimulationOverflowError(RuntimeError):
    """A mass or state value left the signed 64-bit range; trial aborted."""

    def __init__(self, message: str, trace: "SimTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, slots=True)
class RoundRecord:
    """Everything that happened in one round: outbox and post-step snapshots."""

    round: int
    messages: tuple[Message, ...]
    nodes: tuple[NodeState, ...]
    fired: tuple[TriggersFired, ...]

    def broadcast_events(self) -> int:
        return len({m.src for m in self.messages if isinstance(m, StateBroadcast)})

    def broadcast_copies(self) -> int:
        return sum(1 for m in self.messages if isinstance(m, StateBroadcast))

    def mass_transfers(self) -> int:
        return sum(1 for m in self.messages if isinstance(m, MassTransfer))

    def transmitting_nodes(self) -> int:
        return len({m.src for m in self.messages})


@dataclass(slots=True)
class SimTrace:
    """Complete, replayable record of one trial."""

    graph: Digraph
    schedules: tuple[SubstateSchedule, ...]
    q_num: int
    q_den: int
    max_rounds: int
    quiescence_window: int
    records: list[RoundRecord] = field(default_factory=list)
    quiescence_round: int | None = None
    convergence_round: int | None = None

    @property
    def final_round(self) -> int:
        return self.records[-1].round

    def iteration_records(self) -> list[RoundRecord]:
        return [r for r in self.records if r.round >= 0]


@dataclass(frozen=True, slots=True)
class AuditVerdict:
    ok: bool
    first_violation_round: int | None = None
    detail: str = ""


@dataclass(frozen=True, slots=True)
class TrialReport:
    """Headline numbers and audit outcomes for one trial."""

    n: int
    m: int
    dmax: int
    q_num: int
    q_den: int
    converged: bool
    quiescent: bool
    convergence_round: int | None
    quiescence_round: int | None
    last_emission_round: int
    tx_broadcast_as_one: int
    tx_broadcast_as_fanout: int
    bound: int
    exactness_ok: bool
    bound_ok: bool
    conservation: AuditVerdict
    dominance: AuditVerdict
    absorption: AuditVerdict
    final_states: tuple[tuple[int, int], ...]  # (state_y, state_z) per node


def exact_average(schedules) -> tuple[int, int]:
    """The target value sum(y0) / n as a reduced fraction."""
    total = sum(s.y0 for s in schedules)
    n = len(schedules)
    sign = -1 if total < 0 else 1
    g = math.gcd(abs(total), n)
    return sign * abs(total) // g, n // g


def theoretical_bound(n: int, m: int, dmax: int) -> int:
    """Worst-case round count before every node settles on the average."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if m < n:
        raise ValueError("a strongly connected digraph needs m >= n")
    if dmax < 1:
        raise ValueError("dmax must be >= 1")
    return 1 + dmax + n * n + (n - 1) * m * m


def run_simulation(
    g: Digraph,
    schedules,
    max_rounds: int | None = None,
    quiescence_window: int | None = None,
) -> tuple[SimTrace, TrialReport]:
    """Run one trial to quiescence (or to the round budget).

    Quiescence is a simulator-level observation: the first round that emits
    nothing after every schedule is exhausted.  The protocol has already
    stopped on its own by then; the engine keeps simulating for
    quiescence_window further rounds (default 5n) to certify the silence.
    """
    schedules = tuple(schedules)
    if len(schedules) != g.n:
        raise InvalidScheduleError(f"expected {g.n} schedules, got {len(schedules)}")
    if not is_strongly_connected(g):
        raise ValueError("digraph must be strongly connected")
    dmax = max_out_degree(g)
    for j, sched in enumerate(schedules):
        if len(sched.uy) != dmax + 2 or len(sched.uz) != dmax + 2:
            raise InvalidScheduleError(f"schedule {j}: wrong length for dmax={dmax}")
        if any(v != 1 for v in sched.uz):
            raise InvalidScheduleError(f"schedule {j}: carrier substates must all be 1")
        if sum(sched.uy) != (dmax + 2) * sched.y0:
            raise InvalidScheduleError(f"schedule {j}: substates do not sum to (dmax+2)*y0")
    if quiescence_window is None:
        quiescence_window = 5 * g.n
    if quiescence_window < 1:
        raise ValueError("quiescence_window must be >= 1")
    if max_rounds is None:
        max_rounds = theoretical_bound(g.n, g.m, dmax)

    q_num, q_den = exact_average(schedules)
    trace = SimTrace(
        graph=g,
        schedules=schedules,
        q_num=q_num,
        q_den=q_den,
        max_rounds=max_rounds,
        quiescence_window=quiescence_window,
    )

    nodes: list[NodeState] = []
    init_msgs: list[Message] = []
    for j in range(g.n):
        node, broadcast = init_node(j, schedules[j], g.out_neighbors(j))
        nodes.append(node)
        init_msgs.extend(broadcast)
    idle = TriggersFired(False, False, False)
    trace.records.append(
        RoundRecord(-1, tuple(init_msgs), tuple(nodes), tuple(idle for _ in nodes))
    )
    _check_overflow(trace.records[-1], trace)

    # max_rounds budgets the search for quiescence onset; once found, the
    # certification window always runs to completion.
    quiescent_at: int | None = None
    certified = False
    rnd = 0
    while True:
        if quiescent_at is None and rnd >= max_rounds:
            break
        inboxes: list[list[Message]] = [[] for _ in range(g.n)]
        for msg in trace.records[-1].messages:
            inboxes[msg.dst].append(msg)
        outbox: list[Message] = []
        fired_list: list[TriggersFired] = []
        new_nodes: list[NodeState] = []
        for j in range(g.n):
            node, emitted, fired = step_node(nodes[j], inboxes[j], rnd)
            new_nodes.append(node)
            outbox.extend(emitted)
            fired_list.append(fired)
        nodes = new_nodes
        record = RoundRecord(rnd, tuple(outbox), tuple(nodes), tuple(fired_list))
        trace.records.append(record)
        _check_overflow(record, trace)

        exhausted = all(node.s > dmax + 1 for node in nodes)
        flags_clear = all(not node.s_br and not node.m_tr for node in nodes)
        if not outbox and exhausted and flags_clear:
            if quiescent_at is None:
                quiescent_at = rnd
            if rnd >= quiescent_at + quiescence_window - 1:
                certified = True
                break
        else:
            quiescent_at = None
        rnd += 1

    trace.quiescence_round = quiescent_at if certified else None
    trace.convergence_round = detect_convergence_round(trace, (q_num, q_den))
    report = _build_report(trace, dmax)
    return trace, report


def _check_overflow(record: RoundRecord, trace: SimTrace) -> None:
    for node in record.nodes:
        if (
            abs(node.mass_y) > INT64_MAX
            or node.mass_z > INT64_MAX
            or abs(node.state_y) > INT64_MAX
            or node.state_z > INT64_MAX
        ):
            raise SimulationOverflowError(
                f"round {record.round}: node {node.id} left the 64-bit range", trace
            )


def detect_convergence_round(trace: SimTrace, q: tuple[int, int]) -> int | None:
    """Smallest round from which every node's state ratio equals q forever."""
    q_num, q_den = q
    last_bad = -1
    for record in trace.iteration_records():
        for node in record.nodes:
            if node.state_y * q_den != q_num * node.state_z:
                last_bad = max(last_bad, record.round)
                break
    k0 = last_bad + 1
    if k0 > trace.final_round:
        return None
    return k0


def audit_mass_conservation(trace: SimTrace, schedules) -> AuditVerdict:
    """Check the global bookkeeping identity at every recorded round.

    Held mass + in-flight mass + not-yet-injected substates must equal
    (dmax + 2) * sum(y0) on the y side and (dmax + 2) * n on the z side.
    """
    schedules = tuple(schedules)
    dmax = schedules[0].dmax
    expect_y = (dmax + 2) * sum(s.y0 for s in schedules)
    expect_z = (dmax + 2) * len(schedules)
    for record in trace.records:
        held_y = sum(node.mass_y for node in record.nodes)
        held_z = sum(node.mass_z for node in record.nodes)
        fly_y = sum(m.y for m in record.messages if isinstance(m, MassTransfer))
        fly_z = sum(m.z for m in record.messages if isinstance(m, MassTransfer))
        pool_y = pool_z = 0
        for node in record.nodes:
            sched = schedules[node.id]
            for s in range(node.s, dmax + 2):
                pool_y += sched.uy_at(s)
                pool_z += sched.uz_at(s)
        got_y = held_y + fly_y + pool_y
        got_z = held_z + fly_z + pool_z
        if got_y != expect_y or got_z != expect_z:
            return AuditVerdict(
                ok=False,
                first_violation_round=record.round,
                detail=(
                    f"round {record.round}: y {got_y} != {expect_y} or "
                    f"z {got_z} != {expect_z}"
                ),
            )
    return AuditVerdict(ok=True, detail=f"totals ({expect_y}, {expect_z}) at every round")


def _nonzero_masses(record: RoundRecord) -> list[tuple[int, int]]:
    masses = [
        (node.mass_z, node.mass_y) for node in record.nodes if node.mass_z > 0
    ]
    masses.extend(
        (m.z, m.y) for m in record.messages if isinstance(m, MassTransfer)
    )
    return masses


def audit_leading_mass_dominance(trace: SimTrace, dmax: int) -> AuditVerdict:
    """From the round after the last forced injection, no state may exceed
    the lex-max of all held and in-flight masses."""
    for record in trace.iteration_records():
        if record.round < dmax + 1:
            continue
        masses = _nonzero_masses(record)
        if not masses:
            return AuditVerdict(False, record.round, "no nonzero mass anywhere")
        lead = max(masses)
        for node in record.nodes:
            if (node.state_z, node.state_y) > lead:
                return AuditVerdict(
                    False,
                    record.round,
                    f"node {node.id} state {(node.state_z, node.state_y)} exceeds leading {lead}",
                )
    return AuditVerdict(ok=True)


def audit_absorption(trace: SimTrace, dmax: int) -> AuditVerdict:
    """After the first round (>= dmax + 1) where all nonzero masses are
    lex-equal, the mass-adoption trigger must stay quiet and all traffic
    must stop within n - 1 further rounds."""
    n = trace.graph.n
    settle: int | None = None
    for record in trace.iteration_records():
        if record.round < dmax + 1:
            continue
        masses = _nonzero_masses(record)
        if masses and len(set(masses)) == 1:
            settle = record.round
            break
    if settle is None:
        return AuditVerdict(False, None, "masses never became all lex-equal")
    for record in trace.iteration_records():
        if record.round <= settle:
            continue
        if any(f.adopt_mass for f in record.fired):
            return AuditVerdict(
                False, record.round, f"mass adoption fired after settle round {settle}"
            )
        if record.messages and record.round > settle + (n - 1):
            return AuditVerdict(
                False,
                record.round,
                f"traffic after settle round {settle} + n - 1",
            )
    return AuditVerdict(ok=True, detail=f"masses settled at round {settle}")


def _build_report(trace: SimTrace, dmax: int) -> TrialReport:
    g = trace.graph
    tx_one = tx_fan = 0
    for record in trace.records:
        tx_one += record.broadcast_events() + record.mass_transfers()
        tx_fan += record.broadcast_copies() + record.mass_transfers()
    emit_rounds = [r.round for r in trace.records if r.messages]
    last_emission = max(emit_rounds) if emit_rounds else -1
    final = trace.records[-1]
    exact = all(
        node.state_y * trace.q_den == trace.q_num * node.state_z for node in final.nodes
    )
    bound = theoretical_bound(g.n, g.m, dmax)
    conv = trace.convergence_round
    quiesc = trace.quiescence_round
    bound_ok = (
        conv is not None and quiesc is not None and conv <= quiesc <= bound
    )
    return TrialReport(
        n=g.n,
        m=g.m,
        dmax=dmax,
        q_num=trace.q_num,
        q_den=trace.q_den,
        converged=conv is not None,
        quiescent=trace.quiescence_round is not None,
        convergence_round=conv,
        quiescence_round=trace.quiescence_round,
        last_emission_round=last_emission,
        tx_broadcast_as_one=tx_one,
        tx_broadcast_as_fanout=tx_fan,
        bound=bound,
        exactness_ok=exact,
        bound_ok=bound_ok,
        conservation=audit_mass_conservation(trace, trace.schedules),
        dominance=audit_leading_mass_dominance(trace, dmax),
        absorption=audit_absorption(trace, dmax),
        final_states=tuple((n.state_y, n.state_z) for n in final.nodes),
    )


# --------------------------------------------------------------------------
# Trace exports
# --------------------------------------------------------------------------

TRACE_CSV_HEADER = "round,state_broadcasts,mass_transfers,transmitting_nodes,converged_nodes"
MESSAGE_LOG_HEADER = "round,kind,src,dst,y,z"


def trace_csv_lines(trace: SimTrace) -> list[str]:
    lines = [TRACE_CSV_HEADER]
    for record in trace.records:
        converged = sum(
            1
            for node in record.nodes
            if node.state_y * trace.q_den == trace.q_num * node.state_z
        )
        lines.append(
            f"{record.round},{record.broadcast_events()},{record.mass_transfers()},"
            f"{record.transmitting_nodes()},{converged}"
        )
    return lines


def message_log_lines(trace: SimTrace) -> list[str]:
    lines = [MESSAGE_LOG_HEADER]
    for record in trace.records:
        for msg in record.messages:
            kind = "mass" if isinstance(msg, MassTransfer) else "state"
            lines.append(f"{msg.round},{kind},{msg.src},{msg.dst},{msg.y},{msg.z}")
    return lines


def write_trace_csv(trace: SimTrace, path) -> None:
    Path(path).write_text("\n".join(trace_csv_lines(trace)) + "\n", encoding="ascii")


def write_message_log(trace: SimTrace, path) -> None:
    Path(path).write_text("\n".join(message_log_lines(trace)) + "\n", encoding="ascii")
