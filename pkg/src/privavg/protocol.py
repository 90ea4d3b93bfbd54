"""Per-node state machine for the event-triggered averaging protocol.

Each node keeps a mass pair (mass_y, mass_z) that physically moves through
the network and a state pair (state_y, state_z) holding its current best
estimate, whose exact ratio state_y / state_z is the answer.  Pairs compare
lexicographically with z first; the state is monotone non-decreasing in
that order.  One call to step_node consumes the node's inbox for a round
and returns the successor state plus fully addressed outgoing messages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Union

from .schedule import SubstateSchedule


class EngineContractError(RuntimeError):
    """A message reached a node it was not addressed to."""


@dataclass(frozen=True, slots=True)
class StateBroadcast:
    """One copy of a state announcement; a broadcast yields one per out-neighbor."""

    src: int
    dst: int
    y: int
    z: int
    round: int


@dataclass(frozen=True, slots=True)
class MassTransfer:
    """A whole mass pair handed off to exactly one out-neighbor."""

    src: int
    dst: int
    y: int
    z: int
    round: int


Message = Union[StateBroadcast, MassTransfer]


class TriggersFired(NamedTuple):
    adopt_received: bool  # condition set 1
    adopt_mass: bool      # condition set 2
    hand_off: bool        # condition set 3


@dataclass(frozen=True, slots=True)
class NodeState:
    id: int
    out_neighbors: tuple[int, ...]  # round-robin priority order
    schedule: SubstateSchedule
    mass_y: int
    mass_z: int
    state_y: int
    state_z: int
    s: int            # substate counter
    s_br: bool        # broadcast-state flag
    m_tr: bool        # transmit-mass flag
    rr_cursor: int    # index into out_neighbors of the next transfer target


def init_node(
    node_id: int, schedule: SubstateSchedule, out_neighbors: tuple[int, ...]
) -> tuple[NodeState, tuple[StateBroadcast, ...]]:
    """Set up a node on its first substate and emit its initial broadcast.

    The mass and state both start at (uy[0], 1), the counter moves to 1, and
    the returned broadcast copies are stamped with send round -1 so that the
    engine delivers them at round 0.
    """
    if not out_neighbors:
        raise ValueError(f"node {node_id} has no out-neighbors")
    if len(schedule.uz) != len(schedule.uy) or any(v != 1 for v in schedule.uz):
        raise ValueError(f"node {node_id}: malformed carrier substates")
    if sum(schedule.uy) != len(schedule.uy) * schedule.y0:
        raise ValueError(f"node {node_id}: substates do not average to the initial state")
    node = NodeState(
        id=node_id,
        out_neighbors=tuple(out_neighbors),
        schedule=schedule,
        mass_y=schedule.uy_at(0),
        mass_z=schedule.uz_at(0),
        state_y=schedule.uy_at(0),
        state_z=schedule.uz_at(0),
        s=1,
        s_br=False,
        m_tr=False,
        rr_cursor=0,
    )
    broadcast = tuple(
        StateBroadcast(src=node_id, dst=dst, y=node.state_y, z=node.state_z, round=-1)
        for dst in node.out_neighbors
    )
    return node, broadcast


def evaluate_triggers(
    state_y: int,
    state_z: int,
    received_states: list[tuple[int, int]],
    mass_y: int,
    mass_z: int,
) -> tuple[int, int, TriggersFired]:
    """Run the three condition sets in order against a merged mass.

    received_states holds (y, z) payloads.  Returns the updated state pair
    and which condition sets fired; sets 2 and 3 see the state as already
    updated by set 1.
    """
    fired1 = fired2 = fired3 = False
    if received_states:
        best_y, best_z = max(received_states, key=lambda p: (p[1], p[0]))
        if (best_z, best_y) > (state_z, state_y):
            state_y, state_z = best_y, best_z
            fired1 = True
    if (mass_z, mass_y) > (state_z, state_y):
        state_y, state_z = mass_y, mass_z
        fired2 = True
    if 0 < mass_z < state_z or (mass_z == state_z and mass_y < state_y):
        fired3 = True
    return state_y, state_z, TriggersFired(fired1, fired2, fired3)


def apply_event_triggers(
    node: NodeState,
    received_states: list[tuple[int, int]],
    merged_mass: tuple[int, int],
) -> NodeState:
    """Apply the condition sets to a node holding an already-merged mass.

    Only meaningful when at least one message arrived this round.  The mass
    pair is (y, z); the node's mass fields are updated to it alongside any
    state adoption and flag changes.
    """
    mass_y, mass_z = merged_mass
    state_y, state_z, fired = evaluate_triggers(
        node.state_y, node.state_z, received_states, mass_y, mass_z
    )
    return replace(
        node,
        mass_y=mass_y,
        mass_z=mass_z,
        state_y=state_y,
        state_z=state_z,
        s_br=node.s_br or fired.adopt_received or fired.adopt_mass,
        m_tr=node.m_tr or fired.hand_off,
    )


def step_node(
    node: NodeState, inbox: list[Message], rnd: int
) -> tuple[NodeState, list[Message], TriggersFired]:
    """Advance one node by one synchronous round.

    inbox must contain exactly the messages addressed to this node that were
    sent in round rnd - 1.  The returned outbox is stamped with round rnd
    and is due for delivery at rnd + 1.
    """
    received_states: list[tuple[int, int]] = []
    add_y = add_z = 0
    for msg in inbox:
        if msg.dst != node.id:
            raise EngineContractError(
                f"round {rnd}: message for node {msg.dst} delivered to node {node.id}"
            )
        if isinstance(msg, MassTransfer):
            add_y += msg.y
            add_z += msg.z
        else:
            received_states.append((msg.y, msg.z))
    mass_y = node.mass_y + add_y
    mass_z = node.mass_z + add_z

    state_y, state_z = node.state_y, node.state_z
    s_br, m_tr = node.s_br, node.m_tr
    fired = TriggersFired(False, False, False)
    if inbox:
        state_y, state_z, fired = evaluate_triggers(
            state_y, state_z, received_states, mass_y, mass_z
        )
        s_br = s_br or fired.adopt_received or fired.adopt_mass
        m_tr = m_tr or fired.hand_off

    # Forced hand-off while the schedule still has carrier substates.
    s = node.s
    if node.schedule.uz_at(s) == 1:
        m_tr = True

    outbox: list[Message] = []
    rr_cursor = node.rr_cursor
    if m_tr:
        mass_y += node.schedule.uy_at(s)
        mass_z += node.schedule.uz_at(s)
        assert mass_z >= 1, "a hand-off must carry positive z mass"
        target = node.out_neighbors[rr_cursor]
        outbox.append(MassTransfer(src=node.id, dst=target, y=mass_y, z=mass_z, round=rnd))
        rr_cursor = (rr_cursor + 1) % len(node.out_neighbors)
        mass_y = mass_z = 0
        m_tr = False
        s += 1
    if s_br:
        for dst in node.out_neighbors:
            outbox.append(
                StateBroadcast(src=node.id, dst=dst, y=state_y, z=state_z, round=rnd)
            )
        s_br = False

    assert (state_z, state_y) >= (node.state_z, node.state_y), "state must be lex monotone"
    new_node = replace(
        node,
        mass_y=mass_y,
        mass_z=mass_z,
        state_y=state_y,
        state_z=state_z,
        s=s,
        s_br=s_br,
        m_tr=m_tr,
        rr_cursor=rr_cursor,
    )
    return new_node, outbox, fired
