"""Shared fixtures: handcrafted graphs, the gauntlet, and tiny processes."""

from __future__ import annotations

import numpy as np
import pytest

from cybermdp.graph import (
    AttackGraph,
    Complexity,
    CvssAnnotation,
    FirewallAnnotation,
    Protocol,
    Vertex,
    VertexKind,
)
from cybermdp.mdp import Mdp
from cybermdp.netgen import TopologyParams, plant_gauntlet


def component(
    vid: str,
    base: float = 5.0,
    expl: float = 5.0,
    complexity: Complexity = Complexity.LOW,
    blocked: frozenset[Protocol] | None = None,
    label: str = "",
) -> Vertex:
    return Vertex(
        id=vid,
        kind=VertexKind.COMPONENT,
        label=label,
        cvss=CvssAnnotation(base=base, exploitability=expl, complexity=complexity),
        firewall=FirewallAnnotation(blocked=blocked) if blocked else None,
    )


def make_graph(
    vertices: tuple[Vertex, ...],
    edges: tuple[tuple[str, str], ...],
    initial: str,
    terminal: str,
) -> AttackGraph:
    return AttackGraph(
        vertices=vertices, edges=edges, initial=initial, terminal=terminal
    )


def make_mdp(
    *,
    states: tuple[str, ...],
    actions: list[list[tuple[int, float, float]]],
    gamma: float,
    initial: int = 0,
    terminal: int | None = None,
) -> Mdp:
    """Hand-build a process; actions[s] lists (dest, p, reward) per slot."""

    offsets = [0]
    dest: list[int] = []
    prob: list[float] = []
    reward: list[float] = []
    for row in actions:
        for d, p, r in row:
            dest.append(d)
            prob.append(p)
            reward.append(r)
        offsets.append(len(dest))
    return Mdp(
        states=states,
        action_offsets=np.asarray(offsets, dtype=np.int64),
        action_dest=np.asarray(dest, dtype=np.int64),
        action_success=np.asarray(prob, dtype=np.float64),
        action_reward=np.asarray(reward, dtype=np.float64),
        gamma=gamma,
        initial_state=initial,
        terminal_state=len(states) - 1 if terminal is None else terminal,
    )


@pytest.fixture
def chain_graph() -> AttackGraph:
    """a -> b -> c with friendly scores; a initial, c terminal."""

    return make_graph(
        vertices=(component("a"), component("b"), component("c")),
        edges=(("a", "b"), ("b", "c")),
        initial="a",
        terminal="c",
    )


@pytest.fixture
def dead_end_graph() -> AttackGraph:
    """a -> b -> d (terminal) with a doomed branch b -> x -> y."""

    return make_graph(
        vertices=(
            component("a"),
            component("b"),
            component("x"),
            component("y"),
            component("d"),
        ),
        edges=(("a", "b"), ("b", "x"), ("x", "y"), ("b", "d")),
        initial="a",
        terminal="d",
    )


DESK_PARAMS = TopologyParams(
    num_subnets=3,
    hosts_per_subnet=8,
    intra_edge_prob=0.1,
    inter_edge_count=2,
    firewall_prob=0.5,
    seed=0,
)


@pytest.fixture
def gauntlet_ftp() -> AttackGraph:
    return plant_gauntlet(DESK_PARAMS, frozenset({Protocol.FTP}))


@pytest.fixture
def gauntlet_all() -> AttackGraph:
    return plant_gauntlet(DESK_PARAMS, frozenset(Protocol))
