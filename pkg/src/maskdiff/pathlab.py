"""Brute-force laboratory for decoding-path structure on small instances.

Enumerates which multi-step jumps are feasible (the direct decision set
equals the union of the single-step decisions it would replace), finds the
fewest-jump path through that DAG by exhaustive search, and runs the greedy
chain-prefix verifier so its behavior can be compared against both the
brute-force optimum and the live draft-and-verify decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .core import DecisionSet, DeterministicRng, SequenceState, TimeSchedule, apply_decisions
from .errors import ConfigError, ContractViolation
from .predictor import MarginalPredictor
from .scheduler import SchedulerConfig, greedy_schedule

__all__ = [
    "DEFAULT_MAX_STEPS",
    "FeasibleGraph",
    "PathCuts",
    "LemmaReport",
    "build_feasible_graph",
    "optimal_path",
    "greedy_verifier_path",
    "check_lemma",
    "lemma_from_graph",
]

DEFAULT_MAX_STEPS = 14


@dataclass(frozen=True)
class PathCuts:
    """A decoding path as schedule cut points 0 = a_0 < ... < a_M = N."""

    cut_points: tuple[int, ...]

    @property
    def num_jumps(self) -> int:
        return len(self.cut_points) - 1

    @property
    def max_span(self) -> int:
        return max(b - a for a, b in zip(self.cut_points, self.cut_points[1:]))


@dataclass(frozen=True, eq=False)
class FeasibleGraph:
    """Feasibility structure over schedule nodes 0..N.

    ``edges`` holds every jump (i, j) whose direct decision set equals the
    union of the oracle single-step decisions i..j; all single-step edges
    are present by construction. ``direct_decisions`` keeps the scheduler
    output for every pair so the verifier can be replayed without model
    calls.
    """

    num_steps: int
    edges: frozenset[tuple[int, int]]
    oracle_states: tuple[SequenceState, ...]
    oracle_decisions: tuple[DecisionSet, ...]
    direct_decisions: dict = field(repr=False)

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edges


def build_feasible_graph(
    predictor: MarginalPredictor,
    cfg: SchedulerConfig,
    schedule: TimeSchedule,
    length: int,
    rng: DeterministicRng,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> FeasibleGraph:
    """Brute-force the feasible jump set at the oracle states.

    Segment feasibility is evaluated at oracle states only: any feasible
    path's cut-point states coincide with oracle states because their
    decision unions are equal by definition, so nothing is lost by not
    enumerating off-path states.
    """
    if cfg.kind != "greedy":
        raise ConfigError("path analysis is defined for the greedy scheduler")
    num_steps = schedule.num_steps
    if num_steps > max_steps:
        raise ConfigError(
            f"{num_steps} steps exceeds the brute-force cap of {max_steps}; "
            "raise max_steps explicitly for larger instances"
        )
    if schedule.length != length:
        raise ConfigError("schedule does not cover the sequence length")

    states = [SequenceState.all_masked(length, predictor.vocab.mask_id)]
    estimates = []
    oracle: list[DecisionSet] = []
    for i in range(num_steps):
        estimate = predictor.predict(states[i], i)
        estimates.append(estimate)
        decisions = greedy_schedule(estimate, states[i], i, i + 1, schedule, cfg, rng)
        oracle.append(decisions)
        states.append(apply_decisions(states[i], decisions, i + 1))

    direct: dict[tuple[int, int], DecisionSet] = {}
    for i in range(num_steps):
        direct[(i, i + 1)] = oracle[i]
        for j in range(i + 2, num_steps + 1):
            direct[(i, j)] = greedy_schedule(estimates[i], states[i], i, j, schedule, cfg, rng)

    edges = set()
    for (i, j), decisions in direct.items():
        union = frozenset().union(*(oracle[k].pairs() for k in range(i, j)))
        if decisions.pairs() == union:
            edges.add((i, j))

    return FeasibleGraph(
        num_steps=num_steps,
        edges=frozenset(edges),
        oracle_states=tuple(states),
        oracle_decisions=tuple(oracle),
        direct_decisions=direct,
    )


def optimal_path(graph: FeasibleGraph) -> PathCuts:
    """Fewest-jump path 0 -> N by exhaustive dynamic programming.

    Ties are broken by greedily taking the longest jump first, so the
    returned path is unique and reproducible.
    """
    num_steps = graph.num_steps
    infinity = num_steps + 1
    dist = [infinity] * (num_steps + 1)
    dist[num_steps] = 0
    for v in range(num_steps - 1, -1, -1):
        dist[v] = 1 + min(dist[j] for j in range(v + 1, num_steps + 1) if graph.has_edge(v, j))
    cuts = [0]
    v = 0
    while v < num_steps:
        v = max(
            j for j in range(v + 1, num_steps + 1) if graph.has_edge(v, j) and dist[j] == dist[v] - 1
        )
        cuts.append(v)
    return PathCuts(cut_points=tuple(cuts))


def _chain_holds(graph: FeasibleGraph, n: int, k: int) -> bool:
    """Direct jump n -> n+k+1 equals direct n -> n+k plus the oracle step."""
    direct_long = graph.direct_decisions[(n, n + k + 1)]
    direct_short = graph.direct_decisions[(n, n + k)]
    oracle_step = graph.oracle_decisions[n + k]
    return direct_long.pairs() == direct_short.pairs() | oracle_step.pairs()


def greedy_verifier_path(graph: FeasibleGraph, draft_steps: int) -> PathCuts:
    """Run the chain-prefix verifier greedily from node 0.

    At node n the verifier advances m+1 steps where m is the longest prefix
    k = 1.. for which the chain condition holds within the draft budget.
    The result is asserted to be an edge path of the feasible graph.
    """
    if draft_steps < 1:
        raise ConfigError("draft_steps must be at least 1")
    cuts = [0]
    n = 0
    while n < graph.num_steps:
        budget = min(draft_steps, graph.num_steps - n)
        matched = 0
        while matched < budget - 1 and _chain_holds(graph, n, matched + 1):
            matched += 1
        nxt = n + matched + 1
        if not graph.has_edge(n, nxt):
            raise ContractViolation(
                f"verifier produced a non-feasible jump {n} -> {nxt}; "
                "this contradicts the chain-decomposition argument"
            )
        cuts.append(nxt)
        n = nxt
    return PathCuts(cut_points=tuple(cuts))


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of checking the optimal-path guarantee on one instance.

    ``agree`` means the greedy verifier matched the brute-force optimum both
    with the draft budget set to the optimal path's largest span and with
    the budget set to the full sequence length. Disagreement is reported,
    not raised: the verifier only certifies chain-decomposable merges, a
    subset of full feasibility, so counterexamples are a measurement.
    """

    optimal: PathCuts
    max_span: int
    greedy_at_span: PathCuts
    greedy_at_length: PathCuts
    agree: bool
    counterexample: dict | None

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "optimal_cut_points": list(self.optimal.cut_points),
            "optimal_length": self.optimal.num_jumps,
            "max_span": self.max_span,
            "greedy_at_span": list(self.greedy_at_span.cut_points),
            "greedy_at_length": list(self.greedy_at_length.cut_points),
            "agree": self.agree,
        }
        if self.counterexample is not None:
            payload["counterexample"] = self.counterexample
        return payload


def check_lemma(
    predictor: MarginalPredictor,
    cfg: SchedulerConfig,
    schedule: TimeSchedule,
    length: int,
    rng: DeterministicRng,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> LemmaReport:
    """Compare the greedy verifier against the brute-force optimal path."""
    graph = build_feasible_graph(predictor, cfg, schedule, length, rng, max_steps=max_steps)
    return lemma_from_graph(graph, length)


def lemma_from_graph(graph: FeasibleGraph, length: int) -> LemmaReport:
    """Lemma check over an already-built feasible graph."""
    optimal = optimal_path(graph)
    span = optimal.max_span
    greedy_at_span = greedy_verifier_path(graph, span)
    greedy_at_length = greedy_verifier_path(graph, length)
    agree = (
        greedy_at_span.num_jumps == optimal.num_jumps
        and greedy_at_length.num_jumps == optimal.num_jumps
    )
    counterexample = None
    if not agree:
        counterexample = {
            "num_steps": graph.num_steps,
            "edges": sorted(list(edge) for edge in graph.edges),
            "optimal_cut_points": list(optimal.cut_points),
            "greedy_at_span": list(greedy_at_span.cut_points),
            "greedy_at_length": list(greedy_at_length.cut_points),
            "max_span": span,
        }
    return LemmaReport(
        optimal=optimal,
        max_span=span,
        greedy_at_span=greedy_at_span,
        greedy_at_length=greedy_at_length,
        agree=agree,
        counterexample=counterexample,
    )
