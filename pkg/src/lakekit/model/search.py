"""Breadth-first exploration of the bounded state space."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .. import errors
from .canon import brute_force_key, canonical_key
from .state import (
    INIT,
    INVARIANTS,
    STATE_INVARIANTS,
    TRANSITION_INVARIANTS,
    Bounds,
    ModelState,
    Policy,
    successors,
)

DEFAULT_STATE_CAP = 10**7


@dataclass(frozen=True)
class Trace:
    initial: ModelState
    steps: tuple[tuple[tuple, ModelState], ...] = ()

    @property
    def actions(self) -> list[tuple]:
        return [a for a, _ in self.steps]

    @property
    def final(self) -> ModelState:
        return self.steps[-1][1] if self.steps else self.initial

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Enumeration:
    states: int
    transitions: int
    per_depth: tuple[int, ...]  # newly discovered states at each depth
    frontier_peak: int
    complete: bool  # False when the step bound cut exploration short

    def to_dict(self) -> dict:
        return {
            "states": self.states,
            "transitions": self.transitions,
            "per_depth": list(self.per_depth),
            "frontier_peak": self.frontier_peak,
            "complete": self.complete,
        }


@dataclass(frozen=True)
class CheckResult:
    invariant: str
    ok: bool
    states: int
    trace: Trace | None = None
    violation: str = ""
    extra: dict = field(default_factory=dict)


def _policy(policy) -> Policy:
    return policy if isinstance(policy, Policy) else Policy.named(policy)


def _bfs(bounds: Bounds, policy: Policy, cap: int, on_state=None, on_transition=None):
    """Generic BFS; the callbacks may return a truthy value to stop early.

    Returns ``(stop_key, parents, stats)`` where ``parents`` maps each
    canonical key to ``(parent_key, action)`` over raw representatives, so
    traces read back with consistent names.
    """
    init_key = canonical_key(INIT)
    parents: dict = {init_key: None}
    reps = {init_key: INIT}
    frontier = deque([(init_key, INIT)])
    per_depth = [1]
    transitions = 0
    peak = 1
    if on_state and on_state(INIT):
        return init_key, parents, reps, (1, 0, per_depth, peak, True)
    complete = True
    for depth in range(1, bounds.max_steps + 1):
        nxt = deque()
        while frontier:
            key, state = frontier.popleft()
            for action, succ in successors(state, bounds, policy):
                transitions += 1
                if on_transition and on_transition(state, action, succ):
                    k = ("transition", key, action)
                    parents[k] = (key, action)
                    reps[k] = succ
                    return k, parents, reps, (len(parents) - 1, transitions, per_depth, peak, False)
                sk = canonical_key(succ)
                if sk in parents:
                    continue
                parents[sk] = (key, action)
                reps[sk] = succ
                if len(parents) > cap:
                    raise errors.BoundsTooLarge(f"more than {cap} states within {bounds.to_dict()}")
                nxt.append((sk, succ))
                if on_state and on_state(succ):
                    per_depth.append(len(nxt))
                    return sk, parents, reps, (len(parents), transitions, per_depth, peak, False)
        if not nxt:
            break
        per_depth.append(len(nxt))
        peak = max(peak, len(nxt))
        frontier = nxt
    else:
        # the step bound was reached; see whether anything lies beyond it
        complete = not any(True for _, s in frontier for _ in successors(s, bounds, policy))
    return None, parents, reps, (len(parents), transitions, per_depth, peak, complete)


def _trace(stop, parents, reps) -> Trace:
    path = []
    key = stop
    while parents[key] is not None:
        prev, action = parents[key]
        path.append((action, reps[key]))
        key = prev
    path.reverse()
    return Trace(reps[key], tuple(path))


def enumerate_states(bounds: Bounds, policy="guardrail_on", *, cap: int = DEFAULT_STATE_CAP) -> Enumeration:
    _, _, _, (states, transitions, per_depth, peak, complete) = _bfs(bounds, _policy(policy), cap)
    return Enumeration(states, transitions, tuple(per_depth), peak, complete)


def reachable_keys(bounds: Bounds, policy="guardrail_on", *, cap: int = DEFAULT_STATE_CAP) -> set:
    _, parents, _, _ = _bfs(bounds, _policy(policy), cap)
    return set(parents)


def check(invariant: str, bounds: Bounds, policy="guardrail_on", *, cap: int = DEFAULT_STATE_CAP) -> CheckResult:
    """Search for the shortest trace that violates ``invariant``."""
    pol = _policy(policy)
    if invariant in STATE_INVARIANTS:
        pred = STATE_INVARIANTS[invariant]
        stop, parents, reps, stats = _bfs(bounds, pol, cap, on_state=lambda s: not pred(s))
    elif invariant in TRANSITION_INVARIANTS:
        pred = TRANSITION_INVARIANTS[invariant]
        stop, parents, reps, stats = _bfs(bounds, pol, cap, on_transition=lambda a, _x, b: not pred(a, b))
    else:
        raise errors.UnknownInvariant(f"unknown invariant {invariant!r}; known: {', '.join(INVARIANTS)}")
    if stop is None:
        return CheckResult(invariant, True, stats[0], extra={"complete": stats[4]})
    trace = _trace(stop, parents, reps)
    return CheckResult(invariant, False, stats[0], trace, f"{invariant} violated after {len(trace)} actions")


def naive_reachable(bounds: Bounds, policy="guardrail_on") -> tuple[int, set]:
    """Oracle: explore raw states with no symmetry reduction at all.

    Returns the number of distinct raw states and the set of their classes
    under brute-force renaming. Exponential; small bounds only.
    """
    pol = _policy(policy)
    seen = {INIT}
    frontier = [INIT]
    for _ in range(bounds.max_steps):
        nxt = []
        for s in frontier:
            for _a, t in successors(s, bounds, pol):
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return len(seen), {brute_force_key(s) for s in seen}
