"""Language games in which agents negotiate a shared dimension weight.

Each agent carries a single weight in [0, 1]: the share of dimension one in
the two-dimension compounds it asserts (dimension two receives the
complement).  In a dialogue the speaker observes a point of the unit square,
asserts the signed conjunction it judges most apt, and the listener nudges its
own weight toward the weight implied by that assertion.

Model 1 listeners update only when their current membership for the asserted
compound does not exceed the speaker's reliability; model 2 listeners update
whenever the two differ.

A timestep visits every speaker/listener pair once in a freshly shuffled
order, sampling a fresh observation per dialogue, and applies updates
sequentially.  ``run_timestep`` carries an exact vectorised path used whenever
every weight lies strictly inside (0, 1); it is bit-identical to the
sequential reference because, for interior weights, the asserted compound does
not depend on the speaker's weight and each listener's chain of updates only
reads that listener's own state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .labels import Label, canonical_label_pair

__all__ = [
    "AssertionIndex",
    "ASSERTION_ORDER",
    "AgentState",
    "GameConfig",
    "DialogueOutcome",
    "choose_assertion",
    "implied_weight",
    "apply_update",
    "run_dialogue",
    "run_timestep",
    "init_population",
    "dialogues_per_timestep",
    "batch_implied_weights",
]


class AssertionIndex(enum.Enum):
    """The four signed conjunctions over two labels, in tie-break order."""

    BOTH = 1
    ONLY_FIRST = 2
    ONLY_SECOND = 3
    NEITHER = 4

    @property
    def signs(self) -> tuple[bool, bool]:
        return _SIGNS[self]


_SIGNS = {
    AssertionIndex.BOTH: (True, True),
    AssertionIndex.ONLY_FIRST: (True, False),
    AssertionIndex.ONLY_SECOND: (False, True),
    AssertionIndex.NEITHER: (False, False),
}

ASSERTION_ORDER = (
    AssertionIndex.BOTH,
    AssertionIndex.ONLY_FIRST,
    AssertionIndex.ONLY_SECOND,
    AssertionIndex.NEITHER,
)


@dataclass(frozen=True)
class AgentState:
    """One agent: an id, its dimension weight, and its reliability as a speaker."""

    agent_id: int
    weight: float
    reliability: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")
        if not 0.0 <= self.reliability <= 1.0:
            raise ValueError(f"reliability must lie in [0, 1], got {self.reliability}")


@dataclass(frozen=True)
class GameConfig:
    """Static parameters of a population game."""

    n_agents: int = 10
    timesteps: int = 2000
    rate: float = 1e-3
    model: int = 1
    labels: tuple[Label, Label] = canonical_label_pair()
    reliability: float | tuple[float, ...] = 1.0
    # None draws initial weights uniformly; a float fixes them; a tuple sets each agent.
    weight_init: float | tuple[float, ...] | None = None
    schedule: str = "ordered"

    def __post_init__(self) -> None:
        if self.n_agents < 2:
            raise ValueError(f"a game needs at least two agents, got {self.n_agents}")
        if self.timesteps < 0:
            raise ValueError(f"timesteps must be non-negative, got {self.timesteps}")
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"update rate must lie in (0, 1), got {self.rate}")
        if self.model not in (1, 2):
            raise ValueError(f"model must be 1 or 2, got {self.model}")
        if len(self.labels) != 2 or any(l.space.dims != 1 for l in self.labels):
            raise ValueError("the game is played over exactly two 1-d labels")
        if isinstance(self.reliability, tuple):
            if len(self.reliability) != self.n_agents:
                raise ValueError("per-agent reliability list must match n_agents")
            if any(not 0.0 <= r <= 1.0 for r in self.reliability):
                raise ValueError("reliabilities must lie in [0, 1]")
        elif not 0.0 <= self.reliability <= 1.0:
            raise ValueError(f"reliability must lie in [0, 1], got {self.reliability}")
        if isinstance(self.weight_init, tuple):
            if len(self.weight_init) != self.n_agents:
                raise ValueError("per-agent weight list must match n_agents")
            if any(not 0.0 <= v <= 1.0 for v in self.weight_init):
                raise ValueError("initial weights must lie in [0, 1]")
        elif self.weight_init is not None and not 0.0 <= self.weight_init <= 1.0:
            raise ValueError(f"initial weight must lie in [0, 1], got {self.weight_init}")
        if self.schedule not in ("ordered", "unordered"):
            raise ValueError(f"schedule must be 'ordered' or 'unordered', got {self.schedule!r}")


@dataclass(frozen=True)
class DialogueOutcome:
    """What happened in one dialogue, from the listener's point of view."""

    asserted: AssertionIndex
    updated: bool
    target: float | None
    listener_weight_after: float

    def __post_init__(self) -> None:
        if self.updated and self.target is None:
            raise ValueError("an update requires a target weight")


def init_population(config: GameConfig, rng: np.random.Generator) -> list[AgentState]:
    """Create the initial agents; uniform random weights unless configured otherwise."""
    if config.weight_init is None:
        weights = rng.random(config.n_agents)
    elif isinstance(config.weight_init, tuple):
        weights = np.asarray(config.weight_init, dtype=np.float64)
    else:
        weights = np.full(config.n_agents, float(config.weight_init))
    if isinstance(config.reliability, tuple):
        rels = config.reliability
    else:
        rels = (float(config.reliability),) * config.n_agents
    return [
        AgentState(agent_id=i, weight=float(weights[i]), reliability=rels[i])
        for i in range(config.n_agents)
    ]


def dialogues_per_timestep(n_agents: int, schedule: str = "ordered") -> int:
    if schedule == "ordered":
        return n_agents * (n_agents - 1)
    if schedule == "unordered":
        return n_agents * (n_agents - 1) // 2
    raise ValueError(f"unknown schedule {schedule!r}")


def choose_assertion(speaker: AgentState, labels: tuple[Label, Label], x: tuple[float, float]) -> AssertionIndex:
    """The signed conjunction with maximal membership for the speaker; ties go to the earliest in ``ASSERTION_ORDER``."""
    share = speaker.weight
    m1 = labels[0].membership(x[0])
    m2 = labels[1].membership(x[1])
    memberships = [
        share * m1 + (1.0 - share) * m2,
        share * m1 + (1.0 - share) * (1.0 - m2),
        share * (1.0 - m1) + (1.0 - share) * m2,
        share * (1.0 - m1) + (1.0 - share) * (1.0 - m2),
    ]
    return ASSERTION_ORDER[memberships.index(max(memberships))]


def implied_weight(
    asserted: AssertionIndex,
    labels: tuple[Label, Label],
    x: tuple[float, float],
    reliability: float,
) -> float | None:
    """The dimension weight at which the asserted compound's membership equals the reliability.

    Solved from ``share * mu_first + (1 - share) * mu_second = reliability``
    and clamped to [0, 1].  Returns None when both signed memberships coincide,
    in which case no weight is implied.
    """
    s1, s2 = asserted.signs
    m1 = labels[0].membership(x[0])
    m2 = labels[1].membership(x[1])
    mu_first = m1 if s1 else 1.0 - m1
    mu_second = m2 if s2 else 1.0 - m2
    denom = mu_first - mu_second
    if denom == 0.0:
        return None
    raw = (reliability - mu_second) / denom
    return min(1.0, max(0.0, raw))


def apply_update(listener: AgentState, target: float, rate: float) -> AgentState:
    """Move the listener's weight a fraction ``rate`` of the way toward ``target``."""
    return replace(listener, weight=listener.weight + rate * (target - listener.weight))


def run_dialogue(
    speaker: AgentState,
    listener: AgentState,
    labels: tuple[Label, Label],
    x: tuple[float, float],
    rate: float,
    model: int,
) -> tuple[AgentState, DialogueOutcome]:
    """One dialogue: the speaker asserts, the listener may move toward the implied weight.

    The reliability granted to the assertion is the speaker's own.  Under
    model 1 the listener updates when its membership for the asserted compound
    is at most that reliability; under model 2, whenever the two differ.  A
    dialogue whose implied weight is undefined never updates.
    """
    asserted = choose_assertion(speaker, labels, x)
    s1, s2 = asserted.signs
    m1 = labels[0].membership(x[0])
    m2 = labels[1].membership(x[1])
    mu_first = m1 if s1 else 1.0 - m1
    mu_second = m2 if s2 else 1.0 - m2
    share = listener.weight
    mu_listener = share * mu_first + (1.0 - share) * mu_second
    rel = speaker.reliability
    wants_update = (mu_listener <= rel) if model == 1 else (mu_listener != rel)

    target = implied_weight(asserted, labels, x, rel) if wants_update else None
    if wants_update and target is not None:
        listener = apply_update(listener, target, rate)
        outcome = DialogueOutcome(asserted, True, target, listener.weight)
    else:
        outcome = DialogueOutcome(asserted, False, target, listener.weight)
    return listener, outcome


def batch_implied_weights(
    labels: tuple[Label, Label],
    xs: np.ndarray,
    reliability: float | np.ndarray,
):
    """Vectorised implied weights for many observations at once.

    Signs are chosen per dimension by majority membership (ties count as
    positive), which matches ``choose_assertion`` for any speaker weight
    strictly inside (0, 1).  Returns ``(targets, usable, mu_first, mu_second)``
    where ``usable`` flags observations whose implied weight is defined; the
    target is clamped to [0, 1] and zero-filled where unusable.
    """
    m1 = labels[0].membership_batch(xs[:, 0])
    m2 = labels[1].membership_batch(xs[:, 1])
    return _signed_targets(m1, m2, reliability)


def _signed_targets(m1: np.ndarray, m2: np.ndarray, reliability):
    mu_first = np.where(m1 >= 0.5, m1, 1.0 - m1)
    mu_second = np.where(m2 >= 0.5, m2, 1.0 - m2)
    denom = mu_first - mu_second
    usable = denom != 0.0
    targets = np.zeros_like(denom)
    np.divide(reliability - mu_second, denom, out=targets, where=usable)
    np.clip(targets, 0.0, 1.0, out=targets)
    return targets, usable, mu_first, mu_second


_PAIR_CACHE: dict[tuple[int, str], tuple[np.ndarray, np.ndarray]] = {}


def _base_pairs(n: int, schedule: str) -> tuple[np.ndarray, np.ndarray]:
    """Fixed canonical enumeration of the schedule's pairs, cached per size."""
    key = (n, schedule)
    cached = _PAIR_CACHE.get(key)
    if cached is not None:
        return cached
    if schedule == "ordered":
        grid = np.arange(n)
        firsts = np.repeat(grid, n - 1)
        seconds = np.concatenate([np.delete(grid, i) for i in range(n)])
    else:
        firsts, seconds = np.triu_indices(n, k=1)
    _PAIR_CACHE[key] = (firsts, seconds)
    return firsts, seconds


def _draw_schedule(n: int, schedule: str, rng: np.random.Generator):
    """Speaker and listener index arrays for one timestep, freshly shuffled.

    Consumption order of the generator is part of the determinism contract:
    first the pair permutation, then (unordered only) the role coins, then the
    observations are drawn by the caller.
    """
    firsts, seconds = _base_pairs(n, schedule)
    perm = rng.permutation(firsts.size)
    firsts, seconds = firsts[perm], seconds[perm]
    if schedule == "ordered":
        return firsts, seconds
    coins = rng.random(firsts.size) < 0.5
    speakers = np.where(coins, firsts, seconds)
    listeners = np.where(coins, seconds, firsts)
    return speakers, listeners


def run_timestep(
    population: Sequence[AgentState],
    labels: tuple[Label, Label],
    env,
    rate: float,
    model: int,
    rng: np.random.Generator,
    schedule: str = "ordered",
) -> list[AgentState]:
    """Play every scheduled dialogue once, applying updates sequentially.

    ``env`` must provide ``sample_batch(rng, count)`` returning one observation
    per row.  Returns the population after the timestep; ids are preserved.
    """
    n = len(population)
    if n < 2:
        raise ValueError("a timestep needs at least two agents")
    speakers, listeners = _draw_schedule(n, schedule, rng)
    xs = env.sample_batch(rng, speakers.size)

    interior = all(0.0 < a.weight < 1.0 for a in population)
    if interior:
        weights = _apply_fast(population, labels, xs, speakers, listeners, rate, model, schedule)
        if weights is not None:
            return [replace(a, weight=float(weights[i])) for i, a in enumerate(population)]
    return _apply_sequential(population, labels, xs, speakers, listeners, rate, model)


def _apply_sequential(population, labels, xs, speakers, listeners, rate, model):
    """Reference path: dialogues strictly in shuffled order, one at a time."""
    states = list(population)
    for k in range(speakers.size):
        s, l = speakers[k], listeners[k]
        x = (float(xs[k, 0]), float(xs[k, 1]))
        states[l], _ = run_dialogue(states[s], states[l], labels, x, rate, model)
    return states


def _near_half_memberships(m1: np.ndarray, m2: np.ndarray) -> bool:
    """True when a membership sits within half an ulp's reach of 0.5 without equalling it."""
    m = np.concatenate((m1, m2))
    d = np.abs(m - 0.5)
    return bool(np.any((d > 0.0) & (d < 1e-12)))


def _group_by_listener(listeners, n, rounds, order, values, fill=0.0, dtype=np.float64):
    """Values rearranged to one row per listener, columns in dialogue order."""
    if rounds * n == listeners.size:
        return values[order].reshape(n, rounds)
    counts = np.bincount(listeners, minlength=n)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    cols = np.arange(listeners.size) - np.repeat(starts, counts)
    out = np.full((n, rounds), fill, dtype=dtype)
    out[listeners[order], cols] = values[order]
    return out


def _apply_fast(population, labels, xs, speakers, listeners, rate, model, schedule):
    """Vectorised path, bit-identical to the sequential reference when it runs.

    Listener chains are mutually independent because, for weights strictly
    inside (0, 1), targets and assertions do not read any agent's weight; each
    listener's dialogues are replayed in their shuffled relative order, all
    listeners advancing one dialogue per round with the same per-update
    arithmetic as the sequential path.  The method declines (returns None) in
    the two states where that independence argument breaks: a membership so
    close to one half that sign choices could tie in rounded arithmetic, and a
    weight leaving the open interval mid-timestep.  The caller then replays
    the identical schedule sequentially.
    """
    n = len(population)
    rels = np.asarray([a.reliability for a in population])
    m1 = labels[0].membership_batch(xs[:, 0])
    m2 = labels[1].membership_batch(xs[:, 1])
    if _near_half_memberships(m1, m2):
        return None
    speaker_rel = rels[speakers]
    targets, usable, mu_first, mu_second = _signed_targets(m1, m2, speaker_rel)

    sort_keys = listeners.astype(np.uint16) if n < 65536 else listeners
    order = np.argsort(sort_keys, kind="stable")
    if schedule == "ordered":
        rounds = n - 1
    else:
        rounds = int(np.bincount(listeners, minlength=n).max())
    p_target = _group_by_listener(listeners, n, rounds, order, targets)
    p_active = _group_by_listener(listeners, n, rounds, order, usable, fill=False, dtype=bool)
    p_first = _group_by_listener(listeners, n, rounds, order, mu_first)
    p_second = _group_by_listener(listeners, n, rounds, order, mu_second)
    p_rel = _group_by_listener(listeners, n, rounds, order, speaker_rel)

    weights = np.asarray([a.weight for a in population])
    for r in range(rounds):
        mu = weights * p_first[:, r] + (1.0 - weights) * p_second[:, r]
        if model == 1:
            cond = mu <= p_rel[:, r]
        else:
            cond = mu != p_rel[:, r]
        upd = p_active[:, r] & cond
        weights = np.where(upd, weights + rate * (p_target[:, r] - weights), weights)
        if not bool(np.all((weights > 0.0) & (weights < 1.0))):
            return None
    return weights
