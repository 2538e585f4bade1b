"""Epoch state machine: sealed votes, public-proposal rounds, quiescence.

An epoch starts by committing to and then revealing every member's vote.
Round 1 scores the votes alone. Each later round first lets proposal sources
submit, update or withdraw public proposals (checked one at a time, in source
order) and then applies the per-round rule to the votes plus the current
public proposals. The epoch ends when two consecutive rounds produce the same
winner, or both produce none.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol, Sequence

from .rule import (
    Aggregator,
    GeneralisedMedian,
    RoundResult,
    _tolerance,
    check_sigma,
    is_supported,
    round_winner,
    utility,
    utility_vector,
)
from .spaces import MetricSpace

ADMISSIBILITY_ORDER = ("slot", "preference", "support", "novelty", "improvement")


class InvalidVote(ValueError):
    pass


class AdmissibilityViolation(Exception):
    def __init__(self, violation: str, detail: str = ""):
        super().__init__(f"{violation}: {detail}" if detail else violation)
        self.violation = violation
        self.detail = detail


class MaxRoundsExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EpochConfig:
    space: MetricSpace
    status_quo: Any
    aggregator: Aggregator = field(default_factory=GeneralisedMedian)
    sigma: Any = None
    epsilon: Any = None
    max_rounds: int | None = None

    def __post_init__(self):
        sigma = self.sigma
        if sigma is None:
            if not isinstance(self.aggregator, GeneralisedMedian):
                raise ValueError("an explicit threshold is required with the mean aggregator")
            sigma = self.aggregator.sigma
        object.__setattr__(self, "sigma", check_sigma(sigma))
        eps = self.space.default_epsilon() if self.epsilon is None else self.epsilon
        if not eps > 0:
            raise ValueError("novelty distance must be positive")
        object.__setattr__(self, "epsilon", eps)
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        self.space.check(self.status_quo)

    def round_limit(self, n: int) -> int:
        return self.max_rounds if self.max_rounds is not None else 10 * n + 10


@dataclass(frozen=True)
class Action:
    """One public-proposal move by ``member``: submit, update or withdraw."""

    member: int
    point: Any = None
    kind: str = "submit"


class ProposalSource(Protocol):
    def propose(self, state: EpochState) -> Iterable[Action]:
        ...


def canonical_encoding(space: MetricSpace, point) -> str:
    return json.dumps(space.encode_point(point), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def commitment(space: MetricSpace, vote, nonce: bytes) -> str:
    return hashlib.sha256(nonce + canonical_encoding(space, vote).encode()).hexdigest()


def default_nonce(member: int) -> bytes:
    return hashlib.sha256(f"member-{member}".encode()).digest()


@dataclass
class EpochState:
    config: EpochConfig
    votes: tuple
    commitments: tuple[str, ...]
    current_public: dict[int, Any] = field(default_factory=dict)
    ledger: list = field(default_factory=list)
    history: list[RoundResult] = field(default_factory=list)
    quiescence: int = 0
    trace: list[dict] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.votes)

    @property
    def round(self) -> int:
        return len(self.history)

    @property
    def space(self) -> MetricSpace:
        return self.config.space

    def proposal_set(self) -> list:
        out = list(self.votes)
        out.extend(self.current_public[i] for i in sorted(self.current_public))
        return out

    def baseline_score(self):
        """Winning score of the previous round, or 0 if it had no winner."""
        if self.history and self.history[-1].has_winner:
            return self.history[-1].winning_score
        return 0

    def log(self, event: str, **data) -> None:
        self.trace.append({"event": event, "round": self.round, **data})

    @property
    def quiesced(self) -> bool:
        return self.quiescence >= 2


def seal_and_reveal(config: EpochConfig, votes: Sequence, nonces: Sequence[bytes] | None = None) -> EpochState:
    """Commit to every vote, then reveal all of them in one step."""
    if len(votes) == 0:
        raise InvalidVote("an epoch needs at least one vote")
    space = config.space
    votes = tuple(tuple(v) if isinstance(v, list) else v for v in votes)
    for i, v in enumerate(votes):
        try:
            problems = space.violations(v)
        except TypeError as exc:
            raise InvalidVote(f"member {i}: {exc}") from None
        if problems:
            raise InvalidVote(f"member {i}: " + "; ".join(problems))
    nonces = list(nonces) if nonces is not None else [default_nonce(i) for i in range(len(votes))]
    sealed = tuple(commitment(space, v, nonces[i]) for i, v in enumerate(votes))
    # reveal: every opening must match its commitment before any vote is visible
    for i, v in enumerate(votes):
        if commitment(space, v, nonces[i]) != sealed[i]:
            raise InvalidVote(f"member {i}: opening does not match commitment")
    state = EpochState(config, votes, sealed)
    state.log("commit", commitments=list(sealed))
    state.log(
        "reveal",
        status_quo=space.encode_point(config.status_quo),
        votes=[space.encode_point(v) for v in votes],
    )
    return state


def check_admissibility(state: EpochState, member: int, c, replacing: bool = False) -> AdmissibilityViolation | None:
    """First violated admissibility condition for ``member`` proposing ``c``, else ``None``."""
    cfg, space = state.config, state.space
    if not 0 <= member < state.n:
        return AdmissibilityViolation("slot", f"no member {member}")
    has_slot = member in state.current_public
    if has_slot and not replacing:
        return AdmissibilityViolation("slot", f"member {member} already holds a public proposal")
    if replacing and not has_slot:
        return AdmissibilityViolation("slot", f"member {member} has no public proposal to update")
    problems = space.violations(c)
    if problems:
        return AdmissibilityViolation("slot", "invalid point: " + "; ".join(problems))
    s, votes = cfg.status_quo, state.votes
    u_own = utility(space, s, votes[member], c)
    if not u_own > _tolerance([u_own, space.distance(votes[member], s)]):
        return AdmissibilityViolation("preference", f"proposer utility {u_own} is not positive")
    if not is_supported(space, s, votes, c, cfg.sigma):
        return AdmissibilityViolation("support", "fewer than ceil(sigma n) supporters")
    eps = cfg.epsilon
    slack = 0 if space.exact else 1e-12 * max(1.0, float(eps))
    for other in list(votes) + state.ledger:
        if space.distance(c, other) < eps - slack:
            return AdmissibilityViolation("novelty", f"within {eps} of an earlier point")
    score = cfg.aggregator(utility_vector(space, s, votes, c))
    base = state.baseline_score()
    if not score > base + _tolerance([score, base]):
        return AdmissibilityViolation("improvement", f"score {score} does not exceed {base}")
    return None


def submit(state: EpochState, member: int, c) -> EpochState:
    bad = check_admissibility(state, member, c)
    if bad is not None:
        raise bad
    c = tuple(c) if isinstance(c, list) else c
    state.current_public[member] = c
    state.ledger.append(c)
    state.log("submit", member=member, point=state.space.encode_point(c))
    return state


def update(state: EpochState, member: int, c) -> EpochState:
    bad = check_admissibility(state, member, c, replacing=True)
    if bad is not None:
        raise bad
    c = tuple(c) if isinstance(c, list) else c
    state.current_public[member] = c
    state.ledger.append(c)
    state.log("update", member=member, point=state.space.encode_point(c))
    return state


def withdraw(state: EpochState, member: int) -> EpochState:
    if member not in state.current_public:
        raise AdmissibilityViolation("slot", f"member {member} has no public proposal to withdraw")
    del state.current_public[member]
    state.log("withdraw", member=member)
    return state


def apply_action(state: EpochState, action: Action) -> AdmissibilityViolation | None:
    """Apply ``action``; a rejected action is logged and returned, not raised."""
    try:
        if action.kind == "submit":
            submit(state, action.member, action.point)
        elif action.kind == "update":
            update(state, action.member, action.point)
        elif action.kind == "withdraw":
            withdraw(state, action.member)
        else:
            raise ValueError(f"unknown action kind {action.kind!r}")
    except AdmissibilityViolation as bad:
        rec = {"member": action.member, "kind": action.kind, "violation": bad.violation}
        if action.point is not None:
            rec["point"] = state.space.encode_point(action.point)
        state.log("reject", **rec)
        return bad
    return None


def _same_outcome(a: RoundResult, b: RoundResult) -> bool:
    if a.has_winner != b.has_winner:
        return False
    return not a.has_winner or a.winner == b.winner


def step_round(state: EpochState) -> tuple[RoundResult, bool]:
    cfg = state.config
    result = round_winner(cfg.space, cfg.status_quo, state.votes, state.proposal_set(), cfg.aggregator, cfg.sigma)
    if state.history and _same_outcome(state.history[-1], result):
        state.quiescence += 1
    else:
        state.quiescence = 1
    state.history.append(result)
    state.log("round", **result.to_dict(cfg.space))
    return result, state.quiesced


@dataclass
class EpochOutcome:
    outcome: Any
    winner: Any
    rounds: int
    state: EpochState

    @property
    def trace(self) -> list[dict]:
        return self.state.trace


def run_epoch(config: EpochConfig, votes: Sequence, sources: Sequence[ProposalSource] = (),
              nonces: Sequence[bytes] | None = None) -> EpochOutcome:
    state = seal_and_reveal(config, votes, nonces)
    limit = config.round_limit(state.n)
    result, done = step_round(state)
    while not done:
        if state.round >= limit:
            raise MaxRoundsExceeded(f"no quiescence after {limit} rounds")
        for source in sources:
            for action in source.propose(state):
                apply_action(state, action)
        result, done = step_round(state)
    outcome = result.winner if result.has_winner else config.status_quo
    state.log("outcome", outcome=config.space.encode_point(outcome), rounds=state.round)
    return EpochOutcome(outcome, result.winner, state.round, state)


class ScriptedSource:
    """Replays fixed actions keyed by the round in which they are submitted."""

    def __init__(self, actions_by_round: dict[int, Sequence[Action]]):
        self.actions_by_round = {int(r): list(a) for r, a in actions_by_round.items()}

    def propose(self, state: EpochState) -> Iterable[Action]:
        return self.actions_by_round.get(state.round + 1, [])


def dump_trace(trace: Iterable[dict]) -> str:
    return "".join(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n" for rec in trace)


def replay_trace(records: Sequence[dict], config: EpochConfig) -> list[str]:
    """Re-run every recorded round from the logged votes and moves; return mismatches."""
    space = config.space
    problems = []
    reveal = next((r for r in records if r["event"] == "reveal"), None)
    if reveal is None:
        return ["trace has no reveal record"]
    votes = [space.decode_point(v) for v in reveal["votes"]]
    public: dict[int, Any] = {}
    for rec in records:
        ev = rec["event"]
        if ev in ("submit", "update"):
            public[rec["member"]] = space.decode_point(rec["point"])
        elif ev == "withdraw":
            public.pop(rec["member"], None)
        elif ev == "round":
            proposals = votes + [public[i] for i in sorted(public)]
            res = round_winner(space, config.status_quo, votes, proposals, config.aggregator, config.sigma)
            got = res.to_dict(space)
            if got["winner"] != rec["winner"] or got["winning_score"] != rec["winning_score"]:
                problems.append(f"round {rec['round'] + 1}: recorded {rec['winner']}, recomputed {got['winner']}")
    return problems


__all__ = [
    "Action",
    "AdmissibilityViolation",
    "EpochConfig",
    "EpochOutcome",
    "EpochState",
    "InvalidVote",
    "MaxRoundsExceeded",
    "ScriptedSource",
    "check_admissibility",
    "commitment",
    "dump_trace",
    "replay_trace",
    "run_epoch",
    "seal_and_reveal",
    "step_round",
    "submit",
    "update",
    "withdraw",
]
