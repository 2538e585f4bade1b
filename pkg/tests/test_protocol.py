from __future__ import annotations

import hashlib
import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from helpers import RUNNING_SQ, RUNNING_VOTES, all_spaces
from metricgov.protocol import (
    Action,
    AdmissibilityViolation,
    EpochConfig,
    InvalidVote,
    MaxRoundsExceeded,
    ScriptedSource,
    canonical_encoding,
    check_admissibility,
    commitment,
    default_nonce,
    dump_trace,
    replay_trace,
    run_epoch,
    seal_and_reveal,
    step_round,
    submit,
    update,
    withdraw,
)
from metricgov.rule import GeneralisedMedian, Mean, round_winner
from metricgov.sim import RandomSource, sample_point
from metricgov.spaces import Euclidean, Permutations, Scalar1D, Simplex

PLANE = Euclidean(2)
ORIGIN = (0.0, 0.0)
# no peak is supported here, (0.5, 0.5) is
NON_SP = [(1.0, 0.0), (0.0, 1.0), (-1.0, -1.0)]


def plane_state(**kw):
    return seal_and_reveal(EpochConfig(PLANE, ORIGIN, **kw), NON_SP)


def test_seal_and_reveal_running():
    state = seal_and_reveal(EpochConfig(Simplex(3), RUNNING_SQ), RUNNING_VOTES)
    assert state.proposal_set() == RUNNING_VOTES and state.n == 5
    for i, v in enumerate(RUNNING_VOTES):
        raw = default_nonce(i) + canonical_encoding(Simplex(3), v).encode()
        assert state.commitments[i] == hashlib.sha256(raw).hexdigest()
    events = [r["event"] for r in state.trace]
    assert events == ["commit", "reveal"]


def test_seal_single_member_and_status_quo_vote():
    state = seal_and_reveal(EpochConfig(Scalar1D(), 0), [3])
    assert state.proposal_set() == [3]
    state = seal_and_reveal(EpochConfig(Scalar1D(), 0), [0, 1])
    assert state.votes == (0, 1)


def test_invalid_votes_rejected():
    with pytest.raises(InvalidVote):
        seal_and_reveal(EpochConfig(Simplex(3), RUNNING_SQ), [(0.6, 0.6, -0.2)])
    with pytest.raises(InvalidVote):
        seal_and_reveal(EpochConfig(Simplex(3), RUNNING_SQ), [])
    with pytest.raises(InvalidVote):
        seal_and_reveal(EpochConfig(Permutations(3), (0, 1, 2)), [(0, 0, 1)])


def test_commitment_binds_vote():
    space = Simplex(3)
    nonce = b"x" * 32
    assert commitment(space, (0.5, 0.5, 0.0), nonce) != commitment(space, (0.5, 0.0, 0.5), nonce)
    assert commitment(space, (0.5, 0.5, 0.0), nonce) != commitment(space, (0.5, 0.5, 0.0), b"y" * 32)


def test_config_validation():
    with pytest.raises(ValueError):
        EpochConfig(Scalar1D(), 0, Mean())
    with pytest.raises(ValueError):
        EpochConfig(Scalar1D(), 0, epsilon=0)
    assert EpochConfig(Scalar1D(0, 10), 0).epsilon == pytest.approx(0.01)
    assert EpochConfig(Scalar1D(), 0, max_rounds=None).round_limit(5) == 60
    assert EpochConfig(Scalar1D(), 0, GeneralisedMedian(Fraction(2, 3))).sigma == Fraction(2, 3)


def test_admissibility_examples():
    state = plane_state()
    step_round(state)
    assert check_admissibility(state, 0, (0.5, 0.5)) is None
    # member 2 dislikes (0.5, 0.5)
    assert check_admissibility(state, 2, (0.5, 0.5)).violation == "preference"
    # one supporter only
    assert check_admissibility(state, 0, (1.0, -0.2)).violation == "support"
    assert check_admissibility(state, 0, (1.0, 0.0)).violation == "support"
    assert check_admissibility(state, 9, (0.5, 0.5)).violation == "slot"
    assert check_admissibility(state, 0, (0.5, float("nan"))).violation == "slot"


def test_admissibility_order_is_fixed():
    # a point failing several conditions reports the first in the fixed order
    state = plane_state()
    step_round(state)
    submit(state, 0, (0.5, 0.5))
    bad = check_admissibility(state, 0, (-0.9, -0.9))
    assert bad.violation == "slot"
    bad = check_admissibility(state, 2, (0.5, 0.5))
    assert bad.violation == "preference"


def test_novelty_and_improvement():
    state = plane_state(epsilon=0.1)
    step_round(state)
    submit(state, 0, (0.5, 0.5))
    step_round(state)
    # within epsilon of the ledger
    assert check_admissibility(state, 1, (0.52, 0.5)).violation == "novelty"
    # admissible otherwise but not better than the current winner
    bad = check_admissibility(state, 1, (0.45, 0.65))
    assert bad is not None and bad.violation in ("improvement", "support")


def test_withdrawn_proposal_cannot_return():
    state = plane_state()
    step_round(state)
    submit(state, 0, (0.5, 0.5))
    withdraw(state, 0)
    assert state.proposal_set() == NON_SP
    assert len(state.ledger) == 1
    bad = check_admissibility(state, 0, (0.5, 0.5))
    assert bad.violation == "novelty"


def test_submit_update_withdraw():
    state = plane_state()
    step_round(state)
    submit(state, 0, (0.4, 0.4))
    assert len(state.proposal_set()) == 4
    with pytest.raises(AdmissibilityViolation) as err:
        submit(state, 0, (0.55, 0.5))
    assert err.value.violation == "slot"
    step_round(state)
    # an update must still beat the current winner
    with pytest.raises(AdmissibilityViolation) as err:
        update(state, 0, (0.3, 0.3))
    assert err.value.violation == "improvement"
    update(state, 0, (0.5, 0.5))
    assert state.current_public == {0: (0.5, 0.5)}
    assert state.ledger == [(0.4, 0.4), (0.5, 0.5)]
    withdraw(state, 0)
    assert len(state.proposal_set()) == 3 and len(state.ledger) == 2
    with pytest.raises(AdmissibilityViolation):
        withdraw(state, 0)
    with pytest.raises(AdmissibilityViolation):
        update(state, 1, (0.5, 0.45))


def test_quiescence_counter():
    state = plane_state()
    _, done = step_round(state)
    assert state.quiescence == 1 and not done
    submit(state, 0, (0.5, 0.5))
    res, done = step_round(state)
    assert res.winner == (0.5, 0.5) and state.quiescence == 1 and not done
    _, done = step_round(state)
    assert state.quiescence == 2 and done


def test_two_unsupported_rounds_keep_status_quo():
    out = run_epoch(EpochConfig(PLANE, ORIGIN), NON_SP)
    assert out.outcome == ORIGIN and out.winner is None and out.rounds == 2


def test_scripted_epoch_adopts_compromise():
    src = ScriptedSource({2: [Action(0, (0.5, 0.5))]})
    out = run_epoch(EpochConfig(PLANE, ORIGIN), NON_SP, [src])
    assert out.outcome == (0.5, 0.5) and out.rounds == 3
    events = [r["event"] for r in out.trace]
    assert events == ["commit", "reveal", "round", "submit", "round", "round", "outcome"]


def test_rejected_actions_are_logged():
    src = ScriptedSource({2: [Action(2, (0.5, 0.5)), Action(0, (0.5, 0.5)), Action(0, (0.6, 0.6))]})
    out = run_epoch(EpochConfig(PLANE, ORIGIN), NON_SP, [src])
    rejects = [r for r in out.trace if r["event"] == "reject"]
    assert [r["violation"] for r in rejects] == ["preference", "slot"]


def test_rate_and_swf_epochs():
    out = run_epoch(EpochConfig(Scalar1D(0, 100), 20), [10, 15, 18, 22, 25])
    assert out.outcome == 18
    perm = Permutations(3, ("g", "w", "q"))
    s = (0, 1, 2)
    out = run_epoch(EpochConfig(perm, s), [s, s, (1, 0, 2)])
    assert out.outcome == s and out.winner is None


def test_max_rounds():
    with pytest.raises(MaxRoundsExceeded):
        run_epoch(EpochConfig(Scalar1D(0, 100), 20, max_rounds=1), [10, 15, 18, 22, 25])


def _random_epoch(space, seed, eps=None):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    votes = [sample_point(space, rng) for _ in range(n)]
    s = sample_point(space, rng)
    cfg = EpochConfig(space, s, epsilon=eps)
    return cfg, run_epoch(cfg, votes, [RandomSource(seed, per_round=4)])


@pytest.mark.parametrize("kind", ["euclidean", "simplex", "scalar", "permutations", "subsets", "table", "plurality"])
def test_epochs_terminate_with_separated_ledger(kind):
    space = all_spaces()[kind]
    for seed in range(60):
        cfg, out = _random_epoch(space, seed)
        state = out.state
        eps = cfg.epsilon
        slack = 1e-12
        for a, b in itertools.combinations(state.ledger, 2):
            assert space.distance(a, b) >= eps - slack
        for a in state.ledger:
            for v in state.votes:
                assert space.distance(a, v) >= eps - slack
        assert out.rounds <= cfg.round_limit(state.n)
        # absent withdrawals, winners change only with strictly higher scores
        pulled = {r["round"] for r in out.trace if r["event"] == "withdraw"}
        for k, (a, b) in enumerate(zip(state.history, state.history[1:]), start=1):
            if k in pulled or not b.has_winner:
                continue
            if not a.has_winner:
                assert b.winning_score > 0
            elif a.winner != b.winner:
                assert b.winning_score > a.winning_score
            else:
                assert b.winning_score == a.winning_score


def test_public_proposal_channel_is_monotone():
    rng = np.random.default_rng(5)
    agg = GeneralisedMedian()
    for _ in range(500):
        votes = [sample_point(PLANE, rng) for _ in range(5)]
        s = sample_point(PLANE, rng)
        c = sample_point(PLANE, rng)
        before = round_winner(PLANE, s, votes, votes, agg)
        after = round_winner(PLANE, s, votes, votes + [c], agg)
        for e in before.scores:
            assert after.score_of(e.point).score == e.score
        assert after.winner in (before.winner, c)


def test_trace_is_deterministic_and_replays():
    space = Simplex(3)
    a = _random_epoch(space, 17)[1]
    cfg, b = _random_epoch(space, 17)
    assert dump_trace(a.trace) == dump_trace(b.trace)
    records = [json.loads(line) for line in dump_trace(b.trace).splitlines()]
    assert replay_trace(records, cfg) == []


def test_replay_detects_tampering():
    src = ScriptedSource({2: [Action(0, (0.5, 0.5))]})
    cfg = EpochConfig(PLANE, ORIGIN)
    out = run_epoch(cfg, NON_SP, [src])
    records = [json.loads(line) for line in dump_trace(out.trace).splitlines()]
    for r in records:
        if r["event"] == "submit":
            r["point"] = [0.9, 0.9]
    assert replay_trace(records, cfg)
