import itertools

import pytest

from cata.exceptions import ParameterError, ProtocolError
from cata.utils.stigmergy import (
    GLOBAL_BID_KEY,
    AssignmentSet,
    BidTuple,
    StigmergyStore,
    round_key,
)


def test_first_write_is_kept():
    store = StigmergyStore()
    assert store.put_bid(BidTuple(3, 5.0, 2))
    assert store.global_bid() == BidTuple(3, 5.0, 2)


def test_higher_bid_wins():
    store = StigmergyStore()
    store.put_bid(BidTuple(3, 5.0, 2))
    assert store.put_bid(BidTuple(1, 7.0, 4))
    assert store.global_bid() == BidTuple(1, 7.0, 4)


def test_lower_bid_leaves_store_unchanged():
    store = StigmergyStore()
    store.put_bid(BidTuple(1, 7.0, 4))
    assert not store.put_bid(BidTuple(0, 6.0, 1))
    assert store.global_bid() == BidTuple(1, 7.0, 4)
    assert store.version(GLOBAL_BID_KEY) == 1


def test_equal_bids_go_to_lower_robot_id():
    store = StigmergyStore()
    store.put_bid(BidTuple(3, 5.0, 2))
    store.put_bid(BidTuple(1, 5.0, 4))
    assert store.global_bid() == BidTuple(1, 5.0, 4)


def test_write_order_independence():
    bids = [BidTuple(4, 2.0, 0), BidTuple(2, 9.0, 1), BidTuple(7, 9.0, 3), BidTuple(0, 0.0, None), BidTuple(5, 8.5, 2)]
    winners = set()
    for order in itertools.permutations(bids):
        store = StigmergyStore()
        for bid in order:
            store.put_bid(bid, round_key(0))
        winners.add(store.global_bid(round_key(0)))
    assert winners == {BidTuple(2, 9.0, 1)}


def test_version_counters_never_decrease():
    store = StigmergyStore()
    seen = []
    for robot_id, bid in [(3, 1.0), (2, 4.0), (1, 2.0), (0, 4.0), (5, 9.0)]:
        store.put_bid(BidTuple(robot_id, bid, robot_id))
        seen.append(store.version(GLOBAL_BID_KEY))
    assert seen == sorted(seen)
    assert seen[-1] == 4


@pytest.mark.parametrize("bid", [-1.0, float("nan"), float("inf")])
def test_invalid_bid_rejected(bid):
    with pytest.raises(ParameterError):
        BidTuple(0, bid, 0)


def test_fresh_store_has_no_assignments():
    assert len(StigmergyStore().read_assignments()) == 0


def test_commit_winner_adds_pair():
    store = StigmergyStore()
    assignments = store.commit_winner(BidTuple(2, 9.0, 5))
    assert assignments.pairs() == [(2, 5)]
    assert store.read_assignments() == AssignmentSet([(2, 5)])
    assert store.entries["assignment/2"].writer == 2


def test_commit_winner_rejects_assigned_robot():
    store = StigmergyStore()
    store.commit_winner(BidTuple(2, 9.0, 5))
    with pytest.raises(ProtocolError):
        store.commit_winner(BidTuple(2, 3.0, 6))


def test_commit_winner_rejects_assigned_task():
    store = StigmergyStore()
    store.commit_winner(BidTuple(2, 9.0, 5))
    with pytest.raises(ProtocolError):
        store.commit_winner(BidTuple(1, 3.0, 5))


def test_commit_winner_needs_task():
    with pytest.raises(ProtocolError):
        StigmergyStore().commit_winner(BidTuple(1, 0.0, None))


def test_k_commits_give_k_injective_pairs():
    store = StigmergyStore()
    for k, (robot_id, task_id) in enumerate([(4, 1), (0, 3), (2, 0), (1, 2)], start=1):
        store.commit_winner(BidTuple(robot_id, 10.0 - k, task_id))
        assignments = store.read_assignments()
        assert len(assignments) == k
        pairs = assignments.pairs()
        assert len({r for r, _ in pairs}) == len({t for _, t in pairs}) == k


def test_assignment_set_lookups():
    assignments = AssignmentSet([(1, 7), (0, 3)])
    assert assignments.task_of(1) == 7
    assert assignments.robot_of(3) == 0
    assert assignments.task_of(9) is None
    assert list(assignments) == [(0, 3), (1, 7)]
    copy = assignments.copy()
    copy.add(2, 2)
    assert len(assignments) == 2 and len(copy) == 3


def test_round_keys_are_distinct():
    assert round_key(0) != round_key(1)
    assert round_key(3).startswith(GLOBAL_BID_KEY)
