# Simulated virtual stigmergy: a (key, value) shared memory through which the
# robots agree on the round's global bid and on the assignment set.
import logging
import math
from dataclasses import dataclass

from cata.exceptions import ParameterError, ProtocolError

logger = logging.getLogger(__name__)

GLOBAL_BID_KEY = "global_bid"
ASSIGNMENT_PREFIX = "assignment/"


@dataclass(frozen=True)
class BidTuple:
    """B_i: (r_i, b_max) plus the argmax task so the winner can claim it."""

    robot_id: int
    bid_value: float
    task_id: int | None

    def __post_init__(self):
        if not (math.isfinite(self.bid_value) and self.bid_value >= 0):
            raise ParameterError(f"bid_value must be a finite value >= 0, got {self.bid_value}")

    def beats(self, other: "BidTuple | None") -> bool:
        """Conflict rule: higher bid wins, equal bids go to the lower robot id."""
        if other is None:
            return True
        if self.bid_value != other.bid_value:
            return self.bid_value > other.bid_value
        return self.robot_id < other.robot_id


class AssignmentSet:
    """Bidirectional robot <-> task map A, injective both ways."""

    def __init__(self, pairs=()):
        self._task_of: dict[int, int] = {}
        self._robot_of: dict[int, int] = {}
        for robot_id, task_id in pairs:
            self.add(robot_id, task_id)

    def add(self, robot_id: int, task_id: int) -> None:
        if robot_id in self._task_of:
            raise ProtocolError(f"robot {robot_id} already holds task {self._task_of[robot_id]}")
        if task_id in self._robot_of:
            raise ProtocolError(f"task {task_id} already held by robot {self._robot_of[task_id]}")
        self._task_of[robot_id] = task_id
        self._robot_of[task_id] = robot_id

    def task_of(self, robot_id: int) -> int | None:
        return self._task_of.get(robot_id)

    def robot_of(self, task_id: int) -> int | None:
        return self._robot_of.get(task_id)

    def has_robot(self, robot_id: int) -> bool:
        return robot_id in self._task_of

    def has_task(self, task_id: int) -> bool:
        return task_id in self._robot_of

    def pairs(self) -> list[tuple[int, int]]:
        """(robot_id, task_id) pairs sorted by robot id."""
        return sorted(self._task_of.items())

    def copy(self) -> "AssignmentSet":
        return AssignmentSet(self.pairs())

    def __len__(self) -> int:
        return len(self._task_of)

    def __iter__(self):
        return iter(self.pairs())

    def __eq__(self, other) -> bool:
        if not isinstance(other, AssignmentSet):
            return NotImplemented
        return self.pairs() == other.pairs()

    def __repr__(self) -> str:
        return f"AssignmentSet({self.pairs()})"


@dataclass(frozen=True)
class Entry:
    value: object
    version: int
    writer: int | None


class StigmergyStore:
    """Shared memory for one trial. Mutations are serialized by the caller."""

    def __init__(self):
        self.entries: dict[str, Entry] = {}

    def get(self, key: str):
        entry = self.entries.get(key)
        return None if entry is None else entry.value

    def version(self, key: str) -> int:
        entry = self.entries.get(key)
        return 0 if entry is None else entry.version

    def _write(self, key: str, value, writer: int | None) -> None:
        self.entries[key] = Entry(value, self.version(key) + 1, writer)

    def put_bid(self, candidate: BidTuple, key: str = GLOBAL_BID_KEY) -> bool:
        """Offers a bid tuple for ``key``; the store keeps the winning tuple.

        Returns:
            bool: Whether the candidate replaced the stored tuple.
        """
        current = self.get(key)
        if candidate.beats(current):
            self._write(key, candidate, candidate.robot_id)
            return True
        return False

    def global_bid(self, key: str = GLOBAL_BID_KEY) -> BidTuple | None:
        return self.get(key)

    def read_assignments(self) -> AssignmentSet:
        """Rebuilds A from the per-robot assignment entries."""
        pairs = [
            (int(key[len(ASSIGNMENT_PREFIX):]), entry.value)
            for key, entry in self.entries.items()
            if key.startswith(ASSIGNMENT_PREFIX)
        ]
        return AssignmentSet(pairs)

    def commit_winner(self, winner: BidTuple) -> AssignmentSet:
        """Only the winning robot writes its own assignment entry.

        Raises:
            ProtocolError: If the robot or the task is already assigned.
        """
        assignments = self.read_assignments()
        if winner.task_id is None:
            raise ProtocolError(f"winner {winner.robot_id} carries no task")
        assignments.add(winner.robot_id, winner.task_id)
        self._write(f"{ASSIGNMENT_PREFIX}{winner.robot_id}", winner.task_id, winner.robot_id)
        logger.debug("robot %d won task %d with bid %.6g", winner.robot_id, winner.task_id, winner.bid_value)
        return assignments


def round_key(round_index: int) -> str:
    """Global-bid key for one auction round."""
    return f"{GLOBAL_BID_KEY}/{round_index}"
