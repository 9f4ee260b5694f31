"""Learning environments: the contract plus two built-in benchmarks.

An environment is clonable and seed-deterministic: equal reset seed and
equal action sequence give bit-identical state, score, and terminal
trajectories, which is what makes parallel evaluation schedule-independent.
State is exposed to programs through read-only data sources whose buffers
the environment mutates in place.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

from .data import FLOAT64, INT8, DataSource, SourceSpec
from .errors import EnvironmentFault
from .rng import Rng


class LearningEnvironment(ABC):
    """Contract every environment implements.

    ``data_sources`` must return stable DataSource objects backed by the
    live state (not copies); ``snapshot`` copies the state by value for
    archiving.
    """

    action_count: int

    @abstractmethod
    def reset(self, seed: int) -> None: ...

    @abstractmethod
    def step(self, action: int) -> None: ...

    @property
    @abstractmethod
    def current_score(self) -> float: ...

    @property
    @abstractmethod
    def terminal(self) -> bool: ...

    @abstractmethod
    def data_sources(self) -> list: ...

    @abstractmethod
    def snapshot(self) -> tuple: ...

    @abstractmethod
    def deep_clone(self) -> "LearningEnvironment": ...

    def source_specs(self) -> tuple:
        return tuple(s.spec for s in self.data_sources())

    @property
    def min_score(self) -> float:
        """Score assigned to an episode an environment fault cut short."""
        return 0.0

    @property
    def default_max_steps(self) -> int:
        return 1000


class PendulumEnv(LearningEnvironment):
    """Frictionless torque-controlled pendulum, 7 discrete torques.

    State is (angle, angular velocity); angle 0 is upright, wrapped to
    (-pi, pi], velocity clamped to [-8, 8].  Per step, with torque t:

        acc   = (3g / 2L) sin(angle) + 3t / (m L^2)
        vel  <- clamp(vel + acc dt)
        angle<- wrap(angle + vel dt)
        score += -(angle^2 + 0.1 vel^2 + 0.001 t^2)

    computed in that order; the episode ends after ``horizon`` steps.
    """

    GRAVITY = 9.81
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    TORQUES = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)

    action_count = 7

    def __init__(self, horizon: int = 500):
        self.horizon = horizon
        self._source = DataSource(SourceSpec(FLOAT64, (2,)))
        self._state = self._source.values  # [angle, velocity], aliased
        self._score = 0.0
        self._steps = 0

    def reset(self, seed: int) -> None:
        rng = Rng(seed, role="env")
        self._state[0] = -math.pi + 2.0 * math.pi * rng.random()
        self._state[1] = -1.0 + 2.0 * rng.random()
        self._score = 0.0
        self._steps = 0

    def step(self, action: int) -> None:
        if self.terminal:
            raise EnvironmentFault("step after terminal state")
        if not 0 <= action < self.action_count:
            raise EnvironmentFault(f"unknown action {action}")
        torque = self.TORQUES[action]
        angle, velocity = self._state
        acc = (1.5 * self.GRAVITY / self.LENGTH) * math.sin(angle) \
            + 3.0 * torque / (self.MASS * self.LENGTH * self.LENGTH)
        velocity += acc * self.DT
        if velocity > self.MAX_SPEED:
            velocity = self.MAX_SPEED
        elif velocity < -self.MAX_SPEED:
            velocity = -self.MAX_SPEED
        angle = _wrap_angle(angle + velocity * self.DT)
        self._state[0] = angle
        self._state[1] = velocity
        self._score -= angle * angle + 0.1 * velocity * velocity \
            + 0.001 * torque * torque
        self._steps += 1

    @property
    def current_score(self) -> float:
        return self._score

    @property
    def terminal(self) -> bool:
        return self._steps >= self.horizon

    def data_sources(self) -> list:
        return [self._source]

    def snapshot(self) -> tuple:
        return (tuple(self._state),)

    def deep_clone(self) -> "PendulumEnv":
        clone = PendulumEnv(self.horizon)
        clone._state[:] = self._state
        clone._score = self._score
        clone._steps = self._steps
        return clone

    @property
    def min_score(self) -> float:
        worst_step = math.pi ** 2 + 0.1 * self.MAX_SPEED ** 2 + 0.001 * 4.0
        return -self.horizon * worst_step

    @property
    def default_max_steps(self) -> int:
        return self.horizon


_TTT_LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
)


class TicTacToeEnv(LearningEnvironment):
    """Tic-tac-toe against a seeded uniform-random opponent.

    Nine actions name board cells (int8 source: 0 empty, 1 agent,
    2 opponent).  The agent moves first; playing an occupied cell ends the
    game at -10, a win scores +1, a draw 0, an opponent win -1.
    """

    action_count = 9

    def __init__(self):
        self._source = DataSource(SourceSpec(INT8, (9,)))
        self._board = self._source.values
        self._score = 0.0
        self._terminal = True
        self._opponent = Rng(0, role="env")

    def reset(self, seed: int) -> None:
        self._board[:] = [0] * 9
        self._score = 0.0
        self._terminal = False
        self._opponent.reset(seed)

    def step(self, action: int) -> None:
        if self._terminal:
            raise EnvironmentFault("step after terminal state")
        if not 0 <= action < 9:
            raise EnvironmentFault(f"unknown action {action}")
        board = self._board
        if board[action] != 0:
            self._score = -10.0
            self._terminal = True
            return
        board[action] = 1
        if self._wins(1):
            self._score = 1.0
            self._terminal = True
            return
        empties = [i for i in range(9) if board[i] == 0]
        if not empties:
            self._score = 0.0
            self._terminal = True
            return
        board[empties[self._opponent.randrange(len(empties))]] = 2
        if self._wins(2):
            self._score = -1.0
            self._terminal = True

    def _wins(self, mark: int) -> bool:
        board = self._board
        return any(
            board[a] == mark and board[b] == mark and board[c] == mark
            for a, b, c in _TTT_LINES
        )

    @property
    def current_score(self) -> float:
        return self._score

    @property
    def terminal(self) -> bool:
        return self._terminal

    def data_sources(self) -> list:
        return [self._source]

    def snapshot(self) -> tuple:
        return (tuple(self._board),)

    def deep_clone(self) -> "TicTacToeEnv":
        clone = TicTacToeEnv()
        clone._board[:] = self._board
        clone._score = self._score
        clone._terminal = self._terminal
        clone._opponent = self._opponent.clone()
        return clone

    @property
    def min_score(self) -> float:
        return -10.0

    @property
    def default_max_steps(self) -> int:
        return 9


def _wrap_angle(x: float) -> float:
    """Map to (-pi, pi]."""
    wrapped = (x + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if wrapped == -math.pi else wrapped


_ENV_FACTORIES = {
    "pendulum": PendulumEnv,
    "tictactoe": TicTacToeEnv,
}


def register_environment(name: str, factory) -> None:
    """Make a custom environment selectable by name."""
    _ENV_FACTORIES[name] = factory


def make_environment(name: str) -> LearningEnvironment:
    try:
        factory = _ENV_FACTORIES[name]
    except KeyError:
        raise EnvironmentFault(
            f"unknown environment {name!r}; registered: {sorted(_ENV_FACTORIES)}"
        ) from None
    return factory()


def environment_names():
    return sorted(_ENV_FACTORIES)
