"""MazeNav entropy experiments: demonstrations, tabular students and KL estimates."""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import rel_entr, xlogy

import config
from sweep_pool import run_cells

logger = logging.getLogger(__name__)


class DemoConfigError(ValueError):
    """Raised for demonstration settings outside their domain."""


class MazeAction(IntEnum):
    """The four moves, in the fixed order used for iteration and tie-breaking."""
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


N_ACTIONS = len(MazeAction)

_MOVES = {
    MazeAction.UP: (-1, 0),
    MazeAction.DOWN: (1, 0),
    MazeAction.LEFT: (0, -1),
    MazeAction.RIGHT: (0, 1),
}


@dataclass(frozen=True)
class MazeState:
    row: int
    col: int
    nuisance: int = 1

    def check(self, size: int, n_m_max: int):
        if not (0 <= self.row < size and 0 <= self.col < size):
            raise DemoConfigError(f"cell ({self.row}, {self.col}) outside a {size}x{size} maze")
        if not 1 <= self.nuisance <= n_m_max:
            raise DemoConfigError(f"nuisance {self.nuisance} outside [1, {n_m_max}]")


@dataclass(frozen=True)
class ExpertPolicy:
    """Deterministic map from (row, col) to an action; the goal cell has none."""
    size: int
    actions: Dict[Tuple[int, int], MazeAction]

    @property
    def goal(self) -> Tuple[int, int]:
        return (self.size - 1, self.size - 1)

    def action(self, row: int, col: int) -> Optional[MazeAction]:
        return self.actions.get((row, col))

    def non_goal_cells(self) -> List[Tuple[int, int]]:
        return [(r, c) for r in range(self.size) for c in range(self.size) if (r, c) != self.goal]


@dataclass(frozen=True)
class DemoConfig:
    n_m_max: int = 1
    eta: float = 0.0
    num_trajectories: int = 10
    seed: int = config.DEFAULT_SEED
    max_steps: int = config.MAZE_DEFAULTS['max_steps']
    size: int = config.MAZE_DEFAULTS['size']

    def validate(self):
        if not 0.0 <= self.eta < 1.0:
            raise DemoConfigError(f"eta must lie in [0, 1), got {self.eta}")
        if self.n_m_max < 1:
            raise DemoConfigError(f"n_m_max must be >= 1, got {self.n_m_max}")
        if self.num_trajectories < 1:
            raise DemoConfigError(f"num_trajectories must be >= 1, got {self.num_trajectories}")
        if self.max_steps <= 0:
            raise DemoConfigError(f"max_steps must be > 0, got {self.max_steps}")
        if self.size < 2:
            raise DemoConfigError(f"maze size must be >= 2, got {self.size}")


@dataclass
class MazeDemoSet:
    trajectories: List[List[Tuple[MazeState, MazeAction]]]
    config: DemoConfig

    def num_steps(self) -> int:
        return sum(len(traj) for traj in self.trajectories)


@dataclass
class StudentPolicy:
    """Frequency-count student over (row, col, nuisance) observations.

    counts has shape (size, size, n_m_max, 4); nuisance n is stored at index n - 1.
    """
    counts: np.ndarray
    uniform_fallback: bool = True

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def n_m_max(self) -> int:
        return self.counts.shape[2]

    def probabilities(self, state: MazeState, smoothing: float = 0.0) -> np.ndarray:
        row_counts = self.counts[state.row, state.col, state.nuisance - 1] + smoothing
        total = row_counts.sum()
        if total <= 0:
            return np.full(N_ACTIONS, 1.0 / N_ACTIONS)
        return row_counts / total

    def argmax_action(self, row: int, col: int) -> MazeAction:
        # Marginalise over the nuisance by summing counts; np.argmax keeps the first maximum
        summed = self.counts[row, col].sum(axis=0)
        return MazeAction(int(np.argmax(summed)))


def canonical_expert(size: int = config.MAZE_DEFAULTS['size']) -> ExpertPolicy:
    """Down until the bottom row, then Right; no action at the goal."""
    actions = {}
    for row in range(size):
        for col in range(size):
            if (row, col) == (size - 1, size - 1):
                continue
            actions[(row, col)] = MazeAction.DOWN if row < size - 1 else MazeAction.RIGHT
    return ExpertPolicy(size=size, actions=actions)


def _move(row: int, col: int, action: MazeAction, size: int) -> Tuple[int, int]:
    dr, dc = _MOVES[action]
    new_row, new_col = row + dr, col + dc
    if 0 <= new_row < size and 0 <= new_col < size:
        return new_row, new_col
    # Blocked by the wall: the action is still recorded, the robot stays put
    return row, col


def generate_demos(expert: ExpertPolicy, demo_config: DemoConfig) -> MazeDemoSet:
    """Roll out the noisy expert from uniformly random non-goal start cells."""
    demo_config.validate()
    if demo_config.size != expert.size:
        raise DemoConfigError(f"config size {demo_config.size} != expert size {expert.size}")

    cells = expert.non_goal_cells()
    goal = expert.goal
    streams = np.random.SeedSequence(demo_config.seed).spawn(demo_config.num_trajectories)

    trajectories = []
    for child in streams:
        rng = np.random.default_rng(child)
        row, col = cells[int(rng.integers(len(cells)))]
        nuisances = rng.integers(1, demo_config.n_m_max + 1, size=demo_config.max_steps)
        coins = rng.random(demo_config.max_steps)
        random_actions = rng.integers(N_ACTIONS, size=demo_config.max_steps)

        steps = []
        for k in range(demo_config.max_steps):
            if (row, col) == goal:
                break
            if coins[k] < demo_config.eta:
                action = MazeAction(int(random_actions[k]))
            else:
                action = expert.action(row, col)
            steps.append((MazeState(row, col, int(nuisances[k])), action))
            row, col = _move(row, col, action, expert.size)
        trajectories.append(steps)

    demos = MazeDemoSet(trajectories=trajectories, config=demo_config)
    logger.debug(f"Generated {len(trajectories)} trajectories, {demos.num_steps()} steps "
                 f"(eta={demo_config.eta}, N_m={demo_config.n_m_max}, seed={demo_config.seed})")
    return demos


def fit_student(demos: MazeDemoSet) -> StudentPolicy:
    """Count each action taken in each observed state."""
    if not demos.trajectories or demos.num_steps() == 0:
        raise DemoConfigError("cannot fit a student on an empty demonstration set")

    cfg = demos.config
    counts = np.zeros((cfg.size, cfg.size, cfg.n_m_max, N_ACTIONS))
    for trajectory in demos.trajectories:
        for state, action in trajectory:
            state.check(cfg.size, cfg.n_m_max)
            counts[state.row, state.col, state.nuisance - 1, int(action)] += 1
    return StudentPolicy(counts=counts)


def generating_distribution(expert: ExpertPolicy, eta: float, state: MazeState) -> np.ndarray:
    """Action distribution the noisy expert samples from in this state."""
    if not 0.0 <= eta <= 1.0:
        raise DemoConfigError(f"eta must lie in [0, 1], got {eta}")
    expert_action = expert.action(state.row, state.col)
    if expert_action is None:
        raise DemoConfigError(f"no expert action at the goal cell ({state.row}, {state.col})")
    other = eta / N_ACTIONS
    probs = np.full(N_ACTIONS, other)
    probs[int(expert_action)] = 1.0 - (N_ACTIONS - 1) * other
    return probs


def _reference_matrix(expert: ExpertPolicy, eta: float, reference: str) -> np.ndarray:
    """Reference distributions for every non-goal cell, shape (cells, 4)."""
    cells = expert.non_goal_cells()
    if reference == 'generating':
        return np.stack([generating_distribution(expert, eta, MazeState(r, c)) for r, c in cells])
    if reference == 'expert':
        return np.stack([generating_distribution(expert, 0.0, MazeState(r, c)) for r, c in cells])
    raise DemoConfigError(f"unknown KL reference '{reference}'")


def kl_to_student(expert: ExpertPolicy, eta: float, student: StudentPolicy,
                  smoothing: float = config.MAZE_DEFAULTS['smoothing'],
                  reference: str = 'generating') -> float:
    """
    Mean KL(reference || smoothed student) in nats over all non-goal (cell, nuisance) states.

    reference='generating' uses the eta-mixed expert; 'expert' uses the point-mass expert.
    """
    if smoothing <= 0:
        raise DemoConfigError(f"smoothing must be > 0, got {smoothing}")
    if student.size != expert.size:
        raise DemoConfigError(f"student size {student.size} != expert size {expert.size}")

    cells = expert.non_goal_cells()
    ref = _reference_matrix(expert, eta, reference)                      # (cells, 4)
    rows = np.array([r for r, _ in cells])
    cols = np.array([c for _, c in cells])
    counts = student.counts[rows, cols] + smoothing                     # (cells, n_m, 4)
    q = counts / counts.sum(axis=-1, keepdims=True)
    per_state = rel_entr(ref[:, None, :], q).sum(axis=-1)
    return float(per_state.mean())


def argmax_match_fraction(expert: ExpertPolicy, student: StudentPolicy) -> float:
    """Fraction of non-goal cells where the student's most frequent action is the expert's."""
    cells = expert.non_goal_cells()
    matches = sum(student.argmax_action(r, c) == expert.action(r, c) for r, c in cells)
    return matches / len(cells)


def observation_entropy(n_m_max: int, size: int = config.MAZE_DEFAULTS['size']) -> float:
    """Entropy (nats) of a uniform observation over non-goal cells and nuisance values."""
    if n_m_max < 1:
        raise DemoConfigError(f"n_m_max must be >= 1, got {n_m_max}")
    return float(np.log((size * size - 1) * n_m_max))


def action_entropy_given_obs(eta: float) -> float:
    """Entropy (nats) of the generating distribution, the same in every state."""
    if not 0.0 <= eta <= 1.0:
        raise DemoConfigError(f"eta must lie in [0, 1], got {eta}")
    expert_p = 1.0 - 3.0 * eta / 4.0
    other_p = eta / 4.0
    # H = ln 4 - KL(p || uniform); exact at both ends of the range
    kl_to_uniform = xlogy(expert_p, 4.0 * expert_p) + 3.0 * xlogy(other_p, 4.0 * other_p)
    return float(np.log(4.0) - kl_to_uniform)


@dataclass(frozen=True)
class SweepCell:
    index: int
    n_m_max: int
    eta: float
    demo_count: int
    seed_index: int
    base_seed: int
    size: int = config.MAZE_DEFAULTS['size']
    max_steps: int = config.MAZE_DEFAULTS['max_steps']
    smoothing: float = config.MAZE_DEFAULTS['smoothing']
    kl_reference: str = config.MAZE_DEFAULTS['kl_reference']


def derive_seed(base_seed: int, seed_index: int) -> int:
    """64-bit demonstration seed for one repetition of the sweep."""
    state = np.random.SeedSequence([base_seed, seed_index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def run_sweep_cell(cell: SweepCell) -> Dict:
    """Generate, fit and score one (n_m_max, eta, demo_count, seed) cell."""
    expert = canonical_expert(cell.size)
    demo_config = DemoConfig(
        n_m_max=cell.n_m_max,
        eta=cell.eta,
        num_trajectories=cell.demo_count,
        seed=derive_seed(cell.base_seed, cell.seed_index),
        max_steps=cell.max_steps,
        size=cell.size,
    )
    demos = generate_demos(expert, demo_config)
    student = fit_student(demos)
    return {
        'n_m_max': cell.n_m_max,
        'eta': cell.eta,
        'demo_count': cell.demo_count,
        'seed': cell.seed_index,
        'kl_nats': kl_to_student(expert, cell.eta, student, cell.smoothing, cell.kl_reference),
        'match_fraction': argmax_match_fraction(expert, student),
    }


@dataclass
class SweepResult:
    raw: pd.DataFrame
    aggregate: pd.DataFrame
    failures: List[Dict] = field(default_factory=list)


RAW_COLUMNS = ['n_m_max', 'eta', 'demo_count', 'seed', 'kl_nats', 'match_fraction']
AGG_COLUMNS = ['n_m_max', 'eta', 'demo_count', 'kl_mean', 'kl_std', 'match_mean', 'match_std']


def build_cells(n_m_values: Sequence[int], eta_values: Sequence[float], demo_counts: Sequence[int],
                seeds: int, base_seed: int, **cell_options) -> List[SweepCell]:
    cells = []
    for n_m in n_m_values:
        for eta in eta_values:
            for demo_count in demo_counts:
                for seed_index in range(seeds):
                    cells.append(SweepCell(
                        index=len(cells), n_m_max=int(n_m), eta=float(eta),
                        demo_count=int(demo_count), seed_index=seed_index,
                        base_seed=base_seed, **cell_options,
                    ))
    return cells


def aggregate_sweep(raw: pd.DataFrame) -> pd.DataFrame:
    if raw.empty:
        return pd.DataFrame(columns=AGG_COLUMNS)
    grouped = raw.groupby(['n_m_max', 'eta', 'demo_count'], sort=True)
    agg = grouped.agg(
        kl_mean=('kl_nats', 'mean'),
        kl_std=('kl_nats', 'std'),
        match_mean=('match_fraction', 'mean'),
        match_std=('match_fraction', 'std'),
    ).reset_index()
    return agg[AGG_COLUMNS]


def run_entropy_sweep(n_m_values: Sequence[int], eta_values: Sequence[float],
                      demo_counts: Sequence[int], seeds: int = 5,
                      base_seed: int = config.DEFAULT_SEED, jobs: int = 1,
                      **cell_options) -> SweepResult:
    """
    Run every (n_m_max, eta, demo_count) cell for `seeds` repetitions.

    Cells that fail validation are logged and listed in SweepResult.failures;
    the remaining cells still run.
    """
    cells = build_cells(n_m_values, eta_values, demo_counts, seeds, base_seed, **cell_options)
    logger.info(f"Maze sweep: {len(cells)} cells (N_m={list(n_m_values)}, eta={list(eta_values)}, "
                f"demos={list(demo_counts)}, seeds={seeds})")

    rows, failures = [], []
    for cell, result, error in run_cells(run_sweep_cell, cells, jobs=jobs):
        if error is not None:
            logger.error(f"Cell {cell.index} (N_m={cell.n_m_max}, eta={cell.eta}, "
                         f"demos={cell.demo_count}, seed={cell.seed_index}) failed: {error}")
            failures.append({'cell': cell.index, 'n_m_max': cell.n_m_max, 'eta': cell.eta,
                             'demo_count': cell.demo_count, 'seed': cell.seed_index,
                             'error': str(error)})
            continue
        rows.append(result)

    raw = pd.DataFrame(rows, columns=RAW_COLUMNS)
    return SweepResult(raw=raw, aggregate=aggregate_sweep(raw), failures=failures)
