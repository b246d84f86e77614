"""Tests for the MazeNav entropy experiments."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entropy_maze import (
    DemoConfig,
    DemoConfigError,
    MazeAction,
    MazeDemoSet,
    MazeState,
    StudentPolicy,
    action_entropy_given_obs,
    argmax_match_fraction,
    canonical_expert,
    fit_student,
    generate_demos,
    generating_distribution,
    kl_to_student,
    observation_entropy,
    run_entropy_sweep,
)

EXPERT = canonical_expert()


def expert_student(n_m_max=1, count=1.0):
    counts = np.zeros((5, 5, n_m_max, 4))
    for (row, col), action in EXPERT.actions.items():
        counts[row, col, :, int(action)] = count
    return StudentPolicy(counts=counts)


def test_canonical_expert_actions():
    assert EXPERT.action(0, 0) == MazeAction.DOWN
    assert EXPERT.action(4, 0) == MazeAction.RIGHT
    assert EXPERT.action(4, 4) is None
    assert len(EXPERT.actions) == 24


def test_canonical_expert_reaches_goal_from_every_cell():
    moves = {MazeAction.DOWN: (1, 0), MazeAction.RIGHT: (0, 1)}
    for row, col in EXPERT.non_goal_cells():
        for _ in range(10):
            action = EXPERT.action(row, col)
            if action is None:
                break
            dr, dc = moves[action]
            row, col = row + dr, col + dc
            assert 0 <= row < 5 and 0 <= col < 5
        assert (row, col) == (4, 4)


def test_noiseless_demos_follow_the_expert():
    demos = generate_demos(EXPERT, DemoConfig(n_m_max=3, eta=0.0, num_trajectories=30, seed=7))
    for trajectory in demos.trajectories:
        assert trajectory
        for state, action in trajectory:
            assert action == EXPERT.action(state.row, state.col)
            assert 1 <= state.nuisance <= 3


def test_trajectories_end_at_goal_or_cap():
    demos = generate_demos(EXPERT, DemoConfig(eta=0.9, num_trajectories=20, seed=3, max_steps=15))
    for trajectory in demos.trajectories:
        assert len(trajectory) <= 15
        for state, _ in trajectory:
            assert 0 <= state.row < 5 and 0 <= state.col < 5


@pytest.mark.parametrize("eta", [1.0, -0.1, 1.5])
def test_eta_outside_domain_rejected(eta):
    with pytest.raises(DemoConfigError):
        generate_demos(EXPERT, DemoConfig(eta=eta))


def test_demos_reproducible_and_nested():
    small = generate_demos(EXPERT, DemoConfig(eta=0.3, num_trajectories=10, seed=11))
    again = generate_demos(EXPERT, DemoConfig(eta=0.3, num_trajectories=10, seed=11))
    large = generate_demos(EXPERT, DemoConfig(eta=0.3, num_trajectories=20, seed=11))
    assert small.trajectories == again.trajectories
    assert large.trajectories[:10] == small.trajectories


def test_noisy_action_frequencies_match_generating_distribution():
    eta = 0.9
    demos = generate_demos(EXPERT, DemoConfig(n_m_max=10, eta=eta, num_trajectories=1000, seed=5))
    student = fit_student(demos)
    per_cell = student.counts.sum(axis=2)

    expert_hits = sum(per_cell[r, c, int(a)] for (r, c), a in EXPERT.actions.items())
    pooled = expert_hits / per_cell.sum()
    assert pooled == pytest.approx(eta / 4 + (1 - eta), abs=0.02)

    for (row, col), action in EXPERT.actions.items():
        total = per_cell[row, col].sum()
        expected = generating_distribution(EXPERT, eta, MazeState(row, col))
        observed = per_cell[row, col] / total
        sigma = np.sqrt(expected * (1 - expected) / total)
        assert np.all(np.abs(observed - expected) < 5 * sigma + 1e-12)


def test_fit_student_single_count():
    demos = MazeDemoSet(trajectories=[[(MazeState(0, 0, 1), MazeAction.DOWN)]], config=DemoConfig())
    student = fit_student(demos)
    assert student.probabilities(MazeState(0, 0, 1))[MazeAction.DOWN] == 1.0
    np.testing.assert_array_equal(student.probabilities(MazeState(2, 2, 1)), [0.25] * 4)


def test_fit_student_frequency_ratio():
    steps = [(MazeState(1, 1, 1), MazeAction.DOWN)] * 3 + [(MazeState(1, 1, 1), MazeAction.UP)]
    student = fit_student(MazeDemoSet(trajectories=[steps], config=DemoConfig()))
    np.testing.assert_allclose(student.probabilities(MazeState(1, 1, 1)), [0.25, 0.75, 0, 0])


def test_fit_student_rejects_empty_and_out_of_range():
    with pytest.raises(DemoConfigError):
        fit_student(MazeDemoSet(trajectories=[], config=DemoConfig()))
    bad = [(MazeState(0, 0, 4), MazeAction.DOWN)]
    with pytest.raises(DemoConfigError):
        fit_student(MazeDemoSet(trajectories=[bad], config=DemoConfig(n_m_max=2)))


def test_noiseless_student_is_certain_where_visited():
    student = fit_student(generate_demos(EXPERT, DemoConfig(eta=0.0, num_trajectories=15, seed=2)))
    visited = np.argwhere(student.counts.sum(axis=-1) > 0)
    for row, col, nuisance in visited:
        probs = student.probabilities(MazeState(int(row), int(col), int(nuisance) + 1))
        assert probs[EXPERT.action(row, col)] == 1.0


def test_generating_distribution_values():
    state = MazeState(0, 0, 1)
    np.testing.assert_allclose(generating_distribution(EXPERT, 0.3, state), [0.075, 0.775, 0.075, 0.075])
    np.testing.assert_array_equal(generating_distribution(EXPERT, 0.0, state), [0, 1, 0, 0])
    np.testing.assert_allclose(generating_distribution(EXPERT, 1.0, state), [0.25] * 4)


@given(st.floats(min_value=0.0, max_value=0.999), st.sampled_from(EXPERT.non_goal_cells()))
def test_generating_distribution_is_a_distribution(eta, cell):
    probs = generating_distribution(EXPERT, eta, MazeState(*cell))
    assert np.all(probs >= 0)
    assert probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_generating_distribution_has_no_goal_action():
    with pytest.raises(DemoConfigError):
        generating_distribution(EXPERT, 0.1, MazeState(4, 4))


def test_kl_point_mass_against_uniform_student():
    blank = StudentPolicy(counts=np.zeros((5, 5, 1, 4)))
    assert kl_to_student(EXPERT, 0.0, blank) == pytest.approx(np.log(4), abs=1e-12)


def test_kl_vanishes_for_a_matching_student():
    assert kl_to_student(EXPERT, 0.0, expert_student(count=1e6)) < 1e-6


def test_kl_requires_positive_smoothing():
    with pytest.raises(DemoConfigError):
        kl_to_student(EXPERT, 0.0, expert_student(), smoothing=0.0)


@given(st.floats(min_value=0.0, max_value=0.95), st.integers(min_value=0, max_value=2 ** 32))
def test_kl_is_finite_and_non_negative(eta, seed):
    student = fit_student(generate_demos(EXPERT, DemoConfig(n_m_max=2, eta=eta,
                                                            num_trajectories=3, seed=seed)))
    for reference in ('generating', 'expert'):
        value = kl_to_student(EXPERT, eta, student, reference=reference)
        assert np.isfinite(value) and value >= 0


def test_argmax_match_fraction():
    assert argmax_match_fraction(EXPERT, expert_student(n_m_max=3)) == 1.0
    # An untrained student breaks every tie towards Up, which the expert never plays
    assert argmax_match_fraction(EXPERT, StudentPolicy(counts=np.zeros((5, 5, 1, 4)))) == 0.0


def test_observation_entropy():
    assert observation_entropy(1) == pytest.approx(np.log(24))
    assert observation_entropy(10) == pytest.approx(np.log(240))
    for k in (1, 5, 10):
        assert observation_entropy(2 * k) - observation_entropy(k) == pytest.approx(np.log(2), abs=1e-12)
    with pytest.raises(DemoConfigError):
        observation_entropy(0)


def test_action_entropy_endpoints_and_midpoint():
    assert action_entropy_given_obs(0.0) == 0.0
    assert action_entropy_given_obs(1.0) == np.log(4)
    assert action_entropy_given_obs(0.3) == pytest.approx(0.780, abs=1e-3)


@given(st.floats(min_value=0.0, max_value=0.99), st.floats(min_value=0.0, max_value=0.99))
def test_action_entropy_increases_with_eta(a, b):
    lo, hi = sorted((a, b))
    if hi - lo > 1e-3:
        assert action_entropy_given_obs(lo) < action_entropy_given_obs(hi)
    assert action_entropy_given_obs(hi) < action_entropy_given_obs(1.0)


def test_more_nuisance_values_hurt_the_estimate():
    agg = run_entropy_sweep([1, 3], [0.0], [10], seeds=5).aggregate.set_index('n_m_max')
    assert agg.loc[3, 'kl_mean'] > agg.loc[1, 'kl_mean']


def test_more_demonstrations_help():
    agg = run_entropy_sweep([1], [0.0], [10, 500], seeds=5).aggregate.set_index('demo_count')
    assert agg.loc[500, 'kl_mean'] < agg.loc[10, 'kl_mean']


def test_observation_entropy_sweep_trends():
    agg = run_entropy_sweep([1, 3, 5], [0.0], [10, 20, 30, 40, 50], seeds=5).aggregate
    for _, group in agg.groupby('n_m_max'):
        assert np.all(np.diff(group.sort_values('demo_count')['kl_mean'].to_numpy()) < 0)
    wide = agg.pivot(index='demo_count', columns='n_m_max', values='kl_mean')
    assert np.all(wide[5] > wide[1])


def test_action_ambiguity_sweep_trends():
    agg = run_entropy_sweep([1], [0.0, 0.3, 0.6], [10, 20, 30, 40, 50], seeds=5).aggregate
    wide = agg.pivot(index='demo_count', columns='eta', values='kl_mean')
    assert np.all(wide[0.3] >= wide[0.0])
    assert np.all(wide[0.6] >= wide[0.3])
    assert wide.loc[50, 0.6] - wide.loc[50, 0.0] > 0


def test_many_demonstrations_recover_the_expert_under_heavy_noise():
    raw = run_entropy_sweep([10], [0.9], [50, 1000], seeds=5).raw
    at_1000 = raw[raw['demo_count'] == 1000]['match_fraction']
    at_50 = raw[raw['demo_count'] == 50]['match_fraction']
    assert (at_1000 == 1.0).sum() >= 4
    assert (at_50 < 1.0).sum() >= 4


def test_sweep_is_deterministic():
    first = run_entropy_sweep([1, 2], [0.0, 0.3], [5, 10], seeds=2, base_seed=99)
    second = run_entropy_sweep([1, 2], [0.0, 0.3], [5, 10], seeds=2, base_seed=99)
    assert first.raw.equals(second.raw)
    assert first.aggregate.equals(second.aggregate)


def test_sweep_continues_past_failing_cells():
    result = run_entropy_sweep([1], [0.0, 1.0], [5], seeds=2)
    assert len(result.failures) == 2
    assert len(result.raw) == 2
    assert set(result.raw['eta']) == {0.0}
    assert list(result.raw.columns) == ['n_m_max', 'eta', 'demo_count', 'seed', 'kl_nats', 'match_fraction']
    assert list(result.aggregate.columns)[-4:] == ['kl_mean', 'kl_std', 'match_mean', 'match_std']
