from fractions import Fraction

import numpy as np
import pytest

from membudget.core import Transition, make_rng
from membudget.datasets import DatasetSpec, generate_list
from membudget.memory_ledger import BudgetError, make_split
from membudget.world_model import fit
from stats_oracles import brute_force_mle


def test_single_observation():
    m = fit([Transition(0, 0, -0.01, 1)])
    assert m.prob(0, 0, 1) == 1
    assert m.reward(0, 0, 1) == pytest.approx(-0.01)
    assert m.stored_transitions == 1


def test_two_successors_split_evenly():
    m = fit([Transition(3, 1, 0.0, 4), Transition(3, 1, 1.0, 5)])
    assert m.prob(3, 1, 4) == Fraction(1, 2) and m.prob(3, 1, 5) == Fraction(1, 2)
    assert m.prob(3, 2, 4) == 0


def test_empty_model():
    m = fit([])
    assert m.counts == {} and m.known_actions(0) == frozenset()
    assert m.sample_next(0, 0, make_rng(0)) is None


def test_rewards_averaged_per_triple():
    m = fit([Transition(0, 0, 1.0, 1), Transition(0, 0, 3.0, 1), Transition(0, 0, 7.0, 2)])
    assert m.reward(0, 0, 1) == pytest.approx(2.0)
    assert m.reward(0, 0, 2) == pytest.approx(7.0)


def test_budget_violation():
    data = [Transition(0, 0, 0.0, 1)] * 3
    with pytest.raises(BudgetError):
        fit(data, make_split(10, 8))
    assert fit(data, make_split(10, 7)).stored_transitions == 3


def test_mle_matches_brute_force_on_random_data():
    rng = make_rng(5)
    for _ in range(200):
        n = int(rng.integers(0, 51))
        data = [Transition(int(rng.integers(10)), int(rng.integers(4)), float(rng.normal()),
                           int(rng.integers(10))) for _ in range(n)]
        m = fit(data)
        expected = brute_force_mle(data)
        got = {(s, a, n2): m.prob(s, a, n2) for (s, a), succ in m.counts.items() for n2 in succ}
        assert got == expected
        for (s, a), succ in m.counts.items():
            assert sum(m.prob(s, a, n2) for n2 in succ) == 1


def test_sampling_deterministic_pair():
    m = fit([Transition(0, 2, -0.01, 1)])
    rng = make_rng(0)
    assert all(m.sample_next(0, 2, rng).next_state == 1 for _ in range(100))
    assert m.sample_next(0, 1, rng) is None


def test_sampling_frequencies_converge():
    m = fit([Transition(0, 0, 0.0, 1), Transition(0, 0, 0.0, 2)])
    rng = make_rng(1)
    draws = np.array([m.sample_next(0, 0, rng).next_state for _ in range(10_000)])
    assert abs(np.mean(draws == 1) - 0.5) < 0.02


def test_sampling_matches_unequal_probabilities():
    data = [Transition(0, 0, 0.0, 1)] * 1 + [Transition(0, 0, 0.0, 2)] * 3
    m = fit(data)
    rng = make_rng(2)
    draws = np.array([m.sample_next(0, 0, rng).next_state for _ in range(20_000)])
    assert abs(np.mean(draws == 2) - 0.75) < 0.015


def test_known_actions(env):
    o0 = generate_list(DatasetSpec("O0"), env)
    m = fit(o0)
    for t in o0:
        assert m.known_actions(t.state) == {t.action}
    assert m.known_actions(31) == frozenset()
    oa = generate_list(DatasetSpec("Oa"), env)
    m = fit(oa)
    for s in range(env.n_states):
        assert m.known_actions(s) == {t.action for t in oa if t.state == s}
    assert len(m.known_actions(0)) == 2


def test_terminal_flags(env):
    m = fit(generate_list(DatasetSpec("O3"), env))
    last = generate_list(DatasetSpec("O3"), env)[-1]
    assert m.terminal_flags[(last.state, last.action, last.next_state)]
    assert m.sample_next(last.state, last.action, make_rng(0)).terminal


def test_csv_dump(tmp_path):
    m = fit([Transition(0, 0, 1.0, 1), Transition(0, 0, 3.0, 1), Transition(1, 2, 0.5, 2, True)])
    path = tmp_path / "m.csv"
    m.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "state,action,next_state,count,mean_reward,terminal"
    assert lines[1:] == ["0,0,1,2,2.0,0", "1,2,2,1,0.5,1"]
