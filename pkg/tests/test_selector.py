import numpy as np
import pytest

from longremix import selector
from longremix.errors import StateError
from longremix.selector import (CleanSetMetrics, CoreSet, LossHistory, baseline_split,
                                clean_set_metrics, guided_split, hct_split, select_core_set)


def uniform_guessed(n, c=3):
    return np.full((n, c), 1.0 / c)


def make_history(posterior_rows, zeta):
    h = LossHistory(n_samples=len(posterior_rows[0]), zeta=zeta)
    for row in posterior_rows:
        h.push(np.asarray(row, dtype=float))
    return h


def same_membership(a, b):
    return (np.array_equal(a.labeled_idx, b.labeled_idx)
            and np.array_equal(a.unlabeled_idx, b.unlabeled_idx)
            and np.allclose(a.labeled_w, b.labeled_w)
            and np.array_equal(a.labeled_labels, b.labeled_labels)
            and np.allclose(a.guessed, b.guessed))


class TestBaselineSplit:
    def test_thresholding(self):
        s = baseline_split(np.array([0.9, 0.4, 0.6]), 0.5, uniform_guessed(3), np.array([0, 1, 2]))
        np.testing.assert_array_equal(s.labeled_idx, [0, 2])
        np.testing.assert_array_equal(s.unlabeled_idx, [1])
        np.testing.assert_allclose(s.labeled_w, [0.9, 0.6])
        np.testing.assert_array_equal(s.labeled_labels, [0, 2])

    def test_tau_zero_takes_everything(self):
        s = baseline_split(np.array([0.0, 0.3]), 0.0, uniform_guessed(2), np.array([1, 0]))
        assert s.x_size == 2
        assert s.u_size == 0

    def test_boundary_posterior_goes_to_x(self):
        s = baseline_split(np.array([0.5]), 0.5, uniform_guessed(1), np.array([0]))
        assert s.x_size == 1

    def test_guessed_labels_attached_to_u(self):
        guessed = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])
        s = baseline_split(np.array([0.9, 0.1, 0.2]), 0.5, guessed, np.array([0, 1, 0]))
        np.testing.assert_allclose(s.guessed, guessed[[1, 2]])


class TestHctSplit:
    def test_clean_all_window_epochs(self):
        rows = [[0.9, 0.9], [0.8, 0.9], [0.9, 0.9], [0.7, 0.9], [0.6, 0.9]]
        h = make_history(rows, zeta=5)
        s = hct_split(h, 0.5, uniform_guessed(2), np.array([0, 1]))
        np.testing.assert_array_equal(s.labeled_idx, [0, 1])

    def test_one_bad_epoch_excludes(self):
        rows = [[0.9], [0.9], [0.4], [0.9], [0.9]]
        h = make_history(rows, zeta=5)
        s = hct_split(h, 0.5, uniform_guessed(1), np.array([0]))
        assert s.x_size == 0
        assert s.u_size == 1

    def test_weights_are_current_posterior(self):
        rows = [[0.9, 0.2], [0.55, 0.8]]
        h = make_history(rows, zeta=2)
        s = hct_split(h, 0.5, uniform_guessed(2), np.array([0, 1]))
        np.testing.assert_allclose(s.labeled_w, [0.55])
        np.testing.assert_allclose(s.unlabeled_w, [0.8])

    def test_zeta_one_equals_baseline(self):
        rng = np.random.default_rng(1)
        post = rng.random(30)
        labels = rng.integers(0, 3, 30)
        guessed = uniform_guessed(30)
        h = LossHistory(30, zeta=1)
        h.push(post)
        assert same_membership(hct_split(h, 0.5, guessed, labels),
                               baseline_split(post, 0.5, guessed, labels))

    def test_underfilled_window_is_state_error(self):
        h = make_history([[0.9], [0.9]], zeta=5)
        with pytest.raises(StateError, match="window"):
            hct_split(h, 0.5, uniform_guessed(1), np.array([0]))

    def test_ring_buffer_depth(self):
        h = make_history([[float(i) / 10] for i in range(9)], zeta=3)
        assert len(h) == 3
        np.testing.assert_allclose(h.window().ravel(), [0.6, 0.7, 0.8])


class TestCoreSet:
    def _snapshot(self, size, n=200):
        idx = np.arange(size)
        return selector.SplitSets(labeled_idx=idx, labeled_w=np.ones(size),
                                  labeled_labels=np.zeros(size, dtype=int),
                                  unlabeled_idx=np.arange(size, n),
                                  unlabeled_w=np.zeros(n - size),
                                  guessed=uniform_guessed(n - size), kind="hct")

    def test_argmax_with_latest_tie(self):
        sizes = {5: 100, 6: 150, 7: 140, 8: 150, 9: 130, 10: 120}
        records = [(e, self._snapshot(s)) for e, s in sizes.items()]
        core = select_core_set(records, total_epochs=10)
        assert core.epoch == 8
        assert core.size == 150

    def test_first_half_ignored(self):
        records = [(1, self._snapshot(199)), (5, self._snapshot(10)), (10, self._snapshot(20))]
        core = select_core_set(records, total_epochs=10)
        assert core.size == 20

    def test_single_record(self):
        records = [(7, self._snapshot(42))]
        assert select_core_set(records, 10).size == 42

    def test_all_empty_warns(self):
        records = [(e, self._snapshot(0)) for e in range(5, 11)]
        with pytest.warns(UserWarning, match="empty"):
            core = select_core_set(records, 10)
        assert core.size == 0

    def test_no_records_is_state_error(self):
        with pytest.raises(StateError):
            select_core_set([(1, self._snapshot(5))], total_epochs=10)

    def test_labels_frozen_at_capture(self):
        snap = self._snapshot(3)
        snap.labeled_labels = np.array([2, 0, 1])
        core = select_core_set([(9, snap)], 10)
        np.testing.assert_array_equal(core.labels, [2, 0, 1])


class TestGuidedSplit:
    def test_core_overrides_low_posterior(self):
        core = CoreSet(indices=np.array([1]), labels=np.array([2]), epoch=9)
        s = guided_split(np.array([0.9, 0.1, 0.2]), 0.5, uniform_guessed(3),
                         core, np.array([0, 1, 0]))
        assert 1 in s.labeled_idx
        pos = list(s.labeled_idx).index(1)
        assert s.labeled_w[pos] == 1.0
        assert s.labeled_labels[pos] == 2  # captured label, not the current one
        assert 1 not in s.unlabeled_idx

    def test_non_member_threshold_branch(self):
        core = CoreSet.empty()
        s = guided_split(np.array([0.7, 0.3]), 0.5, uniform_guessed(2), core, np.array([0, 1]))
        np.testing.assert_array_equal(s.labeled_idx, [0])
        np.testing.assert_allclose(s.labeled_w, [0.7])

    def test_empty_core_equals_baseline(self):
        rng = np.random.default_rng(2)
        post = rng.random(40)
        labels = rng.integers(0, 4, 40)
        guessed = uniform_guessed(40, 4)
        assert same_membership(guided_split(post, 0.5, guessed, CoreSet.empty(), labels),
                               baseline_split(post, 0.5, guessed, labels))


class TestCleanSetMetrics:
    def _split(self, x_idx, u_idx, n):
        x_idx = np.asarray(x_idx, dtype=int)
        u_idx = np.asarray(u_idx, dtype=int)
        return selector.SplitSets(labeled_idx=x_idx, labeled_w=np.ones(len(x_idx)),
                                  labeled_labels=np.zeros(len(x_idx), dtype=int),
                                  unlabeled_idx=u_idx, unlabeled_w=np.zeros(len(u_idx)),
                                  guessed=uniform_guessed(len(u_idx)), kind="baseline")

    def test_perfect_split(self):
        mask = np.array([False, False, True, True])
        m = clean_set_metrics(self._split([0, 1], [2, 3], 4), mask)
        assert m == CleanSetMetrics(1.0, 1.0)

    def test_counting_example(self):
        # X = 3 clean + 1 noisy, U = 1 clean + 2 noisy -> precision 0.75, recall 0.75
        mask = np.array([False, False, False, True, False, True, True])
        m = clean_set_metrics(self._split([0, 1, 2, 3], [4, 5, 6], 7), mask)
        assert m.precision == pytest.approx(0.75)
        assert m.recall == pytest.approx(0.75)

    def test_empty_x_convention(self):
        mask = np.array([False, True])
        m = clean_set_metrics(self._split([], [0, 1], 2), mask)
        assert m.precision == 1.0
        assert m.precision_defaulted
        assert m.recall == 0.0
        assert not m.recall_defaulted


class TestRandomizedProperties:
    """Spec invariants over seeded random histories."""

    N_DRAWS = 300  # acceptance suite reruns these with >= 1000 draws

    def _draw(self, rng):
        n = int(rng.integers(3, 40))
        zeta = int(rng.integers(1, 6))
        depth = zeta + int(rng.integers(0, 3))
        rows = rng.random((depth, n))
        tau = float(rng.uniform(0.05, 0.95))
        labels = rng.integers(0, 4, n)
        guessed = rng.random((n, 4))
        guessed /= guessed.sum(axis=1, keepdims=True)
        h = LossHistory(n, zeta)
        for row in rows:
            h.push(row)
        return h, tau, guessed, labels, n

    def test_partition_property(self):
        rng = np.random.default_rng(77)
        for _ in range(self.N_DRAWS):
            h, tau, guessed, labels, n = self._draw(rng)
            for s in (baseline_split(h.current(), tau, guessed, labels),
                      hct_split(h, tau, guessed, labels)):
                joined = np.concatenate([s.labeled_idx, s.unlabeled_idx])
                np.testing.assert_array_equal(np.sort(joined), np.arange(n))

    def test_window_subset_property(self):
        rng = np.random.default_rng(78)
        for _ in range(self.N_DRAWS):
            h, tau, guessed, labels, _ = self._draw(rng)
            hct = hct_split(h, tau, guessed, labels)
            base = baseline_split(h.current(), tau, guessed, labels)
            assert set(hct.labeled_idx) <= set(base.labeled_idx)

    def test_zeta_monotonicity(self):
        rng = np.random.default_rng(79)
        for _ in range(self.N_DRAWS):
            h, tau, guessed, labels, _ = self._draw(rng)
            if h.zeta < 2 or len(h) < h.zeta:
                continue
            wide = hct_split(h, tau, guessed, labels, zeta=h.zeta)
            narrow = hct_split(h, tau, guessed, labels, zeta=h.zeta - 1)
            assert set(wide.labeled_idx) <= set(narrow.labeled_idx)

    def test_core_override_property(self):
        rng = np.random.default_rng(80)
        for _ in range(self.N_DRAWS):
            h, tau, guessed, labels, n = self._draw(rng)
            k = int(rng.integers(1, n + 1))
            members = rng.choice(n, size=k, replace=False)
            core = CoreSet(indices=members, labels=rng.integers(0, 4, k), epoch=1)
            s = guided_split(h.current(), tau, guessed, core, labels)
            member_set = set(members.tolist())
            assert member_set <= set(s.labeled_idx.tolist())
            assert not member_set & set(s.unlabeled_idx.tolist())
            pos = np.isin(s.labeled_idx, members)
            assert (s.labeled_w[pos] == 1.0).all()
