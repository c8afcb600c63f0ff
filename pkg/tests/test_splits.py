import numpy as np
import pytest

from wearalign_core.data.cleaning import NULL_LABEL
from wearalign_core.data.splits import make_louo_split, normalize_split, split_channel_stats
from wearalign_core.data.windows import LabeledWindow, WindowSet
from wearalign_core.utils.errors import SingleUserDataset, UnknownUser


def _windows(counts, rng=None):
    rng = rng or np.random.default_rng(0)
    out = []
    for user, n in counts.items():
        for i in range(n):
            out.append(LabeledWindow(records=[rng.normal(size=(4, 2))], label=i % 3,
                                     user_id=user, window_id=f"{user}/0/{i}"))
    return out


def test_train_excludes_new_user():
    split = make_louo_split(_windows({"a": 5, "b": 6, "c": 7}), "c", seed=0)
    assert set(split.train_set.user_ids.tolist()) == {"a", "b"}
    assert len(split.train_set) == 11
    assert set(split.adapt_set.user_ids.tolist()) == {"c"} == set(split.test_set.user_ids.tolist())


def test_odd_count_halves():
    split = make_louo_split(_windows({"a": 4, "b": 11}), "b", seed=5)
    assert {len(split.adapt_set), len(split.test_set)} == {5, 6}
    assert len(split.adapt_set) + len(split.test_set) == 11


def test_adapt_and_test_partition_the_new_user():
    split = make_louo_split(_windows({"a": 4, "b": 10}), "b", seed=1)
    adapt, test = set(split.adapt_set.window_ids.tolist()), set(split.test_set.window_ids.tolist())
    assert not adapt & test
    assert adapt | test == {f"b/0/{i}" for i in range(10)}


def test_adapt_labels_are_stripped_test_labels_kept():
    split = make_louo_split(_windows({"a": 4, "b": 10}), "b", seed=1)
    assert (split.adapt_set.labels == NULL_LABEL).all()
    assert split.test_set.is_labeled and split.train_set.is_labeled


def test_same_seed_same_membership_and_fingerprint():
    ws = WindowSet.from_windows(_windows({"a": 6, "b": 9, "c": 3}))
    s1, s2 = make_louo_split(ws, "b", 7), make_louo_split(ws, "b", 7)
    assert s1.adapt_set.window_ids.tolist() == s2.adapt_set.window_ids.tolist()
    assert s1.fingerprint() == s2.fingerprint()
    assert make_louo_split(ws, "b", 8).fingerprint() != s1.fingerprint()


def test_unknown_user_and_single_user():
    with pytest.raises(UnknownUser):
        make_louo_split(_windows({"a": 3, "b": 3}), "z", 0)
    with pytest.raises(SingleUserDataset):
        make_louo_split(_windows({"a": 3}), "a", 0)


def test_fold_stats_come_from_train_and_adapt_only():
    ws = WindowSet.from_windows(_windows({"a": 6, "b": 8}))
    split = make_louo_split(ws, "b", 0)
    stats = split_channel_stats(split)
    seen = np.concatenate([split.train_set.frames(), split.adapt_set.frames()]).reshape(-1, 2)
    np.testing.assert_array_equal(stats.minimum, seen.min(axis=0))
    np.testing.assert_array_equal(stats.maximum, seen.max(axis=0))

    norm = normalize_split(split, stats)
    for part in (norm.train_set, norm.adapt_set, norm.test_set):
        assert part.frames().min() >= -1.0 and part.frames().max() <= 1.0
    assert norm.fingerprint() == split.fingerprint()
