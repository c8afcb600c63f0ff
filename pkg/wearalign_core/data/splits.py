# wearalign_core/data/splits.py
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from wearalign_core.data.cleaning import ChannelStats
from wearalign_core.data.windows import LabeledWindow, WindowSet, normalize_windows, window_channel_stats
from wearalign_core.utils.errors import SingleUserDataset, UnknownUser


@dataclass(frozen=True)
class SplitSpec:
    new_user: str
    train_set: WindowSet  # labeled windows of all other users
    adapt_set: WindowSet  # new user, labels stripped
    test_set: WindowSet   # new user, labels kept
    seed: int

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.new_user}|{self.seed}".encode())
        for part in (self.train_set, self.adapt_set, self.test_set):
            h.update(b"|")
            h.update("\n".join(sorted(part.window_ids.tolist())).encode())
        return h.hexdigest()


def make_louo_split(windows: Sequence[LabeledWindow] | WindowSet, new_user: str, seed: int) -> SplitSpec:
    """
    Leave-one-user-out split: the new user's windows are shuffled by `seed`
    and halved into adaptation (unlabeled) and test (labeled) sets.
    """
    ws = windows if isinstance(windows, WindowSet) else WindowSet.from_windows(windows)
    users = ws.users
    if new_user not in users:
        raise UnknownUser(f"user {new_user!r} not in dataset (users: {users})")
    if len(users) < 2:
        raise SingleUserDataset("leave-one-user-out needs at least two users")

    own = np.flatnonzero(ws.user_ids == new_user)
    order = own[np.random.default_rng(seed).permutation(own.size)]
    n_adapt = own.size // 2
    return SplitSpec(
        new_user=new_user,
        train_set=ws.take(np.flatnonzero(ws.user_ids != new_user)),
        adapt_set=ws.take(np.sort(order[:n_adapt])).without_labels(),
        test_set=ws.take(np.sort(order[n_adapt:])),
        seed=seed,
    )


def split_channel_stats(split: SplitSpec) -> ChannelStats:
    """Min/max over training users plus the new user's adaptation half."""
    return window_channel_stats(split.train_set, split.adapt_set)


def normalize_split(split: SplitSpec, stats: ChannelStats | None = None) -> SplitSpec:
    stats = stats or split_channel_stats(split)
    return replace(
        split,
        train_set=normalize_windows(split.train_set, stats),
        adapt_set=normalize_windows(split.adapt_set, stats),
        test_set=normalize_windows(split.test_set, stats),
    )
