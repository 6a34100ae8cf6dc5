"""Offline dataset generation, persistence, and the symmetric replay buffer.

Datasets are stored column-wise as float32 (the on-disk precision) and carry
trajectory boundaries so discounted returns can be recomputed exactly.  The
file container is magic bytes ``O2OD``, a uint16 version, a length-prefixed
JSON metadata header, then a little-endian float32 record blob; roundtrips
are bit-exact.

During fine-tuning the replay buffer keeps the offline data as a read-only
partition next to an online ring buffer and samples half of every batch from
each, falling back to offline-only batches while the ring is still empty.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

MAGIC = b"O2OD"
VERSION = 1
FILE_SUFFIX = ".o2ods"


class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    traj_id: int
    step: int


@dataclass
class TransitionBatch:
    """Training batch in float64."""

    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    def __len__(self):
        return self.obs.shape[0]


class DatasetError(RuntimeError):
    pass


@dataclass
class OfflineDataset:
    env_id: str
    quality: str
    behavior: str
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray
    dones: np.ndarray
    traj_starts: np.ndarray = field(default=None)

    QUALITIES = ("random", "medium", "expert", "mixed")

    def __post_init__(self):
        if self.quality not in self.QUALITIES:
            raise ValueError(f"quality must be one of {self.QUALITIES}, got {self.quality!r}")
        self.observations = np.asarray(self.observations, dtype=np.float32)
        self.actions = np.asarray(self.actions, dtype=np.float32)
        self.rewards = np.asarray(self.rewards, dtype=np.float32)
        self.next_observations = np.asarray(self.next_observations, dtype=np.float32)
        self.dones = np.asarray(self.dones, dtype=np.float32)
        if self.traj_starts is None:
            self.traj_starts = np.array([0], dtype=np.int64)
        self.traj_starts = np.asarray(self.traj_starts, dtype=np.int64)
        n = len(self)
        if not (self.actions.shape[0] == self.rewards.shape[0]
                == self.next_observations.shape[0] == self.dones.shape[0] == n):
            raise ValueError("column lengths disagree")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("rewards must be finite")
        if n and (self.traj_starts[0] != 0 or np.any(np.diff(self.traj_starts) <= 0)
                  or self.traj_starts[-1] >= n):
            raise ValueError("trajectory boundaries must partition the records")

    def __len__(self):
        return self.observations.shape[0]

    @property
    def obs_dim(self):
        return self.observations.shape[1]

    @property
    def act_dim(self):
        return self.actions.shape[1]

    @property
    def n_trajectories(self):
        return len(self.traj_starts)

    def traj_slices(self):
        bounds = np.append(self.traj_starts, len(self))
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def __getitem__(self, i: int) -> Transition:
        tid = int(np.searchsorted(self.traj_starts, i, side="right")) - 1
        return Transition(
            self.observations[i].astype(np.float64),
            self.actions[i].astype(np.float64),
            float(self.rewards[i]),
            self.next_observations[i].astype(np.float64),
            bool(self.dones[i]),
            tid,
            i - int(self.traj_starts[tid]),
        )

    def batch(self, idx) -> TransitionBatch:
        return TransitionBatch(
            self.observations[idx].astype(np.float64),
            self.actions[idx].astype(np.float64),
            self.rewards[idx].astype(np.float64),
            self.next_observations[idx].astype(np.float64),
            self.dones[idx].astype(np.float64),
        )

    def metadata(self) -> dict:
        return {
            "env_id": self.env_id,
            "quality": self.quality,
            "behavior": self.behavior,
            "count": len(self),
            "obs_dim": int(self.obs_dim),
            "act_dim": int(self.act_dim),
            "n_trajectories": int(self.n_trajectories),
        }


def generate_dataset(env, policy, noise_std, n_transitions, seed, quality="mixed",
                     behavior="scripted") -> OfflineDataset:
    """Roll out ``policy`` with Gaussian action noise until n_transitions are stored.

    The policy is queried in deterministic mode and ``noise_std`` Gaussian
    noise is added before clipping to the action bounds, mirroring how the
    usual benchmark datasets are produced.  Trajectory boundaries fall at
    resets (horizon or terminal).
    """
    if n_transitions < 1:
        raise ValueError("n_transitions must be >= 1")
    rng = np.random.default_rng(seed)
    obs_l, act_l, rew_l, nxt_l, done_l, starts = [], [], [], [], [], []
    state = env.reset(rng)
    t = 0
    starts.append(0)
    for i in range(n_transitions):
        action = np.asarray(policy.act(state, rng=rng, deterministic=True), dtype=np.float64)
        if noise_std > 0:
            action = action + noise_std * rng.standard_normal(action.shape)
        action = np.clip(action, -1.0, 1.0)
        nxt, reward, done = env.step(state, action)
        obs_l.append(state)
        act_l.append(action)
        rew_l.append(reward)
        nxt_l.append(nxt)
        done_l.append(done)
        t += 1
        if done or t >= env.horizon:
            state = env.reset(rng)
            t = 0
            if i + 1 < n_transitions:
                starts.append(i + 1)
        else:
            state = nxt
    return OfflineDataset(env.env_id, quality, behavior,
                          np.array(obs_l), np.array(act_l), np.array(rew_l),
                          np.array(nxt_l), np.array(done_l, dtype=np.float32),
                          np.array(starts, dtype=np.int64))


def compute_returns(ds: OfflineDataset, gamma: float) -> np.ndarray:
    """Discounted return-to-go per transition, computed in float64 per trajectory."""
    returns = np.zeros(len(ds), dtype=np.float64)
    rewards = ds.rewards.astype(np.float64)
    for sl in ds.traj_slices():
        acc = 0.0
        for i in range(sl.stop - 1, sl.start - 1, -1):
            acc = rewards[i] + gamma * acc
            returns[i] = acc
    return returns


# -- persistence -------------------------------------------------------------


def write_dataset(ds: OfflineDataset, path) -> None:
    path = Path(path)
    header = ds.metadata()
    header["traj_starts"] = ds.traj_starts.tolist()
    blob = np.concatenate(
        [ds.observations, ds.actions, ds.rewards[:, None], ds.next_observations,
         ds.dones[:, None]],
        axis=1,
    ).astype("<f4").tobytes()
    header["blob_bytes"] = len(blob)
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(blob)


def read_dataset(path) -> OfflineDataset:
    data = Path(path).read_bytes()
    if len(data) < 10:
        raise DatasetError(f"{path}: too short to hold the container preamble")
    if data[:4] != MAGIC:
        raise DatasetError(f"{path}: bad magic {data[:4]!r} at offset 0, expected {MAGIC!r}")
    (version,) = struct.unpack("<H", data[4:6])
    if version != VERSION:
        raise DatasetError(f"{path}: unsupported version {version} at offset 4")
    (hlen,) = struct.unpack("<I", data[6:10])
    if len(data) < 10 + hlen:
        raise DatasetError(f"{path}: truncated header at offset 10 (need {hlen} bytes)")
    header = json.loads(data[10 : 10 + hlen].decode("utf-8"))
    blob = data[10 + hlen :]
    if len(blob) != header["blob_bytes"]:
        raise DatasetError(
            f"{path}: truncated blob at offset {10 + hlen}: "
            f"{len(blob)} bytes present, {header['blob_bytes']} declared"
        )
    n, od, ad = header["count"], header["obs_dim"], header["act_dim"]
    row = od + ad + 1 + od + 1
    table = np.frombuffer(blob, dtype="<f4").reshape(n, row)
    return OfflineDataset(
        header["env_id"], header["quality"], header["behavior"],
        table[:, :od], table[:, od : od + ad], table[:, od + ad],
        table[:, od + ad + 1 : od + ad + 1 + od], table[:, row - 1],
        np.asarray(header["traj_starts"], dtype=np.int64),
    )


def datasets_equal(a: OfflineDataset, b: OfflineDataset) -> bool:
    return (
        a.metadata() == b.metadata()
        and np.array_equal(a.traj_starts, b.traj_starts)
        and np.array_equal(a.observations, b.observations)
        and np.array_equal(a.actions, b.actions)
        and np.array_equal(a.rewards, b.rewards)
        and np.array_equal(a.next_observations, b.next_observations)
        and np.array_equal(a.dones, b.dones)
    )


# -- replay ------------------------------------------------------------------


class ReplayBuffer:
    """Offline partition plus an online ring buffer with symmetric sampling."""

    def __init__(self, offline: OfflineDataset, capacity=100_000, seed=0):
        if len(offline) == 0:
            raise ValueError("offline partition must be non-empty")
        self.offline = offline
        self.capacity = int(capacity)
        self.rng = np.random.default_rng(seed)
        od, ad = offline.obs_dim, offline.act_dim
        self._obs = np.zeros((self.capacity, od), dtype=np.float64)
        self._act = np.zeros((self.capacity, ad), dtype=np.float64)
        self._rew = np.zeros(self.capacity, dtype=np.float64)
        self._nxt = np.zeros((self.capacity, od), dtype=np.float64)
        self._done = np.zeros(self.capacity, dtype=np.float64)
        self._size = 0
        self._head = 0

    @property
    def online_size(self) -> int:
        return self._size

    def add(self, obs, act, rew, next_obs, done) -> None:
        i = self._head
        self._obs[i] = obs
        self._act[i] = act
        self._rew[i] = rew
        self._nxt[i] = next_obs
        self._done[i] = float(done)
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _online_batch(self, idx) -> TransitionBatch:
        return TransitionBatch(self._obs[idx].copy(), self._act[idx].copy(),
                               self._rew[idx].copy(), self._nxt[idx].copy(),
                               self._done[idx].copy())

    def sample_offline(self, batch_size) -> TransitionBatch:
        idx = self.rng.integers(0, len(self.offline), size=batch_size)
        return self.offline.batch(idx)

    def sample_symmetric(self, batch_size) -> TransitionBatch:
        """Half offline, half online -- exactly -- or all offline while the ring is empty."""
        if batch_size % 2 != 0:
            raise ValueError(f"batch_size must be even, got {batch_size}")
        if self._size == 0:
            return self.sample_offline(batch_size)
        half = batch_size // 2
        off = self.sample_offline(half)
        on_idx = self.rng.integers(0, self._size, size=half)
        on = self._online_batch(on_idx)
        return TransitionBatch(
            np.concatenate([off.obs, on.obs]),
            np.concatenate([off.act, on.act]),
            np.concatenate([off.rew, on.rew]),
            np.concatenate([off.next_obs, on.next_obs]),
            np.concatenate([off.done, on.done]),
        )
