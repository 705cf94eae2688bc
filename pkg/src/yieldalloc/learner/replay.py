import numpy as np

REPLAY_CAPACITY = 100_000
BATCH_SIZE = 32


class ReplayBuffer:
    """FIFO ring of joint transitions, sampled uniformly.

    Each row also carries the index of its episode and, once the episode
    has finished, that episode's return.
    """

    def __init__(self, n_agents: int, obs_dim: int, capacity: int = REPLAY_CAPACITY):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.act = np.zeros((capacity, n_agents))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, n_agents, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.episode = np.full(capacity, -1, dtype=np.int64)
        self.ret = np.full(capacity, np.nan)
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done, episode) -> int:
        k = self._head
        self.obs[k] = obs
        self.act[k] = act
        self.rew[k] = rew
        self.next_obs[k] = next_obs
        self.done[k] = done
        self.episode[k] = episode
        self.ret[k] = np.nan
        self._head = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return k

    def set_return(self, rows, value: float) -> None:
        rows = np.asarray(rows)
        # rows may have been overwritten if the episode outlived the ring
        rows = rows[self.episode[rows] == self.episode[rows[-1]]] if rows.size else rows
        self.ret[rows] = value

    def can_sample(self, batch: int = BATCH_SIZE) -> bool:
        return self.size >= batch

    def sample_idx(self, rng, batch: int = BATCH_SIZE) -> np.ndarray:
        if not self.can_sample(batch):
            raise ValueError(f"buffer holds {self.size} transitions, need {batch}")
        return rng.integers(0, self.size, size=batch)
