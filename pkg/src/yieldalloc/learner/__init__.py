from .nn import HIDDEN, Adam, Mlp, gradient_check, mlp_backward, mlp_forward, soft_update
from .policy import PolicySet, evaluate_policy
from .replay import BATCH_SIZE, REPLAY_CAPACITY, ReplayBuffer
from .shaping import ShapedRewardModel, TabularShapedReward, shaped_reward_update
from .shaped_greedy import ToyGame, optimal_policy, random_toy_game, shaped_greedy_is_optimal
from .trainer import TrainerConfig, critic_input_dim, train_maddpg, train_mapolo

__all__ = [
    "HIDDEN", "Adam", "Mlp", "gradient_check", "mlp_backward", "mlp_forward", "soft_update",
    "PolicySet", "evaluate_policy",
    "BATCH_SIZE", "REPLAY_CAPACITY", "ReplayBuffer",
    "ShapedRewardModel", "TabularShapedReward", "shaped_reward_update",
    "ToyGame", "optimal_policy", "random_toy_game", "shaped_greedy_is_optimal",
    "TrainerConfig", "critic_input_dim", "train_maddpg", "train_mapolo",
]
