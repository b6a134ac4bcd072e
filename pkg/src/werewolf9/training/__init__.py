from .gae import compute_gae
from .rewards import RewardConfig, RewardEvent, shape_rewards, outcome_totals
from .samples import GOOD, WOLF, CheckpointPool, ReplayBuffer, Sample
from .losses import LossStats, bc_loss, ppo_loss
from .scripted import (ScriptedAgent, accusation_scores, dataset_paths,
                       gen_scripted_dataset, play_scripted_game)
from .episodes import EpisodeResult, run_bc_episode, run_rl_episode
from .trainer import Trainer, TrainerConfig, combined_step, load_config, save_config
