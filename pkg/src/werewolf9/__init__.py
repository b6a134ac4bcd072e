"""Self-play RL framework for the 9-player Werewolf social deduction game."""

__version__ = "0.1.0"
