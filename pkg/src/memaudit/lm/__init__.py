from .decode import DecodeConfig, generate, generate_batch
from .entropy import EntropyProfile, ModelOutput, batch_profiles, entropy_profile, next_distribution, token_entropy
from .model import ModelConfig, ToyLM, load_checkpoint, save_checkpoint
from .train import TrainConfig, TrainingDiverged, TrainResult, pair_losses, sft, train_lm
from .vocab import Vocabulary

__all__ = [
    "DecodeConfig", "generate", "generate_batch",
    "EntropyProfile", "ModelOutput", "batch_profiles", "entropy_profile", "next_distribution", "token_entropy",
    "ModelConfig", "ToyLM", "load_checkpoint", "save_checkpoint",
    "TrainConfig", "TrainingDiverged", "TrainResult", "pair_losses", "sft", "train_lm",
    "Vocabulary",
]
