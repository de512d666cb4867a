"""GAN with a transformation unit between generator and discriminator."""
from .checkpoint import Checkpoint, CheckpointError
from .config import TrainConfig, read_ini
from .losses import d_loss, g_loss
from .nets import DCGANDiscriminator, DCGANGenerator, MLPDiscriminator, MLPGenerator, build_nets
from .train import (
    METRICS_HEADER,
    TOY_MODES,
    StepStats,
    Trainer,
    TrainResult,
    load_training_images,
    restore,
    sample,
    toy_two_mode,
    train,
)
