from .checkpoint import CheckpointError, load_model, save_model
from .model import BezierGAN, Discriminator, GanConfig, Generator, bezier_layer, synthesize
from .train import (
    LossTerms,
    TrainHistory,
    TrainingDiverged,
    discriminator_loss,
    generator_adv_loss,
    info_lower_bound,
    losses,
    model_mmd,
    regularizers,
    train,
)
