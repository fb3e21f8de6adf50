"""Cycle-consistent generator pair: architecture specs, losses, training, inference."""

from .losses import (
    GeneratorLossParts,
    adversarial_loss,
    cycle_loss,
    identity_loss,
    total_generator_loss,
)
from .networks import PatchDiscriminator, ResnetGenerator, count_params, init_weights
from .spec import (
    DISCRIMINATOR_TOTAL_PARAMS,
    GENERATOR_TOTAL_PARAMS,
    LayerSpec,
    NetworkSpec,
    build_discriminator,
    build_generator,
)
from .training import (
    CycleTrainState,
    Direction,
    EpochLosses,
    TransformBundle,
    fit,
    from_model_range,
    load_checkpoint,
    load_transform_bundle,
    new_train_state,
    save_checkpoint,
    select_checkpoint,
    to_model_range,
    train_step,
    transform,
    validation_generator_totals,
    write_history_csv,
)
