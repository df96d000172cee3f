"""Split-trust quantum inference: train two quantum classifiers whose
individual outputs are deliberately unusable while their local aggregate
predicts correctly.

The heavy lifting lives in focused modules; this package root re-exports
the pieces most callers need.
"""

from .data import DataError, Dataset, load_csv, save_csv, stratified_split, synth_blobs
from .harness import (
    MetricsRow,
    ObfuscationReport,
    compute_obfuscation,
    load_checkpoint,
    metrics_to_csv,
    save_checkpoint,
    split_infer,
)
from .model import (
    QnnModel,
    forward,
    forward_batch,
    init_model,
    predict_class,
    scale_features,
)
from .noise import NoiseConfig, noisy_evaluate, noisy_forward, preset_config
from .protocol import (
    StiqPair,
    TrainRun,
    child_seed,
    evaluate,
    init_pair,
    pair_for_inference,
    train_baseline,
    train_stiq,
    train_stiq_step,
)
from .simulator import (
    CircuitTemplate,
    GateOp,
    StateVector,
    apply_gate,
    expectation_z_all,
    run_circuit,
    run_circuit_batch,
)
from .templates import EncoderSpec, PqcSpec, expand_template, params_per_layer
from .training import (
    GradientEngine,
    LossConfig,
    adam_init,
    adam_step,
    aggregate,
    cross_entropy,
    divergence,
    gradient,
    softmax,
    total_loss,
)
from .vqa import Hamiltonian, ground_energy, ham_expectation, parse_hamiltonian

__version__ = "0.1.0"

__all__ = [
    "CircuitTemplate",
    "DataError",
    "Dataset",
    "EncoderSpec",
    "GateOp",
    "GradientEngine",
    "Hamiltonian",
    "LossConfig",
    "MetricsRow",
    "NoiseConfig",
    "ObfuscationReport",
    "PqcSpec",
    "QnnModel",
    "StateVector",
    "StiqPair",
    "TrainRun",
    "adam_init",
    "adam_step",
    "aggregate",
    "apply_gate",
    "child_seed",
    "compute_obfuscation",
    "cross_entropy",
    "divergence",
    "evaluate",
    "expand_template",
    "expectation_z_all",
    "forward",
    "forward_batch",
    "gradient",
    "ground_energy",
    "ham_expectation",
    "init_model",
    "init_pair",
    "load_checkpoint",
    "load_csv",
    "metrics_to_csv",
    "noisy_evaluate",
    "noisy_forward",
    "pair_for_inference",
    "parse_hamiltonian",
    "params_per_layer",
    "predict_class",
    "preset_config",
    "run_circuit",
    "run_circuit_batch",
    "save_checkpoint",
    "save_csv",
    "scale_features",
    "softmax",
    "split_infer",
    "stratified_split",
    "synth_blobs",
    "total_loss",
    "train_baseline",
    "train_stiq",
    "train_stiq_step",
]
