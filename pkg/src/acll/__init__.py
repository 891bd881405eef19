"""Adaptive-compression lifelong learning on small numpy networks.

Each task in a sequence claims a slice of one shared network.  How much it
keeps is chosen by minimising its footprint subject to a bound on the
validation-risk increase, via a multiplier search whose inner problem is
solved by cached Bayesian optimisation.
"""
from .boopt import BoBudget, EvalCache, bo_minimize, lagrangian_objective, seed_from_cache
from .compressor import CompressionParams, prune, size_of
from .datagen import PRESETS, DatasetSplit, TaskData, generate_dataset, preset_tasks
from .dual import DualResult, DualSearchConfig, acll_select, dual_value, feasible_minimum
from .errors import (AcllError, ConditioningError, EvaluationError, InvalidDataError,
                     InvalidMultiplierError, InvalidSpecError, InvalidStateError, InvalidTaskError,
                     OwnershipViolationError, SequencingError, ShapeError)
from .lifelong import (SequenceReport, Strategy, TaskRecord, TaskSpec, evaluate_all,
                       make_task_specs, run_sequence, train_task)
from .net import (Network, TrainConfig, add_head, forward, init_network, load_network,
                  loss_and_grad, predict_labels, save_network, sgd_train)
from .risk import RiskReading, zero_one_risk
from .surrogate import GpHyper, GpModel, expected_improvement, fit_gp, posterior
from .taskmask import (OwnershipMap, assign_retained, new_ownership, register_task,
                       trainable_mask, view_for_task)

__version__ = "0.1.0"
