"""Linearization machine learning: a projection f'(X) = W^t X plus k-nearest ratio consensus."""

from linearml.dataset import (
    Dataset,
    Example,
    SparseVector,
    Task,
    generate_synthetic,
    load_libsvm,
    parse_libsvm,
    split_dataset,
    write_libsvm,
)
from linearml.multiclass import OvrModel, predict_ovr, train_ovr
from linearml.projection_core import ConsensusVariant, Projection, build_index, consensus, k_nearest, project
from linearml.training import (
    Model,
    PseudoLabelState,
    TrainConfig,
    fit_projection,
    init_pseudo_labels,
    learn,
    learn_step,
    predict,
    predict_many,
    train,
    train_binary,
    train_regression,
    tune_k,
)

__version__ = '0.1.0'
