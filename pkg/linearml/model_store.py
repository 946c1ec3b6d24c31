"""Versioned plain-text (JSON) model documents."""

import json
import logging
import os
from typing import Any, Dict, Union

from linearml.dataset import Task
from linearml.errors import DatasetNotFound, MalformedModel, UnsupportedModelVersion
from linearml.multiclass import OvrModel
from linearml.projection_core import NeighborIndex, Projection
from linearml.training import Model, TrainConfig

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _model_to_dict(model: Model) -> Dict[str, Any]:
    return {
        'format_version': FORMAT_VERSION,
        'kind': 'linearization',
        'task': model.task.value,
        'rng': model.rng,
        'k': model.k,
        'label_map': [[label, mapped] for label, mapped in model.label_map] if model.label_map else None,
        'config': model.config.to_dict(),
        'converged': model.converged,
        'iterations': model.iterations,
        'bias': model.projection.bias,
        'weights': list(model.projection.weights),
        'index': {
            'projected': model.index.projected,
            'target': [n.target for n in model.index.entries],
            'source': model.index.sources,
        },
    }


def _model_from_dict(data: Dict[str, Any]) -> Model:
    try:
        index = data['index']
        label_map = data.get('label_map')
        return Model(
            projection=Projection(float(data['bias']), tuple(float(w) for w in data['weights'])),
            index=NeighborIndex(index['projected'], index['target'], index['source']),
            k=int(data['k']),
            task=Task(data['task']),
            config=TrainConfig.from_dict(data['config']),
            label_map=tuple((float(a), int(b)) for a, b in label_map) if label_map else None,
            converged=bool(data['converged']),
            iterations=int(data['iterations']),
            rng=str(data['rng']),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedModel(f"model document is missing or has bad fields: {e}")


def _to_dict(model: Union[Model, OvrModel]) -> Dict[str, Any]:
    if isinstance(model, OvrModel):
        return {
            'format_version': FORMAT_VERSION,
            'kind': 'ovr',
            'classes': list(model.classes),
            'models': [_model_to_dict(m) for m in model.models],
        }
    return _model_to_dict(model)


def _check_version(data: Dict[str, Any]) -> None:
    version = data.get('format_version')
    if version != FORMAT_VERSION:
        raise UnsupportedModelVersion(f"unsupported model format version: {version!r}")


def dumps_model(model: Union[Model, OvrModel]) -> str:
    # no timestamps: equal models give byte-identical text
    return json.dumps(_to_dict(model), indent=2) + '\n'


def loads_model(text: str) -> Union[Model, OvrModel]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedModel(f"model file is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise MalformedModel("model document must be a JSON object")
    _check_version(data)

    kind = data.get('kind')
    if kind == 'linearization':
        return _model_from_dict(data)
    if kind == 'ovr':
        for nested in data.get('models', []):
            _check_version(nested)
        try:
            classes = tuple(int(c) for c in data['classes'])
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedModel(f"ovr document has bad classes: {e}")
        return OvrModel(classes, tuple(_model_from_dict(m) for m in data.get('models', [])))
    raise UnsupportedModelVersion(f"unknown model kind: {kind!r}")


def save_model(model: Union[Model, OvrModel], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dumps_model(model))
    logger.info(f"Saved model to {path}")


def load_model(path: str) -> Union[Model, OvrModel]:
    if not os.path.isfile(path):
        raise DatasetNotFound(f"No such model file: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        model = loads_model(f.read())
    logger.info(f"Loaded model from {path}")
    return model
