"""Versioned JSON persistence for trained models."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .bayes import NaiveBayesClassifier
from .tree import DecisionTreeClassifier

MODEL_FORMAT = "churnseg.model"
MODEL_VERSION = 1

_LOADERS = {
    "c45": DecisionTreeClassifier.from_dict,
    "nb": NaiveBayesClassifier.from_dict,
}


def model_to_json(model) -> str:
    return json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n"


def save_model(model, path: Union[str, Path]) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def model_from_dict(payload: dict):
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a model file (format={payload.get('format')!r})")
    if payload.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version: {payload.get('version')!r}")
    kind = payload.get("model")
    if kind not in _LOADERS:
        raise ValueError(f"unknown model kind: {kind!r}")
    return _LOADERS[kind](payload)


def load_model(path: Union[str, Path]):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_dict(payload)
