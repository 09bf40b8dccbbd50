"""Bit-exact JSON encoding for arrays, networks, optimizers and checkpoints.

Arrays are stored as base64 little-endian float64 so a write -> read ->
write cycle reproduces the same bytes.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path
from typing import Any, Union

import numpy as np

from .errors import ConfigError
from .nn import MLP, Adam

CHECKPOINT_FORMAT = "advsac-checkpoint"
CHECKPOINT_VERSION = 1


def encode_array(arr: np.ndarray) -> dict[str, Any]:
    arr = np.asarray(arr, dtype="<f8")  # tobytes() is C-order; ascontiguousarray would promote 0-d
    return {"shape": list(arr.shape), "f8": base64.b64encode(arr.tobytes()).decode("ascii")}


def decode_array(obj: dict[str, Any]) -> np.ndarray:
    raw = base64.b64decode(obj["f8"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(tuple(obj["shape"]))


def net_to_dict(net: MLP) -> dict[str, Any]:
    return {
        "layer_sizes": list(net.layer_sizes),
        "activation": net.activation,
        "params": [encode_array(p) for p in net.params],
    }


def net_from_dict(obj: dict[str, Any]) -> MLP:
    net = MLP(obj["layer_sizes"], obj["activation"], seed=0)
    params = [decode_array(p) for p in obj["params"]]
    if [p.shape for p in params] != [p.shape for p in net.params]:
        raise ConfigError("checkpoint parameter shapes do not match layer sizes")
    net.params = params
    return net


def adam_to_dict(opt: Adam) -> dict[str, Any]:
    return {
        "lr": opt.lr,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps": opt.eps,
        "t": opt.t,
        "m": [encode_array(a) for a in opt.m],
        "v": [encode_array(a) for a in opt.v],
    }


def adam_from_dict(obj: dict[str, Any]) -> Adam:
    return Adam(
        lr=obj["lr"],
        beta1=obj["beta1"],
        beta2=obj["beta2"],
        eps=obj["eps"],
        t=obj["t"],
        m=[decode_array(a) for a in obj["m"]],
        v=[decode_array(a) for a in obj["v"]],
    )


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_json(obj: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return json.loads(path.read_text())


def wrap_checkpoint(kind: str, payload: dict[str, Any]) -> dict[str, Any]:
    return {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "kind": kind, **payload}


def unwrap_checkpoint(obj: dict[str, Any], kind: str) -> dict[str, Any]:
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError("not an advsac checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {obj.get('version')}")
    if obj.get("kind") != kind:
        raise ConfigError(f"expected a {kind!r} checkpoint, found {obj.get('kind')!r}")
    return obj
