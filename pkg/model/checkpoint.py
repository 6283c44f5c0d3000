"""
Checkpoints: every parameter group, the Adam accumulators and (optionally)
the loss-owned center bank, each as a little-endian float64 payload, plus a
JSON manifest carrying dims, dropout rate and the optimizer step counter.
"""

import json
import logging
import os
from typing import Dict, Optional, Tuple

import numpy as np

from core.exceptions import IngestionError, UnsupportedVersionError
from data.feature_io import FORMAT_VERSION, read_tensor, write_tensor
from losses.base import CenterBank
from model.optimizer import CENTER_GROUP, AdamState
from model.projection_head import ProjectionHead

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'checkpoint.json'


def _tensor_file(prefix: str, name: str) -> str:
    return f"{prefix}.{name}.bin"


def save_checkpoint(directory: str, head: ProjectionHead, state: AdamState,
                    bank: Optional[CenterBank] = None) -> str:
    """Write the checkpoint into ``directory``; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    tensors: Dict[str, dict] = {}

    def _put(prefix: str, name: str, array: np.ndarray) -> None:
        filename = _tensor_file(prefix, name)
        write_tensor(os.path.join(directory, filename), array, 'f64')
        tensors[f"{prefix}/{name}"] = {'file': filename, 'shape': list(array.shape)}

    for name, value in head.params.items():
        _put('param', name, value)
    for name in state.m:
        _put('adam_m', name, state.m[name])
        _put('adam_v', name, state.v[name])
    if bank is not None:
        _put('param', CENTER_GROUP, bank.matrix)

    manifest = {
        'version': FORMAT_VERSION,
        'dtype': 'f64',
        'dims': {'d_in': head.d_in, 'd_hidden': head.d_hidden, 'd_out': head.d_out},
        'dropout_rate': head.dropout_rate,
        'step': state.t,
        'optimizer': state.hyperparams(),
        'center_class_ids': bank.class_ids.tolist() if bank is not None else None,
        'tensors': tensors,
    }
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    logger.info("Saved checkpoint (step %d) to %s", state.t, path)
    return path


def load_checkpoint(directory: str) -> Tuple[ProjectionHead, AdamState, Optional[CenterBank]]:
    path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(path, 'r') as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read checkpoint manifest {path}: {exc}") from exc
    if manifest.get('version') != FORMAT_VERSION:
        raise UnsupportedVersionError(f"checkpoint version {manifest.get('version')!r} is not supported")
    if manifest.get('dtype') != 'f64':
        raise IngestionError(f"checkpoint dtype must be 'f64', got {manifest.get('dtype')!r}")

    def _get(key: str) -> np.ndarray:
        entry = manifest['tensors'][key]
        return read_tensor(os.path.join(directory, entry['file']), tuple(entry['shape']), 'f64')

    dims = manifest['dims']
    head = ProjectionHead(dims['d_in'], dims['d_hidden'], dims['d_out'],
                          dropout_rate=manifest['dropout_rate'])
    head.load_params({name: _get(f"param/{name}") for name in head.params})

    m, v = {}, {}
    for key in manifest['tensors']:
        prefix, name = key.split('/', 1)
        if prefix == 'adam_m':
            m[name] = _get(key)
            v[name] = _get(f"adam_v/{name}")
    state = AdamState(t=manifest['step'], m=m, v=v, **manifest['optimizer'])

    bank = None
    if manifest.get('center_class_ids') is not None:
        bank = CenterBank(manifest['center_class_ids'], _get(f"param/{CENTER_GROUP}"))
    return head, state, bank
