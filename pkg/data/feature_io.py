"""
Feature-file ingestion and export.

Binary format (version 1): a JSON manifest

    {"version": 1, "n": N, "d": D, "dtype": "f32",
     "label_file": "<name>", "feature_file": "<name>"}

next to two payloads: features as little-endian float32, row-major,
exactly N*D*4 bytes; labels as little-endian uint32, N*4 bytes.  Payload
names resolve relative to the manifest's directory.

CSV fallback (small files): header ``label,f0,...,f{D-1}``, one sample per row.

Usage:
    save_features(dataset, 'out/train.json')
    ds = load_features('out/train.json')
    ds = load_features('small.csv')
"""

import json
import logging
import os
import re
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.exceptions import (
    CSVParseError,
    IngestionError,
    NonFiniteFeatureError,
    PayloadSizeError,
    UnsupportedVersionError,
)
from core.types import LabeledSet
from data.dataset import FeatureDataset

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_KEYS = ('version', 'n', 'd', 'dtype', 'label_file', 'feature_file')

# little-endian numpy dtypes for every tensor code a manifest may name
TENSOR_DTYPES: Dict[str, str] = {
    'f32': '<f4',
    'f64': '<f8',
    'u32': '<u4',
}

_PANDAS_LINE = re.compile(r'line (\d+)')


# ---------------------------------------------------------------------------
# Raw tensors (shared with model checkpoints)
# ---------------------------------------------------------------------------

def write_tensor(path: str, array: np.ndarray, dtype: str) -> int:
    """Write ``array`` row-major in the given little-endian dtype. Returns bytes written."""
    payload = np.ascontiguousarray(np.asarray(array).astype(TENSOR_DTYPES[dtype]))
    with open(path, 'wb') as f:
        f.write(payload.tobytes(order='C'))
    return payload.nbytes


def read_tensor(path: str, shape: Tuple[int, ...], dtype: str) -> np.ndarray:
    """Read a payload, checking its byte size against ``shape`` exactly."""
    if dtype not in TENSOR_DTYPES:
        raise IngestionError(f"Unknown tensor dtype '{dtype}'. Available: {sorted(TENSOR_DTYPES)}")
    np_dtype = np.dtype(TENSOR_DTYPES[dtype])
    expected = int(np.prod(shape, dtype=np.int64)) * np_dtype.itemsize
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as exc:
        raise IngestionError(f"cannot read payload {path}: {exc}") from exc
    if len(raw) != expected:
        raise PayloadSizeError(
            f"{os.path.basename(path)}: expected {expected} bytes for shape {shape}, found {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np_dtype).reshape(shape).copy()


# ---------------------------------------------------------------------------
# Binary feature files
# ---------------------------------------------------------------------------

def _read_manifest(path: str) -> dict:
    try:
        with open(path, 'r') as f:
            manifest = json.load(f)
    except OSError as exc:
        raise IngestionError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise IngestionError(f"manifest {path} must be a JSON object")

    missing = [k for k in MANIFEST_KEYS if k not in manifest]
    if missing:
        raise IngestionError(f"manifest {path} is missing key(s) {missing}")
    if manifest['version'] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"manifest version {manifest['version']!r} is not supported (expected {FORMAT_VERSION})"
        )
    if manifest['dtype'] != 'f32':
        raise IngestionError(f"feature dtype must be 'f32', manifest says {manifest['dtype']!r}")
    for key in ('n', 'd'):
        if not isinstance(manifest[key], int) or manifest[key] < 1:
            raise IngestionError(f"manifest field '{key}' must be a positive integer")
    return manifest


def _check_finite(features: np.ndarray, source: str) -> None:
    bad = ~np.isfinite(features)
    if np.any(bad):
        row = int(np.argwhere(bad)[0][0])
        raise NonFiniteFeatureError(
            f"{source}: {int(np.count_nonzero(bad))} non-finite value(s), first in row {row}"
        )


def _load_binary(path: str, split: str) -> FeatureDataset:
    manifest = _read_manifest(path)
    base = os.path.dirname(os.path.abspath(path))
    n, d = manifest['n'], manifest['d']

    features = read_tensor(os.path.join(base, manifest['feature_file']), (n, d), 'f32')
    labels = read_tensor(os.path.join(base, manifest['label_file']), (n,), 'u32')
    _check_finite(features, path)
    return FeatureDataset.from_arrays(features.astype(np.float64), labels.astype(np.int64), split)


def save_features(dataset: Union[FeatureDataset, LabeledSet], path: str,
                  fmt: Optional[str] = None) -> str:
    """
    Write features to ``path``. ``fmt`` is 'binary' or 'csv'; by default a
    ``.csv`` suffix selects CSV and anything else the binary manifest.
    Returns the path written.
    """
    data = dataset.as_labeled() if isinstance(dataset, FeatureDataset) else dataset
    fmt = fmt or ('csv' if path.lower().endswith('.csv') else 'binary')
    if fmt not in ('binary', 'csv'):
        raise IngestionError(f"Unknown feature format '{fmt}'. Available: ['binary', 'csv']")
    if np.any(data.labels > np.iinfo(np.uint32).max):
        raise IngestionError("labels do not fit in uint32")

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    if fmt == 'csv':
        frame = pd.DataFrame(data.vectors.astype(np.float32),
                             columns=[f'f{j}' for j in range(data.dim)])
        frame.insert(0, 'label', data.labels)
        frame.to_csv(path, index=False)
        logger.info("Wrote %d x %d features to %s", len(data), data.dim, path)
        return path

    stem = os.path.splitext(os.path.basename(path))[0]
    feature_file = f'{stem}.features.bin'
    label_file = f'{stem}.labels.bin'
    write_tensor(os.path.join(directory, feature_file), data.vectors, 'f32')
    write_tensor(os.path.join(directory, label_file), data.labels, 'u32')
    manifest = {
        'version': FORMAT_VERSION,
        'n': len(data),
        'd': data.dim,
        'dtype': 'f32',
        'label_file': label_file,
        'feature_file': feature_file,
    }
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2)
    logger.info("Wrote %d x %d features to %s", len(data), data.dim, path)
    return path


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def read_numeric_csv(path: str) -> pd.DataFrame:
    """
    Parse a headed CSV whose every cell is numeric.

    'nan' / 'inf' literals parse to their float values (callers decide
    whether those are acceptable).  Any other malformed row or cell raises
    ``CSVParseError`` with its 1-based file line (header = line 1).
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    except pd.errors.EmptyDataError:
        raise CSVParseError("file is empty", 1) from None
    except pd.errors.ParserError as exc:
        match = _PANDAS_LINE.search(str(exc))
        raise CSVParseError(str(exc), int(match.group(1)) if match else 0) from None

    parsed = {}
    for column in raw.columns:
        text = raw[column].str.strip()
        values = pd.to_numeric(text, errors='coerce')
        invalid = values.isna() & ~text.str.lower().isin(['nan', '+nan', '-nan'])
        if invalid.any():
            row = int(np.flatnonzero(invalid.to_numpy())[0])
            raise CSVParseError(f"column '{column}': cannot parse {text.iloc[row]!r}", row + 2)
        parsed[column] = values.astype(np.float64)
    return pd.DataFrame(parsed, columns=list(raw.columns))


def _load_csv(path: str, split: str) -> FeatureDataset:
    frame = read_numeric_csv(path)
    columns: List[str] = list(frame.columns)
    d = len(columns) - 1
    expected = ['label'] + [f'f{j}' for j in range(d)]
    if d < 1 or columns != expected:
        raise CSVParseError(f"header must be 'label,f0,...,f{{d-1}}', got {','.join(columns)}", 1)
    if frame.empty:
        raise CSVParseError("no data rows", 2)

    labels = frame['label'].to_numpy()
    bad = ~np.isfinite(labels) | (labels < 0) | (labels != np.round(labels))
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise CSVParseError(f"label {labels[row]!r} is not a non-negative integer", row + 2)

    # cells are read at float32, the precision of the binary format
    features = frame[expected[1:]].to_numpy(dtype=np.float64).astype(np.float32).astype(np.float64)
    _check_finite(features, path)
    return FeatureDataset.from_arrays(features, labels.astype(np.int64), split)


def load_features(path: str, split: str = 'train') -> FeatureDataset:
    """Load a feature file; ``.csv`` selects the CSV reader, otherwise a JSON manifest."""
    if path.lower().endswith('.csv'):
        ds = _load_csv(path, split)
    else:
        ds = _load_binary(path, split)
    logger.info("Loaded %d x %d features (%d classes) from %s",
                len(ds), ds.dim, ds.class_count, path)
    return ds
