"""Model persistence, dataset files, and synthetic data.

Weights file layout (all little-endian, independent of host):

    offset  size  field
    0       5     magic b"RNVP1"
    5       4     u32 input_dim
    9       4     u32 n_coupling
    13      4     u32 fc_depth
    17      4     u32 units
    21      1     u8 mask scheme (0 = alternating halves)
    22      4     f32 threshold (NaN = unset)
    26      ...   payload: binary32 parameters in canonical order

Canonical parameter order: coupling 0..n-1; per coupling the scale net
then the translation net; per net FC 0..depth-1; per FC the weight
matrix row-major then the bias vector. The payload length is fully
determined by the header, and load(save(m)) is bit-identical.

Datasets are CSV: sample_id, label (0 nominal / 1 anomalous), then one
column per flattened feature. The loader rejects non-finite features,
since a fault-free baseline is a precondition everywhere downstream.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ModelLoadError
from .model import (
    CouplingLayer,
    FcLayer,
    ModelDefinition,
    ModelState,
    alternating_mask,
    log_prob,
)
from .numeric import ActivationKind
from .rng import RandomStream, derive_stream, fnv1a64

MAGIC = b"RNVP1"
_HEADER = struct.Struct("<IIIIBf")
HEADER_SIZE = len(MAGIC) + _HEADER.size  # 26
MASK_SCHEME_ALTERNATING = 0


def _net_shapes(definition: ModelDefinition) -> list[tuple[int, int]]:
    """(out, in) per FC layer of one net, first to last."""
    half, units, depth = definition.half_dim, definition.units, definition.fc_depth
    shapes = [(units, half)]
    shapes += [(units, units)] * (depth - 2)
    shapes.append((half, units))
    return shapes


def expected_payload_floats(definition: ModelDefinition) -> int:
    per_net = sum(o * i + o for o, i in _net_shapes(definition))
    return definition.n_coupling * 2 * per_net


def save_model_bytes(model: ModelState) -> bytes:
    model.validate()
    d = model.definition
    thr = float("nan") if model.threshold is None else float(np.float32(model.threshold))
    parts = [
        MAGIC,
        _HEADER.pack(d.input_dim, d.n_coupling, d.fc_depth, d.units,
                     MASK_SCHEME_ALTERNATING, thr),
    ]
    for layer in model.layers:
        for net in (layer.scale_net, layer.translation_net):
            for fc in net:
                parts.append(fc.weights.astype("<f4", copy=False).tobytes())
                parts.append(fc.bias.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def load_model_bytes(data: bytes) -> ModelState:
    if data[: len(MAGIC)] != MAGIC:
        raise ModelLoadError("not a weights file (bad magic at offset 0)")
    if len(data) < HEADER_SIZE:
        raise ModelLoadError(f"truncated header: first missing byte at offset {len(data)}")
    input_dim, n_coupling, fc_depth, units, scheme, thr = _HEADER.unpack_from(
        data, len(MAGIC)
    )
    if scheme != MASK_SCHEME_ALTERNATING:
        raise ModelLoadError(f"unsupported mask scheme {scheme}")
    definition = ModelDefinition(input_dim, n_coupling, fc_depth, units)
    try:
        definition.validate()
    except ConfigurationError as e:
        raise ModelLoadError(f"corrupt header: {e}") from e
    n_floats = expected_payload_floats(definition)
    expected = HEADER_SIZE + 4 * n_floats
    if len(data) < expected:
        raise ModelLoadError(
            f"truncated payload: expected {expected} bytes, "
            f"first missing byte at offset {len(data)}"
        )
    if len(data) > expected:
        raise ModelLoadError(
            f"file length {len(data)} exceeds header-declared size {expected}"
        )
    flat = np.frombuffer(data, dtype="<f4", count=n_floats, offset=HEADER_SIZE)
    flat = flat.astype(np.float32, copy=True)  # writable, native order
    shapes = _net_shapes(definition)
    pos = 0
    layers = []
    for ci in range(n_coupling):
        nets = []
        for final_act in (ActivationKind.TANH, ActivationKind.LINEAR):
            fcs = []
            for fi, (o, i) in enumerate(shapes):
                w = flat[pos : pos + o * i].reshape(o, i).copy()
                pos += o * i
                b = flat[pos : pos + o].copy()
                pos += o
                act = final_act if fi == len(shapes) - 1 else ActivationKind.RELU
                fcs.append(FcLayer(w, b, act))
            nets.append(tuple(fcs))
        layers.append(
            CouplingLayer(alternating_mask(input_dim, ci), nets[0], nets[1])
        )
    threshold = None if math.isnan(thr) else float(np.float32(thr))
    model = ModelState(definition, tuple(layers), threshold)
    model.validate()
    return model


def save_model(model: ModelState, path: str | Path) -> None:
    Path(path).write_bytes(save_model_bytes(model))


def load_model(path: str | Path) -> ModelState:
    return load_model_bytes(Path(path).read_bytes())


# --- Model construction -----------------------------------------------------


def new_model(
    definition: ModelDefinition, init: str = "zero", seed: int = 0
) -> ModelState:
    """Fresh model; zero init is the identity flow, random is a seeded draw."""
    definition.validate()
    if init not in ("zero", "random"):
        raise ConfigurationError(f"init must be 'zero' or 'random', got {init!r}")
    stream = derive_stream(seed, (fnv1a64("model-init"),))
    shapes = _net_shapes(definition)
    layers = []
    for ci in range(definition.n_coupling):
        nets = []
        for final_act in (ActivationKind.TANH, ActivationKind.LINEAR):
            fcs = []
            for fi, (o, i) in enumerate(shapes):
                if init == "zero":
                    w = np.zeros((o, i), dtype=np.float32)
                else:
                    w = stream.gauss(o * i, 0.0, 1.0 / math.sqrt(i)).reshape(o, i)
                b = np.zeros(o, dtype=np.float32)
                act = final_act if fi == len(shapes) - 1 else ActivationKind.RELU
                fcs.append(FcLayer(w, b, act))
            nets.append(tuple(fcs))
        layers.append(
            CouplingLayer(alternating_mask(definition.input_dim, ci), nets[0], nets[1])
        )
    return ModelState(definition, tuple(layers), None)


def identity_model(definition: ModelDefinition) -> ModelState:
    return new_model(definition, init="zero")


def calibrate_threshold(
    model: ModelState, dataset: "Dataset", percentile: float = 5.0
) -> ModelState:
    """Set the decision cutoff at a percentile of nominal log-density.

    Uses only rows labelled nominal; with the default 5th percentile the
    false-positive rate on that data is about 5%.
    """
    nominal = dataset.x[dataset.labels == 0]
    if nominal.shape[0] == 0:
        raise ConfigurationError("threshold calibration needs nominal samples")
    lp = np.asarray(log_prob(model, nominal), dtype=np.float64)
    if not np.all(np.isfinite(lp)):
        raise ConfigurationError("non-finite log-density during calibration")
    tau = float(np.float32(np.percentile(lp, percentile)))
    return model.with_threshold(tau)


# --- Model grid -------------------------------------------------------------

GRID_COUPLING = (4, 6)
GRID_DEPTH = (3, 4, 5)
GRID_UNITS = (32, 48, 64)


@dataclass(frozen=True)
class GridEntry:
    model_id: str
    definition: ModelDefinition


def model_grid_id(definition: ModelDefinition) -> str:
    return f"C{definition.n_coupling}D{definition.fc_depth}U{definition.units}"


def build_model_grid(template: ModelDefinition) -> list[GridEntry]:
    """All hyper-parameter combinations, stable ids, sorted ascending."""
    entries = []
    for c in GRID_COUPLING:
        for depth in GRID_DEPTH:
            for units in GRID_UNITS:
                d = ModelDefinition(template.input_dim, c, depth, units)
                entries.append(GridEntry(model_grid_id(d), d))
    return sorted(entries, key=lambda e: e.model_id)


def parse_model_id(model_id: str, input_dim: int) -> ModelDefinition:
    import re

    m = re.fullmatch(r"C(\d+)D(\d+)U(\d+)", model_id)
    if not m:
        raise ConfigurationError(f"malformed model id {model_id!r}")
    return ModelDefinition(input_dim, int(m.group(1)), int(m.group(2)), int(m.group(3)))


# --- Datasets ----------------------------------------------------------------


@dataclass
class Dataset:
    ids: np.ndarray  # int64
    labels: np.ndarray  # int8, 0 nominal / 1 anomalous
    x: np.ndarray  # (n, d) float32

    @property
    def n(self) -> int:
        return int(self.ids.size)


def write_dataset_csv(path: str | Path, dataset: Dataset) -> None:
    d = dataset.x.shape[1]
    lines = ["sample_id,label," + ",".join(f"f{i}" for i in range(d))]
    for i in range(dataset.n):
        feats = ",".join(str(v) for v in dataset.x[i])  # shortest f32 round-trip form
        lines.append(f"{int(dataset.ids[i])},{int(dataset.labels[i])},{feats}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise ConfigurationError(f"{path}: empty dataset file")
    header = lines[0].split(",")
    if header[:2] != ["sample_id", "label"]:
        raise ConfigurationError(f"{path}: header must start with sample_id,label")
    d = len(header) - 2
    if d < 1 or header[2:] != [f"f{i}" for i in range(d)]:
        raise ConfigurationError(f"{path}: feature columns must be f0..f{d - 1}")
    ids, labels, rows = [], [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != d + 2:
            raise ConfigurationError(f"{path}:{lineno}: expected {d + 2} columns")
        ids.append(int(cells[0]))
        label = int(cells[1])
        if label not in (0, 1):
            raise ConfigurationError(f"{path}:{lineno}: label must be 0 or 1")
        labels.append(label)
        rows.append(np.array([np.float32(c) for c in cells[2:]], dtype=np.float32))
    x = np.vstack(rows)
    if not np.all(np.isfinite(x)):
        raise ConfigurationError(f"{path}: dataset contains non-finite features")
    ids_arr = np.array(ids, dtype=np.int64)
    if np.unique(ids_arr).size != ids_arr.size:
        raise ConfigurationError(f"{path}: sample ids must be unique")
    return Dataset(ids_arr, np.array(labels, dtype=np.int8), x)


# --- Synthetic data -----------------------------------------------------------

ANOMALY_KINDS = ("bias-shift", "stuck-at", "noise-burst")


@dataclass(frozen=True)
class SyntheticSpec:
    """Stationary multichannel AR(1) windows plus labelled anomalies.

    Counts are per split. Nominal channels have unit marginal variance,
    so magnitude is expressed in marginal standard deviations.
    """

    n_channels: int = 2
    window_len: int = 4
    n_nominal: int = 250
    n_anomalous: int = 750
    anomaly_kind: str = "bias-shift"
    magnitude: float = 10.0
    seed: int = 1

    def validate(self) -> None:
        if self.n_channels < 1 or self.window_len < 1:
            raise ConfigurationError("n_channels and window_len must be >= 1")
        if self.n_nominal < 0 or self.n_anomalous < 0:
            raise ConfigurationError("sample counts must be >= 0")
        if self.anomaly_kind not in ANOMALY_KINDS:
            raise ConfigurationError(
                f"anomaly_kind must be one of {ANOMALY_KINDS}, got {self.anomaly_kind!r}"
            )
        if not self.magnitude > 0:
            raise ConfigurationError("magnitude must be > 0")

    @property
    def dim(self) -> int:
        return self.n_channels * self.window_len


SPLITS = ("train", "val", "test")


def _ar_coefficients(spec: SyntheticSpec) -> np.ndarray:
    stream = derive_stream(spec.seed, (fnv1a64("synthetic"), fnv1a64("phi")))
    return 0.85 + 0.07 * stream.uniform(spec.n_channels)


def synth_split(spec: SyntheticSpec, split: str) -> Dataset:
    """One split; windows are flattened time-major (all channels of t=0 first)."""
    spec.validate()
    if split not in SPLITS:
        raise ConfigurationError(f"split must be one of {SPLITS}, got {split!r}")
    phi = _ar_coefficients(spec)
    sigma = np.sqrt(1.0 - phi**2)  # keeps the marginal variance at 1
    stream = derive_stream(spec.seed, (fnv1a64("synthetic"), fnv1a64(split)))
    n = spec.n_nominal + spec.n_anomalous
    c, w = spec.n_channels, spec.window_len
    draws = stream.gauss(n * c * w).astype(np.float64).reshape(n, c, w)
    x = np.empty((n, c, w), dtype=np.float64)
    x[:, :, 0] = draws[:, :, 0]
    for t in range(1, w):
        x[:, :, t] = phi[None, :] * x[:, :, t - 1] + sigma[None, :] * draws[:, :, t]
    labels = np.zeros(n, dtype=np.int8)
    if spec.n_anomalous > 0:
        labels[spec.n_nominal :] = 1
        chan = stream.randbelow(spec.n_anomalous, c)
        rows = np.arange(spec.n_nominal, n)
        if spec.anomaly_kind == "bias-shift":
            x[rows, chan, :] += spec.magnitude
        elif spec.anomaly_kind == "stuck-at":
            x[rows, chan, :] = spec.magnitude
        else:  # noise-burst
            noise = stream.gauss(spec.n_anomalous * w, 0.0, spec.magnitude)
            x[rows, chan, :] += noise.astype(np.float64).reshape(spec.n_anomalous, w)
    flat = np.transpose(x, (0, 2, 1)).reshape(n, w * c).astype(np.float32)
    return Dataset(np.arange(n, dtype=np.int64), labels, flat)


def generate_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write the three disjoint splits; same spec always gives identical files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split in SPLITS:
        p = out / f"{split}.csv"
        write_dataset_csv(p, synth_split(spec, split))
        paths[split] = p
    return paths
