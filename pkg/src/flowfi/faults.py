"""Fault models and the two injection engines.

Faults corrupt binary32 values three ways: Zeros overwrites with +0.0,
RandomFault overwrites with (or adds) a Gaussian draw, BitFlip inverts
one bit of the IEEE 754 pattern, optionally gated by flip direction and
by the sign of the victim value. Bit 0 is the mantissa LSB, bit 31 the
sign. Injection happens in two domains: layer states (weights and
biases corrupted before inference) and layer outputs (post-activation
vectors corrupted during the forward pass).

Stream consumption is pinned so campaigns replay exactly:

* inject_states: one choose() over the FC-layer count, then per chosen
  layer in canonical order one select_targets() pass over the layer's
  variable population, then the fault's own draws (bit positions or
  Gaussian replacements) for the selected targets in ascending index
  order.
* forward_with_output_injection: when the plan names a random layer,
  one draw resolves it before anything else; then hook sites fire in
  forward order (coupling ascending, scale net before translation net,
  FC ascending), each consuming a select_targets() pass plus fault
  draws.

A corrupted model or activation never aliases its pristine source; all
functions here are pure over value copies.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError
from .model import (
    LOG_2PI,
    FcLayer,
    ModelState,
    iter_fc_layers,
)
from .numeric import F32, dot_self_last_axis, fc_forward, sum_last_axis
from .rng import RandomStream


class Direction(enum.Enum):
    ZERO_TO_ONE = "0to1"
    ONE_TO_ZERO = "1to0"
    BOTH = "both"


class SignFilter(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    BOTH = "both"


@dataclass(frozen=True)
class BitSelector:
    """Fixed bit position, or None for an independent draw per target."""

    position: int | None

    def __post_init__(self) -> None:
        if self.position is not None and not 0 <= self.position <= 31:
            raise ConfigurationError(f"bit position must be in [0,31], got {self.position}")

    @classmethod
    def fixed(cls, position: int) -> "BitSelector":
        return cls(position)

    @classmethod
    def random_bit(cls) -> "BitSelector":
        return cls(None)


@dataclass(frozen=True)
class Zeros:
    pass


@dataclass(frozen=True)
class RandomFault:
    """Gaussian corruption; replaces the value unless additive is set."""

    mean: float = 0.0
    std: float = 1.0
    additive: bool = False

    def __post_init__(self) -> None:
        if not self.std > 0:
            raise ConfigurationError(f"random fault std must be > 0, got {self.std}")


@dataclass(frozen=True)
class BitFlip:
    bit: BitSelector
    direction: Direction = Direction.BOTH
    sign: SignFilter = SignFilter.BOTH


FaultType = Union[Zeros, RandomFault, BitFlip]


def fault_sign_filter(fault: FaultType) -> SignFilter:
    """Only bit-flips restrict victims by sign; other faults take any value."""
    return fault.sign if isinstance(fault, BitFlip) else SignFilter.BOTH


def fault_type_name(fault: FaultType) -> str:
    if isinstance(fault, Zeros):
        return "zeros"
    if isinstance(fault, RandomFault):
        return "random"
    return "bitflip"


STATE_MODES = (20, 40, 60, 80, 100)


class StateVariable(enum.Enum):
    BIAS = "bias"
    WEIGHT = "weight"
    ALL = "all"


@dataclass(frozen=True)
class StateInjectionPlan:
    mode: int  # percentage of FC layers to hit, one of STATE_MODES
    variable: StateVariable
    fault: FaultType
    amount: float  # per-layer injection rate percentage, [0, 100]

    def validate(self) -> None:
        if self.mode not in STATE_MODES:
            raise ConfigurationError(
                f"state mode must be one of {STATE_MODES}, got {self.mode}"
            )
        _check_amount(self.amount)


@dataclass(frozen=True)
class LayerScope:
    """Which coupling layers an output plan targets."""

    kind: str  # "specific" | "random" | "all"
    index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("specific", "random", "all"):
            raise ConfigurationError(f"unknown layer scope kind {self.kind!r}")
        if (self.kind == "specific") != (self.index is not None):
            raise ConfigurationError("layer index is required iff scope is specific")
        if self.index is not None and self.index < 0:
            raise ConfigurationError(f"layer index must be >= 0, got {self.index}")

    @classmethod
    def specific(cls, index: int) -> "LayerScope":
        return cls("specific", index)

    @classmethod
    def random_layer(cls) -> "LayerScope":
        return cls("random")

    @classmethod
    def all_layers(cls) -> "LayerScope":
        return cls("all")


class OutputVariable(enum.Enum):
    SCALE = "scale"
    TRANSLATION = "translation"
    ALL = "all"


class ActivationFilter(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    LINEAR = "linear"
    ALL = "all"


class Method(enum.Enum):
    PARTIAL = "partial"  # only each selected net's final FC layer
    COMPLETE = "complete"  # every FC layer of each selected net


@dataclass(frozen=True)
class OutputInjectionPlan:
    mode: LayerScope
    variable: OutputVariable
    activation: ActivationFilter
    method: Method
    fault: FaultType
    amount: float

    def validate(self) -> None:
        _check_amount(self.amount)


def _check_amount(amount: float) -> None:
    if not 0 <= amount <= 100:
        raise ConfigurationError(f"amount must be in [0,100], got {amount}")


class InjectionRecord(NamedTuple):
    coupling: int
    net: str  # "scale" | "translation"
    fc: int
    variable: str  # "weight" | "bias" | "output"
    index: int  # flat index within its own array
    bit: int | None  # resolved bit position, None for zeros/random
    old_bits: int
    new_bits: int
    masked: bool
    sample_id: int | None  # only for output-domain records

    def to_dict(self) -> dict:
        return {
            "coupling": self.coupling,
            "net": self.net,
            "fc": self.fc,
            "variable": self.variable,
            "index": self.index,
            "bit": self.bit,
            "old": f"0x{self.old_bits:08X}",
            "new": f"0x{self.new_bits:08X}",
            "masked": self.masked,
            "sample_id": self.sample_id,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class InjectionReport:
    records: list[InjectionRecord]

    def __len__(self) -> int:
        return len(self.records)

    def masked_count(self) -> int:
        return sum(1 for r in self.records if r.masked)

    def to_jsonl_lines(self) -> list[str]:
        return [r.to_json() for r in self.records]


# --- Bit flipping ---------------------------------------------------------


def _flip_core(
    bits: np.ndarray, bitpos: np.ndarray | np.uint32, direction: Direction
) -> tuple[np.ndarray, np.ndarray]:
    """uint32 patterns -> (new patterns, masked flags)."""
    m = np.uint32(1) << bitpos
    cur = (bits & m) != 0
    if direction is Direction.BOTH:
        do = np.ones_like(cur)
    elif direction is Direction.ZERO_TO_ONE:
        do = ~cur
    else:
        do = cur
    new = np.where(do, bits ^ m, bits)
    return new, ~do


def flip_bit(
    value, bit: int, direction: Direction = Direction.BOTH
):
    """Flip one bit of a binary32 value (or array); returns (result, masked).

    A flip whose source state does not match the direction is a no-op
    and reports masked=True.
    """
    if not 0 <= bit <= 31:
        raise ConfigurationError(f"bit position must be in [0,31], got {bit}")
    arr = np.asarray(value, dtype=np.float32)
    scalar = arr.ndim == 0
    new_bits, masked = _flip_core(
        np.ascontiguousarray(arr).view(np.uint32), np.uint32(bit), direction
    )
    out = new_bits.view(np.float32)
    if scalar:
        return np.float32(out[0]), bool(masked[0])
    return out.reshape(arr.shape), masked.reshape(arr.shape)


# --- Target selection -----------------------------------------------------


def _k_of(pool_size: int, amount: float) -> int:
    # round half up, with a floor of one target whenever anything is injected
    k = math.floor(pool_size * amount / 100.0 + 0.5)
    if amount > 0 and pool_size > 0:
        k = max(k, 1)
    return min(k, pool_size)


def select_targets(
    values: np.ndarray,
    amount: float,
    stream: RandomStream,
    sign_filter: SignFilter = SignFilter.BOTH,
) -> np.ndarray:
    """Draw the victim indices for one population of binary32 values.

    The candidate pool is the indices whose raw sign bit passes the
    filter (+0.0 counts as positive); from it a uniform sample without
    replacement of round-half-up(pool * amount/100) indices is drawn,
    at least one whenever amount > 0 and the pool is nonempty. Returns
    sorted flat indices.
    """
    _check_amount(amount)
    if values.dtype != np.float32:
        raise ConfigurationError("target population must be float32")
    flat = np.ascontiguousarray(values).reshape(-1)
    if sign_filter is SignFilter.BOTH:
        pool = np.arange(flat.size, dtype=np.int64)
    else:
        neg = (flat.view(np.uint32) >> np.uint32(31)) != 0
        pool = np.nonzero(neg if sign_filter is SignFilter.NEGATIVE else ~neg)[0]
    k = _k_of(int(pool.size), amount)
    return pool[stream.choose(int(pool.size), k)]


_CANON_NAN = F32(np.nan)


def _canon_nan(values: np.ndarray) -> np.ndarray:
    """Replace every NaN with the canonical positive quiet NaN, in place.

    When both operands of a float op are NaN the hardware propagates
    whichever one the instruction encoding favors, and numpy's loop
    choice varies with array shape. Pinning the payload at every point
    where bits are observed (sign pools, recorded patterns, scores)
    keeps batched and single-row evaluation bit-identical.
    """
    np.copyto(values, _CANON_NAN, where=np.isnan(values))
    return values


def _corrupt_at(
    values: np.ndarray, idx: np.ndarray, fault: FaultType, stream: RandomStream
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Corrupt values[idx] in place; returns (old_bits, new_bits, bit positions)."""
    view = values.view(np.uint32)
    old = view[idx].copy()
    if isinstance(fault, Zeros):
        values[idx] = F32(0.0)
        return old, view[idx].copy(), None
    if isinstance(fault, RandomFault):
        draws = stream.gauss(idx.size, fault.mean, fault.std)
        values[idx] = values[idx] + draws if fault.additive else draws
        return old, view[idx].copy(), None
    if fault.bit.position is None:
        bitpos = stream.randbelow(idx.size, 32)
    else:
        bitpos = np.full(idx.size, fault.bit.position, dtype=np.int64)
    new, _ = _flip_core(old, bitpos.astype(np.uint32), fault.direction)
    view[idx] = new
    return old, new, bitpos


def _records_for(
    site: tuple[int, str, int],
    variable_of: "list[tuple[str, int]] | str",
    idx: np.ndarray,
    old: np.ndarray,
    new: np.ndarray,
    bitpos: np.ndarray | None,
    sample_id: int | None,
) -> list[InjectionRecord]:
    ci, net, fi = site
    out = []
    for j in range(idx.size):
        gidx = int(idx[j])
        if isinstance(variable_of, str):
            var, local = variable_of, gidx
        else:
            # variable_of: (name, start) segments sorted by start
            var, start = variable_of[0]
            for name, s in variable_of:
                if gidx < s:
                    break
                var, start = name, s
            local = gidx - start
        o, n = int(old[j]), int(new[j])
        out.append(
            InjectionRecord(
                ci, net, fi, var, local,
                None if bitpos is None else int(bitpos[j]),
                o, n, o == n, sample_id,
            )
        )
    return out


# --- Layer-state injection ------------------------------------------------


def inject_states(
    model: ModelState, plan: StateInjectionPlan, stream: RandomStream
) -> tuple[ModelState, InjectionReport]:
    """Corrupt a copy of the model's parameters per the plan.

    ceil(mode% of all FC layers across every coupling net) are chosen
    uniformly; within each, targets come from the plan's variable arrays
    (weights flattened row-major, bias appended after weights when both
    are in scope). The input model is never modified.
    """
    plan.validate()
    out = model.copy()
    layers = list(iter_fc_layers(out))
    n_pick = math.ceil(plan.mode / 100.0 * len(layers))
    picked = stream.choose(len(layers), n_pick)
    sign = fault_sign_filter(plan.fault)
    records: list[InjectionRecord] = []
    for li in picked:
        ci, net, fi, fc = layers[int(li)]
        parts: list[tuple[str, np.ndarray]] = []
        if plan.variable in (StateVariable.WEIGHT, StateVariable.ALL):
            parts.append(("weight", fc.weights.reshape(-1)))
        if plan.variable in (StateVariable.BIAS, StateVariable.ALL):
            parts.append(("bias", fc.bias))
        vals = np.concatenate([a for _, a in parts])
        idx = select_targets(vals, plan.amount, stream, sign)
        old, new, bitpos = _corrupt_at(vals, idx, plan.fault, stream)
        off = 0
        segments = []
        for name, a in parts:
            a[...] = vals[off : off + a.size]
            segments.append((name, off))
            off += a.size
        records.extend(_records_for((ci, net, fi), segments, idx, old, new, bitpos, None))
    return out, InjectionReport(records)


# --- Layer-output injection -----------------------------------------------


def resolve_output_plan(
    model: ModelState, plan: OutputInjectionPlan, stream: RandomStream
) -> OutputInjectionPlan:
    """Pin a random-layer plan to a concrete coupling layer.

    Consumes one draw iff the scope is random; other plans return
    unchanged without touching the stream.
    """
    if plan.mode.kind != "random":
        return plan
    idx = int(stream.randbelow(1, model.definition.n_coupling)[0])
    return OutputInjectionPlan(
        LayerScope.specific(idx), plan.variable, plan.activation,
        plan.method, plan.fault, plan.amount,
    )


def plan_output_hooks(
    model: ModelState, plan: OutputInjectionPlan
) -> tuple[tuple[int, str, int], ...]:
    """Hook sites (coupling, net, fc) in forward order.

    Scope x variable x method, then filtered by the activation kind of
    each site's FC layer. Random scopes carry no concrete layer; resolve
    them first (resolve_output_plan).
    """
    plan.validate()
    n = model.definition.n_coupling
    if plan.mode.kind == "random":
        raise ConfigurationError(
            "random layer scope must be resolved to a specific layer first"
        )
    if plan.mode.kind == "specific":
        if plan.mode.index >= n:
            raise ConfigurationError(
                f"layer index {plan.mode.index} out of range for {n} coupling layers"
            )
        couplings = [plan.mode.index]
    else:
        couplings = list(range(n))
    if plan.variable is OutputVariable.SCALE:
        nets = ["scale"]
    elif plan.variable is OutputVariable.TRANSLATION:
        nets = ["translation"]
    else:
        nets = ["scale", "translation"]
    sites = []
    for ci in couplings:
        layer = model.layers[ci]
        for net_name in nets:
            net = layer.scale_net if net_name == "scale" else layer.translation_net
            fis = [len(net) - 1] if plan.method is Method.PARTIAL else list(range(len(net)))
            for fi in fis:
                act = net[fi].activation.value
                if plan.activation is ActivationFilter.ALL or act == plan.activation.value:
                    sites.append((ci, net_name, fi))
    return tuple(sites)


def _net_apply_injected(
    net: Sequence[FcLayer],
    x: np.ndarray,
    ci: int,
    net_name: str,
    hooks: frozenset,
    plan: OutputInjectionPlan,
    stream: RandomStream,
    records: list[InjectionRecord] | None,
    sample_id: int | None,
    sign: SignFilter,
) -> np.ndarray:
    h = x
    for fi, layer in enumerate(net):
        h = fc_forward(layer.weights, layer.bias, h, layer.activation)
        if (ci, net_name, fi) in hooks:
            _canon_nan(h)
            idx = select_targets(h, plan.amount, stream, sign)
            old, new, bitpos = _corrupt_at(h, idx, plan.fault, stream)
            if records is not None:
                records.extend(
                    _records_for((ci, net_name, fi), "output", idx, old, new, bitpos, sample_id)
                )
    return h


def forward_with_output_injection(
    model: ModelState,
    x: np.ndarray,
    plan: OutputInjectionPlan,
    stream: RandomStream,
    sample_id: int | None = None,
) -> tuple[np.float32, InjectionReport]:
    """log_prob with post-activation corruption at every hook site.

    Identical bits to log_prob when no target is ever selected (for
    instance amount = 0). Corruption happens on every evaluation of a
    hooked site, before the value flows onward.
    """
    resolved = resolve_output_plan(model, plan, stream)
    hooks = frozenset(plan_output_hooks(model, resolved))
    sign = fault_sign_filter(plan.fault)
    records: list[InjectionRecord] = []
    with np.errstate(over="ignore", invalid="ignore"):
        z = x
        total = np.zeros(x.shape[:-1], dtype=np.float32)
        for ci, layer in enumerate(model.layers):
            pass_idx = np.nonzero(layer.mask)[0]
            trans_idx = np.nonzero(~layer.mask)[0]
            xm = z[..., pass_idx]
            xu = z[..., trans_idx]
            s = _net_apply_injected(
                layer.scale_net, xm, ci, "scale", hooks, resolved, stream, records, sample_id, sign
            )
            t = _net_apply_injected(
                layer.translation_net, xm, ci, "translation", hooks, resolved, stream,
                records, sample_id, sign,
            )
            yu = xu * np.exp(s) + t
            y = np.empty_like(z)
            y[..., pass_idx] = xm
            y[..., trans_idx] = yu
            z = y
            total = total + sum_last_axis(s)
        base = F32(-0.5 * model.definition.input_dim * LOG_2PI)
        lp = (base - F32(0.5) * dot_self_last_axis(z)) + total
    lp = F32(lp) if not np.isnan(lp) else _CANON_NAN
    return lp, InjectionReport(records)


# --- Batched layer-output injection ----------------------------------------
#
# The campaign scores whole evaluation sets per experiment. Per-sample
# streams make every row independent, and the vectorized multi-stream
# helpers in rng reproduce the scalar consumption pattern bit-for-bit,
# so this path equals a Python loop over forward_with_output_injection.
# Sign-filtered bit flips make pool sizes value-dependent per row; those
# fall back to the per-row loop.


def _corrupt_matrix(
    h: np.ndarray, states: np.ndarray, fault: FaultType, amount: float
) -> tuple[np.ndarray, np.ndarray]:
    _canon_nan(h)
    n, width = h.shape
    if fault_sign_filter(fault) is not SignFilter.BOTH:
        # Pool sizes depend on per-row values; run rows individually.
        for r in range(n):
            st = RandomStream(int(states[r]))
            idx = select_targets(h[r], amount, st, fault_sign_filter(fault))
            _corrupt_at(h[r], idx, fault, st)
            states[r] = np.uint64(st.state)
        return h, states
    k = _k_of(width, amount)
    sel, states = _rng.choose_from_states(states, width, k)
    if k == 0:
        return h, states
    rows = np.arange(n)[:, None]
    if isinstance(fault, Zeros):
        h[rows, sel] = F32(0.0)
        return h, states
    if isinstance(fault, RandomFault):
        draws, states = _rng.gauss_from_states(states, k, fault.mean, fault.std)
        h[rows, sel] = h[rows, sel] + draws if fault.additive else draws
        return h, states
    if fault.bit.position is None:
        bitpos, states = _rng.randbelow_from_states(states, k, 32)
        bp = bitpos.astype(np.uint32)
    else:
        bp = np.full((n, k), fault.bit.position, dtype=np.uint32)
    view = h.view(np.uint32)
    old = view[rows, sel]
    new, _ = _flip_core(old, bp, fault.direction)
    view[rows, sel] = new
    return h, states


def log_prob_output_injected_batch(
    model: ModelState,
    x: np.ndarray,
    plan: OutputInjectionPlan,
    sample_streams: list[RandomStream],
    sample_ids: np.ndarray | None = None,
    records: list[InjectionRecord] | None = None,
    capture: dict | None = None,
) -> np.ndarray:
    """Score a batch under output injection, one stream per row.

    Row i is bit-identical to forward_with_output_injection(model,
    x[i], plan, sample_streams[i]). The plan must already be resolved
    (no random scope). When records are requested rows run through the
    scalar path. A capture dict receives the final coupling layer's
    post-injection "scale" and "translation" outputs (records must be
    off for capture).
    """
    if plan.mode.kind == "random":
        raise ConfigurationError("batch scoring needs a resolved plan")
    n = x.shape[0]
    if len(sample_streams) != n:
        raise ConfigurationError("one stream per row required")
    if records is not None:
        if capture is not None:
            raise ConfigurationError("capture and records cannot be combined")
        out = np.empty(n, dtype=np.float32)
        for i in range(n):
            sid = None if sample_ids is None else int(sample_ids[i])
            lp, rep = forward_with_output_injection(
                model, x[i], plan, sample_streams[i], sample_id=sid
            )
            records.extend(rep.records)
            out[i] = lp
        return out

    hooks = frozenset(plan_output_hooks(model, plan))
    states = _rng.states_from_streams(sample_streams)
    with np.errstate(over="ignore", invalid="ignore"):
        z = x
        total = np.zeros(n, dtype=np.float32)
        for ci, layer in enumerate(model.layers):
            pass_idx = np.nonzero(layer.mask)[0]
            trans_idx = np.nonzero(~layer.mask)[0]
            xm = z[..., pass_idx]
            xu = z[..., trans_idx]
            halves = []
            for net_name, net in (("scale", layer.scale_net), ("translation", layer.translation_net)):
                h = xm
                for fi, fc in enumerate(net):
                    h = fc_forward(fc.weights, fc.bias, h, fc.activation)
                    if (ci, net_name, fi) in hooks:
                        h, states = _corrupt_matrix(h, states, plan.fault, plan.amount)
                halves.append(h)
            s, t = halves
            if capture is not None and ci == len(model.layers) - 1:
                capture["scale"] = s.copy()
                capture["translation"] = t.copy()
            yu = xu * np.exp(s) + t
            y = np.empty_like(z)
            y[..., pass_idx] = xm
            y[..., trans_idx] = yu
            z = y
            total = total + sum_last_axis(s)
        base = F32(-0.5 * model.definition.input_dim * LOG_2PI)
        lp = (base - F32(0.5) * dot_self_last_axis(z)) + total
    for i, st in enumerate(sample_streams):
        st.state = int(states[i])
    return _canon_nan(lp)


# --- Snapshot / restore -----------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    data: bytes


def snapshot(model: ModelState) -> Snapshot:
    from .modelio import save_model_bytes

    return Snapshot(save_model_bytes(model))


def restore(snap: Snapshot) -> ModelState:
    from .modelio import load_model_bytes

    return load_model_bytes(snap.data)
