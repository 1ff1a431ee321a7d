"""Campaign orchestration: sweep expansion, execution, CSV artifacts.

A campaign config (JSON, schema in docs/campaign-config.schema.json)
names models, a dataset, metric settings, and a set of injection plan
points, either listed explicitly or produced as the cross product of
sweep axes. Every (point, model, seed, experiment) combination runs
with a stream derived from the labels (hash(config_id), hash(model_id),
seed_index, exp_index), so adding sweep points, models, or experiments
never perturbs existing results, and any worker count produces
byte-identical output.

results.csv schema, one row per experiment plus one aggregate row per
(config_id, model_id) flagged seed_index = exp_index = -1:

    config_id, model_id, seed_index, exp_index, injection_domain,
    type, mode, variable, amount, bit, direction, sign, activation,
    method, sdc_rate, due_rate, masked_rate, n_samples,
    baseline_accuracy

Plan fields that do not apply to a row's fault type are empty. Rates
carry 9 significant digits, LF line endings, RFC 4180 quoting.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .faults import (
    ActivationFilter,
    BitFlip,
    BitSelector,
    Direction,
    FaultType,
    InjectionReport,
    LayerScope,
    Method,
    OutputInjectionPlan,
    OutputVariable,
    RandomFault,
    SignFilter,
    StateInjectionPlan,
    StateVariable,
    Zeros,
    fault_type_name,
    inject_states,
    log_prob_output_injected_batch,
    plan_output_hooks,
    resolve_output_plan,
)
from .metrics import (
    BaselineRecord,
    DuePolicy,
    ExperimentOutcome,
    Rates,
    SdcVariant,
    build_correct_set,
    sdc_rate_aggregate,
    sdc_rate_exp,
)
from .model import (
    ModelDefinition,
    ModelState,
    codes_from_scores,
    iter_fc_layers,
    predict_batch,
)
from .modelio import (
    Dataset,
    build_model_grid,
    load_dataset,
    load_model_bytes,
    parse_model_id,
    save_model_bytes,
)
from .rng import RandomStream, derive_stream, fnv1a64

_SAMPLE_TAG = fnv1a64("sample")


def _fmt_g(x: float) -> str:
    return f"{x:g}"


def _fmt_rate(x: float) -> str:
    return f"{x:.9g}"


# --- Plan points and config ---------------------------------------------------


@dataclass(frozen=True)
class PlanPoint:
    config_id: str
    domain: str  # "state" | "output"
    plan: StateInjectionPlan | OutputInjectionPlan


@dataclass(frozen=True)
class ModelRef:
    model_id: str
    path: str


@dataclass(frozen=True)
class CampaignConfig:
    base_seed: int
    n_exps: int
    n_seeds: int
    models: tuple[ModelRef, ...]
    dataset: str
    variant: SdcVariant
    due_policy: DuePolicy
    points: tuple[PlanPoint, ...]

    def validate(self) -> None:
        if self.n_exps < 1 or self.n_seeds < 1:
            raise ConfigurationError("n_exps and n_seeds must be >= 1")
        if not self.models:
            raise ConfigurationError("at least one model is required")
        if len({m.model_id for m in self.models}) != len(self.models):
            raise ConfigurationError("model ids must be unique")
        if not self.points:
            raise ConfigurationError("at least one plan point is required")


def _fault_id_suffix(fault: FaultType) -> str:
    if isinstance(fault, Zeros):
        return ""
    if isinstance(fault, RandomFault):
        parts = []
        if fault.mean != 0.0 or fault.std != 1.0:
            parts.append(f"-mu{_fmt_g(fault.mean)}-sd{_fmt_g(fault.std)}")
        if fault.additive:
            parts.append("-add")
        return "".join(parts)
    bit = "rnd" if fault.bit.position is None else str(fault.bit.position)
    return f"-b{bit}-d{fault.direction.value}-s{fault.sign.value}"


def state_config_id(plan: StateInjectionPlan) -> str:
    return (
        f"st-{fault_type_name(plan.fault)}-m{plan.mode}-v{plan.variable.value}"
        f"-a{_fmt_g(plan.amount)}{_fault_id_suffix(plan.fault)}"
    )


def _scope_str(scope: LayerScope) -> str:
    if scope.kind == "all":
        return "all"
    if scope.kind == "random":
        return "random"
    return f"L{scope.index}"


def output_config_id(plan: OutputInjectionPlan) -> str:
    return (
        f"out-{fault_type_name(plan.fault)}-l{_scope_str(plan.mode)}"
        f"-v{plan.variable.value}-act{plan.activation.value}-m{plan.method.value}"
        f"-a{_fmt_g(plan.amount)}{_fault_id_suffix(plan.fault)}"
    )


def make_point(plan: StateInjectionPlan | OutputInjectionPlan) -> PlanPoint:
    if isinstance(plan, StateInjectionPlan):
        return PlanPoint(state_config_id(plan), "state", plan)
    return PlanPoint(output_config_id(plan), "output", plan)


# --- Config JSON parsing --------------------------------------------------------


class _ErrorList:
    def __init__(self) -> None:
        self.errors: list[str] = []

    def add(self, msg: str) -> None:
        self.errors.append(msg)

    def raise_if_any(self) -> None:
        if self.errors:
            raise ConfigurationError(
                "invalid campaign config:\n  " + "\n  ".join(self.errors)
            )


def _enum_by_value(enum_cls, value, where: str, errors: _ErrorList):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(repr(e.value) for e in enum_cls)
        errors.add(f"{where}: {value!r} is not one of {allowed}")
        return None


def _parse_fault(doc: dict, where: str, errors: _ErrorList) -> FaultType | None:
    name = doc.get("fault")
    if name == "zeros":
        return Zeros()
    if name == "random":
        try:
            return RandomFault(
                float(doc.get("mean", 0.0)),
                float(doc.get("std", 1.0)),
                bool(doc.get("additive", False)),
            )
        except ConfigurationError as e:
            errors.add(f"{where}: {e}")
            return None
    if name == "bitflip":
        bit = doc.get("bit", "random")
        try:
            selector = BitSelector(None) if bit == "random" else BitSelector(int(bit))
        except (ConfigurationError, ValueError, TypeError) as e:
            errors.add(f"{where}: bad bit {bit!r} ({e})")
            return None
        direction = _enum_by_value(Direction, doc.get("direction", "both"), where, errors)
        sign = _enum_by_value(SignFilter, doc.get("sign", "both"), where, errors)
        if direction is None or sign is None:
            return None
        return BitFlip(selector, direction, sign)
    errors.add(f"{where}: fault must be 'zeros', 'random', or 'bitflip', got {name!r}")
    return None


_STATE_KEYS = {"fault", "mode", "variable", "amount", "bit", "direction", "sign",
               "mean", "std", "additive"}
_OUTPUT_KEYS = _STATE_KEYS | {"activation", "method"}


def _parse_state_plan(doc: dict, where: str, errors: _ErrorList) -> StateInjectionPlan | None:
    unknown = set(doc) - _STATE_KEYS
    if unknown:
        errors.add(f"{where}: unknown keys {sorted(unknown)}")
        return None
    fault = _parse_fault(doc, where, errors)
    variable = _enum_by_value(StateVariable, doc.get("variable", "all"), where, errors)
    if fault is None or variable is None:
        return None
    if "amount" not in doc:
        errors.add(f"{where}: amount is required")
        return None
    try:
        plan = StateInjectionPlan(int(doc.get("mode", 100)), variable, fault,
                                  float(doc["amount"]))
        plan.validate()
        return plan
    except (ConfigurationError, ValueError, TypeError) as e:
        errors.add(f"{where}: {e}")
        return None


def _parse_scope(value, where: str, errors: _ErrorList) -> LayerScope | None:
    if value == "all":
        return LayerScope.all_layers()
    if value == "random":
        return LayerScope.random_layer()
    try:
        return LayerScope.specific(int(value))
    except (ConfigurationError, ValueError, TypeError):
        errors.add(f"{where}: mode must be 'all', 'random', or a layer index, got {value!r}")
        return None


def _parse_output_plan(doc: dict, where: str, errors: _ErrorList) -> OutputInjectionPlan | None:
    unknown = set(doc) - _OUTPUT_KEYS
    if unknown:
        errors.add(f"{where}: unknown keys {sorted(unknown)}")
        return None
    fault = _parse_fault(doc, where, errors)
    scope = _parse_scope(doc.get("mode", "all"), where, errors)
    variable = _enum_by_value(OutputVariable, doc.get("variable", "all"), where, errors)
    activation = _enum_by_value(ActivationFilter, doc.get("activation", "all"), where, errors)
    method = _enum_by_value(Method, doc.get("method", "partial"), where, errors)
    if None in (fault, scope, variable, activation, method):
        return None
    if "amount" not in doc:
        errors.add(f"{where}: amount is required")
        return None
    try:
        plan = OutputInjectionPlan(scope, variable, activation, method, fault,
                                   float(doc["amount"]))
        plan.validate()
        return plan
    except (ConfigurationError, ValueError, TypeError) as e:
        errors.add(f"{where}: {e}")
        return None


def _expand_sweep(doc: dict, where: str, errors: _ErrorList) -> list[dict]:
    """Cross product of axis value lists into concrete plan documents."""
    axes = []
    for key, values in doc.items():
        if not isinstance(values, list):
            errors.add(f"{where}.{key}: sweep axes must be lists")
            return []
        if not values:
            errors.add(f"{where}.{key}: empty sweep axis")
            return []
        axes.append([(key, v) for v in values])
    return [dict(combo) for combo in itertools.product(*axes)]


def campaign_config_from_dict(doc: dict, base_dir: Path | None = None) -> CampaignConfig:
    base = Path(base_dir) if base_dir is not None else Path(".")
    errors = _ErrorList()
    known = {"base_seed", "n_exps", "n_seeds", "models", "dataset", "variant",
             "due_policy", "state_plans", "state_sweeps", "output_plans",
             "output_sweeps"}
    unknown = set(doc) - known
    if unknown:
        errors.add(f"unknown top-level keys {sorted(unknown)}")
    for key in ("base_seed", "models", "dataset"):
        if key not in doc:
            errors.add(f"{key} is required")
    errors.raise_if_any()

    variant = _enum_by_value(SdcVariant, doc.get("variant", "relative"), "variant", errors)
    due_policy = _enum_by_value(DuePolicy, doc.get("due_policy", "separate"),
                                "due_policy", errors)

    models: list[ModelRef] = []
    mdoc = doc["models"]
    if isinstance(mdoc, dict) and "grid_dir" in mdoc:
        input_dim = int(mdoc.get("input_dim", 8))
        grid_dir = base / str(mdoc["grid_dir"])
        for entry in build_model_grid(ModelDefinition(input_dim, 4, 3, 32)):
            models.append(ModelRef(entry.model_id, str(grid_dir / f"{entry.model_id}.rnvp")))
    elif isinstance(mdoc, list):
        for i, m in enumerate(mdoc):
            if not isinstance(m, dict) or "id" not in m or "path" not in m:
                errors.add(f"models[{i}]: need 'id' and 'path'")
                continue
            models.append(ModelRef(str(m["id"]), str(base / str(m["path"]))))
    else:
        errors.add("models must be a list of {id,path} or a {grid_dir,...} object")

    points: list[PlanPoint] = []
    seen: set[str] = set()

    def add_state(p: StateInjectionPlan | None) -> None:
        if p is None:
            return
        point = make_point(p)
        if point.config_id not in seen:
            seen.add(point.config_id)
            points.append(point)

    def add_output(p: OutputInjectionPlan | None) -> None:
        add_state(p)  # same dedupe logic, config_id distinguishes domains

    for i, pdoc in enumerate(doc.get("state_plans", [])):
        add_state(_parse_state_plan(pdoc, f"state_plans[{i}]", errors))
    for i, sdoc in enumerate(doc.get("state_sweeps", [])):
        for j, pdoc in enumerate(_expand_sweep(sdoc, f"state_sweeps[{i}]", errors)):
            add_state(_parse_state_plan(pdoc, f"state_sweeps[{i}]#{j}", errors))
    for i, pdoc in enumerate(doc.get("output_plans", [])):
        add_output(_parse_output_plan(pdoc, f"output_plans[{i}]", errors))
    for i, sdoc in enumerate(doc.get("output_sweeps", [])):
        for j, pdoc in enumerate(_expand_sweep(sdoc, f"output_sweeps[{i}]", errors)):
            add_output(_parse_output_plan(pdoc, f"output_sweeps[{i}]#{j}", errors))

    errors.raise_if_any()
    config = CampaignConfig(
        base_seed=int(doc["base_seed"]),
        n_exps=int(doc.get("n_exps", 10)),
        n_seeds=int(doc.get("n_seeds", 3)),
        models=tuple(models),
        dataset=str(base / str(doc["dataset"])),
        variant=variant,
        due_policy=due_policy,
        points=tuple(points),
    )
    config.validate()
    return config


def parse_campaign_config(path: str | Path) -> CampaignConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return campaign_config_from_dict(doc, base_dir=p.parent)


def load_output_plan(path: str | Path) -> OutputInjectionPlan:
    """Read one output-injection plan from a JSON document."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: plan must be a JSON object")
    errors = _ErrorList()
    plan = _parse_output_plan(doc, str(path), errors)
    errors.raise_if_any()
    return plan


# --- Grid expansion ---------------------------------------------------------


@dataclass(frozen=True)
class ExperimentDescriptor:
    config_id: str
    model_id: str
    seed_index: int
    exp_index: int
    domain: str


def expand_grid(config: CampaignConfig) -> list[ExperimentDescriptor]:
    """All experiment descriptors, lexicographic by (config, model, seed, exp)."""
    config.validate()
    out = []
    for point in sorted(config.points, key=lambda p: p.config_id):
        for ref in sorted(config.models, key=lambda m: m.model_id):
            for seed in range(config.n_seeds):
                for exp in range(config.n_exps):
                    out.append(
                        ExperimentDescriptor(
                            point.config_id, ref.model_id, seed, exp, point.domain
                        )
                    )
    return out


# --- Result rows ------------------------------------------------------------

RESULTS_HEADER = [
    "config_id", "model_id", "seed_index", "exp_index", "injection_domain",
    "type", "mode", "variable", "amount", "bit", "direction", "sign",
    "activation", "method", "sdc_rate", "due_rate", "masked_rate",
    "n_samples", "baseline_accuracy",
]


def plan_cells(point: PlanPoint) -> dict[str, str]:
    """The nine plan columns for a point; inapplicable fields are empty."""
    plan = point.plan
    fault = plan.fault
    cells = {
        "type": fault_type_name(fault),
        "mode": "",
        "variable": plan.variable.value,
        "amount": _fmt_g(plan.amount),
        "bit": "",
        "direction": "",
        "sign": "",
        "activation": "",
        "method": "",
    }
    if isinstance(plan, StateInjectionPlan):
        cells["mode"] = str(plan.mode)
    else:
        cells["mode"] = _scope_str(plan.mode)
        cells["activation"] = plan.activation.value
        cells["method"] = plan.method.value
    if isinstance(fault, BitFlip):
        cells["bit"] = "random" if fault.bit.position is None else str(fault.bit.position)
        cells["direction"] = fault.direction.value
        cells["sign"] = fault.sign.value
    return cells


@dataclass(frozen=True)
class ResultRow:
    config_id: str
    model_id: str
    seed_index: int
    exp_index: int
    injection_domain: str
    type: str
    mode: str
    variable: str
    amount: str
    bit: str
    direction: str
    sign: str
    activation: str
    method: str
    sdc_rate: float
    due_rate: float
    masked_rate: float
    n_samples: int
    baseline_accuracy: float

    def to_cells(self) -> list[str]:
        return [
            self.config_id, self.model_id, str(self.seed_index), str(self.exp_index),
            self.injection_domain, self.type, self.mode, self.variable, self.amount,
            self.bit, self.direction, self.sign, self.activation, self.method,
            _fmt_rate(self.sdc_rate), _fmt_rate(self.due_rate),
            _fmt_rate(self.masked_rate), str(self.n_samples),
            _fmt_rate(self.baseline_accuracy),
        ]


def rows_to_csv_text(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for row in rows:
        writer.writerow(row.to_cells())
    return buf.getvalue()


def write_results_csv(rows: Sequence[ResultRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv_text(rows))


def read_results_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise ConfigurationError(
                f"{path}: unexpected results header {header!r}"
            )
        rows = []
        for cells in reader:
            if len(cells) != len(RESULTS_HEADER):
                raise ConfigurationError(f"{path}: malformed row {cells!r}")
            rows.append(
                ResultRow(
                    cells[0], cells[1], int(cells[2]), int(cells[3]), cells[4],
                    cells[5], cells[6], cells[7], cells[8], cells[9], cells[10],
                    cells[11], cells[12], cells[13], float(cells[14]),
                    float(cells[15]), float(cells[16]), int(cells[17]),
                    float(cells[18]),
                )
            )
        return rows


# --- Execution ----------------------------------------------------------------


@dataclass
class _BlockTask:
    index: int
    config_id: str
    model_id: str
    seed_index: int
    domain: str
    plan: StateInjectionPlan | OutputInjectionPlan
    snapshot_bytes: bytes
    base_seed: int
    n_exps: int
    eval_ids: np.ndarray
    x_eval: np.ndarray
    truth: np.ndarray
    baseline: BaselineRecord
    due_policy: DuePolicy
    audit: bool


@dataclass
class _BlockResult:
    index: int
    rates: list[Rates]
    audit_lines: list[str]


def _experiment_stream(task: _BlockTask, exp_index: int) -> RandomStream:
    return derive_stream(
        task.base_seed,
        (fnv1a64(task.config_id), fnv1a64(task.model_id), task.seed_index, exp_index),
    )


def _sample_streams(task: _BlockTask, exp_index: int) -> list[RandomStream]:
    labels = (fnv1a64(task.config_id), fnv1a64(task.model_id), task.seed_index,
              exp_index, _SAMPLE_TAG)
    return [derive_stream(task.base_seed, labels + (int(sid),)) for sid in task.eval_ids]


def _audit_context(task: _BlockTask, exp_index: int) -> dict:
    return {
        "config_id": task.config_id,
        "model_id": task.model_id,
        "seed_index": task.seed_index,
        "exp_index": exp_index,
    }


def _run_block(
    task: _BlockTask,
    hook: Callable[[ExperimentDescriptor, ModelState], None] | None = None,
) -> _BlockResult:
    model = load_model_bytes(task.snapshot_bytes)
    rates: list[Rates] = []
    audit_lines: list[str] = []
    for exp in range(task.n_exps):
        stream = _experiment_stream(task, exp)
        report: InjectionReport
        if task.domain == "state":
            corrupted, report = inject_states(model, task.plan, stream)
            codes = predict_batch(corrupted, task.x_eval)
        else:
            resolved = resolve_output_plan(model, task.plan, stream)
            records = [] if task.audit else None
            scores = log_prob_output_injected_batch(
                model, task.x_eval, resolved, _sample_streams(task, exp),
                sample_ids=task.eval_ids, records=records,
            )
            codes = codes_from_scores(scores, model.threshold)
            report = InjectionReport(records or [])
        outcome = ExperimentOutcome.classify(task.eval_ids, codes, task.truth)
        rates.append(sdc_rate_exp(task.baseline, outcome, task.due_policy))
        if task.audit:
            ctx = _audit_context(task, exp)
            for r in report.records:
                audit_lines.append(json.dumps(ctx | r.to_dict(), separators=(",", ":")))
        if hook is not None:
            hook(
                ExperimentDescriptor(task.config_id, task.model_id, task.seed_index,
                                     exp, task.domain),
                model,
            )
    return _BlockResult(task.index, rates, audit_lines)


def run_campaign(
    config: CampaignConfig,
    workers: int = 1,
    boundary_hook: Callable[[ExperimentDescriptor, ModelState], None] | None = None,
    audit_path: str | Path | None = None,
) -> list[ResultRow]:
    """Execute every experiment and return all result rows in order.

    The row sequence (and hence the CSV bytes) is a pure function of the
    config and the referenced files, for any worker count. boundary_hook
    is called after every experiment with the working model; it requires
    workers == 1.
    """
    config.validate()
    if boundary_hook is not None and workers != 1:
        raise ConfigurationError("boundary_hook requires workers=1")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")

    dataset = load_dataset(config.dataset)
    points = {p.config_id: p for p in config.points}
    point_ids = sorted(points)
    model_ids = sorted(m.model_id for m in config.models)
    paths = {m.model_id: m.path for m in config.models}

    snapshots: dict[str, bytes] = {}
    baselines: dict[str, BaselineRecord] = {}
    for mid in model_ids:
        model = load_model_bytes(Path(paths[mid]).read_bytes())
        if model.threshold is None:
            raise ConfigurationError(f"model {mid} has no decision threshold set")
        snapshots[mid] = save_model_bytes(model)
        codes = predict_batch(model, dataset.x)
        baselines[mid] = BaselineRecord.build(dataset.ids, codes, dataset.labels)
    eval_sets = build_correct_set(config.variant, baselines)

    id_to_row = {int(sid): i for i, sid in enumerate(dataset.ids)}
    tasks: list[_BlockTask] = []
    for cid in point_ids:
        for mid in model_ids:
            eval_ids = eval_sets[mid]
            rows_idx = np.array([id_to_row[int(s)] for s in eval_ids], dtype=np.int64)
            x_eval = dataset.x[rows_idx]
            truth = dataset.labels[rows_idx].astype(np.int8)
            for seed in range(config.n_seeds):
                tasks.append(
                    _BlockTask(
                        index=len(tasks),
                        config_id=cid,
                        model_id=mid,
                        seed_index=seed,
                        domain=points[cid].domain,
                        plan=points[cid].plan,
                        snapshot_bytes=snapshots[mid],
                        base_seed=config.base_seed,
                        n_exps=config.n_exps,
                        eval_ids=eval_ids,
                        x_eval=x_eval,
                        truth=truth,
                        baseline=baselines[mid],
                        due_policy=config.due_policy,
                        audit=audit_path is not None,
                    )
                )

    results: dict[int, _BlockResult] = {}
    if workers == 1:
        for task in tasks:
            results[task.index] = _run_block(task, hook=boundary_hook)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_block, tasks):
                results[res.index] = res

    rows: list[ResultRow] = []
    audit_lines: list[str] = []
    task_pos = 0
    for cid in point_ids:
        point = points[cid]
        cells = plan_cells(point)
        for mid in model_ids:
            acc = baselines[mid].accuracy()
            group: list[Rates] = []
            n_eval = int(eval_sets[mid].size)
            for _seed in range(config.n_seeds):
                task = tasks[task_pos]
                res = results[task.index]
                task_pos += 1
                audit_lines.extend(res.audit_lines)
                for exp, r in enumerate(res.rates):
                    group.append(r)
                    rows.append(
                        ResultRow(
                            cid, mid, task.seed_index, exp, point.domain,
                            cells["type"], cells["mode"], cells["variable"],
                            cells["amount"], cells["bit"], cells["direction"],
                            cells["sign"], cells["activation"], cells["method"],
                            r.sdc, r.due, r.masked, r.n_samples, acc,
                        )
                    )
            agg_sdc = sdc_rate_aggregate([r.sdc for r in group], config.n_exps,
                                         config.n_seeds)
            agg_due = sdc_rate_aggregate([r.due for r in group], config.n_exps,
                                         config.n_seeds)
            agg_masked = sdc_rate_aggregate([r.masked for r in group], config.n_exps,
                                            config.n_seeds)
            rows.append(
                ResultRow(
                    cid, mid, -1, -1, point.domain,
                    cells["type"], cells["mode"], cells["variable"], cells["amount"],
                    cells["bit"], cells["direction"], cells["sign"],
                    cells["activation"], cells["method"],
                    agg_sdc, agg_due, agg_masked, n_eval, acc,
                )
            )

    if audit_path is not None:
        Path(audit_path).write_text(
            "".join(line + "\n" for line in audit_lines)
        )
    return rows


# --- Bit census ---------------------------------------------------------------


@dataclass(frozen=True)
class BitCensus:
    weights: np.ndarray  # (32,) int64, count of elements with bit b set
    biases: np.ndarray  # (32,) int64
    weight_count: int
    bias_count: int

    def to_csv_text(self) -> str:
        lines = ["bit,weights,biases"]
        for b in range(32):
            lines.append(f"{b},{int(self.weights[b])},{int(self.biases[b])}")
        return "\n".join(lines) + "\n"


def bit_census(model: ModelState) -> BitCensus:
    """Exact per-bit-position popcount over all weights and all biases."""
    shifts = np.arange(32, dtype=np.uint32)
    w_counts = np.zeros(32, dtype=np.int64)
    b_counts = np.zeros(32, dtype=np.int64)
    w_total = 0
    b_total = 0
    for _, _, _, fc in iter_fc_layers(model):
        wbits = np.ascontiguousarray(fc.weights).reshape(-1).view(np.uint32)
        bbits = np.ascontiguousarray(fc.bias).view(np.uint32)
        w_counts += ((wbits[:, None] >> shifts) & np.uint32(1)).sum(axis=0, dtype=np.int64)
        b_counts += ((bbits[:, None] >> shifts) & np.uint32(1)).sum(axis=0, dtype=np.int64)
        w_total += wbits.size
        b_total += bbits.size
    return BitCensus(w_counts, b_counts, w_total, b_total)


# --- Masked-output histogram -----------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray  # (bins+1,) float64
    counts: np.ndarray  # (bins,) int64
    nonfinite: int


def _hist(values: np.ndarray, edges: np.ndarray) -> Histogram:
    finite = values[np.isfinite(values)]
    clipped = np.clip(finite, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return Histogram(edges, counts.astype(np.int64), int(values.size - finite.size))


def masked_output_histogram(
    model: ModelState,
    plan: OutputInjectionPlan,
    dataset: Dataset,
    bins: int,
    base_seed: int = 0,
) -> dict[str, Histogram]:
    """Final coupling layer's scale and translation output distributions.

    Scale support is pinned to [-1,1] (tanh range; faulted escapes clip
    into the edge bins). Translation bins span the observed finite range.
    """
    if bins < 2:
        raise ConfigurationError(f"bins must be >= 2, got {bins}")
    tag = fnv1a64("histogram")
    resolved = resolve_output_plan(
        model, plan, derive_stream(base_seed, (tag, fnv1a64("layer")))
    )
    plan_output_hooks(model, resolved)  # validates scope against the model
    streams = [derive_stream(base_seed, (tag, int(sid))) for sid in dataset.ids]
    capture: dict = {}
    log_prob_output_injected_batch(
        model, dataset.x, resolved, streams, sample_ids=dataset.ids, capture=capture
    )
    scale = np.asarray(capture["scale"], dtype=np.float64).ravel()
    trans = np.asarray(capture["translation"], dtype=np.float64).ravel()
    scale_edges = np.linspace(-1.0, 1.0, bins + 1)
    t_finite = trans[np.isfinite(trans)]
    if t_finite.size == 0:
        lo, hi = -1.0, 1.0
    else:
        lo, hi = float(t_finite.min()), float(t_finite.max())
        if lo == hi:
            lo -= 0.5
            hi += 0.5
    trans_edges = np.linspace(lo, hi, bins + 1)
    return {"scale": _hist(scale, scale_edges), "translation": _hist(trans, trans_edges)}


def histogram_csv_text(hists: dict[str, Histogram]) -> str:
    lines = ["net,kind,lo,hi,count"]
    for net in ("scale", "translation"):
        h = hists[net]
        for i in range(h.counts.size):
            lines.append(
                f"{net},bin,{_fmt_rate(h.edges[i])},{_fmt_rate(h.edges[i + 1])},"
                f"{int(h.counts[i])}"
            )
        lines.append(f"{net},nonfinite,,,{h.nonfinite}")
    return "\n".join(lines) + "\n"


# --- Plot data -------------------------------------------------------------------

RADIAL_HEADER = ["injection_domain", "type", "variable", "model_id", "model_label",
                 "sdc_rate"]
PARALLEL_HEADER = ["type", "mode", "variable", "amount", "bit", "direction", "sign",
                   "activation", "method", "sdc_rate"]


def _model_label(model_id: str) -> str:
    try:
        d = parse_model_id(model_id, 8)
        return f"D{d.fc_depth}U{d.units}"
    except ConfigurationError:
        return model_id


def emit_plot_data(rows: Sequence[ResultRow], kind: str) -> tuple[list[str], list[list[str]]]:
    """Tabular plot inputs from result rows.

    radial: aggregate SDC per model, one table per (domain, type,
    variable), model labels D{depth}U{units}. parallel: one line per
    experiment, the nine plan columns plus sdc_rate.
    """
    if not rows:
        raise ConfigurationError("no result rows given")
    if kind == "radial":
        out = []
        for row in rows:
            if row.exp_index != -1:
                continue
            out.append([
                row.injection_domain, row.type, row.variable, row.model_id,
                _model_label(row.model_id), _fmt_rate(row.sdc_rate),
            ])
        out.sort(key=lambda cells: (cells[0], cells[1], cells[2], cells[3]))
        return RADIAL_HEADER, out
    if kind == "parallel":
        out = []
        for row in rows:
            if row.exp_index == -1:
                continue
            out.append([
                row.type, row.mode, row.variable, row.amount, row.bit,
                row.direction, row.sign, row.activation, row.method,
                _fmt_rate(row.sdc_rate),
            ])
        return PARALLEL_HEADER, out
    raise ConfigurationError(f"kind must be 'radial' or 'parallel', got {kind!r}")


def write_plot_csv(header: list[str], rows: list[list[str]], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())
