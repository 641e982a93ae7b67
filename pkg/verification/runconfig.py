"""
Loading and validation of JSON run-configs.

Each top-level block is checked by its form in `forms.py`; all problems are
reported together in one ConfigError. Relative paths resolve against the
directory holding the config file.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .automata import DRA
from .chains import Spec
from .exceptions import ConfigError
from .forms import (
    LabelsForm,
    ModelBlockForm,
    NumericsForm,
    OutputForm,
    PartitionForm,
    RefinementForm,
    SimulateForm,
    SpecForm,
)
from .geometry import LabeledRegion, Partition, Rect, align_partition_to_labels
from .hoa import load_dra
from .models import Comparison
from .refinement import RefinementConfig
from .systems import SystemModel, make_model

logger = logging.getLogger(__name__)

KNOWN_BLOCKS = {
    "model",
    "labels",
    "partition",
    "spec",
    "imc",
    "refinement",
    "numerics",
    "output",
    "simulate",
}


@dataclass(frozen=True)
class SimulateSettings:
    x0: tuple[float, ...]
    horizon: int
    n_traj: int


@dataclass(frozen=True)
class RunConfig:
    path: Path
    model: dict
    labels: tuple[LabeledRegion, ...]
    grid: tuple[int, ...]
    dra_path: Path
    comparison: Comparison
    p_sat: float
    imc_path: Path | None
    refinement: RefinementConfig
    seed: int
    out_dir: Path
    plot: bool
    simulate: SimulateSettings | None

    @property
    def domain(self) -> Rect:
        intervals = self.model["domain"]
        return Rect(tuple(lo for lo, _ in intervals), tuple(hi for _, hi in intervals))

    @property
    def threads(self) -> int:
        return self.refinement.threads

    def build_model(self) -> SystemModel:
        return make_model(
            self.model["family"],
            self.model["parameters"],
            self.model["domain"],
            self.model["disturbance"],
            self.model["boundary_clipping"],
        )

    def build_partition(self) -> Partition:
        return align_partition_to_labels(self.domain, self.labels, self.grid)

    def load_dra(self) -> DRA:
        return load_dra(self.dra_path)

    def load_spec(self) -> Spec:
        return Spec(self.comparison, self.p_sat, self.load_dra())


def _validate(
    name: str, form_class, data, defaults=None, errors=None
) -> dict | None:
    """Run one block through its form. Appends `block.field: message` to errors."""
    if data is not None and not isinstance(data, dict):
        errors.append(f"{name}: must be an object")
        return None
    form = form_class(data={**(defaults or {}), **(data or {})})
    if form.is_valid():
        return form.cleaned_data
    for field, messages in form.errors.items():
        label = name if field == "__all__" else f"{name}.{field}"
        errors.extend(f"{label}: {message}" for message in messages)
    return None


def _resolve_path(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def parse_run_config(
    doc: dict,
    base_dir: Path,
    *,
    path: Path | None = None,
    seed: int | None = None,
    threads: int | None = None,
    out_dir: str | None = None,
) -> RunConfig:
    """
    Validate a decoded run-config document.

    `seed`, `threads` and `out_dir` override the document when given.
    Raises ConfigError listing every problem found.
    """
    if not isinstance(doc, dict):
        raise ConfigError("run-config must be a JSON object")
    errors: list[str] = []
    unknown = sorted(set(doc) - KNOWN_BLOCKS)
    errors.extend(f"{name}: unknown block" for name in unknown)

    model = _validate("model", ModelBlockForm, doc.get("model"), errors=errors)
    labels = _validate(
        "labels", LabelsForm, {"regions": doc.get("labels", [])}, errors=errors
    )
    partition = _validate(
        "partition", PartitionForm, doc.get("partition"), errors=errors
    )
    spec = _validate("spec", SpecForm, doc.get("spec"), errors=errors)
    refinement = _validate(
        "refinement",
        RefinementForm,
        doc.get("refinement"),
        RefinementForm.defaults(),
        errors,
    )
    numerics = _validate(
        "numerics", NumericsForm, doc.get("numerics"), NumericsForm.defaults(), errors
    )
    output = _validate(
        "output", OutputForm, doc.get("output"), OutputForm.defaults(), errors
    )
    simulate = None
    if doc.get("simulate") is not None:
        simulate = _validate(
            "simulate", SimulateForm, doc["simulate"], SimulateForm.defaults(), errors
        )

    dra_path = imc_path = None
    if spec:
        dra_path = _resolve_path(base_dir, spec["dra"])
        if not dra_path.is_file():
            errors.append(f"spec.dra: file not found: {dra_path}")
    if doc.get("imc") is not None:
        if not isinstance(doc["imc"], str):
            errors.append("imc: must be a path")
        else:
            imc_path = _resolve_path(base_dir, doc["imc"])
            if not imc_path.is_file():
                errors.append(f"imc: file not found: {imc_path}")
    if model and partition and len(partition["grid"]) != len(model["domain"]):
        errors.append(
            f"partition.grid: {len(partition['grid'])} entries for a "
            f"{len(model['domain'])}-dimensional domain"
        )
    if model and simulate and len(simulate["x0"]) != len(model["domain"]):
        errors.append("simulate.x0: dimension differs from the domain")

    if errors:
        raise ConfigError("invalid run-config:\n" + "\n".join(errors))

    regions = tuple(
        LabeledRegion(Rect(r["lower"], r["upper"]), frozenset(r["props"]))
        for r in labels["regions"]
    )
    if threads is not None:
        numerics["threads"] = threads
    if seed is not None:
        numerics["seed"] = seed
    try:
        refinement_config = RefinementConfig(
            v_stop=refinement["v_stop"],
            p_stop=numerics["p_stop"],
            theta=numerics["theta"],
            max_rounds=refinement["max_rounds"],
            max_cells=refinement["max_cells"],
            strategy=refinement["strategy"],
            tol=numerics["tol"],
            max_iters=numerics["max_iters"],
            threads=numerics["threads"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        path=path or base_dir,
        model=model,
        labels=regions,
        grid=tuple(partition["grid"]),
        dra_path=dra_path,
        comparison=Comparison(spec["comparison"]),
        p_sat=spec["p_sat"],
        imc_path=imc_path,
        refinement=refinement_config,
        seed=numerics["seed"],
        out_dir=_resolve_path(base_dir, out_dir or output["out_dir"]),
        plot=output["plot"],
        simulate=(
            SimulateSettings(
                tuple(simulate["x0"]), simulate["horizon"], simulate["n_traj"]
            )
            if simulate
            else None
        ),
    )


def load_run_config(path: str | Path, **overrides) -> RunConfig:
    """Read and validate the run-config at `path`. Raises ConfigError."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"run-config not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    config = parse_run_config(doc, path.resolve().parent, path=path, **overrides)
    logger.info("Loaded run-config %s", path)
    return config
