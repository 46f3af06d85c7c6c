"""Experiment configuration, artifact readers/writers and console helpers."""

import csv
import hashlib
import io
import json
import re
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Sequence, Tuple

from dotenv import dotenv_values
from pydantic import BeforeValidator, Field, ValidationError, model_validator
from rich.console import Console

from frag_core.errors import ConfigError
from frag_core.fragmenter import ClockKind, ClockLaw, StoppingTimeSpec
from frag_core.generators import FamilySpec, natural_scale
from shared.constants import HEADER_PREFIX
from shared.models.base import FrozenModel
from .config import DEFAULT_SEED, OUTPUT_DIR, TOP_K

console = Console()

U64_MAX = (1 << 64) - 1


def print_success(message: str):
    """Print success message in green."""
    console.print(f"✅ {message}", style="green")


def print_error(message: str):
    """Print error message in red."""
    console.print(f"❌ {message}", style="red")


def print_warning(message: str):
    """Print warning message in yellow."""
    console.print(f"⚠️ {message}", style="yellow")


def print_info(message: str):
    """Print info message in blue."""
    console.print(f"ℹ️ {message}", style="blue")


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


IntList = Annotated[List[int], BeforeValidator(_split_list)]
FloatList = Annotated[List[float], BeforeValidator(_split_list)]
StrList = Annotated[List[str], BeforeValidator(_split_list)]


class ClockRule(str, Enum):
    NATURAL = "natural"
    FIXED = "fixed"


class ClockConfig(FrozenModel):
    """Deletion clocks per tree size.

    ``natural`` ties the clocks to the family's distance scale s_n: exponential
    clocks get rate 1 / s_n, uniform clocks live on (0, s_n). ``fixed`` uses ``value``
    as the rate or the horizon.
    """

    kind: ClockKind = ClockKind.EXPONENTIAL
    rule: ClockRule = ClockRule.NATURAL
    value: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "ClockConfig":
        if self.rule == ClockRule.FIXED and self.value is None:
            raise ValueError("a fixed clock rule needs clock.value")
        return self

    def law(self, family: FamilySpec, n: int) -> ClockLaw:
        natural = self.rule == ClockRule.NATURAL
        if self.kind == ClockKind.EXPONENTIAL:
            return ClockLaw.exponential(1.0 / natural_scale(family, n) if natural else self.value)
        return ClockLaw.uniform(natural_scale(family, n) if natural else self.value)


_STOPPING = re.compile(r"^(constant|first_max_below)\(\s*([0-9.eE+-]+)\s*\)$")


def parse_stopping(text: str) -> StoppingTimeSpec:
    """``constant(t)``, ``first_split`` or ``first_max_below(theta)``."""
    text = text.strip()
    if text == "first_split":
        return StoppingTimeSpec.first_split()
    match = _STOPPING.match(text)
    if not match:
        raise ValueError(f"unknown stopping time '{text}'")
    value = float(match.group(2))
    if match.group(1) == "constant":
        return StoppingTimeSpec.constant(value)
    return StoppingTimeSpec.first_max_below(value)


class StudyKind(str, Enum):
    ORACLE = "oracle"
    SOF3 = "sof3"
    PROBE = "probe"
    SCALING = "scaling"
    AUDIT = "audit"


class ProbeConfig(FrozenModel):
    stopping: StrList = Field(default_factory=lambda: ["constant(0.5)", "first_split",
                                                       "first_max_below(0.5)"])
    h: FloatList = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])

    @model_validator(mode="after")
    def _check(self) -> "ProbeConfig":
        for text in self.stopping:
            parse_stopping(text)
        if not self.h or any(h <= 0 for h in self.h):
            raise ValueError("probe.h must be a nonempty list of positive values")
        return self

    def stopping_specs(self) -> List[StoppingTimeSpec]:
        return [parse_stopping(s) for s in self.stopping]


class StatsConfig(FrozenModel):
    studies: Annotated[List[StudyKind], BeforeValidator(_split_list)] = Field(
        default_factory=lambda: list(StudyKind))


class TailsConfig(FrozenModel):
    x_grid: FloatList = Field(default_factory=lambda: [8.0, 10.0, 12.0])
    t_grid: Optional[FloatList] = None
    pairs_per_tree: int = Field(default=1, ge=1)


class LimitConfig(FrozenModel):
    mesh: int = Field(default=1 << 14, ge=2)
    compare: bool = False


class CounterexampleConfig(FrozenModel):
    n_max: int = Field(default=64, ge=3)


class AcceptanceProfile(str, Enum):
    FULL = "full"
    QUICK = "quick"


class AcceptanceConfig(FrozenModel):
    profile: AcceptanceProfile = AcceptanceProfile.FULL


class ExperimentConfig(FrozenModel):
    family: FamilySpec = Field(default_factory=FamilySpec)
    sizes: IntList = Field(default_factory=lambda: [100], min_length=1)
    clock: ClockConfig = Field(default_factory=ClockConfig)
    times: FloatList = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    replicates: int = Field(default=200, ge=1)
    seed: int = Field(default=DEFAULT_SEED, ge=0, le=U64_MAX)
    output_dir: str = OUTPUT_DIR
    top_k: int = Field(default=TOP_K, ge=1)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    stats: StatsConfig = Field(default_factory=StatsConfig)
    tails: TailsConfig = Field(default_factory=TailsConfig)
    limit: LimitConfig = Field(default_factory=LimitConfig)
    counterexample: CounterexampleConfig = Field(default_factory=CounterexampleConfig)
    acceptance: AcceptanceConfig = Field(default_factory=AcceptanceConfig)

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if any(n < 1 for n in self.sizes):
            raise ValueError("sizes must be positive")
        if any(t < 0 for t in self.times):
            raise ValueError("times must be nonnegative")
        return self


_KEY_LINE = re.compile(r"^\s*(?:export\s+)?([^=\s#]+)\s*=")
_TABLE_KEYS = ("degree_table", "p_table")


def config_sha256(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _key_lines(text: str) -> Dict[str, int]:
    """1-based line of every key; lines that are neither blank, comment nor
    ``key = value`` are rejected."""
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = _KEY_LINE.match(line)
        if not match:
            raise ConfigError(f"expected 'key = value', got '{stripped}'", line=number)
        lines[match.group(1)] = number
    return lines


def _line_for(loc: Sequence[Any], lines: Dict[str, int]) -> Tuple[str, Optional[int]]:
    parts = [str(p) for p in loc if not isinstance(p, int)]
    while parts:
        key = ".".join(parts)
        if key in lines:
            return key, lines[key]
        # a nested model reported at its own level lives on one of its dotted keys
        nested = sorted(v for k, v in lines.items() if k.startswith(key + "."))
        if nested:
            return key, nested[0]
        parts.pop()
    return "", None


def load_experiment_config(path: Optional[Path]) -> Tuple[ExperimentConfig, str]:
    """Parse a dotted-key dotenv file into an ExperimentConfig and its SHA-256.

    No path means the default configuration, hashed as an empty file.
    """
    if path is None:
        return ExperimentConfig(), config_sha256(b"")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    text = raw.decode("utf-8")
    lines = _key_lines(text)

    tree: Dict[str, Any] = {}
    for key, value in dotenv_values(stream=io.StringIO(text)).items():
        line = lines.get(key)
        if value is None:
            raise ConfigError("missing value", line=line, key=key)
        parts = key.split(".")
        if parts[0] not in ExperimentConfig.model_fields:
            raise ConfigError(f"unknown key '{key}'", line=line, key=key)
        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"'{key}' conflicts with a plain value", line=line, key=key)
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError(f"'{key}' conflicts with its dotted keys", line=line, key=key)
        node[parts[-1]] = value

    for name in _TABLE_KEYS:
        value = tree.get("family", {}).get(name)
        if value:
            table = Path(value)
            if not table.is_absolute():
                table = path.parent / table
            if not table.is_file():
                key = f"family.{name}"
                raise ConfigError(f"file not found: {value}", line=lines.get(key), key=key)
            tree["family"][name] = str(table)

    try:
        cfg = ExperimentConfig.model_validate(tree)
    except ValidationError as exc:
        error = exc.errors()[0]
        key, line = _line_for(error["loc"], lines)
        label = key or "config"
        raise ConfigError(f"{label}: {error['msg']}", line=line, key=key or None) from exc
    return cfg, config_sha256(raw)


class ArtifactMeta(FrozenModel):
    config_sha256: str
    seed: int


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return _cell(value.item())
    return str(value)


def write_csv(path: Path, meta: ArtifactMeta, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    """CSV with a ``# config_sha256=... seed=...`` first line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    buffer.write(f"{HEADER_PREFIX} config_sha256={meta.config_sha256} seed={meta.seed}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    path.write_text(buffer.getvalue())
    return path


def read_csv(path: Path) -> Tuple[ArtifactMeta, List[str], List[List[str]]]:
    text = Path(path).read_text()
    first, _, body = text.partition("\n")
    if not first.startswith(HEADER_PREFIX):
        raise ValueError(f"{path}: missing artifact header")
    fields = dict(item.split("=", 1) for item in first[len(HEADER_PREFIX):].split())
    meta = ArtifactMeta(config_sha256=fields["config_sha256"], seed=int(fields["seed"]))
    rows = list(csv.reader(io.StringIO(body)))
    return meta, rows[0], rows[1:]


def write_json(path: Path, meta: ArtifactMeta, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"meta": meta.model_dump(), **payload}
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: Path) -> Tuple[ArtifactMeta, Dict[str, Any]]:
    document = json.loads(Path(path).read_text())
    meta = ArtifactMeta.model_validate(document.pop("meta"))
    return meta, document
