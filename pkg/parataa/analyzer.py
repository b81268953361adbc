"""
Run-config analyzer
Checks a parsed config against the section schema and builds a RunConfig.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from .anderson import DEFAULT_LAMBDA, Variant
from .ast_nodes import ConfigFile, Entry, ListValue, Literal, Section
from .engine import DEFAULT_HISTORY, DEFAULT_TAU, SolverConfig
from .errors import ConfigError, ConfigValidationError
from .runconfig import (DEFAULT_MEAN_SCALE, CompareSpec, GuidanceSpec, MixtureSpec,
                        OutputSpec, RunConfig, RunSpec, ScheduleSpec, SweepSpec,
                        parse_variant_label)
from .schedule import DEFAULT_BETA_END, DEFAULT_BETA_START

Check = Callable[[Any], Optional[str]]


def _at_least(low) -> Check:
    return lambda v: None if v >= low else f"must be at least {low}"


def _positive(v) -> Optional[str]:
    return None if v > 0 else "must be positive"


def _between(low, high) -> Check:
    return lambda v: None if low <= v <= high else f"must lie in [{low}, {high}]"


def _open_unit(v) -> Optional[str]:
    return None if 0.0 < v < 1.0 else "must lie strictly between 0 and 1"


@dataclass
class KeySpec:
    """One allowed key of a section."""
    name: str
    kind: str  # 'int', 'float', 'bool', 'name', 'path', 'int_list', 'float_list', 'name_list', 'matrix'
    default: Any = None
    required: bool = False
    check: Optional[Check] = None


MIXTURE_KEYS = [
    KeySpec("weights", "float_list", check=lambda ws: None if all(w > 0 for w in ws)
            else "mixture weights must be positive"),
    KeySpec("means", "matrix"),
    KeySpec("components", "int", check=_at_least(1)),
    KeySpec("mean_scale", "float", DEFAULT_MEAN_SCALE, check=_positive),
    KeySpec("model_seed", "int", 0, check=_at_least(0)),
    KeySpec("dim", "int", check=_at_least(1)),
    KeySpec("s0_sq", "float", 1.0, check=_positive),
]

SCHEMA: Dict[str, List[KeySpec]] = {
    "schedule": [
        KeySpec("T", "int", required=True, check=_at_least(1)),
        KeySpec("beta_start", "float", DEFAULT_BETA_START, check=_open_unit),
        KeySpec("beta_end", "float", DEFAULT_BETA_END, check=_open_unit),
        KeySpec("eta", "float", 0.0, check=_between(0.0, 1.0)),
    ],
    "model": MIXTURE_KEYS,
    "guidance": MIXTURE_KEYS + [KeySpec("scale", "float", required=True)],
    "solver": [
        KeySpec("variant", "name", Variant.TAA.value),
        KeySpec("k", "int", 1, check=_at_least(1)),
        KeySpec("m", "int", check=_at_least(1)),
        KeySpec("tau", "float", DEFAULT_TAU, check=_at_least(0.0)),
        KeySpec("lambda", "float", DEFAULT_LAMBDA, check=_at_least(0.0)),
        KeySpec("w", "int", check=_at_least(1)),
        KeySpec("s_max", "int", check=_at_least(0)),
        KeySpec("T_init", "int", check=_at_least(1)),
        KeySpec("safeguard", "bool", True),
    ],
    "run": [
        KeySpec("seeds", "int", 1, check=_at_least(1)),
        KeySpec("base_seed", "int", 0, check=_at_least(0)),
        KeySpec("threads", "int", check=_at_least(1)),
        KeySpec("require_convergence", "bool", False),
    ],
    "output": [
        KeySpec("report_csv", "path"),
        KeySpec("summary_json", "path"),
        KeySpec("trajectory", "path"),
        KeySpec("init_trajectory", "path"),
        KeySpec("residuals_csv", "path"),
    ],
    "compare": [
        KeySpec("variants", "name_list"),
        KeySpec("fp_plus_k_grid", "int_list", check=lambda ks: None if min(ks) >= 1
                else "grid entries must be at least 1"),
    ],
    "sweep": [
        KeySpec("k_grid", "int_list", check=lambda ks: None if min(ks) >= 1
                else "grid entries must be at least 1"),
        KeySpec("m_grid", "int_list", check=lambda ms: None if min(ms) >= 1
                else "grid entries must be at least 1"),
        KeySpec("w_grid", "int_list", check=lambda ws: None if min(ws) >= 1
                else "grid entries must be at least 1"),
    ],
}

REQUIRED_SECTIONS = ("schedule", "model")

KIND_NAMES = {
    "int": "an integer",
    "float": "a number",
    "bool": "true or false",
    "name": "a name",
    "path": "a path string",
    "int_list": "a non-empty list of integers",
    "float_list": "a non-empty list of numbers",
    "name_list": "a non-empty list of names",
    "matrix": "a list of equal-length number lists",
}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class SectionValues:
    """Converted values of one section plus the entries they came from."""

    def __init__(self, section: Optional[Section]):
        self.section = section
        self.values: Dict[str, Any] = {}
        self.entries: Dict[str, Entry] = {}

    def __getitem__(self, key):
        return self.values.get(key)

    def given(self, key) -> bool:
        return key in self.entries

    def where(self, key=None) -> Tuple[Optional[int], Optional[int]]:
        node = self.entries.get(key) if key else None
        node = node or self.section
        return (node.line, node.column) if node is not None else (None, None)


class ConfigAnalyzer:
    """
    Validates a parsed config file.

    - Unknown or duplicate sections and keys
    - Value types and ranges
    - Required keys
    - Cross-field rules against T and the data dimension
    """

    def __init__(self, base_dir=None):
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self.errors: List[ConfigError] = []

    def error(self, message: str, line=None, column=None):
        self.errors.append(ConfigError(message, line, column))

    def analyze(self, tree: ConfigFile) -> RunConfig:
        self.errors = []
        sections = self.collect_sections(tree)
        values = {name: self.read_section(name, sections.get(name)) for name in SCHEMA}

        schedule = self.build_schedule(values["schedule"])
        model = self.build_mixture(values["model"], "model")
        guidance = None
        if sections.get("guidance") is not None:
            conditional = self.build_mixture(values["guidance"], "guidance")
            guidance = GuidanceSpec(conditional, values["guidance"]["scale"])
            if model and conditional and model.d != conditional.d:
                self.error(f"[guidance] dimension {conditional.d} does not match "
                           f"[model] dimension {model.d}", *values["guidance"].where())
        run = RunSpec(**{k.name: values["run"][k.name] for k in SCHEMA["run"]})
        output = self.build_output(values["output"], run)

        config = None
        if schedule is not None and model is not None:
            solver = self.build_solver(values["solver"], schedule.T, model.d, run)
            compare = self.build_compare(values["compare"], schedule.T)
            sweep = self.build_sweep(values["sweep"], schedule.T, model.d)
            config = RunConfig(schedule=schedule, model=model, solver=solver,
                               guidance=guidance, run=run, output=output,
                               compare=compare, sweep=sweep, source=tree.filename)
        if self.errors:
            raise ConfigValidationError(self.errors)
        return config

    # ============== STRUCTURE ==============

    def collect_sections(self, tree: ConfigFile) -> Dict[str, Section]:
        sections: Dict[str, Section] = {}
        for section in tree.sections:
            if section.name not in SCHEMA:
                known = ", ".join(SCHEMA)
                self.error(f"unknown section [{section.name}] (known: {known})",
                           section.line, section.column)
            elif section.name in sections:
                first = sections[section.name]
                self.error(f"section [{section.name}] already defined at line {first.line}",
                           section.line, section.column)
            else:
                sections[section.name] = section
        for name in REQUIRED_SECTIONS:
            if name not in sections:
                self.error(f"missing required section [{name}]")
        return sections

    def read_section(self, name: str, section: Optional[Section]) -> SectionValues:
        out = SectionValues(section)
        specs = {spec.name: spec for spec in SCHEMA[name]}
        if section is not None:
            for entry in section.entries:
                spec = specs.get(entry.key)
                if spec is None:
                    self.error(f"[{name}] unknown key '{entry.key}'", entry.line, entry.column)
                    continue
                if entry.key in out.entries:
                    self.error(f"[{name}] duplicate key '{entry.key}' "
                               f"(first set at line {out.entries[entry.key].line})",
                               entry.line, entry.column)
                    continue
                out.entries[entry.key] = entry
                value = self.convert(name, spec, entry)
                if value is not None:
                    out.values[entry.key] = value
        for spec in specs.values():
            if spec.name in out.values or spec.name in out.entries:
                continue
            if spec.required and section is not None:
                self.error(f"[{name}] missing required key '{spec.name}'", *out.where())
            out.values[spec.name] = spec.default
        return out

    # ============== VALUES ==============

    def convert(self, section: str, spec: KeySpec, entry: Entry):
        node = entry.value
        where = (entry.line, entry.column)
        label = f"[{section}] {spec.name}"
        is_list = spec.kind.endswith("_list") or spec.kind == "matrix"
        if is_list != isinstance(node, ListValue):
            self.error(f"{label}: expected {'a list' if is_list else 'a single value'}", *where)
            return None
        value = self.typed(node, spec.kind)
        if value is None:
            self.error(f"{label}: expected {KIND_NAMES[spec.kind]}, "
                       f"got {self.describe(node)}", *where)
            return None
        if spec.kind == "path":
            value = self.resolve_path(value)
        if spec.check is not None:
            problem = spec.check(value)
            if problem:
                self.error(f"{label} {problem}, got {self.describe(node)}", *where)
                return None
        return value

    def typed(self, node, kind: str):
        if isinstance(node, Literal):
            v = node.value
            if kind == "int":
                return v if _is_int(v) else None
            if kind == "float":
                return float(v) if _is_number(v) else None
            if kind == "bool":
                return v if isinstance(v, bool) else None
            if kind in ("name", "path"):
                return v if isinstance(v, str) and v else None
            return None
        items = node.items
        if not items:
            return None
        if kind == "int_list":
            values = [i.value for i in items if isinstance(i, Literal)]
            return values if len(values) == len(items) and all(map(_is_int, values)) else None
        if kind == "float_list":
            values = [i.value for i in items if isinstance(i, Literal)]
            return ([float(v) for v in values]
                    if len(values) == len(items) and all(map(_is_number, values)) else None)
        if kind == "name_list":
            values = [i.value for i in items if isinstance(i, Literal)]
            return (values if len(values) == len(items)
                    and all(isinstance(v, str) and v for v in values) else None)
        if kind == "matrix":
            rows = [self.typed(i, "float_list") if isinstance(i, ListValue) else None
                    for i in items]
            if any(r is None for r in rows) or len({len(r) for r in rows}) != 1:
                return None
            return rows
        return None

    def describe(self, node) -> str:
        if isinstance(node, ListValue):
            return f"a list of {len(node.items)} items"
        return repr(node.value)

    def resolve_path(self, value: str) -> Path:
        path = Path(value)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path

    # ============== SECTIONS ==============

    def build_schedule(self, sv: SectionValues) -> Optional[ScheduleSpec]:
        if sv.section is None or sv["T"] is None:
            return None
        spec = ScheduleSpec(T=sv["T"], beta_start=sv["beta_start"],
                            beta_end=sv["beta_end"], eta=sv["eta"])
        if None not in (spec.beta_start, spec.beta_end) and spec.beta_start > spec.beta_end:
            self.error(f"[schedule] beta_start {spec.beta_start} exceeds beta_end {spec.beta_end}",
                       *sv.where("beta_start"))
        return spec

    def build_mixture(self, sv: SectionValues, name: str) -> Optional[MixtureSpec]:
        if sv.section is None:
            return None
        if any(sv.given(key) and sv[key] is None for key in ("means", "components", "dim", "weights")):
            return None
        spec = MixtureSpec(**{k.name: sv[k.name] for k in MIXTURE_KEYS})
        ok = True
        if spec.means is not None and spec.components is not None:
            self.error(f"[{name}] give either means or components, not both",
                       *sv.where("components"))
            ok = False
        elif spec.means is None and spec.components is None:
            self.error(f"[{name}] needs means or components", *sv.where())
            ok = False
        elif spec.means is None and spec.dim is None:
            self.error(f"[{name}] dim is required when means are drawn at random",
                       *sv.where("components"))
            ok = False
        elif spec.means is not None and spec.dim is not None and spec.dim != len(spec.means[0]):
            self.error(f"[{name}] dim {spec.dim} does not match means of dimension "
                       f"{len(spec.means[0])}", *sv.where("dim"))
            ok = False
        if ok and spec.weights is not None and len(spec.weights) != spec.K:
            self.error(f"[{name}] {len(spec.weights)} weights for {spec.K} components",
                       *sv.where("weights"))
            ok = False
        return spec if ok else None

    def build_solver(self, sv: SectionValues, T: int, d: int, run: RunSpec) -> SolverConfig:
        variant = Variant.TAA
        label = sv["variant"]
        if label is not None:
            try:
                variant, _, swept = parse_variant_label(label)
                if swept or label.upper() != variant.value:
                    raise ConfigError(f"'{label}' is only valid in [compare] variants")
            except ConfigError as e:
                self.error(f"[solver] variant: {e.message}", *sv.where("variant"))
        for key in ("k", "w"):
            if sv[key] is not None and sv[key] > T:
                self.error(f"[solver] {key} must lie in 1..{T}, got {sv[key]}", *sv.where(key))
        if sv["T_init"] is not None and sv["T_init"] > T:
            self.error(f"[solver] T_init must lie in 1..{T}, got {sv['T_init']}",
                       *sv.where("T_init"))
        m = sv["m"] if sv.given("m") else max(1, min(DEFAULT_HISTORY, d - 1))
        if variant is not Variant.FP and m is not None and 1 < m and m >= d:
            self.error(f"[solver] history size m={m} must be smaller than the data "
                       f"dimension d={d}", *sv.where("m"))
        return SolverConfig(k=sv["k"] or 1, m=m or 1, tau=sv["tau"], lam=sv["lambda"],
                            w=sv["w"], s_max=sv["s_max"], T_init=sv["T_init"],
                            variant=variant, safeguard=sv["safeguard"], workers=run.threads)

    def build_output(self, sv: SectionValues, run: RunSpec) -> OutputSpec:
        spec = OutputSpec(**{k.name: sv[k.name] for k in SCHEMA["output"]})
        for key in ("report_csv", "summary_json", "trajectory", "residuals_csv"):
            path = getattr(spec, key)
            if path is not None and not path.parent.is_dir():
                self.error(f"[output] {key}: directory {path.parent} does not exist",
                           *sv.where(key))
        if spec.init_trajectory is not None and not spec.init_trajectory.is_file():
            self.error(f"[output] init_trajectory: no such file {spec.init_trajectory}",
                       *sv.where("init_trajectory"))
        if spec.init_trajectory is not None and (run.seeds or 1) > 1:
            # a stored trajectory carries a single noise bank
            self.error(f"[output] init_trajectory needs [run] seeds = 1, got {run.seeds}",
                       *sv.where("init_trajectory"))
        return spec

    def build_compare(self, sv: SectionValues, T: int) -> CompareSpec:
        spec = CompareSpec()
        if sv["variants"] is not None:
            spec.variants = sv["variants"]
            for label in spec.variants:
                try:
                    parse_variant_label(label)
                except ConfigError as e:
                    self.error(f"[compare] variants: {e.message}", *sv.where("variants"))
        if sv["fp_plus_k_grid"] is not None:
            spec.fp_plus_k_grid = self.grid_within(sv, "compare", "fp_plus_k_grid", T)
        return spec

    def build_sweep(self, sv: SectionValues, T: int, d: int) -> SweepSpec:
        spec = SweepSpec()
        for key in ("k_grid", "w_grid"):
            if sv[key] is not None:
                setattr(spec, key, self.grid_within(sv, "sweep", key, T))
        if sv["m_grid"] is not None:
            spec.m_grid = sv["m_grid"]
        else:
            spec.m_grid = [m for m in spec.m_grid if m == 1 or m < d]
        # m = 1 keeps no history, so it is valid for any d
        too_big = [m for m in spec.m_grid if m > 1 and m >= d]
        if too_big:
            self.error(f"[sweep] m_grid entries {too_big} must be smaller than the data "
                       f"dimension d={d}", *sv.where("m_grid"))
        return spec

    def grid_within(self, sv: SectionValues, section: str, key: str, T: int) -> List[int]:
        grid = sv[key]
        outside = [v for v in grid if v > T]
        if outside:
            self.error(f"[{section}] {key} entries {outside} exceed T={T}", *sv.where(key))
        return grid


def analyze(tree: ConfigFile, base_dir=None) -> RunConfig:
    return ConfigAnalyzer(base_dir).analyze(tree)
