"""Run configuration: strict JSON parsing into dataclasses.

Every field has a default and every section is optional. Unknown keys and
type mismatches raise :class:`ConfigError` naming the dotted field path.
"""
import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, List, Optional, Union, get_args, get_origin, get_type_hints

from .exceptions import ConfigError


@dataclass
class ModelConfig:
    family: str = "linear-features"
    n_features: Optional[int] = None
    width: int = 64
    bias: bool = True
    seed: int = 0


@dataclass
class DataConfig:
    n: int = 50
    input_dim: int = 200
    m: int = 1
    noise: float = 0.1
    teacher_seed: int = 0
    seed: int = 0
    signal: float = 1.0
    cov_decay: float = 0.0
    csv: Optional[str] = None
    inputs: Optional[List[List[float]]] = None
    outputs: Optional[List[List[float]]] = None


@dataclass
class RegularizerConfig:
    family: str = "quadratic"
    anchor: Union[str, List[float]] = "zero"
    weight: Union[str, dict] = "identity"
    exponent: int = 4
    scale: float = 1.0
    ridge: float = 0.0


@dataclass
class SolverConfig:
    method: str = "auto"
    tol: float = 1e-10
    tol_R: float = 1e-8
    max_iters: int = 500
    seed: int = 0
    init_scale: float = 0.5


@dataclass
class BoundConfig:
    delta: float = 0.05
    T: int = 1000
    n_mc: int = 10000
    include_P: bool = True
    P_method: str = "auto"
    posterior_average: bool = False


@dataclass
class SweepConfig:
    variable: str = "d"
    values: List[int] = field(default_factory=list)
    replicates: int = 1
    workers: int = 1


@dataclass
class ValidateConfig:
    taus: List[float] = field(default_factory=lambda: [1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    gamma_coeff: float = 1.0
    gamma_power: float = 2.0
    kl_tau: float = 0.1
    kl_gammas: List[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    nodes: int = 201
    half_width: float = 9.0
    laplace_constant: str = "pi"
    slope_threshold: float = 0.9
    r2_threshold: float = 0.95


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: List[str] = field(default_factory=lambda: ["csv", "json"])
    plots: bool = True


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    bound: BoundConfig = field(default_factory=BoundConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


_CHOICES = {
    "model.family": ("linear-features", "random-features", "mlp-tanh"),
    "regularizer.family": ("quadratic", "smooth-power"),
    "solver.method": ("auto", "closed-form", "two-phase"),
    "bound.P_method": ("auto", "closed-form", "monte-carlo"),
    "sweep.variable": ("d", "n"),
    "validate.laplace_constant": ("pi", "coarea"),
}


def _type_name(tp):
    return getattr(tp, "__name__", str(tp))


def _check_value(value, tp, path):
    origin = get_origin(tp)
    if tp is Any:
        return value
    if origin is Union:
        errors = []
        for arg in get_args(tp):
            if arg is type(None):
                if value is None:
                    return None
                continue
            try:
                return _check_value(value, arg, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(f"field '{path}': value {value!r} matches none of the allowed types")
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"field '{path}': expected a list, got {type(value).__name__}")
        (inner,) = get_args(tp) or (Any,)
        return [_check_value(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"field '{path}': expected an object, got {type(value).__name__}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"field '{path}': expected bool, got {type(value).__name__}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"field '{path}': expected int, got {type(value).__name__}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field '{path}': expected number, got {type(value).__name__}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"field '{path}': expected string, got {type(value).__name__}")
        return value
    raise ConfigError(f"field '{path}': unsupported type {_type_name(tp)}")


def _parse_section(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{prefix}' must be an object")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown key '{prefix}.{key}'" if prefix else f"unknown key '{key}'")
    kwargs = {}
    for name in names & set(data):
        path = f"{prefix}.{name}" if prefix else name
        tp = hints[name]
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _parse_section(tp, data[name], path)
        else:
            value = _check_value(data[name], tp, path)
            if path in _CHOICES and value not in _CHOICES[path]:
                raise ConfigError(f"field '{path}': {value!r} is not one of {_CHOICES[path]}")
            kwargs[name] = value
    return cls(**kwargs)


def _validate(cfg):
    if cfg.data.n < 1:
        raise ConfigError("field 'data.n': must be positive")
    if cfg.data.noise < 0:
        raise ConfigError("field 'data.noise': must be non-negative")
    if not 0.0 < cfg.bound.delta < 1.0:
        raise ConfigError("field 'bound.delta': must lie in (0, 1)")
    if cfg.sweep.replicates < 1:
        raise ConfigError("field 'sweep.replicates': must be positive")
    if cfg.sweep.workers < 1:
        raise ConfigError("field 'sweep.workers': must be positive")
    for fmt in cfg.output.formats:
        if fmt not in ("csv", "json"):
            raise ConfigError(f"field 'output.formats': unknown format {fmt!r}")
    if (cfg.data.inputs is None) != (cfg.data.outputs is None):
        raise ConfigError("fields 'data.inputs' and 'data.outputs' must be given together")
    if isinstance(cfg.regularizer.weight, str) and cfg.regularizer.weight != "identity":
        raise ConfigError("field 'regularizer.weight': string form must be 'identity'")
    if isinstance(cfg.regularizer.weight, dict):
        keys = set(cfg.regularizer.weight)
        if keys not in ({"diag"}, {"scale"}):
            raise ConfigError("field 'regularizer.weight': object must be {'diag': [...]} or {'scale': c}")
    if isinstance(cfg.regularizer.anchor, str) and cfg.regularizer.anchor != "zero":
        raise ConfigError("field 'regularizer.anchor': string form must be 'zero'")
    return cfg


def parse_config(data):
    """Build a :class:`RunConfig` from a decoded JSON object."""
    return _validate(_parse_section(RunConfig, data, ""))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)
