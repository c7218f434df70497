"""Scenario configuration files.

Configurations are YAML mappings.  Every physical quantity carries its unit
in the key, `_au` for atomic units and `_s` for wall clock seconds:

    spec_version: 1
    preset: desk
    task: heat
    scheme: open
    model:
      kind: spin_j
      dim: 2
      delta_au: 0.003
    bath:
      temperature_au: 0.003
      c_au: 10000.0
      g_au: 1.0
      gamma_au: null
      rate_mode: appendix
    field:
      m: 20
      tau_au: null
      sigma_au: null
      steps_per_period: 200
      penalty: 0.0
    optimizer:
      restarts: 64
      seed: 0
      max_evals: 2000
      time_budget_s: null
      threshold: null
    output:
      dir: out

Omitted keys take the defaults of the preset.  `null` means derived: the
temperature defaults to Delta, tau to 2 pi / Delta, sigma to tau / 8, the
threshold to the preset's value for the task.  `transfer_matrix` holds the
4 x 4 target of the custom_map task.
"""

import logging

import dataclasses

from dataclasses import asdict, dataclass, fields, replace

import yaml

from thermoqc.control import SCHEMES, TASKS, OptimizerConfig
from thermoqc.dissipator import WEIGHT_MODES
from thermoqc.errors import ConfigError
from thermoqc.operators import DEFAULT_DELTA

__all__ = ['ScenarioConfig', 'ModelConfig', 'BathConfig', 'FieldConfig', 'SearchConfig',
           'OutputConfig', 'SPEC_VERSION', 'PRESETS', 'THRESHOLDS', 'load_config',
           'dump_config', 'config_from_dict', 'config_to_dict', 'apply_preset',
           'optimizer_config', 'task_threshold']

logger = logging.getLogger(__name__)

SPEC_VERSION = 1

PRESETS = {
    'desk': {'restarts': 64, 'max_evals': 2000},
    'stretch': {'restarts': 300, 'max_evals': 20000},
}

THRESHOLDS = {
    'desk': {'heat': 1e-4, 'cool': 1e-3, 'reset': 1e-3, 'hadamard': 1e-2,
             'sqrt_swap': 1e-2, 'custom_map': 1e-2},
    'stretch': {'heat': 1e-9, 'cool': 1e-3, 'reset': 1e-9, 'hadamard': 1e-3,
              'sqrt_swap': 1e-3, 'custom_map': 1e-3},
}


@dataclass(frozen=True)
class ModelConfig:
    kind: str = 'spin_j'
    dim: int = 2
    delta_au: float = DEFAULT_DELTA
    u_au: float | None = None
    omega1_au: float | None = None
    omega2_au: float | None = None


@dataclass(frozen=True)
class BathConfig:
    temperature_au: float | None = None
    c_au: float = 1e4
    g_au: float = 1.0
    gamma_au: float | None = None
    rate_mode: str = 'appendix'


@dataclass(frozen=True)
class FieldConfig:
    m: int = 20
    tau_au: float | None = None
    sigma_au: float | None = None
    steps_per_period: int = 200
    penalty: float = 0.0


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 64
    seed: int = 0
    max_evals: int = 2000
    time_budget_s: float | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    dir: str = 'out'


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete, validated configuration."""
    task: str = 'heat'
    scheme: str = 'open'
    preset: str = 'desk'
    spec_version: int = SPEC_VERSION
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    bath: BathConfig = dataclasses.field(default_factory=BathConfig)
    field: FieldConfig = dataclasses.field(default_factory=FieldConfig)
    optimizer: SearchConfig = dataclasses.field(default_factory=SearchConfig)
    output: OutputConfig = dataclasses.field(default_factory=OutputConfig)
    transfer_matrix: tuple | None = None


_SECTIONS = {
    'model': ModelConfig,
    'bath': BathConfig,
    'field': FieldConfig,
    'optimizer': SearchConfig,
    'output': OutputConfig,
}

# (type, lower bound, bound inclusive)
_CHECKS = {
    'model.dim': (int, 2, True),
    'model.delta_au': (float, 0, False),
    'model.u_au': (float, None, None),
    'model.omega1_au': (float, 0, False),
    'model.omega2_au': (float, 0, False),
    'bath.temperature_au': (float, 0, False),
    'bath.c_au': (float, 0, True),
    'bath.g_au': (float, 0, True),
    'bath.gamma_au': (float, 0, False),
    'field.m': (int, 1, True),
    'field.tau_au': (float, 0, False),
    'field.sigma_au': (float, 0, False),
    'field.steps_per_period': (int, 2, True),
    'field.penalty': (float, 0, True),
    'optimizer.restarts': (int, 1, True),
    'optimizer.seed': (int, 0, True),
    'optimizer.max_evals': (int, 1, True),
    'optimizer.time_budget_s': (float, 0, False),
    'optimizer.threshold': (float, 0, False),
    'output.dir': (str, None, None),
    'model.kind': (str, None, None),
    'bath.rate_mode': (str, None, None),
}

_CHOICES = {
    'task': TASKS,
    'scheme': SCHEMES,
    'preset': tuple(PRESETS),
    'model.kind': ('spin_j', 'two_qubit'),
    'bath.rate_mode': WEIGHT_MODES,
}


def _key_lines(text):
    """Map dotted keys to the 1-based line they are defined on."""
    lines = {}

    def walk(node, prefix):
        if not isinstance(node, yaml.MappingNode):
            return
        for key, value in node.value:
            name = f'{prefix}{key.value}'
            lines[name] = key.start_mark.line + 1
            walk(value, f'{name}.')

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, '')
    return lines


def _check_value(name, value, lines):
    kind, lower, inclusive = _CHECKS.get(name, (None, None, None))
    line = lines.get(name)
    if value is None:
        return value

    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f'{name} must be an integer, got {value!r}', field=name, line=line)
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f'{name} must be a number, got {value!r}', field=name, line=line)
        value = float(value)
    elif kind is str and not isinstance(value, str):
        raise ConfigError(f'{name} must be a string, got {value!r}', field=name, line=line)

    if lower is not None and (value < lower or (not inclusive and value == lower)):
        relation = '>=' if inclusive else '>'
        raise ConfigError(f'{name} must be {relation} {lower}, got {value!r}', field=name, line=line)

    if name in _CHOICES and value not in _CHOICES[name]:
        raise ConfigError(f'{name} must be one of {", ".join(_CHOICES[name])}, got {value!r}',
                          field=name, line=line)
    return value


def _section(name, cls, data, lines):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f'{name} must be a mapping', field=name, line=lines.get(name))

    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            dotted = f'{name}.{key}'
            raise ConfigError(f'Unknown key {dotted}', field=dotted, line=lines.get(dotted))

    values = {key: _check_value(f'{name}.{key}', value, lines) for key, value in data.items()}
    return cls(**values)


def _transfer_matrix(value, lines):
    if value is None:
        return None
    line = lines.get('transfer_matrix')
    try:
        rows = tuple(tuple(float(x) for x in row) for row in value)
    except (TypeError, ValueError) as e:
        raise ConfigError('transfer_matrix must be a 4 x 4 list of numbers', field='transfer_matrix', line=line) from e
    if len(rows) != 4 or any(len(row) != 4 for row in rows):
        raise ConfigError('transfer_matrix must be a 4 x 4 list of numbers', field='transfer_matrix', line=line)
    return rows


def config_from_dict(data, lines=None):
    """Validate a parsed mapping and build a ScenarioConfig.

    Raises
    ------
    ConfigError
        On unknown keys, wrong types, out of range values or an unsupported
        `spec_version`.

    """
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError('configuration must be a mapping', line=1)

    top = {f.name for f in fields(ScenarioConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(f'Unknown key {key}', field=key, line=lines.get(key))

    version = data.get('spec_version', SPEC_VERSION)
    if version != SPEC_VERSION:
        raise ConfigError(f'Unsupported spec_version {version!r}, expected {SPEC_VERSION}',
                          field='spec_version', line=lines.get('spec_version'))

    for key in ('task', 'scheme', 'preset'):
        if key in data and data[key] not in _CHOICES[key]:
            raise ConfigError(f'{key} must be one of {", ".join(_CHOICES[key])}, got {data[key]!r}',
                              field=key, line=lines.get(key))

    preset = data.get('preset', 'desk')
    requested = data.get('optimizer') or {}
    if not isinstance(requested, dict):
        raise ConfigError('optimizer must be a mapping', field='optimizer', line=lines.get('optimizer'))
    optimizer = {**PRESETS[preset], **requested}

    sections = {name: _section(name, cls, optimizer if name == 'optimizer' else data.get(name), lines)
                for name, cls in _SECTIONS.items()}

    config = ScenarioConfig(
        task=data.get('task', 'heat'),
        scheme=data.get('scheme', 'open'),
        preset=preset,
        spec_version=version,
        transfer_matrix=_transfer_matrix(data.get('transfer_matrix'), lines),
        **sections,
    )

    if config.task == 'custom_map' and config.transfer_matrix is None:
        raise ConfigError('custom_map needs a transfer_matrix', field='transfer_matrix')
    if config.model.kind == 'two_qubit' and config.model.dim != 4:
        raise ConfigError('two_qubit model has dim 4', field='model.dim', line=lines.get('model.dim'))

    return config


def config_to_dict(config):
    d = asdict(config)
    if config.transfer_matrix is not None:
        d['transfer_matrix'] = [list(row) for row in config.transfer_matrix]
    return d


def load_config(path):
    """Read and validate a YAML configuration file."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f'Cannot read {path}: {e.strerror}') from e

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, 'problem', None) or 'invalid YAML'
        raise ConfigError(f'{path}: {problem}', line=line) from e

    config = config_from_dict(data, _key_lines(text))
    logger.debug(f'loaded {path}: task={config.task} scheme={config.scheme} preset={config.preset}')
    return config


def dump_config(config, path):
    with open(path, 'w') as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)


def apply_preset(config, preset):
    """Switch to another preset, resetting the restart and evaluation budgets."""
    if preset not in PRESETS:
        raise ConfigError(f'Unknown preset {preset!r}', field='preset')
    optimizer = replace(config.optimizer, **PRESETS[preset])
    return replace(config, preset=preset, optimizer=optimizer)


def task_threshold(config):
    """The convergence threshold of the task, from the config or the preset."""
    if config.optimizer.threshold is not None:
        return config.optimizer.threshold
    return THRESHOLDS[config.preset][config.task]


def optimizer_config(config):
    """The OptimizerConfig of the multi-start search."""
    fc, oc = config.field, config.optimizer
    return OptimizerConfig(
        m=fc.m,
        restarts=oc.restarts,
        seed=oc.seed,
        max_evals=oc.max_evals,
        sigma=fc.sigma_au,
        penalty=fc.penalty,
        time_budget=oc.time_budget_s,
    )
