# thermopepo/config.py
import os
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from dotenv import load_dotenv, dotenv_values

from thermopepo.exceptions import ConfigError

# Load environment variables from a .env file for local development
load_dotenv()

CONFIG_VERSION = 1

# scan grids used when a run document leaves MU_GRID or TEMPERATURES out
DEFAULT_MU_GRID = tuple(float(np.round(-5 + 0.25 * i, 12)) for i in range(41))
DEFAULT_TEMPERATURES = (0.05, 0.5, 1.0, 1.5, 2.0)


class Config:
    """Package-wide numerical defaults, overridable from the environment."""
    # --- Evolution ---
    DELTA_BETA = float(os.getenv('DELTA_BETA', 1e-4))
    SVD_CUTOFF = float(os.getenv('SVD_CUTOFF', 1e-10))
    LAMBDA_FLOOR = float(os.getenv('LAMBDA_FLOOR', 1e-12))
    HERMITICITY_WARN = float(os.getenv('HERMITICITY_WARN', 1e-6))

    # --- Models ---
    H_PIN = float(os.getenv('H_PIN', 1e-6))

    # --- CTM ---
    CTM_TOL = float(os.getenv('CTM_TOL', 1e-8))
    CTM_MAX_ITERS = int(os.getenv('CTM_MAX_ITERS', 500))
    CHI_D2 = int(os.getenv('CHI_D2', 20))
    CHI_D3 = int(os.getenv('CHI_D3', 30))

    # --- Driver ---
    WORKERS = int(os.getenv('WORKERS', 1))
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

    def default_chi(self, bond_dim: int) -> int:
        return self.CHI_D2 if bond_dim <= 2 else self.CHI_D3

config = Config()


@dataclass(frozen=True)
class RunConfig:
    """One run document: model, truncation parameters, schedule and outputs."""
    model: str = 'ising'
    J: float = 1.0
    mu: float = 0.0
    U: float = 100.0
    h_pin: float = config.H_PIN
    bond_dim: int = 2
    chi: int = config.CHI_D2
    delta_beta: float = config.DELTA_BETA
    beta_max: float = 1.0
    checkpoints: tuple[float, ...] = ()
    temperatures: Optional[tuple[float, ...]] = None
    mu_grid: Optional[tuple[float, ...]] = None
    ctm_tol: float = config.CTM_TOL
    ctm_max_iters: int = config.CTM_MAX_ITERS
    svd_cutoff: float = config.SVD_CUTOFF
    lambda_floor: float = config.LAMBDA_FLOOR
    output: Optional[str] = None
    snapshot_dir: Optional[str] = None
    workers: int = config.WORKERS
    seed: Optional[int] = None
    version: int = CONFIG_VERSION

    @property
    def model_params(self) -> dict:
        if self.model == 'ising':
            return {'h_pin': self.h_pin}
        if self.model == 'hardcore':
            return {'J': self.J, 'mu': self.mu}
        return {'J': self.J, 'mu': self.mu, 'U': self.U}

    def with_mu(self, mu: float) -> "RunConfig":
        return replace(self, mu=float(mu))

    def validate(self, lines: Optional[dict] = None) -> "RunConfig":
        lines = lines or {}

        def fail(message, key):
            raise ConfigError(message, line=lines.get(key), field=key)

        if self.version != CONFIG_VERSION:
            fail(f"unsupported config version {self.version}", 'CONFIG_VERSION')
        if self.model not in ('ising', 'hardcore', 'softcore'):
            fail(f"unknown model {self.model!r}", 'MODEL')
        for key, value in (('BOND_DIM', self.bond_dim), ('CHI', self.chi),
                           ('CTM_MAX_ITERS', self.ctm_max_iters), ('WORKERS', self.workers)):
            if value < 1:
                fail(f"must be >= 1, got {value}", key)
        for key, value in (('DELTA_BETA', self.delta_beta), ('BETA_MAX', self.beta_max),
                           ('CTM_TOL', self.ctm_tol)):
            if not value > 0:
                fail(f"must be positive, got {value}", key)
        if self.delta_beta >= self.beta_max:
            fail(f"DELTA_BETA ({self.delta_beta}) must be smaller than BETA_MAX ({self.beta_max})", 'DELTA_BETA')
        if list(self.checkpoints) != sorted(self.checkpoints):
            fail("checkpoints must be ascending", 'CHECKPOINTS')
        if any(b <= 0 or b > self.beta_max * (1 + 1e-12) for b in self.checkpoints):
            fail(f"checkpoints must lie in (0, {self.beta_max}]", 'CHECKPOINTS')
        if any(t <= 0 for t in self.temperatures or ()):
            fail("temperatures must be positive", 'TEMPERATURES')
        return self


# key in the document -> (RunConfig attribute, parser)
def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in text.split(',') if item.strip())


def _grid(text: str) -> tuple[float, ...]:
    if ':' in text:
        start, stop, step = (float(x) for x in text.split(':'))
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(np.round(start + i * step, 12)) for i in range(count))
    return _float_list(text)


def _optional_int(text: str) -> Optional[int]:
    return int(text) if text.strip() else None


SCHEMA = {
    'CONFIG_VERSION': ('version', int),
    'MODEL': ('model', lambda s: s.strip().lower()),
    'J': ('J', float),
    'MU': ('mu', float),
    'U': ('U', float),
    'H_PIN': ('h_pin', float),
    'BOND_DIM': ('bond_dim', int),
    'CHI': ('chi', int),
    'DELTA_BETA': ('delta_beta', float),
    'BETA_MAX': ('beta_max', float),
    'CHECKPOINTS': ('checkpoints', _float_list),
    'TEMPERATURES': ('temperatures', _float_list),
    'MU_GRID': ('mu_grid', _grid),
    'CTM_TOL': ('ctm_tol', float),
    'CTM_MAX_ITERS': ('ctm_max_iters', int),
    'SVD_CUTOFF': ('svd_cutoff', float),
    'LAMBDA_FLOOR': ('lambda_floor', float),
    'OUTPUT': ('output', str),
    'SNAPSHOT_DIR': ('snapshot_dir', str),
    'WORKERS': ('workers', int),
    'SEED': ('seed', _optional_int),
}


def _key_lines(path: Path) -> dict:
    """Maps each key to the line it is defined on, rejecting lines that are not KEY=VALUE."""
    lines = {}
    for number, raw in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        text = raw.strip()
        if not text or text.startswith('#'):
            continue
        if text.startswith('export '):
            text = text[len('export '):]
        if '=' not in text:
            raise ConfigError(f"expected KEY=VALUE, got {raw!r}", line=number)
        key = text.split('=', 1)[0].strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=number, field=key)
        lines[key] = number
    return lines


def parse_run_config(values: dict, lines: Optional[dict] = None) -> RunConfig:
    lines = lines or {}
    kwargs = {}
    for key, raw in values.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=lines.get(key), field=key)
        attribute, parser = SCHEMA[key]
        if raw is None:
            raise ConfigError("missing value", line=lines.get(key), field=key)
        try:
            kwargs[attribute] = parser(raw)
        except ValueError as e:
            raise ConfigError(f"cannot parse {raw!r}: {e}", line=lines.get(key), field=key) from None

    if 'chi' not in kwargs:
        kwargs['chi'] = config.default_chi(kwargs.get('bond_dim', 2))
    if 'beta_max' not in kwargs:
        if kwargs.get('checkpoints'):
            kwargs['beta_max'] = max(kwargs['checkpoints'])
        elif kwargs.get('temperatures'):
            kwargs['beta_max'] = 1.0 / min(kwargs['temperatures'])
    return RunConfig(**kwargs).validate(lines)


def load_run_config(path: str | Path) -> RunConfig:
    """Reads and validates a versioned KEY=VALUE run document."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    lines = _key_lines(path)
    values = dotenv_values(path)
    run_config = parse_run_config(dict(values), lines)
    logging.info(f"Loaded run config from {path}: model={run_config.model}, D={run_config.bond_dim}, "
                 f"chi={run_config.chi}, delta_beta={run_config.delta_beta}")
    return run_config
