import json
from dataclasses import MISSING, fields

import numpy as np

from src.models.config import CustomKernelSpec, ExperimentConfig, InventorySpec, RandomMdpSpec, SolverSettings
from src.models.mdp import ROW_SUM_TOL
from src.utils.errors import ConfigError

ENVIRONMENT_KINDS = {spec.kind: spec for spec in (RandomMdpSpec, InventorySpec, CustomKernelSpec)}
TOP_LEVEL_KEYS = {f.name for f in fields(ExperimentConfig)}
SOLVER_KEYS = {f.name for f in fields(SolverSettings)}


def _field_names(spec_cls):
    return {f.name for f in fields(spec_cls)}


def _required_names(spec_cls):
    return {f.name for f in fields(spec_cls) if f.default is MISSING and f.default_factory is MISSING}


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _invalid(message):
    return {'valid': False, 'message': message}


def validate_config_format(data):
    """Shape of the config document: known keys only, environment kind present"""
    if not isinstance(data, dict):
        return _invalid('config must be a JSON object')

    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        return _invalid(f'unknown keys: {", ".join(sorted(unknown))}')

    environment = data.get('environment')
    if not isinstance(environment, dict):
        return _invalid('environment section is required')

    kind = environment.get('kind')
    if kind not in ENVIRONMENT_KINDS:
        return _invalid(f'environment kind must be one of {", ".join(sorted(ENVIRONMENT_KINDS))}')

    spec_cls = ENVIRONMENT_KINDS[kind]
    unknown = set(environment) - _field_names(spec_cls) - {'kind'}
    if unknown:
        return _invalid(f'unknown {kind} keys: {", ".join(sorted(unknown))}')
    missing = _required_names(spec_cls) - set(environment)
    if missing:
        return _invalid(f'missing {kind} keys: {", ".join(sorted(missing))}')

    solver = data.get('solver', {})
    if not isinstance(solver, dict):
        return _invalid('solver section must be an object')
    unknown = set(solver) - SOLVER_KEYS
    if unknown:
        return _invalid(f'unknown solver keys: {", ".join(sorted(unknown))}')

    return {'valid': True, 'message': 'format ok'}


def _check_probability_rate(name, value):
    if not _is_number(value) or not 0 < value < 1:
        return f'{name} must lie in (0, 1)'
    return None


def _kernel_errors(name, kernel):
    errors = []
    if np.any(kernel < 0):
        errors.append(f'{name} has negative entries')
    if np.max(np.abs(kernel.sum(axis=-1) - 1.0), initial=0.0) > ROW_SUM_TOL:
        errors.append(f'{name} rows must sum to 1')
    return errors


def _environment_errors(environment):
    kind = environment['kind']
    errors = []
    for name in ('rho', 'discount'):
        if name in environment:
            errors.append(_check_probability_rate(name, environment[name]))

    if kind == RandomMdpSpec.kind:
        for name in ('n_states', 'n_actions'):
            value = environment.get(name, 1)
            if not _is_int(value) or value < 1:
                errors.append(f'{name} must be a positive integer')
        seed = environment.get('seed', 0)
        if not _is_int(seed) or seed < 0:
            errors.append('seed must be a nonnegative integer')

    elif kind == InventorySpec.kind:
        capacity = environment.get('capacity', 1)
        if not _is_int(capacity) or capacity < 1:
            errors.append('capacity must be a positive integer')
        for name in ('order_cost', 'holding_cost', 'lost_demand_cost'):
            value = environment.get(name, 0)
            if not _is_number(value) or value < 0:
                errors.append(f'{name} must be nonnegative')
        rate = environment.get('demand_rate', 1)
        if not _is_number(rate) or rate <= 0:
            errors.append('demand_rate must be positive')
        if 'demand_tail_eps' in environment:
            errors.append(_check_probability_rate('demand_tail_eps', environment['demand_tail_eps']))
        if environment.get('order_cost_basis', 'state') not in ('state', 'order'):
            errors.append("order_cost_basis must be 'state' or 'order'")

    else:
        try:
            pre = np.asarray(environment['kernel_pre'], dtype=float)
            post = np.asarray(environment['kernel_post'], dtype=float)
            cost = np.asarray(environment['stage_cost'], dtype=float)
            raw_post = environment.get('stage_cost_post')
            cost_post = cost if raw_post is None else np.asarray(raw_post, dtype=float)
        except (TypeError, ValueError):
            return ['custom kernels and costs must be numeric nested lists']
        if pre.ndim != 3 or pre.shape != post.shape or pre.shape[2] != pre.shape[0]:
            errors.append('kernel_pre and kernel_post must be equally shaped [x][u][x_next] arrays')
        else:
            errors.extend(_kernel_errors('kernel_pre', pre))
            errors.extend(_kernel_errors('kernel_post', post))
            for name, array in (('stage_cost', cost), ('stage_cost_post', cost_post)):
                if array.shape != pre.shape[:2]:
                    errors.append(f'{name} must be shaped [x][u]')

    return [error for error in errors if error]


def validate_config_ranges(data):
    """Numeric ranges of every field; assumes the format check passed"""
    errors = _environment_errors(data['environment'])

    if data.get('n_episodes', 1) == 0:
        return _invalid('no episodes requested')

    for name in ('grid_size', 'horizon'):
        value = data.get(name)
        if value is not None and (not _is_int(value) or value < (2 if name == 'grid_size' else 1)):
            errors.append(f'{name} is out of range')
    for name in ('n_episodes', 'workers', 'mixing_t_max'):
        value = data.get(name, 1)
        if not _is_int(value) or value < 1:
            errors.append(f'{name} must be a positive integer')
    seed = data.get('master_seed', 0)
    if not _is_int(seed) or seed < 0:
        errors.append('master_seed must be a nonnegative integer')

    sweep = data.get('rho_sweep')
    if sweep is not None:
        if not isinstance(sweep, list) or not sweep:
            errors.append('rho_sweep must be a nonempty list')
        else:
            errors.extend(filter(None, (_check_probability_rate('rho_sweep entry', rho) for rho in sweep)))

    initial = data.get('initial_distribution')
    if initial is not None:
        mu = np.asarray(initial, dtype=float)
        if mu.ndim != 1 or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
            errors.append('initial_distribution must be a probability vector')

    for name, value in data.get('solver', {}).items():
        if name.endswith('_tol') and (not _is_number(value) or value <= 0):
            errors.append(f'{name} must be positive')
        if name.endswith('_max_iter') and (not _is_int(value) or value < 1):
            errors.append(f'{name} must be a positive integer')

    if errors:
        return _invalid('; '.join(errors))
    return {'valid': True, 'message': 'ranges ok'}


def validate_config_complete(data):
    """
    Full validation of a config document
    1. Format and known keys
    2. Numeric ranges
    """
    result = validate_config_format(data)
    if not result['valid']:
        return result

    result = validate_config_ranges(data)
    if not result['valid']:
        return result

    return {
        'valid': True,
        'message': 'config valid'
    }


def build_config(data):
    environment = dict(data['environment'])
    spec_cls = ENVIRONMENT_KINDS[environment.pop('kind')]
    top = {key: value for key, value in data.items() if key not in ('environment', 'solver')}
    return ExperimentConfig(
        environment=spec_cls(**environment),
        solver=SolverSettings(**data.get('solver', {})),
        **top,
    )


def load_config(path, **overrides):
    """Read, override and validate a JSON config; raises ConfigError when invalid."""
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f'cannot read config {path}: {e}') from e

    if isinstance(data, dict):
        data.update({key: value for key, value in overrides.items() if value is not None})

    result = validate_config_complete(data)
    if not result['valid']:
        raise ConfigError(result['message'])
    return build_config(data)
