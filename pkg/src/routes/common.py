"""Options and error handling shared by the commands."""

import functools
import logging
import os

import click

from src.utils.config_validator import load_config
from src.utils.errors import ConfigError, SwitchingError

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 1
EXIT_NUMERICAL_ERROR = 2


def experiment_options(command):
    """--config/--seed/--out/--workers, loaded into an ExperimentConfig passed as `config`."""

    @click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                  help='JSON experiment config.')
    @click.option('--seed', type=int, default=None, help='Master seed (overrides the config).')
    @click.option('--out', 'output_dir', type=click.Path(file_okay=False), default=None,
                  help='Output directory (overrides the config).')
    @click.option('--workers', type=int, default=None, help='Worker processes for simulation.')
    @functools.wraps(command)
    def wrapper(config_path, seed, output_dir, workers, **kwargs):
        try:
            config = load_config(config_path, master_seed=seed, output_dir=output_dir, workers=workers)
            command(config=config, **kwargs)
        except ConfigError as e:
            click.echo(f'config error: {e}', err=True)
            raise SystemExit(EXIT_CONFIG_ERROR)
        except SwitchingError as e:
            click.echo(f'error: {e}', err=True)
            raise SystemExit(EXIT_NUMERICAL_ERROR)

    return wrapper


def output_path(config, name):
    return os.path.join(config.output_dir, name)
