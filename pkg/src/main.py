import os
import sys
# DON'T CHANGE THIS !!!
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import logging

import click

from src import __version__
from src.routes.figures import figure1
from src.routes.mixing import mixing
from src.routes.simulate import simulate
from src.routes.solve import solve

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


@click.group()
@click.version_option(__version__)
@click.option('-v', '--verbose', count=True, help='-v for INFO, -vv for DEBUG.')
def cli(verbose):
    """Change-detection based controller switching for two-mode MDPs."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)


# Register commands
cli.add_command(solve)
cli.add_command(simulate)
cli.add_command(figure1)
cli.add_command(mixing)


if __name__ == '__main__':
    cli()
