"""CSV and JSON artifact writers.

CSVs use ',' separators, a header row, LF line endings and 17 significant
digits, so reruns with the same inputs are byte-identical.
"""

import json
import os
from dataclasses import asdict
from datetime import datetime, timezone

import numpy as np
import pandas as pd
import scipy

import src

FLOAT_FORMAT = '%.17g'


def write_csv(rows, path, columns=None):
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f'cannot serialize {type(value).__name__}')


def config_to_dict(config):
    data = asdict(config)
    data['environment']['kind'] = config.environment.kind
    return data


def write_manifest(path, config, **entries):
    """Run manifest: inputs, library versions, seed and whatever the command adds."""
    manifest = {
        'inputs': config_to_dict(config),
        'master_seed': config.master_seed,
        'versions': {
            'package': src.__version__,
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'pandas': pd.__version__,
        },
        'timestamp': datetime.now(timezone.utc).isoformat(),
        **entries,
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write('\n')
    return path
