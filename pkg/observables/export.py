"""
CSV output with a commented YAML metadata header.

Every file starts with ``# ``-prefixed YAML holding the resolved run
configuration and the package version; the data block follows. Files are
written to a temporary name and renamed so readers never see partial data.
"""
import io
import logging
import os
import tempfile
from pathlib import Path

import pandas as pd
import yaml

from core.conf import simulation_setting

logger = logging.getLogger(__name__)

HEADER_PREFIX = '# '


def metadata_header(metadata):
    text = yaml.safe_dump(metadata, sort_keys=True, default_flow_style=False)
    return ''.join(f"{HEADER_PREFIX}{line}\n" for line in text.splitlines())


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(handle, 'w', newline='') as stream:
            stream.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
    return path


def write_csv(frame, path, metadata=None, float_format=None):
    """Write ``frame`` with an optional metadata header; returns the path."""
    buffer = io.StringIO()
    frame.to_csv(
        buffer, index=False, lineterminator='\n',
        float_format=float_format or simulation_setting('CSV_FLOAT_FORMAT'),
    )
    text = (metadata_header(metadata) if metadata else '') + buffer.getvalue()
    atomic_write(path, text)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return Path(path)


def read_header(path):
    """Metadata dict stored in a CSV header (empty if there is none)."""
    lines = []
    with open(path) as stream:
        for line in stream:
            if not line.startswith(HEADER_PREFIX.rstrip()):
                break
            lines.append(line[len(HEADER_PREFIX):] if line.startswith(HEADER_PREFIX) else '\n')
    return yaml.safe_load(''.join(lines)) or {}


def read_csv(path):
    return pd.read_csv(path, comment=HEADER_PREFIX.strip())
