"""Deterministic file output: fixed float formatting and write-then-move staging."""

import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path

from rest_framework.renderers import JSONRenderer


def fmt(value):
    return format(float(value), '.17g')


def render_json(data):
    return JSONRenderer().render(data, renderer_context={'indent': 2})


@contextmanager
def staged_directory(out_dir):
    """Yield a scratch directory whose entries replace those in ``out_dir`` only on success."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f'.{out.name}-', dir=out.parent))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    out.mkdir(exist_ok=True)
    for item in sorted(scratch.iterdir()):
        target = out / item.name
        if target.is_dir():
            shutil.rmtree(target)
        os.replace(item, target)
    scratch.rmdir()


@contextmanager
def staged_files(*paths):
    """Yield sibling temporary paths (same suffix) that are renamed onto ``paths`` on success."""
    paths = [Path(p) for p in paths]
    for p in paths:
        p.parent.mkdir(parents=True, exist_ok=True)
    partial = [p.with_name(f'.partial-{p.name}') for p in paths]
    try:
        yield partial
    except BaseException:
        for p in partial:
            p.unlink(missing_ok=True)
        raise
    for tmp, final in zip(partial, paths):
        os.replace(tmp, final)
