# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The GLIMPSE Engine Authors
"""Gradient-weighted, layer-adaptive saliency for vision-language model traces."""

import json as _json

from ._glimpse import (
    GlimpseError,
    Trace,
    __version__,
    baseline,
    explain,
    faithfulness,
    load_trace,
    nss,
    paired_sign_test,
    pool_human_map,
    run_cli,
    save_trace,
    settings,
    spearman,
    validate,
)
from . import _glimpse


def _spec_json(spec):
    return spec if isinstance(spec, str) else _json.dumps(spec)


def synth_spec(spec):
    """Full synthetic spec as a dict, with defaults filled in."""
    return _json.loads(_glimpse.synth_spec(_spec_json(spec)))


def synth_trace(spec):
    """Builds a synthetic trace from a spec dict or JSON string."""
    return _glimpse.synth_trace(_spec_json(spec))


def synth_human_map(spec, pixels_per_patch=4):
    """Simulated fixation density for a synthetic spec."""
    return _glimpse.synth_human_map(_spec_json(spec), pixels_per_patch)


__all__ = [
    "GlimpseError",
    "Trace",
    "__version__",
    "baseline",
    "explain",
    "faithfulness",
    "load_trace",
    "nss",
    "paired_sign_test",
    "pool_human_map",
    "run_cli",
    "save_trace",
    "settings",
    "spearman",
    "synth_human_map",
    "synth_spec",
    "synth_trace",
    "validate",
]
