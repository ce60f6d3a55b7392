"""Multi-domain QKD network control-plane simulator."""

import json

from ._qkdnet import (
    QkdnetError,
    RunOutput,
    Scenario,
    default_r0_bps,
    effective_seed,
    fingerprint,
    format_session,
    load_scenario,
    parse_scenario,
    secret_key_rate,
    validate,
)
from . import _qkdnet


def run(scenario, seed=None, model=None):
    """Run a scenario; returns (report dict, trace as JSON lines)."""
    out = _qkdnet.run(scenario, seed, model)
    return json.loads(out.report_json), out.trace_jsonl


def compare(scenario, models=("hierarchical", "distributed"), seed=None):
    a, b = models
    return json.loads(_qkdnet.compare(scenario, a, b, seed))


def summarize_trace(trace_jsonl):
    return json.loads(_qkdnet.summarize_trace(trace_jsonl))


__all__ = [
    "QkdnetError",
    "RunOutput",
    "Scenario",
    "compare",
    "default_r0_bps",
    "effective_seed",
    "fingerprint",
    "format_session",
    "load_scenario",
    "parse_scenario",
    "run",
    "secret_key_rate",
    "summarize_trace",
    "validate",
]
