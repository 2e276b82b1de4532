"""Scenario ingestion, batch runs, sweeps and CSV reports."""

from .report import COLUMNS, emit_csv, format_csv, format_events
from .runner import ReportRow, ScenarioRunError, recency_share, run, run_point, sweep_points
from .scenario import (
    ParseError,
    ScenarioConfig,
    ScenarioError,
    ValidationError,
    build_ledger,
    config_from_dict,
    config_to_dict,
    dumps_scenario,
    load_scenario,
    loads_scenario,
)
