from .config import ChurnEvent, InvalidConfig, ParseError, ScenarioConfig, format_scenario, load_scenario, parse_scenario, save_scenario
from .engine import (
    ATTACK_ALIASES,
    ATTACKS,
    SimulationError,
    collusion_attack_config,
    compare_modes,
    run_scenario,
    withholding_attack_config,
)
from .report import CSV_HEADER, ComparisonReport, MetricsReport, SwitchEvent, write_report

__all__ = [
    "ATTACK_ALIASES", "ATTACKS", "CSV_HEADER", "ChurnEvent", "ComparisonReport", "InvalidConfig", "MetricsReport",
    "ParseError", "ScenarioConfig", "SimulationError", "SwitchEvent", "collusion_attack_config",
    "compare_modes", "format_scenario", "load_scenario", "parse_scenario", "run_scenario",
    "save_scenario", "withholding_attack_config", "write_report",
]
