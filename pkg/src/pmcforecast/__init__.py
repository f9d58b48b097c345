"""Online forecasting of regular-expression patterns over symbolic event streams."""

from .automata import Dfa, compile_pattern, determinize, disambiguate
from .engine import Engine, EngineConfig, EngineOutput, Event, create_engine
from .forecast import ForecastInterval, ForecastTable, best_interval, build_forecast_table
from .metrics import MetricsReport, report
from .pattern import Alphabet, parse_pattern
from .pmc import Pmc, estimate_matrix, load_model, save_model, waiting_time, waiting_times, warm_up
from .synthgen import GeneratorSpec, generate, generate_partitioned

__all__ = [
    "Alphabet", "Dfa", "Engine", "EngineConfig", "EngineOutput", "Event",
    "ForecastInterval", "ForecastTable", "GeneratorSpec", "MetricsReport", "Pmc",
    "best_interval", "build_forecast_table", "compile_pattern", "create_engine",
    "determinize", "disambiguate", "estimate_matrix", "generate", "generate_partitioned",
    "load_model", "parse_pattern", "report", "save_model", "waiting_time",
    "waiting_times", "warm_up",
]
__version__ = "0.1.0"
