"""Phase identification from synchronized voltage phasor measurements."""
from .core import (
    AngleMode,
    BusRecord,
    ChannelSeries,
    MagnitudeMode,
    MagnitudeScale,
    Phase,
    PhaseAssignment,
    PhasorSample,
    ScoredAssignment,
    ScoringConfig,
    SignConvention,
    angular_distance,
    per_unit,
)
from .ingest import AlignmentReport, align_records, parse_phasor_csv, write_phasor_csv
from .scoring import f_inner, f_pearson, g_angle, objective
from .search import IdentificationResult, SweepResult, enumerate_assignments, identify, window_sweep
from .stats import PairStatistics, update_statistics

__version__ = "0.1.0"
