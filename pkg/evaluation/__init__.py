"""
Evaluation: confusion counts, precision/recall/F1, LOPO aggregation,
experiment runners and report files.
"""

from .metrics import AverageScores, ConfusionCounts, FoldMetrics, aggregate_lopo, confusion, prf
from .report import ReportRow, emit_report, merge_reports, print_comparison_table, read_report
from .experiments import BaseExperiment, ExperimentSettings, make_experiment
from .lopo import LopoResult, LopoRunner

__all__ = [
    'AverageScores',
    'ConfusionCounts',
    'FoldMetrics',
    'aggregate_lopo',
    'confusion',
    'prf',
    'ReportRow',
    'emit_report',
    'merge_reports',
    'print_comparison_table',
    'read_report',
    'BaseExperiment',
    'ExperimentSettings',
    'make_experiment',
    'LopoResult',
    'LopoRunner',
]
