"""Batch front end: configuration, CSV ingestion, pipeline runs and output files."""

from .config import (OUTPUT_DIR_ENV, CovariateSchema, DataSchema, ExternalConfig, RunConfig,
                     load_run_config)
from .ingest import IngestResult, ValidationReport, ingest_csv
from .outputs import read_curve_file, write_curve_file, write_manifest, write_tate_table
from .pipeline_runner import (PipelineResult, diagnose_ph, emulate_command,
                              load_samples, load_trial, run_pipeline)

__all__ = [
    'OUTPUT_DIR_ENV',
    'CovariateSchema',
    'DataSchema',
    'ExternalConfig',
    'RunConfig',
    'load_run_config',
    'IngestResult',
    'ValidationReport',
    'ingest_csv',
    'read_curve_file',
    'write_curve_file',
    'write_manifest',
    'write_tate_table',
    'PipelineResult',
    'diagnose_ph',
    'emulate_command',
    'load_samples',
    'load_trial',
    'run_pipeline',
]
