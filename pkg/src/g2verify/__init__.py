"""Verification engine for closed G2-structures given by structure equations."""
from .verify import REPORT_SCHEMA, emit_report, run_verify

__version__ = "0.1.0"
__all__ = ["REPORT_SCHEMA", "emit_report", "run_verify", "__version__"]
