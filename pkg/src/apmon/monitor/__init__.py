"""Runtime monitoring: probes publish on the bus, the CEP evaluates rules,
consumers receive verdicts on dedicated channels."""

from .bus import MonitoringBus, ProbeInstruction
from .cep import ComplexEventProcessor, DetectionVerdict, RuleEvaluator
from .events import EventLogError, EventRecord, dumps_log, format_event, make_event, parse_event, read_log, write_log
from .manager import (Channel, Detection, Manager, detect, dumps_verdicts, format_verdict, loads_verdicts,
                      parse_verdict, replay)
from .report import RunReport, WindowRow, build_report, window_table

__all__ = [
    "Channel", "ComplexEventProcessor", "Detection", "DetectionVerdict", "EventLogError", "EventRecord",
    "Manager", "MonitoringBus", "ProbeInstruction", "RuleEvaluator", "RunReport", "WindowRow",
    "build_report", "detect", "dumps_log", "dumps_verdicts", "format_event", "format_verdict",
    "loads_verdicts", "make_event", "parse_event", "parse_verdict", "read_log", "replay",
    "window_table", "write_log",
]
