"""User-space model of syscall aggregation through verified bytecode programs.

A program is checked by :mod:`anycall.verifier`, executed by :mod:`anycall.vm`
against the simulated kernel in :mod:`anycall.syskernel`, and its event
counters are priced by :mod:`anycall.costmodel`.
"""
from .assembler import AssemblyError, assemble, disassemble
from .costmodel import CostParams, CostReport, breakeven, model_time, preset, speedup
from .isa import Instruction, Program, decode, encode
from .syskernel import EventCounters, SimKernel, traditional_syscall
from .verifier import Limits, Verdict, explain, verify
from .vm import ExecutionContext, RunResult, invoke_anycall, run

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "assemble", "disassemble",
    "CostParams", "CostReport", "breakeven", "model_time", "preset", "speedup",
    "Instruction", "Program", "decode", "encode",
    "EventCounters", "SimKernel", "traditional_syscall",
    "Limits", "Verdict", "explain", "verify",
    "ExecutionContext", "RunResult", "invoke_anycall", "run",
]
