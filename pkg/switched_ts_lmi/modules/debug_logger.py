"""
Debug logging utilities for synthesis, solver and certification diagnostics.
"""

from dataclasses import dataclass
from typing import Hashable, List, Optional, Set


@dataclass
class SolveEvent:
    stage: str
    status: str
    detail: str
    elapsed: float


@dataclass
class CheckEvent:
    check: str
    passed: bool
    worst: float
    tolerance: float
    where: str


class DebugLogger:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.events: List[SolveEvent] = []
        self.checks: List[CheckEvent] = []
        self.warnings: List[str] = []
        self.gates: List[str] = []
        self._warned: Set[Hashable] = set()

    def log(self, ev: SolveEvent):
        if self.enabled:
            self.events.append(ev)

    def log_check(self, ev: CheckEvent):
        if self.enabled:
            self.checks.append(ev)

    def warn(self, msg: str, key: Optional[Hashable] = None):
        """Record a warning once per key (the message itself when no key is given)."""
        key = msg if key is None else key
        if not self.enabled or key in self._warned:
            return
        self._warned.add(key)
        self.warnings.append(msg)

    def gate(self, msg: str):
        if self.enabled:
            self.gates.append(msg)

    def print_summary(self):
        if not self.enabled:
            return
        print("  [debug] solver stages:")
        for ev in self.events:
            print(f"    ✓ {ev.stage}: {ev.status} ({ev.detail}, {ev.elapsed:.2f}s)")
        if self.checks:
            print("  [debug] checks:")
            for ev in self.checks:
                mark = "✓" if ev.passed else "✗"
                print(f"    {mark} {ev.check}: worst={ev.worst:.3e} tol={ev.tolerance:.1e} at {ev.where}")
        if self.warnings:
            print("  [debug] warnings:")
            for w in self.warnings[:20]:
                print(f"    ~ {w}")
            if len(self.warnings) > 20:
                print(f"    ~ … {len(self.warnings) - 20} more")
        if self.gates:
            print("  [debug] gates:")
            for g in self.gates:
                print(f"    • {g}")
