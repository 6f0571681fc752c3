"""External evaluator protocol: delegate genome evaluation to a subprocess.

One evaluation is one line of JSON ``{"genome": [...]}`` written to the child
process's stdin, answered by one line
``{"objectives": [...], "violations": [...], "aux": {...}}`` on its stdout.
A timeout, a malformed reply, or a dead child yields the sentinel-infeasible
evaluation instead of raising, so optimization runs degrade gracefully.
"""

from __future__ import annotations

import json
import select
import shlex
import subprocess

import numpy as np

from .core import SOLVER_FAILURE_VIOLATION, Bounds, Evaluation, ObjectiveSpec


class ExternalProblem:
    """Problem backed by a line-JSON evaluator subprocess.

    The search box, objective count, and optimization directions cannot be
    inferred from the child process and must be declared up front.
    """

    def __init__(self, command, lower, upper, directions=("min",),
                 timeout: float = 10.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.bounds = Bounds(np.asarray(lower, float), np.asarray(upper, float))
        self.objective_spec = ObjectiveSpec(tuple(directions))
        self.timeout = float(timeout)
        self.constraint_names = ["external", "solver"]
        self.violation_scales = np.array([1.0, SOLVER_FAILURE_VIOLATION])
        self._proc: subprocess.Popen | None = None

    def _child(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        return self._proc

    def _sentinel(self) -> Evaluation:
        violations = np.array([0.0, SOLVER_FAILURE_VIOLATION])
        return Evaluation(
            objectives=np.full(self.objective_spec.count, 1.0e6),
            violations=violations,
            aux={"failed": True},
        )

    def _exchange(self, genome) -> str | None:
        try:
            proc = self._child()
            proc.stdin.write(json.dumps({"genome": [float(v) for v in genome]}) + "\n")
            proc.stdin.flush()
            ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
            if not ready:
                proc.kill()
                self._proc = None
                return None
            return proc.stdout.readline()
        except (OSError, ValueError, BrokenPipeError):
            self._proc = None
            return None

    def evaluate(self, genome) -> Evaluation:
        line = self._exchange(genome)
        if not line:
            return self._sentinel()
        try:
            reply = json.loads(line)
            objectives = np.asarray(reply["objectives"], dtype=float)
            if objectives.shape != (self.objective_spec.count,):
                return self._sentinel()
            ext = float(np.sum(np.asarray(reply.get("violations", []), dtype=float)))
            if ext < 0 or not np.all(np.isfinite(objectives)):
                return self._sentinel()
            return Evaluation(
                objectives=self.objective_spec.to_canonical(objectives),
                violations=np.array([ext, 0.0]),
                aux=dict(reply.get("aux", {})),
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError):
            return self._sentinel()

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
        self._proc = None

    def __del__(self):  # pragma: no cover - interpreter-shutdown best effort
        try:
            self.close()
        except Exception:
            pass
