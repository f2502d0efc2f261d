"""Greedy search over the model network with a pluggable, cached scorer.

The loop scores the current selection, then all of its neighbors, then moves
to the highest-scoring selection seen so far; it returns when that is the
current one. Jumps to non-adjacent but previously seen selections are
deliberate (the best seen so far wins, wherever it was seen). Scores are
cached by canonical selection string so no selection is ever scored twice.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence


class Navigator(Protocol):
    """Minimal view of the model network used by the search."""

    def neighbors(self, sel) -> Sequence: ...

    def concretize_text(self, sel) -> str: ...


class ScorerError(Exception):
    pass


class Scorer:
    """Caches scores by canonical selection string; higher is better."""

    def __init__(self, fn: Callable[[object, str], float], name: str = "scorer"):
        self._fn = fn
        self.name = name
        self.cache: dict[str, float] = {}
        self.invocations = 0

    def score(self, sel, nav: Navigator) -> float:
        key = sel.canonical()
        if key in self.cache:
            return self.cache[key]
        self.invocations += 1
        value = self._fn(sel, nav.concretize_text(sel))
        self.cache[key] = value
        return value


def mock_scorer(fn: Callable[[object, str], float], name: str = "mock") -> Scorer:
    return Scorer(fn, name)


def parameter_count_scorer() -> Scorer:
    """Scores a selection by the number of parameter declarations it induces."""

    def fn(_sel, text: str) -> float:
        count = 0
        in_params = False
        for line in text.splitlines():
            stripped = line.strip()
            if stripped.startswith("parameters {"):
                in_params = True
                continue
            if in_params and stripped == "}":
                in_params = False
                continue
            if in_params and stripped.endswith(";"):
                count += 1
        return float(count)

    return Scorer(fn, "parameter-count")


def external_scorer(command_template: str, timeout: Optional[float] = None) -> Scorer:
    """Runs `command_template` with `{file}` replaced by a temp file holding
    the concrete program, and parses one real number from stdout."""

    def fn(_sel, text: str) -> float:
        with tempfile.NamedTemporaryFile("w", suffix=".stan", delete=False) as f:
            f.write(text)
            path = f.name
        try:
            if "{file}" in command_template:
                cmd = command_template.replace("{file}", shlex.quote(path))
            else:
                cmd = f"{command_template} {shlex.quote(path)}"
            proc = subprocess.run(
                cmd, shell=True, capture_output=True, text=True, timeout=timeout
            )
            if proc.returncode != 0:
                raise ScorerError(
                    f"scorer command failed with exit {proc.returncode}: {proc.stderr.strip()}"
                )
            for token in reversed(proc.stdout.split()):
                try:
                    return float(token)
                except ValueError:
                    continue
            raise ScorerError(f"scorer printed no number: {proc.stdout!r}")
        finally:
            Path(path).unlink(missing_ok=True)

    return Scorer(fn, command_template)


@dataclass
class SearchTrace:
    visited: list[tuple[str, float]] = field(default_factory=list)
    path: list[str] = field(default_factory=list)
    evaluations: int = 0
    result: Optional[object] = None
    result_score: float = float("-inf")
    aborted: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "visited": [{"selection": k, "score": v} for k, v in self.visited],
            "path": list(self.path),
            "evaluations": self.evaluations,
            "result": self.result.canonical() if self.result is not None else None,
            "resultScore": self.result_score,
            "aborted": self.aborted,
        }


def greedy_search(nav: Navigator, start, scorer: Scorer) -> SearchTrace:
    trace = SearchTrace()
    seen_best = None
    seen_best_score = float("-inf")

    def record(sel) -> float:
        nonlocal seen_best, seen_best_score
        before = scorer.invocations
        value = scorer.score(sel, nav)
        if scorer.invocations > before:
            trace.visited.append((sel.canonical(), value))
        key = sel.canonical()
        if value > seen_best_score or (value == seen_best_score and seen_best is not None and key < seen_best.canonical()):
            seen_best, seen_best_score = sel, value
        return value

    current = start
    try:
        current_score = record(current)
    except ScorerError as e:
        trace.aborted = str(e)
        return trace
    trace.path.append(current.canonical())
    while True:
        try:
            for n in nav.neighbors(current):
                record(n)
        except ScorerError as e:
            trace.aborted = str(e)
            break
        # ties keep the current model, so every move strictly improves
        if seen_best_score <= current_score:
            break
        current, current_score = seen_best, seen_best_score
        trace.path.append(current.canonical())
    trace.evaluations = scorer.invocations
    trace.result = current
    trace.result_score = current_score
    return trace
