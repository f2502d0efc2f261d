from __future__ import annotations

import random
from pathlib import Path

import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_text():
    def read(name: str) -> str:
        return (FIXTURES / f"{name}.mstan").read_text(encoding="utf-8")

    return read


@pytest.fixture(scope="session")
def normal_program(fixture_text):
    from modstan.parser import parse
    from modstan.program import ModularProgram

    return ModularProgram(parse(fixture_text("normal")))


@pytest.fixture(scope="session")
def golf_program(fixture_text):
    from modstan.parser import parse
    from modstan.program import ModularProgram

    return ModularProgram(parse(fixture_text("golf")))


@pytest.fixture(scope="session")
def birthday_program(fixture_text):
    from modstan.parser import parse
    from modstan.program import ModularProgram

    return ModularProgram(parse(fixture_text("birthday")))


def random_program_source(
    rng: random.Random,
    max_holes: int = 5,
    max_impls: int = 3,
    with_statements: bool = False,
) -> str:
    """A random valid program: bounded DAG of holes, each implementation a
    single integer return or a sum of calls to at most two later holes.
    With `with_statements`, implementations may also carry one density
    increment before the return (statement-preservation oracles count them)."""
    n = rng.randint(1, max_holes)
    holes = [f"H{i}" for i in range(n)]
    weights = [1, 2, 2, 3, 3][: max_impls + 2]
    impl_counts = [rng.choice(weights) for _ in range(n)]
    lines = ["data {", "  int N;", "}", "model {"]
    base_refs = sorted(rng.sample(range(n), rng.randint(1, n)))
    call = " + ".join(f"H{i}()" for i in base_refs)
    lines.append(f"  target += {call};")
    lines.append("}")
    for i, hole in enumerate(holes):
        for k in range(impl_counts[i]):
            later = list(range(i + 1, n))
            children = rng.sample(later, min(len(later), rng.randint(0, 2)))
            if children and rng.random() < 0.7:
                body = " + ".join(f"H{j}()" for j in children)
            else:
                body = str(rng.randint(0, 9))
            lines.append(f'module "i{k}" {hole}() {{')
            if with_statements and rng.random() < 0.5:
                lines.append(f"  target += {rng.randint(10, 99)};")
            lines.append(f"  return {body};")
            lines.append("}")
    return "\n".join(lines) + "\n"


def chain_source(depth: int) -> str:
    """Tall-chain shape: hole k has `stop` and `go`, go reaches hole k+1."""
    parts = ["data {\n  int N;\n}\nmodel {\n  target += Step1();\n}\n"]
    for k in range(1, depth + 1):
        parts.append(f'module "stop" Step{k}() {{\n  return 0;\n}}\n')
        if k < depth:
            parts.append(f'module "go" Step{k}() {{\n  return Step{k + 1}() + 1;\n}}\n')
        else:
            parts.append(f'module "go" Step{k}() {{\n  return 1;\n}}\n')
    return "".join(parts)
