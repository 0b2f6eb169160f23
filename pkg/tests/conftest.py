from __future__ import annotations

import io
from pathlib import Path

import pytest

from od3d import synth
from od3d.model import LogReader, build_registry

from helpers import HAND_LINES, HAND_REGISTRY


@pytest.fixture
def hand_registry():
    return build_registry(HAND_REGISTRY)


@pytest.fixture
def hand_records():
    return list(LogReader(HAND_LINES))


@pytest.fixture
def hand_files(tmp_path: Path):
    logs = tmp_path / "hand.csv"
    logs.write_text("\n".join(HAND_LINES) + "\n", encoding="utf-8")
    reg = tmp_path / "registry.csv"
    reg.write_text(
        "ic_id,name,longitude,latitude\n"
        + "".join(f"{e.ic_id},{e.name},{e.longitude},{e.latitude}\n" for e in HAND_REGISTRY),
        encoding="utf-8",
    )
    return logs, reg


@pytest.fixture(scope="session")
def desk_corpus():
    """The default desk-scale corpus: 200 ICs, two years, ~100k records."""
    config = synth.GeneratorConfig()
    buf = io.StringIO()
    result = synth.generate(config, buf)
    registry = build_registry(synth.make_registry(config.n_ics, config.seed))
    return config, buf.getvalue(), result, registry


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE: list[tuple[str, str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _ACCEPTANCE.append((marker.args[0], marker.args[1], rep.outcome.upper(), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, text, outcome, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0][1:])):
        status = "PASS" if outcome == "PASSED" else "FAIL"
        line = f"{cid:>4} {status}  {text}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
