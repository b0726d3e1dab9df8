from __future__ import annotations

import pytest

from logconformal.ingest import LogRecord


def make_record(line_id: int, tokens) -> LogRecord:
    return LogRecord(line_id=line_id, headers={}, content=" ".join(tokens),
                     tokens=tuple(tokens))


@pytest.fixture
def record_factory():
    return make_record
