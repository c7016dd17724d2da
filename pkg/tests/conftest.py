from __future__ import annotations

import json

import pytest

from passageguard import Document, EntityKind, EntityType

from support.nli_stub import StubNliServer


def pytest_addoption(parser):
    parser.addoption(
        "--nli-base-url",
        default=None,
        help="run entailment-scorer protocol tests against this live server "
             "instead of the built-in stub",
    )


@pytest.fixture(scope="session")
def nli_base_url(request):
    url = request.config.getoption("--nli-base-url")
    if url:
        yield url.rstrip("/")
        return
    server = StubNliServer().start()
    yield server.base_url
    server.stop()


@pytest.fixture
def schema():
    return [
        EntityType("Hearing Date", EntityKind.STRUCTURED_DATE),
        EntityType("Hearing Type", EntityKind.CATEGORICAL, ("In Person", "Virtual")),
        EntityType("Public Or Private Hearing", EntityKind.CATEGORICAL,
                   ("Public", "Private")),
        EntityType("Judge Name", EntityKind.FREE_TEXT),
        EntityType("Organization", EntityKind.FREE_TEXT),
    ]


@pytest.fixture
def sample_doc():
    return Document(
        doc_id="doc-1",
        text=(
            "IN THE MATTER OF an appeal heard in person on June 19, 2013 at Toronto.  "
            "Presiding: Judge Amara Osei of the Refugee Protection Division. "
            "Date(s) of hearing January 17, 2012."
        ),
    )


def write_jsonl_file(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return str(path)
