from pathlib import Path

import pytest

from semtex import builtin_glossary

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def glossary():
    return builtin_glossary()


@pytest.fixture(scope="session")
def mini_source():
    return (DATA / "kls_mini.tex").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def mini_extraction(glossary, mini_source):
    from semtex.metadata import extract_document

    return extract_document(mini_source, glossary, citation_key="KLS")
