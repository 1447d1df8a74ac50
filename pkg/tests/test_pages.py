"""Wiki page rendering, the XML dump, and the stats report."""

import json
from xml.etree import ElementTree

import pytest

from conftest import DATA
from semtex.canonicalize import canonicalize_string
from semtex.errors import DuplicateTitleError, MissingBibEntryError
from semtex.metadata import AnnotationKind, Citation, Formula
from semtex.pages import (
    EXPORT_NS,
    SiteInfo,
    build_symbols_list,
    emit_dump,
    load_bibliography,
    render_page,
    stats_report,
)


@pytest.fixture(scope="module")
def bib():
    return load_bibliography(DATA / "bib.json")


@pytest.fixture(scope="module")
def formulae(mini_extraction):
    return {f.id: f for f in mini_extraction.formulae}


def make_formula(semantic, fid="t", key="KLS", annotations=()):
    return Formula(
        id=fid,
        source_canonical=canonicalize_string("x"),
        source_semantic=semantic,
        citation=Citation(key, fid),
        annotations=list(annotations),
    )


# --------------------------------------------------------------- bibliography


def test_load_bibliography(bib):
    assert set(bib) == {"KLS", "GR"}
    assert bib["KLS"].author.startswith("R. Koekoek")
    assert bib["KLS"].year == "2010"


def test_year_numbers_become_strings(tmp_path):
    p = tmp_path / "b.json"
    p.write_text(json.dumps({"X": {"author": "A", "title": "T", "year": 1999}}))
    assert load_bibliography(p)["X"].year == "1999"


# --------------------------------------------------------------- symbols list


def test_symbols_from_formula_body(glossary):
    f = make_formula(r"\Jacobi{\alpha}{\beta}{n}@{x}=\EulerGamma@{z}")
    names = [s.macro_name for s in build_symbols_list(f, glossary)]
    assert names == ["EulerGamma", "Jacobi"]


def test_symbols_include_annotation_bodies(glossary, formulae):
    # 9.2.5's only macro call sits in a prose-derived constraint
    names = [s.macro_name for s in build_symbols_list(formulae["9.2.5"], glossary)]
    assert "Racah" in names


def test_symbols_require_word_boundary(glossary):
    assert build_symbols_list(make_formula(r"\sinister@@{z}"), glossary) == []
    got = build_symbols_list(make_formula(r"\sin@@{z}"), glossary)
    assert [s.macro_name for s in got] == ["sin"]


def test_symbols_entries_carry_links(glossary):
    (entry,) = build_symbols_list(make_formula(r"\EulerGamma@{z}"), glossary)
    assert entry.definition_link.startswith("http")
    assert entry.rendered_form == r"\EulerGamma@{z}"
    assert entry.description


def test_rows_without_macros_have_empty_lists(glossary, formulae):
    assert build_symbols_list(formulae["9.2.4"], glossary) == []
    assert build_symbols_list(formulae["14.20.4"], glossary) == []


# ----------------------------------------------------------------- page text


def test_page_layout(glossary, formulae, bib):
    page = render_page(formulae["9.8.2"], glossary, bib, corpus_prefix="KLS")
    assert page.title == "Formula:KLS:9.8.2"
    lines = page.wikitext.splitlines()
    assert lines[0] == "''Jacobi orthogonality relation''"
    assert lines[2].startswith("<math>\\EulerGamma@") or "<math>" in lines[2]
    assert "== Constraints ==" in lines
    i = lines.index("== Constraints ==")
    assert lines[i + 1] == ":<math>\\alpha>-1</math>"
    assert lines[i + 2] == ":<math>\\beta>-1</math>"
    assert "== Proof ==" in lines
    assert "integrate the Rodrigues form by parts n times" in lines
    assert "== Symbols List ==" in lines
    assert any(l.startswith("* <math>\\Jacobi") and "definition])" in l for l in lines)
    assert lines[-1] == (
        "Equation (9.8.2) of R. Koekoek, P. A. Lesky, and R. F. Swarttouw, "
        "''Hypergeometric Orthogonal Polynomials and Their q-Analogues'', "
        "Springer-Verlag, 2010."
    )


def test_empty_sections_are_omitted(glossary, formulae, bib):
    page = render_page(formulae["f5"], glossary, bib, corpus_prefix="KLS")
    assert page.wikitext.startswith("<math>")  # no name line
    for heading in ("== Constraints ==", "== Substitutions ==", "== Proof ==", "== Notes =="):
        assert heading not in page.wikitext
    assert "== Bibliography ==" in page.wikitext


def test_substitution_section(glossary, formulae, bib):
    page = render_page(formulae["9.8.5"], glossary, bib, corpus_prefix="KLS")
    assert ":<math>R=\\sqrt{1-2xt+t^2}</math>" in page.wikitext.splitlines()


def test_missing_bib_entry(glossary, formulae, bib):
    with pytest.raises(MissingBibEntryError):
        render_page(make_formula("x", key="nope"), glossary, bib, "KLS")


# ------------------------------------------------------------------ XML dump


def pages_of(glossary, formulae, bib, ids):
    return [render_page(formulae[i], glossary, bib, "KLS") for i in ids]


def test_dump_is_wellformed_and_ordered(glossary, formulae, bib):
    pages = pages_of(glossary, formulae, bib, ["1.1.1", "1.1.2", "9.8.2"])
    xml = emit_dump(pages)
    root = ElementTree.fromstring(xml)
    assert root.tag == f"{{{EXPORT_NS}}}mediawiki"
    got = root.findall(f"{{{EXPORT_NS}}}page")
    assert len(got) == 3
    titles = [p.findtext(f"{{{EXPORT_NS}}}title") for p in got]
    assert titles == ["Formula:KLS:1.1.1", "Formula:KLS:1.1.2", "Formula:KLS:9.8.2"]
    ids = [p.findtext(f"{{{EXPORT_NS}}}id") for p in got]
    assert ids == ["1", "2", "3"]


def test_dump_escapes_wikitext(glossary, formulae, bib):
    pages = pages_of(glossary, formulae, bib, ["1.1.1"])
    xml = emit_dump(pages)
    assert "&lt;math&gt;" in xml
    assert 'xml:space="preserve"' in xml
    root = ElementTree.fromstring(xml)
    text = root.find(f"{{{EXPORT_NS}}}page/{{{EXPORT_NS}}}revision/{{{EXPORT_NS}}}text")
    assert text.text == pages[0].wikitext  # escaping round-trips


def test_dump_is_deterministic(glossary, formulae, bib):
    pages = pages_of(glossary, formulae, bib, ["1.1.1", "9.8.2"])
    assert emit_dump(pages) == emit_dump(pages)


def test_dump_header_fields(glossary, formulae, bib):
    xml = emit_dump(pages_of(glossary, formulae, bib, ["1.1.1"]), SiteInfo(sitename="X&Y"))
    root = ElementTree.fromstring(xml)
    si = root.find(f"{{{EXPORT_NS}}}siteinfo")
    assert si.findtext(f"{{{EXPORT_NS}}}sitename") == "X&Y"
    assert root.get("version") == "0.10"


def test_duplicate_titles_rejected(glossary, formulae, bib):
    page = pages_of(glossary, formulae, bib, ["1.1.1"])[0]
    with pytest.raises(DuplicateTitleError):
        emit_dump([page, page])


# ------------------------------------------------------------------- reports


def test_stats_report_shape(glossary, mini_extraction):
    res = mini_extraction
    text = stats_report(res.stats, res.formulae, res.defs, glossary, res.failures)
    lines = text.splitlines()
    assert lines[0] == "pages: 28"
    assert "formulae: 30" in lines
    assert "replacements: 55" in lines
    assert "substitution definitions (removed from page list): 2" in lines
    assert "formulae with substitution annotations: 5" in lines
    assert "non-empty symbols lists: 26/28 (92.9%)" in lines
    idx = lines.index("per-rule replacement counts:")
    per = lines[idx + 1 : idx + 10]
    assert per == sorted(per)
    assert "  qPochhammer: 18" in per
    assert lines[-1] == "failures: 0"


def test_stats_report_lists_failures(glossary, mini_extraction):
    res = mini_extraction
    text = stats_report(res.stats, res.formulae, res.defs, glossary, [("e.2", "boom")])
    assert text.splitlines()[-2:] == ["failures: 1", "  e.2: boom"]
