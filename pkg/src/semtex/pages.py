"""Formula home pages: wikitext rendering and the MediaWiki XML dump.

Every Formula becomes one wiki page whose sections mirror its annotation
kinds; pages are serialized into a deterministic export file suitable
for bulk import.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

from .engine import ReplacementStats
from .errors import DuplicateTitleError, MissingBibEntryError
from .glossary import Glossary, MacroRule
from .metadata import Annotation, AnnotationKind, Formula, SubstitutionDef

EXPORT_NS = "http://www.mediawiki.org/xml/export-0.10/"
EXPORT_SCHEMA = "http://www.mediawiki.org/xml/export-0.10.xsd"


@dataclass(frozen=True)
class SymbolsListEntry:
    macro_name: str
    rendered_form: str
    definition_link: str
    description: str


@dataclass(frozen=True)
class FormulaPage:
    title: str
    wikitext: str
    formula_id: str


@dataclass(frozen=True)
class BibEntry:
    key: str
    author: str
    title: str
    publisher: str = ""
    year: str = ""


@dataclass(frozen=True)
class SiteInfo:
    """Fixed dump header fields; pinned so dumps are byte-identical."""

    sitename: str = "DRMF"
    dbname: str = "drmf"
    base: str = "http://drmf.wmflabs.org/wiki/Main_Page"
    generator: str = "semtex"
    case: str = "first-letter"
    lang: str = "en"
    timestamp: str = "2010-01-01T00:00:00Z"
    contributor: str = "SeedBot"
    comment: str = "seeded formula home page"


def load_bibliography(path: str | Path) -> dict[str, BibEntry]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    out = {}
    for key, obj in raw.items():
        out[key] = BibEntry(
            key=key,
            author=obj.get("author", ""),
            title=obj.get("title", ""),
            publisher=obj.get("publisher", ""),
            year=str(obj.get("year", "")),
        )
    return out


def _placeholder_form(rule: MacroRule) -> str:
    return rule.template.replace("#", "")


def _macro_occurs(name: str, text: str) -> bool:
    needle = "\\" + name
    start = 0
    while True:
        i = text.find(needle, start)
        if i < 0:
            return False
        end = i + len(needle)
        if end >= len(text) or not text[end].isalpha():
            return True
        start = i + 1


def build_symbols_list(f: Formula, glossary: Glossary) -> list[SymbolsListEntry]:
    """Deduplicated, name-sorted glossary macros occurring in the
    formula or any of its annotation bodies."""
    texts = [f.source_semantic] + [a.body for a in f.annotations]
    entries = []
    for name in glossary.macro_names:
        rule = glossary.by_name[name]
        if any(_macro_occurs(rule.head, t) for t in texts):
            entries.append(
                SymbolsListEntry(
                    macro_name=name,
                    rendered_form=_placeholder_form(rule),
                    definition_link=rule.definition_link,
                    description=rule.description,
                )
            )
    return entries


def _math_section(title: str, anns: Sequence[Annotation]) -> list[str]:
    if not anns:
        return []
    lines = [f"== {title} =="]
    lines.extend(f":<math>{a.body}</math>" for a in anns)
    lines.append("")
    return lines


def _prose_section(title: str, anns: Sequence[Annotation]) -> list[str]:
    if not anns:
        return []
    lines = [f"== {title} =="]
    lines.extend(a.body for a in anns)
    lines.append("")
    return lines


def render_page(
    f: Formula,
    glossary: Glossary,
    bib: Mapping[str, BibEntry],
    corpus_prefix: str,
) -> FormulaPage:
    """Wikitext for one formula home page.

    Section order is fixed (constraints, substitutions, proof, notes,
    symbols list, bibliography); empty sections are omitted.
    """
    if f.citation.key not in bib:
        raise MissingBibEntryError(f.citation.key)
    entry = bib[f.citation.key]

    lines: list[str] = []
    names = f.annotations_of(AnnotationKind.NAME)
    if names:
        lines.append(f"''{names[0].body}''")
        lines.append("")
    lines.append(f"<math>{f.source_semantic}</math>")
    lines.append("")
    lines.extend(_math_section("Constraints", f.annotations_of(AnnotationKind.CONSTRAINT)))
    lines.extend(
        _math_section("Substitutions", f.annotations_of(AnnotationKind.SUBSTITUTION))
    )
    lines.extend(_prose_section("Proof", f.annotations_of(AnnotationKind.PROOF)))
    lines.extend(_prose_section("Notes", f.annotations_of(AnnotationKind.NOTE)))

    symbols = build_symbols_list(f, glossary)
    if symbols:
        lines.append("== Symbols List ==")
        for s in symbols:
            lines.append(
                f"* <math>{s.rendered_form}</math> : {s.description} "
                f"([{s.definition_link} definition])"
            )
        lines.append("")

    lines.append("== Bibliography ==")
    cite = f"Equation ({f.citation.tag}) of {entry.author}, ''{entry.title}''"
    if entry.publisher:
        cite += f", {entry.publisher}"
    if entry.year:
        cite += f", {entry.year}"
    lines.append(cite + ".")

    title = f"Formula:{corpus_prefix}:{f.id}"
    return FormulaPage(title=title, wikitext="\n".join(lines), formula_id=f.id)


def emit_dump(pages: Sequence[FormulaPage], siteinfo: SiteInfo = SiteInfo()) -> str:
    """Deterministic MediaWiki export XML for the given pages, in order,
    with page ids 1..N.  Raises DuplicateTitleError on title collisions."""
    seen = set()
    for p in pages:
        if p.title in seen:
            raise DuplicateTitleError(p.title)
        seen.add(p.title)

    si = siteinfo
    out = [
        f'<mediawiki xmlns="{EXPORT_NS}" '
        'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
        f'xsi:schemaLocation="{EXPORT_NS} {EXPORT_SCHEMA}" '
        f'version="0.10" xml:lang="{si.lang}">',
        "  <siteinfo>",
        f"    <sitename>{escape(si.sitename)}</sitename>",
        f"    <dbname>{escape(si.dbname)}</dbname>",
        f"    <base>{escape(si.base)}</base>",
        f"    <generator>{escape(si.generator)}</generator>",
        f"    <case>{si.case}</case>",
        "    <namespaces>",
        f'      <namespace key="0" case="{si.case}" />',
        "    </namespaces>",
        "  </siteinfo>",
    ]
    for num, p in enumerate(pages, start=1):
        out.extend(
            [
                "  <page>",
                f"    <title>{escape(p.title)}</title>",
                "    <ns>0</ns>",
                f"    <id>{num}</id>",
                "    <revision>",
                f"      <id>{num}</id>",
                f"      <timestamp>{si.timestamp}</timestamp>",
                "      <contributor>",
                f"        <username>{escape(si.contributor)}</username>",
                "      </contributor>",
                f"      <comment>{escape(si.comment)}</comment>",
                "      <model>wikitext</model>",
                "      <format>text/x-wiki</format>",
                f'      <text xml:space="preserve">{escape(p.wikitext)}</text>',
                "    </revision>",
                "  </page>",
            ]
        )
    out.append("</mediawiki>")
    out.append("")
    return "\n".join(out)


def stats_report(
    stats: ReplacementStats,
    fs: Sequence[Formula],
    defs: Sequence[SubstitutionDef],
    glossary: Glossary,
    failures: Iterable[tuple[str, str]] = (),
) -> str:
    """Human-readable run summary; every number is restated by the
    acceptance tests, so the layout is frozen by the golden file."""
    annotated = sum(
        1 for f in fs if f.annotations_of(AnnotationKind.SUBSTITUTION)
    )
    non_empty = sum(1 for f in fs if build_symbols_list(f, glossary))
    pages = len(fs)
    pct = (100.0 * non_empty / pages) if pages else 0.0
    lines = [
        f"pages: {pages}",
        f"formulae: {stats.formulae}",
        f"replacements: {stats.total}",
        f"average per formula: {float(stats.avg_per_formula):.2f}",
        f"substitution definitions (removed from page list): {len(defs)}",
        f"formulae with substitution annotations: {annotated}",
        f"non-empty symbols lists: {non_empty}/{pages} ({pct:.1f}%)",
        "per-rule replacement counts:",
    ]
    for name, count in sorted(stats.per_rule.items()):
        lines.append(f"  {name}: {count}")
    fail_list = list(failures)
    lines.append(f"failures: {len(fail_list)}")
    for where, message in fail_list:
        lines.append(f"  {where}: {message}")
    lines.append("")
    return "\n".join(lines)
