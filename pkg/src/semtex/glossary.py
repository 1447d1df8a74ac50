"""Macro glossary: replacement rules mapping presentation patterns to
semantic macros, plus the canonicalization settings that ship with them.

A glossary file is UTF-8 JSON with two top-level keys:

  canonicalization: {spacing_tokens, size_prefixes, bar_synonyms,
                     delimiter_classes}
  rules: [{name, priority, pattern, template, at, url, description}, ...]

Pattern atoms are one-key objects: {"lit": "\\Gamma"}, {"capture": "z",
"mode": "balanced-expression"}, {"sep": ";"}, {"open": "("}, {"close": true}.
Templates use {#name} placeholders and contain the rule's @ or @@ marker
exactly once, separating parameter groups from argument groups.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .canonicalize import CanonicalSettings
from .errors import (
    DuplicateMacroError,
    GlossaryParseError,
    TemplateCaptureMismatchError,
)
from .lexer import Group, Node, Token, TokenKind, build_groups, tokenize


class AtomKind(Enum):
    LITERAL = "literal"
    CAPTURE = "capture"
    SEPARATOR = "separator"
    OPEN = "open"
    CLOSE = "close"


CAPTURE_MODES = ("balanced-expression", "single-group", "single-token")
SEPARATOR_CHARS = (",", ";", "|")
OPEN_CHARS = ("(", "[", "{")


@dataclass(frozen=True)
class PatternAtom:
    kind: AtomKind
    value: str = ""
    name: str = ""
    mode: str = "balanced-expression"


@dataclass(frozen=True)
class MacroRule:
    """One presentation -> semantic rewrite rule."""

    macro_name: str
    pattern: tuple[PatternAtom, ...]
    template: str
    at_variant: str
    priority: int
    definition_link: str = ""
    description: str = ""
    # Derived from template at load time.
    head: str = field(default="", compare=False)
    param_names: tuple[str, ...] = field(default=(), compare=False)
    arg_names: tuple[str, ...] = field(default=(), compare=False)

    @property
    def capture_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.pattern if a.kind is AtomKind.CAPTURE)


def _parse_atom(obj, rule_name: str) -> PatternAtom:
    if not isinstance(obj, dict) or len(obj) - ("mode" in obj) != 1:
        raise GlossaryParseError(None, f"rule {rule_name!r}: bad pattern atom {obj!r}")
    if "lit" in obj:
        return PatternAtom(AtomKind.LITERAL, value=obj["lit"])
    if "capture" in obj:
        mode = obj.get("mode", "balanced-expression")
        if mode not in CAPTURE_MODES:
            raise GlossaryParseError(
                None, f"rule {rule_name!r}: unknown capture mode {mode!r}"
            )
        return PatternAtom(AtomKind.CAPTURE, name=obj["capture"], mode=mode)
    if "sep" in obj:
        if obj["sep"] not in SEPARATOR_CHARS:
            raise GlossaryParseError(
                None, f"rule {rule_name!r}: bad separator {obj['sep']!r}"
            )
        return PatternAtom(AtomKind.SEPARATOR, value=obj["sep"])
    if "open" in obj:
        if obj["open"] not in OPEN_CHARS:
            raise GlossaryParseError(
                None, f"rule {rule_name!r}: bad open delimiter {obj['open']!r}"
            )
        return PatternAtom(AtomKind.OPEN, value=obj["open"])
    if "close" in obj:
        return PatternAtom(AtomKind.CLOSE)
    raise GlossaryParseError(None, f"rule {rule_name!r}: bad pattern atom {obj!r}")


def _parse_template(rule_name: str, template: str, at_variant: str):
    """Split a template into (head, param names, arg names), validating the
    canonical shape: \\Head {#p}* @|@@ {#a}+ ."""
    try:
        nodes = build_groups(tokenize(template))
    except Exception as exc:
        raise GlossaryParseError(
            None, f"rule {rule_name!r}: template does not parse: {exc}"
        ) from exc
    if not nodes or not isinstance(nodes[0], Token) or nodes[0].kind is not TokenKind.CONTROL:
        raise GlossaryParseError(
            None, f"rule {rule_name!r}: template must start with a control sequence"
        )
    head = nodes[0].name
    params: list[str] = []
    args: list[str] = []
    ats = 0
    seen_at = False
    for node in nodes[1:]:
        if isinstance(node, Token) and node.is_char("@"):
            if args:
                raise GlossaryParseError(
                    None, f"rule {rule_name!r}: @ must appear once in template"
                )
            seen_at = True
            ats += 1
            continue
        if isinstance(node, Group):
            if (
                len(node.children) < 2
                or not isinstance(node.children[0], Token)
                or not node.children[0].is_char("#")
            ):
                raise GlossaryParseError(
                    None,
                    f"rule {rule_name!r}: template groups must hold one "
                    f"{{#name}} placeholder",
                )
            name = "".join(
                c.text for c in node.children[1:] if isinstance(c, Token)
            )
            (args if seen_at else params).append(name)
            continue
        raise GlossaryParseError(
            None, f"rule {rule_name!r}: unexpected template content {node!r}"
        )
    if ats == 0 or "@" * ats != at_variant:
        raise GlossaryParseError(
            None,
            f"rule {rule_name!r}: template must contain its at variant "
            f"{at_variant!r} exactly once",
        )
    if not args:
        raise GlossaryParseError(
            None, f"rule {rule_name!r}: template needs at least one argument group"
        )
    return head, tuple(params), tuple(args)


def _validate_rule(rule: MacroRule) -> None:
    placeholders = list(rule.param_names) + list(rule.arg_names)
    captures = list(rule.capture_names)
    if sorted(placeholders) != sorted(captures) or len(set(captures)) != len(captures):
        raise TemplateCaptureMismatchError(
            rule.macro_name,
            f"rule {rule.macro_name!r}: template placeholders {sorted(placeholders)} "
            f"do not match pattern captures {sorted(captures)}",
        )
    depth = 0
    for atom in rule.pattern:
        if atom.kind is AtomKind.OPEN:
            depth += 1
        elif atom.kind is AtomKind.CLOSE:
            depth -= 1
            if depth < 0:
                raise GlossaryParseError(
                    None, f"rule {rule.macro_name!r}: unbalanced pattern close"
                )
    if depth != 0:
        raise GlossaryParseError(
            None, f"rule {rule.macro_name!r}: unbalanced pattern opens"
        )


@dataclass
class Glossary:
    """Rules in total order (priority desc, pattern length desc, name asc)."""

    rules: tuple[MacroRule, ...]
    settings: CanonicalSettings = field(default_factory=CanonicalSettings)

    def __post_init__(self):
        self.rules = tuple(
            sorted(
                self.rules,
                key=lambda r: (-r.priority, -len(r.pattern), r.macro_name),
            )
        )
        self.by_name: dict[str, MacroRule] = {}
        self.by_head: dict[str, MacroRule] = {}
        for rule in self.rules:
            if rule.macro_name in self.by_name:
                raise DuplicateMacroError(rule.macro_name)
            self.by_name[rule.macro_name] = rule
            self.by_head.setdefault(rule.head, rule)

    @property
    def macro_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.by_name))

    @property
    def heads(self) -> frozenset:
        return frozenset(self.by_head)


def _rule_from_json(obj, index: int) -> MacroRule:
    if not isinstance(obj, dict):
        raise GlossaryParseError(None, f"rule #{index}: not an object")
    for key in ("name", "priority", "pattern", "template", "at"):
        if key not in obj:
            raise GlossaryParseError(
                None, f"rule #{index}: missing required key {key!r}"
            )
    name = obj["name"]
    if obj["at"] not in ("@", "@@"):
        raise GlossaryParseError(None, f"rule {name!r}: at must be '@' or '@@'")
    if not obj.get("url"):
        # symbols-list entries must be able to link every macro somewhere
        raise GlossaryParseError(None, f"rule {name!r}: url must be non-empty")
    if not isinstance(obj["priority"], int):
        raise GlossaryParseError(None, f"rule {name!r}: priority must be an integer")
    pattern = tuple(_parse_atom(a, name) for a in obj["pattern"])
    head, params, args = _parse_template(name, obj["template"], obj["at"])
    rule = MacroRule(
        macro_name=name,
        pattern=pattern,
        template=obj["template"],
        at_variant=obj["at"],
        priority=obj["priority"],
        definition_link=obj.get("url", ""),
        description=obj.get("description", ""),
        head=head,
        param_names=params,
        arg_names=args,
    )
    _validate_rule(rule)
    return rule


def load_glossary(path: str | Path) -> Glossary:
    """Load and validate a glossary file.

    Raises GlossaryParseError, DuplicateMacroError, or
    TemplateCaptureMismatchError.
    """
    text = Path(path).read_text(encoding="utf-8")
    return loads_glossary(text)


def loads_glossary(text: str) -> Glossary:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GlossaryParseError(exc.lineno, exc.msg) from exc
    if not isinstance(data, dict) or "rules" not in data:
        raise GlossaryParseError(None, "top level must be an object with 'rules'")
    if not isinstance(data["rules"], list):
        raise GlossaryParseError(None, "'rules' must be an array")
    rules = [_rule_from_json(obj, i + 1) for i, obj in enumerate(data["rules"])]
    settings = CanonicalSettings.from_config(data.get("canonicalization", {}))
    return Glossary(tuple(rules), settings)


def builtin_glossary_path() -> Path:
    """Path of the glossary that ships with the package."""
    return Path(resources.files("semtex").joinpath("data/glossary.json"))


def builtin_glossary() -> Glossary:
    return load_glossary(builtin_glossary_path())
