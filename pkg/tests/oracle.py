"""Brute-force reference scanner used to cross-check replace_all.

Re-implements the documented matching semantics from scratch, without
importing anything from semtex.engine: at every position try each rule
in glossary order, count the first match, consume it, then recurse into
captured sequences and unmatched groups.  Slow and simple on purpose.
"""

from collections import Counter

from semtex.glossary import AtomKind
from semtex.lexer import Group, Token, TokenKind

_SEPARATORS = frozenset({",", ";", "|"})
_CLOSER = {"(": ")", "[": "]"}
_STOP_CHARS = frozenset("()[],;|=<>+-*/@.")
_STOP_KINDS = frozenset(
    {
        TokenKind.MATH_SHIFT,
        TokenKind.SUPERSCRIPT,
        TokenKind.SUBSCRIPT,
        TokenKind.ALIGN_TAB,
        TokenKind.COMMENT,
        TokenKind.WHITESPACE,
    }
)
_STOP_CONTROL = frozenset({"le", "leq", "ge", "geq", "ne", "neq", "in", "\\"})


def _plain_single(nd):
    if not isinstance(nd, Token):
        return False
    if nd.kind in _STOP_KINDS:
        return False
    if nd.kind is TokenKind.CHAR and nd.text in _STOP_CHARS:
        return False
    if nd.kind is TokenKind.CONTROL and nd.name in _STOP_CONTROL:
        return False
    return True


def match(nodes, pos, rule):
    """Return (captures dict, end index) or None."""
    caps = {}
    seq = nodes
    i = pos
    stack = []
    for atom in rule.pattern:
        nd = seq[i] if i < len(seq) else None
        if atom.kind in (AtomKind.LITERAL, AtomKind.SEPARATOR):
            if not (isinstance(nd, Token) and nd.text == atom.value):
                return None
            i += 1
        elif atom.kind is AtomKind.OPEN:
            if atom.value == "{":
                if not isinstance(nd, Group):
                    return None
                stack.append(("group", seq, i + 1))
                seq, i = nd.children, 0
            else:
                if not (isinstance(nd, Token) and nd.text == atom.value):
                    return None
                stack.append(("paren", _CLOSER[atom.value]))
                i += 1
        elif atom.kind is AtomKind.CLOSE:
            if not stack:
                return None
            ctx = stack.pop()
            if ctx[0] == "group":
                if i != len(seq):
                    return None
                seq, i = ctx[1], ctx[2]
            else:
                if not (isinstance(nd, Token) and nd.text == ctx[1]):
                    return None
                i += 1
        else:  # capture
            if atom.mode == "single-token":
                if not _plain_single(nd):
                    return None
                caps[atom.name] = (nd,)
                i += 1
            elif atom.mode == "single-group":
                if isinstance(nd, Group):
                    caps[atom.name] = tuple(nd.children)
                    i += 1
                elif _plain_single(nd):
                    caps[atom.name] = (nd,)
                    i += 1
                else:
                    return None
            else:  # balanced-expression
                depth = 0
                taken = []
                while i < len(seq):
                    nd = seq[i]
                    if isinstance(nd, Token):
                        if depth == 0 and nd.text in _SEPARATORS:
                            break
                        if nd.text in ("(", "["):
                            depth += 1
                        elif nd.text in (")", "]"):
                            if depth == 0:
                                break
                            depth -= 1
                    taken.append(nd)
                    i += 1
                if not taken or depth != 0:
                    return None
                caps[atom.name] = tuple(taken)
    if stack:
        return None
    return caps, i


def scan(nodes, glossary):
    """Count every firing the way a full rewrite would, by brute force."""
    counts = Counter()
    nodes = list(nodes)
    i = 0
    while i < len(nodes):
        hit = None
        for rule in glossary.rules:
            m = match(nodes, i, rule)
            if m is not None:
                hit = (rule, m)
                break
        if hit is None:
            if isinstance(nodes[i], Group):
                counts.update(scan(nodes[i].children, glossary))
            i += 1
            continue
        rule, (caps, end) = hit
        counts[rule.macro_name] += 1
        for seq in caps.values():
            counts.update(scan(seq, glossary))
        i = end
    return counts
