"""Hierarchical ``[Section] key = value []`` input files.

Sections open with ``[Name]`` (or the legacy nested form ``[./name]``) and
close with ``[]`` (or ``[../]``).  Values are single tokens or quoted strings;
``#`` starts a comment.  Top-level ``name = value`` lines outside any section
define substitution variables referenced as ``${name}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ParseError

_NAME = r"[A-Za-z_][A-Za-z0-9_./:\-]*"
_NAME_RE = re.compile(_NAME)
_KEY_RE = re.compile(rf"\s*({_NAME})\s*=\s*")
_DBE_RE = re.compile(r"\$\{([^}]*)\}")
_TRUE = {"true", "yes", "on"}
_FALSE = {"false", "no", "off"}


@dataclass
class Section:
    """A named block with ordered parameters and child blocks.

    Parameter values are kept as strings; the typed getters convert them on
    demand.  Source line numbers are kept for error messages but do not take
    part in equality.
    """

    name: str = ""
    params: dict = field(default_factory=dict)
    children: dict = field(default_factory=dict)
    line: int | None = field(default=None, compare=False)
    param_lines: dict = field(default_factory=dict, compare=False, repr=False)
    filename: str | None = field(default=None, compare=False, repr=False)

    def __getitem__(self, path):
        node = self
        for part in path.strip("/").split("/"):
            node = node.children[part]
        return node

    def __contains__(self, name):
        return name in self.children

    def get(self, key, default=None):
        return self.params.get(key, default)

    def where(self, key=None):
        line = self.param_lines.get(key, self.line) if key else self.line
        return line

    def error(self, msg, key=None):
        return ParseError(msg, self.where(key), None, self.filename)

    def get_bool(self, key, default=None):
        if key not in self.params:
            return default
        v = self.params[key].strip().lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
        raise self.error(f"parameter {key!r} expects true or false, got {self.params[key]!r}", key)

    def get_float(self, key, default=None):
        if key not in self.params:
            return default
        try:
            return float(self.params[key])
        except ValueError:
            raise self.error(f"parameter {key!r} expects a number, got {self.params[key]!r}", key) from None

    def get_int(self, key, default=None):
        v = self.get_float(key, None)
        if v is None:
            return default
        if v != int(v):
            raise self.error(f"parameter {key!r} expects an integer, got {self.params[key]!r}", key)
        return int(v)

    def get_list(self, key, default=None):
        if key not in self.params:
            return default
        return self.params[key].split()

    def get_floats(self, key, default=None):
        items = self.get_list(key)
        if items is None:
            return default
        try:
            return [float(v) for v in items]
        except ValueError:
            raise self.error(f"parameter {key!r} expects numbers, got {self.params[key]!r}", key) from None

    def walk(self, prefix=""):
        """Yield ``(path, section)`` pairs depth first."""
        for name, child in self.children.items():
            path = f"{prefix}/{name}" if prefix else name
            yield path, child
            yield from child.walk(path)


ParamTree = Section


def _top_level_assignments(lines, filename=None):
    """Map of ``name -> value`` for assignments outside all sections."""
    out = {}
    depth = 0
    for i, raw in enumerate(lines, 1):
        s = raw.split("#", 1)[0].strip()
        if s.startswith("["):
            inner = s[1:s.index("]")] if "]" in s else ""
            if inner in ("", "../"):
                depth = max(depth - 1, 0)
            else:
                depth += 1
            continue
        if depth == 0:
            m = _KEY_RE.match(s)
            if m:
                value = _read_value(s, m.end(), i, filename)[0]
                out[m.group(1)] = (value, i)
    return out


def substitute_dbe(text, filename=None):
    """Replace every ``${name}`` by the value of the top-level ``name = value``.

    Substitution is a single non-recursive pass over the raw text.
    """
    if "${" not in text:
        return text
    lines = text.split("\n")
    env = _top_level_assignments(lines, filename)
    out = []
    for i, line in enumerate(lines, 1):
        def repl(m, i=i):
            name = m.group(1).strip()
            if name not in env:
                raise ParseError(f"undefined substitution variable {name!r}", i, m.start() + 1, filename)
            return env[name][0]
        out.append(_DBE_RE.sub(repl, line))
    return "\n".join(out)


def _read_value(s, pos, line, filename):
    """Read one value starting at ``pos``; returns ``(value, end)``."""
    if pos >= len(s) or s[pos] == "#":
        raise ParseError("missing value", line, pos + 1, filename)
    q = s[pos]
    if q in "'\"":
        end = s.find(q, pos + 1)
        if end < 0:
            raise ParseError("unterminated string", line, pos + 1, filename)
        return s[pos + 1:end], end + 1
    m = re.compile(r"[^\s#'\"\[\]]+").match(s, pos)
    if not m:
        raise ParseError(f"unexpected character {s[pos]!r}", line, pos + 1, filename)
    return m.group(0), m.end()


def _rest_is_blank(s, pos, line, filename):
    rest = s[pos:]
    stripped = rest.lstrip()
    if stripped and not stripped.startswith("#"):
        col = pos + len(rest) - len(stripped) + 1
        raise ParseError(f"unexpected token {stripped.split()[0]!r}", line, col, filename)


def parse_hit(text, filename=None):
    """Parse input text into a :class:`Section` tree rooted at an unnamed node."""
    root = Section("", line=0, filename=filename)
    stack = [root]
    for i, s in enumerate(text.split("\n"), 1):
        body = s.lstrip()
        col0 = len(s) - len(body)
        if not body or body.startswith("#"):
            continue
        if body.startswith("["):
            close = body.find("]")
            if close < 0:
                raise ParseError("missing ']'", i, col0 + 1, filename)
            inner = body[1:close].strip()
            _rest_is_blank(s, col0 + close + 1, i, filename)
            if inner in ("", "../"):
                if len(stack) == 1:
                    raise ParseError("section close without a matching open", i, col0 + 1, filename)
                stack.pop()
                continue
            name = inner[2:] if inner.startswith("./") else inner
            if not _NAME_RE.fullmatch(name) or "/" in name:
                raise ParseError(f"invalid section name {inner!r}", i, col0 + 2, filename)
            parent = stack[-1]
            if name in parent.children:
                raise ParseError(f"duplicate section [{name}]", i, col0 + 1, filename)
            sec = Section(name, line=i, filename=filename)
            parent.children[name] = sec
            stack.append(sec)
            continue
        m = _KEY_RE.match(s)
        if not m:
            tok = body.split()[0]
            raise ParseError(f"expected 'key = value' or a section header, found {tok!r}", i, col0 + 1, filename)
        key = m.group(1)
        value, end = _read_value(s, m.end(), i, filename)
        _rest_is_blank(s, end, i, filename)
        sec = stack[-1]
        if key in sec.params:
            where = f"[{sec.name}]" if sec.name else "top level"
            raise ParseError(f"duplicate parameter {key!r} in {where} (first set on line {sec.param_lines[key]})",
                             i, m.start(1) + 1, filename)
        sec.params[key] = value
        sec.param_lines[key] = i
    if len(stack) > 1:
        sec = stack[-1]
        raise ParseError(f"section [{sec.name}] opened here is never closed", sec.line, None, filename)
    return root


def _quote(v):
    if v and re.fullmatch(r"[^\s#'\"\[\]]+", v):
        return v
    if "'" not in v:
        return f"'{v}'"
    if '"' not in v:
        return f'"{v}"'
    raise ValueError(f"value {v!r} contains both quote characters and cannot be rendered")


def render(tree, indent="  "):
    """Canonical text for a tree; ``parse_hit(render(t)) == t``."""
    lines = [f"{k} = {_quote(v)}" for k, v in tree.params.items()]

    def emit(sec, depth):
        pad = indent * depth
        if depth == 0:
            lines.append(f"[{sec.name}]")
        else:
            lines.append(f"{pad}[./{sec.name}]")
        for k, v in sec.params.items():
            lines.append(f"{pad}{indent}{k} = {_quote(v)}")
        for child in sec.children.values():
            emit(child, depth + 1)
        lines.append(f"{pad}[../]" if depth else "[]")

    for sec in tree.children.values():
        if lines:
            lines.append("")
        emit(sec, 0)
    return "\n".join(lines) + ("\n" if lines else "")


def parse_file(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    name = str(path)
    return parse_hit(substitute_dbe(text, name), name)
