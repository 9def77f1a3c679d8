"""Reader for the small ``[section] key=value`` text format used by configs and triple specs.

A section header may carry its pairs on the same line; following lines add
more pairs to the current section until the next header.  ``#`` starts a
comment.  Sections may repeat and keep their order.
"""

import re

from .errors import InvalidInputError

_PAIR = re.compile(r"([A-Za-z_][\w.-]*)\s*=\s*(\S+)")
_HEADER = re.compile(r"^\[([A-Za-z_][\w-]*)\](.*)$")


def parse_sections(text):
    """List of ``(name, {key: value})`` in file order, values kept as strings."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            out.append((m.group(1), {}))
            line = m.group(2).strip()
            if not line:
                continue
        if not out:
            raise InvalidInputError(f"line {lineno}: key/value pair outside any section")
        pairs = _PAIR.findall(line)
        leftover = _PAIR.sub("", line).strip()
        if leftover or not pairs:
            raise InvalidInputError(f"line {lineno}: cannot parse {raw.strip()!r}")
        for k, v in pairs:
            out[-1][1][k] = v
    return out


def read_sections(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_sections(fh.read())


def merged(sections):
    """Collapse sections into ``{name: {key: value}}``; later repeats override earlier keys."""
    out = {}
    for name, pairs in sections:
        out.setdefault(name, {}).update(pairs)
    return out


def floats(value):
    """Comma-separated numbers as a list of floats."""
    try:
        return [float(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated numbers, got {value!r}") from None


def fraction(value):
    """A number that may be written as ``a/b``."""
    s = str(value)
    try:
        if "/" in s:
            a, b = s.split("/", 1)
            return float(a) / float(b)
        return float(s)
    except (ValueError, ZeroDivisionError):
        raise InvalidInputError(f"expected a number, got {value!r}") from None
