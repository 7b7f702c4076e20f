"""Action-grammar emission and a reference recognizer.

The emitted grammar is EBNF-style text describing exactly the model turns
parse_turn accepts cleanly (no recovery warnings) for a given prompt
variant, suitable for constrained-decoding engines.

Dialect: one rule per line, `name ::= expression`; `|` alternation;
juxtaposition sequences; postfix `*`, `+`, `?`; `(...)` grouping;
double-quoted literals and `[...]` character classes (ranges, leading `^`
negation, escapes \\n \\t \\r \\\\ \\" \\] \\- \\uXXXX); `.` matches any
character including newline. Lines starting with `#` are comments.

The recognizer is a character-level Earley parser, so alternation order
never matters and left recursion is fine; it exists so the grammar/parser
agreement can be tested without an external decoding engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import permutations
from typing import Any, Iterable, Mapping

from .core import OverhearError
from .protocol import PromptVariant
from .stage import tool_schemas


class GrammarError(OverhearError):
    """The grammar text could not be parsed."""


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

_LIT_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _lit(text: str) -> str:
    return '"' + "".join(_LIT_ESCAPES.get(ch, ch) for ch in text) + '"'


def _quoted(text: str) -> str:
    """Literal for a JSON-quoted token, e.g. _quoted('name') = the 6 chars "name"."""
    return _lit(f'"{text}"')


def _ci_enum_value(value: str) -> str:
    """Sequence matching a quoted enum value case-insensitively."""
    parts = [_lit('"')]
    for ch in value:
        if ch.isalpha():
            parts.append(f"[{ch.lower()}{ch.upper()}]")
        else:
            parts.append(_lit(ch))
    parts.append(_lit('"'))
    return "(" + " ".join(parts) + ")"


def _enum_alternatives(prop: Mapping[str, Any]) -> str:
    values = list(prop["enum"]) + sorted(prop.get("aliases", {}))
    if prop.get("case_insensitive"):
        return " | ".join(_ci_enum_value(v) for v in values)
    return " | ".join(_quoted(v) for v in values)


def _kv_rule(tool: str, key: str, value_expr: str, suffix: str | None = None) -> tuple[str, str]:
    rule = f"kv_{tool}_{suffix or key}"
    return rule, f'{rule} ::= {_quoted(key)} jws ":" jws {value_expr}'


def _object_alternatives(field_rules: list[str], allow_empty: bool) -> list[str]:
    """All key orders for every admissible subset, each wrapped in braces."""
    alts = []
    if allow_empty:
        alts.append('"{" jws "}"')
    for ordering in _orderings(field_rules):
        inner = ' jws "," jws '.join(ordering)
        alts.append(f'"{{" jws {inner} jws "}}"')
    return alts


def _orderings(field_rules: list[str]) -> list[tuple[str, ...]]:
    return [p for p in permutations(field_rules) if p]


def _subset_orderings(required: list[str], optional: list[str]) -> list[tuple[str, ...]]:
    out = []
    for mask in range(1 << len(optional)):
        chosen = required + [opt for bit, opt in enumerate(optional) if mask >> bit & 1]
        out.extend(p for p in permutations(chosen) if p)
    return out


def _tool_rules(schema: Mapping[str, Any]) -> tuple[str, list[str]]:
    tool = schema["name"]
    params = schema["parameters"]
    properties = params["properties"]
    required = list(params.get("required", ()))
    lines: list[str] = []

    value_rules: dict[str, str] = {}
    for key, prop in properties.items():
        if "enum" in prop:
            value_rules[key] = f"({_enum_alternatives(prop)})"
        elif prop.get("minLength"):
            value_rules[key] = "nonempty_string"
        else:
            value_rules[key] = "json_string"

    conditional = params.get("conditionally_required", {})
    if conditional:
        # One trigger field splits the enum into branches with different
        # requirement sets (the stage tool's npc argument).
        (dep_key, rule) = next(iter(conditional.items()))
        trigger_field, trigger_values = rule["field"], set(rule["values"])
        plain = [v for v in properties[trigger_field]["enum"] if v not in trigger_values]
        trig = [v for v in properties[trigger_field]["enum"] if v in trigger_values]
        trig += sorted(properties[trigger_field].get("aliases", {}))
        kv_plain, line = _kv_rule(
            tool,
            trigger_field,
            "(" + " | ".join(_quoted(v) for v in plain) + ")",
            suffix=f"{trigger_field}_plain",
        )
        lines.append(line)
        kv_trig, line = _kv_rule(
            tool,
            trigger_field,
            "(" + " | ".join(_quoted(v) for v in trig) + ")",
            suffix=f"{trigger_field}_trigger",
        )
        lines.append(line)
        kv_dep, line = _kv_rule(tool, dep_key, value_rules[dep_key])
        lines.append(line)
        orderings = _subset_orderings([kv_plain], [kv_dep]) + _subset_orderings([kv_trig, kv_dep], [])
        alts = []
        for ordering in orderings:
            inner = ' jws "," jws '.join(ordering)
            alts.append(f'"{{" jws {inner} jws "}}"')
    else:
        field_rule_names = []
        optional_rules = []
        for key in properties:
            kv, line = _kv_rule(tool, key, value_rules[key])
            lines.append(line)
            (field_rule_names if key in required else optional_rules).append(kv)
        orderings = _subset_orderings(field_rule_names, optional_rules)
        alts = []
        if not required:
            alts.append('"{" jws "}"')
        for ordering in orderings:
            inner = ' jws "," jws '.join(ordering)
            alts.append(f'"{{" jws {inner} jws "}}"')

    params_rule = f"params_{tool}"
    lines.append(f"{params_rule} ::= " + " | ".join(alts))
    call_rule = f"call_{tool}"
    name_kv = f'{_quoted("name")} jws ":" jws {_quoted(tool)}'
    params_kv = f'{_quoted("parameters")} jws ":" jws {params_rule}'
    lines.append(
        f'{call_rule} ::= "{{" jws ({name_kv} jws "," jws {params_kv} '
        f'| {params_kv} jws "," jws {name_kv}) jws "}}"'
    )
    return call_rule, lines


_SHARED_RULES = [
    'json_string ::= "\\"" string_char* "\\""',
    'nonempty_string ::= "\\"" string_char+ "\\""',
    "string_char ::= plain_char | escape",
    'plain_char ::= [^"\\\\\\u0000-\\u001f]',
    'escape ::= "\\\\" escape_tail',
    'escape_tail ::= ["\\\\/bfnrt] | "u" hex hex hex hex',
    "hex ::= [0-9a-fA-F]",
    "jws ::= jws_char*",
    "jws_char ::= [ \\t\\r\\n]",
    "inline_ws ::= iw_char*",
    "iw_char ::= [ \\t]",
    "trailing_ws ::= jws",
]


def emit_action_grammar(
    tools: Iterable[Mapping[str, Any]] | None = None,
    variant: PromptVariant = PromptVariant(),
) -> str:
    """Emit the grammar of cleanly-parseable model turns for a variant."""
    schemas = list(tools) if tools is not None else tool_schemas()
    root_parts = []
    section_rules = []
    if variant.transcribe_first:
        root_parts.append("transcript_section")
        section_rules.append(f'transcript_section ::= {_lit("Transcript:")} line_char* {_lit(chr(10))}')
        section_rules.append("line_char ::= [^\\n]")
    if variant.reasoning:
        root_parts.append("thought_section")
        section_rules.append(f'thought_section ::= {_lit("Thought:")} any_char* {_lit(chr(10))}')
        section_rules.append("any_char ::= .")
    root_parts.append("action_section")

    lines = [
        "# Model-turn grammar for constrained decoding.",
        f"# variant: modality={variant.modality.value} "
        f"transcribe_first={variant.transcribe_first} reasoning={variant.reasoning}",
        f"root ::= {' '.join(root_parts)}",
        *section_rules,
        f'action_section ::= {_lit("Action:")} inline_ws action_body trailing_ws',
        'action_body ::= none_action | tool_call',
        f"none_action ::= {_lit('None')}",
    ]
    call_rules = []
    tool_lines: list[str] = []
    for schema in schemas:
        call_rule, rules = _tool_rules(schema)
        call_rules.append(call_rule)
        tool_lines.extend(rules)
    lines.append("tool_call ::= " + " | ".join(call_rules))
    lines.extend(tool_lines)
    lines.extend(_SHARED_RULES)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Grammar text parsing
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TEXT_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "]": "]", "-": "-", "^": "^", "/": "/"}


@dataclass(frozen=True)
class CharClass:
    negated: bool
    ranges: tuple[tuple[int, int], ...]

    def matches(self, ch: str) -> bool:
        code = ord(ch)
        inside = any(lo <= code <= hi for lo, hi in self.ranges)
        return inside != self.negated


# Symbols: ("lit", str) | ("class", CharClass) | ("any",) | ("nt", rule name)
Symbol = tuple


def _scan_escape(text: str, i: int) -> tuple[str, int]:
    if i >= len(text):
        raise GrammarError("dangling escape")
    ch = text[i]
    if ch == "u":
        if i + 5 > len(text):
            raise GrammarError("truncated \\u escape")
        return chr(int(text[i + 1 : i + 5], 16)), i + 5
    if ch in _TEXT_ESCAPES:
        return _TEXT_ESCAPES[ch], i + 1
    raise GrammarError(f"unknown escape \\{ch}")


def _scan_literal(text: str, i: int) -> tuple[str, int]:
    out = []
    i += 1
    while i < len(text):
        ch = text[i]
        if ch == '"':
            return "".join(out), i + 1
        if ch == "\\":
            value, i = _scan_escape(text, i + 1)
            out.append(value)
        else:
            out.append(ch)
            i += 1
    raise GrammarError("unterminated literal")


def _scan_class(text: str, i: int) -> tuple[CharClass, int]:
    i += 1
    negated = False
    if i < len(text) and text[i] == "^":
        negated = True
        i += 1
    chars: list[str] = []
    ranges: list[tuple[int, int]] = []
    while i < len(text):
        ch = text[i]
        if ch == "]":
            ranges.extend((ord(c), ord(c)) for c in chars)
            return CharClass(negated, tuple(ranges)), i + 1
        if ch == "\\":
            value, i = _scan_escape(text, i + 1)
        else:
            value, i = ch, i + 1
        if i < len(text) and text[i] == "-" and i + 1 < len(text) and text[i + 1] != "]":
            i += 1
            if text[i] == "\\":
                hi, i = _scan_escape(text, i + 1)
            else:
                hi, i = text[i], i + 1
            ranges.append((ord(value), ord(hi)))
        else:
            chars.append(value)
    raise GrammarError("unterminated character class")


def _tokenize(expr: str) -> list[tuple]:
    tokens: list[tuple] = []
    i = 0
    while i < len(expr):
        ch = expr[i]
        if ch.isspace():
            i += 1
        elif ch == '"':
            value, i = _scan_literal(expr, i)
            tokens.append(("lit", value))
        elif ch == "[":
            value, i = _scan_class(expr, i)
            tokens.append(("class", value))
        elif ch in "()|*+?.":
            tokens.append(({"(": "lparen", ")": "rparen", "|": "pipe", "*": "star",
                            "+": "plus", "?": "qmark", ".": "dot"}[ch],))
            i += 1
        else:
            match = _IDENT_RE.match(expr, i)
            if not match:
                raise GrammarError(f"unexpected character {ch!r} in grammar expression")
            tokens.append(("ident", match.group()))
            i = match.end()
    return tokens


class Grammar:
    """A parsed grammar with Earley-based recognition."""

    def __init__(self, rules: dict[str, list[list[Symbol]]], start: str = "root"):
        if start not in rules:
            raise GrammarError(f"missing start rule {start!r}")
        for alts in rules.values():
            for alt in alts:
                for sym in alt:
                    if sym[0] == "nt" and sym[1] not in rules:
                        raise GrammarError(f"undefined rule {sym[1]!r}")
        self.rules = rules
        self.start = start
        self._nullable = self._compute_nullable()

    @classmethod
    def parse(cls, text: str, start: str = "root") -> "Grammar":
        builder = _RuleBuilder()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "::=" not in line:
                raise GrammarError(f"not a rule line: {line!r}")
            name, expr = line.split("::=", 1)
            builder.add_rule(name.strip(), _tokenize(expr))
        return cls(builder.rules, start=start)

    def _compute_nullable(self) -> set[str]:
        nullable: set[str] = set()
        changed = True
        while changed:
            changed = False
            for name, alts in self.rules.items():
                if name in nullable:
                    continue
                for alt in alts:
                    if all(sym[0] == "nt" and sym[1] in nullable for sym in alt):
                        nullable.add(name)
                        changed = True
                        break
        return nullable

    def accepts(self, s: str) -> bool:
        n = len(s)
        charts: list[set] = [set() for _ in range(n + 1)]
        agenda: list[list] = [[] for _ in range(n + 1)]

        def add(pos: int, item: tuple) -> None:
            if item not in charts[pos]:
                charts[pos].add(item)
                agenda[pos].append(item)

        for alt_idx in range(len(self.rules[self.start])):
            add(0, (self.start, alt_idx, 0, 0))

        for pos in range(n + 1):
            queue = agenda[pos]
            while queue:
                name, alt_idx, dot, origin = queue.pop()
                alt = self.rules[name][alt_idx]
                if dot == len(alt):
                    # Completion: advance every item waiting on this rule.
                    for waiting in list(charts[origin]):
                        w_name, w_alt, w_dot, w_origin = waiting
                        w_rule = self.rules[w_name][w_alt]
                        if w_dot < len(w_rule) and w_rule[w_dot] == ("nt", name):
                            add(pos, (w_name, w_alt, w_dot + 1, w_origin))
                    continue
                sym = alt[dot]
                kind = sym[0]
                if kind == "nt":
                    target = sym[1]
                    for idx in range(len(self.rules[target])):
                        add(pos, (target, idx, 0, pos))
                    if target in self._nullable:
                        add(pos, (name, alt_idx, dot + 1, origin))
                    # A same-position completion may already exist.
                    for done in list(charts[pos]):
                        d_name, d_alt, d_dot, d_origin = done
                        if d_name == target and d_origin == pos and d_dot == len(self.rules[target][d_alt]):
                            add(pos, (name, alt_idx, dot + 1, origin))
                            break
                elif kind == "lit":
                    text = sym[1]
                    if s.startswith(text, pos):
                        add(pos + len(text), (name, alt_idx, dot + 1, origin))
                elif kind == "class":
                    if pos < n and sym[1].matches(s[pos]):
                        add(pos + 1, (name, alt_idx, dot + 1, origin))
                else:  # any
                    if pos < n:
                        add(pos + 1, (name, alt_idx, dot + 1, origin))

        return any(
            item[0] == self.start and item[2] == len(self.rules[self.start][item[1]]) and item[3] == 0
            for item in charts[n]
        )


class _RuleBuilder:
    def __init__(self) -> None:
        self.rules: dict[str, list[list[Symbol]]] = {}
        self._fresh = 0

    def add_rule(self, name: str, tokens: list[tuple]) -> None:
        if name in self.rules:
            raise GrammarError(f"duplicate rule {name!r}")
        parser = _ExprParser(tokens, self, name)
        self.rules[name] = parser.parse_alternation()
        parser.expect_end()

    def fresh_rule(self, base: str, alts: list[list[Symbol]]) -> str:
        self._fresh += 1
        name = f"{base}__{self._fresh}"
        self.rules[name] = alts
        return name


class _ExprParser:
    def __init__(self, tokens: list[tuple], builder: _RuleBuilder, rule_name: str):
        self.tokens = tokens
        self.pos = 0
        self.builder = builder
        self.rule_name = rule_name

    def peek(self) -> tuple | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def expect_end(self) -> None:
        if self.peek() is not None:
            raise GrammarError(f"trailing tokens in rule {self.rule_name!r}")

    def parse_alternation(self) -> list[list[Symbol]]:
        alts = [self.parse_sequence()]
        while self.peek() == ("pipe",):
            self.pos += 1
            alts.append(self.parse_sequence())
        return alts

    def parse_sequence(self) -> list[Symbol]:
        seq: list[Symbol] = []
        while True:
            tok = self.peek()
            if tok is None or tok == ("pipe",) or tok == ("rparen",):
                break
            seq.append(self.parse_term())
        if not seq:
            raise GrammarError(f"empty sequence in rule {self.rule_name!r}")
        return seq

    def parse_term(self) -> Symbol:
        sym = self.parse_factor()
        while True:
            tok = self.peek()
            if tok == ("star",):
                self.pos += 1
                name = self.builder.fresh_rule(self.rule_name, [])
                self.builder.rules[name] = [[], [("nt", name), sym]]
            elif tok == ("plus",):
                self.pos += 1
                star = self.builder.fresh_rule(self.rule_name, [])
                self.builder.rules[star] = [[], [("nt", star), sym]]
                name = self.builder.fresh_rule(self.rule_name, [[sym, ("nt", star)]])
            elif tok == ("qmark",):
                self.pos += 1
                name = self.builder.fresh_rule(self.rule_name, [[], [sym]])
            else:
                return sym
            sym = ("nt", name)

    def parse_factor(self) -> Symbol:
        tok = self.peek()
        if tok is None:
            raise GrammarError(f"unexpected end of rule {self.rule_name!r}")
        self.pos += 1
        kind = tok[0]
        if kind == "lit":
            if not tok[1]:
                raise GrammarError("empty literal")
            return ("lit", tok[1])
        if kind == "class":
            return ("class", tok[1])
        if kind == "dot":
            return ("any",)
        if kind == "ident":
            return ("nt", tok[1])
        if kind == "lparen":
            alts = self.parse_alternation()
            if self.peek() != ("rparen",):
                raise GrammarError(f"missing ')' in rule {self.rule_name!r}")
            self.pos += 1
            name = self.builder.fresh_rule(self.rule_name, alts)
            return ("nt", name)
        raise GrammarError(f"unexpected token {tok!r} in rule {self.rule_name!r}")


def recognize(grammar_text: str, s: str) -> bool:
    """Parse the grammar text and test one string. Convenience for tests/tools."""
    return Grammar.parse(grammar_text).accepts(s)
