"""Rule text structure: snippet layout, conditions, and connective logic.

A snippet is raw rule text plus the character spans of its paragraphs
and bullet items.  Segmentation pulls out the condition clauses, each
anchored to an exact span of the original text, and logic detection
joins them into a small AND/OR tree driven by cue phrases and
coordination patterns.  Cue lexicons live in data files so they can be
extended without touching code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .core import ValidationError
from .text import split_sentences, tokenize

Span = tuple[int, int]

_BULLET_RE = re.compile(r"^(\s*)([-*•])(\s+)(\S.*?)\s*$")

# Separators considered as coordination split points: a comma followed
# by an optional coordinator, or a bare coordinator between spaces.
_SEP_RE = re.compile(r",\s+(?:\b(and|or)\b\s+)?|\s+\b(and|or)\b\s+", re.IGNORECASE)

# Trailing list glue on a bullet item ("; and", ", or", lone ";" or ".").
_BULLET_TAIL_RE = re.compile(
    r"(?:\s*[;,.]\s*\b(?:and|or)\b\s*|\s*[;,.]\s*|\s+\b(?:and|or)\b\s*)$",
    re.IGNORECASE,
)

_CONDITION_CUE_RE = re.compile(
    r"\b(if|unless|when|provided that|as long as|so long as)\b", re.IGNORECASE
)

# Words that plausibly begin an independent clause.  The narrow set
# finds the comma separating a leading condition from its outcome; the
# broad set additionally validates coordination split points.
_SUBJECT_STARTERS = frozenset(
    "you your you're you'll you'd you've we they then it there he she i".split()
)
_BARE_VERB_STARTERS = frozenset(
    """own live work give get receive hold earn pay meet owe possess rent
    claim apply care suffer qualify intend expect provide run keep look
    stay reside study attend need want use belong""".split()
)
_BROAD_STARTERS = (
    _SUBJECT_STARTERS
    | _BARE_VERB_STARTERS
    | frozenset(
        """a an the this that are is was were be been being have has had
        do does did will would can could must may might should aged""".split()
    )
)


@dataclass(frozen=True)
class RuleSnippet:
    """Rule text with the layout spans segmentation works from."""

    text: str
    bullets: tuple[Span, ...] = ()
    paragraphs: tuple[Span, ...] = ()

    def __post_init__(self) -> None:
        spans = sorted(self.bullets + self.paragraphs)
        last = 0
        for start, end in spans:
            if not (0 <= start < end <= len(self.text)):
                raise ValidationError(f"span {(start, end)} out of bounds")
            if start < last:
                raise ValidationError("snippet spans overlap")
            last = end


@dataclass(frozen=True)
class Condition:
    """One condition clause, anchored to an exact slice of the rule text.

    ``negated`` marks clauses introduced by "unless": the clause holding
    counts against the rule rather than for it.
    """

    text: str
    start: int
    end: int
    origin: str
    negated: bool = False

    def __post_init__(self) -> None:
        if self.origin not in ("bullet", "inline"):
            raise ValidationError(f"unknown condition origin {self.origin!r}")
        if not self.text.strip():
            raise ValidationError("empty condition text")

    @property
    def char_span(self) -> Span:
        return (self.start, self.end)


@dataclass(frozen=True)
class Logic:
    """Connective tree: leaves reference condition indices."""

    op: str  # "cond", "and", "or"
    children: tuple["Logic", ...] = ()
    index: int = -1

    def __post_init__(self) -> None:
        if self.op == "cond":
            if self.index < 0 or self.children:
                raise ValidationError("condition leaf needs a bare index")
        elif self.op in ("and", "or"):
            if len(self.children) < 2 or self.index != -1:
                raise ValidationError(f"{self.op} node needs at least two children")
        else:
            raise ValidationError(f"unknown logic op {self.op!r}")

    @staticmethod
    def cond(index: int) -> "Logic":
        return Logic("cond", (), index)

    @staticmethod
    def all_of(children) -> "Logic":
        return Logic("and", tuple(children))

    @staticmethod
    def any_of(children) -> "Logic":
        return Logic("or", tuple(children))

    def leaf_indices(self) -> list[int]:
        if self.op == "cond":
            return [self.index]
        out: list[int] = []
        for child in self.children:
            out.extend(child.leaf_indices())
        return out

    def to_dict(self) -> dict:
        if self.op == "cond":
            return {"cond": self.index}
        return {"op": self.op, "children": [c.to_dict() for c in self.children]}

    @staticmethod
    def from_dict(record: dict) -> "Logic":
        if "cond" in record:
            return Logic.cond(int(record["cond"]))
        return Logic(
            str(record["op"]),
            tuple(Logic.from_dict(c) for c in record["children"]),
        )


@dataclass(frozen=True)
class RuleLogic:
    """Parsed rule: conditions plus the connective structure over them.

    ``structure`` is None exactly when there are no conditions (the rule
    is vacuously satisfied).  ``ambiguous`` flags lists whose connective
    had to be defaulted because no cue decided it.
    """

    conditions: tuple[Condition, ...]
    structure: Logic | None
    outcome_negated: bool
    ambiguous: bool = False

    def __post_init__(self) -> None:
        if self.structure is None:
            if self.conditions:
                raise ValidationError("conditions present but no structure")
            return
        leaves = self.structure.leaf_indices()
        if sorted(leaves) != list(range(len(self.conditions))):
            raise ValidationError(
                "structure must reference every condition index exactly once"
            )

    def to_dict(self) -> dict:
        return {
            "conditions": [
                {
                    "text": c.text,
                    "span": [c.start, c.end],
                    "origin": c.origin,
                    "negated": c.negated,
                }
                for c in self.conditions
            ],
            "structure": None if self.structure is None else self.structure.to_dict(),
            "outcome_negated": self.outcome_negated,
            "ambiguous": self.ambiguous,
        }


@lru_cache(maxsize=1)
def _cue_lexicon() -> dict[str, tuple[str, ...]]:
    raw = resources.files("rulechat.data").joinpath("cues.txt").read_text()
    sections: dict[str, list[str]] = {"AND": [], "OR": [], "NEG": []}
    current: list[str] | None = None
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], [])
            continue
        if current is None:
            raise ValidationError("cue lexicon entry before any section header")
        current.append(" ".join(tokenize(line)))
    return {name: tuple(cues) for name, cues in sections.items()}


def _padded_tokens(text: str) -> str:
    return " " + " ".join(tokenize(text)) + " "


def detect_negation(sentence: str) -> bool:
    """True iff an outcome-level negation cue appears in the sentence."""
    padded = _padded_tokens(sentence)
    return any(f" {cue} " in padded for cue in _cue_lexicon()["NEG"])


def _list_cue_op(text: str) -> str | None:
    padded = _padded_tokens(text)
    for cue in _cue_lexicon()["OR"]:
        if f" {cue} " in padded:
            return "or"
    for cue in _cue_lexicon()["AND"]:
        if f" {cue} " in padded:
            return "and"
    return None


def snippet_from_text(text: str) -> RuleSnippet:
    """Lay out raw rule text into paragraph and bullet spans."""
    bullets: list[Span] = []
    paragraphs: list[Span] = []
    para_start: int | None = None
    para_end = 0
    offset = 0
    for line in text.split("\n"):
        stripped = line.strip()
        bullet = _BULLET_RE.match(line)
        if bullet:
            if para_start is not None:
                paragraphs.append((para_start, para_end))
                para_start = None
            content_start = offset + bullet.start(4)
            bullets.append((content_start, content_start + len(bullet.group(4))))
        elif stripped:
            first = offset + (len(line) - len(line.lstrip()))
            last = offset + len(line.rstrip())
            if para_start is None:
                para_start = first
            para_end = last
        else:
            if para_start is not None:
                paragraphs.append((para_start, para_end))
                para_start = None
        offset += len(line) + 1
    if para_start is not None:
        paragraphs.append((para_start, para_end))
    return RuleSnippet(text=text, bullets=tuple(bullets), paragraphs=tuple(paragraphs))


def _token_count(text: str) -> int:
    return len(tokenize(text))


def extract_rule_texts(
    document: str, max_len: int = 120, max_bullets: int = 6
) -> list[RuleSnippet]:
    """Split a document into rule snippets.

    A bulleted list is grouped with the paragraph introducing it; groups
    over the token or bullet budget are split into several snippets that
    each repeat the intro.  Overlong plain paragraphs are split on
    sentence boundaries.
    """
    if max_len < 1 or max_bullets < 1:
        raise ValidationError("max_len and max_bullets must be at least 1")

    # Parse the document into paragraph and bullet-list blocks.
    blocks: list[tuple[str, object]] = []
    para_lines: list[str] = []
    for line in document.split("\n"):
        bullet = _BULLET_RE.match(line)
        stripped = line.strip()
        if bullet:
            item = bullet.group(4)
            if blocks and blocks[-1][0] == "list" and not para_lines:
                blocks[-1][1].append(item)  # type: ignore[union-attr]
            else:
                if para_lines:
                    blocks.append(("para", " ".join(para_lines)))
                    para_lines = []
                blocks.append(("list", [item]))
        elif stripped:
            para_lines.append(stripped)
        else:
            if para_lines:
                blocks.append(("para", " ".join(para_lines)))
                para_lines = []
    if para_lines:
        blocks.append(("para", " ".join(para_lines)))

    # Group each list with its introducing paragraph.
    groups: list[tuple[str, list[str]]] = []  # (intro, bullet items)
    i = 0
    while i < len(blocks):
        kind, payload = blocks[i]
        if kind == "para":
            if i + 1 < len(blocks) and blocks[i + 1][0] == "list":
                groups.append((str(payload), list(blocks[i + 1][1])))  # type: ignore[arg-type]
                i += 2
            else:
                groups.append((str(payload), []))
                i += 1
        else:
            groups.append(("", list(payload)))  # type: ignore[arg-type]
            i += 1

    snippets: list[RuleSnippet] = []
    for intro, items in groups:
        if items:
            intro_tokens = _token_count(intro)
            chunks: list[list[str]] = []
            chunk: list[str] = []
            chunk_tokens = 0
            for item in items:
                item_tokens = _token_count(item)
                over_budget = (
                    len(chunk) >= max_bullets
                    or intro_tokens + chunk_tokens + item_tokens > max_len
                )
                if chunk and over_budget:
                    chunks.append(chunk)
                    chunk, chunk_tokens = [], 0
                chunk.append(item)
                chunk_tokens += item_tokens
            if chunk:
                chunks.append(chunk)
            for chunk in chunks:
                lines = ([intro] if intro else []) + [f"- {item}" for item in chunk]
                snippets.append(snippet_from_text("\n".join(lines)))
        elif intro:
            if _token_count(intro) <= max_len:
                snippets.append(snippet_from_text(intro))
            else:
                piece: list[str] = []
                piece_tokens = 0
                for sentence, _, _ in split_sentences(intro):
                    stokens = _token_count(sentence)
                    if piece and piece_tokens + stokens > max_len:
                        snippets.append(snippet_from_text(" ".join(piece)))
                        piece, piece_tokens = [], 0
                    piece.append(sentence)
                    piece_tokens += stokens
                if piece:
                    snippets.append(snippet_from_text(" ".join(piece)))
    return snippets


def _first_word(text: str) -> str:
    for token in tokenize(text):
        return token
    return ""


def _trim_span(text: str, start: int, end: int) -> Span:
    while start < end and text[start] in " \t\n":
        start += 1
    while end > start and text[end - 1] in " \t\n.,;:":
        end -= 1
    return (start, end)


def _split_coordination(text: str, base: int) -> tuple[list[Span], str | None]:
    """Split a clause on its coordination separators.

    Returns spans relative to the enclosing rule text (base offset
    added) and the connective joining them, or a single span and None
    when there is nothing to split.  A split point only counts when the
    text after it starts like an independent clause; "and" points win
    over "or" points when both are present.
    """
    def whole() -> list[Span]:
        s, e = _trim_span(text, 0, len(text))
        return [(base + s, base + e)]

    candidates: list[tuple[int, int, str | None]] = []  # (sep_start, sep_end, op)
    for m in _SEP_RE.finditer(text):
        op = (m.group(1) or m.group(2) or "").lower() or None
        if _first_word(text[m.end() :]) not in _BROAD_STARTERS:
            continue
        candidates.append((m.start(), m.end(), op))

    ops = {op for _, _, op in candidates if op}
    chosen = "and" if "and" in ops else ("or" if "or" in ops else None)
    if chosen is None:
        return whole(), None
    points = [
        (s, e) for s, e, op in candidates if op == chosen or op is None
    ]
    spans: list[Span] = []
    cursor = 0
    for s, e in points:
        if s <= cursor:
            continue
        spans.append(_trim_span(text, cursor, s))
        cursor = e
    spans.append(_trim_span(text, cursor, len(text)))
    spans = [(s, e) for s, e in spans if e > s]
    if len(spans) < 2:
        return whole(), None
    return [(base + s, base + e) for s, e in spans], chosen


def _condition_zones(paragraph: str, base: int) -> list[tuple[Span, bool]]:
    """Find condition zones ("if ...", "unless ...") inside a paragraph.

    Returns (span, negated) pairs with spans relative to the rule text.
    A cue that opens a sentence has its zone closed by the last comma
    that introduces an outcome clause; a mid-sentence cue's zone runs to
    the end of the sentence.
    """
    zones: list[tuple[Span, bool]] = []
    for sentence, s_start, _ in split_sentences(paragraph):
        m = _CONDITION_CUE_RE.search(sentence)
        if not m:
            continue
        cue = m.group(1).lower()
        negated = cue == "unless"
        zone_start = m.end()
        zone_end = len(sentence)
        lead = sentence[: m.start()]
        if not tokenize(lead):  # cue opens the sentence
            last_break = None
            for cm in re.finditer(r",\s+", sentence[zone_start:]):
                after = sentence[zone_start + cm.end() :]
                if _first_word(after) in _SUBJECT_STARTERS:
                    last_break = zone_start + cm.start()
            if last_break is not None:
                zone_end = last_break
        start, end = _trim_span(sentence, zone_start, zone_end)
        if end > start:
            zones.append(((base + s_start + start, base + s_start + end), negated))
    return zones


def segment_conditions(snippet: RuleSnippet) -> list[Condition]:
    """Extract condition clauses from a snippet.

    Bullet items become conditions directly (split further on internal
    coordination); without bullets, conditions come from "if"-style
    clause zones split on coordination boundaries.  A declarative
    snippet with neither yields no conditions.
    """
    text = snippet.text
    conditions: list[Condition] = []
    if snippet.bullets:
        for b_start, b_end in snippet.bullets:
            content = text[b_start:b_end]
            tail = _BULLET_TAIL_RE.search(content)
            if tail:
                content = content[: tail.start()]
            spans, _ = _split_coordination(content, b_start)
            for start, end in spans:
                conditions.append(
                    Condition(text[start:end], start, end, origin="bullet")
                )
        return conditions
    for p_start, p_end in snippet.paragraphs:
        for (z_start, z_end), negated in _condition_zones(
            text[p_start:p_end], p_start
        ):
            zone_text = text[z_start:z_end]
            spans, _ = _split_coordination(zone_text, z_start)
            for start, end in spans:
                conditions.append(
                    Condition(
                        text[start:end], start, end, origin="inline", negated=negated
                    )
                )
    return conditions


def _group_op(text: str, spans: list[Span]) -> tuple[str, bool]:
    """Connective for consecutive condition spans, from the glue between
    them.  Returns (op, defaulted)."""
    glue_words: set[str] = set()
    for (_, prev_end), (next_start, _) in zip(spans, spans[1:]):
        glue_words.update(tokenize(text[prev_end:next_start]))
    if "or" in glue_words:
        return "or", False
    if "and" in glue_words:
        return "and", False
    return "and", True


def detect_logic(snippet: RuleSnippet, conditions: list[Condition]) -> RuleLogic:
    """Join conditions into a connective tree.

    Bullet conditions group by bullet item; a list-level cue phrase in
    the intro (or trailing coordinators between items) picks the list
    connective, and the glue inside each item picks the item's own.
    Without any cue the list defaults to AND and is flagged ambiguous.
    """
    text = snippet.text
    for c in conditions:
        if not (0 <= c.start < c.end <= len(text)) or text[c.start : c.end] != c.text:
            raise ValidationError(
                f"condition list inconsistent with snippet at span {c.char_span}"
            )

    # Outcome negation is judged on the text outside all condition spans.
    outside: list[str] = []
    cursor = 0
    for c in sorted(conditions, key=lambda c: c.start):
        outside.append(text[cursor : c.start])
        cursor = max(cursor, c.end)
    outside.append(text[cursor:])
    outcome_negated = detect_negation(" ".join(outside))

    if not conditions:
        return RuleLogic((), None, outcome_negated)

    order = sorted(range(len(conditions)), key=lambda i: conditions[i].start)
    ambiguous = False

    def containing_bullet(c: Condition) -> int:
        for bi, (b_start, b_end) in enumerate(snippet.bullets):
            if b_start <= c.start and c.end <= b_end:
                return bi
        return -1

    # Group condition indices by bullet item (inline conditions form one group).
    groups: list[list[int]] = []
    group_keys: list[int] = []
    for i in order:
        key = containing_bullet(conditions[i])
        if groups and key == group_keys[-1] and key != -1:
            groups[-1].append(i)
        elif groups and key == -1 and group_keys[-1] == -1:
            groups[-1].append(i)
        else:
            groups.append([i])
            group_keys.append(key)

    nodes: list[Logic] = []
    for members in groups:
        if len(members) == 1:
            nodes.append(Logic.cond(members[0]))
            continue
        spans = [conditions[i].char_span for i in members]
        op, defaulted = _group_op(text, spans)
        ambiguous = ambiguous or defaulted
        nodes.append(Logic(op, tuple(Logic.cond(i) for i in members)))

    if len(nodes) == 1:
        return RuleLogic(tuple(conditions), nodes[0], outcome_negated, ambiguous)

    # List-level connective: intro cue first, then trailing coordinators
    # between items, then the ambiguous-AND default.
    first_cond = min(c.start for c in conditions)
    list_op = _list_cue_op(text[:first_cond])
    if list_op is None:
        between: set[str] = set()
        bounds = [
            (max(conditions[i].end for i in g), min(conditions[j].start for j in ng))
            for g, ng in zip(groups, groups[1:])
        ]
        for prev_end, next_start in bounds:
            between.update(tokenize(text[prev_end:next_start]))
        if "or" in between:
            list_op = "or"
        elif "and" in between:
            list_op = "and"
        else:
            list_op = "and"
            ambiguous = True

    # Splice children that share the list connective to keep depth at 2.
    children: list[Logic] = []
    for node in nodes:
        if node.op == list_op:
            children.extend(node.children)
        else:
            children.append(node)
    structure = Logic(list_op, tuple(children))
    return RuleLogic(tuple(conditions), structure, outcome_negated, ambiguous)


def parse_rule(text: str) -> RuleLogic:
    """snippet_from_text + segment_conditions + detect_logic in one call."""
    snippet = snippet_from_text(text)
    return detect_logic(snippet, segment_conditions(snippet))
