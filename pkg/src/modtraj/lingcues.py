"""Perceived-fairness cues in messages written during a block.

Detection is surface pattern matching over tokens and sentences. It
approximates dependency-tree politeness markers, so every
:class:`CueFlags` carries ``approx=True``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable

from .ingest import BlockSpan, CommentAction, CommentEvent, PageKind

TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


@dataclass(frozen=True)
class CueLexicon:
    apology_prefixes: tuple = ("apolog", "sorry", "forgiv", "regret")
    apology_phrases: tuple = ("excuse me", "my mistake", "my bad")
    question_openers: tuple = ("so what", "so why", "why", "how", "what", "who")
    unfair_words: tuple = (
        "unjust", "unjustified", "illegitimate", "illegal", "unfair", "not fair",
        "wrongly", "falsely", "injustice", "unfounded", "unwarranted",
    )
    unfair_prefixes: tuple = ("accus", "alleg")

    @classmethod
    def from_json(cls, path) -> "CueLexicon":
        """Load overrides from a JSON object keyed by field name."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown lexicon keys: {sorted(unknown)}")
        return cls(**{k: tuple(str(x).lower() for x in v) for k, v in raw.items()})


DEFAULT_LEXICON = CueLexicon()


@dataclass(frozen=True)
class Snippet:
    cue: str
    start: int
    end: int
    text: str


def _phrase_pattern(phrases: Iterable[str]) -> str:
    # multiword phrases tolerate any run of whitespace between words
    return "|".join(r"\s+".join(map(re.escape, p.split())) for p in phrases)


class CueDetector:
    """Compiled detectors for one :class:`CueLexicon`."""

    def __init__(self, lexicon: CueLexicon = DEFAULT_LEXICON):
        self.lexicon = lexicon
        alts = []
        if lexicon.apology_prefixes:
            alts.append(r"\b(?:%s)\w*" % "|".join(map(re.escape, lexicon.apology_prefixes)))
        if lexicon.apology_phrases:
            alts.append(r"\b(?:%s)\b" % _phrase_pattern(lexicon.apology_phrases))
        self._apology = re.compile("|".join(alts) or r"(?!)", re.IGNORECASE)

        alts = []
        if lexicon.unfair_words:
            alts.append(r"\b(?:%s)\b" % _phrase_pattern(lexicon.unfair_words))
        if lexicon.unfair_prefixes:
            alts.append(r"\b(?:%s)\w*" % "|".join(map(re.escape, lexicon.unfair_prefixes)))
        self._unfair = re.compile("|".join(alts) or r"(?!)", re.IGNORECASE)

        openers = sorted(lexicon.question_openers, key=len, reverse=True)
        self._opener = re.compile(
            r"[^\w]*(%s)\b" % _phrase_pattern(openers), re.IGNORECASE
        )
        self._sentence = re.compile(r"[^.?!]+[.?!]*")

    def _hits(self, regex, cue, text):
        return [Snippet(cue, m.start(), m.end(), m.group(0)) for m in regex.finditer(text)]

    def find_apology(self, text: str) -> list[Snippet]:
        return self._hits(self._apology, "apology", text)

    def find_unfairness(self, text: str) -> list[Snippet]:
        return self._hits(self._unfair, "unfairness", text)

    def find_direct_question(self, text: str) -> list[Snippet]:
        """Sentences that open with an interrogative and end in a question mark.

        Sentences are split on ``.``, ``?`` and ``!``; leading punctuation
        such as wiki indentation colons is skipped.
        """
        out = []
        for m in self._sentence.finditer(text):
            sentence = m.group(0)
            stripped = sentence.rstrip()
            if not stripped.endswith("?"):
                continue
            opener = self._opener.match(sentence)
            if opener is None:
                continue
            lead = opener.start(1)
            end = m.start() + len(stripped)
            out.append(Snippet("direct_question", m.start() + lead, end,
                               text[m.start() + lead:end]))
        return out


_default_detector = CueDetector()


def detect_apology(text: str, detector: CueDetector = _default_detector) -> bool:
    return bool(detector.find_apology(text))


def detect_direct_question(text: str, detector: CueDetector = _default_detector) -> bool:
    return bool(detector.find_direct_question(text))


def detect_unfairness(text: str, detector: CueDetector = _default_detector) -> bool:
    return bool(detector.find_unfairness(text))


@dataclass(frozen=True)
class CueFlags:
    apology: bool = False
    direct_question: bool = False
    unfairness: bool = False
    n_messages: int = 0
    matched_snippets: tuple = field(default=())
    approx: bool = True

    def get(self, cue: str) -> bool:
        if cue not in ("apology", "direct_question", "unfairness"):
            raise KeyError(cue)
        return getattr(self, cue)


CUES = ("apology", "direct_question", "unfairness")


def in_block_messages(timeline, span: BlockSpan) -> list[CommentEvent]:
    """Adds and edits by the user on their own talk page during ``span``."""
    user = timeline.user
    return [
        ev
        for ev in timeline.comments_authored
        if ev.page_kind is PageKind.USER
        and ev.owner == user
        and ev.action is not CommentAction.DELETE
        and span.start <= ev.timestamp < span.effective_end
    ]


def flags_for_messages(
    messages: Iterable[CommentEvent], detector: CueDetector = _default_detector
) -> CueFlags:
    snippets = []
    n = 0
    for ev in messages:
        n += 1
        snippets += detector.find_apology(ev.text)
        snippets += detector.find_direct_question(ev.text)
        snippets += detector.find_unfairness(ev.text)
    present = {s.cue for s in snippets}
    return CueFlags(
        apology="apology" in present,
        direct_question="direct_question" in present,
        unfairness="unfairness" in present,
        n_messages=n,
        matched_snippets=tuple((s.cue, s.text) for s in snippets),
    )


def cue_flags(timeline, span: BlockSpan, detector: CueDetector = _default_detector) -> CueFlags:
    return flags_for_messages(in_block_messages(timeline, span), detector)


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text.lower())
