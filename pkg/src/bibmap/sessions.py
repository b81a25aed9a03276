"""Human review sessions over a read-only corpus snapshot.

Two kinds:

  keywording  stop once clean_streak reaches the streak target (default 10):
              that many consecutive `related` verdicts since the most recent
              false positive, or since the start.
  qa-audit    stop once a fixed number of verdicts has been recorded.

References are drawn lazily, one at a time, from a seeded without-replacement
stream; the first k draws for a seed never change, so a crashed or resumed
session re-draws the same ids. advance_session returns the outstanding not
yet judged id when one exists, which makes polling idempotent.

Every state change is appended to a line-delimited JSON journal before the
call returns, and replaying the journal rebuilds the exact session state.
The journal is the durable truth; the in-memory object is a cache of it.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import uuid
from typing import Iterable

from bibmap.errors import SamplingError, SessionError
from bibmap.records import Corpus
from bibmap.stats import SampleStream

KINDS = ("keywording", "qa-audit")
RELATED = "related"
FALSE_POSITIVE = "false-positive"
DEFAULT_STREAK_TARGET = 10

ACTIVE = "active"
COMPLETE = "complete"
COMPLETE_EXHAUSTED = "complete-exhausted"


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]


class ReviewSession:
    """Single-writer review session; safe to share a corpus across sessions."""

    def __init__(self, kind: str, seed: int, corpus: Corpus,
                 target: int | None = None,
                 streak_target: int = DEFAULT_STREAK_TARGET,
                 session_id: str | None = None,
                 journal_path: str | None = None,
                 _replaying: bool = False):
        if kind not in KINDS:
            raise SessionError(f"unknown session kind {kind!r}")
        if kind == "qa-audit":
            if target is None or target < 1:
                raise SessionError("qa-audit sessions need a positive verdict target")
            if target > len(corpus):
                raise SamplingError(
                    f"qa-audit target {target} exceeds corpus size {len(corpus)}")
        elif target is not None:
            raise SessionError("only qa-audit sessions take a verdict target")
        if streak_target < 1:
            raise SessionError("streak target must be at least 1")
        if len(corpus) == 0:
            raise SessionError("cannot review an empty corpus")

        self.session_id = session_id or new_session_id()
        self.kind = kind
        self.seed = seed
        self.target = target
        self.streak_target = streak_target
        self.corpus_digest = corpus.digest
        self.corpus_size = len(corpus)
        self.journal_path = journal_path

        self._stream = SampleStream(len(corpus), seed)
        self.drawn: list[str] = []
        self.verdicts: dict[str, dict] = {}   # ref-id -> {judgment, keywords, notes}
        self.clean_streak = 0
        self.pool: list[str] = []             # exclusion keywords from false positives
        self.state = ACTIVE

        if not _replaying:
            self._journal("created", {
                "session_id": self.session_id, "kind": kind, "seed": seed,
                "target": target, "streak_target": streak_target,
                "corpus_digest": self.corpus_digest, "corpus_size": self.corpus_size,
            })

    # -- journal ----------------------------------------------------------

    def _journal(self, event: str, payload: dict) -> None:
        if self.journal_path is None:
            return
        line = json.dumps(
            {"event": event, "t": _dt.datetime.now(_dt.timezone.utc).isoformat(),
             "payload": payload},
            sort_keys=True)
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- state machine ----------------------------------------------------

    def _complete_now(self) -> bool:
        if self.kind == "keywording":
            return self.clean_streak >= self.streak_target
        return len(self.verdicts) >= self.target

    def _outstanding(self) -> str | None:
        if self.drawn and self.drawn[-1] not in self.verdicts:
            return self.drawn[-1]
        return None

    def advance(self, corpus: Corpus) -> str | None:
        """Next reference id to judge, or None once the session is complete."""
        self._check_corpus(corpus)
        if self.state == COMPLETE_EXHAUSTED:
            raise SessionError("session ended with the population exhausted")
        if self.state == COMPLETE or self._complete_now():
            self.state = COMPLETE
            return None
        outstanding = self._outstanding()
        if outstanding is not None:
            return outstanding
        try:
            index = self._stream.next_index()
        except SamplingError:
            self.state = COMPLETE_EXHAUSTED
            self._journal("exhausted", {})
            raise SamplingError("population exhausted before the session completed")
        ref_id = corpus.references[index].id
        self.drawn.append(ref_id)
        self._journal("drawn", {"ref_id": ref_id, "index": index})
        return ref_id

    def record(self, ref_id: str, judgment: str,
               keywords: Iterable[str] = (), notes: str = "") -> "ReviewSession":
        if judgment not in (RELATED, FALSE_POSITIVE):
            raise SessionError(f"verdict must be {RELATED!r} or {FALSE_POSITIVE!r}, got {judgment!r}")
        if ref_id not in self.drawn:
            raise SessionError(f"reference {ref_id!r} was not issued by this session")
        if ref_id in self.verdicts:
            raise SessionError(f"reference {ref_id!r} already has a verdict")
        kw = tuple(k.strip() for k in keywords if k and k.strip())
        if judgment == RELATED and kw:
            raise SessionError("related verdicts carry no exclusion keywords")

        self.verdicts[ref_id] = {"judgment": judgment, "keywords": list(kw), "notes": notes}
        if judgment == RELATED:
            self.clean_streak += 1
        else:
            self.clean_streak = 0
            for keyword in kw:
                if keyword not in self.pool:
                    self.pool.append(keyword)
        if self._complete_now():
            self.state = COMPLETE
        self._journal("verdict", {"ref_id": ref_id, "judgment": judgment,
                                  "keywords": list(kw), "notes": notes})
        return self

    def _check_corpus(self, corpus: Corpus) -> None:
        if corpus.digest != self.corpus_digest:
            raise SessionError(
                f"corpus digest {corpus.digest} does not match the session's "
                f"snapshot {self.corpus_digest}")

    # -- views ------------------------------------------------------------

    @property
    def judged(self) -> int:
        return len(self.verdicts)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "kind": self.kind,
            "seed": self.seed,
            "state": self.state,
            "clean_streak": self.clean_streak,
            "streak_target": self.streak_target,
            "target": self.target,
            "judged": self.judged,
            "drawn": list(self.drawn),
            "verdicts": {rid: dict(v) for rid, v in self.verdicts.items()},
            "pool": list(self.pool),
            "corpus_digest": self.corpus_digest,
            "corpus_size": self.corpus_size,
        }


def advance_session(session: ReviewSession, corpus: Corpus) -> str | None:
    return session.advance(corpus)


def record_verdict(session: ReviewSession, ref_id: str, judgment: str,
                   keywords: Iterable[str] = (), notes: str = "") -> ReviewSession:
    return session.record(ref_id, judgment, keywords=keywords, notes=notes)


def load_session(journal_path: str, corpus: Corpus) -> ReviewSession:
    """Rebuild a session from its journal, verifying every draw against the
    seeded stream so a wrong corpus or seed is caught immediately."""
    with open(journal_path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise SessionError(f"journal {journal_path} is empty")
    events = []
    for lineno, line in enumerate(lines, start=1):
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SessionError(f"journal {journal_path} line {lineno}: {exc}") from exc
    head = events[0]
    if head.get("event") != "created":
        raise SessionError(f"journal {journal_path} does not start with a created event")
    meta = head["payload"]
    if meta["corpus_digest"] != corpus.digest:
        raise SessionError(
            f"journal was recorded against corpus {meta['corpus_digest']}, "
            f"not {corpus.digest}")

    session = ReviewSession(
        kind=meta["kind"], seed=meta["seed"], corpus=corpus,
        target=meta.get("target"),
        streak_target=meta.get("streak_target", DEFAULT_STREAK_TARGET),
        session_id=meta["session_id"], journal_path=None, _replaying=True)

    for event in events[1:]:
        kind, payload = event.get("event"), event.get("payload", {})
        if kind == "drawn":
            index = session._stream.next_index()
            if index != payload["index"] or corpus.references[index].id != payload["ref_id"]:
                raise SessionError(
                    f"journal draw {payload['ref_id']!r} does not match the "
                    f"seeded stream; corpus or seed mismatch")
            session.drawn.append(payload["ref_id"])
        elif kind == "verdict":
            session.record(payload["ref_id"], payload["judgment"],
                           keywords=payload.get("keywords", ()),
                           notes=payload.get("notes", ""))
        elif kind == "exhausted":
            session.state = COMPLETE_EXHAUSTED
        else:
            raise SessionError(f"journal {journal_path}: unknown event {kind!r}")

    session.journal_path = journal_path
    return session
