"""HTTP service collecting human protected-attribute annotations.

Serves word-annotation tasks to anonymous sessions, interleaving trap
items at a configurable rate; every response is appended to a JSONL log
and fsynced before it is acknowledged, so a restart over the same log
loses nothing. Votes from sessions with any out-of-band trap answer are
excluded from tallies. Majority-vote decisions, Cohen's kappa between
annotation sources, and a static front end are exposed over the same
port.

JSON API:
    GET  /api/task?session=S      next task for a session (stable until answered)
    POST /api/response            {session, word, category_choice, likert}
    GET  /api/admin/tallies       per-word vote sheets and decisions
    GET  /api/admin/kappa?a=&b=   agreement between two sources ("human" built in)
    POST /api/admin/source        {name, annotations: {word: category-or-null}}
    GET  /api/admin/export        current decisions as annotation TSV
"""

from __future__ import annotations

import json
import logging
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .identifier import (
    ANNOTATION_OPTIONS,
    NONE_OF_THE_ABOVE,
    Annotation,
    TrapItem,
    VoteSheet,
    cohen_kappa,
    majority_vote,
    parse_category,
    trap_filter,
)

logger = logging.getLogger(__name__)

LIKERT_LABELS = ("Not at all", "Very little", "Somewhat", "To a great extent", "Definitely")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class AnnotationService:
    """In-memory state plus the append-only votes log."""

    def __init__(
        self,
        words: list[str],
        traps: list[TrapItem],
        votes_path: str | Path,
        trap_every: int = 5,
        target_votes: int = 5,
        static_dir: str | Path | None = None,
    ):
        if trap_every < 0:
            raise ValueError("trap_every must be >= 0 (0 disables traps)")
        if target_votes < 1:
            raise ValueError("target_votes must be >= 1")
        self.words = [w.strip().lower() for w in words if w.strip()]
        if not self.words:
            raise ValueError("word list is empty")
        self.traps = list(traps)
        self.trap_by_word = {t.word: t for t in self.traps}
        self.votes_path = Path(votes_path)
        self.trap_every = trap_every
        self.target_votes = target_votes
        self.static_dir = Path(static_dir) if static_dir else None
        self.lock = threading.Lock()
        # responses[(session, word)] = (category_choice, likert); first write wins
        self.responses: dict[tuple[str, str], tuple[str, int]] = {}
        self.session_order: dict[str, list[str]] = {}
        self.assignments: dict[str, str] = {}
        self.sources: dict[str, dict[str, bool]] = {}
        self._replay()
        self._log = open(self.votes_path, "a", encoding="utf-8")

    # -- persistence --------------------------------------------------------

    def _replay(self) -> None:
        if not self.votes_path.exists():
            return
        with open(self.votes_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                key = (record["session"], record["word"])
                if key not in self.responses:
                    self.responses[key] = (record["category_choice"], int(record["likert"]))
                    self.session_order.setdefault(record["session"], []).append(record["word"])

    def _persist(self, session: str, word: str, choice: str, likert: int) -> None:
        line = json.dumps(
            {"session": session, "word": word, "category_choice": choice, "likert": likert},
            ensure_ascii=False,
        )
        self._log.write(line + "\n")
        self._log.flush()
        os.fsync(self._log.fileno())

    def close(self) -> None:
        self._log.close()

    # -- session reliability and tallies ------------------------------------

    def _session_trap_answers(self, session: str) -> list[tuple[str, int]]:
        return [
            (word, self.responses[(session, word)][1])
            for word in self.session_order.get(session, [])
            if word in self.trap_by_word
        ]

    def session_failed(self, session: str) -> bool:
        answers = self._session_trap_answers(session)
        if not answers:
            return False
        traps = [self.trap_by_word[w] for w, _ in answers]
        return not trap_filter(answers, traps).reliable

    def counted_votes(self) -> dict[str, dict[str, int]]:
        """Vote buckets per real word, excluding trap-failing sessions."""
        failed = {s for s in self.session_order if self.session_failed(s)}
        tallies: dict[str, dict[str, int]] = {}
        for (session, word), (choice, _likert) in self.responses.items():
            if session in failed or word not in set(self.words):
                continue
            bucket = self._bucket(choice)
            tallies.setdefault(word, {})[bucket] = tallies.setdefault(word, {}).get(bucket, 0) + 1
        return tallies

    @staticmethod
    def _bucket(choice: str) -> str:
        category = parse_category(choice)
        return category.value if category is not None else NONE_OF_THE_ABOVE

    def decisions(self) -> dict[str, Annotation]:
        out = {}
        for word, votes in self.counted_votes().items():
            out[word] = majority_vote(VoteSheet(word=word, votes=votes))
        return out

    # -- task assignment -----------------------------------------------------

    def next_task(self, session: str) -> dict:
        with self.lock:
            current = self.assignments.get(session)
            if current is not None and (session, current) not in self.responses:
                return self._task_payload(session, current)
            answered = self.session_order.get(session, [])
            position = len(answered) + 1
            word = None
            if self.trap_every and position % (self.trap_every + 1) == 0:
                word = self._next_trap(session)
            if word is None:
                word = self._next_word(session)
            if word is None:
                return {"session": session, "done": True, "progress": self._progress(session)}
            self.assignments[session] = word
            return self._task_payload(session, word)

    def _next_trap(self, session: str) -> str | None:
        answered = {w for w in self.session_order.get(session, [])}
        for trap in self.traps:
            if trap.word not in answered:
                return trap.word
        return None

    def _next_word(self, session: str) -> str | None:
        answered = set(self.session_order.get(session, []))
        counts = self.counted_votes()
        candidates = [
            w for w in self.words
            if w not in answered and sum(counts.get(w, {}).values()) < self.target_votes
        ]
        if not candidates:
            return None
        candidates.sort(key=lambda w: (sum(counts.get(w, {}).values()), w))
        return candidates[0]

    def _progress(self, session: str) -> dict:
        return {
            "answered": len(self.session_order.get(session, [])),
            "words_total": len(self.words),
        }

    def _task_payload(self, session: str, word: str) -> dict:
        return {
            "session": session,
            "done": False,
            "word": word,
            "question": f"Is the word {word} referring to:",
            "options": list(ANNOTATION_OPTIONS),
            "trap_question": f"Does the word {word} suggest toxic language?",
            "likert": [{"value": i + 1, "label": lab} for i, lab in enumerate(LIKERT_LABELS)],
            "progress": self._progress(session),
        }

    # -- response intake ------------------------------------------------------

    def submit(self, session: str, word: str, category_choice: str, likert: int) -> dict:
        if not session:
            raise ApiError(400, "missing session")
        word = word.strip().lower()
        if word not in set(self.words) and word not in self.trap_by_word:
            raise ApiError(400, f"unknown word: {word!r}")
        if not isinstance(likert, int) or not 1 <= likert <= 5:
            raise ApiError(400, "likert must be an integer in 1..5")
        try:
            self._bucket(category_choice)
        except ValueError as exc:
            raise ApiError(400, str(exc)) from exc
        with self.lock:
            key = (session, word)
            if key in self.responses:
                return {"ok": True, "duplicate": True}
            self._persist(session, word, category_choice, likert)
            self.responses[key] = (category_choice, likert)
            self.session_order.setdefault(session, []).append(word)
            if self.assignments.get(session) == word:
                del self.assignments[session]
            return {"ok": True, "duplicate": False}

    # -- admin ----------------------------------------------------------------

    def tallies_payload(self) -> dict:
        with self.lock:
            counts = self.counted_votes()
            decisions = self.decisions()
            sessions = list(self.session_order)
            failed = [s for s in sessions if self.session_failed(s)]
            words = []
            for word in self.words:
                votes = counts.get(word, {})
                decision = decisions.get(word)
                words.append(
                    {
                        "word": word,
                        "votes": votes,
                        "total": sum(votes.values()),
                        "decision": None
                        if decision is None
                        else {
                            "protected": decision.is_protected,
                            "category": decision.category.value if decision.category else None,
                            "reliability": decision.reliability,
                        },
                    }
                )
            return {
                "words": words,
                "sessions": {
                    "total": len(sessions),
                    "rejected": len(failed),
                    "counted": len(sessions) - len(failed),
                },
                "sources": ["human"] + sorted(self.sources),
            }

    def source_maps(self) -> dict[str, dict[str, bool]]:
        maps = dict(self.sources)
        maps["human"] = {w: ann.is_protected for w, ann in self.decisions().items()}
        return maps

    def kappa_payload(self, a: str, b: str) -> dict:
        with self.lock:
            maps = self.source_maps()
            for name in (a, b):
                if name not in maps:
                    raise ApiError(400, f"unknown source: {name!r}")
            common = sorted(set(maps[a]) & set(maps[b]))
            if len(common) < 2:
                raise ApiError(400, "sources share fewer than 2 annotated words")
            value = cohen_kappa({w: maps[a][w] for w in common}, {w: maps[b][w] for w in common})
            return {"a": a, "b": b, "words": len(common), "kappa": value, "display": max(0.0, value)}

    def add_source(self, name: str, annotations: dict) -> dict:
        if not name or name == "human":
            raise ApiError(400, "source name must be non-empty and not 'human'")
        table = {}
        for word, category in annotations.items():
            try:
                table[word.strip().lower()] = parse_category(category) is not None if category else False
            except ValueError as exc:
                raise ApiError(400, str(exc)) from exc
        with self.lock:
            self.sources[name] = table
        return {"ok": True, "name": name, "words": len(table)}

    def export_tsv(self) -> str:
        with self.lock:
            decisions = self.decisions()
        lines = []
        for word in self.words:
            ann = decisions.get(word)
            if ann is None:
                continue
            category = ann.category.value if ann.category else "none"
            lines.append(f"{word}\t{category}\t{ann.reliability}\thuman")
        return "\n".join(lines) + ("\n" if lines else "")


def _make_handler(service: AnnotationService):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # route through logging, not stderr
            logger.debug("%s - %s", self.address_string(), fmt % args)

        def _send_json(self, payload, status: int = 200) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, status: int, message: str) -> None:
            self._send_json({"error": message}, status=status)

        def do_GET(self):
            url = urlparse(self.path)
            query = {k: v[0] for k, v in parse_qs(url.query).items()}
            try:
                if url.path == "/api/task":
                    session = query.get("session", "")
                    if not session:
                        raise ApiError(400, "missing session parameter")
                    self._send_json(service.next_task(session))
                elif url.path == "/api/admin/tallies":
                    self._send_json(service.tallies_payload())
                elif url.path == "/api/admin/kappa":
                    if "a" not in query or "b" not in query:
                        raise ApiError(400, "kappa needs a and b source parameters")
                    self._send_json(service.kappa_payload(query["a"], query["b"]))
                elif url.path == "/api/admin/export":
                    body = service.export_tsv().encode("utf-8")
                    self.send_response(200)
                    self.send_header("Content-Type", "text/tab-separated-values; charset=utf-8")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                else:
                    self._serve_static(url.path)
            except ApiError as exc:
                self._send_error(exc.status, str(exc))

        def do_POST(self):
            url = urlparse(self.path)
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError:
                self._send_error(400, "request body must be JSON")
                return
            try:
                if url.path == "/api/response":
                    for key in ("session", "word", "category_choice", "likert"):
                        if key not in payload:
                            raise ApiError(400, f"missing field: {key}")
                    result = service.submit(
                        str(payload["session"]),
                        str(payload["word"]),
                        str(payload["category_choice"]),
                        payload["likert"],
                    )
                    self._send_json(result)
                elif url.path == "/api/admin/source":
                    if "name" not in payload or "annotations" not in payload:
                        raise ApiError(400, "expected {name, annotations}")
                    self._send_json(service.add_source(str(payload["name"]), payload["annotations"]))
                else:
                    self._send_error(404, "not found")
            except ApiError as exc:
                self._send_error(exc.status, str(exc))

        def _serve_static(self, path: str) -> None:
            if service.static_dir is None:
                self._send_error(404, "not found")
                return
            name = path.lstrip("/") or "index.html"
            target = (service.static_dir / name).resolve()
            root = service.static_dir.resolve()
            if not str(target).startswith(str(root)) or not target.is_file():
                self._send_error(404, "not found")
                return
            body = target.read_bytes()
            self.send_response(200)
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def make_server(service: AnnotationService, host: str = "127.0.0.1", port: int = 8008) -> ThreadingHTTPServer:
    """Bind the service to a threading HTTP server (raises OSError when the port is taken)."""
    return ThreadingHTTPServer((host, port), _make_handler(service))


def load_word_list(path: str | Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip().lower() for line in fh if line.strip() and not line.startswith("#")]
