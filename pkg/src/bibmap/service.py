"""Local HTTP service backing the review UI.

Endpoints (all JSON; errors are {code, message, details}):

    GET  /corpus/stats
    POST /queries/preview          {query, fields?}
    POST /sessions                 {kind, seed, target?}
    GET  /sessions/{id}
    GET  /sessions/{id}/next
    POST /sessions/{id}/verdicts   {ref_id, judgment, keywords?, notes?}
    GET  /analytics/timeseries     ?kind=counts|citations&from=&to=
    GET  /analytics/categories
    GET  /analytics/fit            ?kind=&from=&to=&t0=&max-degree=&...

The server is single-threaded, so requests are handled strictly in arrival
order; per-session ordering follows for free. Every response carries
Connection: close, because a client parking an idle keep-alive connection
would otherwise block the accept loop for everyone else. It binds loopback
by default. A pid lockfile in the session store directory keeps two service
instances from journaling over each other; a second instance fails naming
the holder.

When a UI directory is configured, files in it are served for any path that
does not match an endpoint, with / mapping to index.html.
"""

from __future__ import annotations

import json
import mimetypes
import os
import re
import urllib.parse
from http.server import BaseHTTPRequestHandler, HTTPServer

from bibmap import rulefiles
from bibmap.errors import (BibmapError, QuerySyntaxError, RegressionError,
                           SamplingError, ServiceError, SessionError)
from bibmap.queries import ALL_FIELDS, FieldMask, format_query, parse_query, run_query
from bibmap.records import Corpus
from bibmap.sessions import ReviewSession, load_session, new_session_id
from bibmap.trends import (CategorySpec, category_counts, counts_per_year,
                           cumulative_citations_per_year, fit_stepwise)

PREVIEW_ID_CAP = 200


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.details = details or {}


class StoreLock:
    """Pid lockfile; stale locks from dead processes are reclaimed."""

    def __init__(self, store_dir: str):
        self.path = os.path.join(store_dir, ".lock")
        self.acquired = False

    def acquire(self) -> None:
        os.makedirs(os.path.dirname(self.path), exist_ok=True)
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                holder = self._holder()
                if holder is not None:
                    raise ServiceError(
                        f"session store is locked by running process {holder} "
                        f"({self.path})")
                os.unlink(self.path)   # stale lock, owner is gone
                continue
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            self.acquired = True
            return

    def _holder(self) -> int | None:
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                pid = int(fh.read().strip())
        except (OSError, ValueError):
            return None
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return None
        except PermissionError:
            return pid
        return pid

    def release(self) -> None:
        if self.acquired:
            try:
                os.unlink(self.path)
            except FileNotFoundError:
                pass
            self.acquired = False


def _reference_payload(ref) -> dict:
    return ref.to_dict()


class ReviewService:
    """Request dispatcher; owns the corpus snapshot and the session store."""

    def __init__(self, corpus: Corpus, store_dir: str,
                 categories_file: str | None = None):
        self.corpus = corpus
        self.store_dir = store_dir
        self.categories_file = categories_file
        self.sessions: dict[str, ReviewSession] = {}
        os.makedirs(store_dir, exist_ok=True)
        self._load_existing_sessions()

    def _load_existing_sessions(self) -> None:
        for name in sorted(os.listdir(self.store_dir)):
            if not name.endswith(".journal"):
                continue
            path = os.path.join(self.store_dir, name)
            try:
                session = load_session(path, self.corpus)
            except (SessionError, BibmapError):
                continue   # journal belongs to a different corpus snapshot
            self.sessions[session.session_id] = session

    # -- endpoint implementations ------------------------------------------

    def corpus_stats(self) -> dict:
        years = [ref.year for ref in self.corpus if ref.year is not None]
        per_source: dict[str, int] = {}
        for ref in self.corpus:
            per_source[ref.source_db] = per_source.get(ref.source_db, 0) + 1
        return {
            "size": len(self.corpus),
            "year_range": [min(years), max(years)] if years else None,
            "per_source": dict(sorted(per_source.items())),
            "digest": self.corpus.digest,
            "retrieval_date": (self.corpus.retrieval_date.isoformat()
                               if self.corpus.retrieval_date else None),
        }

    def preview_query(self, body: dict) -> dict:
        text = body.get("query")
        if not isinstance(text, str):
            raise _ApiError(400, "bad-request", "body needs a string 'query'")
        mask = ALL_FIELDS
        if body.get("fields"):
            try:
                mask = FieldMask.from_names(body["fields"])
            except ValueError as exc:
                raise _ApiError(400, "bad-request", str(exc))
        try:
            ast = parse_query(text)
        except QuerySyntaxError as exc:
            raise _ApiError(400, "query-syntax", str(exc),
                            {"position": exc.position})
        ids, count = run_query(self.corpus, ast, mask)
        return {
            "query": format_query(ast),
            "count": count,
            "ids": list(ids[:PREVIEW_ID_CAP]),
            "truncated": count > PREVIEW_ID_CAP,
        }

    def create_session(self, body: dict) -> dict:
        kind = body.get("kind")
        seed = body.get("seed")
        if not isinstance(seed, int):
            raise _ApiError(400, "bad-request", "body needs an integer 'seed'")
        target = body.get("target")
        session_id = new_session_id()
        journal = os.path.join(self.store_dir, f"{session_id}.journal")
        try:
            session = ReviewSession(kind=kind, seed=seed, corpus=self.corpus,
                                    target=target, session_id=session_id,
                                    journal_path=journal)
        except (SessionError, SamplingError) as exc:
            raise _ApiError(400, "bad-session", str(exc))
        self.sessions[session.session_id] = session
        return session.to_dict()

    def _session(self, session_id: str) -> ReviewSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise _ApiError(404, "not-found", f"no session {session_id!r}",
                            {"session_id": session_id})
        return session

    def session_view(self, session_id: str) -> dict:
        return self._session(session_id).to_dict()

    def session_next(self, session_id: str) -> dict:
        session = self._session(session_id)
        try:
            ref_id = session.advance(self.corpus)
        except SamplingError as exc:
            return {"complete": True, "exhausted": True, "error": str(exc),
                    "session": session.to_dict()}
        except SessionError as exc:
            raise _ApiError(409, "session-state", str(exc))
        if ref_id is None:
            return {"complete": True, "session": session.to_dict()}
        return {"complete": False,
                "reference": _reference_payload(self.corpus.by_id(ref_id)),
                "session": session.to_dict()}

    def record_verdict(self, session_id: str, body: dict) -> dict:
        session = self._session(session_id)
        ref_id = body.get("ref_id")
        judgment = body.get("judgment")
        keywords = body.get("keywords") or []
        notes = body.get("notes") or ""
        if not isinstance(ref_id, str) or not isinstance(judgment, str):
            raise _ApiError(400, "bad-request",
                            "body needs string 'ref_id' and 'judgment'")
        if not isinstance(keywords, list) or any(not isinstance(k, str) for k in keywords):
            raise _ApiError(400, "bad-request", "'keywords' must be a list of strings")
        try:
            session.record(ref_id, judgment, keywords=keywords, notes=notes)
        except SessionError as exc:
            already = "already has a verdict" in str(exc)
            raise _ApiError(409 if already else 400,
                            "duplicate-verdict" if already else "bad-verdict",
                            str(exc), {"ref_id": ref_id})
        return session.to_dict()

    def analytics_timeseries(self, params: dict) -> dict:
        kind = params.get("kind", "counts")
        lo, hi = self._year_range(params)
        if kind == "counts":
            series = counts_per_year(self.corpus, lo, hi)
        elif kind == "citations":
            series = cumulative_citations_per_year(self.corpus, lo, hi)
        else:
            raise _ApiError(400, "bad-request",
                            f"kind must be counts or citations, got {kind!r}")
        return {
            "kind": kind,
            "points": [[year, value] for year, value in series.points],
            "partial_year": series.partial_year,
            "unyeared": series.unyeared,
            "uncited": series.uncited,
        }

    def analytics_categories(self) -> dict:
        if not self.categories_file:
            raise _ApiError(400, "not-configured",
                            "service was started without a category spec file")
        with open(self.categories_file, "r", encoding="utf-8") as fh:
            triples = rulefiles.parse_category_specs(fh.read())
        specs = [CategorySpec(name=label, query=parse_query(text), mask=mask)
                 for label, mask, text in triples]
        table = category_counts(self.corpus, specs)
        return {
            "categories": [{"name": row.name, "count": row.count}
                           for row in table.rows],
            "explicit_total": table.explicit_total,
        }

    def analytics_fit(self, params: dict) -> dict:
        kind = params.get("kind", "counts")
        lo, hi = self._year_range(params)
        if kind == "counts":
            series = counts_per_year(self.corpus, lo, hi)
        elif kind == "citations":
            series = cumulative_citations_per_year(self.corpus, lo, hi)
        else:
            raise _ApiError(400, "bad-request",
                            f"kind must be counts or citations, got {kind!r}")
        t0 = self._int_param(params, "t0", lo)
        try:
            model = fit_stepwise(
                series, t0=t0,
                max_degree=self._int_param(params, "max-degree", 4),
                alpha_enter=self._float_param(params, "alpha-enter", 0.05),
                alpha_exit=self._float_param(params, "alpha-exit", 0.10))
        except RegressionError as exc:
            raise _ApiError(400, "regression", str(exc))
        return {
            "t0": model.t0,
            "max_degree": model.max_degree,
            "degrees": list(model.degrees),
            "coefficients": {str(k): v for k, v in sorted(model.coefficients.items())},
            "std_errors": {str(k): v for k, v in sorted(model.std_errors.items())},
            "p_values": {str(k): v for k, v in sorted(model.p_values.items())},
            "r2": model.r2,
            "sigma": model.sigma,
            "n_points": model.n_points,
        }

    def _year_range(self, params: dict) -> tuple[int, int]:
        years = [ref.year for ref in self.corpus if ref.year is not None]
        default_lo = min(years) if years else 2000
        default_hi = max(years) if years else 2000
        lo = self._int_param(params, "from", default_lo)
        hi = self._int_param(params, "to", default_hi)
        if lo > hi:
            raise _ApiError(400, "bad-request", f"year range reversed: {lo} > {hi}")
        return lo, hi

    @staticmethod
    def _int_param(params: dict, key: str, default: int) -> int:
        if key not in params:
            return default
        try:
            return int(params[key])
        except ValueError:
            raise _ApiError(400, "bad-request", f"{key!r} must be an integer")

    @staticmethod
    def _float_param(params: dict, key: str, default: float) -> float:
        if key not in params:
            return default
        try:
            return float(params[key])
        except ValueError:
            raise _ApiError(400, "bad-request", f"{key!r} must be a number")

    # -- dispatch ------------------------------------------------------------

    def handle(self, method: str, path: str, params: dict, body: dict) -> tuple[int, dict]:
        try:
            return 200, self._route(method, path, params, body)
        except _ApiError as exc:
            return exc.status, {"code": exc.code, "message": str(exc),
                                "details": exc.details}
        except BibmapError as exc:
            return 400, {"code": "error", "message": str(exc), "details": {}}

    def _route(self, method: str, path: str, params: dict, body: dict) -> dict:
        if path == "/corpus/stats" and method == "GET":
            return self.corpus_stats()
        if path == "/queries/preview" and method == "POST":
            return self.preview_query(body)
        if path == "/sessions" and method == "POST":
            return self.create_session(body)
        m = re.fullmatch(r"/sessions/([^/]+)", path)
        if m and method == "GET":
            return self.session_view(m.group(1))
        m = re.fullmatch(r"/sessions/([^/]+)/next", path)
        if m and method == "GET":
            return self.session_next(m.group(1))
        m = re.fullmatch(r"/sessions/([^/]+)/verdicts", path)
        if m and method == "POST":
            return self.record_verdict(m.group(1), body)
        if path == "/analytics/timeseries" and method == "GET":
            return self.analytics_timeseries(params)
        if path == "/analytics/categories" and method == "GET":
            return self.analytics_categories()
        if path == "/analytics/fit" and method == "GET":
            return self.analytics_fit(params)
        raise _ApiError(404, "not-found", f"no endpoint {method} {path}",
                        {"path": path})


_API_PREFIXES = ("/corpus", "/queries", "/sessions", "/analytics")


class _Handler(BaseHTTPRequestHandler):
    service: ReviewService = None
    ui_dir: str | None = None
    quiet = True

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send_json(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        # one request per connection; an idle keep-alive socket would wedge
        # the single-threaded accept loop
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        parsed = urllib.parse.urlsplit(self.path)
        path = parsed.path.rstrip("/") or "/"
        params = {k: v[-1] for k, v in urllib.parse.parse_qs(parsed.query).items()}

        if method == "GET" and not path.startswith(_API_PREFIXES):
            self._serve_static(path)
            return

        body: dict = {}
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if raw:
                try:
                    body = json.loads(raw.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError):
                    self._send_json(400, {"code": "bad-json",
                                          "message": "request body is not valid JSON",
                                          "details": {}})
                    return
            if not isinstance(body, dict):
                self._send_json(400, {"code": "bad-json",
                                      "message": "request body must be a JSON object",
                                      "details": {}})
                return

        status, payload = self.service.handle(method, path, params, body)
        self._send_json(status, payload)

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            self._send_json(404, {"code": "not-found",
                                  "message": f"no endpoint GET {path}",
                                  "details": {"path": path}})
            return
        rel = path.lstrip("/") or "index.html"
        full = os.path.normpath(os.path.join(self.ui_dir, rel))
        if not full.startswith(os.path.abspath(self.ui_dir)):
            self._send_json(404, {"code": "not-found", "message": "bad path",
                                  "details": {}})
            return
        if not os.path.isfile(full):
            self._send_json(404, {"code": "not-found",
                                  "message": f"no file {rel}", "details": {}})
            return
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            data = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.send_header("Connection", "close")
        self.end_headers()

    def do_HEAD(self):
        self.send_response(405)
        self.send_header("Content-Length", "0")
        self.send_header("Connection", "close")
        self.end_headers()


def make_server(corpus: Corpus, store_dir: str, port: int = 8765,
                host: str = "127.0.0.1", categories_file: str | None = None,
                ui_dir: str | None = None,
                quiet: bool = True) -> tuple[HTTPServer, StoreLock]:
    """Build the HTTP server and take the store lock; caller serves and,
    when done, releases the lock."""
    lock = StoreLock(store_dir)
    lock.acquire()
    try:
        service = ReviewService(corpus, store_dir, categories_file=categories_file)
        handler = type("BoundHandler", (_Handler,), {
            "service": service,
            "ui_dir": os.path.abspath(ui_dir) if ui_dir else None,
            "quiet": quiet,
        })
        server = HTTPServer((host, port), handler)
    except Exception:
        lock.release()
        raise
    return server, lock
