import datetime as dt
import json
import os
import threading

import pytest
import requests

from bibmap.errors import ServiceError
from bibmap.records import Corpus, Reference
from bibmap.service import make_server

CATEGORIES = """graphs :: all :: graph* OR network*
biology :: title,abstract :: protein OR cell
"""


def build_corpus(n=14):
    refs = []
    for i in range(n):
        refs.append(Reference(
            id=f"r{i:03d}",
            title=f"Community detection study number {i}",
            source_db="scopus" if i % 2 == 0 else "wos",
            authors=(f"Author {i}",),
            year=2002 + (i % 5),
            venue="Journal of Graphs",
            abstract="We cluster networks." if i % 3 else "Protein cell work.",
            keywords=("graphs",) if i % 2 else (),
            citation_count=i * 3,
        ))
    return Corpus(references=tuple(refs), retrieval_date=dt.date(2016, 4, 26))


@pytest.fixture()
def server(tmp_path):
    corpus = build_corpus()
    cats = tmp_path / "categories.rules"
    cats.write_text(CATEGORIES)
    httpd, lock = make_server(corpus, str(tmp_path / "store"), port=0,
                              categories_file=str(cats))
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    yield base, corpus, tmp_path
    httpd.shutdown()
    httpd.server_close()
    lock.release()
    thread.join(timeout=5)


def test_corpus_stats(server):
    base, corpus, _ = server
    stats = requests.get(f"{base}/corpus/stats").json()
    assert stats == {
        "size": 14,
        "year_range": [2002, 2006],
        "per_source": {"scopus": 7, "wos": 7},
        "digest": corpus.digest,
        "retrieval_date": "2016-04-26",
    }


def test_query_preview(server):
    base, _, _ = server
    r = requests.post(f"{base}/queries/preview",
                      json={"query": 'communit* AND "number 3"'})
    assert r.status_code == 200
    body = r.json()
    assert body["count"] == 1
    assert body["ids"] == ["r003"]
    assert body["truncated"] is False
    assert "communit*" in body["query"]

    scoped = requests.post(f"{base}/queries/preview",
                           json={"query": "graphs", "fields": ["keywords"]}).json()
    assert scoped["count"] == 7


def test_query_preview_syntax_error_carries_position(server):
    base, _, _ = server
    r = requests.post(f"{base}/queries/preview", json={"query": "a AND AND b"})
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "query-syntax"
    assert body["details"]["position"] == 6

    r = requests.post(f"{base}/queries/preview", json={"fields": ["title"]})
    assert r.status_code == 400
    assert r.json()["code"] == "bad-request"

    r = requests.post(f"{base}/queries/preview",
                      json={"query": "a", "fields": ["venue"]})
    assert r.status_code == 400


def test_session_lifecycle_keywording(server):
    base, _, _ = server
    created = requests.post(f"{base}/sessions",
                            json={"kind": "keywording", "seed": 7})
    assert created.status_code == 200
    sid = created.json()["session_id"]
    assert created.json()["state"] == "active"

    seen = []
    for _ in range(10):
        step = requests.get(f"{base}/sessions/{sid}/next").json()
        assert step["complete"] is False
        ref = step["reference"]
        seen.append(ref["id"])
        verdict = requests.post(
            f"{base}/sessions/{sid}/verdicts",
            json={"ref_id": ref["id"], "judgment": "related"})
        assert verdict.status_code == 200

    assert len(set(seen)) == 10
    final = requests.get(f"{base}/sessions/{sid}/next").json()
    assert final["complete"] is True
    assert final["session"]["state"].startswith("complete")
    view = requests.get(f"{base}/sessions/{sid}").json()
    assert view["clean_streak"] == 10


def test_false_positive_pools_keywords_and_resets_streak(server):
    base, _, _ = server
    sid = requests.post(f"{base}/sessions",
                        json={"kind": "keywording", "seed": 3}).json()["session_id"]
    step = requests.get(f"{base}/sessions/{sid}/next").json()
    after = requests.post(
        f"{base}/sessions/{sid}/verdicts",
        json={"ref_id": step["reference"]["id"], "judgment": "false-positive",
              "keywords": ["protein", "cell biology"]}).json()
    assert after["clean_streak"] == 0
    assert after["pool"] == ["protein", "cell biology"]


def test_duplicate_verdict_is_409(server):
    base, _, _ = server
    sid = requests.post(f"{base}/sessions",
                        json={"kind": "keywording", "seed": 5}).json()["session_id"]
    rid = requests.get(f"{base}/sessions/{sid}/next").json()["reference"]["id"]
    first = requests.post(f"{base}/sessions/{sid}/verdicts",
                          json={"ref_id": rid, "judgment": "related"})
    assert first.status_code == 200
    second = requests.post(f"{base}/sessions/{sid}/verdicts",
                           json={"ref_id": rid, "judgment": "related"})
    assert second.status_code == 409
    assert second.json()["code"] == "duplicate-verdict"
    assert second.json()["details"]["ref_id"] == rid


def test_bad_session_requests(server):
    base, _, _ = server
    r = requests.post(f"{base}/sessions", json={"kind": "keywording"})
    assert r.status_code == 400   # seed is mandatory
    r = requests.post(f"{base}/sessions", json={"kind": "vibes", "seed": 1})
    assert r.status_code == 400
    assert r.json()["code"] == "bad-session"
    r = requests.post(f"{base}/sessions",
                      json={"kind": "qa-audit", "seed": 1, "target": 9999})
    assert r.status_code == 400


def test_missing_session_and_endpoint_are_404(server):
    base, _, _ = server
    r = requests.get(f"{base}/sessions/nope")
    assert r.status_code == 404
    assert r.json()["details"]["session_id"] == "nope"
    r = requests.get(f"{base}/sessions/nope/next")
    assert r.status_code == 404
    r = requests.post(f"{base}/corpus/stats")
    assert r.status_code == 404
    body = requests.get(f"{base}/unknown/path")
    assert body.status_code == 404


def test_malformed_json_body(server):
    base, _, _ = server
    r = requests.post(f"{base}/queries/preview", data=b"{nope",
                      headers={"Content-Type": "application/json"})
    assert r.status_code == 400
    assert r.json()["code"] == "bad-json"
    r = requests.post(f"{base}/queries/preview", data=b"[1, 2]",
                      headers={"Content-Type": "application/json"})
    assert r.status_code == 400


def test_idle_connection_cannot_wedge_the_server(server):
    # a keep-alive client that parks its socket must not starve connection 2
    base, _, _ = server
    with requests.Session() as hog:
        first = hog.get(f"{base}/corpus/stats", timeout=5)
        assert first.headers["Connection"] == "close"
        # the hog session still holds its pool while a second client calls in
        second = requests.get(f"{base}/corpus/stats", timeout=5)
        assert second.status_code == 200


def test_analytics_timeseries(server):
    base, _, _ = server
    body = requests.get(f"{base}/analytics/timeseries",
                        params={"kind": "counts"}).json()
    years = [p[0] for p in body["points"]]
    assert years == [2002, 2003, 2004, 2005, 2006]
    assert sum(p[1] for p in body["points"]) == 14
    assert body["unyeared"] == 0

    cites = requests.get(f"{base}/analytics/timeseries",
                         params={"kind": "citations", "from": 2002,
                                 "to": 2004}).json()
    assert [p[0] for p in cites["points"]] == [2002, 2003, 2004]

    r = requests.get(f"{base}/analytics/timeseries", params={"kind": "votes"})
    assert r.status_code == 400
    r = requests.get(f"{base}/analytics/timeseries",
                     params={"from": 2010, "to": 2002})
    assert r.status_code == 400
    r = requests.get(f"{base}/analytics/timeseries", params={"from": "soon"})
    assert r.status_code == 400


def test_analytics_fit(server):
    base, _, _ = server
    body = requests.get(f"{base}/analytics/fit",
                        params={"kind": "counts", "t0": 2002,
                                "max-degree": 2}).json()
    assert body["t0"] == 2002
    assert body["n_points"] == 5
    assert isinstance(body["degrees"], list)
    for key in ("coefficients", "std_errors", "p_values"):
        assert set(body[key]) == {"0", *map(str, body["degrees"])}

    r = requests.get(f"{base}/analytics/fit", params={"max-degree": "many"})
    assert r.status_code == 400
    # too few points for the default degree cap is a client error, not a 500
    r = requests.get(f"{base}/analytics/fit", params={"t0": 2002})
    assert r.status_code == 400
    assert r.json()["code"] == "regression"


def test_analytics_categories(server, tmp_path):
    base, _, _ = server
    body = requests.get(f"{base}/analytics/categories").json()
    names = [c["name"] for c in body["categories"]]
    assert names == ["graphs", "biology"]
    graphs = body["categories"][0]["count"]
    # odd refs carry the keyword, even ones only match via the abstract,
    # and i in {0, 6, 12} got the protein abstract instead
    assert graphs == 11

    bare, lock = make_server(build_corpus(), str(tmp_path / "bare"), port=0)
    try:
        thread = threading.Thread(target=bare.serve_forever, daemon=True)
        thread.start()
        url = f"http://127.0.0.1:{bare.server_address[1]}/analytics/categories"
        r = requests.get(url)
        assert r.status_code == 400
        assert r.json()["code"] == "not-configured"
    finally:
        bare.shutdown()
        bare.server_close()
        lock.release()


def test_store_lock_blocks_second_instance(server):
    base, corpus, tmp_path = server
    with pytest.raises(ServiceError, match=str(os.getpid())):
        make_server(corpus, str(tmp_path / "store"), port=0)


def test_store_lock_reclaims_stale_pid(tmp_path):
    store = tmp_path / "store"
    store.mkdir()
    # pid 2^22-ish beyond pid_max, guaranteed dead
    (store / ".lock").write_text("4194000")
    httpd, lock = make_server(build_corpus(), str(store), port=0)
    try:
        assert lock.acquired
    finally:
        httpd.server_close()
        lock.release()
    assert not (store / ".lock").exists()


def test_sessions_survive_server_restart(tmp_path):
    corpus = build_corpus()
    store = str(tmp_path / "store")

    first, lock1 = make_server(corpus, store, port=0)
    thread = threading.Thread(target=first.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{first.server_address[1]}"
    sid = requests.post(f"{base}/sessions",
                        json={"kind": "qa-audit", "seed": 12,
                              "target": 5}).json()["session_id"]
    drawn = []
    for _ in range(3):
        step = requests.get(f"{base}/sessions/{sid}/next").json()
        drawn.append(step["reference"]["id"])
        requests.post(f"{base}/sessions/{sid}/verdicts",
                      json={"ref_id": drawn[-1], "judgment": "related"})
    first.shutdown()
    first.server_close()
    lock1.release()

    second, lock2 = make_server(corpus, store, port=0)
    thread2 = threading.Thread(target=second.serve_forever, daemon=True)
    thread2.start()
    base2 = f"http://127.0.0.1:{second.server_address[1]}"
    try:
        view = requests.get(f"{base2}/sessions/{sid}").json()
        assert view["judged"] == 3
        for _ in range(2):
            step = requests.get(f"{base2}/sessions/{sid}/next").json()
            rid = step["reference"]["id"]
            assert rid not in drawn
            drawn.append(rid)
            requests.post(f"{base2}/sessions/{sid}/verdicts",
                          json={"ref_id": rid, "judgment": "related"})
        done = requests.get(f"{base2}/sessions/{sid}/next").json()
        assert done["complete"] is True
    finally:
        second.shutdown()
        second.server_close()
        lock2.release()
        thread2.join(timeout=5)


def test_static_ui_serving(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<h1>review</h1>")
    (ui / "app.js").write_text("console.log(1)")
    httpd, lock = make_server(build_corpus(), str(tmp_path / "store"), port=0,
                              ui_dir=str(ui))
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    try:
        root = requests.get(f"{base}/")
        assert root.status_code == 200
        assert root.text == "<h1>review</h1>"
        assert "text/html" in root.headers["Content-Type"]
        js = requests.get(f"{base}/app.js")
        assert js.status_code == 200
        missing = requests.get(f"{base}/nope.css")
        assert missing.status_code == 404
        # traversal out of the ui dir is refused, not served
        sneaky = requests.get(f"{base}/..%2f..%2fetc%2fpasswd")
        assert sneaky.status_code == 404
        # api namespace still wins over static files
        stats = requests.get(f"{base}/corpus/stats")
        assert stats.json()["size"] == 14
    finally:
        httpd.shutdown()
        httpd.server_close()
        lock.release()
        thread.join(timeout=5)
