import threading

import pytest
import requests

from unaware.annotation_service import AnnotationService, make_server
from unaware.identifier import ANNOTATION_OPTIONS, TrapBand, TrapItem

TRAPS = [
    TrapItem("friendly", TrapBand.LOW),
    TrapItem("asshole", TrapBand.HIGH),
    TrapItem("lovely", TrapBand.LOW),
]
WORDS = ["alpha", "beta", "gamma", "delta", "epsilon"]

IN_BAND = {"friendly": 1, "asshole": 5, "lovely": 2}


class LiveService:
    def __init__(self, tmp_path, trap_every=2, target_votes=5, static_dir=None, votes_name="votes.jsonl"):
        self.service = AnnotationService(
            words=WORDS,
            traps=TRAPS,
            votes_path=tmp_path / votes_name,
            trap_every=trap_every,
            target_votes=target_votes,
            static_dir=static_dir,
        )
        self.server = make_server(self.service, port=0)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        host, port = self.server.server_address
        self.base = f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self.service.close()

    def task(self, session):
        return requests.get(f"{self.base}/api/task", params={"session": session}, timeout=5).json()

    def respond(self, session, word, choice, likert):
        return requests.post(
            f"{self.base}/api/response",
            json={"session": session, "word": word, "category_choice": choice, "likert": likert},
            timeout=5,
        )

    def drive_session(self, session, choice_fn, trap_likert=None, max_items=30):
        """Answer tasks until done; traps get in-band answers unless overridden."""
        for _ in range(max_items):
            task = self.task(session)
            if task.get("done"):
                return
            word = task["word"]
            if word in IN_BAND:
                likert = (trap_likert or IN_BAND)[word] if isinstance(trap_likert, dict) else IN_BAND[word]
                choice = "None of the above"
            else:
                likert = 3
                choice = choice_fn(word)
            assert self.respond(session, word, choice, likert).json()["ok"]

    def tallies(self):
        return requests.get(f"{self.base}/api/admin/tallies", timeout=5).json()


class TestTaskFlow:
    def test_task_payload_shape(self, tmp_path):
        with LiveService(tmp_path) as live:
            task = live.task("s1")
            assert task["done"] is False
            assert task["options"] == list(ANNOTATION_OPTIONS)
            assert len(task["options"]) == 10
            assert task["word"] in WORDS
            assert "suggest toxic language" in task["trap_question"]
            assert [item["value"] for item in task["likert"]] == [1, 2, 3, 4, 5]

    def test_task_stable_until_answered(self, tmp_path):
        with LiveService(tmp_path) as live:
            first = live.task("s1")["word"]
            again = live.task("s1")["word"]
            assert first == again
            live.respond("s1", first, "Race", 3)
            assert live.task("s1")["word"] != first

    def test_traps_interleaved_at_rate(self, tmp_path):
        with LiveService(tmp_path, trap_every=2, target_votes=9) as live:
            seen = []
            for _ in range(6):
                task = live.task("s1")
                if task.get("done"):
                    break
                seen.append(task["word"])
                live.respond("s1", task["word"], "None of the above", IN_BAND.get(task["word"], 3))
            # positions 3 and 6 (1-based) are trap slots with trap_every=2
            assert seen[2] in IN_BAND
            assert seen[5] in IN_BAND
            assert seen[0] not in IN_BAND and seen[1] not in IN_BAND

    def test_done_when_words_exhausted(self, tmp_path):
        with LiveService(tmp_path, trap_every=0, target_votes=1) as live:
            live.drive_session("s1", lambda w: "Race")
            assert live.task("s1")["done"] is True

    def test_least_annotated_words_first(self, tmp_path):
        with LiveService(tmp_path, trap_every=0, target_votes=2) as live:
            live.respond("s1", "alpha", "Race", 3)
            live.respond("s1", "beta", "Race", 3)
            # a new session starts with a never-annotated word (ties break lexicographically)
            assert live.task("s2")["word"] == "delta"

    def test_unknown_word_rejected(self, tmp_path):
        with LiveService(tmp_path) as live:
            response = live.respond("s1", "nonsense", "Race", 3)
            assert response.status_code == 400

    def test_bad_likert_rejected(self, tmp_path):
        with LiveService(tmp_path) as live:
            response = live.respond("s1", "alpha", "Race", 9)
            assert response.status_code == 400

    def test_duplicate_submit_idempotent(self, tmp_path):
        with LiveService(tmp_path) as live:
            first = live.respond("s1", "alpha", "Race", 3).json()
            second = live.respond("s1", "alpha", "Race", 3).json()
            assert first == {"ok": True, "duplicate": False}
            assert second == {"ok": True, "duplicate": True}
            tallies = live.tallies()
            alpha = next(w for w in tallies["words"] if w["word"] == "alpha")
            assert alpha["votes"] == {"race": 1}


class TestTrapGate:
    def test_reliable_sessions_counted(self, tmp_path):
        with LiveService(tmp_path, trap_every=2, target_votes=9) as live:
            for i in range(3):
                live.drive_session(f"race{i}", lambda w: "Race")
            for i in range(2):
                live.drive_session(f"none{i}", lambda w: "None of the above")
            tallies = live.tallies()
            alpha = next(w for w in tallies["words"] if w["word"] == "alpha")
            assert alpha["votes"] == {"race": 3, "none_of_the_above": 2}
            assert alpha["decision"]["protected"] is True
            assert alpha["decision"]["category"] == "race"

    def test_trap_failure_discards_all_votes(self, tmp_path):
        with LiveService(tmp_path, trap_every=2, target_votes=9) as live:
            bad_traps = dict(IN_BAND, asshole=1)  # out of band on a high trap
            live.drive_session("cheater", lambda w: "Race", trap_likert=bad_traps)
            tallies = live.tallies()
            assert all(w["total"] == 0 for w in tallies["words"])
            assert tallies["sessions"]["rejected"] == 1

    def test_trap_votes_never_enter_tallies(self, tmp_path):
        with LiveService(tmp_path, trap_every=2, target_votes=9) as live:
            live.drive_session("s1", lambda w: "Race")
            assert {w["word"] for w in live.tallies()["words"]} == set(WORDS)


class TestCrashRecovery:
    def test_restart_preserves_acknowledged_responses(self, tmp_path):
        with LiveService(tmp_path, trap_every=0) as live:
            live.respond("s1", "alpha", "Race", 3)
            live.respond("s1", "beta", "Sex", 3)
            before = live.tallies()
        with LiveService(tmp_path, trap_every=0) as revived:
            after = revived.tallies()
        assert before["words"] == after["words"]


class TestAdmin:
    def test_kappa_identical_uploaded_sources(self, tmp_path):
        with LiveService(tmp_path) as live:
            annotations = {"alpha": "race", "beta": None, "gamma": "sex"}
            for name in ("src1", "src2"):
                r = requests.post(
                    f"{live.base}/api/admin/source",
                    json={"name": name, "annotations": annotations},
                    timeout=5,
                )
                assert r.status_code == 200
            result = requests.get(
                f"{live.base}/api/admin/kappa", params={"a": "src1", "b": "src2"}, timeout=5
            ).json()
            assert result["kappa"] == 1.0
            assert result["display"] == 1.0
            assert result["words"] == 3

    def test_kappa_against_human_decisions(self, tmp_path):
        with LiveService(tmp_path, trap_every=0, target_votes=1) as live:
            live.drive_session("s1", lambda w: "Race" if w == "alpha" else "None of the above")
            requests.post(
                f"{live.base}/api/admin/source",
                json={"name": "dict", "annotations": {"alpha": "race", "beta": None, "gamma": None}},
                timeout=5,
            )
            result = requests.get(
                f"{live.base}/api/admin/kappa", params={"a": "human", "b": "dict"}, timeout=5
            ).json()
            assert result["kappa"] == 1.0

    def test_kappa_unknown_source(self, tmp_path):
        with LiveService(tmp_path) as live:
            r = requests.get(f"{live.base}/api/admin/kappa", params={"a": "human", "b": "ghost"}, timeout=5)
            assert r.status_code == 400

    def test_export_tsv(self, tmp_path):
        with LiveService(tmp_path, trap_every=0, target_votes=1) as live:
            live.drive_session("s1", lambda w: "Race")
            text = requests.get(f"{live.base}/api/admin/export", timeout=5).text
            lines = [line.split("\t") for line in text.strip().splitlines()]
            assert all(parts[1] == "race" and parts[3] == "human" for parts in lines)


class TestStaticFiles:
    def test_serves_index(self, tmp_path):
        static = tmp_path / "static"
        static.mkdir()
        (static / "index.html").write_text("<html>annotate</html>")
        with LiveService(tmp_path, static_dir=static) as live:
            r = requests.get(f"{live.base}/", timeout=5)
            assert r.status_code == 200
            assert "annotate" in r.text

    def test_no_traversal(self, tmp_path):
        static = tmp_path / "static"
        static.mkdir()
        with LiveService(tmp_path, static_dir=static) as live:
            r = requests.get(f"{live.base}/../votes.jsonl", timeout=5)
            assert r.status_code == 404

    def test_404_without_static_dir(self, tmp_path):
        with LiveService(tmp_path) as live:
            assert requests.get(f"{live.base}/anything", timeout=5).status_code == 404


class TestPortConflict:
    def test_bound_port_raises(self, tmp_path):
        with LiveService(tmp_path) as live:
            _, port = live.server.server_address
            service = AnnotationService(
                words=WORDS, traps=TRAPS, votes_path=tmp_path / "other.jsonl"
            )
            with pytest.raises(OSError):
                make_server(service, port=port)
            service.close()
