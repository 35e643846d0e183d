"""
Human annotation service, scripted
==================================

Start the annotation HTTP service on a random port, drive five scripted
annotator sessions through its task queue (answering the interleaved trap
questions in band), reject one careless session that answers a trap out of
band, and read back the tallies, majority-vote decisions, and agreement
between the collected votes and an uploaded dictionary source.
"""

import tempfile
import threading
from pathlib import Path

import requests

from unaware.annotation_service import AnnotationService, make_server
from unaware.identifier import TrapBand, TrapItem

words = ["black", "homosexual", "city", "table", "headscarf"]
traps = [TrapItem("friendly", TrapBand.LOW), TrapItem("asshole", TrapBand.HIGH)]
votes_path = Path(tempfile.mkdtemp(prefix="unaware_votes_")) / "votes.jsonl"

service = AnnotationService(words, traps, votes_path, trap_every=2, target_votes=5)
server = make_server(service, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address
base = f"http://{host}:{port}"
print(f"service listening on {base}")

CHOICES = {"black": "Race", "homosexual": "Sexual orientation", "headscarf": "Religion or belief"}
TRAP_ANSWERS = {"friendly": 1, "asshole": 5}


def run_session(session, sloppy=False):
    while True:
        task = requests.get(f"{base}/api/task", params={"session": session}).json()
        if task["done"]:
            return
        word = task["word"]
        likert = TRAP_ANSWERS.get(word, 3)
        if sloppy and word == "asshole":
            likert = 1  # out of band: this session's votes will be discarded
        choice = CHOICES.get(word, "None of the above")
        requests.post(f"{base}/api/response", json={
            "session": session, "word": word, "category_choice": choice, "likert": likert,
        })


run_session("careless-annotator", sloppy=True)
for i in range(5):
    run_session(f"annotator-{i}")

tallies = requests.get(f"{base}/api/admin/tallies").json()
print(f"\nsessions: {tallies['sessions']}")
print("decisions:")
for entry in tallies["words"]:
    decision = entry["decision"]
    badge = decision["category"] if decision and decision["protected"] else "none"
    print(f"  {entry['word']:<12} votes={entry['votes']} -> {badge}")

requests.post(f"{base}/api/admin/source", json={
    "name": "dictionary",
    "annotations": {"black": "race", "homosexual": "sexual_orientation",
                    "headscarf": "religion_belief", "city": None, "table": None},
})
kappa = requests.get(f"{base}/api/admin/kappa", params={"a": "human", "b": "dictionary"}).json()
print(f"\nagreement human vs dictionary: kappa={kappa['kappa']:.2f} over {kappa['words']} words")

server.shutdown()
server.server_close()
service.close()
