"""End-to-end: the primary pipeline runs against the shim over real HTTP.

The primary package is driven purely through its external interfaces
(its CLI and file formats); nothing from it is imported here.
"""

import json
import socket
import subprocess
import sys
import threading
import time

import numpy as np
import pytest
import requests
import uvicorn

from modelshim import ShimConfig, create_app

EMBED_DIM = 32
N_QUESTIONS = 5


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def shim_server(tmp_path):
    script = {"rules": [], "default": "A"}
    rules = script["rules"]
    for i in range(N_QUESTIONS):
        rules.append(
            {
                "match": "substring",
                "value": f"Question: what is stored in slot {i}?\nThought 1:",
                "response": (
                    f"Thought 1: I need the contents of slot {i}.\n"
                    f"Action 1: Question[what is stored in slot {i}?]\n"
                    f"Observation 1: widget-{i}\n"
                    f"Thought 2: that is the answer.\n"
                    f"Action 2: Finish[widget-{i}]"
                ),
            }
        )
        rules.append(
            {
                "match": "substring",
                "value": f"question: what is stored in slot {i}?",
                "response": f"widget-{i}",
            }
        )
    script_path = tmp_path / "chat_script.json"
    script_path.write_text(json.dumps(script), encoding="utf-8")

    port = free_port()
    app = create_app(ShimConfig(embed_model=f"hash:{EMBED_DIM}",
                                chat_model=f"script:{script_path}", port=port))
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    deadline = time.time() + 15
    while time.time() < deadline:
        try:
            if requests.get(f"{base}/health", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.05)
    else:
        pytest.fail("shim server did not come up")
    yield base
    server.should_exit = True
    thread.join(timeout=5)


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows),
                    encoding="utf-8")


def primary_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "verichain", *map(str, args)],
        capture_output=True, text=True,
    )


def test_shim_contract_over_the_wire(shim_server):
    url = f"{shim_server}/v1/embeddings"
    first = requests.post(url, json={"model": "m", "input": ["wire check"]}, timeout=5).json()
    second = requests.post(url, json={"model": "m", "input": ["wire check"]}, timeout=5).json()
    vec = np.asarray(first["data"][0]["embedding"])
    assert vec.shape == (EMBED_DIM,)
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-6
    assert first["data"] == second["data"]

    chat_url = f"{shim_server}/v1/chat/completions"
    body = {"model": "m", "temperature": 0,
            "messages": [{"role": "user", "content": "anything at all"}]}
    a = requests.post(chat_url, json=body, timeout=5).json()
    b = requests.post(chat_url, json=body, timeout=5).json()
    assert a == b


def test_primary_run_end_to_end_against_shim(shim_server, tmp_path):
    pytest.importorskip("verichain", reason="primary package not installed")
    ws = tmp_path

    write_jsonl(
        ws / "documents.jsonl",
        [{"title": f"slot {i}", "text": f"slot {i} stores widget-{i} safely"}
         for i in range(N_QUESTIONS)],
    )
    write_jsonl(
        ws / "questions.jsonl",
        [{"id": f"q{i}", "question": f"what is stored in slot {i}?",
          "answers": [f"widget-{i}"]} for i in range(N_QUESTIONS)],
    )
    anchor_embedding = [1.0] + [0.0] * (EMBED_DIM - 1)
    write_jsonl(
        ws / "anchors.jsonl",
        [{
            "question": "what is the capital of Brazil?",
            "hint": ["Brasilia"],
            "cot_text": ("Question: what is the capital of Brazil?\n"
                         "Thought 1: straight lookup.\n"
                         "Action 1: Finish[Brasilia]"),
            "embedding": anchor_embedding,
            "source": "human_anchor",
        }],
    )

    endpoint = {"base_url": f"{shim_server}/v1", "model": "stand-in", "timeout": 10}
    config = {
        "mode": "interactive",
        "instruction": "Answer with numbered rounds.",
        "paths": {
            "documents": str(ws / "documents.jsonl"),
            "passages": str(ws / "passages.tsv"),
            "index": str(ws / "index.json"),
            "pool": str(ws / "anchors.jsonl"),
            "questions": str(ws / "questions.jsonl"),
            "cache_dir": str(ws / "cache"),
            "traces": str(ws / "traces.jsonl"),
            "predictions": str(ws / "predictions.jsonl"),
            "metrics": str(ws / "metrics.json"),
        },
        "endpoints": {
            "llm": endpoint,
            "embed": endpoint,
            "reader": endpoint,
            "verifier": endpoint,
        },
        "retrieval": {"backend": "bm25", "n_passages": 3},
        "interaction": {"max_iterations": 3},
    }
    (ws / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")

    for command in ("ingest-corpus", "index"):
        proc = primary_cli(command, "--config", ws / "config.json")
        assert proc.returncode == 0, proc.stderr

    proc = primary_cli("run", "--config", ws / "config.json")
    assert proc.returncode == 0, proc.stderr + proc.stdout

    traces = [json.loads(line) for line in (ws / "traces.jsonl").read_text().splitlines()]
    assert len(traces) == N_QUESTIONS
    assert all(t["status"] == "finished" for t in traces)
    assert [t["final_answers"] for t in traces] == [[f"widget-{i}"] for i in range(N_QUESTIONS)]

    proc = primary_cli("eval", "--config", ws / "config.json")
    assert proc.returncode == 0, proc.stderr
    metrics = json.loads((ws / "metrics.json").read_text())
    assert metrics["hits_at_1"] == 1.0
