"""Trainer backends for the adaptation loop.

Three interchangeable backends expose encode/update/predict:

* ``StubTrainer`` — an in-process deterministic model (hashed token
  counts, a fixed random projection for embeddings, and a trainable
  linear head for per-label logits). It lets the whole pipeline run and
  be tested without any ML runtime.
* ``SubprocessTrainer`` — speaks the line-delimited JSON protocol over
  the stdin/stdout of a spawned bridge process.
* ``SocketTrainer`` — same protocol over a local TCP socket.

Protocol requests (one JSON object per line):
    {"op": "info"}
    {"op": "encode", "docs": [{"id", "text"}], "out_dir": ...}
    {"op": "update", "batch_path": ...}
    {"op": "predict", "docs": [{"id", "text"}]}
Replies carry {"ok": true, ...} or {"ok": false, "error": ...}; the
session survives malformed requests. Embeddings and logits travel as
binary sidecar files, never inline.

Running ``python -m driftforge.trainer --labels-file labels.json`` serves
the stub model over stdio (or ``--port`` for TCP), which doubles as the
protocol reference implementation.
"""

from __future__ import annotations

import json
import re
import socket
import subprocess
import tempfile
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import formats
from .augment import AugmentedBatch, AugmentedSample, load_batch, save_batch
from .corpus import Document
from .errors import TrainerError
from .shift import LogitMatrix
from .stats import EmbeddingMatrix

PROTOCOL_VERSION = 1

_STUB_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _fnv1a(data: bytes) -> int:
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


class Trainer(Protocol):
    def info(self) -> dict: ...

    def encode(self, docs: Sequence[Document]) -> tuple[EmbeddingMatrix, LogitMatrix]: ...

    def update(self, batch: AugmentedBatch) -> int: ...

    def predict(self, docs: Sequence[Document]) -> dict[str, np.ndarray]: ...


class StubTrainer:
    """Deterministic stand-in for a fine-tunable encoder/classifier.

    The encoder is frozen: token counts are hashed into a fixed-size
    vector, square-root damped, L2-normalized, and projected once through
    a seed-derived Gaussian matrix. Only the linear head trains, using
    full-batch sigmoid cross-entropy gradient steps.

    Updates use experience replay: samples from every update so far are
    kept in a buffer and each update re-fits the head on the whole buffer,
    so late updates do not erase what early ones taught.
    """

    model_name = "driftforge-stub"

    def __init__(
        self,
        labels: Sequence[str],
        seed: int = 0,
        dim: int = 256,
        hash_dim: int = 8192,
        lr: float = 5.0,
        update_lr: float | None = None,
        steps_per_update: int = 50,
        anchor_reg: float = 0.0,
        weight_decay: float = 0.0,
        memory: bool = True,
        frozen: bool = False,
    ):
        if not labels:
            raise TrainerError("label vocabulary is empty")
        self.labels = list(labels)
        self.seed = seed
        self.dim = dim
        self.hash_dim = hash_dim
        self.lr = lr
        self.update_lr = lr if update_lr is None else update_lr
        self.steps_per_update = steps_per_update
        self.anchor_reg = anchor_reg
        self.weight_decay = weight_decay
        self.memory = memory
        self.frozen = frozen
        self.version = 0
        self._buffer: list[tuple[str, frozenset[str]]] = []
        self._embed_cache: dict[str, np.ndarray] = {}
        rng = np.random.default_rng(seed)
        self.projection = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hash_dim, dim))
        self.weights = np.zeros((dim, len(self.labels)))
        self.bias = np.zeros(len(self.labels))
        self._anchor: tuple[np.ndarray, np.ndarray] | None = None
        self._label_index = {label: i for i, label in enumerate(self.labels)}

    # -- encoding -----------------------------------------------------------

    def _hash_features(self, text: str) -> np.ndarray:
        counts = np.zeros(self.hash_dim)
        for token in _STUB_TOKEN_RE.findall(text.lower()):
            counts[_fnv1a(token.encode("utf-8")) % self.hash_dim] += 1.0
        damped = np.sqrt(counts)
        norm = np.linalg.norm(damped)
        return damped / norm if norm > 0.0 else damped

    def _embed_one(self, text: str) -> np.ndarray:
        cached = self._embed_cache.get(text)
        if cached is None:
            cached = self._hash_features(text) @ self.projection
            self._embed_cache[text] = cached
        return cached

    def _embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self._embed_one(t) for t in texts])

    def _logits(self, emb: np.ndarray) -> np.ndarray:
        return emb @ self.weights + self.bias

    def encode(self, docs: Sequence[Document]) -> tuple[EmbeddingMatrix, LogitMatrix]:
        ids = [doc.id for doc in docs]
        emb = self._embed([doc.text for doc in docs])
        logits = self._logits(emb)
        return EmbeddingMatrix(ids=ids, rows=emb), LogitMatrix(ids=ids, rows=logits)

    def predict(self, docs: Sequence[Document]) -> dict[str, np.ndarray]:
        emb = self._embed([doc.text for doc in docs])
        probs = 1.0 / (1.0 + np.exp(-np.clip(self._logits(emb), -30.0, 30.0)))
        return {doc.id: probs[i] for i, doc in enumerate(docs)}

    # -- training -----------------------------------------------------------

    def _label_matrix(self, label_sets: Sequence[frozenset[str]]) -> np.ndarray:
        y = np.zeros((len(label_sets), len(self.labels)))
        for i, labels in enumerate(label_sets):
            for label in labels:
                j = self._label_index.get(label)
                if j is None:
                    raise TrainerError(f"label {label!r} outside the vocabulary")
                y[i, j] = 1.0
        return y

    def _train(self, texts: Sequence[str], label_sets: Sequence[frozenset[str]],
               steps: int, lr: float, anchored: bool = False) -> None:
        emb = self._embed(texts)
        y = self._label_matrix(label_sets)
        n = max(1, len(texts))
        for _ in range(steps):
            p = 1.0 / (1.0 + np.exp(-np.clip(self._logits(emb), -30.0, 30.0)))
            g = p - y
            # decay bounds the margin race so that newly seen features can
            # catch up with long-trained ones
            grad_w = (emb.T @ g) / n + self.weight_decay * self.weights
            grad_b = g.mean(axis=0)
            if anchored and self._anchor is not None and self.anchor_reg > 0.0:
                # proximal pull toward the pretrained state limits drift on
                # labels under-represented in an update batch
                grad_w = grad_w + self.anchor_reg * (self.weights - self._anchor[0])
                grad_b = grad_b + self.anchor_reg * (self.bias - self._anchor[1])
            self.weights -= lr * grad_w
            self.bias -= lr * grad_b

    def fit_source(self, docs: Sequence[Document], steps: int = 200) -> None:
        """Pretrain the head on gold-labeled source documents (version 0)."""
        self._train([d.text for d in docs], [d.labels for d in docs], steps, self.lr)
        self._anchor = (self.weights.copy(), self.bias.copy())

    def update(self, batch: AugmentedBatch | Sequence[AugmentedSample]) -> int:
        samples = batch.samples if isinstance(batch, AugmentedBatch) else list(batch)
        if not self.frozen and samples:
            pairs = [(s.text, s.labels) for s in samples]
            if self.memory:
                self._buffer.extend(pairs)
                pairs = self._buffer
            self._train(
                [text for text, _ in pairs],
                [labels for _, labels in pairs],
                self.steps_per_update,
                self.update_lr,
                anchored=True,
            )
        self.version += 1
        return self.version

    # -- bookkeeping ---------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "weights": self.weights.copy(),
            "bias": self.bias.copy(),
            "version": self.version,
        }

    def restore(self, state: dict) -> None:
        self.weights = state["weights"].copy()
        self.bias = state["bias"].copy()
        self.version = state["version"]

    def info(self) -> dict:
        return {
            "model": self.model_name,
            "labels": list(self.labels),
            "dim": self.dim,
            "n_labels": len(self.labels),
            "version": self.version,
            "protocol": PROTOCOL_VERSION,
            "pooling": "hashed-count random projection",
        }


# ---------------------------------------------------------------------------
# Wire protocol
# ---------------------------------------------------------------------------


class _ProtocolClient:
    """Shared request/reply handling over a line-based transport."""

    def __init__(self):
        self._workdir = Path(tempfile.mkdtemp(prefix="driftforge-trainer-"))
        self._counter = 0

    def _send_line(self, line: str) -> None:
        raise NotImplementedError

    def _recv_line(self) -> str:
        raise NotImplementedError

    def request(self, payload: dict) -> dict:
        try:
            self._send_line(json.dumps(payload, sort_keys=True))
            raw = self._recv_line()
        except (OSError, ValueError) as exc:
            raise TrainerError(f"trainer transport failed: {exc}") from exc
        if not raw:
            raise TrainerError("trainer closed the connection")
        try:
            reply = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TrainerError(f"malformed trainer reply: {raw!r}") from exc
        if not isinstance(reply, dict) or "ok" not in reply:
            raise TrainerError(f"malformed trainer reply: {reply!r}")
        if not reply["ok"]:
            raise TrainerError(f"trainer error: {reply.get('error', 'unknown')}")
        return reply

    def info(self) -> dict:
        return self.request({"op": "info"})

    def encode(self, docs: Sequence[Document]) -> tuple[EmbeddingMatrix, LogitMatrix]:
        self._counter += 1
        out_dir = self._workdir / f"encode{self._counter:05d}"
        out_dir.mkdir(parents=True, exist_ok=True)
        reply = self.request(
            {
                "op": "encode",
                "docs": [{"id": d.id, "text": d.text} for d in docs],
                "out_dir": str(out_dir),
            }
        )
        try:
            emb = EmbeddingMatrix.read(reply["embeddings"])
            logits = LogitMatrix.read(reply["logits"])
        except (KeyError, OSError) as exc:
            raise TrainerError(f"encode reply unusable: {exc}") from exc
        expected = [d.id for d in docs]
        if emb.ids != expected or logits.ids != expected:
            raise TrainerError("encode reply ids do not match the request")
        return emb, logits

    def update(self, batch: AugmentedBatch | Sequence[AugmentedSample]) -> int:
        if not isinstance(batch, AugmentedBatch):
            batch = AugmentedBatch(samples=list(batch))
        self._counter += 1
        batch_path = self._workdir / f"batch{self._counter:05d}.jsonl"
        save_batch(batch_path, batch)
        reply = self.request({"op": "update", "batch_path": str(batch_path)})
        if "version" not in reply:
            raise TrainerError("update reply missing version")
        return int(reply["version"])

    def predict(self, docs: Sequence[Document]) -> dict[str, np.ndarray]:
        reply = self.request(
            {"op": "predict", "docs": [{"id": d.id, "text": d.text} for d in docs]}
        )
        try:
            return {
                rec["id"]: np.asarray(rec["probs"], dtype=np.float64)
                for rec in reply["predictions"]
            }
        except (KeyError, TypeError) as exc:
            raise TrainerError(f"predict reply unusable: {exc}") from exc


class SubprocessTrainer(_ProtocolClient):
    """Bridge process spawned locally, protocol over stdin/stdout."""

    def __init__(self, cmd: Sequence[str]):
        super().__init__()
        try:
            self._proc = subprocess.Popen(
                list(cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TrainerError(f"cannot spawn trainer {cmd!r}: {exc}") from exc

    def _send_line(self, line: str) -> None:
        if self._proc.poll() is not None:
            raise TrainerError("trainer process has exited")
        assert self._proc.stdin is not None
        self._proc.stdin.write(line + "\n")
        self._proc.stdin.flush()

    def _recv_line(self) -> str:
        assert self._proc.stdout is not None
        return self._proc.stdout.readline().strip()

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SocketTrainer(_ProtocolClient):
    """Bridge reachable over a local TCP socket."""

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        super().__init__()
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TrainerError(f"cannot connect to trainer {host}:{port}: {exc}") from exc
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self._writer = self._sock.makefile("w", encoding="utf-8")

    def _send_line(self, line: str) -> None:
        self._writer.write(line + "\n")
        self._writer.flush()

    def _recv_line(self) -> str:
        return self._reader.readline().strip()

    def close(self) -> None:
        for stream in (self._reader, self._writer):
            try:
                stream.close()
            except OSError:
                pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# Serving (protocol reference implementation around any Trainer)
# ---------------------------------------------------------------------------


def handle_request(trainer: Trainer, raw: str, scratch_dir: Path) -> dict:
    """Answer one protocol line; never raises on malformed input."""
    try:
        request = json.loads(raw)
        if not isinstance(request, dict):
            return {"ok": False, "error": "request is not a JSON object"}
        op = request.get("op")
        if op == "info":
            return {"ok": True, **trainer.info()}
        if op == "encode":
            docs = _docs_from_wire(request.get("docs"))
            out_dir = Path(request.get("out_dir") or scratch_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            emb, logits = trainer.encode(docs)
            emb_path = out_dir / "encode.dfemb"
            logit_path = out_dir / "encode.dflgt"
            formats.write_embeddings(emb_path, emb.ids, emb.rows)
            formats.write_logits(logit_path, logits.ids, logits.rows)
            return {
                "ok": True,
                "embeddings": str(emb_path),
                "logits": str(logit_path),
                "version": getattr(trainer, "version", None),
            }
        if op == "update":
            batch_path = request.get("batch_path")
            if not batch_path:
                return {"ok": False, "error": "update requires batch_path"}
            version = trainer.update(load_batch(batch_path))
            return {"ok": True, "version": version}
        if op == "predict":
            docs = _docs_from_wire(request.get("docs"))
            probs = trainer.predict(docs)
            return {
                "ok": True,
                "predictions": [
                    {"id": d.id, "probs": [float(p) for p in probs[d.id]]} for d in docs
                ],
            }
        return {"ok": False, "error": f"unknown op {op!r}"}
    except Exception as exc:  # session must survive any bad request
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def _docs_from_wire(raw) -> list[Document]:
    if not isinstance(raw, list):
        raise TrainerError("docs must be a list")
    return [
        Document(id=rec["id"], text=rec["text"], timestamp=0, labels=frozenset())
        for rec in raw
    ]


def serve_stdio(trainer: Trainer) -> None:
    import sys

    scratch = Path(tempfile.mkdtemp(prefix="driftforge-serve-"))
    for raw in sys.stdin:
        raw = raw.strip()
        if not raw:
            continue
        reply = handle_request(trainer, raw, scratch)
        sys.stdout.write(json.dumps(reply, sort_keys=True) + "\n")
        sys.stdout.flush()


def serve_tcp(trainer: Trainer, host: str, port: int) -> None:
    scratch = Path(tempfile.mkdtemp(prefix="driftforge-serve-"))
    with socket.create_server((host, port)) as server:
        conn, _ = server.accept()  # one client at a time by design
        with conn, conn.makefile("r", encoding="utf-8") as reader, conn.makefile(
            "w", encoding="utf-8"
        ) as writer:
            for raw in reader:
                raw = raw.strip()
                if not raw:
                    continue
                writer.write(json.dumps(handle_request(trainer, raw, scratch)) + "\n")
                writer.flush()


def _main() -> None:
    import argparse

    parser = argparse.ArgumentParser(description="Serve the stub trainer")
    parser.add_argument("--labels-file", required=True, help="JSON array of labels")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--fit", help="JSONL corpus to pretrain the head on")
    parser.add_argument("--fit-steps", type=int, default=200)
    parser.add_argument("--frozen", action="store_true")
    parser.add_argument("--port", type=int, help="serve over TCP instead of stdio")
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args()

    labels = json.loads(Path(args.labels_file).read_text(encoding="utf-8"))
    trainer = StubTrainer(labels, seed=args.seed, dim=args.dim, frozen=args.frozen)
    if args.fit:
        from .corpus import load_corpus

        trainer.fit_source(load_corpus(args.fit), steps=args.fit_steps)
    if args.port:
        serve_tcp(trainer, args.host, args.port)
    else:
        serve_stdio(trainer)


if __name__ == "__main__":
    _main()
