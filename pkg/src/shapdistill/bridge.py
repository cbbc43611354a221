"""Client side of the external-policy bridge.

Transport is newline-delimited JSON over a child process's stdin/stdout,
strictly one request then one response. The remote policy is wrapped behind
the standard Policy interface so every downstream module is agnostic to
whether a policy is local or bridged. All protocol failures raise
BridgeError; there is no silent fallback.

Wire schema (one JSON object per line):
  client -> adapter: {"type": "hello", "protocol_version": 1}
  adapter -> client: {"type": "hello_ack", "protocol_version": 1,
                      "kind": "deterministic"|"stochastic",
                      "feature_count": n, "action_count": k,
                      "policy_id": "..."}
  client -> adapter: {"type": "act", "state": [...]}
  adapter -> client: {"type": "action", "action": i}
  client -> adapter: {"type": "probs", "state": [...]}
  adapter -> client: {"type": "probs", "probs": [...]}
"""

from __future__ import annotations

import json
import select
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import BridgeError
from .policies import DETERMINISTIC, STOCHASTIC, Policy

PROTOCOL_VERSION = 1
_SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class BridgeHandshake:
    protocol_version: int
    kind: str
    feature_count: int
    action_count: int
    policy_id: str


class _Connection:
    def __init__(self, command: list[str], timeout: float = 10.0):
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeError(f"cannot launch adapter {command!r}: {exc}") from exc

    def send(self, obj: dict) -> None:
        try:
            self.proc.stdin.write(json.dumps(obj) + "\n")
            self.proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise BridgeError(f"broken pipe to adapter: {exc}") from exc

    def recv(self) -> dict:
        ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
        if not ready:
            raise BridgeError(f"adapter response timed out after {self.timeout}s")
        line = self.proc.stdout.readline()
        if not line:
            raise BridgeError("adapter closed its output stream")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"malformed adapter message: {line.strip()!r}") from exc
        if not isinstance(obj, dict):
            raise BridgeError(f"malformed adapter message (not an object): {line.strip()!r}")
        return obj

    def close(self) -> None:
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


def handshake(conn: _Connection, expected_features: int | None = None, expected_actions: int | None = None) -> BridgeHandshake:
    """One hello / hello-ack exchange; validates version and dimensions."""
    conn.send({"type": "hello", "protocol_version": PROTOCOL_VERSION})
    ack = conn.recv()
    if ack.get("type") != "hello_ack":
        raise BridgeError(f"expected hello_ack, got {ack!r}")
    if ack.get("protocol_version") != PROTOCOL_VERSION:
        raise BridgeError(
            f"protocol version mismatch: adapter speaks {ack.get('protocol_version')}, "
            f"client speaks {PROTOCOL_VERSION}"
        )
    kind = ack.get("kind")
    if kind not in (DETERMINISTIC, STOCHASTIC):
        raise BridgeError(f"adapter advertised unknown policy kind {kind!r}")
    try:
        hs = BridgeHandshake(
            protocol_version=int(ack["protocol_version"]),
            kind=kind,
            feature_count=int(ack["feature_count"]),
            action_count=int(ack["action_count"]),
            policy_id=str(ack.get("policy_id", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BridgeError(f"incomplete hello_ack: {ack!r}") from exc
    if expected_features is not None and hs.feature_count != expected_features:
        raise BridgeError(
            f"dimension mismatch: adapter has {hs.feature_count} features, expected {expected_features}"
        )
    if expected_actions is not None and hs.action_count != expected_actions:
        raise BridgeError(
            f"dimension mismatch: adapter has {hs.action_count} actions, expected {expected_actions}"
        )
    return hs


class BridgedPolicy(Policy):
    """A policy served by an external adapter process.

    Owns the child process; use as a context manager or call close().
    """

    def __init__(self, conn: _Connection, hs: BridgeHandshake):
        super().__init__(hs.kind, hs.feature_count, hs.action_count)
        self._conn = conn
        self.handshake = hs

    @classmethod
    def launch(
        cls,
        command: list[str],
        expected_features: int | None = None,
        expected_actions: int | None = None,
        timeout: float = 10.0,
    ) -> "BridgedPolicy":
        conn = _Connection(command, timeout)
        try:
            hs = handshake(conn, expected_features, expected_actions)
        except BridgeError:
            conn.close()
            raise
        return cls(conn, hs)

    def act(self, state: np.ndarray) -> int:
        if self.kind == STOCHASTIC:
            return super().act(state)
        state = self._check_state(state)
        self._conn.send({"type": "act", "state": list(state)})
        resp = self._conn.recv()
        if resp.get("type") != "action":
            raise BridgeError(f"expected action response, got {resp!r}")
        a = resp.get("action")
        if not isinstance(a, int) or not 0 <= a < self.action_count:
            raise BridgeError(f"action out of range [0, {self.action_count}): {a!r}")
        return a

    def action_probs(self, state: np.ndarray) -> np.ndarray:
        if self.kind == DETERMINISTIC:
            return super().action_probs(state)
        state = self._check_state(state)
        self._conn.send({"type": "probs", "state": list(state)})
        resp = self._conn.recv()
        if resp.get("type") != "probs":
            raise BridgeError(f"expected probs response, got {resp!r}")
        probs = np.asarray(resp.get("probs", []), dtype=float)
        if probs.shape != (self.action_count,):
            raise BridgeError(f"probs vector has wrong length: {resp!r}")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > _SIMPLEX_TOL:
            raise BridgeError(f"invalid simplex (sum={probs.sum()!r}): {resp!r}")
        return probs

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "BridgedPolicy":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
