"""HTTP serving endpoint for interactive risk exploration.

Three JSON endpoints over a loaded model:

  GET  /model    -> graph, node states, edge strengths, default target
  POST /predict  {"evidence": {...}, "target"?} -> posterior of the target
  POST /whatif   {"evidence": {...}, "interventions": [{...}, ...], "target"?}
                 -> posterior per alternative, by evidence substitution

What-if answers are conditional queries (evidence substitution on the
fitted network), not graph surgery, and responses say so explicitly.
Invalid variables/states or evidence on the target give 400; evidence with
probability zero gives 422 with an explanatory body.
"""
from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .bn import CausalBayesianNetwork
from .bootstrap import ConfidenceMatrix
from .errors import ImpossibleEvidenceError, SchemaError


class ApiError(Exception):
    def __init__(self, status: int, message: str, detail: dict | None = None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.detail = detail or {}

    def body(self) -> dict:
        return {"error": self.message, **self.detail}


class ModelService:
    """Pure request logic over an immutable loaded model; no shared state."""

    def __init__(
        self,
        network: CausalBayesianNetwork,
        confidence: ConfidenceMatrix | None = None,
        default_target: str | None = None,
    ):
        self.network = network
        self.confidence = confidence
        if default_target is not None:
            network.variable(default_target)
        self.default_target = default_target

    # -- payload builders ------------------------------------------------------

    def model_payload(self) -> dict:
        edges = []
        for source, target in self.network.dag.edge_list():
            strength = 1.0
            if self.confidence is not None:
                strength = self.confidence.value(source, target)
            edges.append({"source": source, "target": target, "strength": strength})
        return {
            "nodes": [
                {"name": v.name, "states": list(v.states)} for v in self.network.variables
            ],
            "edges": edges,
            "target": self.default_target,
        }

    # -- request handling --------------------------------------------------------

    def _resolve_target(self, body: dict) -> str:
        target = body.get("target", self.default_target)
        if target is None:
            raise ApiError(400, "no target variable named in the request or at startup")
        try:
            self.network.variable(target)
        except SchemaError:
            raise ApiError(400, f"unknown target variable {target!r}") from None
        return target

    def _check_evidence(self, evidence, target: str) -> dict[str, str]:
        if not isinstance(evidence, dict):
            raise ApiError(400, "evidence must be an object of variable: state pairs")
        checked: dict[str, str] = {}
        for name, state in evidence.items():
            if name == target:
                raise ApiError(
                    400, f"target {target!r} cannot appear in the evidence", {"variable": name}
                )
            try:
                variable = self.network.variable(name)
            except SchemaError:
                raise ApiError(400, f"unknown variable {name!r}") from None
            if not isinstance(state, str) or state not in variable.states:
                raise ApiError(
                    400,
                    f"invalid state {state!r} for variable {name!r}",
                    {"variable": name, "valid_states": list(variable.states)},
                )
            checked[name] = state
        return checked

    def _posterior(self, evidence: dict[str, str], target: str) -> dict[str, float]:
        try:
            distribution = self.network.posterior(evidence, target)
        except ImpossibleEvidenceError:
            raise ApiError(
                422,
                "the submitted evidence has probability zero under the model",
                {"evidence": evidence},
            ) from None
        states = self.network.variable(target).states
        return {state: float(p) for state, p in zip(states, distribution)}

    def predict(self, body: dict) -> dict:
        target = self._resolve_target(body)
        evidence = self._check_evidence(body.get("evidence", {}), target)
        return {"target": target, "posterior": self._posterior(evidence, target)}

    def whatif(self, body: dict) -> dict:
        target = self._resolve_target(body)
        base = self._check_evidence(body.get("evidence", {}), target)
        interventions = body.get("interventions")
        if not isinstance(interventions, list) or not interventions:
            raise ApiError(400, "interventions must be a non-empty list of assignments")
        base_posterior = self._posterior(base, target)
        scenarios = []
        for assignment in interventions:
            overlay = self._check_evidence(assignment, target)
            merged = {**base, **overlay}
            posterior = self._posterior(merged, target)
            delta = {state: posterior[state] - base_posterior[state] for state in posterior}
            scenarios.append(
                {"assignment": overlay, "posterior": posterior, "delta": delta}
            )
        return {
            "target": target,
            "semantics": "conditional",
            "base": {"posterior": base_posterior},
            "scenarios": scenarios,
        }


def make_handler(service: ModelService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # noqa: ARG002 - quiet by default
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self):  # noqa: N802 - http.server naming
            self._send(204, {})

        def do_GET(self):  # noqa: N802
            if self.path == "/model":
                self._send(200, service.model_payload())
            else:
                self._send(404, {"error": f"no such endpoint {self.path!r}"})

        def do_POST(self):  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode("utf-8")) if raw else {}
            except (json.JSONDecodeError, UnicodeDecodeError):
                self._send(400, {"error": "request body is not valid JSON"})
                return
            if not isinstance(body, dict):
                self._send(400, {"error": "request body must be a JSON object"})
                return
            try:
                if self.path == "/predict":
                    self._send(200, service.predict(body))
                elif self.path == "/whatif":
                    self._send(200, service.whatif(body))
                else:
                    self._send(404, {"error": f"no such endpoint {self.path!r}"})
            except ApiError as exc:
                self._send(exc.status, exc.body())

    return Handler


def make_server(service: ModelService, host: str = "127.0.0.1", port: int = 8035) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(service))
