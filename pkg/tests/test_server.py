import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from riskbn.bn import network_from_tables
from riskbn.bootstrap import ConfidenceMatrix
from riskbn.dataset import Variable
from riskbn.graph import Dag
from riskbn.server import ApiError, ModelService, make_server

from helpers import chain_network


@pytest.fixture(scope="module")
def live_server():
    net = chain_network(0.8)
    counts = np.array([[0, 4, 0], [0, 0, 5], [0, 0, 0]])
    confidence = ConfidenceMatrix(nodes=("A", "B", "C"), counts=counts, n=5)
    service = ModelService(net, confidence=confidence, default_target="C")
    server = make_server(service, host="127.0.0.1", port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    yield net, f"http://{host}:{port}"
    server.shutdown()
    server.server_close()


def call(base: str, path: str, body: dict | None = None):
    if body is None:
        request = urllib.request.Request(base + path)
    else:
        request = urllib.request.Request(
            base + path,
            data=json.dumps(body).encode(),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, json.loads(response.read())
    except urllib.error.HTTPError as error:
        return error.code, json.loads(error.read())


def test_model_endpoint(live_server):
    net, base = live_server
    status, payload = call(base, "/model")
    assert status == 200
    assert [n["name"] for n in payload["nodes"]] == ["A", "B", "C"]
    strengths = {(e["source"], e["target"]): e["strength"] for e in payload["edges"]}
    assert strengths == {("A", "B"): 0.8, ("B", "C"): 1.0}
    assert payload["target"] == "C"


def test_predict_empty_evidence_is_prior(live_server):
    net, base = live_server
    status, payload = call(base, "/predict", {"evidence": {}})
    assert status == 200
    prior = net.posterior({}, "C")
    assert payload["posterior"]["s1"] == pytest.approx(float(prior[1]), abs=1e-12)


def test_predict_matches_library_posterior(live_server):
    net, base = live_server
    status, payload = call(base, "/predict", {"evidence": {"A": "s1"}})
    assert status == 200
    expected = net.posterior({"A": "s1"}, "C")
    for index, state in enumerate(("s0", "s1")):
        assert payload["posterior"][state] == pytest.approx(float(expected[index]), abs=1e-12)


def test_predict_explicit_target(live_server):
    net, base = live_server
    status, payload = call(base, "/predict", {"evidence": {"C": "s0"}, "target": "A"})
    assert status == 200
    assert payload["target"] == "A"


def test_predict_unknown_variable_400(live_server):
    _, base = live_server
    status, payload = call(base, "/predict", {"evidence": {"Q": "s1"}})
    assert status == 400 and "unknown variable" in payload["error"]


def test_predict_invalid_state_400(live_server):
    _, base = live_server
    status, payload = call(base, "/predict", {"evidence": {"A": "nope"}})
    assert status == 400 and payload["valid_states"] == ["s0", "s1"]


def test_predict_evidence_on_target_400(live_server):
    _, base = live_server
    status, payload = call(base, "/predict", {"evidence": {"C": "s1"}})
    assert status == 400 and "target" in payload["error"]


def test_whatif_deltas_match_independent_predictions(live_server):
    net, base = live_server
    body = {
        "evidence": {"A": "s0"},
        "interventions": [{"B": "s0"}, {"B": "s1"}],
    }
    status, payload = call(base, "/whatif", body)
    assert status == 200
    assert payload["semantics"] == "conditional"
    assert len(payload["scenarios"]) == 2
    for scenario in payload["scenarios"]:
        merged = {"A": "s0", **scenario["assignment"]}
        _, direct = call(base, "/predict", {"evidence": merged})
        for state, value in scenario["posterior"].items():
            assert value == pytest.approx(direct["posterior"][state], abs=1e-12)
            expected_delta = direct["posterior"][state] - payload["base"]["posterior"][state]
            assert scenario["delta"][state] == pytest.approx(expected_delta, abs=1e-12)


def test_whatif_identical_alternative_has_zero_delta(live_server):
    _, base = live_server
    status, payload = call(base, "/whatif", {"evidence": {"A": "s0"}, "interventions": [{"A": "s0"}]})
    assert status == 200
    assert all(abs(d) < 1e-15 for d in payload["scenarios"][0]["delta"].values())


def test_whatif_needs_interventions(live_server):
    _, base = live_server
    status, payload = call(base, "/whatif", {"evidence": {}})
    assert status == 400


def test_unknown_endpoint_404(live_server):
    _, base = live_server
    status, _ = call(base, "/nope", {})
    assert status == 404


def test_bad_json_400(live_server):
    _, base = live_server
    request = urllib.request.Request(
        base + "/predict", data=b"{not json", headers={"Content-Type": "application/json"}, method="POST"
    )
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        urllib.request.urlopen(request)
    assert excinfo.value.code == 400


def test_impossible_evidence_422():
    variables = (Variable("A", ("a0", "a1")), Variable("B", ("b0", "b1")))
    dag = Dag(["A", "B"], [("A", "B")])
    tables = {"A": np.array([[1.0, 0.0]]), "B": np.array([[1.0, 0.0], [0.0, 1.0]])}
    degenerate = network_from_tables(dag, variables, tables)
    service = ModelService(degenerate, default_target="A")
    with pytest.raises(ApiError) as excinfo:
        service.predict({"evidence": {"B": "b1"}})
    assert excinfo.value.status == 422
    assert "probability zero" in excinfo.value.message
    assert excinfo.value.body()["evidence"] == {"B": "b1"}


def test_service_stateless_across_requests(live_server):
    _, base = live_server
    _, first = call(base, "/predict", {"evidence": {"A": "s1"}})
    call(base, "/predict", {"evidence": {"A": "s0"}})
    _, again = call(base, "/predict", {"evidence": {"A": "s1"}})
    assert first == again
