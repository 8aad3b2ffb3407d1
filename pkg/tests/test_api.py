import pytest
from fastapi.testclient import TestClient

from api.main import app
from api.routers import scenarios

SCENARIO = b"""
[scenario]
name = "api_case"
kind = "scalar"
duration_s = 1.0
sample_period_s = 0.01
settle_skip_s = 0.5

[scalar]
a = -0.5
x0 = 1.0

[adc.x]
bits = 10
fsr = 4.0
range_min = -2.0

[injection.x]
mode = "additive"
alpha = 0.3

[trajectories.x]
kind = "constant"
breakpoints = [[0.0, 1.0]]
"""


@pytest.fixture
def client(tmp_path, tmp_db, monkeypatch):
    monkeypatch.setattr(scenarios, "RUNS_DIR", tmp_path / "runs")
    return TestClient(app)


def upload(client, route, content=SCENARIO, filename="case.toml", **params):
    return client.post(route, files={"file": (filename, content, "application/toml")}, params=params)


def test_health(client):
    assert client.get("/").json()["status"] == "ok"
    body = client.get("/health").json()
    assert body["status"] == "healthy"


def test_run_then_fetch(client, tmp_path):
    resp = upload(client, "/scenarios/run")
    assert resp.status_code == 200
    body = resp.json()
    assert body["run_id"] == "api_case_single"
    assert body["n_steps"] == 100
    assert set(body["metrics"]) == {"x"}
    assert (tmp_path / "runs" / "api_case_single_trace.csv").exists()

    runs = client.get("/runs").json()["runs"]
    assert [r["run_id"] for r in runs] == ["api_case_single"]

    metrics = client.get("/runs/api_case_single/metrics").json()["metrics"]
    assert metrics[0]["signal"] == "x"

    trace = client.get("/runs/api_case_single/trace", params={"limit": 3}).json()
    assert "s_x" in trace["columns"]
    assert [row["step"] for row in trace["rows"]] == [0, 1, 2]


def test_ab_registers_both_variants(client):
    resp = upload(client, "/scenarios/ab")
    assert resp.status_code == 200
    body = resp.json()
    assert body["config_diff"] == ["loops.x.adc_compensation"]
    assert body["baseline"]["run_id"] == "api_case_baseline"
    assert body["compensated"]["run_id"] == "api_case_compensated"
    summary = client.get("/runs/summary").json()["summary"]
    assert {row["variant"] for row in summary} == {"baseline", "compensated"}


def test_unknown_run_is_404(client):
    assert client.get("/runs/missing/metrics").status_code == 404
    assert client.get("/runs/missing/trace").status_code == 404


@pytest.mark.parametrize(
    "content, filename",
    [
        (SCENARIO, "case.csv"),
        (b"[scenario\n", "case.toml"),
        (b"\xff\xfe\x00", "case.toml"),
        (SCENARIO.replace(b"duration_s = 1.0", b"duration_s = 1.005"), "case.toml"),
    ],
)
def test_bad_uploads_are_400(client, content, filename):
    assert upload(client, "/scenarios/run", content, filename).status_code == 400


def test_strict_violation_is_422(client):
    content = SCENARIO + b'\n[loops.x.adapt]\nmode = "additive"\ngain = 0.02\nbound = 0.05\n'
    assert upload(client, "/scenarios/run", content, strict=True).status_code == 422


@pytest.mark.parametrize("route, worker", [("/scenarios/run", "_execute_single"), ("/scenarios/ab", "_execute_ab")])
def test_simulation_runs_off_the_event_loop(client, monkeypatch, route, worker):
    offloaded = []
    real = scenarios.run_in_threadpool

    async def spy(func, *args, **kwargs):
        offloaded.append(func.__name__)
        return await real(func, *args, **kwargs)

    monkeypatch.setattr(scenarios, "run_in_threadpool", spy)
    assert upload(client, route).status_code == 200
    assert offloaded == [worker]


def test_offloaded_errors_keep_their_status(client, monkeypatch):
    def failing(sc, strict):
        raise RuntimeError("boom")

    monkeypatch.setattr(scenarios, "_execute_single", failing)
    resp = upload(client, "/scenarios/run")
    assert resp.status_code == 500
    assert "boom" in resp.json()["detail"]
