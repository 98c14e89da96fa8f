"""
QSQED API Tests

Tests for the HTTP service:
- Service info and docs
- Gate-count table
- Experiment endpoints and their error mapping
- Archived runs and CSV download
"""
import pytest

import cli
from cli import config_hash
from schemas import ExperimentConfig


SMALL_RUN = {"params": {"n_s": 2}, "dt": 0.39, "steps": 2, "shots": 200, "natives": ["csum"], "seed": 7}


class TestHealthCheck:
    """Basic API health tests."""

    def test_root_returns_info(self, client):
        """Root endpoint lists the service endpoints."""
        response = client.get("/")
        assert response.status_code == 200
        data = response.json()
        assert data["name"] == "QSQED"
        assert "/api/v1/emulate" in data["endpoints"]

    def test_docs_available(self, client):
        """API docs should be accessible."""
        response = client.get("/docs")
        assert response.status_code == 200


class TestGateCounts:
    """Gate-cost table endpoint."""

    def test_table(self, client):
        """Three rows with the qubit and qutrit costs."""
        response = client.get("/api/v1/gate-counts")
        assert response.status_code == 200
        rows = {r["gate"]: r for r in response.json()}
        assert rows["L^z L^z"]["qubit_2q"] == 8
        assert rows["L^z L^z"]["qutrit_2q"] == 3
        assert rows["U^x"]["qubit_1q"] == 15


class TestExperiments:
    """Experiment endpoints."""

    def test_exact_correlator(self, client):
        """Exact series is returned and archived."""
        response = client.post("/api/v1/exact-correlator", json=SMALL_RUN)
        assert response.status_code == 200
        data = response.json()
        assert data["success"] is True
        assert data["run_id"] is not None
        assert len(data["rows"]) == 3
        assert data["rows"][0]["re"] == pytest.approx(0.931902, abs=1e-6)

    def test_exact_correlator_spectral(self, client):
        """Spectral rows come back under extra."""
        body = {**SMALL_RUN, "spectral": {"e_min": -1, "e_max": 1, "n_e": 3}}
        response = client.post("/api/v1/exact-correlator", json=body)
        assert response.status_code == 200
        assert len(response.json()["extra"]["spectral"]) == 3

    def test_overlap_scan(self, client):
        """Overlap rows for every requested point."""
        response = client.post("/api/v1/overlap-scan", json={"n_s": [2, 3], "couplings": [5.0]})
        assert response.status_code == 200
        rows = response.json()["rows"]
        assert [r["n_s"] for r in rows] == [2, 3]
        assert all(r["overlap_gamma"] > r["overlap_111"] for r in rows)

    def test_emulate(self, client):
        """Emulation returns all provenances and the signal-loss report."""
        response = client.post("/api/v1/emulate", json=SMALL_RUN)
        assert response.status_code == 200
        data = response.json()
        assert len(data["rows"]) == 3 * 3
        assert data["extra"]["signal_loss"][0]["native"] == "csum"

    def test_verify_decompositions(self, client, monkeypatch):
        """Verification rows are returned; success reflects every check."""
        monkeypatch.setattr(cli, "default_checks", lambda seed: {"ok": lambda: 0.0, "bad": lambda: 1.0})
        response = client.post("/api/v1/verify-decompositions")
        assert response.status_code == 200
        data = response.json()
        assert data["success"] is False
        assert {r["name"] for r in data["rows"]} == {"ok", "bad"}


class TestErrorMapping:
    """Simulator errors become HTTP status codes."""

    def test_schema_violation(self, client):
        """Invalid bodies are rejected with 422."""
        response = client.post("/api/v1/emulate", json={**SMALL_RUN, "shots": 0})
        assert response.status_code == 422

    def test_source_site_outside_chain(self, client):
        """Cross-field validation is a 422 as well."""
        response = client.post("/api/v1/exact-correlator", json={**SMALL_RUN, "source_site": 5})
        assert response.status_code == 422

    def test_unsupported_native(self, client):
        """Qubit-native emulation is a 400."""
        response = client.post("/api/v1/emulate", json={**SMALL_RUN, "natives": ["qubit"]})
        assert response.status_code == 400

    def test_dimension_cap(self, client, monkeypatch):
        """Chains above the cap are a 413."""
        monkeypatch.setenv("QSQED_DIM_CAP", "5")
        response = client.post("/api/v1/exact-correlator", json=SMALL_RUN)
        assert response.status_code == 413


class TestRuns:
    """Archived runs."""

    def test_list_and_fetch(self, client):
        """Runs are listed newest first and carry the config hash."""
        client.post("/api/v1/exact-correlator", json=SMALL_RUN)
        client.post("/api/v1/exact-correlator", json={**SMALL_RUN, "seed": 8})
        response = client.get("/api/v1/runs")
        assert response.status_code == 200
        runs = response.json()
        assert len(runs) == 2
        assert runs[0]["seed"] == "8"
        assert runs[1]["config_hash"] == config_hash(ExperimentConfig(**SMALL_RUN))

        detail = client.get(f"/api/v1/runs/{runs[0]['id']}")
        assert detail.status_code == 200
        assert detail.json()["kind"] == "exact-correlator"
        assert detail.json()["config"]["seed"] == 8

    def test_filter_by_kind(self, client):
        """kind narrows the listing."""
        client.post("/api/v1/exact-correlator", json=SMALL_RUN)
        assert client.get("/api/v1/runs?kind=emulate").json() == []
        assert len(client.get("/api/v1/runs?kind=exact-correlator").json()) == 1

    def test_csv_download(self, client):
        """The archived CSV is served as text/csv."""
        run_id = client.post("/api/v1/exact-correlator", json=SMALL_RUN).json()["run_id"]
        response = client.get(f"/api/v1/runs/{run_id}/csv")
        assert response.status_code == 200
        assert "text/csv" in response.headers["content-type"]
        assert response.text.startswith("# config_hash=")

    def test_missing_run(self, client):
        """Unknown run ids are a 404."""
        assert client.get("/api/v1/runs/999").status_code == 404
        assert client.get("/api/v1/runs/999/csv").status_code == 404
