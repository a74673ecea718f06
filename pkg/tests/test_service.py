import numpy as np
import pytest
from fastapi.testclient import TestClient

from rblab import arms, envgen, whittle
from rblab.service import app

client = TestClient(app)


def model_doc(kind="A", n=2, S=3, seed=0):
    inst = envgen.make_environment(kind, n, S, np.random.default_rng(seed))
    return arms.instance_to_dict(inst)


def test_health():
    doc = client.get("/health").json()
    assert doc["status"] == "ok" and doc["schema_version"] == "1"


def test_gen_env_round_trip():
    resp = client.post(
        "/gen-env", json={"kind": "A", "n": 2, "S": 4, "seed": 7}
    )
    assert resp.status_code == 200
    inst = arms.instance_from_dict(resp.json()["model"])
    assert inst.num_arms == 2
    assert arms.validate(inst) == []


def test_gen_env_deterministic():
    payload = {"kind": "B", "n": 1, "S": 3, "seed": 5}
    a = client.post("/gen-env", json=payload).json()
    b = client.post("/gen-env", json=payload).json()
    assert a == b


def test_gen_env_rejects_bad_kind():
    resp = client.post("/gen-env", json={"kind": "C", "n": 1, "S": 3, "seed": 0})
    assert resp.status_code == 422


def test_whittle_endpoint_matches_library():
    doc = model_doc()
    resp = client.post("/whittle", json={"model": doc})
    assert resp.status_code == 200
    indices = resp.json()["indices"]
    inst = arms.instance_from_dict(doc)
    for i in range(2):
        expect = whittle.whittle_indices(inst.arms[i])
        assert np.allclose(indices[str(i)], expect, atol=1e-12)


def test_whittle_endpoint_single_arm_and_range():
    doc = model_doc()
    resp = client.post("/whittle", json={"model": doc, "arm": 1})
    assert set(resp.json()["indices"]) == {"1"}
    assert client.post("/whittle", json={"model": doc, "arm": 5}).status_code == 422


def test_whittle_endpoint_bad_model():
    assert client.post("/whittle", json={"model": {"bogus": 1}}).status_code == 422


def test_whittle_endpoint_degenerate_arm(monkeypatch):
    # the computation's failure modes surface as 422, not 500
    def boom(arm):
        raise whittle.DegenerateArmError("no activity change")

    monkeypatch.setattr(whittle, "whittle_indices", boom)
    import rblab.service as service

    monkeypatch.setattr(service.whittle, "whittle_indices", boom)
    resp = client.post("/whittle", json={"model": model_doc(), "arm": 0})
    assert resp.status_code == 422
    assert "arm 0" in resp.json()["detail"]


def test_run_endpoint(tmp_path):
    config = dict(
        kind="A", n_list=[1], S=3, T=60, num_sample_paths=2, master_seed=4,
        rollout_horizon=5000, rollout_reps=2, jobs=1,
    )
    resp = client.post(
        "/run", json={"config": config, "outdir": str(tmp_path / "out")}
    )
    assert resp.status_code == 200
    doc = resp.json()
    assert "summary.csv" in doc["files"]
    assert {row["algorithm"] for row in doc["summary"]} == {"rb-tsde", "qwi"}
    assert (tmp_path / "out" / "report.json").exists()


def test_run_endpoint_bad_config(tmp_path):
    resp = client.post(
        "/run", json={"config": {"kind": "A"}, "outdir": str(tmp_path)}
    )
    assert resp.status_code == 422


def test_verify_endpoint():
    resp = client.post("/verify", json={"suite": "monotone", "count": 30})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["passed"] and doc["report"]["count"] == 30
    assert client.post("/verify", json={"suite": "nope"}).status_code == 422


def test_fit_endpoint():
    pts = [[1, 5], [2, 8], [4, 14], [8, 26]]
    doc = client.post("/fit", json={"points": pts}).json()
    assert doc["fits"]["linear"]["p1"] == pytest.approx(3.0, abs=1e-8)
    assert client.post("/fit", json={"points": [[1, 1]]}).status_code == 422
