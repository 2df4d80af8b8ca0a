import pytest
from fastapi.testclient import TestClient

from mup_spectral.service.app import app

client = TestClient(app)


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_rules_endpoint():
    r = client.post("/rules", json={"optimizer": "adamw", "widths": [128, 256], "depth": 4})
    assert r.status_code == 200
    table = r.json()["table"]
    lines = table.strip().splitlines()
    assert lines[0].startswith("width\tlayer\trole")
    assert len(lines) == 1 + 2 * 4


def test_rules_rejects_unknown_optimizer():
    r = client.post("/rules", json={"optimizer": "adagrad"})
    assert r.status_code == 422


def test_lr_sweep_endpoint():
    req = {"widths": [8], "lr_grid": [0.01], "seeds": [0, 1], "steps": 3,
           "batch_size": 4, "input_dim": 6, "output_dim": 3, "teacher_width": 8,
           "n_train": 32, "n_val": 8, "depth": 2}
    r = client.post("/lr-sweep", json=req)
    assert r.status_code == 200
    body = r.json()
    assert len(body["rows"]) == 2
    assert body["csv"].splitlines()[0] == "width,lr,seed,steps_completed,train_loss,val_loss,diverged"


def test_lr_sweep_validation_error():
    r = client.post("/lr-sweep", json={"widths": [64, 32]})
    assert r.status_code == 422
    assert "ascending" in r.json()["detail"]


def test_coord_check_endpoint():
    req = {"widths": [8, 16], "lr_grid": [0.01], "seeds": [0], "steps": 3,
           "batch_size": 4, "input_dim": 6, "output_dim": 3, "teacher_width": 8,
           "n_train": 32, "n_val": 16, "depth": 3}
    r = client.post("/coord-check", json=req)
    assert r.status_code == 200
    body = r.json()
    assert body["csv"].splitlines()[0] == "width,step,layer,rms_coord,rel_to_first"
    assert len(body["records"]) == 2 * 3 * 3
    assert all(rec["rel_to_first"] == 1.0 for rec in body["records"] if rec["step"] == 1)


def test_probe_endpoint():
    r = client.post("/probe", json={"optimizer": "adamw", "widths": [16], "depth": 3,
                                    "input_dim": 6, "output_dim": 3})
    assert r.status_code == 200
    body = r.json()
    assert len(body["probes"]) == 3
    for p in body["probes"]:
        assert p["grad_rank"] == 1  # batch-1 probe gradients are rank one
        assert p["spec_w"] > 0


def test_plot_endpoint_round_trip():
    req = {"widths": [8, 16], "lr_grid": [0.5, 0.25], "seeds": [0], "steps": 2,
           "batch_size": 4, "input_dim": 6, "output_dim": 3, "teacher_width": 8,
           "n_train": 32, "n_val": 8, "depth": 2}
    sweep = client.post("/lr-sweep", json=req).json()
    r = client.post("/plot", json={"kind": "loss_vs_lr_by_width", "csv": sweep["csv"]})
    assert r.status_code == 200
    svg = r.json()["svg"]
    assert svg.count("<polyline") == 2


def test_plot_rejects_bad_kind():
    r = client.post("/plot", json={"kind": "nope", "csv": "width,lr\n"})
    assert r.status_code == 422
