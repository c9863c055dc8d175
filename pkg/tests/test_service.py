"""HTTP layer: config loading, endpoint behavior, write leases, durability."""

import json
from types import SimpleNamespace

import pytest
import yaml
from fastapi.testclient import TestClient

from gaitcontest.llm import BackendError, ScriptedBackend
from gaitcontest.nn import make_default_network, save_checkpoint
from gaitcontest.service import (
    ConfigError,
    GaitService,
    create_app,
    load_service_config,
)
from gaitcontest.synth import write_synthetic_dataset

ACCEPT_S2 = "Gait evidence reviewed in detail. Final decision: Stage 2."
OVERTURN_S25 = "The contested points hold up. Final decision: Stage 2.5."

CONTEST_BODY = {"kind": "Reasoning Flaw",
                "free_text": "Flagged frames fall outside the gait events.",
                "author": "dr-a"}


def write_config(root, **overrides):
    cfg = {
        "data_directory": "data",
        "checkpoint_path": "model.ckpt",
        "audit_log_path": "state/audit.jsonl",
        "llm": {"model_name": "scripted"},
        "xmed": {"threshold": 0.2, "merge_gap": 10, "alert_pct": 3.0},
        "auto_adjudicate_on_alert": False,
    }
    cfg.update(overrides)
    path = root / "service.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


def build_env(tmp_path, script=(), **overrides):
    write_synthetic_dataset(tmp_path / "data", subjects_per_class=1,
                            duration_s=30.0, seed=3)
    net = make_default_network(dropout_rate=0.0, seed=0, conv_channels=(2,),
                               kernel_size=5, dense_units=(8,))
    save_checkpoint(net, tmp_path / "model.ckpt")
    config = load_service_config(write_config(tmp_path, **overrides))
    backend = ScriptedBackend(list(script))
    service = GaitService(config, backend=backend)
    client = TestClient(create_app(service), raise_server_exceptions=False)
    return SimpleNamespace(service=service, client=client, backend=backend,
                           config=config, root=tmp_path)


def create_case(client, subject="synth000", index=0):
    resp = client.post("/v1/cases",
                       json={"subject_id": subject, "window_index": index})
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestConfigLoading:
    def test_relative_paths_resolve_against_config_parent(self, tmp_path):
        (tmp_path / "data").mkdir()
        config = load_service_config(write_config(tmp_path))
        assert config.data_directory == str(tmp_path / "data")
        assert config.checkpoint_path == str(tmp_path / "model.ckpt")
        assert config.audit_log_path == str(tmp_path / "state" / "audit.jsonl")
        assert config.case_directory == str(tmp_path / "state" / "cases")
        assert config.llm.model_name == "scripted"
        assert config.xmed.threshold == 0.2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_service_config(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("a: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_service_config(path)

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- one\n- two\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_service_config(path)

    def test_unknown_and_missing_keys(self, tmp_path):
        (tmp_path / "data").mkdir()
        with pytest.raises(ConfigError, match="unknown"):
            load_service_config(write_config(tmp_path, mystery=1))
        path = tmp_path / "partial.yaml"
        path.write_text("data_directory: data\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="missing"):
            load_service_config(path)

    def test_bad_nested_settings(self, tmp_path):
        (tmp_path / "data").mkdir()
        with pytest.raises(ConfigError):
            load_service_config(write_config(tmp_path, xmed={"threshold": 0}))
        with pytest.raises(ConfigError):
            load_service_config(write_config(
                tmp_path, llm={"model_name": "m", "verbs": True}))
        with pytest.raises(ConfigError):
            load_service_config(write_config(tmp_path, llm_concurrency=0))

    def test_data_directory_must_exist(self, tmp_path):
        with pytest.raises(ConfigError, match="data_directory"):
            load_service_config(write_config(tmp_path))


class TestReadEndpoints:
    def test_health(self, tmp_path):
        env = build_env(tmp_path)
        body = env.client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert body["model_loaded"] is True
        assert body["subjects"] == 4
        assert body["cases"] == 0

    def test_subjects_listing(self, tmp_path):
        env = build_env(tmp_path)
        rows = env.client.get("/v1/subjects").json()
        assert [r["subject_id"] for r in rows] == sorted(r["subject_id"]
                                                         for r in rows)
        assert len(rows) == 4
        labels = {r["label"] for r in rows}
        assert labels == {"Healthy", "Stage 2", "Stage 2.5", "Stage 3"}
        for r in rows:
            assert r["n_samples"] == 3000
            assert r["window_count"] == 3
            assert r["duration_s"] == pytest.approx(30.0, abs=0.1)

    def test_window_view_payload(self, tmp_path):
        env = build_env(tmp_path)
        sid = env.client.get("/v1/subjects").json()[0]["subject_id"]
        body = env.client.get(f"/v1/subjects/{sid}/windows/1").json()
        assert body["subject_id"] == sid
        assert body["window_index"] == 1
        assert body["start_frame"] == 1000
        assert body["frames"] == 1000
        assert body["sample_rate_hz"] == 100.0
        assert set(body["channels"]) == {"total_left", "total_right"}
        assert all(len(v) == 1000 for v in body["channels"].values())
        for foot in ("left", "right"):
            assert all(isinstance(i, int) for i in body["heel_strikes"][foot])
            phases = body["phases"][foot]
            assert phases[0]["start"] == 0
            assert phases[-1]["end"] == 999
            for prev, cur in zip(phases, phases[1:]):
                assert cur["start"] == prev["end"] + 1
                assert {prev["phase"], cur["phase"]} == {"stance", "swing"}
        metrics = body["metrics"]
        assert metrics is not None
        assert metrics["n_strides"] >= 1
        assert metrics["stance_percentage"] + metrics["swing_percentage"] == \
            pytest.approx(100.0)

    def test_window_view_channel_selection(self, tmp_path):
        env = build_env(tmp_path)
        body = env.client.get(
            "/v1/subjects/synth000/windows/0?channels=total_left").json()
        assert list(body["channels"]) == ["total_left"]

    def test_not_found_paths(self, tmp_path):
        env = build_env(tmp_path)
        for url in ("/v1/subjects/ghost/windows/0",
                    "/v1/subjects/synth000/windows/99",
                    "/v1/subjects/synth000/windows/0?channels=bogus",
                    "/v1/cases/case-none"):
            resp = env.client.get(url)
            assert resp.status_code == 404
            assert resp.json()["error"] == "NotFound"


class TestCaseLifecycle:
    def test_create_case_payload(self, tmp_path):
        env = build_env(tmp_path)
        body = create_case(env.client)
        assert body["case_id"].startswith("case-")
        assert body["state"] == "UnderReview"
        assert body["window_ref"] == {"subject_id": "synth000",
                                      "window_index": 0, "start_frame": 0}
        assert body["prediction"]["predicted_class"] in {
            "Healthy", "Stage 2", "Stage 2.5", "Stage 3"}
        assert len(body["explanations"]["gradcam"]) == 1000
        assert len(body["explanations"]["lrp"]) == 1000
        assert {"discrepancy_percentage", "regions", "alert", "threshold",
                "merge_gap"} <= set(body["discrepancy"])
        assert [e["action"] for e in body["audit_entries"]] == \
            ["created", "review_opened"]
        assert env.client.get("/v1/health").json()["cases"] == 1
        listing = env.client.get("/v1/cases").json()
        assert listing[0]["case_id"] == body["case_id"]
        assert listing[0]["subject_id"] == "synth000"
        fetched = env.client.get(f"/v1/cases/{body['case_id']}").json()
        assert fetched == body

    def test_create_requires_model(self, tmp_path):
        env = build_env(tmp_path, checkpoint_path="missing.ckpt")
        assert env.client.get("/v1/health").json()["model_loaded"] is False
        resp = env.client.post("/v1/cases", json={"subject_id": "synth000",
                                                  "window_index": 0})
        assert resp.status_code == 503
        assert resp.json()["error"] == "ModelNotLoaded"

    def test_create_validates_body(self, tmp_path):
        env = build_env(tmp_path)
        assert env.client.post("/v1/cases", json={}).status_code == 422

    def test_contest_adjudicate_finalize(self, tmp_path):
        env = build_env(tmp_path, script=[OVERTURN_S25])
        case_id = create_case(env.client)["case_id"]

        body = env.client.post(f"/v1/cases/{case_id}/contest",
                               json=CONTEST_BODY).json()
        assert body["state"] == "Contested"
        assert body["contestations"][0]["kind"] == "REASONING_FLAW"
        assert body["contestations"][0]["author"] == "dr-a"

        body = env.client.post(f"/v1/cases/{case_id}/adjudicate",
                               json={"actor": "adj"}).json()
        assert body["state"] == "Justified"
        turn = body["dialogue"][0]
        assert turn["result"]["final_class"] == "Stage 2.5"
        assert "outside the gait events" in env.backend.calls[0][1]["content"]

        body = env.client.post(f"/v1/cases/{case_id}/finalize",
                               json={"decision": "accept"}).json()
        assert body["state"] == "Finalized(accepted)"
        assert body["final_label"] == "Stage 2.5"

        audit = env.client.get(f"/v1/cases/{case_id}/audit").json()
        assert audit["verified"] is True
        assert [e["action"] for e in audit["entries"]] == [
            "created", "review_opened", "contested", "adjudicated", "finalized"]

    def test_finalize_override(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2])
        case_id = create_case(env.client)["case_id"]
        env.client.post(f"/v1/cases/{case_id}/adjudicate")
        resp = env.client.post(f"/v1/cases/{case_id}/finalize",
                               json={"decision": "override"})
        assert resp.status_code == 422  # no label supplied
        body = env.client.post(
            f"/v1/cases/{case_id}/finalize",
            json={"decision": "override", "override_label": "Stage 3"}).json()
        assert body["state"] == "Finalized(overridden)"
        assert body["final_label"] == "Stage 3"

    def test_finalized_cases_are_frozen(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2])
        case_id = create_case(env.client)["case_id"]
        env.client.post(f"/v1/cases/{case_id}/adjudicate")
        env.client.post(f"/v1/cases/{case_id}/finalize",
                        json={"decision": "accept"})
        for attempt in (
            env.client.post(f"/v1/cases/{case_id}/contest", json=CONTEST_BODY),
            env.client.post(f"/v1/cases/{case_id}/finalize",
                            json={"decision": "accept"}),
        ):
            assert attempt.status_code == 409
            assert attempt.json()["error"] == "AlreadyFinalized"

    def test_adjudicate_needs_reviewable_state(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2, ACCEPT_S2])
        case_id = create_case(env.client)["case_id"]
        env.client.post(f"/v1/cases/{case_id}/adjudicate")
        resp = env.client.post(f"/v1/cases/{case_id}/adjudicate")
        assert resp.status_code == 409
        assert resp.json()["error"] == "InvalidStateTransition"

    def test_unknown_contest_kind_rejected(self, tmp_path):
        env = build_env(tmp_path)
        case_id = create_case(env.client)["case_id"]
        resp = env.client.post(f"/v1/cases/{case_id}/contest",
                               json={"kind": "Vibes", "free_text": "no"})
        assert resp.status_code == 422
        assert resp.json()["error"] == "ValueError"
        # enum names are accepted alongside display values
        ok = env.client.post(
            f"/v1/cases/{case_id}/contest",
            json={"kind": "FACTUAL_ERROR", "free_text": "wrong stride time"})
        assert ok.json()["contestations"][0]["kind"] == "FACTUAL_ERROR"

    def test_parse_failure_maps_to_502(self, tmp_path):
        env = build_env(tmp_path, script=["I really cannot say."])
        case_id = create_case(env.client)["case_id"]
        resp = env.client.post(f"/v1/cases/{case_id}/adjudicate")
        assert resp.status_code == 502
        body = env.client.get(f"/v1/cases/{case_id}").json()
        assert body["state"] == "UnderReview"
        audit = env.client.get(f"/v1/cases/{case_id}/audit").json()
        assert audit["verified"] is True
        assert audit["entries"][-1]["action"] == "adjudication_failed"

    def test_exhausted_backend_maps_to_503(self, tmp_path):
        env = build_env(tmp_path, script=[BackendError("a"), BackendError("b"),
                                          BackendError("c")])
        case_id = create_case(env.client)["case_id"]
        resp = env.client.post(f"/v1/cases/{case_id}/adjudicate")
        assert resp.status_code == 503
        assert resp.json()["error"] == "BackendUnavailable"
        audit = env.client.get(f"/v1/cases/{case_id}/audit").json()
        actions = [e["action"] for e in audit["entries"]]
        assert actions.count("backend_retry") == 3
        assert actions[-1] == "adjudication_failed"
        assert audit["verified"] is True

    def test_held_lease_returns_conflict(self, tmp_path):
        env = build_env(tmp_path)
        case_id = create_case(env.client)["case_id"]
        with env.service.case_lease(case_id):
            resp = env.client.post(f"/v1/cases/{case_id}/contest",
                                   json=CONTEST_BODY)
        assert resp.status_code == 409
        assert resp.json()["error"] == "WriterBusy"
        # lease released: the same mutation now succeeds
        ok = env.client.post(f"/v1/cases/{case_id}/contest", json=CONTEST_BODY)
        assert ok.status_code == 200


class TestAutoAdjudication:
    ALERTING_XMED = {"threshold": 1e-6, "merge_gap": 10, "alert_pct": 1e-9}

    def test_alert_triggers_automatic_adjudication(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2],
                        auto_adjudicate_on_alert=True, xmed=self.ALERTING_XMED)
        body = create_case(env.client)
        assert body["discrepancy"]["alert"] is True
        assert body["state"] == "Justified"
        assert "auto_adjudication_error" not in body
        adjudicated = [e for e in body["audit_entries"]
                       if e["action"] == "adjudicated"]
        assert adjudicated and adjudicated[0]["actor"] == "auto"

    def test_backend_crash_is_reported_not_fatal(self, tmp_path):
        env = build_env(tmp_path, script=[RuntimeError("llm exploded")],
                        auto_adjudicate_on_alert=True, xmed=self.ALERTING_XMED)
        body = create_case(env.client)
        assert body["state"] == "UnderReview"
        assert body["auto_adjudication_error"].startswith("RuntimeError")
        # the case itself persisted and stays workable
        assert env.client.get(f"/v1/cases/{body['case_id']}").status_code == 200

    def test_quiet_case_skips_the_backend(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2],
                        auto_adjudicate_on_alert=True,
                        xmed={"threshold": 1.0, "merge_gap": 10,
                              "alert_pct": 3.0})
        body = create_case(env.client)
        assert body["discrepancy"]["alert"] is False
        assert body["state"] == "UnderReview"
        assert env.backend.calls == []


class TestDurability:
    def test_restart_reloads_cases_and_preserves_audit(self, tmp_path):
        env = build_env(tmp_path, script=[OVERTURN_S25])
        case_a = create_case(env.client)["case_id"]
        env.client.post(f"/v1/cases/{case_a}/contest", json=CONTEST_BODY)
        env.client.post(f"/v1/cases/{case_a}/adjudicate")
        env.client.post(f"/v1/cases/{case_a}/finalize",
                        json={"decision": "accept"})
        case_b = create_case(env.client, subject="synth100")["case_id"]

        audit_path = env.root / "state" / "audit.jsonl"
        frozen = audit_path.read_bytes()
        snapshot = {cid: env.client.get(f"/v1/cases/{cid}").json()
                    for cid in (case_a, case_b)}

        service2 = GaitService(env.config, backend=ScriptedBackend([ACCEPT_S2]))
        client2 = TestClient(create_app(service2),
                             raise_server_exceptions=False)
        assert audit_path.read_bytes() == frozen  # restart never writes
        assert client2.get("/v1/health").json()["cases"] == 2
        for cid, before in snapshot.items():
            assert client2.get(f"/v1/cases/{cid}").json() == before

        # new mutations continue each case's chain without duplication
        lines_before = len(frozen.splitlines())
        body = client2.post(f"/v1/cases/{case_b}/adjudicate").json()
        assert body["state"] == "Justified"
        audit = client2.get(f"/v1/cases/{case_b}/audit").json()
        assert audit["verified"] is True
        assert len(audit_path.read_bytes().splitlines()) == lines_before + 1

    def test_disk_tamper_flips_verification(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2])
        case_id = create_case(env.client)["case_id"]
        env.client.post(f"/v1/cases/{case_id}/adjudicate")
        assert env.client.get(f"/v1/cases/{case_id}/audit").json()["verified"]

        audit_path = env.root / "state" / "audit.jsonl"
        text = audit_path.read_text(encoding="utf-8")
        assert '"created"' in text
        audit_path.write_text(text.replace('"created"', '"creAted"', 1),
                              encoding="utf-8")
        tampered = env.client.get(f"/v1/cases/{case_id}/audit").json()
        assert tampered["verified"] is False

    def test_case_snapshots_round_trip_as_files(self, tmp_path):
        env = build_env(tmp_path, script=[ACCEPT_S2])
        case_id = create_case(env.client)["case_id"]
        path = env.root / "state" / "cases" / f"{case_id}.json"
        assert path.exists()
        on_disk = json.loads(path.read_text(encoding="utf-8"))
        assert on_disk == env.client.get(f"/v1/cases/{case_id}").json()
