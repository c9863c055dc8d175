"""Drive the case service end to end without a network.

The service owns everything the HTTP layer exposes: subjects and windows
from a manifest directory, a checkpoint-loaded classifier, case records
with writer leases, and a durable audit log on disk. Here it runs fully
offline with a scripted adjudication backend; `gaitcontest serve --config
config.yaml` wraps this same object in FastAPI routes.
"""

import tempfile
from pathlib import Path

import yaml

from gaitcontest.llm import ScriptedBackend
from gaitcontest.nn import TrainConfig, make_default_network, train
from gaitcontest.nn.checkpoint import save_checkpoint
from gaitcontest.service import GaitService, load_service_config
from gaitcontest.signal_io import load_dataset, segment_windows
from gaitcontest.synth import write_synthetic_dataset

ANSWER = ("The stance asymmetry matches the flagged region. "
          "Final decision: Stage 2.5.")


def build_workspace() -> Path:
    root = Path(tempfile.mkdtemp(prefix="gaitcontest-service-"))
    write_synthetic_dataset(root / "data", subjects_per_class=1,
                            duration_s=30.0, seed=3)

    # quick throwaway checkpoint; prediction quality is not the point here
    windows = []
    for rec in load_dataset(root / "data"):
        windows.extend(segment_windows(rec))
    net = make_default_network(dropout_rate=0.0, seed=0, conv_channels=(2,),
                               kernel_size=3, dense_units=(8,))
    net, _ = train(net, windows, windows,
                   TrainConfig(learning_rate=1e-3, dropout_rate=0.0, epochs=2,
                               batch_size=4, seed=0,
                               early_stopping_patience=None))
    save_checkpoint(net, root / "model.ckpt")

    (root / "config.yaml").write_text(yaml.safe_dump({
        "data_directory": "data",
        "checkpoint_path": "model.ckpt",
        "audit_log_path": "state/audit.jsonl",
        "llm": {"model_name": "scripted-demo"},
        "auto_adjudicate_on_alert": False,
    }), encoding="utf-8")
    return root


def main() -> None:
    root = build_workspace()
    config = load_service_config(root / "config.yaml")
    service = GaitService(config, backend=ScriptedBackend([ANSWER]))

    print(f"health: {service.health()}")
    subject = service.list_subjects()[0]
    print(f"first subject: {subject['subject_id']} "
          f"({subject['label']}, {subject['window_count']} windows)")

    case = service.post_predict(subject["subject_id"], 0)
    case_id = case["case_id"]
    print(f"\ncreated {case_id}: state={case['state']}, "
          f"predicted={case['prediction']['predicted_class']!r}, "
          f"alert={case['discrepancy']['alert']}")

    case = service.post_contest(case_id, kind="Reasoning Flaw",
                                free_text="The evidence region looks like a "
                                          "sensor dropout.", author="dr-demo")
    case = service.post_adjudicate(case_id)
    decision = case["dialogue"][-1]["result"]["final_class"]
    print(f"adjudicated: state={case['state']}, decision={decision!r}")

    case = service.post_finalize(case_id, decision="accept", actor="dr-demo")
    print(f"finalized: state={case['state']}, label={case['final_label']!r}")

    audit = service.get_audit(case_id)
    print(f"\ndurable audit at {config.audit_log_path}:")
    for entry in audit["entries"]:
        print(f"  {entry['seq']}  {entry['action']}")
    print(f"on-disk chain verifies: {audit['verified']}")

    # a fresh service instance rebuilds every case from disk
    revived = GaitService(config, backend=ScriptedBackend([]))
    print(f"\nafter restart: {len(revived.list_cases())} case(s), "
          f"state={revived.get_case(case_id)['state']}")


if __name__ == "__main__":
    main()
