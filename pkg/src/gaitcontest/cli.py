"""Batch entry points: dataset synthesis, training, tuning, evaluation,
discrepancy sweeps, explanation plots, adjudication sweeps, and serving.

Exit codes follow the usual convention: 0 success, 1 runtime failure,
2 usage or configuration error. All figures are non-interactive SVG.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .adjudicate import (
    Contestation,
    ContestationKind,
    adjudicate,
    contest,
    create_case,
    finalize,
    open_review,
    prompt_context_for,
    render_prompt,
)
from .llm import HttpChatBackend, ScriptedBackend
from .nn import (
    TrainConfig,
    evaluate_windows,
    format_report,
    load_checkpoint,
    make_default_network,
    save_checkpoint,
    standardize_window,
    train,
)
from .severity import Severity
from .signal_io import load_dataset, segment_windows, split_dataset, window_gait_metrics
from .explain import explanation_pair
from .synth import write_synthetic_dataset
from .textmetrics import CaseOutcome, EvaluationSet, run_report_row, write_report_csv
from .xmed import compute_discrepancy, discrepancy_summary


class UsageError(Exception):
    """Bad paths, bad flags, unreadable config: the operator's fault."""


def _windows_from_dir(data_dir: str):
    """Raw windows from a manifest directory; standardize at the model boundary."""
    root = Path(data_dir)
    if not root.is_dir():
        raise UsageError(f"data directory not found: {data_dir}")
    if not (root / "manifest.csv").exists():
        raise UsageError(f"no manifest.csv in {data_dir}")
    windows = []
    for rec in load_dataset(root):
        windows.extend(segment_windows(rec))
    return windows


def _model_view(windows, args):
    if args.no_standardize:
        return list(windows)
    return [standardize_window(w) for w in windows]


def _load_net(path: str):
    if not Path(path).exists():
        raise UsageError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def cmd_synth(args) -> int:
    ids = write_synthetic_dataset(args.out_dir, subjects_per_class=args.subjects_per_class,
                                  duration_s=args.duration_s, seed=args.seed)
    print(f"wrote {len(ids)} recordings to {args.out_dir}")
    return 0


def cmd_train(args) -> int:
    windows = _model_view(_windows_from_dir(args.data_dir), args)
    train_w, val_w, test_w = split_dataset(windows, seed=args.seed)
    net = make_default_network(dropout_rate=args.dropout, seed=args.seed)
    config = TrainConfig(learning_rate=args.lr, dropout_rate=args.dropout,
                         epochs=args.epochs, batch_size=args.batch_size,
                         seed=args.seed)
    net, history = train(net, train_w, val_w, config)
    for st in history:
        print(f"epoch {st.epoch:3d}  train loss {st.train_loss:.4f} "
              f"acc {st.train_accuracy:.4f}  val loss {st.val_loss:.4f} "
              f"acc {st.val_accuracy:.4f}  f1 {st.val_weighted_f1:.4f}")
    blob = save_checkpoint(net, dest=args.out_checkpoint)
    digest = hashlib.sha256(blob).hexdigest()
    print(f"checkpoint {args.out_checkpoint}  sha256 {digest}")
    report, _, _ = evaluate_windows(net, test_w)
    print(f"test accuracy {report.accuracy:.4f}  weighted f1 {report.weighted_f1:.4f}")
    return 0


def cmd_tune(args) -> int:
    from .nn.train import grid_search

    windows = _model_view(_windows_from_dir(args.data_dir), args)
    grid = {"learning_rate": args.lr_grid, "dropout_rate": args.dropout_grid}
    base = TrainConfig(epochs=args.epochs, seed=args.seed)
    result = grid_search(windows, grid, base_config=base,
                         outer_folds=args.outer_folds,
                         inner_folds=args.inner_folds, seed=args.seed)
    for i, cfg in enumerate(result.configs):
        scores = result.inner_scores[i]
        print(f"config lr={cfg.learning_rate} dropout={cfg.dropout_rate} "
              f"inner f1 {np.mean(scores):.4f} ({', '.join(f'{s:.4f}' for s in scores)})")
    best = result.best_config
    print(f"best: lr={best.learning_rate} dropout={best.dropout_rate}")
    print(f"outer f1 {np.mean(result.outer_scores):.4f} "
          f"({', '.join(f'{s:.4f}' for s in result.outer_scores)})")
    if args.out_json:
        payload = {
            "best": {"learning_rate": best.learning_rate, "dropout_rate": best.dropout_rate},
            "inner_scores": [list(map(float, s)) for s in result.inner_scores],
            "outer_scores": list(map(float, result.outer_scores)),
        }
        Path(args.out_json).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    return 0


def cmd_evaluate(args) -> int:
    from .nn.evaluate import confusion_matrix

    net = _load_net(args.checkpoint)
    windows = _model_view(_windows_from_dir(args.data_dir), args)
    if args.split == "test":
        _, _, windows = split_dataset(windows, seed=args.seed)
    report, y_true, y_pred = evaluate_windows(net, windows)
    print(format_report(report))
    if args.out_confusion:
        np.savetxt(args.out_confusion, confusion_matrix(y_true, y_pred),
                   fmt="%d", delimiter=",")
        print(f"confusion matrix -> {args.out_confusion}")
    return 0


def cmd_xmed(args) -> int:
    import csv

    net = _load_net(args.checkpoint)
    windows = _windows_from_dir(args.data_dir)
    if args.split == "test":
        _, _, windows = split_dataset(windows, seed=args.seed)
    rows = []
    outcomes = []
    for i, w in enumerate(windows):
        pair = explanation_pair(net, w if args.no_standardize else standardize_window(w))
        rep = compute_discrepancy(pair.gradcam, pair.lrp, threshold=args.threshold,
                                  merge_gap=args.merge_gap,
                                  alert_threshold_pct=args.alert_pct)
        correct = w.label is not None and pair.prediction.predicted_class == w.label
        outcomes.append((rep, correct))
        rows.append({
            "window": i, "subject_id": w.source_id, "start_frame": w.start_frame,
            "true_label": "" if w.label is None else w.label.label,
            "predicted": pair.prediction.predicted_class.label,
            "confidence": f"{pair.prediction.confidence:.6f}",
            "discrepancy_pct": f"{rep.discrepancy_percentage:.6f}",
            "alert": rep.alert,
            "regions": "; ".join(f"{a}-{b}" for a, b in rep.regions),
        })
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"{len(rows)} windows -> {args.out_csv}")
    try:
        mean_c, mean_w = discrepancy_summary(outcomes)
        print(f"mean discrepancy: correct {mean_c:.3f}%  misclassified {mean_w:.3f}%")
    except ValueError:
        print("mean discrepancy: one of the groups is empty, no summary")
    return 0


def cmd_explain(args) -> int:
    net = _load_net(args.checkpoint)
    windows = _windows_from_dir(args.data_dir)
    matches = [w for w in windows if w.source_id == args.subject]
    if not matches:
        raise UsageError(f"subject {args.subject!r} has no windows")
    if not 0 <= args.window < len(matches):
        raise UsageError(f"subject {args.subject!r} has no window {args.window}")
    window = matches[args.window]
    model_input = window if args.no_standardize else standardize_window(window)
    pair = explanation_pair(net, model_input)
    rep = compute_discrepancy(pair.gradcam, pair.lrp, threshold=args.threshold,
                              merge_gap=args.merge_gap, alert_threshold_pct=args.alert_pct)
    print(f"predicted {pair.prediction.predicted_class.label} "
          f"confidence {pair.prediction.confidence:.3f}")
    print(f"discrepancy {rep.discrepancy_percentage:.1f}%  alert {rep.alert}  "
          f"regions {rep.regions}")
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write("index,gradcam,lrp\n")
            for i in range(len(pair.gradcam.values)):
                fh.write(f"{i},{float(pair.gradcam.values[i])!r},"
                         f"{float(pair.lrp.values[i])!r}\n")
        print(f"maps -> {args.out_csv}")
    if args.out_svg:
        _plot_explanation(window, pair, rep, args.out_svg)
        print(f"figure -> {args.out_svg}")
    return 0


def _plot_explanation(window, pair, rep, dest: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True,
                             gridspec_kw={"height_ratios": [2, 1]})
    axes[0].plot(window.values, color="#333333", linewidth=0.8)
    axes[0].set_ylabel("force")
    axes[0].set_title(f"{window.source_id} @ {window.start_frame}")
    axes[1].plot(pair.gradcam.values, label="gradient map", linewidth=0.9)
    axes[1].plot(pair.lrp.values, label="relevance map", linewidth=0.9)
    for a, b in rep.regions:
        for ax in axes:
            ax.axvspan(a, b, color="#d62728", alpha=0.15)
    axes[1].set_ylabel("saliency")
    axes[1].set_xlabel("frame")
    axes[1].legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(dest, format="svg")
    plt.close(fig)


def _mock_backend(policy: str, predicted: Severity, truth: Severity | None,
                  context) -> ScriptedBackend:
    target = predicted
    if policy == "oracle" and truth is not None:
        target = truth
    text = (
        f"The model proposed {predicted.label} with confidence "
        f"{context.confidence:.3f}. The discrepancy level was "
        f"{context.discrepancy_percentage:.1f}%. After weighing the gait "
        f"metrics against the cited evidence, the review is complete. "
        f"Final decision: {target.label}."
    )
    return ScriptedBackend([text])


def cmd_contest_run(args) -> int:
    net = _load_net(args.checkpoint)
    windows = _windows_from_dir(args.data_dir)
    if args.split == "test":
        _, _, windows = split_dataset(windows, seed=args.seed)
    windows = [w for w in windows if w.label is not None][:args.cases]
    if not windows:
        raise UsageError("no labeled windows available")

    http_backend = None
    if args.backend == "http":
        if not args.base_url:
            raise UsageError("--base-url is required with --backend http")
        http_backend = HttpChatBackend(base_url=args.base_url, model=args.model)

    outcomes, justifications, pairs_text, times, tokens = [], [], [], [], []
    for i, w in enumerate(windows):
        pair = explanation_pair(net, w if args.no_standardize else standardize_window(w))
        rep = compute_discrepancy(pair.gradcam, pair.lrp, threshold=args.threshold,
                                  merge_gap=args.merge_gap,
                                  alert_threshold_pct=args.alert_pct)
        record = create_case(
            window_ref={"subject_id": w.source_id, "window_index": i},
            prediction=pair.prediction, discrepancy=rep,
            gait_metrics=window_gait_metrics(w),
        )
        open_review(record)
        contestation = Contestation(
            kind=ContestationKind.REASONING_FLAW,
            free_text="Please re-examine the cited evidence before a final decision.",
            author="operator",
        )
        contest(record, contestation)
        context = prompt_context_for(record)
        backend = http_backend if http_backend is not None else _mock_backend(
            args.mock_policy, pair.prediction.predicted_class, w.label, context)
        result = adjudicate(record, backend, temperature=args.temperature)
        final = result.final_class
        finalize(record, actor="operator",
                 decision="accept" if final == pair.prediction.predicted_class else "override",
                 override_label=None if final == pair.prediction.predicted_class else final)
        _, user_prompt = render_prompt(context, contestation)
        outcomes.append(CaseOutcome(
            case_id=record.case_id, true_label=w.label,
            baseline_prediction=pair.prediction.predicted_class,
            final_decision=final, was_contested=True,
        ))
        justifications.append(result.justification_text)
        pairs_text.append((user_prompt, result.justification_text))
        times.append(result.response_time_s)
        tokens.append(result.output_tokens)

    row = run_report_row(args.run_name, justifications, pairs_text,
                         EvaluationSet(tuple(outcomes)), times, tokens)
    write_report_csv([row], args.out_report)
    for key, value in row.items():
        print(f"{key}: {value}")
    print(f"report -> {args.out_report}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import GaitService, create_app, load_service_config

    config = load_service_config(args.config)
    app = create_app(GaitService(config))
    host, _, port = config.listen_address.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def _add_common(p, checkpoint=True):
    p.add_argument("--data-dir", required=True)
    if checkpoint:
        p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", action="store_true",
                   help="feed raw window values to the model")


def _add_xmed_flags(p):
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--merge-gap", type=int, default=10)
    p.add_argument("--alert-pct", type=float, default=3.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaitcontest",
                                     description="gait severity models you can argue with")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labeled dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--subjects-per-class", type=int, default=3)
    p.add_argument("--duration-s", type=float, default=60.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a classifier on a data directory")
    _add_common(p, checkpoint=False)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="nested cross-validation grid search")
    _add_common(p, checkpoint=False)
    p.add_argument("--lr-grid", type=float, nargs="+", default=[3e-4, 1e-3])
    p.add_argument("--dropout-grid", type=float, nargs="+", default=[0.3, 0.5])
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--outer-folds", type=int, default=5)
    p.add_argument("--inner-folds", type=int, default=3)
    p.add_argument("--out-json", default="")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="score a checkpoint on a data directory")
    _add_common(p)
    p.add_argument("--split", choices=["all", "test"], default="all")
    p.add_argument("--out-confusion", default="")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("xmed", help="per-window explanation discrepancy sweep")
    _add_common(p)
    p.add_argument("--split", choices=["all", "test"], default="all")
    p.add_argument("--out-csv", required=True)
    _add_xmed_flags(p)
    p.set_defaults(func=cmd_xmed)

    p = sub.add_parser("explain", help="both saliency maps for one window")
    _add_common(p)
    p.add_argument("--subject", required=True)
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--out-csv", default="")
    p.add_argument("--out-svg", default="")
    _add_xmed_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("contest-run", help="adjudication sweep with report CSV")
    _add_common(p)
    p.add_argument("--split", choices=["all", "test"], default="all")
    p.add_argument("--backend", choices=["mock", "http"], default="mock")
    p.add_argument("--mock-policy", choices=["retain", "oracle"], default="retain")
    p.add_argument("--base-url", default="")
    p.add_argument("--model", default="chat-default")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--cases", type=int, default=30)
    p.add_argument("--run-name", default="run")
    p.add_argument("--out-report", required=True)
    _add_xmed_flags(p)
    p.set_defaults(func=cmd_contest_run)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        from .service import ConfigError

        if isinstance(exc, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
