"""Command-line entry points: generate, run, experiment, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
Results go to the ``--out`` path; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import Dataset, DatasetError, generate_synthetic, load_dataset, save_dataset
from .engine import RELEVANT, IRRELEVANT, UNSURE, SessionParams
from .evaluation import Strategy, run_experiment, simulated_oracle, write_report
from .sessions import ProbeSession, run_probe_session

logger = logging.getLogger("activerank")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

TRANSCRIPT_SCHEMA = "activerank-session/1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class UsageError(ValueError):
    """Bad command combination that argparse cannot catch on its own."""


def _add_param_flags(parser: argparse.ArgumentParser, include_solver: bool = True):
    group = parser.add_argument_group("session parameters")
    group.add_argument("--alpha", type=float, default=0.01, help="smoothing/fitting balance")
    group.add_argument("--k", type=int, default=300, help="top-K truncation count")
    group.add_argument("--q", type=int, default=5, help="suggestions per feedback round")
    group.add_argument("--rounds", type=int, default=4, help="labeled feedback rounds")
    if include_solver:
        group.add_argument(
            "--solver", choices=["approximate", "qp"], default="approximate", help="ranking solver"
        )
    group.add_argument("--gamma", type=float, default=1.0, help="confidence regularizer (qp)")
    group.add_argument(
        "--beta", type=float, default=None, help="loss threshold (qp); default is data-driven"
    )
    group.add_argument(
        "--mr-baseline",
        action="store_true",
        help="uniform diffusion confidence before each ranking step",
    )
    group.add_argument(
        "--soft-init",
        action="store_true",
        help="seed the first round with initial scores and uniform confidence",
    )


def _params_from_args(args, solver: str | None = None) -> SessionParams:
    try:
        return SessionParams(
            alpha=args.alpha,
            beta=args.beta,
            gamma=args.gamma,
            k=args.k,
            q=args.q,
            rounds=args.rounds,
            solver=solver or args.solver,
            mr_baseline=args.mr_baseline,
            soft_init=args.soft_init,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="activerank", description=__doc__)
    parser.add_argument("--version", action="version", version=f"activerank {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic benchmark dataset")
    gen.add_argument("--out", type=Path, required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--clusters", type=int, default=10)
    gen.add_argument("--per-cluster", type=int, default=30)
    gen.add_argument("--dim", type=int, default=32)
    gen.add_argument("--noise", type=float, default=0.6)
    gen.add_argument("--name", default=None, help="dataset name (default: synthetic-<seed>)")

    run = sub.add_parser("run", help="run one feedback session for a probe")
    run.add_argument("--manifest", type=Path, required=True)
    run.add_argument("--probe", required=True, help="probe id from the manifest")
    run.add_argument("--out", type=Path, required=True, help="transcript JSON path")
    run.add_argument(
        "--mode",
        choices=["oracle", "interactive", "replay"],
        default="oracle",
        help="label source: ground-truth oracle, stdin prompts, or a recorded transcript",
    )
    run.add_argument("--labels-from", type=Path, default=None, help="transcript for replay mode")
    run.add_argument("--seed", type=int, default=0, help="oracle seed")
    run.add_argument("--unsure-rate", type=float, default=0.0)
    _add_param_flags(run)

    exp = sub.add_parser("experiment", help="sweep strategies over probes and seeds")
    exp.add_argument("--manifest", type=Path, required=True)
    exp.add_argument("--out", type=Path, required=True, help="report JSON path (CSV lands beside)")
    exp.add_argument(
        "--strategies",
        default="active,random",
        help="comma list from {active, mr, random}",
    )
    exp.add_argument(
        "--solver",
        dest="solver",
        choices=["approximate", "qp", "both"],
        default="approximate",
        help="'both' runs paired columns per strategy",
    )
    exp.add_argument("--seeds", default="0", help="comma list of integer seeds")
    exp.add_argument("--unsure-rate", type=float, default=0.0)
    exp.add_argument("--probes", default=None, help="comma list of probe ids (default: all)")
    _add_param_flags(exp, include_solver=False)

    serve = sub.add_parser("serve", help="serve the interactive labeling API")
    serve.add_argument(
        "--dataset",
        action="append",
        default=[],
        metavar="NAME=MANIFEST",
        help="dataset to expose (repeatable); NAME defaults to the manifest's name",
    )
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000, help="0 picks an ephemeral port")
    serve.add_argument("--session-log-dir", type=Path, default=None)
    _add_param_flags(serve)

    return parser


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    features, ground_truth, probes = generate_synthetic(
        seed=args.seed,
        n_clusters=args.clusters,
        per_cluster=args.per_cluster,
        dim=args.dim,
        noise_sigma=args.noise,
    )
    name = args.name or f"synthetic-{args.seed}"
    manifest = save_dataset(args.out, name, features, ground_truth, probes)
    logger.info("wrote %s (%d gallery, %d probes)", manifest, len(features.ids) - len(probes), len(probes))
    print(str(manifest))
    return EXIT_OK


def _interactive_oracle(session: ProbeSession):
    def oracle(suggestions):
        answers = {}
        for index in suggestions:
            sample_id = session.candidate_id(index)
            while True:
                prompt = f"label {sample_id} [r]elevant/[i]rrelevant/[u]nsure: "
                sys.stderr.write(prompt)
                sys.stderr.flush()
                line = sys.stdin.readline()
                if not line:
                    raise EOFError("stdin closed during interactive labeling")
                choice = line.strip().lower()
                if choice in ("r", "relevant"):
                    answers[index] = RELEVANT
                elif choice in ("i", "irrelevant"):
                    answers[index] = IRRELEVANT
                elif choice in ("u", "unsure", ""):
                    answers[index] = UNSURE
                else:
                    continue
                break
        return answers

    return oracle


def _replay_oracle(session: ProbeSession, transcript: dict):
    batches = [r.get("labels") for r in transcript["rounds"] if r.get("labels") is not None]
    state = {"next": 0}

    def oracle(suggestions):
        if state["next"] >= len(batches):
            raise ValueError("replay transcript has no labels left")
        batch = batches[state["next"]]
        state["next"] += 1
        return {i: batch[session.candidate_id(i)] for i in suggestions}

    return oracle


def cmd_run(args) -> int:
    dataset = load_dataset(args.manifest)
    if args.probe not in dataset.probe_ids:
        raise DatasetError(f"unknown probe id {args.probe!r}")
    params = _params_from_args(args)
    session = ProbeSession(dataset, args.probe, params)

    if args.mode == "oracle":
        if dataset.ground_truth is None:
            raise DatasetError("oracle mode needs a dataset with ground truth")
        oracle = simulated_oracle(
            dataset.ground_truth,
            args.probe,
            session.candidates.ids,
            unsure_rate=args.unsure_rate,
            seed=args.seed,
        )
    elif args.mode == "interactive":
        oracle = _interactive_oracle(session)
    else:
        if args.labels_from is None:
            raise UsageError("replay mode requires --labels-from")
        transcript = json.loads(Path(args.labels_from).read_text())
        oracle = _replay_oracle(session, transcript)

    run_probe_session(session, oracle)

    rounds_payload = []
    for i, result in enumerate(session.rounds):
        labels = None
        if i < len(session.labels_log):
            labels = {
                session.candidate_id(idx): lab for idx, lab in session.labels_log[i].items()
            }
        rounds_payload.append(
            {
                "round_index": result.round_index,
                "suggestions": session.suggestion_ids(result),
                "labels": labels,
                "scores": result.refined_scores.tolist(),
                "elapsed_ms": result.elapsed * 1000.0,
            }
        )
    transcript = {
        "schema": TRANSCRIPT_SCHEMA,
        "manifest": str(args.manifest),
        "dataset": dataset.name,
        "probe": args.probe,
        "mode": args.mode,
        "seed": args.seed,
        "params": {
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
            "k": params.k,
            "q": params.q,
            "rounds": params.rounds,
            "solver": params.solver,
            "mr_baseline": params.mr_baseline,
            "soft_init": params.soft_init,
        },
        "rounds": rounds_payload,
        "final_ranking": session.merged_ranking(),
    }
    if dataset.ground_truth is not None:
        import numpy as np

        from .metrics import interpolated_pr_11pt, manifold_smoothing_loss

        relevant = dataset.ground_truth.for_probe(args.probe)
        indicator = np.array(
            [1.0 if session.candidate_id(i) in relevant else 0.0 for i in range(session.k)]
            + [1.0]
        )
        transcript["metrics"] = {
            "ap_per_round": session.ap_per_round(),
            "pr_curve_11pt": interpolated_pr_11pt(session.merged_ranking(), relevant).tolist(),
            "smoothing_loss": manifold_smoothing_loss(session.affinity, indicator),
            "labels_per_round": [len(batch) for batch in session.labels_log],
        }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(transcript, indent=2))
    logger.info("wrote transcript %s", args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    dataset = load_dataset(args.manifest)
    names = [s for s in args.strategies.split(",") if s]
    if not names:
        raise UsageError("at least one strategy is required")
    solvers = ["approximate", "qp"] if args.solver == "both" else [args.solver]
    strategies = [Strategy(name, solver=solver) for name in names for solver in solvers]
    seeds = [int(s) for s in args.seeds.split(",") if s]
    probes = args.probes.split(",") if args.probes else None
    params = _params_from_args(args, solver="approximate")
    try:
        report = run_experiment(
            dataset,
            params,
            strategies,
            seeds=seeds,
            unsure_rate=args.unsure_rate,
            probes=probes,
        )
    except Exception as exc:
        partial = getattr(exc, "partial_results", None)
        if partial is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(
                json.dumps({"schema": "activerank-experiment/1", "partial": True, "results": partial}, indent=2)
            )
            logger.error("experiment failed after %d sessions; partial results at %s", len(partial), args.out)
        raise
    csv_path = write_report(report, args.out)
    logger.info("wrote %s and %s", args.out, csv_path)
    return EXIT_OK


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .service import create_app

    datasets: dict[str, Dataset] = {}
    for spec in args.dataset:
        name, _, manifest_path = spec.partition("=")
        if not manifest_path:
            manifest_path, name = name, ""
        dataset = load_dataset(Path(manifest_path))
        datasets[name or dataset.name] = dataset
    if not datasets:
        raise UsageError("at least one --dataset NAME=MANIFEST is required")

    default_params = _params_from_args(args)
    app = create_app(datasets, default_params=default_params, session_log_dir=args.session_log_dir)

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((args.host, args.port))
    host, port = sock.getsockname()[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose >= 2 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "generate": cmd_generate,
        "run": cmd_run,
        "experiment": cmd_experiment,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - single boundary for exit codes
        logger.exception("unhandled failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
