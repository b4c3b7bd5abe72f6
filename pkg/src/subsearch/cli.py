"""Command-line interface.

Verbs:
    run <config>            run an experiment (one record per seed)
    summarize <dir>         tabulate persisted run records
    rankcheck <config>      rank-consistency analysis against brute-forced pools
    protocol-test <transport>  conformance-check a surrogate wire-protocol server
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .remote import ProtocolClient, ProtocolError, encode_request, open_transport


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subsearch")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config", type=Path)
    _add_overrides(run_p)

    sum_p = sub.add_parser("summarize", help="summarize persisted run records")
    sum_p.add_argument("dir", type=Path)

    rank_p = sub.add_parser("rankcheck", help="surrogate rank-consistency analysis")
    rank_p.add_argument("config", type=Path)
    _add_overrides(rank_p)

    proto_p = sub.add_parser("protocol-test", help="exercise the surrogate wire protocol")
    proto_p.add_argument("transport", help="stdio:<command> or tcp:<host>:<port>")
    return parser


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", dest="seeds", type=int, action="append", default=None,
                        help="override config seeds (repeatable)")
    parser.add_argument("--method", choices=harness.METHODS, default=None)
    parser.add_argument("--surrogate", choices=harness.SURROGATE_KINDS, default=None)
    parser.add_argument("--out", default=None)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        if args.command == "rankcheck":
            return _cmd_rankcheck(args)
        if args.command == "protocol-test":
            return _cmd_protocol_test(args)
    except (harness.ConfigError, FileNotFoundError, ValueError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


def _overrides(args) -> dict:
    out = {"method": args.method, "surrogate": args.surrogate, "out": args.out}
    if getattr(args, "seeds", None):
        out["seeds"] = tuple(args.seeds)
    return out


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config, **_overrides(args))
    records, failures = harness.run_experiment(cfg)
    for record in records:
        print(
            f"seed {record.seed}: final={record.final_value:.6g} "
            f"local_evals={record.local_evals} round_evals={record.round_evals}"
        )
    if records:
        print(f"records written to {cfg.out}/")
    for seed, message in failures:
        print(f"seed {seed} failed: {message}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_summarize(args) -> int:
    records = harness.load_records(args.dir)
    rows = harness.summarize(records)
    print(harness.format_summary(rows))
    written = harness.write_curve_csvs(records, args.dir)
    for path in written:
        print(f"curve data: {path}")
    return 0


def _cmd_rankcheck(args) -> int:
    overrides = _overrides(args)
    overrides.pop("out", None)
    cfg = harness.load_config(args.config, **{k: v for k, v in overrides.items() if v})
    report = harness.rankcheck(cfg)
    print(json.dumps(report, indent=2, sort_keys=True))
    out_dir = args.out or cfg.out
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    path = Path(out_dir) / "rankcheck.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"report written to {path}")
    return 0


# ---------------------------------------------------------------------------
# Protocol conformance checks
# ---------------------------------------------------------------------------

def _cmd_protocol_test(args) -> int:
    transport = open_transport(args.transport)
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, passed: bool, detail: str = "") -> None:
        checks.append((name, passed, detail))

    try:
        client = ProtocolClient(transport)
        # Liveness.
        try:
            client.ping()
            check("ping", True)
        except ProtocolError as exc:
            check("ping", False, str(exc))

        # Predict before fit must produce an error response (not a crash).
        try:
            client.predict([[0.0, 0.0]])
            check("predict-before-fit rejected", False, "server accepted predict before fit")
        except ProtocolError as exc:
            check("predict-before-fit rejected", "server error" in str(exc), str(exc))

        # Fit then predict: one finite value per query, in order.
        try:
            client.fit([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0.0, 1.0, 2.0])
            yhat = client.predict([[0.5, 0.5], [1.0, 1.0]])
            finite = all(abs(v) < float("inf") and v == v for v in yhat)
            check("fit+predict", len(yhat) == 2 and finite, f"yhat={yhat}")
        except ProtocolError as exc:
            check("fit+predict", False, str(exc))

        # Out-of-order id: raw send with a stale id must elicit an error
        # response that names the expected id.
        expected = client._next_id
        transport.send_line(encode_request({"op": "ping", "id": 1}))
        raw = transport.recv_line()
        response = json.loads(raw)
        check(
            "out-of-order id rejected",
            response.get("ok") is False and str(expected) in response.get("error", ""),
            raw,
        )

        # Malformed message: connection must stay alive and answer ok:false.
        transport.send_line("this is not json")
        raw = transport.recv_line()
        response = json.loads(raw)
        check("malformed message rejected", response.get("ok") is False, raw)

        # Connection survived both error cases.
        try:
            client.ping()
            check("connection alive after errors", True)
        except ProtocolError as exc:
            check("connection alive after errors", False, str(exc))
    finally:
        transport.close()

    failed = [c for c in checks if not c[1]]
    for name, passed, detail in checks:
        line = f"{'PASS' if passed else 'FAIL'}  {name}"
        if detail and not passed:
            line += f"  ({detail})"
        print(line)
    print(f"{len(checks) - len(failed)}/{len(checks)} protocol checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
