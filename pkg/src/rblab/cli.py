"""Command-line front end; a thin HTTP client over the service layer.

By default requests are served in-process (no socket); set RBLAB_SERVER to a
base URL to target a remote instance instead. RBLAB_OUT overrides any output
directory given on the command line or in a config file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import httpx


def _client() -> httpx.Client:
    server = os.environ.get("RBLAB_SERVER")
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process: starlette's TestClient is a sync httpx.Client over the ASGI app
    from starlette.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _post(path: str, payload: dict) -> dict:
    with _client() as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise SystemExit(f"error: {detail}")
    return resp.json()


def _emit(doc: dict, as_json: bool, text_fn) -> None:
    if as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        text_fn(doc)


def cmd_gen_env(args) -> int:
    doc = _post(
        "/gen-env",
        {"kind": args.kind, "n": args.n, "S": args.S, "seed": args.seed, "d": args.d},
    )
    with open(args.out, "w") as fh:
        json.dump(doc["model"], fh, indent=2)
        fh.write("\n")

    def text(_doc):
        print(f"wrote {args.out} (kind={args.kind}, n={args.n}, S={args.S})")

    _emit({"schema_version": doc["schema_version"], "out": args.out}, args.json, text)
    return 0


def cmd_whittle(args) -> int:
    with open(args.model) as fh:
        model = json.load(fh)
    doc = _post("/whittle", {"model": model, "arm": args.arm})

    def text(doc):
        out = io.StringIO()
        writer = csv.writer(out)
        if args.arm is not None:
            writer.writerow(["state", "index"])
            for s, w in enumerate(doc["indices"][str(args.arm)]):
                writer.writerow([s, repr(w)])
        else:
            writer.writerow(["arm", "state", "index"])
            for i in sorted(doc["indices"], key=int):
                for s, w in enumerate(doc["indices"][i]):
                    writer.writerow([i, s, repr(w)])
        sys.stdout.write(out.getvalue())

    _emit(doc, args.json, text)
    return 0


def cmd_run(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    if args.seed is not None:
        config["master_seed"] = args.seed
    if args.jobs is not None:
        config["jobs"] = args.jobs
    outdir = os.environ.get("RBLAB_OUT") or args.out or config.get("outdir")
    if not outdir:
        raise SystemExit("error: no output directory (config outdir, --out, or RBLAB_OUT)")
    config.pop("outdir", None)
    doc = _post("/run", {"config": config, "outdir": outdir})

    def text(doc):
        print(f"wrote {len(doc['files'])} files to {doc['outdir']}")
        for row in doc["summary"]:
            print(f"  n={row['n']} {row['algorithm']}: regret_T={row['regret_T']:.4f}")
        for v in doc["violations"]:
            print(f"  VIOLATION: {v}")

    _emit(doc, args.json, text)
    return 1 if doc["violations"] else 0


def cmd_verify(args) -> int:
    doc = _post(
        "/verify",
        {
            "suite": args.suite,
            "seed": args.seed,
            "instances": args.instances,
            "count": args.count,
        },
    )

    def text(doc):
        reports = doc["report"].get("reports", [doc["report"]])
        for rep in reports:
            status = "PASS" if rep["passed"] else "FAIL"
            print(f"{status} suite={rep['suite']}", end="")
            if "skipped" in rep:
                print(f" skipped={rep['skipped']}", end="")
            if "max_abs_error" in rep:
                print(f" max_abs_error={rep['max_abs_error']:.3g}", end="")
            print(f" failures={len(rep.get('failures', []))}")
            for f in rep.get("failures", []):
                print(f"  {f}")

    _emit(doc, args.json, text)
    return 0 if doc["passed"] else 1


def _read_points(path: str, algorithm=None) -> list:
    """(n, regret) pairs from a two-column CSV or a run summary.csv."""
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if rows and "algorithm" in rows[0]:
        rows = [r for r in rows if algorithm is None or r["algorithm"] == algorithm]
        return [[float(r["n"]), float(r["regret_T"])] for r in rows]
    return [[float(r["n"]), float(r["regret"])] for r in rows]


def cmd_fit(args) -> int:
    points = _read_points(args.points, args.algorithm)
    doc = _post("/fit", {"points": points})

    def text(doc):
        fits = doc["fits"]
        lin = fits["linear"]
        print(f"linear: p0={lin['p0']:.6g} p1={lin['p1']:.6g} rmse={lin['rmse']:.6g}")
        if "n15" in fits:
            c = fits["n15"]
            print(
                f"n15:    p0={c['p0']:.6g} p1={c['p1']:.6g} p2={c['p2']:.6g} "
                f"rmse={c['rmse']:.6g}"
            )
        print(f"preferred: {fits['preferred']}")

    _emit(doc, args.json, text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rblab", description="Restless-bandit index policies and learners."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate an environment model file")
    p.add_argument("--kind", required=True, choices=["A", "B"])
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--S", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--d", type=float, default=None,
                   help="monotone-generator spread (default 0.5/S)")
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_gen_env)

    p = sub.add_parser("whittle", help="print state/index tables for a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--arm", type=int, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="accepted for uniformity; computation is deterministic")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_whittle)

    p = sub.add_parser("run", help="run a regret experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel sample-path workers (default: all cores)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="run oracle cross-check suites")
    p.add_argument("--suite", default="all",
                   choices=["whittle", "gain", "monotone", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--count", type=int, default=None,
                   help="matrix count for the monotone suite")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("fit", help="fit regret-vs-n scaling laws")
    p.add_argument("--points", required=True,
                   help="CSV of (n, regret) pairs or a run summary.csv")
    p.add_argument("--algorithm", default=None,
                   help="filter rows when --points is a summary.csv")
    p.add_argument("--seed", type=int, default=None,
                   help="accepted for uniformity; fitting is deterministic")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)
    return parser


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


def main() -> None:
    sys.exit(dispatch())
