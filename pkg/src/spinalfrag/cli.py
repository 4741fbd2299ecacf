"""Command-line front end.

Exit codes: 0 success, 1 a check did not give its expected outcome, 2 usage,
domain or validation error, 3 numeric or capacity error. Failures print a
JSON error body on stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Optional, Sequence

from . import __version__
from .checks import SUITES, Grid, expected_status
from .errors import SpinalError, ValidationError
from .partitions import SetPartition
from .pdlaws import LevyKernel, PdParams, crp_sample_partition, eppf_pd, laplace_exponent
from .reconstruct import PnTable, lemma15_residual, pn_table, reconstruct_pn
from .sampling import run_indexed, sample_trees, stream
from .spinal import (
    coarse_partition_law,
    composition_law,
    fine_partition_law,
    spinal_decompose,
)
from .splitlaw import BrownianLaw, PDStarLaw, SplitLaw, make_law
from .trees import FragTree, parse_key, shape_distribution

SIG_DIGITS = 15
SEED_MAX = 2**64 - 1


@dataclass
class RunConfig:
    command: str
    family: str = "pdstar"
    alpha: Optional[float] = None
    theta: Optional[float] = None
    n: Optional[int] = None
    nmax: Optional[int] = None
    samples: Optional[int] = None
    seed: int = 0
    format: str = "json"
    workers: int = 1

    def __post_init__(self):
        if self.samples is not None and self.samples < 0:
            raise ValidationError("--samples must be >= 0")
        if not 0 <= self.seed <= SEED_MAX:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValidationError("--workers must be >= 1")
        if self.family == "pdstar" and self.alpha is not None and self.theta is not None:
            PdParams(self.alpha, self.theta)


# --- output -----------------------------------------------------------------


def _round(x: Any) -> Any:
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, float):
        if math.isinf(x):
            return "infinite" if x > 0 else "-infinite"
        if math.isnan(x):
            return "nan"
        return float(format(x, f".{SIG_DIGITS}g"))
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if hasattr(x, "item"):  # numpy scalars
        return _round(x.item())
    return x


def dumps(x: Any) -> str:
    return json.dumps(_round(x), sort_keys=False, separators=(",", ":"))


class Output:
    def __init__(self, path: Optional[str]):
        self.fh = open(path, "w", newline="") if path else sys.stdout

    def line(self, text: str) -> None:
        self.fh.write(text + "\n")

    def record(self, x: Any) -> None:
        self.line(dumps(x))

    def table(self, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        w = csv.writer(self.fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_round(v) for v in r])

    def close(self) -> None:
        if self.fh is not sys.stdout:
            self.fh.close()


def _parse_parts(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"--composition must be comma-separated integers, got {text!r}") from None
    if not parts or any(p < 1 for p in parts):
        raise ValidationError("--composition needs positive parts")
    return parts


def _law(args) -> SplitLaw:
    if args.family == "table":
        if not args.table:
            raise ValidationError("--family table needs --table PATH")
        with open(args.table) as fh:
            t = PnTable.from_json(json.load(fh))
        return t.as_law()
    if args.family == "pdstar" and (args.alpha is None or args.theta is None):
        raise ValidationError("pdstar needs --alpha and --theta")
    return make_law(args.family, args.alpha, args.theta)


def _meta(args) -> dict:
    cfg = RunConfig(args.command, args.family, args.alpha, args.theta, getattr(args, "n", None),
                    getattr(args, "nmax", None), getattr(args, "samples", None), args.seed, args.format,
                    getattr(args, "workers", 1))
    meta = {"type": "meta", "version": __version__, **asdict(cfg)}
    del meta["workers"]  # parallelism must not show up in the output bytes
    return meta


# --- commands ---------------------------------------------------------------


def cmd_eppf(args, out: Output) -> int:
    parts = _parse_parts(args.composition)
    law = _law(args)
    rec: dict[str, Any] = {"family": args.family, "composition": list(parts)}
    if isinstance(law, PDStarLaw):
        p = law.params
        rec.update(alpha=p.alpha, theta=p.theta)
        rec["eprf"] = law.eprf(parts) if len(parts) > 1 else (math.inf if p.theta <= -p.alpha else law._eprf(parts))
        if p.theta > -p.alpha:
            rec["eppf_pd"] = eppf_pd(p, parts)
    elif len(parts) > 1:
        rec["eprf"] = law.eprf(parts)
    if len(parts) > 1:
        rec["split_prob"] = law.split_prob(parts)
    if args.format == "csv":
        out.table(list(rec), [[json.dumps(v) if isinstance(v, list) else v for v in rec.values()]])
    else:
        out.record(rec)
    return 0


def cmd_rates(args, out: Output) -> int:
    law = _law(args)
    nmax = args.nmax or 8
    rows = []
    for n in range(2, nmax + 1):
        level = law.level_rate(n - 1)
        lap = laplace_exponent(law.params, n - 1) if isinstance(law, PDStarLaw) else None
        for m in range(1, n):
            rows.append({"n": n, "m": m, "block_rate": law.block_rate(n - 1, m), "block_prob": law.block_rate(n - 1, m) / level,
                         "level_rate": level, "total_rate": law.total_rate(n), "laplace_exponent": lap})
    if args.format == "csv":
        out.table(list(rows[0]), [list(r.values()) for r in rows])
    else:
        out.record({**_meta(args), "rows": rows})
    return 0


def _tree_records(law, n, samples, seed, workers):
    return [{"index": i, "key": t.key(), "tree": t.to_json()} for i, t in enumerate(sample_trees(law, n, samples, seed, workers))]


def cmd_sample_tree(args, out: Output) -> int:
    if args.n is None or args.n < 1:
        raise ValidationError("sample-tree needs --n >= 1")
    samples = 1 if args.samples is None else args.samples
    if samples < 1:
        raise ValidationError("--samples must be >= 1")
    law = _law(args)
    recs = _tree_records(law, args.n, samples, args.seed, args.workers)
    if args.format == "csv":
        out.table(["index", "key"], [[r["index"], r["key"]] for r in recs])
        return 0
    out.record(_meta(args))
    for r in recs:
        out.record(r)
    return 0


def _pd_chunk(params: PdParams, n: int, seed: int, lo: int, hi: int) -> list[SetPartition]:
    return [crp_sample_partition(params, n, stream(seed, i)) for i in range(lo, hi)]


def cmd_sample_pd(args, out: Output) -> int:
    if args.alpha is None or args.theta is None:
        raise ValidationError("sample-pd needs --alpha and --theta")
    if args.n is None or args.n < 1:
        raise ValidationError("sample-pd needs --n >= 1")
    samples = 1 if args.samples is None else args.samples
    if samples < 1:
        raise ValidationError("--samples must be >= 1")
    params = PdParams(args.alpha, args.theta)
    params.require_probability("sample-pd")
    parts = run_indexed(_pd_chunk, (params, args.n, args.seed), samples, args.workers)
    if args.format == "csv":
        out.table(["index", "blocks"], [[i, str(p)] for i, p in enumerate(parts)])
        return 0
    out.record(_meta(args))
    for i, p in enumerate(parts):
        out.record({"index": i, "blocks": p.to_json(), "sizes": list(p.sizes)})
    return 0


def _read_tree(line: str) -> Optional[FragTree]:
    line = line.strip()
    if not line:
        return None
    if line[0] == "(" or line.isdigit():
        return parse_key(line)
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise ValidationError(f"not JSON: {e}") from None
    if isinstance(data, str):
        return parse_key(data)
    if isinstance(data, dict) and data.get("type") == "meta":
        return None
    if isinstance(data, dict) and "tree" in data:
        data = data["tree"]
    return FragTree.from_json(data)


def cmd_spinal(args, out: Output) -> int:
    fh = open(args.input) if args.input and args.input != "-" else sys.stdin
    bad = 0
    rows = []
    try:
        for i, line in enumerate(fh, start=1):
            try:
                t = _read_tree(line)
                if t is None:
                    continue
                rows.append({"line": i, "key": t.key(), **spinal_decompose(t).to_json()})
            except (SpinalError, ValueError, TypeError, KeyError) as e:
                bad += 1
                rows.append({"line": i, "error": type(e).__name__, "message": str(e)})
    finally:
        if fh is not sys.stdin:
            fh.close()
    if args.format == "csv":
        cols = ["line", "key", "coarse_ordered", "coarse", "fine", "composition", "error"]
        out.table(cols, [[json.dumps(r[c]) if isinstance(r.get(c), list) else r.get(c, "") for c in cols] for r in rows])
    else:
        for r in rows:
            out.record(r)
    return 2 if bad else 0


def _reference_eppf(law: SplitLaw, kind: str):
    """The PD EPPF the stable coarse and fine laws are known to match."""
    if not isinstance(law, PDStarLaw) or not math.isclose(law.params.theta, -1.0):
        return None, None
    a = law.params.alpha
    q = PdParams(1 - a, 1 - a) if kind == "coarse" else PdParams(a, 1 - a)
    return (lambda sizes: eppf_pd(q, sizes)), f"PD({q.alpha:g},{q.theta:g})"


def cmd_law(args, out: Output) -> int:
    if args.n is None or args.n < 1:
        raise ValidationError("law needs --n >= 1")
    law = _law(args)
    kind = args.kind
    ref, ref_name = None, None
    if kind == "shape":
        dist = {t.key(): p for t, p in shape_distribution(law, args.n).items()}
    elif kind == "composition":
        dist = {",".join(map(str, c)): p for c, p in composition_law(law, args.n).items()}
    else:
        raw = (coarse_partition_law if kind == "coarse" else fine_partition_law)(law, args.n)
        ref, ref_name = _reference_eppf(law, kind)
        sizes = {str(P): P.sizes for P in raw}
        dist = {str(P): p for P, p in raw.items()}
    rows = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
    total = math.fsum(dist.values())
    recs = []
    dev = 0.0
    for k, p in rows:
        r = {"key": k, "p": p}
        if ref:
            r["reference"] = ref(sizes[k])
            dev = max(dev, abs(p - r["reference"]))
        recs.append(r)
    if args.format == "csv":
        cols = ["key", "p"] + (["reference"] if ref else [])
        out.table(cols, [[r[c] for c in cols] for r in recs])
    else:
        body = {**_meta(args), "law": kind, "rows": recs, "total": total, "total_ok": abs(total - 1) <= 1e-9}
        if ref:
            body.update(reference=ref_name, max_deviation=dev)
        out.record(body)
    if abs(total - 1) > 1e-9:
        print(f"law total {total!r} differs from 1", file=sys.stderr)
        return 3
    return 0


def cmd_reconstruct(args, out: Output) -> int:
    nmax = args.nmax or 7
    if args.power_b is not None:
        kernel, law = LevyKernel.power(args.power_b, 1.0), None
    else:
        law = _law(args)
        kernel = getattr(law, "kernel", None)
        if kernel is None:
            raise ValidationError(f"family {args.family} has no Levy kernel")
    table = reconstruct_pn(kernel, nmax)
    extra = {"consistency": table.meta["consistency"], "lemma15_residual": lemma15_residual(table)}
    if law is not None:
        extra["max_rel_error_vs_direct"] = table.max_rel_error(pn_table(law, nmax))
    if args.format == "csv":
        out.table(["n", "parts", "p"], [[e["n"], ",".join(map(str, e["parts"])), e["p"]] for e in table.to_json()["entries"]])
    else:
        out.record({**_meta(args), "kernel": kernel.name, **extra, **table.to_json()})
    return 0


def cmd_check(args, out: Output) -> int:
    table = None
    if args.family == "table":
        table = _law(args)
    grid = Grid(args.family, args.alpha, args.theta, args.n, args.nmax, args.samples, args.seed, args.workers, table)
    reports = SUITES[args.check](grid)
    bad = 0
    flat = []
    for r in reports:
        if args.expect == "auto":
            law = table or (BrownianLaw() if args.family == "brownian" else make_law("pdstar", r.parameters["alpha"], r.parameters["theta"]))
            want = expected_status(args.check, law)
        else:
            want = args.expect
        ok = r.status == want or (r.status in ("inconclusive", "vacuous") and not args.strict)
        bad += not ok
        rec = {**r.to_json(), "expected": want, "ok": ok}
        flat.append(rec)
    if args.format == "csv":
        cols = ["check", "parameters", "statistic", "threshold", "status", "expected", "ok", "runtime"]
        out.table(cols, [[json.dumps(_round(r[c])) if isinstance(r[c], dict) else r[c] for c in cols] for r in flat])
    else:
        for rec in flat:
            out.record(rec)
    return 1 if bad else 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", choices=["pdstar", "brownian", "table"], default="pdstar")
    common.add_argument("--alpha", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--table", help="PnTable JSON file for --family table")
    common.add_argument("--n", type=int)
    common.add_argument("--nmax", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="write to this file instead of stdout")
    common.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="spinalfrag", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eppf", parents=[common], help="partition rate / EPPF at a composition")
    e.add_argument("--composition", required=True, help="e.g. 2,1")
    sub.add_parser("rates", parents=[common], help="block rates, total rates and Laplace exponent")
    sub.add_parser("sample-tree", parents=[common], help="JSON-lines sample of T_[n]")
    sub.add_parser("sample-pd", parents=[common], help="JSON-lines sample of PD(alpha, theta) partitions of [n]")
    s = sub.add_parser("spinal", parents=[common], help="spinal decomposition of JSON-lines trees")
    s.add_argument("--input", help="file of trees, one per line (default stdin)")
    lw = sub.add_parser("law", parents=[common], help="exact law table")
    lw.add_argument("kind", choices=["shape", "coarse", "fine", "composition"])
    r = sub.add_parser("reconstruct", parents=[common], help="rebuild p_n from the Levy kernel")
    r.add_argument("--power-b", type=float, help="use the kernel (1-e^-x)^(-b-1) e^(-bx) instead of the family's")
    c = sub.add_parser("check", parents=[common], help="run a check suite over the parameter grid")
    c.add_argument("check", choices=sorted(SUITES))
    c.add_argument("--expect", choices=["pass", "fail", "auto"], default="pass",
                   help="outcome that counts as success; auto uses the outcome predicted by theory")
    c.add_argument("--strict", action="store_true", help="treat inconclusive results as failures")
    return p


COMMANDS = {
    "eppf": cmd_eppf,
    "rates": cmd_rates,
    "sample-tree": cmd_sample_tree,
    "sample-pd": cmd_sample_pd,
    "spinal": cmd_spinal,
    "law": cmd_law,
    "reconstruct": cmd_reconstruct,
    "check": cmd_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        RunConfig(args.command, args.family, args.alpha, args.theta, seed=args.seed, samples=args.samples, workers=args.workers)
        out = Output(args.out)
        return COMMANDS[args.command](args, out)
    except SpinalError as e:
        print(dumps({"error": type(e).__name__, "message": str(e), "exit_code": e.exit_code}))
        return e.exit_code
    except OSError as e:
        print(dumps({"error": type(e).__name__, "message": str(e), "exit_code": 2}))
        return 2
    except (ArithmeticError, ValueError) as e:
        code = 3 if isinstance(e, ArithmeticError) else 2
        print(dumps({"error": type(e).__name__, "message": str(e), "exit_code": code}))
        return code
    finally:
        if out is not None:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
