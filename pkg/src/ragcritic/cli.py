"""Command-line entry point: score, annotate, refine, evaluate, simulate, report.

Exit codes: 0 success, 1 some records failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

from ragcritic import __version__
from ragcritic.advantage import compute_advantages
from ragcritic.config import ConfigError, build, digest, known_keys, resolve, reward_config
from ragcritic.critique import parse_critique
from ragcritic.gateway import EndpointConfig, GatewayError, HttpEndpoint, ScriptedEndpoint
from ragcritic.refinement import CORRECTNESS_MODES, InterventionPolicy, RefinementOutcome, refine
from ragcritic.report import (
    comparison_csv,
    evaluate_outcomes,
    matrix_csv,
    render_comparison,
    render_evaluation,
)
from ragcritic.rewards import RewardConfig, compute_reward
from ragcritic.simulation import (
    PROFILES,
    CriticRates,
    GeneratorRates,
    generator_script,
    reference_supervision,
    run_simulation,
    simulate_critic,
    synthesize_population,
)
from ragcritic.supervision import (
    ReplayJudge,
    SupervisionConfig,
    SupervisionRecord,
    build_supervision,
    transcript_rows,
)
from ragcritic.trajectory import load_qa_records, parse_trajectory, read_jsonl, write_jsonl

log = logging.getLogger("ragcritic")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
ROLES = ("judge", "generator", "embedder")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects what a command needs for its manifest."""

    def __init__(self, command: str, args):
        self.command = command
        self.args = args
        self.started_at = _now()
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.config: dict = {}
        self.counts = {"read": 0, "processed": 0, "failed": 0}

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "config_digest": digest(self.config),
            "input_digests": [[str(p), _sha256(p)] for p in self.inputs],
            "output_digests": [[Path(p).name, _sha256(p)] for p in self.outputs],
            "seed": self.args.seed,
            "started_at": self.started_at,
            "finished_at": _now(),
            "record_counts": dict(self.counts),
            "tool_version": __version__,
        }

    def write_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2) + "\n", encoding="utf-8")


def _values(args, classes=(), extra=(), overrides=None) -> dict:
    keys = known_keys(*classes, extra=extra)
    for role in ROLES:
        keys += [f"{role}_{k}" for k in EndpointConfig.__dataclass_fields__]
    values = resolve(args.config, keys, overrides)
    # secrets only ever come from the environment
    for role in ROLES:
        values.pop(f"{role}_api_key", None)
    return values


def _endpoint(values: dict, role: str, script: str | None, seed: int | None):
    if script is None and not values.get(f"{role}_base_url"):
        return None
    cfg = build(EndpointConfig, values, prefix=f"{role}_").with_key_from_env(role)
    jitter = seed or 0
    if script is not None:
        return ScriptedEndpoint.from_file(script, cfg, jitter_seed=jitter)
    try:
        return HttpEndpoint(cfg, jitter_seed=jitter)
    except GatewayError as exc:
        raise ConfigError(str(exc)) from exc


def _parallel(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _jobs(args, endpoint=None) -> int:
    jobs = args.jobs or os.cpu_count() or 1
    if endpoint is not None:
        jobs = min(jobs, endpoint.cfg.request_concurrency)
    return max(1, jobs)


def _require(path, what):
    if path is None:
        raise ConfigError(f"{what} is required")
    if not Path(path).exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _require_seed(args):
    if args.seed is None:
        raise ConfigError(f"{args.command} is stochastic: pass --seed")
    return args.seed


# ---------------------------------------------------------------- score


def cmd_score(args) -> int:
    run = Run("score", args)
    inp = _require(args.input, "--input (critique file)")
    sup_path = _require(args.supervision, "--supervision")
    if args.output is None:
        raise ConfigError("--output is required")
    stage = args.stage or 2
    cfg = reward_config(_values(args, (RewardConfig,)))
    run.config = {"reward": cfg.to_dict(), "stage": stage, "group_size": args.group_size}
    run.inputs = [inp, sup_path]

    refs = {}
    for obj in read_jsonl(sup_path):
        rec = SupervisionRecord.from_json(obj)
        if "error" not in obj:
            refs[rec.id] = rec
    rows = list(read_jsonl(inp))
    run.counts["read"] = len(rows)

    def score(obj):
        ref = refs.get(str(obj.get("id")))
        if ref is None:
            return {"id": obj.get("id"), "error": "no supervision record for this id"}
        c = parse_critique(obj.get("critique", ""), strict=True)
        return {"id": ref.id, **compute_reward(c, ref, stage, cfg).to_dict()}

    out = _parallel(score, rows, _jobs(args))
    if args.group_size:
        _attach_advantages(out, args.group_size)
    run.counts["failed"] = sum("error" in r for r in out)
    run.counts["processed"] = len(out) - run.counts["failed"]
    write_jsonl(args.output, out)
    run.outputs = [args.output]
    run.write_manifest(f"{args.output}.manifest.json")
    if run.counts["failed"]:
        log.error("%d critiques had no supervision record", run.counts["failed"])
        return EXIT_PARTIAL
    return EXIT_OK


def _attach_advantages(rows, group_size: int) -> None:
    """Group consecutive scored rows sharing an id into chunks of ``group_size``."""
    i, group_no = 0, 0
    while i < len(rows):
        if "error" in rows[i]:
            i += 1
            continue
        j = i
        while j < len(rows) and j - i < group_size and "error" not in rows[j] and rows[j]["id"] == rows[i]["id"]:
            j += 1
        chunk = rows[i:j]
        if len(chunk) != group_size:
            log.warning("group for id %s has %d critiques, expected %d", rows[i]["id"], len(chunk), group_size)
        adv = compute_advantages([r["total"] for r in chunk])
        for r, a in zip(chunk, adv.advantages):
            r.update(group=group_no, advantage=a, group_mean=adv.mean, group_std=adv.std, group_degenerate=adv.degenerate)
        group_no += 1
        i = j


# ---------------------------------------------------------------- annotate


def cmd_annotate(args) -> int:
    run = Run("annotate", args)
    inp = _require(args.input, "--input (QA record file)")
    seed = _require_seed(args)
    if args.output is None:
        raise ConfigError("--output is required")
    values = _values(args, (SupervisionConfig,), overrides={"k_samples": args.k, "seed": seed})
    scfg = build(SupervisionConfig, values)
    run.config = {"supervision": asdict(scfg), "replay": bool(args.replay)}
    run.inputs = [inp]

    replay, judge = None, None
    if args.replay:
        run.inputs.append(_require(args.replay, "--replay"))
        replay = ReplayJudge(read_jsonl(args.replay))
    else:
        values.setdefault("judge_temperature", str(scfg.judge_temperature))
        judge = _endpoint(values, "judge", args.judge_script, seed)
        if judge is None:
            raise ConfigError("annotate needs a judge endpoint (judge_base_url), --judge-script, or --replay")
        run.config["judge"] = {k: v for k, v in asdict(judge.cfg).items() if k != "api_key"}

    records = load_qa_records(inp)
    run.counts["read"] = len(records)

    def annotate(rec):
        endpoint = replay.for_record(rec.id) if replay else judge
        try:
            return build_supervision(rec, parse_trajectory(rec.trajectory_text), scfg, endpoint)
        except (GatewayError, KeyError) as exc:
            log.error("record %s failed: %s", rec.id, exc)
            return {"id": rec.id, "error": f"{type(exc).__name__}: {exc}"}

    results = _parallel(annotate, records, 1 if replay else _jobs(args, judge))
    rows, transcripts = [], []
    for r in results:
        if isinstance(r, dict):
            rows.append(r)
        else:
            rows.append(r.to_json())
            transcripts.extend(transcript_rows(r))
    run.counts["failed"] = sum(isinstance(r, dict) for r in results)
    run.counts["processed"] = len(results) - run.counts["failed"]
    write_jsonl(args.output, rows)
    sidecar = args.transcripts or str(Path(args.output).with_suffix("")) + ".transcripts.jsonl"
    write_jsonl(sidecar, transcripts)
    run.outputs = [args.output, sidecar]
    run.write_manifest(f"{args.output}.manifest.json")
    return EXIT_PARTIAL if run.counts["failed"] else EXIT_OK


# ---------------------------------------------------------------- refine


def cmd_refine(args) -> int:
    run = Run("refine", args)
    inp = _require(args.input, "--input (QA record file)")
    crit_path = _require(args.critiques, "--critiques")
    if args.output is None:
        raise ConfigError("--output is required")
    values = _values(args, extra=("on_unsure", "correctness"))
    mode = args.correctness or values.get("correctness", "substring")
    if mode not in CORRECTNESS_MODES:
        raise ConfigError(f"unknown correctness mode {mode!r}")
    try:
        policy = InterventionPolicy(on_unsure=args.on_unsure or values.get("on_unsure", "keep"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    gen = _endpoint(values, "generator", args.generator_script, args.seed)
    if gen is None:
        raise ConfigError("refine needs a generator endpoint (generator_base_url) or --generator-script")
    judge = None
    if mode == "llm":
        judge = _endpoint(values, "judge", args.judge_script, args.seed)
        if judge is None:
            raise ConfigError("correctness mode 'llm' needs a judge endpoint")
    run.config = {"policy": asdict(policy), "correctness": mode,
                  "generator": {k: v for k, v in asdict(gen.cfg).items() if k not in ("api_key", "base_url")}}
    run.inputs = [inp, crit_path]
    if args.generator_script:
        run.inputs.append(args.generator_script)

    records = load_qa_records(inp)
    critiques = {str(o["id"]): o.get("critique", "") for o in read_jsonl(crit_path)}
    run.counts["read"] = len(records)

    def one(rec):
        if rec.id not in critiques:
            return {"id": rec.id, "error": "no critique for this id"}
        c = parse_critique(critiques[rec.id], strict=True)
        try:
            return refine(rec, parse_trajectory(rec.trajectory_text), c, policy, gen, mode=mode, judge=judge).to_json()
        except GatewayError as exc:
            log.error("record %s failed: %s", rec.id, exc)
            return {"id": rec.id, "error": f"{type(exc).__name__}: {exc}"}

    rows = _parallel(one, records, _jobs(args, gen))
    run.counts["failed"] = sum("error" in r for r in rows)
    run.counts["processed"] = len(rows) - run.counts["failed"]
    write_jsonl(args.output, rows)
    run.outputs = [args.output]
    run.write_manifest(f"{args.output}.manifest.json")
    return EXIT_PARTIAL if run.counts["failed"] else EXIT_OK


# ---------------------------------------------------------------- evaluate


def load_outcomes(path):
    """Parse an outcome file; returns (outcomes, bad_line_count, failed_record_count)."""
    outcomes, bad, failed = [], 0, 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if "error" in obj:
                    failed += 1
                    continue
                outcomes.append(RefinementOutcome.from_json(obj))
            except (ValueError, KeyError, TypeError) as exc:
                bad += 1
                log.warning("%s:%d: skipping malformed outcome (%s)", path, lineno, exc)
    return outcomes, bad, failed


def _load_supervision(path):
    if path is None:
        return None
    return {r.id: r for r in (SupervisionRecord.from_json(o) for o in read_jsonl(path) if "error" not in o)}


def cmd_evaluate(args) -> int:
    run = Run("evaluate", args)
    inp = _require(args.input, "--input (outcome file)")
    if args.output is None:
        raise ConfigError("--output (directory) is required")
    run.inputs = [inp]
    supervision = None
    if args.supervision:
        run.inputs.append(_require(args.supervision, "--supervision"))
        supervision = _load_supervision(args.supervision)
    buckets = tuple(args.location_buckets.split(",")) if args.location_buckets else None
    run.config = {"max_bad_lines": args.max_bad_lines, "buckets": buckets}

    outcomes, bad, failed = load_outcomes(inp)
    run.counts.update(read=len(outcomes) + bad + failed, processed=len(outcomes), failed=bad + failed)
    if not outcomes:
        log.warning("no outcomes to evaluate in %s; every rate is undefined", inp)
    report = evaluate_outcomes(outcomes, supervision, buckets)
    report.update(bad_lines=bad, failed_records=failed)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": json.dumps(report, indent=2) + "\n",
        "report.txt": render_evaluation(report),
        "verdict_confusion.csv": matrix_csv(report["verdict_confusion"]["labels"], report["verdict_confusion"]["counts"]),
        "location_confusion.csv": matrix_csv(report["location_confusion"]["labels"], report["location_confusion"]["counts"]),
    }
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    run.outputs = [out / name for name in files]
    run.write_manifest(out / "manifest.json")
    if not args.quiet:
        sys.stdout.write(files["report.txt"])
    if bad > args.max_bad_lines:
        log.error("%d malformed lines exceed the allowed %d", bad, args.max_bad_lines)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    run = Run("simulate", args)
    seed = _require_seed(args)
    if args.output is None:
        raise ConfigError("--output (directory) is required")
    if args.profile not in PROFILES:
        raise ConfigError(f"unknown profile {args.profile!r}")
    try:
        base = PROFILES[args.profile]
        rates = CriticRates(
            false_alarm=base.false_alarm if args.false_alarm is None else args.false_alarm,
            detection=base.detection if args.detection is None else args.detection,
            unsure=base.unsure if args.unsure is None else args.unsure,
            malformed=args.malformed,
        )
        gen_rates = GeneratorRates(args.fix_success, args.break_rate, args.no_answer)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    run.config = {
        "profile": args.profile,
        "critic": asdict(rates),
        "generator": asdict(gen_rates),
        "size": args.size,
        "base_accuracy": args.base_accuracy,
    }

    items = synthesize_population(args.size, seed, args.base_accuracy)
    critiques = simulate_critic(args.profile, rates, seed, items)
    script = generator_script(items, seed, gen_rates)
    outcomes = run_simulation(items, critiques, ScriptedEndpoint(script))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "dataset.jsonl": [dict(i.record.to_json(), initially_correct=i.initially_correct) for i in items],
        "critiques.jsonl": [{"id": i.record.id, "critique": c.raw_text} for i, c in zip(items, critiques)],
        "supervision.jsonl": [r.to_json() for r in reference_supervision(items)],
        "generator_script.jsonl": script,
        "outcomes.jsonl": [o.to_json() for o in outcomes],
    }
    for name, rows in files.items():
        write_jsonl(out / name, rows)
    run.counts.update(read=0, processed=len(items), failed=0)
    run.outputs = [out / name for name in files]
    run.write_manifest(out / "manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------- report


def cmd_report(args) -> int:
    run = Run("report", args)
    paths = args.inputs or ([args.input] if args.input else [])
    if not paths:
        raise ConfigError("report needs at least one --input (outcome .jsonl or evaluation report .json)")
    labels = args.label or []
    if labels and len(labels) != len(paths):
        raise ConfigError("give one --label per --input")
    if args.output is None:
        raise ConfigError("--output (directory) is required")
    named = {}
    for k, p in enumerate(paths):
        _require(p, "--input")
        name = labels[k] if labels else "/".join(x for x in (Path(p).parent.name, Path(p).stem) if x)
        if p.endswith(".json"):
            named[name] = json.loads(Path(p).read_text(encoding="utf-8"))
        else:
            outcomes, bad, _ = load_outcomes(p)
            named[name] = evaluate_outcomes(outcomes)
        run.counts["read"] += named[name]["n_records"]
    run.inputs = list(paths)
    run.config = {"labels": list(named)}
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    text = render_comparison(named)
    files = {
        "comparison.txt": text,
        "comparison.json": json.dumps(named, indent=2) + "\n",
        "comparison.csv": comparison_csv(named),
    }
    for name, body in files.items():
        (out / name).write_text(body, encoding="utf-8")
    run.counts["processed"] = run.counts["read"]
    run.outputs = [out / n for n in files]
    run.write_manifest(out / "manifest.json")
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--input", help="primary input file")
    common.add_argument("--output", help="output file or directory")
    common.add_argument("--seed", type=int, help="seed for stochastic commands")
    common.add_argument("--jobs", type=int, help="worker threads (default: CPU count)")
    common.add_argument("--stage", type=int, choices=(1, 2), help="reward stage")
    common.add_argument("--replay", help="judge transcript file to replay instead of querying")
    common.add_argument("--group-size", type=int, help="critiques per id for group advantages")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ragcritic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="gated rewards for critiques")
    p.add_argument("--supervision", help="supervision record file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("annotate", parents=[common], help="consensus supervision from a judge")
    p.add_argument("--k", type=int, help="judge samples per record")
    p.add_argument("--judge-script", help="scripted judge responses (offline)")
    p.add_argument("--transcripts", help="sidecar transcript path")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("refine", parents=[common], help="critique-gated refinement")
    p.add_argument("--critiques", help="critique file (id, critique)")
    p.add_argument("--generator-script", help="scripted generator responses (offline)")
    p.add_argument("--judge-script", help="scripted grader responses for llm correctness")
    p.add_argument("--correctness", choices=CORRECTNESS_MODES)
    p.add_argument("--on-unsure", choices=("keep", "refine"))
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", parents=[common], help="detection, refinement and confusion metrics")
    p.add_argument("--supervision", help="supervision records for reference verdicts/locations")
    p.add_argument("--max-bad-lines", type=int, default=0)
    p.add_argument("--location-buckets", help="comma-separated location categories")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", parents=[common], help="synthetic population, critic and generator")
    p.add_argument("--profile", default="conservative", choices=sorted(PROFILES))
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--base-accuracy", type=float, default=0.6)
    p.add_argument("--false-alarm", type=float)
    p.add_argument("--detection", type=float)
    p.add_argument("--unsure", type=float)
    p.add_argument("--malformed", type=float, default=0.0)
    p.add_argument("--fix-success", type=float, default=0.5)
    p.add_argument("--break-rate", type=float, default=0.2)
    p.add_argument("--no-answer", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="side-by-side tables across runs")
    p.add_argument("--inputs", nargs="+", help="several outcome or report files")
    p.add_argument("--label", action="append", help="run label, one per input")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
