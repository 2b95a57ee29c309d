"""Operator entry points.

Machine-readable output is JSON lines on stdout; diagnostics go to stderr.
Exit codes: 0 ok, 2 missing artifact, 3 connectivity/auth failure,
64 usage error, 65 malformed data.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from pibase import recognizer as rec
from pibase.broker.client import APIError, BrokerClient, BrokerUnreachable
from pibase.broker.core import BrokerCore
from pibase.broker.server import BrokerHTTPServer
from pibase.detector import (
    CascadeTargets,
    DetectParams,
    detect,
    generate_features,
    load_cascade,
    save_cascade,
    train_cascade,
)
from pibase.detector.training import TrainingError
from pibase.imaging import FormatError, load_pgm
from pibase.pipeline import (
    DirectoryFrameSource,
    Pipeline,
    PipelineConfig,
    TrialOutcome,
    compute_metrics,
    parse_motion_file,
)
from pibase.util import canonical_dumps, iso_utc, parse_iso, utc_now

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_CONN = 3
EXIT_USAGE = 64
EXIT_DATA = 65


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class MissingArtifact(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(obj: dict) -> None:
    sys.stdout.write(canonical_dumps(obj) + "\n")
    sys.stdout.flush()


def _diag(message: str) -> None:
    sys.stderr.write(message + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingArtifact(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path} is not valid JSON: {exc}") from None


def _resolve(flag, env_name: str, config: dict, config_key: str, default=None):
    """Flags override environment variables override the config file."""
    if flag is not None:
        return flag
    env = os.environ.get(env_name)
    if env:
        return env
    if config_key in config:
        return config[config_key]
    return default


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingArtifact(f"{what} {path} not found")
    return p


def _broker_client(args, config: dict, require_token: bool = True) -> BrokerClient:
    url = _resolve(getattr(args, "broker", None), "PIBASE_BROKER_URL", config, "broker_url")
    if not url:
        raise UsageError("broker url required (--broker or PIBASE_BROKER_URL)")
    token = _resolve(getattr(args, "token", None), "PIBASE_TOKEN", config, "token")
    if require_token and not token:
        raise UsageError("token required (--token or PIBASE_TOKEN)")
    return BrokerClient(url, token)


def _detect_params(args) -> DetectParams:
    return DetectParams(
        scale_factor=args.scale_factor,
        step=args.step,
        min_neighbors=args.min_neighbors,
        min_size=args.min_size,
    )


def _add_detect_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scale-factor", type=float, default=1.25)
    parser.add_argument("--step", type=float, default=1.0)
    parser.add_argument("--min-neighbors", type=int, default=3)
    parser.add_argument("--min-size", type=int, default=24)


def _load_cascade_file(path: str):
    p = _require_file(path, "cascade file")
    try:
        return load_cascade(p.read_bytes())
    except FormatError as exc:
        raise DataError(f"cascade file {path}: {exc}") from None


def _load_model_file(path: str):
    p = _require_file(path, "recognizer model")
    try:
        return rec.load_model(p.read_bytes())
    except FormatError as exc:
        raise DataError(f"recognizer model {path}: {exc}") from None


# -- commands -----------------------------------------------------------------


def cmd_serve(args, config: dict) -> int:
    port = int(_resolve(args.port, "PIBASE_PORT", config, "port", 8080))
    data_dir = _resolve(args.data_dir, "PIBASE_DATA_DIR", config, "data_dir", "./pibase-data")
    core = BrokerCore(data_dir, token_ttl=args.token_ttl)
    server = BrokerHTTPServer(core, host=args.host, port=port)
    _emit({"event": "serving", "url": server.url, "data_dir": str(data_dir)})
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        _diag("shutting down")
    finally:
        server.stop()
    return EXIT_OK


def cmd_run(args, config: dict) -> int:
    cascade = _load_cascade_file(args.cascade)
    model = _load_model_file(args.model)
    motion_path = _require_file(args.motion, "motion file")
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise MissingArtifact(f"frame directory {args.frames} not found")

    try:
        events = parse_motion_file(motion_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DataError(f"motion file: {exc}") from None

    broker = _broker_client(args, config)
    if not broker.ping():
        _diag(f"broker {broker.base_url} unreachable")
        return EXIT_CONN

    pipeline = Pipeline(
        broker,
        cascade,
        model,
        PipelineConfig(
            burst_count=args.burst_count,
            burst_interval=args.interval,
            recognition_threshold=args.threshold,
            detect_params=_detect_params(args),
        ),
        camera=DirectoryFrameSource(frames_dir),
        queue_path=args.queue,
    )
    for index, event in enumerate(events, start=1):
        outcome = pipeline.handle_motion(event)
        doc = {"event": index}
        doc.update(outcome.as_dict())
        _emit(doc)
    return EXIT_OK


def cmd_enroll(args, config: dict) -> int:
    if not args.images:
        raise UsageError("at least one image is required")
    if "/" in args.name or not args.name.strip():
        raise UsageError(f"invalid person name {args.name!r}")
    paths = [(_require_file(p, "image"), Path(p).name) for p in args.images]
    for path, _ in paths:
        try:
            load_pgm(path.read_bytes())
        except FormatError as exc:
            raise DataError(f"{path}: {exc}") from None

    broker = _broker_client(args, config)
    uploaded = 0
    for path, name in paths:
        broker.storage_put(args.name, name, path.read_bytes(), "image/x-portable-graymap")
        uploaded += 1
    push_id, _ = broker.db_push(
        args.record_path, {"folder": args.name, "timestamp": iso_utc(utc_now())}
    )
    _emit({"folder": args.name, "uploaded": uploaded, "push_id": push_id})
    return EXIT_OK


def cmd_history(args, config: dict) -> int:
    try:
        start = iso_utc(parse_iso(args.from_ts))
        end = iso_utc(parse_iso(args.to_ts))
    except ValueError as exc:
        raise UsageError(f"unparsable date: {exc}") from None
    broker = _broker_client(args, config)
    rows = broker.db_query(args.db_path, order_by="timestamp", start=start, end=end)
    for key, value in rows:
        doc = dict(value) if isinstance(value, dict) else {"value": value}
        doc["push_id"] = key
        _emit(doc)
    return EXIT_OK


def cmd_eval(args, config: dict) -> int:
    path = _require_file(args.outcomes, "outcomes file")
    outcomes = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
            outcomes.append(
                TrialOutcome(
                    trial_id=str(doc["trial_id"]),
                    face_present=bool(doc["face_present"]),
                    detected=bool(doc["detected"]),
                    identity=doc.get("identity"),
                    recognized_as=doc.get("recognized_as"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    if not outcomes:
        raise UsageError("outcomes file contains no trials")
    report = compute_metrics(outcomes)
    sys.stdout.write(
        '{"precision":%.4f,"recall":%.4f}\n' % (report.precision, report.recall)
    )
    return EXIT_OK


def _load_pgm_dir(path: str, what: str):
    directory = Path(path)
    if not directory.is_dir():
        raise MissingArtifact(f"{what} directory {path} not found")
    images = []
    for file in sorted(directory.glob("*.pgm")):
        try:
            images.append(load_pgm(file.read_bytes()))
        except FormatError as exc:
            raise DataError(f"{file}: {exc}") from None
    if not images:
        raise DataError(f"{what} directory {path} holds no .pgm files")
    return images


def cmd_train_cascade(args, config: dict) -> int:
    positives = _load_pgm_dir(args.positives, "positives")
    negatives = _load_pgm_dir(args.negatives, "negatives")
    base_w, base_h = positives[0].width, positives[0].height
    pool = generate_features(base_w, base_h)[:: args.pool_step]
    targets = CascadeTargets(
        per_stage_tpr=args.per_stage_tpr,
        per_stage_fpr=args.per_stage_fpr,
        overall_fpr=args.overall_fpr,
        round_cap=args.round_cap,
        stage_cap=args.stage_cap,
    )
    try:
        model = train_cascade(
            positives, negatives, pool, targets, metadata={"pool_step": args.pool_step}
        )
    except TrainingError as exc:
        _diag(f"training failed: {exc}")
        return 1
    Path(args.out).write_bytes(save_cascade(model))
    _emit(
        {
            "out": args.out,
            "stages": len(model.stages),
            "cumulative_fpr": model.metadata.get("cumulative_fpr"),
            "pool_size": len(pool),
        }
    )
    return EXIT_OK


def cmd_train_recognizer(args, config: dict) -> int:
    faces_dir = Path(args.faces)
    if not faces_dir.is_dir():
        raise MissingArtifact(f"faces directory {args.faces} not found")
    samples = []
    for person_dir in sorted(faces_dir.iterdir()):
        if not person_dir.is_dir():
            continue
        for file in sorted(person_dir.glob("*.pgm")):
            try:
                samples.append((person_dir.name, load_pgm(file.read_bytes())))
            except FormatError as exc:
                raise DataError(f"{file}: {exc}") from None
    if not samples:
        raise DataError(f"no person/*.pgm images under {args.faces}")
    model = rec.train(samples, (args.grid, args.grid), (args.face_size, args.face_size))
    Path(args.out).write_bytes(rec.save_model(model))
    _emit({"out": args.out, "entries": len(model.entries), "people": len(model.label_map)})
    return EXIT_OK


def cmd_detect(args, config: dict) -> int:
    cascade = _load_cascade_file(args.cascade)
    image_path = _require_file(args.image, "image")
    try:
        img = load_pgm(image_path.read_bytes())
    except FormatError as exc:
        raise DataError(f"{args.image}: {exc}") from None
    for box in detect(cascade, img, _detect_params(args)):
        _emit(
            {
                "x": box.rect.x,
                "y": box.rect.y,
                "w": box.rect.w,
                "h": box.rect.h,
                "scale": box.scale,
                "neighbors": box.neighbor_count,
            }
        )
    return EXIT_OK


def cmd_recognize(args, config: dict) -> int:
    model = _load_model_file(args.model)
    image_path = _require_file(args.image, "image")
    try:
        img = load_pgm(image_path.read_bytes())
    except FormatError as exc:
        raise DataError(f"{args.image}: {exc}") from None
    result = rec.predict(model, img, args.threshold)
    _emit(
        {
            "label": model.label_name(result.label_id),
            "label_id": result.label_id,
            "confidence": result.confidence,
        }
    )
    return EXIT_OK


def cmd_sync(args, config: dict) -> int:
    cascade = _load_cascade_file(args.cascade)
    model = None
    if Path(args.model).exists():
        model = _load_model_file(args.model)
    broker = _broker_client(args, config)
    if not broker.ping():
        _diag(f"broker {broker.base_url} unreachable")
        return EXIT_CONN
    pipeline = Pipeline(
        broker,
        cascade,
        model,
        PipelineConfig(
            recognition_threshold=args.threshold,
            detect_params=_detect_params(args),
        ),
        faces_dir=args.faces_dir,
        model_path=args.model,
    )
    report = pipeline.sync_enrollments(since_hours=args.since_hours)
    _emit(report.as_dict())
    return EXIT_OK if report.failure is None else 1


# -- wiring --------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="pibase", description=__doc__)
    parser.add_argument("--config", help="optional JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the broker HTTP server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--token-ttl", type=float, default=86400.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="process a motion replay through the pipeline")
    p.add_argument("--motion", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--cascade", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--broker")
    p.add_argument("--token")
    p.add_argument("--threshold", type=float, default=rec.DEFAULT_THRESHOLD)
    p.add_argument("--burst-count", type=int, default=10)
    p.add_argument("--interval", type=float, default=0.0)
    p.add_argument("--queue", help="retry queue JSONL path")
    _add_detect_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("enroll", help="upload a person's images and an enrollment record")
    p.add_argument("--name", required=True)
    p.add_argument("--images", nargs="*", default=[])
    p.add_argument("--broker")
    p.add_argument("--token")
    p.add_argument("--record-path", default="/Enrollments")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("history", help="list intrusion records in a date range")
    p.add_argument("--from", dest="from_ts", required=True)
    p.add_argument("--to", dest="to_ts", required=True)
    p.add_argument("--broker")
    p.add_argument("--token")
    p.add_argument("--db-path", default="/Users")
    p.set_defaults(func=cmd_history)

    p = sub.add_parser("eval", help="compute precision/recall from trial outcomes")
    p.add_argument("--outcomes", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-cascade", help="train the face detector on PGM directories")
    p.add_argument("--positives", required=True)
    p.add_argument("--negatives", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-stage-tpr", type=float, default=0.995)
    p.add_argument("--per-stage-fpr", type=float, default=0.5)
    p.add_argument("--overall-fpr", type=float, default=0.05)
    p.add_argument("--round-cap", type=int, default=200)
    p.add_argument("--stage-cap", type=int, default=20)
    p.add_argument("--pool-step", type=int, default=24,
                   help="keep every k-th enumerated feature")
    p.set_defaults(func=cmd_train_cascade)

    p = sub.add_parser("train-recognizer", help="train the face recognizer on person folders")
    p.add_argument("--faces", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--face-size", type=int, default=100)
    p.set_defaults(func=cmd_train_recognizer)

    p = sub.add_parser("detect", help="detect faces in one PGM image")
    p.add_argument("--image", required=True)
    p.add_argument("--cascade", required=True)
    _add_detect_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("recognize", help="recognize one face crop")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=rec.DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("sync", help="pull new enrollments and retrain the recognizer")
    p.add_argument("--broker")
    p.add_argument("--token")
    p.add_argument("--cascade", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--faces-dir", required=True)
    p.add_argument("--since-hours", type=float, default=24.0)
    p.add_argument("--threshold", type=float, default=rec.DEFAULT_THRESHOLD)
    _add_detect_flags(p)
    p.set_defaults(func=cmd_sync)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        _diag(f"usage error: {exc}")
        return EXIT_USAGE
    except MissingArtifact as exc:
        _diag(str(exc))
        return EXIT_MISSING
    except DataError as exc:
        _diag(str(exc))
        return EXIT_DATA
    except APIError as exc:
        if exc.status in (401, 403):
            _diag(f"auth failure: {exc.message}")
            return EXIT_CONN
        _diag(f"broker error: {exc}")
        return 1
    except BrokerUnreachable as exc:
        _diag(str(exc))
        return EXIT_CONN


if __name__ == "__main__":
    sys.exit(main())
