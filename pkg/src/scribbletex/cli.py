"""Headless one-shot command line: mesh + atlas + strokes in, edited atlas out.

Exit codes:
    0  success
    1  I/O error (missing or unreadable mesh/atlas/strokes/config)
    2  validation error (malformed strokes, empty scribble, bad config,
       overlapping regions)
    3  model backend error (timeouts, auth, malformed responses)
    4  any other pipeline failure
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile

from .errors import (BackendError, EmptyMask, EmptyScribble, MeshLoadError,
                     NoCandidate, OverlappingRegions, PatchLargerThanRegion,
                     ScribbleTexError)
from .pipeline import (PipelineConfig, Session, export_session, run_edit,
                       run_multi)
from .scribble import Stroke

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_PIPELINE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scribbletex",
        description="Scribble-driven texture editing, one shot.",
        epilog="Exit codes: 0 success, 1 I/O error, 2 validation error, "
               "3 backend error, 4 pipeline failure.")
    parser.add_argument("--mesh", required=True, help="OBJ mesh path")
    parser.add_argument("--atlas", required=True, help="texture atlas PNG")
    parser.add_argument("--strokes", required=True,
                        help="strokes JSON: list of strokes or "
                             '{"strokes": [...], "hint": "..."}')
    parser.add_argument("--config", help="TOML pipeline configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--intent-rank", type=int, default=None,
                        help="use this intent rank instead of the top one "
                             "(single-region runs only)")
    parser.add_argument("--dump-stages", action="store_true",
                        help="keep every intermediate artifact under "
                             "<out>/stages/")
    return parser


def load_strokes(path):
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        strokes, hint = data.get("strokes", []), data.get("hint")
    else:
        strokes, hint = data, None
    return [Stroke.from_dict(d) for d in strokes], hint


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = (PipelineConfig.from_toml(args.config) if args.config
                  else PipelineConfig.from_env())
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        config.seed = args.seed

    try:
        strokes, hint = load_strokes(args.strokes)
        if not strokes:
            print("error: strokes file contains no strokes", file=sys.stderr)
            return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: malformed strokes file: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    os.makedirs(args.out, exist_ok=True)
    work = (os.path.join(args.out, "stages") if args.dump_stages
            else tempfile.mkdtemp(prefix="scribbletex-"))
    try:
        session = Session.create(work, args.mesh, args.atlas, config)
        session.mesh                                   # validate inputs now
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MeshLoadError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        rids = session.add_strokes(strokes, hint=hint)
        if len(rids) == 1:
            _, report = run_edit(session, rids[0],
                                 chosen_intent_rank=args.intent_rank)
        else:
            _, report = run_multi(session, rids)
        obj, png = export_session(session, args.out)
        report_path = os.path.join(args.out, "report.json")
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2)
        print(f"wrote {obj}")
        print(f"wrote {png}")
        print(f"wrote {report_path}")
        return EXIT_OK
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EmptyScribble, EmptyMask, OverlappingRegions,
            PatchLargerThanRegion) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BackendError, NoCandidate) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ScribbleTexError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    finally:
        if not args.dump_stages:
            shutil.rmtree(work, ignore_errors=True)


if __name__ == "__main__":                              # pragma: no cover
    sys.exit(main())
