"""Headless driver.

Subcommands:
    serve     run a websocket session server
    remix     apply a pipeline script to a session file
    render    replay a behavior to frames.jsonl or an SVG directory
    simulate  run a scripted multi-client scenario on a virtual clock

Remix script grammar: one op per line, whitespace-separated tokens, `#`
starts a comment. Each line reads one block (by id or by an alias bound
earlier) and registers the result as a new block:

    stretch <block> <factor> [as <alias>]
    set-duration <block> <ms>
    make-instant <block>
    trim <block> <from> <to>
    skip <block> <from> <to>
    normalize <block>
    smooth <block> <window>
    ease-in-out <block>
    reverse <block>
    resize <block> <sx> <sy> [<ax> <ay>]
    rotate <block> <theta> [<ax> <ay>]
    clone <block>
    apply <block> <targetElementId> [relative|absolute]

Exit codes: remix 2=script error (line reported) 3=unknown block;
render 3=unknown behavior 4=not compiled; simulate 1=assertion failed
2=scenario parse error. CROWDMIX_LOG sets the log level.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import remix as rmx
from .errors import CrowdmixError, NotCompiled, UnknownBehavior, UnknownBlock
from .ids import IdGen
from .render import DEFAULT_SIZE, frames_jsonl, render_svg_dir, replay_frames
from .scenario import ScenarioParseError, parse_scenario, run_scenario
from .store import load_session_path, save_session

logger = logging.getLogger(__name__)


class ScriptError(Exception):
    def __init__(self, lineno, message):
        super().__init__("line %d: %s" % (lineno, message))
        self.lineno = lineno


def _floats(tokens, lineno, n_min, n_max=None):
    n_max = n_max if n_max is not None else n_min
    if not (n_min <= len(tokens) <= n_max):
        raise ScriptError(lineno, "expected %d..%d arguments, got %d"
                          % (n_min, n_max, len(tokens)))
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise ScriptError(lineno, "bad number: %s" % (e,))


def parse_script_line(lineno, tokens):
    """tokens: [fn, blockRef, args...]; returns (blockRef, RemixFn, alias)."""
    alias = None
    if len(tokens) >= 2 and tokens[-2] == "as":
        alias = tokens[-1]
        tokens = tokens[:-2]
    if len(tokens) < 2:
        raise ScriptError(lineno, "expected: <fn> <block> [args...]")
    fn_name, block_ref, args = tokens[0], tokens[1], tokens[2:]
    if fn_name == "stretch":
        fn = rmx.Stretch(*_floats(args, lineno, 1))
    elif fn_name == "set-duration":
        fn = rmx.SetDuration(*_floats(args, lineno, 1))
    elif fn_name == "make-instant":
        _floats(args, lineno, 0)
        fn = rmx.MakeInstant()
    elif fn_name == "trim":
        fn = rmx.Trim(*_floats(args, lineno, 2))
    elif fn_name == "skip":
        fn = rmx.Skip(*_floats(args, lineno, 2))
    elif fn_name == "normalize":
        _floats(args, lineno, 0)
        fn = rmx.Normalize()
    elif fn_name == "smooth":
        fn = rmx.Smooth(*_floats(args, lineno, 1))
    elif fn_name == "ease-in-out":
        _floats(args, lineno, 0)
        fn = rmx.EaseInOut()
    elif fn_name == "reverse":
        _floats(args, lineno, 0)
        fn = rmx.Reverse()
    elif fn_name == "resize":
        vals = _floats(args, lineno, 2, 4)
        anchor = (vals[2], vals[3]) if len(vals) == 4 else None
        fn = rmx.ResizeTrajectory(vals[0], vals[1], anchor)
    elif fn_name == "rotate":
        vals = _floats(args, lineno, 1, 3)
        anchor = (vals[1], vals[2]) if len(vals) == 3 else None
        fn = rmx.RotateTrajectory(vals[0], anchor)
    elif fn_name == "clone":
        _floats(args, lineno, 0)
        fn = rmx.Clone()
    elif fn_name == "apply":
        if len(args) not in (1, 2):
            raise ScriptError(lineno, "apply takes <target> [relative|absolute]")
        mode = args[1] if len(args) == 2 else "relative"
        if mode not in ("relative", "absolute"):
            raise ScriptError(lineno, "bad apply mode %r" % (mode,))
        fn = rmx.Apply(args[0], mode)
    else:
        raise ScriptError(lineno, "unknown remix fn %r" % (fn_name,))
    return block_ref, fn, alias


def run_remix_script(archive, text, id_gen=None):
    """Apply a pipeline script to an archive in place.

    Returns the produced block ids. Raises ScriptError (bad syntax or a
    rejected argument, with line number) or UnknownBlock.
    """
    id_gen = id_gen or IdGen(0)
    aliases = {}
    produced = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        block_ref, fn, alias = parse_script_line(lineno, line.split())
        block_id = aliases.get(block_ref, block_ref)
        block = archive.blocks.get(block_id)
        if block is None:
            raise UnknownBlock("line %d: no block %r" % (lineno, block_ref))
        try:
            result = rmx.apply_remix(block, fn, id_gen)
        except UnknownBlock:
            raise
        except CrowdmixError as e:
            raise ScriptError(lineno, "%s: %s" % (e.code, e))
        new_id = id_gen.new("blk")
        while new_id in archive.blocks:  # never clobber session blocks
            new_id = id_gen.new("blk")
        result = replace(result, id=new_id)
        archive.blocks[result.id] = result
        produced.append(result.id)
        if alias:
            aliases[alias] = result.id
    return produced


# ---------------------------------------------------------------------------


def _cmd_remix(args):
    try:
        archive = load_session_path(args.session)
    except (CrowdmixError, OSError, ValueError) as e:
        print("cannot load session: %s" % (e,), file=sys.stderr)
        return 2
    try:
        with open(args.script, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        print("cannot read script: %s" % (e,), file=sys.stderr)
        return 2
    try:
        produced = run_remix_script(archive, text, IdGen(args.seed))
    except ScriptError as e:
        print("script error: %s" % (e,), file=sys.stderr)
        return 2
    except UnknownBlock as e:
        print("unknown block: %s" % (e,), file=sys.stderr)
        return 3
    with open(args.out, "wb") as f:
        f.write(save_session(archive))
    for block_id in produced:
        print(block_id, file=sys.stderr)
    return 0


def _cmd_render(args):
    try:
        archive = load_session_path(args.session)
        frames = replay_frames(archive, args.behavior)
    except UnknownBehavior as e:
        print(str(e), file=sys.stderr)
        return 3
    except NotCompiled as e:
        print(str(e), file=sys.stderr)
        return 4
    except (CrowdmixError, OSError, ValueError) as e:
        print("cannot load session: %s" % (e,), file=sys.stderr)
        return 2
    try:
        w, h = (int(v) for v in args.size.split("x"))
    except ValueError:
        print("bad --size, expected WxH", file=sys.stderr)
        return 2
    if args.format == "framesJsonl":
        with open(args.out, "wb") as f:
            f.write(frames_jsonl(frames))
    else:
        render_svg_dir(frames, args.out, (w, h))
    return 0


def _cmd_simulate(args):
    try:
        with open(args.scenario, "r", encoding="utf-8") as f:
            scenario = parse_scenario(f.read())
    except (ScenarioParseError, OSError) as e:
        print("scenario error: %s" % (e,), file=sys.stderr)
        return 2
    report, _ = run_scenario(scenario, id_seed=args.seed)
    for note in report.errors:
        print("note: %s" % note)
    for line in report.lines():
        print(line)
    print("%d/%d assertions passed"
          % (sum(o.passed for o in report.outcomes), len(report.outcomes)))
    return 0 if report.passed else 1


def _cmd_serve(args):
    from .ws import serve_forever

    host, _, port = args.addr.rpartition(":")
    serve_forever(host or "127.0.0.1", int(port), session_id=args.session,
                  lock_ttl_ms=args.lock_ttl_ms, tick_ms=args.tick_ms,
                  session_file=args.load)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="crowdmix", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run a websocket session server")
    p.add_argument("--addr", default="127.0.0.1:8765")
    p.add_argument("--lock-ttl-ms", type=int, default=30_000)
    p.add_argument("--tick-ms", type=int, default=50)
    p.add_argument("--session", default="main")
    p.add_argument("--load", default=None, help="session file to preload")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("remix", help="apply a remix pipeline script")
    p.add_argument("session")
    p.add_argument("script")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_remix)

    p = sub.add_parser("render", help="replay a behavior to files")
    p.add_argument("session")
    p.add_argument("behavior")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--format", choices=["framesJsonl", "svgDir"],
                   default="framesJsonl")
    p.add_argument("--size", default="%dx%d" % DEFAULT_SIZE)
    p.set_defaults(fn=_cmd_render)

    p = sub.add_parser("simulate", help="run a scripted scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_simulate)
    return parser


def main(argv=None):
    level = os.environ.get("CROWDMIX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
