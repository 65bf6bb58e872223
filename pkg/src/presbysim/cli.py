"""Command-line entry point.

Exit status is 0 on success and 2 on any configuration, validation or
parse error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from pathlib import Path

from presbysim import optics
from presbysim.calibration import Eye, calibrate_eye
from presbysim.config import RunConfig, load_config
from presbysim.controller import new_state
from presbysim.device import clarity_probe, replay, run_push_up
from presbysim.errors import PresbysimError, TraceError
from presbysim.netpbm import read_depth, read_pnm, write_pnm
from presbysim.optics import AgeMode
from presbysim.render import ControllerSnapshot, render, to_uint8
from presbysim.study import ALL_MODES, REFERENCE_MEDIANS_MM, REFERENCE_TOLERANCE, run_study
from presbysim.traces import format_command_log, read_trace

log = logging.getLogger("presbysim")


class UsageError(PresbysimError):
    pass


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _text_table(rows: list[list]) -> str:
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def _emit(args, rows: list[list], text: str | None = None):
    """Print the report in the chosen format; ``--out`` always gets CSV."""
    csv_text = _csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    sys.stdout.write(csv_text if args.format == "csv" else (text or _text_table(rows)))


def _fmt_mm(value: float | None) -> str:
    return "none" if value is None else f"{value:.1f}"


def _modes(args, cfg: RunConfig) -> tuple[AgeMode, ...]:
    return (AgeMode.parse(args.mode),) if args.mode else ALL_MODES


# -- subcommands -------------------------------------------------------------

def cmd_table(args, cfg: RunConfig):
    rows = [["mode", "delta_20s_d", "delta_30s_d", "target_aoa_d", "threshold_mm"]]
    rows.append(["baseline", "", "", "", ""])
    for mode in optics.SIMULATED_MODES:
        rows.append([
            mode.value,
            f"{optics.mode_delta(optics.AgeBracket.TWENTIES, mode):.1f}",
            f"{optics.mode_delta(optics.AgeBracket.THIRTIES, mode):.1f}",
            f"{optics.target_amplitude(mode):.2f}",
            f"{optics.mode_threshold(mode) * 1000:.1f}",
        ])
    text_rows = [["mode", "20s wearer", "30s wearer", "target AoA", "threshold"]]
    for r in rows[1:]:
        if not r[1]:
            text_rows.append([r[0], "-", "-", "-", "-"])
        else:
            text_rows.append([r[0], f"{r[1]} D", f"{r[2]} D", f"{r[3]} D", f"{r[4]} mm"])
    _emit(args, rows, _text_table(text_rows))


def _calibrated_wearer(cfg: RunConfig):
    eyes = cfg.eyes()
    wearer = cfg.wearer
    if cfg.calibrate_first:
        individual = eyes[0].refraction_d != eyes[1].refraction_d
        probe = clarity_probe(eyes)
        if individual:
            left = calibrate_eye(probe, Eye.LEFT, cfg.controller)
            right = calibrate_eye(probe, Eye.RIGHT, cfg.controller)
        else:
            left, right = calibrate_eye(probe, Eye.BOTH, cfg.controller)
        wearer = dataclasses.replace(wearer, offset_left=left, offset_right=right)
    return eyes, wearer


def cmd_pushup(args, cfg: RunConfig):
    eyes, wearer = _calibrated_wearer(cfg)
    rows = [["mode", "near_point_mm", "threshold_mm"]]
    for mode in _modes(args, cfg):
        if cfg.tof is not None:
            cfg.tof.reset()
        np_mm = run_push_up(eyes, wearer, mode, cfg.pushup, cfg.controller, cfg.tof)
        thr = "" if mode is AgeMode.BASELINE else f"{optics.mode_threshold(mode) * 1000:.1f}"
        rows.append([mode.value, _fmt_mm(np_mm), thr])
    _emit(args, rows)


def cmd_replay(args, cfg: RunConfig):
    trace = read_trace(args.trace)
    state = new_state(cfg.mode, cfg.wearer, cfg.controller)
    log_csv = format_command_log(replay(trace, state, cfg.controller), cfg.controller.quantum_d)
    if args.out:
        Path(args.out).write_text(log_csv)
    if args.format == "csv" or not args.out:
        sys.stdout.write(log_csv)
    else:
        sys.stdout.write(f"{len(trace)} samples -> {args.out}\n")


def cmd_study(args, cfg: RunConfig):
    result = run_study(cfg.study, cfg.pushup, cfg.controller, cfg.tof)
    errors = result.relative_errors()
    passes = result.passes()
    rows = [["mode", "median_mm", "reference_mm", "rel_error", "pass"]]
    for mode in ALL_MODES:
        err = errors[mode]
        rows.append([
            mode.value,
            _fmt_mm(result.medians[mode]),
            f"{REFERENCE_MEDIANS_MM[mode]:.1f}",
            "none" if err is None else f"{err:+.4f}",
            "pass" if passes[mode] else "fail",
        ])
    s = cfg.study
    header = (f"participants={s.n} age={s.age_mean}+/-{s.age_sd} jitter={s.jitter_sd} "
              f"seed={s.seed} tolerance={REFERENCE_TOLERANCE:.0%}\n")
    _emit(args, rows, header + _text_table(rows))


def cmd_render(args, cfg: RunConfig):
    image = read_pnm(args.image)
    depth = read_depth(args.depth)
    if image.shape[:2] != depth.shape:
        raise UsageError(f"image {image.shape[:2]} and depth {depth.shape} sizes differ")
    eyes, wearer = _calibrated_wearer(cfg)
    side = Eye.RIGHT if args.eye == "right" else Eye.LEFT
    eye = eyes[1] if side is Eye.RIGHT else eyes[0]
    snapshot = ControllerSnapshot(cfg.mode, wearer, cfg.controller, side)
    out = to_uint8(render(image, depth, eye, snapshot, cfg.render))
    write_pnm(args.out, out)
    sys.stdout.write(f"wrote {args.out}\n")


def cmd_calibrate(args, cfg: RunConfig):
    eyes = cfg.eyes()
    probe = clarity_probe(eyes)
    which = args.eye
    if which == "auto":
        which = "both" if eyes[0].refraction_d == eyes[1].refraction_d else "individual"
    rows = [["eye", "offset_d"]]
    if which == "both":
        left, right = calibrate_eye(probe, Eye.BOTH, cfg.controller)
        rows += [["left", f"{left:.1f}"], ["right", f"{right:.1f}"]]
    else:
        for side in ((Eye.LEFT, Eye.RIGHT) if which == "individual" else (Eye(which),)):
            rows.append([side.value, f"{calibrate_eye(probe, side, cfg.controller):.1f}"])
    _emit(args, rows)


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--mode", choices=[m.value for m in AgeMode],
                        help="age mode (overrides the config file)")
    common.add_argument("--seed", type=int, help="root random seed (overrides the config file)")
    common.add_argument("--out", metavar="PATH", help="output file")
    common.add_argument("--format", choices=("text", "csv"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="presbysim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table", parents=[common], help="print lens deltas and mode thresholds")
    sub.add_parser("pushup", parents=[common], help="simulated push-up near points")
    p = sub.add_parser("replay", parents=[common], help="replay a sensor trace")
    p.add_argument("trace", help="trace CSV (t_ms,distance_mm,temp_c)")
    sub.add_parser("study", parents=[common], help="synthetic-population push-up study")
    p = sub.add_parser("render", parents=[common], help="render presbyopic blur")
    p.add_argument("image", help="input PGM/PPM (8-bit binary)")
    p.add_argument("depth", help="depth map in mm (16-bit PGM or CSV grid)")
    p.add_argument("--eye", choices=("left", "right"), default="left")
    p = sub.add_parser("calibrate", parents=[common], help="calibrate offsets for the virtual eye")
    p.add_argument("--eye", choices=("auto", "both", "left", "right", "individual"), default="auto")
    return parser


COMMANDS = {
    "table": cmd_table,
    "pushup": cmd_pushup,
    "replay": cmd_replay,
    "study": cmd_study,
    "render": cmd_render,
    "calibrate": cmd_calibrate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "render" and not args.out:
        print("error: render needs --out", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg.mode = AgeMode.parse(args.mode)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.study = dataclasses.replace(cfg.study, seed=args.seed)
            if cfg.tof is not None:
                cfg.tof.reset(args.seed)
        COMMANDS[args.command](args, cfg)
    except TraceError as exc:
        print(f"error: {args.trace}: {exc}", file=sys.stderr)
        return 2
    except (PresbysimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
