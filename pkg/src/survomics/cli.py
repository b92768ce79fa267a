"""``survomics`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import OPTIONS, OUT_ENV, parse_config
from .errors import ConfigError, SurvomicsError
from .pipeline import REPORT_NAME, RunReport, run_pipeline, verify_manifest

STAGE_OF = {"preprocess": "preselect", "fit": "fit", "validate": "calibrate", "run": "report"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", help="INI configuration file")
    for o in OPTIONS:
        flag = "--" + o.key.replace("_", "-")
        default = o.default
        if isinstance(default, tuple):
            default = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in default)
        p.add_argument(flag, dest=o.key, metavar=o.key.upper(), help=f"{o.help} [default: {default}]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="survomics", description="Survival analysis for high-dimensional covariates.")
    parser.add_argument("--version", action="version", version=f"survomics {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "preprocess": "filter, impute, preselect and standardize; writes the processed dataset",
        "fit": "preprocess and fit the configured model",
        "validate": "fit, then compute discrimination, prediction-error and calibration results",
        "run": "full pipeline including figures",
    }
    for name, text in helps.items():
        _add_run_flags(sub.add_parser(name, help=text, description=text))
    rep = sub.add_parser("report", help="summarize a finished run and check its manifest")
    rep.add_argument("out", nargs="?", help=f"output directory of a run (default: ${OUT_ENV} or --out)")
    rep.add_argument("--out", dest="out_flag", help="output directory of a run")
    rep.add_argument("--json", action="store_true", help="print the full report JSON")
    return parser


def _summary(rep: RunReport, out: Path) -> str:
    lines = [f"status: {rep.status}", f"output: {out}"]
    if rep.failed_stage:
        lines.append(f"failed stage: {rep.failed_stage} ({rep.error})")
    if rep.model.get("selected") is not None and "fit" in rep.stages:
        sel = rep.model["selected"]
        lines.append(f"selected ({len(sel)}): {', '.join(sel) if sel else '-'}")
    app = rep.metrics.get("apparent", {})
    for k in ("harrell_c", "uno_c", "antolini_c"):
        if app.get(k):
            lines.append(f"{k}: {app[k]['c_index']:.4f}")
    ibs = rep.metrics.get("prediction_error", {}).get("ibs")
    if ibs:
        lines.append("IBS: " + ", ".join(f"{k} {v:.4f}" for k, v in ibs.items()))
    for n in rep.notes:
        lines.append(f"note: {n}")
    return "\n".join(lines)


def _report_cmd(args) -> int:
    import os

    out = args.out or args.out_flag or os.environ.get(OUT_ENV)
    if not out:
        raise ConfigError("report needs an output directory")
    out = Path(out)
    problems = verify_manifest(out)
    doc = json.loads((out / REPORT_NAME).read_text())
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(f"status: {doc.get('status')}  seed: {doc.get('seed')}  model: {doc.get('config', {}).get('model')}")
        sel = doc.get("model", {}).get("selected")
        if sel is not None:
            print(f"selected ({len(sel)}): {', '.join(sel) if sel else '-'}")
        for k, v in sorted(doc.get("metrics", {}).get("apparent", {}).items()):
            if v:
                print(f"{k}: {v['c_index']:.4f}")
        for h, tab in sorted(doc.get("metrics", {}).get("horizons", {}).items()):
            vals = ", ".join(f"{k} {v:.4f}" for k, v in sorted(tab.items()) if v is not None)
            print(f"t={h}: {vals or '-'}")
        print(f"manifest: {len(doc.get('manifest', []))} file(s), {'intact' if not problems else 'PROBLEMS'}")
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return 2
    return int(doc.get("exit_code", 0))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        if args.command == "report":
            return _report_cmd(args)
        overrides = {o.key: getattr(args, o.key) for o in OPTIONS}
        cfg = parse_config(args.config, overrides)
        rep = run_pipeline(cfg, STAGE_OF[args.command])
    except SurvomicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(_summary(rep, Path(cfg.out)))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
