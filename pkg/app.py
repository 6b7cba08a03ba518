import os
import sys
import argparse
import multiprocessing as mp
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent
TEMPLATES_DIR = str(BASE_DIR / "assets" / "templates")
RUNS_DIR = str(BASE_DIR / "data" / "runs")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verify", description="Finite-dimensional operator-algebra verifier")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run verification suites for a scenario file")
    run.add_argument("config", help="scenario JSON file")
    run.add_argument("--suite", action="append", dest="suites", metavar="NAME",
                     help="suite to run (repeatable); default: the scenario's list")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--tol", type=float, default=None, help="entry tolerance override")
    run.add_argument("--out", default=RUNS_DIR, help="output folder for report files")
    run.add_argument("--n", type=int, default=None, help="largest Wick tuple length")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (1 = in-process)")
    return parser


def main(argv=None) -> int:
    # IMPORTANT for multiprocessing (spawn)
    mp.freeze_support()

    args = build_parser().parse_args(argv)
    print("[app] starting...", flush=True)

    # Heavy imports after argument parsing so `--help` stays fast.
    from core.errors import ScenarioError
    from core.runlog import RunLog
    from core.scenario import Scenario
    print("[app] core imported", flush=True)

    try:
        scenario = Scenario.load(args.config).with_overrides(
            suites=args.suites, seed=args.seed, tol=args.tol, n=args.n, jobs=args.jobs)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr, flush=True)
        return EXIT_CONFIG
    print(f"[app] scenario loaded: {args.config}", flush=True)

    from core.report_template import SummaryRenderer
    from core.storage import make_run_folder, save_run
    from core.suites import SuiteRunner

    folder = make_run_folder(args.out) if args.out == RUNS_DIR else args.out
    os.makedirs(folder, exist_ok=True)
    log = RunLog(folder)
    log(f"seed={scenario.seed} suites={','.join(scenario.suites)} jobs={scenario.jobs}")

    report = SuiteRunner(scenario, log=log).run()
    data = report.to_dict()
    summary = SummaryRenderer(TEMPLATES_DIR).render(data)
    save_run(folder, data, summary)
    log(f"{len(report.entries)} entries, {len(report.failures)} failed")
    print(f"[app] report written to {folder}", flush=True)
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception as e:
        print("FATAL: verifier crashed", flush=True)
        raise
