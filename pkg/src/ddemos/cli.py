"""Command-line harness: setup, run, tally, verify, bench.

Exit codes: 0 ok, 1 usage, 2 inconsistent bundle, 3 audit violation,
4 no quorum (no majority of BB nodes agrees on a tallied transcript).
"""

from __future__ import annotations

import glob
import json
import os
import sys

import click

from ddemos.auditor import DelegatedAudit, audit
from ddemos.bb import BBTranscript, NoQuorum, majority_value
from ddemos.ea import BundleError, ElectionParams, ParamError, load_bundle, save_bundle, setup
from ddemos.netsim import ConformanceError
from ddemos.scenario import Scenario, run_election

EXIT_OK, EXIT_USAGE, EXIT_BUNDLE, EXIT_AUDIT, EXIT_NO_QUORUM = 0, 1, 2, 3, 4


class Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(as_json: bool, payload: dict, text: str) -> None:
    click.echo(json.dumps(payload, indent=1, sort_keys=True) if as_json else text)


def _read_json(path: str, what: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise Failure(EXIT_USAGE, f"cannot read {what} {path}: {exc}") from exc


def _load_bundle(path: str):
    try:
        return load_bundle(path)
    except BundleError as exc:
        raise Failure(EXIT_BUNDLE, str(exc)) from exc


def _published(run_dir: str) -> BBTranscript:
    paths = sorted(glob.glob(os.path.join(run_dir, "bb_transcript_*.json")))
    if not paths:
        raise Failure(EXIT_USAGE, f"no BB transcripts in {run_dir}")
    ts = []
    for p in paths:
        try:
            ts.append(BBTranscript.load(p))
        except (OSError, ValueError, KeyError, TypeError):
            ts.append(None)  # an unreadable node counts against the quorum
    good = [t for t in ts if t is not None]
    if not good:
        raise Failure(EXIT_NO_QUORUM, "no BB transcript could be read")
    f_b = good[0].params.f_b
    try:
        return majority_value([(None, None) if t is None else (t.digest(), t) for t in ts], f_b)
    except NoQuorum as exc:
        raise Failure(EXIT_NO_QUORUM, f"no quorum among {len(ts)} BB transcripts: {exc}") from exc


@click.group()
def cli() -> None:
    """Simulated D-DEMOS elections: setup, run, tally, verify, bench."""


@cli.command("setup")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="JSON election parameters (n, m, options, n_v, f_v, ...; optional ea_attack).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--json", "as_json", is_flag=True)
def setup_cmd(config_path, out_dir, as_json):
    """Generate an EA bundle."""
    cfg = dict(_read_json(config_path, "config"))
    attack = cfg.pop("ea_attack", None)
    known = set(ElectionParams.__dataclass_fields__)
    if set(cfg) - known:
        raise Failure(EXIT_USAGE, f"unknown config fields: {sorted(set(cfg) - known)}")
    try:
        params = ElectionParams(**cfg)
        bundle = setup(params, attack)
    except (ParamError, TypeError, ValueError) as exc:
        raise Failure(EXIT_USAGE, f"bad election config: {exc}") from exc
    save_bundle(bundle, out_dir)
    _emit(as_json, {"out": out_dir, "n": params.n, "m": params.m, "group": params.group},
          f"bundle with {params.n} ballots, {params.m} options written to {out_dir}")


@cli.command("run")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(file_okay=False))
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", required=True, type=click.IntRange(0, 2**64 - 1))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--unsound", is_flag=True, help="Allow more corrupted nodes than the fault model tolerates.")
@click.option("--json", "as_json", is_flag=True)
def run_cmd(bundle_dir, scenario_path, seed, out_dir, unsound, as_json):
    """Run a simulated election and write its transcripts."""
    bundle = _load_bundle(bundle_dir)
    try:
        scenario = Scenario.from_dict(_read_json(scenario_path, "scenario"))
    except (TypeError, ValueError) as exc:
        raise Failure(EXIT_USAGE, f"bad scenario: {exc}") from exc
    for it in scenario.intents:
        if not 1 <= it.serial <= bundle.params.n or not 0 <= it.option < bundle.params.m or it.part not in "AB":
            raise Failure(EXIT_USAGE, f"intent {it} does not fit the bundle")
    try:
        run = run_election(bundle, scenario, seed=seed, unsound=unsound)
    except ConformanceError as exc:
        raise Failure(EXIT_USAGE, f"{exc} (pass --unsound to run anyway)") from exc
    run.save(out_dir)
    receipts = sum(1 for s in run.sessions if s.outcome == "receipt")
    payload = {"out": out_dir, "digest": run.transcript.digest, "receipts": receipts,
               "voters": len(run.sessions), "tally": None}
    if not scenario.voting_only:
        try:
            payload["tally"] = run.published().tally
        except NoQuorum:
            pass
    _emit(as_json, payload, f"run written to {out_dir}; {receipts}/{len(run.sessions)} receipts; "
                            f"tally {payload['tally']}; digest {run.transcript.digest[:16]}")


@cli.command("tally")
@click.option("--run", "run_dir", required=True, type=click.Path(file_okay=False))
@click.option("--json", "as_json", is_flag=True)
def tally_cmd(run_dir, as_json):
    """Print the published tally (majority over BB transcripts)."""
    t = _published(run_dir)
    if t.tally is None:
        raise Failure(EXIT_NO_QUORUM, f"the majority BB view is at phase {t.phase!r}; no tally published")
    opts = t.params.options
    _emit(as_json, {"tally": list(t.tally), "options": list(opts)},
          "(" + ",".join(str(v) for v in t.tally) + ")\n"
          + "\n".join(f"  {o}: {v}" for o, v in zip(opts, t.tally)))


@cli.command("verify")
@click.option("--run", "run_dir", required=True, type=click.Path(file_okay=False))
@click.option("--delegated", "delegated_path", type=click.Path(dir_okay=False), default=None,
              help="Delegated audit file (defaults to delegated.json in the run directory if present).")
@click.option("--json", "as_json", is_flag=True)
def verify_cmd(run_dir, delegated_path, as_json):
    """Run auditor checks (a)-(g) on the published transcript."""
    t = _published(run_dir)
    if delegated_path is None:
        default = os.path.join(run_dir, "delegated.json")
        delegated_path = default if os.path.exists(default) else None
    delegated = []
    if delegated_path is not None:
        try:
            delegated = [DelegatedAudit.from_dict(d) for d in _read_json(delegated_path, "delegated audits")]
        except (KeyError, TypeError, ValueError) as exc:
            raise Failure(EXIT_USAGE, f"bad delegated audit file: {exc}") from exc
    rep = audit(t, delegated)
    lines = [f"audit {rep.status}"] + [f"  ({e['check']}) serial {e['serial']}: {e['detail']}" for e in rep.entries]
    _emit(as_json, rep.to_dict(), "\n".join(lines))
    if not rep.ok:
        raise Failure(EXIT_AUDIT, "")


@cli.command("bench")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(file_okay=False))
@click.option("--repeats", default=3, type=click.IntRange(1, 100))
@click.option("--concurrency", default=4, type=click.IntRange(1, 10_000), help="Voters starting per tick.")
@click.option("--json", "as_json", is_flag=True)
def bench_cmd(bundle_dir, repeats, concurrency, as_json):
    """Votes per second of the in-simulator vote-collection path."""
    from ddemos.bench import bench_bundle

    _load_bundle(bundle_dir)  # fail early on an inconsistent bundle
    res = bench_bundle(bundle_dir, repeats=repeats, concurrency=concurrency)
    _emit(as_json, res, f"{res['votes_per_s']:.0f} votes/s (median of {repeats}; min {res['min_votes_per_s']:.0f}) "
                        f"n={res['n']} m={res['m']} N_v={res['n_v']} group={res['group']}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="ddemos", standalone_mode=False)
    except Failure as exc:
        if str(exc):
            click.echo(f"error: {exc}", err=True)
        return exc.code
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, click.Abort) as exc:
        click.echo(f"usage error: {exc}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
