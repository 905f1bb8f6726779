"""Command-line interface.

Exit codes: 0 on success, 1 when a run surfaces verification or detection
failures (missed attacks, false positives, failed token verification), 2 on
configuration errors.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .bench import (
    METHOD_NAMES,
    ConfigError,
    GenerationConfig,
    ScenarioError,
    build_world,
    generate,
    load_scenarios,
    run_method,
    save_scenarios,
    write_report_csv,
    write_report_json,
)
from .bench.generate import CATEGORIES
from .bench.methods import TRANSPORTS
from .tokens import KeyStore, issue_token, token_to_wire, verify_token
from .vocab import Vocabulary

CONFIG_ENV = "SENTINEL_CONFIG"


def _env_defaults() -> dict:
    """Optional defaults from the JSON file named by $SENTINEL_CONFIG."""
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read {CONFIG_ENV} file {path!r}: {exc}")
    if not isinstance(data, dict):
        raise click.ClickException(f"{CONFIG_ENV} file must hold a JSON object")
    return data


class _Cli(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ConfigError, ScenarioError, ValueError) as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(2)


@click.group(cls=_Cli)
def main() -> None:
    """Distributed sentinel mesh: scenario benchmark and token tooling."""


@main.command("gen")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="scenarios.jsonl", show_default=True,
              type=click.Path(dir_okay=False, writable=True))
@click.option("--categories", default=None,
              help="Comma-separated category filter (default: all).")
def gen_command(seed: int, out: str, categories: str | None) -> None:
    """Generate the benchmark scenario set."""
    cases = generate(GenerationConfig(seed=seed), seed=seed)
    if categories:
        wanted = {c.strip() for c in categories.split(",") if c.strip()}
        unknown = wanted - set(CATEGORIES)
        if unknown:
            raise ConfigError(f"unknown categories: {sorted(unknown)}")
        cases = [c for c in cases if c.category in wanted]
    save_scenarios(cases, out)
    attacks = sum(1 for c in cases if c.is_attack)
    click.echo(f"wrote {len(cases)} cases ({attacks} attacks, "
               f"{len(cases) - attacks} controls) to {out}")


@main.command("run")
@click.option("--scenarios", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Scenario file from `sentinel gen` (default: generate in memory).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--methods", default="sentinel_full",
              help=f"Comma-separated subset of: {', '.join(METHOD_NAMES)}.")
@click.option("--ablate", default=None,
              help="Comma-separated ablations (stt, cross_domain, mapping, "
                   "counterfactual, provenance); appended to --methods.")
@click.option("--mesh-size", default=None, type=int)
@click.option("--transport", default=None, type=click.Choice(TRANSPORTS))
@click.option("--timeout-ms", default=None, type=int, help="Cross-domain query timeout.")
@click.option("--workers", default=1, show_default=True, type=int,
              help="Reserved for parallel drivers; runs are sequential and deterministic.")
@click.option("--categories", default=None, help="Comma-separated category filter.")
@click.option("--out", default=None, type=click.Path(dir_okay=False, writable=True),
              help="Report path (.json or .csv).")
def run_command(scenarios, seed, methods, ablate, mesh_size, transport,
                timeout_ms, workers, categories, out) -> None:
    """Run detection methods over the scenario set and report metrics."""
    defaults = _env_defaults()
    mesh_size = mesh_size if mesh_size is not None else int(defaults.get("mesh_size", 7))
    transport = transport or defaults.get("transport", "in-process")
    if timeout_ms is None:
        timeout_ms = defaults.get("timeout_ms")
    if workers < 1:
        raise ConfigError("--workers must be at least 1")

    cases = load_scenarios(scenarios) if scenarios else generate(seed=seed)
    if categories:
        wanted = {c.strip() for c in categories.split(",") if c.strip()}
        unknown = wanted - set(CATEGORIES)
        if unknown:
            raise ConfigError(f"unknown categories: {sorted(unknown)}")
        cases = [c for c in cases if c.category in wanted]
    if not cases:
        raise ConfigError("no scenarios selected")

    names = [m.strip() for m in methods.split(",") if m.strip()]
    if ablate:
        names += [f"sentinel_no_{a.strip()}" for a in ablate.split(",") if a.strip()]
    unknown = [n for n in names if n not in METHOD_NAMES]
    if unknown:
        raise ConfigError(f"unknown methods: {unknown}")

    world = build_world(seed=seed)
    timeout = timeout_ms / 1000.0 if timeout_ms is not None else None
    reports = []
    detection_failure = False
    for name in names:
        report = run_method(name, cases, world, mesh_size=mesh_size,
                            transport=transport, query_timeout=timeout)
        reports.append(report)
        click.echo(f"{name:28s} P={report.precision:.3f} R={report.recall:.3f} "
                   f"F1={report.f1:.3f} acc={report.accuracy:.3f} "
                   f"p50={report.latency_ms.get('p50', 0.0):.2f}ms")
        if name == "sentinel_full" and (report.fn or report.fp):
            detection_failure = True

    if out:
        if out.endswith(".csv"):
            write_report_csv(reports, out)
        else:
            write_report_json(reports, out)
        click.echo(f"report written to {out}")
    if detection_failure:
        sys.exit(1)


@main.command("token")
@click.option("--domain", default="HR", show_default=True)
@click.option("--node", default="salary_data", show_default=True)
@click.option("--ttl", default=3600, show_default=True, type=int)
@click.option("--tamper", is_flag=True, help="Flip a taint bit after signing.")
@click.option("--out", default=None, type=click.Path(dir_okay=False, writable=True))
def token_command(domain, node, ttl, tamper, out) -> None:
    """Issue a signed taint token for a world node and verify it."""
    world = build_world()
    if domain not in world.graphs:
        raise ConfigError(f"unknown domain {domain!r}")
    graph = world.graphs[domain]
    if graph.get_node(node) is None:
        raise ConfigError(f"unknown node {node!r} in domain {domain}")
    keystore = KeyStore()
    keystore.generate(domain)
    token = issue_token(node, graph, keystore, ttl,
                        agent=f"{domain.lower()}_cli", vocabulary=Vocabulary())
    if tamper:
        from dataclasses import replace
        bits = list(token.taint_vec)
        bits[0] ^= 1
        token = replace(token, taint_vec=tuple(bits))
    ok = verify_token(token, keystore)
    wire = token_to_wire(token)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(wire, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        click.echo(json.dumps(wire, indent=2, sort_keys=True))
    click.echo(f"signature verification: {'ok' if ok else 'FAILED'}", err=True)
    if not ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
