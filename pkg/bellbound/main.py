import os
import json
import typer
import datetime

from contextlib import contextmanager
from dotenv import load_dotenv
from pydantic import ValidationError
from rich import print
from rich.table import Table
from typing import List, Optional
from typing_extensions import Annotated

from bellbound import __version__
from bellbound.bounds import BoundFactory
from bellbound.errors import BellboundError, UsageError
from bellbound.inequalities import (
    InequalityFactory,
    SatwapCoefficients,
    classical_bound_formula,
    classical_max_bruteforce,
    quantum_bound,
)
from bellbound.loader.config import load_config
from bellbound.loader.export import export_results, print_results, write_record
from bellbound.loader.models import (
    BoundJob,
    EffectKind,
    InequalityType,
    Method,
    MomentSettings,
    OutputFormat,
    RankMode,
    SeesawSettings,
    SolverSettings,
    SolverType,
)
from bellbound.runner import pre_run_config, run_jobs
from bellbound.runner.table1 import print_table1, reproduce_table1, table_moment_settings
from bellbound.scenario import build_satwap_scenario
from bellbound.stores import StoreFactory


# Initialize Typer
app = typer.Typer()
version = __version__

EXIT_USAGE = 1
EXIT_PARTIAL = 2


def load_env(verbose: bool = False):
    if os.path.exists(".env"):
        if verbose:
            print("Loading .env file")
        load_dotenv(dotenv_path=".env", verbose=verbose)


@contextmanager
def exit_codes():
    """Input errors exit with 1, solver and budget failures with 2."""
    try:
        yield
    except ValidationError as e:
        print(f"[red]Invalid options:[/red] {e}")
        raise typer.Exit(code=EXIT_USAGE)
    except BellboundError as e:
        print(f"[red]{type(e).__name__}:[/red] {e}")
        raise typer.Exit(code=EXIT_USAGE if isinstance(e, ValueError) else EXIT_PARTIAL)


def parse_list(value: Optional[str], cast, flag: str) -> Optional[list]:
    if not value:
        return None
    try:
        return [cast(v) for v in value.split(",")]
    except ValueError:
        raise UsageError(f"{flag} expects a comma separated list, got {value}")


def parse_sign(value: str) -> int:
    signs = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if value not in signs:
        raise UsageError(f"--sign-last expects + or -, got {value}")
    return signs[value]


def parse_pins(values: Optional[List[str]]) -> dict:
    pins = {}
    for item in values or []:
        label, sep, value = item.rpartition("=")
        if not sep or not label:
            raise UsageError(f"--pin-block expects LABEL=VALUE, got {item}")
        try:
            pins[label] = float(value)
        except ValueError:
            raise UsageError(f"--pin-block expects a number after '=', got {item}")
    return pins


def settings(model, **kwargs):
    return model(**{k: v for k, v in kwargs.items() if v is not None})


@app.callback()
def callback():
    """
    bellbound computes lower and upper bounds on the quantum value of Bell
    inequalities at fixed local dimensions, including inequalities whose
    parties measure overlapping subsystems.
    """
    print(
        f"[{datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')}] [bold red]Running bellbound version:[/bold red] [green]{version}[/green] :boom:\n"
    )


@app.command()
def run(
    input_config: Annotated[str, typer.Argument(help="The path for the file to read")],
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Print to stdout the parsed files")
    ] = False,
    show_ids: Annotated[
        bool, typer.Option("--show-ids", "-i", help="Print record ids to results table")
    ] = False,
    skip_export: Annotated[
        bool, typer.Option("--skip-export", "-s", help="Skip exporting results")
    ] = False,
):
    """
    Run every bound job of a YAML config.
    """
    load_env(verbose)
    with exit_codes():
        config = load_config(input_config, context=dict(os.environ), verbose=verbose)
        context = pre_run_config(config, skip_store=skip_export, verbose=verbose)
        results = run_jobs(
            context["run_id"], context["config"], context["store"], verbose
        )
        if not skip_export:
            export_results(
                context["run_id"], context["store"], run_ts=context["run_ts"], verbose=verbose
            )
    print_results(results, show_ids)
    print(
        f"[{context['run_ts'].strftime('%Y-%m-%d %H:%M:%S')}] [green]Finished Run[/green] :rocket:"
    )
    if not all(r.complete for r in results):
        raise typer.Exit(code=EXIT_PARTIAL)


@app.command()
def compile(
    input_config: Annotated[str, typer.Argument(help="The path for the file to read")],
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Print to stdout the parsed files")
    ] = False,
):
    """
    Validate a config: jobs, scenarios and functionals are built, nothing is solved.
    """
    load_env(verbose)
    with exit_codes():
        config = load_config(input_config, context=dict(os.environ), verbose=verbose)
        pre_run_config(config, compile_only=True, verbose=verbose)
    print(
        f"[{datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')}] [green]Finished Config compilation[/green] :rocket:"
    )


@app.command()
def bound(
    inequality: Annotated[
        InequalityType, typer.Option("--inequality", help="J, K or satwap")
    ] = InequalityType.J,
    d: Annotated[int, typer.Option("--d", help="Outcomes per measurement")] = 2,
    dims: Annotated[
        Optional[str], typer.Option("--dims", help="Local dimensions, e.g. 3,2,2")
    ] = None,
    m: Annotated[int, typer.Option("--m", help="Settings per party")] = 2,
    method: Annotated[Method, typer.Option("--method")] = Method.seesaw,
    degree: Annotated[Optional[int], typer.Option("--degree", help="Monomial degree")] = None,
    restarts: Annotated[Optional[int], typer.Option("--restarts")] = None,
    seed: Annotated[int, typer.Option("--seed")] = 0,
    sign_last: Annotated[
        str, typer.Option("--sign-last", help="Sign of the A|BC block of K, + or -")
    ] = "+",
    weights: Annotated[
        Optional[str], typer.Option("--weights", help="Block weights, e.g. 2,1")
    ] = None,
    pin_j: Annotated[
        Optional[float], typer.Option("--pin-J", help="Keep A|B + A|C at this value")
    ] = None,
    pin_block: Annotated[
        Optional[List[str]], typer.Option("--pin-block", help="LABEL=VALUE, e.g. A|B=1.7071")
    ] = None,
    rank_mode: Annotated[Optional[RankMode], typer.Option("--rank-mode")] = None,
    extra_words: Annotated[
        Optional[str], typer.Option("--extra-words", help="Party patterns, e.g. AAA,ABC")
    ] = None,
    cap_deterministic: Annotated[
        bool,
        typer.Option("--cap-deterministic", help="Bound deterministic rank classes analytically"),
    ] = False,
    no_symmetrize: Annotated[
        bool, typer.Option("--no-symmetrize", help="Skip the B<->C reduction")
    ] = False,
    effect_kind: Annotated[Optional[EffectKind], typer.Option("--effect-kind")] = None,
    j_upper_bound: Annotated[
        Optional[float], typer.Option("--j-upper-bound", help="Known bound on the J part of K")
    ] = None,
    solver: Annotated[Optional[SolverType], typer.Option("--solver")] = None,
    jobs: Annotated[Optional[int], typer.Option("--jobs", "-j", help="Worker processes")] = None,
    out: Annotated[Optional[str], typer.Option("--out", help="Write the record here")] = None,
    format: Annotated[OutputFormat, typer.Option("--format")] = OutputFormat.json,
    store: Annotated[
        Optional[str], typer.Option("--store", help="Also export to this duckdb file")
    ] = None,
    verbose: Annotated[bool, typer.Option("--verbose", "-v")] = False,
):
    """
    Compute one bound and write its record.
    """
    load_env(verbose)
    with exit_codes():
        if (pin_j is not None or pin_block) and method != Method.seesaw:
            raise UsageError("Pins apply to --method seesaw only")
        job = BoundJob(
            name=f"{inequality.value} {method.value}",
            inequality=inequality,
            d=d,
            m=m,
            dims=parse_list(dims, int, "--dims"),
            sign_last_term=parse_sign(sign_last),
            weights=parse_list(weights, float, "--weights"),
            method=method,
            seesaw=settings(
                SeesawSettings, restarts=restarts, seed=seed, effect_kind=effect_kind, jobs=jobs
            ),
            moment=settings(
                MomentSettings,
                degree=degree,
                rank_mode=rank_mode,
                extra_words=parse_list(extra_words, str, "--extra-words"),
                cap_deterministic=cap_deterministic,
                seed=seed,
                symmetrize=not no_symmetrize,
                jobs=jobs,
            ),
            solver=settings(SolverSettings, type=solver),
            pin_j=pin_j,
            pin_blocks=parse_pins(pin_block),
            j_upper_bound=j_upper_bound,
        )
        target = StoreFactory.create_store(store, verbose) if store else None
        context = pre_run_config({"jobs": [job.model_dump()]}, skip_store=True)
        record = BoundFactory.create_bound(context["run_id"], job, target).run(verbose)[0]
        if out:
            write_record(record, out, format)
    print_results([record])
    if not record.complete:
        raise typer.Exit(code=EXIT_PARTIAL)


@app.command()
def table1(
    rows: Annotated[
        Optional[List[str]], typer.Option("--rows", help="J2, K2 or a row such as J2:3")
    ] = None,
    budget: Annotated[
        Optional[float], typer.Option("--budget", help="Time budget in minutes")
    ] = None,
    restarts: Annotated[Optional[int], typer.Option("--restarts")] = None,
    seed: Annotated[int, typer.Option("--seed")] = 0,
    degree: Annotated[Optional[int], typer.Option("--degree")] = None,
    rank_mode: Annotated[Optional[RankMode], typer.Option("--rank-mode")] = None,
    extra_words: Annotated[
        Optional[str], typer.Option("--extra-words", help="Party patterns, e.g. AAA,ABC")
    ] = None,
    jobs: Annotated[Optional[int], typer.Option("--jobs", "-j")] = None,
    out: Annotated[Optional[str], typer.Option("--out", help="Write the rows as JSON")] = None,
    store: Annotated[Optional[str], typer.Option("--store")] = None,
    verbose: Annotated[bool, typer.Option("--verbose", "-v")] = False,
):
    """
    Reproduce the J2 / K2 bound table next to its published values.
    """
    load_env(verbose)
    with exit_codes():
        context = pre_run_config({"jobs": []}, skip_store=True)
        result = reproduce_table1(
            context["run_id"],
            rows=rows,
            budget_minutes=budget,
            seesaw=settings(SeesawSettings, restarts=restarts, seed=seed, jobs=jobs),
            moment=table_moment_settings(
                degree=degree,
                rank_mode=rank_mode,
                extra_words=parse_list(extra_words, str, "--extra-words"),
                seed=seed,
                jobs=jobs,
            ),
            store=StoreFactory.create_store(store, verbose) if store else None,
            verbose=verbose,
        )
    print_table1(result)
    if out:
        with open(out, "w") as stream:
            json.dump([row.model_dump() for row in result], stream, indent=2)
    if not all(row.complete for row in result):
        raise typer.Exit(code=EXIT_PARTIAL)


@app.command()
def fixture(
    path: Annotated[str, typer.Argument(help="Strategy file")],
    reuse_dave: Annotated[
        Optional[str],
        typer.Option("--reuse-for-dave", help="Lift a J strategy to K reusing A|B or A|C"),
    ] = None,
    sign_last: Annotated[str, typer.Option("--sign-last")] = "+",
    out: Annotated[Optional[str], typer.Option("--out")] = None,
    format: Annotated[OutputFormat, typer.Option("--format")] = OutputFormat.json,
    verbose: Annotated[bool, typer.Option("--verbose", "-v")] = False,
):
    """
    Evaluate a stored strategy and print its value per block.
    """
    with exit_codes():
        job = BoundJob(
            name=os.path.basename(path),
            method=Method.evaluate,
            fixture=path,
            reuse_for_dave=reuse_dave,
            sign_last_term=parse_sign(sign_last),
        )
        context = pre_run_config({"jobs": [job.model_dump()]}, skip_store=True)
        record = BoundFactory.create_bound(context["run_id"], job).run(verbose)[0]
        if out:
            write_record(record, out, format)
    print_results([record])
    if record.extras.get("max_repair"):
        print(f"Largest effect repair: {record.extras['max_repair']:.2e}")
    if record.extras.get("state_source") == "reconstructed":
        print(
            "State rebuilt as the top eigenvector of the fixture measurements "
            f"(printed state gives {record.extras.get('printed_state_value', float('nan')):.4f})"
        )


@app.command("satwap-info")
def satwap_info(
    m: Annotated[int, typer.Option("--m")] = 2,
    d: Annotated[int, typer.Option("--d")] = 2,
    max_assignments: Annotated[int, typer.Option("--max-assignments")] = 10**7,
):
    """
    Coefficients, classical and quantum bounds of one SATWAP block.
    """
    with exit_codes():
        coefficients = SatwapCoefficients.compute(m, d)
        scenario = build_satwap_scenario(m, d)
        brute = classical_max_bruteforce(
            InequalityFactory.create_functional(scenario), max_assignments
        )
        formula = classical_bound_formula(m, d)
        quantum = quantum_bound(m, d)
    table = Table("k", "alpha_k", "beta_k")
    for k, (a, b) in enumerate(zip(coefficients.alpha, coefficients.beta)):
        table.add_row(str(k), f"{a:.6f}", f"{b:.6f}")
    print(table)
    verdict = abs(formula - brute) <= 1e-9
    print(f"classical (formula):     {formula:.6f}")
    print(f"classical (brute force): {brute:.6f}")
    print(f"quantum:                 {quantum:.6f}")
    print(
        "chain-wrap convention: "
        + ("[green]formula matches brute force[/green]" if verdict else "[red]mismatch[/red]")
    )
    if not verdict:
        raise typer.Exit(code=EXIT_PARTIAL)


if __name__ == "__main__":
    app()
