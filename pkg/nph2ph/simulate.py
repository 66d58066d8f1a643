# Shut Future Warnings
import warnings
warnings.simplefilter(action="ignore", category=FutureWarning)

import json
from pathlib import Path
from typing import Optional

import pandas as pd
import typer

from nph2ph.data.survival import serialize_csv
from nph2ph.data.timescale import build
from nph2ph.exceptions import InvalidSpec, NoInformativeFailures
from nph2ph.model.predict import kappa_piecewise, kappa_ph
from nph2ph.results.store_output import atomic_write_bytes, generate_path_output, store_series
from nph2ph.simulation.generator import SimSpec, gen_nph
from nph2ph.simulation.oracles import (
    brute_l2_argmin,
    brute_r2_argmax,
    default_candidates,
    mc_bridge_null,
    mc_kappa,
    true_beta_on_grid,
)
from nph2ph.utils.conf import load_conf_full, update_config
from nph2ph.utils.parallel import resolve_jobs

PATH_CONFIG = Path(__file__).parent / "config.toml"
ORACLES = ("kappa", "bridge", "r2argmax")
DATA_NAME = "simulated.csv"
EXIT_INPUT = 2
EXIT_UNINFORMATIVE = 3


def oracle_kappa(spec: SimSpec, pairs: int, seed: int, n_jobs: int = 1) -> pd.DataFrame:
    """
    Monte Carlo concordance next to its closed form.

    The changepoint of the spec is moved to the unit-exponential scale of
    group 0 by its cumulative hazard, baseline_hazard * tau.
    """
    if len(spec.changepoints) > 1:
        raise InvalidSpec("The kappa oracle takes at most one changepoint")
    if spec.changepoints:
        tau_e = spec.baseline_hazard * spec.changepoints[0]
        beta_spec = (tau_e,) + tuple(spec.log_hazard_ratios)
        closed = kappa_piecewise(*beta_spec)
    else:
        beta_spec = spec.log_hazard_ratios[0]
        closed = kappa_ph(beta_spec)
    result = mc_kappa(beta_spec, pairs, seed, n_jobs)
    frame = pd.DataFrame([result.to_dict()])
    frame["closed_form"] = closed
    frame["difference"] = frame["estimate"] - closed
    return frame


def oracle_bridge(spec: SimSpec, replicates: int, seed: int, levels, eps,
                  n_jobs: int = 1) -> pd.DataFrame:
    """Band calibration of the bridged process on replicates of the spec"""
    calibration = mc_bridge_null(
        2 * spec.n, replicates, seed, levels, eps, spec=spec, n_jobs=n_jobs
    )
    frame = calibration.to_frame().copy()
    frame["u1_variance"] = calibration.u1_variance
    frame["replicates"] = calibration.replicates
    return frame


def oracle_r2argmax(spec: SimSpec, n_jobs: int = 1) -> pd.DataFrame:
    """
    R2 of every default candidate on the simulated trial, with its L2
    distance to the generating beta(t).
    """
    data = gen_nph(spec)
    ts = build(data)
    candidates = default_candidates()
    best_r2, frame = brute_r2_argmax(data, ts, candidates, n_jobs=n_jobs)
    best_l2, distance = brute_l2_argmin(true_beta_on_grid(spec, ts), ts.units, candidates)
    frame = frame.merge(distance, on="name", how="left")
    frame["argmax_r2"] = frame["name"] == best_r2
    frame["argmin_l2"] = frame["name"] == best_l2
    return frame


def _fail(message: str, code: int):
    typer.echo(message, err=True)
    raise typer.Exit(code=code)


def main(
    path_spec: str = typer.Option(..., "--spec", help="Simulation spec, JSON"),
    out_dir: str = typer.Option("outputs", "--out-dir"),
    oracle: Optional[str] = typer.Option(None, help="kappa, bridge or r2argmax"),
    seed: Optional[int] = typer.Option(None, min=0, help="Overrides the spec seed"),
    replicates: Optional[int] = typer.Option(None, help="Null trials of the bridge oracle"),
    pairs: Optional[int] = typer.Option(None, help="Pairs of the kappa oracle"),
    path_config: str = typer.Option(str(PATH_CONFIG), "--path-config"),
    quiet: bool = typer.Option(False, "--quiet"),
):
    """
    Simulates a two-arm trial from a JSON spec and stores it as CSV.
    With --oracle, also runs a Monte Carlo check and stores its table.

    Parameters
    ----------
    path_spec : str
        Path to the spec JSON file
    out_dir : str, optional
        Path to the results folder
    path_config : str, optional
        Path to the config toml file
    """
    verbose = not quiet
    if oracle is not None and oracle not in ORACLES:
        _fail(f"Unknown oracle '{oracle}'. Use one of {ORACLES}", EXIT_INPUT)
    if verbose:
        print(f"\nLoading config file from {path_config}")
    try:
        config = load_conf_full(path_config)
        config = update_config(config, replicates=replicates, pairs=pairs)
    except (AssertionError, ValueError, KeyError, OSError) as err:
        _fail(f"Invalid settings: {err}", EXIT_INPUT)
    if verbose:
        print("Done\n")

    try:
        spec = SimSpec.load(path_spec)
    except OSError as err:
        _fail(f"Cannot open {path_spec}: {err}", EXIT_INPUT)
    except json.JSONDecodeError as err:
        _fail(
            f"Malformed JSON in {path_spec} at line {err.lineno}, column {err.colno}: {err.msg}",
            EXIT_INPUT,
        )
    except InvalidSpec as err:
        _fail(f"Invalid spec {path_spec}: {err}", EXIT_INPUT)
    if seed is not None:
        spec = spec.with_seed(seed)

    data = gen_nph(spec)
    path_output = generate_path_output(out_dir)
    atomic_write_bytes(path_output / DATA_NAME, serialize_csv(data))
    if verbose:
        print(f"Simulated {data.n} subjects, {data.d} events into {path_output / DATA_NAME}")

    if oracle is None:
        return
    conf = config["simulation"]
    n_jobs = resolve_jobs(config["parallel"]["threads"])
    if verbose:
        print(f"Running the {oracle} oracle")
    try:
        if oracle == "kappa":
            frame = oracle_kappa(spec, conf["pairs"], spec.seed, n_jobs)
        elif oracle == "bridge":
            frame = oracle_bridge(
                spec, conf["replicates"], spec.seed, conf["bridge_levels"],
                config["analysis"]["eps"], n_jobs,
            )
        else:
            frame = oracle_r2argmax(spec, n_jobs)
    except NoInformativeFailures as err:
        _fail(f"No informative failures: {err}", EXIT_UNINFORMATIVE)
    except (InvalidSpec, ValueError) as err:
        _fail(f"Oracle {oracle} cannot run: {err}", EXIT_INPUT)
    filename = store_series(path_output, f"oracle_{oracle}", frame, config["output"]["digits"])
    if verbose:
        print(f"Oracle table stored in {path_output / filename}")


if __name__ == "__main__":
    typer.run(main)
