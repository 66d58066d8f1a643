# Shut Future Warnings
import warnings
warnings.simplefilter(action="ignore", category=FutureWarning)

import hashlib
import re
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
import typer

from nph2ph import __version__
from nph2ph.data.survival import (
    StepCurve,
    TrialData,
    kaplan_meier,
    load_csv,
    serialize_csv,
    validate,
)
from nph2ph.data.timescale import TimeScale, build
from nph2ph.exceptions import EmptyFile, MalformedRow, NoInformativeFailures
from nph2ph.model.beta import BetaFunction
from nph2ph.model.predict import (
    PredictSummary,
    conditional_survival,
    exponential_changepoint,
    kappa_piecewise,
    kappa_ph,
    km_distance,
    landmark_analysis,
    psi,
    r2,
)
from nph2ph.model.process import default_bands, effect_path, fit_diagnostic, path_frame
from nph2ph.model.score import fit_constant, risk_table
from nph2ph.model.transform import legendre_model, multi_changepoint, piecewise_path
from nph2ph.results.plot_output import store_plots
from nph2ph.results.store_output import (
    atomic_write_bytes,
    generate_path_output,
    store_report,
    store_series,
)
from nph2ph.simulation.oracles import mc_kappa
from nph2ph.utils.conf import load_conf_full, update_config
from nph2ph.utils.format_list import parse_float_list
from nph2ph.utils.parallel import resolve_jobs
from nph2ph.utils.random import replicate_seed

PATH_CONFIG = Path(__file__).parent / "config.toml"
INPUT_COPY = "input.csv"
NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError)
# Exit codes
EXIT_INPUT = 2
EXIT_UNINFORMATIVE = 3
EXIT_NUMERIC = 4


def reason_code(err: Exception) -> str:
    """Snake-case name of the exception class, e.g. 'segment_too_small'"""
    if isinstance(err, NUMERIC_ERRORS):
        return "numeric_failure"
    return re.sub(r"(?<!^)(?=[A-Z])", "_", type(err).__name__).lower()


def _step_frame(curve: StepCurve, name: str) -> pd.DataFrame:
    """Step curve with its starting value at t = 0 prepended"""
    return pd.DataFrame(
        {
            "t": np.concatenate([[0.0], curve.time]),
            name: np.concatenate([[curve.start], curve.value]),
        }
    )


class Analysis:
    """
    Runs every stage of the pipeline on one trial and collects the report
    blocks, the plot series and the reason codes of the null fields.
    """

    def __init__(self, data: TrialData, config: dict, verbose: bool = True):
        self.data = data
        self.config = config
        self.verbose = verbose
        self.reasons: Dict[str, str] = {}
        self.series: Dict[str, pd.DataFrame] = {}
        self.failed = False
        conf = config["analysis"]
        self.seed = int(config["simulation"]["seed"])
        self.n_jobs = resolve_jobs(config["parallel"]["threads"])
        self.bands = default_bands(conf["bands"], *conf["eps"])
        self.ts: Optional[TimeScale] = None
        self.table = None

    def log(self, message: str):
        if self.verbose:
            print(message)

    def _stage(self, pointer: str, func, *args):
        """Runs an optional stage. Domain errors leave the block null with a
        reason; numeric errors also mark the run as failed."""
        try:
            return func(*args)
        except NUMERIC_ERRORS as err:
            self.failed = True
            self.reasons[pointer] = reason_code(err)
        except ValueError as err:
            self.reasons[pointer] = reason_code(err)
        self.log(f"  skipped: {self.reasons[pointer]}")
        return None

    def _kappa_mc(self, index: int, beta_spec):
        pairs = int(self.config["analysis"]["kappa_pairs"])
        return mc_kappa(beta_spec, pairs, replicate_seed(self.seed, index), self.n_jobs)

    def _prediction(self, beta: BetaFunction, kappa: Optional[float], beta_spec, index: int) -> dict:
        explained = r2(self.table, self.ts, beta)
        if kappa is None:
            summary = PredictSummary(explained, np.nan, np.nan, beta)
        else:
            mc = self._kappa_mc(index, beta_spec)
            summary = PredictSummary(
                explained, kappa, psi(kappa), beta, mc.estimate, mc.se
            )
        out = summary.to_dict()
        curves = conditional_survival(self.data, self.ts, beta)
        out["km_distance"] = km_distance(curves, self.data)
        return out, curves

    def _diagnose(self, name: str, beta) -> dict:
        path = effect_path(self.table, self.ts, beta)
        diagnostic = fit_diagnostic(path, self.bands)
        self.series[f"effect_path_{name}"] = path_frame(path, diagnostic)
        return diagnostic.to_dict()

    def _beta_series(self, name: str, beta: BetaFunction):
        self.series[f"beta_{name}"] = beta.on_grid(self.config["analysis"]["beta_grid"])

    def input_block(self) -> dict:
        digest = hashlib.sha256(serialize_csv(self.data)).hexdigest()
        n0, n1 = self.data.n_per_group
        d0, d1 = self.data.d_per_group
        return {
            "sha256": digest,
            "n": self.data.n,
            "d": self.data.d,
            "k": self.ts.k,
            "n_per_group": [n0, n1],
            "d_per_group": [d0, d1],
            "excluded_failures": int(self.ts.excluded.size),
            "flags": validate(self.data).flags,
        }

    def ph(self) -> dict:
        self.log("Fitting proportional hazards")
        fit = fit_constant(self.table)
        beta = BetaFunction.constant(fit.beta_hat)
        prediction, curves = self._prediction(beta, kappa_ph(fit.beta_hat), fit.beta_hat, 0)
        self.series["conditional_ph"] = curves.to_frame()
        self._beta_series("ph", beta)
        if not np.isfinite(fit.se):
            self.reasons["/ph/fit/se"] = "monotone_likelihood"
        return {
            "fit": fit.to_dict(),
            "prediction": prediction,
            "diagnostics": self._diagnose("ph", beta),
        }

    def drift(self) -> dict:
        return {"diagnostics": self._diagnose("null", 0.0)}

    def changepoint(self) -> dict:
        count = self.config["analysis"]["changepoints"]
        self.log(f"Searching {count} changepoint(s)")
        fits = multi_changepoint(
            self.table, self.ts, count, self.config["analysis"]["min_seg"], self.n_jobs
        )
        first = fits[0]
        beta = first.beta
        points = []
        for fit in fits:
            points.append(
                {
                    "tau": fit.tau,
                    "tau_original": fit.tau_original,
                    "tau_exponential": exponential_changepoint(self.data, self.ts, fit.tau),
                    "slope_before": fit.slope_before,
                    "slope_after": fit.slope_after,
                    "ratio": fit.ratio,
                }
            )
        if count == 1:
            tau_e = points[0]["tau_exponential"]
            spec = (tau_e,) + tuple(beta.levels)
            kappa = kappa_piecewise(*spec)
        else:
            spec, kappa = None, None
            self.reasons["/changepoint/prediction/kappa"] = "two_changepoints"
            self.reasons["/changepoint/prediction/psi"] = "two_changepoints"
            self.reasons["/changepoint/prediction/kappa_mc"] = "two_changepoints"
            self.reasons["/changepoint/prediction/kappa_mc_se"] = "two_changepoints"
        prediction, curves = self._prediction(beta, kappa, spec, 1)
        self.series["conditional_piecewise"] = curves.to_frame()
        self._beta_series("piecewise", beta)
        diagnostics = self._diagnose("piecewise", beta)
        drift = effect_path(self.table, self.ts, 0.0)
        self.series["effect_path_piecewise"]["u_piecewise"] = piecewise_path(
            drift, tuple(point["tau"] for point in points)
        )
        return {
            "count": count,
            "changepoints": points,
            "beta": beta.to_dict(),
            "fit": first.fit.to_dict(),
            "loglik_gain": first.loglik_gain,
            "r2_single": first.r2_single,
            "prediction": prediction,
            "diagnostics": diagnostics,
        }

    def legendre(self) -> dict:
        conf = self.config["analysis"]
        self.log(f"Fitting Legendre polynomials of order {conf['legendre_order']}")
        path_fit, beta, fit = legendre_model(
            self.table, self.ts, conf["legendre_order"], conf["d2max"]
        )
        self.reasons.setdefault("/legendre/prediction/kappa", "time_varying_beta")
        self.reasons.setdefault("/legendre/prediction/psi", "time_varying_beta")
        self.reasons.setdefault("/legendre/prediction/kappa_mc", "time_varying_beta")
        self.reasons.setdefault("/legendre/prediction/kappa_mc_se", "time_varying_beta")
        prediction, curves = self._prediction(beta, None, None, 2)
        self.series["conditional_legendre"] = curves.to_frame()
        self._beta_series("legendre", beta)
        out = path_fit.to_dict()
        out.update(
            {
                "beta": beta.to_dict(),
                "fit": fit.to_dict(),
                "prediction": prediction,
                "diagnostics": self._diagnose("legendre", beta),
            }
        )
        return out

    def landmark(self, changepoint: Optional[dict]) -> Optional[dict]:
        t0 = self.config["analysis"]["landmark"]
        if t0 is None:
            self.reasons["/landmark"] = "not_requested"
            return None
        if t0 == "auto":
            if changepoint is None:
                self.reasons["/landmark"] = "no_changepoint"
                return None
            t0 = changepoint["changepoints"][0]["tau_original"]
        self.log(f"Landmark analysis at t0 = {t0:.4g}")
        result = landmark_analysis(self.data, t0)
        for group, curve in result.curves.items():
            self.series[f"landmark_group{group}"] = _step_frame(curve, "surv")
        return result.to_dict()

    def run(self) -> dict:
        """
        Builds the report document. Raises NoInformativeFailures when the
        trial has no failure with both groups at risk.
        """
        conf = self.config["analysis"]
        self.ts = build(self.data, conf["exclude_uninformative"])
        self.table = risk_table(self.data, self.ts)
        for group in (0, 1):
            self.series[f"km_group{group}"] = _step_frame(kaplan_meier(self.data, group), "surv")
        self.series["timescale"] = self.ts.to_frame()

        doc = {
            "tool": {"name": "nph2ph", "version": __version__},
            "seed": self.seed,
            "input": self.input_block(),
            "settings": {
                "changepoints": conf["changepoints"],
                "min_seg": conf["min_seg"],
                "legendre_order": conf["legendre_order"],
                "d2max": conf["d2max"],
                "bands": list(conf["bands"]),
                "eps": list(conf["eps"]),
                "landmark": conf["landmark"],
                "exclude_uninformative": conf["exclude_uninformative"],
                "kappa_pairs": conf["kappa_pairs"],
            },
        }
        doc["ph"] = self._stage("/ph", self.ph)
        doc["drift"] = self._stage("/drift", self.drift)
        if conf["changepoints"] > 0:
            doc["changepoint"] = self._stage("/changepoint", self.changepoint)
        else:
            doc["changepoint"] = None
            self.reasons["/changepoint"] = "not_requested"
        if conf["legendre_order"] > 0:
            doc["legendre"] = self._stage("/legendre", self.legendre)
        else:
            doc["legendre"] = None
            self.reasons["/legendre"] = "not_requested"
        doc["landmark"] = self._stage("/landmark", self.landmark, doc["changepoint"])
        return doc


def _fail(message: str, code: int):
    typer.echo(message, err=True)
    raise typer.Exit(code=code)


def main(
    path_input: str = typer.Option(..., "--input", help="Trial CSV with header time,event,group"),
    out_dir: str = typer.Option("outputs", "--out-dir", help="Folder of the report and series"),
    changepoints: Optional[int] = typer.Option(None, help="0, 1 or 2"),
    legendre_order: Optional[int] = typer.Option(None, help="0 skips the Legendre fit"),
    bands: Optional[str] = typer.Option(None, help="Band levels, e.g. 0.90,0.999"),
    eps: Optional[str] = typer.Option(None, help="Standardized window, e.g. 0.05,0.95"),
    landmark: Optional[str] = typer.Option(None, help="auto, a study time, or none"),
    seed: Optional[int] = typer.Option(None, min=0),
    svg: Optional[bool] = typer.Option(None, "--svg/--no-svg", help="Also render SVG figures"),
    path_config: str = typer.Option(str(PATH_CONFIG), "--path-config"),
    quiet: bool = typer.Option(False, "--quiet"),
):
    """
    Analyses a two-arm trial: proportional hazards fit, bridged process
    diagnostics, changepoint and Legendre re-expressions, predictive
    metrics and landmark curves. Stores report.json and the plot series
    in the output folder.

    Parameters
    ----------
    path_input : str
        Path to the trial CSV
    out_dir : str, optional
        Path to the results folder
    path_config : str, optional
        Path to the config toml file
    """
    verbose = not quiet
    if verbose:
        print(f"\nLoading config file from {path_config}")
    try:
        config = load_conf_full(path_config)
        config = update_config(
            config,
            changepoints=changepoints,
            legendre_order=legendre_order,
            bands=None if bands is None else parse_float_list(bands),
            eps=None if eps is None else parse_float_list(eps),
            landmark=landmark,
            seed=seed,
            svg=svg,
        )
    except (AssertionError, ValueError, KeyError, OSError) as err:
        _fail(f"Invalid settings: {err}", EXIT_INPUT)
    if verbose:
        print("Done\n")

    if not Path(path_input).is_file():
        _fail(f"File not found:\n{path_input}", EXIT_INPUT)
    try:
        data = load_csv(path_input)
    except (MalformedRow, EmptyFile) as err:
        _fail(f"Cannot read {path_input}: {err}", EXIT_INPUT)
    except ValueError as err:
        _fail(f"Invalid data in {path_input}: {err}", EXIT_INPUT)
    if verbose:
        print(f"Loaded {data.n} subjects, {data.d} events\n")

    analysis = Analysis(data, config, verbose=verbose)
    try:
        doc = analysis.run()
    except NoInformativeFailures as err:
        _fail(f"No informative failures: {err}", EXIT_UNINFORMATIVE)

    path_output = generate_path_output(out_dir)
    atomic_write_bytes(path_output / INPUT_COPY, serialize_csv(data))
    digits = config["output"]["digits"]
    doc["series"] = {
        name: store_series(path_output, name, frame, digits)
        for name, frame in sorted(analysis.series.items())
    }
    if config["output"]["svg"]:
        doc["figures"] = store_plots(path_output, dict(sorted(analysis.series.items())))
    store_report(path_output, doc, analysis.reasons, config["output"]["report"])
    if verbose:
        print(f"Report stored in {path_output}")

    if analysis.failed:
        _fail("Numeric failure, partial report stored", EXIT_NUMERIC)


if __name__ == "__main__":
    typer.run(main)
