import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402


def _finish(xlabel, ylabel, savefig):
    plt.xlabel(xlabel)
    plt.ylabel(ylabel)
    plt.legend()
    if savefig is not None:
        plt.savefig(savefig, format="svg")
    plt.close()


def plot_step_curves(frame: pd.DataFrame, columns=None, x="t",
                     xlabel="Time", ylabel="Survival",
                     figsize=(4, 3), savefig=None):
    """
    Plots right-continuous step curves sharing one time column.

    Parameters
    ----------
    frame : pandas.DataFrame
    columns : list of str, default=None
        Curves to draw. All columns but `x` when not given.
    x : str, default="t"
    xlabel : str, default="Time"
    ylabel : str, default="Survival"
    figsize : tuple, default=(4, 3)
    savefig : str, default=None
        Path where the figure is stored, as SVG.

    """
    columns = [c for c in frame.columns if c != x] if columns is None else columns
    plt.figure(figsize=figsize)
    for column in columns:
        plt.step(frame[x], frame[column], where="post", label=column)
    _finish(xlabel, ylabel, savefig)


def plot_path_with_bands(frame: pd.DataFrame, figsize=(4, 3), savefig=None):
    """
    Plots the process, its bridge and every band pair found in `frame`
    (columns band_lo_<name> / band_hi_<name>).
    """
    plt.figure(figsize=figsize)
    plt.plot(frame["t"], frame["u_star"], label="Process")
    plt.plot(frame["t"], frame["u_bridge"], alpha=.75, label="Bridge")
    if "u_piecewise" in frame:
        plt.plot(frame["t"], frame["u_piecewise"], linewidth=.8, label="Chords")
    for column in frame.columns:
        if not column.startswith("band_hi_"):
            continue
        name = column[len("band_hi_"):]
        line = plt.plot(frame["t"], frame[column], linestyle="dashed",
                        linewidth=.8, label=name)
        plt.plot(frame["t"], frame[f"band_lo_{name}"], linestyle="dashed",
                 linewidth=.8, color=line[0].get_color())
    plt.axhline(0, color="k", linewidth=.5)
    _finish("Unit time", "U(t)", savefig)


def plot_lines(frame: pd.DataFrame, columns=None, x="t",
               xlabel="Time", ylabel="", figsize=(4, 3), savefig=None):
    """Plain polylines of the given columns against `x`"""
    columns = [c for c in frame.columns if c != x] if columns is None else columns
    plt.figure(figsize=figsize)
    for column in columns:
        values = frame[column].to_numpy(dtype=float)
        plt.plot(frame[x], np.where(np.isfinite(values), values, np.nan),
                 label=column)
    _finish(xlabel, ylabel, savefig)
