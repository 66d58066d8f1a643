from pathlib import Path
from typing import Dict, List

import pandas as pd

from nph2ph.utils.plot import plot_lines, plot_path_with_bands, plot_step_curves


def store_plots(path_output: Path, series: Dict[str, pd.DataFrame], figsize=(4, 3)) -> List[str]:
    """
    Renders every plot series as `<name>.svg` next to its TSV.

    Returns
    -------
    list of str
        File names of the figures, relative to `path_output`.
    """
    path_output = Path(path_output)
    stored = []
    for name, frame in series.items():
        savefig = path_output / f"{name}.svg"
        if name.startswith("effect_path_"):
            plot_path_with_bands(frame, figsize=figsize, savefig=savefig)
        elif name.startswith("conditional_"):
            plot_step_curves(frame, columns=["surv_0", "surv_1"],
                             figsize=figsize, savefig=savefig)
        elif name.startswith(("km_", "landmark_")):
            plot_step_curves(frame, figsize=figsize, savefig=savefig)
        elif name == "timescale":
            plot_step_curves(frame, x="original", columns=["unit"],
                             ylabel="Unit time", figsize=figsize, savefig=savefig)
        else:
            plot_lines(frame, xlabel="Unit time", ylabel="beta(t)",
                       figsize=figsize, savefig=savefig)
        stored.append(savefig.name)
    return stored
