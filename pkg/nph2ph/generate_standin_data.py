import os
from typing import Optional

import typer

from nph2ph.data.standins import STANDINS, load_standin
from nph2ph.data.survival import serialize_csv
from nph2ph.results.store_output import atomic_write_bytes


def main(path_output: str = "data", seed: Optional[int] = None):
    """
    Writes the simulated stand-in of every bundled trial as
    <name>_standin.csv. Each stand-in uses its own bundled seed unless
    --seed is given.
    """
    if not os.path.exists(path_output):
        os.mkdir(path_output)

    for name in STANDINS:
        data = load_standin(name, seed)
        path_dump = os.path.join(path_output, f"{name}_standin.csv")
        atomic_write_bytes(path_dump, serialize_csv(data))
        print(f"{name}: {data.n} subjects, {data.d} events -> {path_dump}")


if __name__ == "__main__":
    typer.run(main)
