import json
from pathlib import Path

import typer

from nph2ph.data.survival import load_csv, validate
from nph2ph.exceptions import EmptyFile, MalformedRow

EXIT_INPUT = 2


def main(path_input: str = typer.Option(..., "--input", help="Trial CSV with header time,event,group")):
    """
    Prints the validation flags of a trial CSV as JSON, e.g. {"flags": []}.
    Flags are warnings: the exit code is 0 unless the file cannot be read.
    """
    if not Path(path_input).is_file():
        typer.echo(f"File not found:\n{path_input}", err=True)
        raise typer.Exit(code=EXIT_INPUT)
    try:
        data = load_csv(path_input)
    except (MalformedRow, EmptyFile, ValueError) as err:
        typer.echo(f"Cannot read {path_input}: {err}", err=True)
        raise typer.Exit(code=EXIT_INPUT)
    typer.echo(json.dumps(validate(data).to_dict()))


if __name__ == "__main__":
    typer.run(main)
