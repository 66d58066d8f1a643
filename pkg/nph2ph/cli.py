import typer

from nph2ph import analyze, simulate, validate

app = typer.Typer(help="Non-proportional to proportional hazards analysis of two-arm trials")
app.command("analyze")(analyze.main)
app.command("simulate")(simulate.main)
app.command("validate")(validate.main)


if __name__ == "__main__":
    app()
