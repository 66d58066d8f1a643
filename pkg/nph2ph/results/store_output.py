import json
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, Optional, Union

import jsonschema
import pandas as pd

PATH_SCHEMA = Path(__file__).parent / "report_schema.json"
REPORT_NAME = "report.json"
NON_FINITE = "non_finite"


def generate_path_output(path_output: Union[str, Path], name: Optional[str] = None) -> Path:
    """
    Generates results folder, and the sub-folder `name` inside it if given.
    """
    path_output = Path(path_output)
    if not path_output.is_dir():
        os.makedirs(path_output)
    if name is not None:
        path_output = path_output / name
        if not path_output.is_dir():
            os.mkdir(path_output)
    return path_output


def atomic_write_bytes(path: Union[str, Path], content: bytes):
    """Writes to a temporary file in the same folder, then renames it"""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def atomic_write_text(path: Union[str, Path], text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def store_series(path_output: Path, name: str, frame: pd.DataFrame, digits: int = 17) -> str:
    """
    Stores a plot series as `<name>.tsv`, header included.

    Returns
    -------
    str
        File name, relative to `path_output`.
    """
    assert frame.shape[1] > 0, f"Series {name} has no columns"
    filename = f"{name}.tsv"
    text = frame.to_csv(sep="\t", index=False, float_format=f"%.{digits}g", na_rep="nan")
    atomic_write_text(Path(path_output) / filename, text)
    return filename


def clean_report(doc, reasons: Optional[Dict[str, str]] = None, pointer: str = ""):
    """
    Replaces every NaN or infinite number in `doc` by None.

    Each replaced value gets a reason code in `reasons`, keyed by its JSON
    pointer, unless one was already recorded there.

    Returns
    -------
    doc : the cleaned copy
    reasons : dict
    """
    reasons = {} if reasons is None else reasons
    if isinstance(doc, dict):
        out = {}
        for key, value in doc.items():
            out[key], _ = clean_report(value, reasons, f"{pointer}/{key}")
        return out, reasons
    if isinstance(doc, (list, tuple)):
        out = []
        for i, value in enumerate(doc):
            item, _ = clean_report(value, reasons, f"{pointer}/{i}")
            out.append(item)
        return out, reasons
    if isinstance(doc, bool) or doc is None or isinstance(doc, str):
        return doc, reasons
    if isinstance(doc, (int, float)) or hasattr(doc, "item"):
        value = doc.item() if hasattr(doc, "item") else doc
        if isinstance(value, float) and not math.isfinite(value):
            reasons.setdefault(pointer, NON_FINITE)
            return None, reasons
        return value, reasons
    raise TypeError(f"Cannot store {type(doc).__name__} at {pointer} in the report")


def load_schema() -> dict:
    with open(PATH_SCHEMA, "r") as schema_file:
        return json.load(schema_file)


def validate_report(doc: dict):
    """Raises jsonschema.ValidationError when `doc` breaks the report schema"""
    jsonschema.validate(instance=doc, schema=load_schema())


def store_report(path_output: Path, doc: dict, reasons: Optional[Dict[str, str]] = None,
                 filename: str = REPORT_NAME) -> dict:
    """
    Cleans, validates and atomically writes the report.

    Returns
    -------
    dict
        The document as written.
    """
    doc, reasons = clean_report(doc, dict(reasons or {}))
    doc["null_reasons"] = dict(sorted(reasons.items()))
    validate_report(doc)
    text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=False)
    atomic_write_text(Path(path_output) / filename, text + "\n")
    return doc
