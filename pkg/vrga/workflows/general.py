import fnmatch
import logging
from pathlib import Path
from typing import Mapping, Sequence

import pandas as pd

from .frame_skip import ERROR_COLUMNS, MEANS_COLUMNS
from .interp import BENCH_COLUMNS, LERP_SLERP_COLUMNS
from .netsim import QOE_COLUMNS, SAVINGS_COLUMNS

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"

# file name pattern -> header
SCHEMAS = {
    "qoe.csv": QOE_COLUMNS,
    "savings.csv": SAVINGS_COLUMNS,
    "errors_n*.csv": ERROR_COLUMNS,
    "means.csv": MEANS_COLUMNS,
    "bench.csv": BENCH_COLUMNS,
    "lerp_vs_slerp.csv": LERP_SLERP_COLUMNS,
}


def schema_for(fp: Path):
    for pattern, columns in SCHEMAS.items():
        if fnmatch.fnmatch(Path(fp).name, pattern):
            return columns
    return None


def write_csv(data: pd.DataFrame, fp: Path) -> Path:
    fp = Path(fp)
    columns = schema_for(fp)
    assert columns is None or list(data.columns) == list(
        columns
    ), f"{fp.name} does not follow its schema"
    fp.parent.mkdir(parents=True, exist_ok=True)
    logger.debug(f"Writing file {fp}")
    data.to_csv(fp, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return fp


def write_gnuplot_data(blocks: Mapping[str, pd.DataFrame], fp: Path) -> Path:
    """Whitespace separated data, one gnuplot index per block."""
    fp = Path(fp)
    fp.parent.mkdir(parents=True, exist_ok=True)
    parts = []
    for name, block in blocks.items():
        text = block.to_csv(
            sep=" ",
            index=False,
            header=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
        )
        parts.append(f"# {name}\n# {' '.join(block.columns)}\n{text}")
    logger.debug(f"Writing file {fp}")
    fp.write_text("\n\n".join(parts), encoding="utf-8", newline="\n")
    return fp


def write_gnuplot_script(
    fp: Path,
    data_file: str,
    series: Sequence[tuple[int, str, str]],
    title: str,
    xlabel: str,
    ylabel: str,
) -> Path:
    """series holds (block index, using expression, legend title)."""
    fp = Path(fp)
    fp.parent.mkdir(parents=True, exist_ok=True)
    plots = ", \\\n     ".join(
        f"'{data_file}' index {index} using {using} with lines title '{legend}'"
        for index, using, legend in series
    )
    script = "\n".join(
        [
            "set terminal pngcairo size 1000,600",
            f"set output '{Path(fp).stem}.png'",
            f"set title '{title}'",
            f"set xlabel '{xlabel}'",
            f"set ylabel '{ylabel}'",
            "set key outside right",
            "set grid",
            f"plot {plots}",
            "",
        ]
    )
    fp.write_text(script, encoding="utf-8", newline="\n")
    return fp


def validate_outputs(output_dir: Path) -> list[str]:
    """Check every CSV below output_dir against its fixed header."""
    problems = []
    for fp in sorted(Path(output_dir).rglob("*.csv")):
        columns = schema_for(fp)
        if columns is None:
            problems.append(f"{fp}: no known schema")
            continue
        try:
            data = pd.read_csv(fp)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as error:
            problems.append(f"{fp}: unreadable ({error})")
            continue
        if list(data.columns) != list(columns):
            problems.append(
                f"{fp}: header {','.join(data.columns)} does not match {','.join(columns)}"
            )
    return problems
