"""
Study report output: CSV, Markdown (Jinja2) and Parquet tables.
Every file is written to a temporary sibling first and renamed into place.
"""
import logging
import math
import os
from pathlib import Path
from typing import Callable

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from nsfem.models.enums import OutputFormat
from nsfem.models.models import StudyReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["level", "h", "ndof", "newton_iters", "eF", "eq_lp", "eq_l2", "eocF", "eoc_lp", "eoc_l2"]
DIAGNOSTIC_COLUMNS = ["diameter", "chunkiness", "modular_F", "g1h", "multiplier", "mean_q", "final_residual",
                      "max_step_iters", "load_norm"]
TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"


def _fmt_error(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.3e}"


def _fmt_rate(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.3f}"


class ReportPersistence:
    """Turns a StudyReport into tables and writes them atomically"""

    def __init__(self, templates_dir: Path = TEMPLATES_DIR):
        self.env = Environment(
            loader=FileSystemLoader(str(templates_dir)),
            undefined=StrictUndefined,
            keep_trailing_newline=True,
        )
        self.env.filters["err"] = _fmt_error
        self.env.filters["rate"] = _fmt_rate

    def to_frame(self, report: StudyReport, diagnostics: bool = False) -> pd.DataFrame:
        rows = []
        for i, lvl in enumerate(report.levels):
            row = {
                "level": lvl.level,
                "h": lvl.h,
                "ndof": lvl.ndof,
                "newton_iters": lvl.newton_iters,
                "eF": lvl.e_F,
                "eq_lp": lvl.e_q_lp,
                "eq_l2": lvl.e_q_l2,
                "eocF": report.eoc_F[i - 1] if i > 0 else math.nan,
                "eoc_lp": report.eoc_lp[i - 1] if i > 0 else math.nan,
                "eoc_l2": report.eoc_l2[i - 1] if i > 0 else math.nan,
            }
            if diagnostics:
                row.update({
                    "diameter": lvl.diameter,
                    "chunkiness": lvl.chunkiness,
                    "modular_F": lvl.modular_F,
                    "g1h": lvl.g1h,
                    "multiplier": lvl.multiplier,
                    "mean_q": lvl.mean_q,
                    "final_residual": lvl.final_residual,
                    "max_step_iters": lvl.max_step_iters,
                    "load_norm": lvl.load_norm,
                })
            rows.append(row)
        columns = CSV_COLUMNS + (DIAGNOSTIC_COLUMNS if diagnostics else [])
        return pd.DataFrame(rows, columns=columns)

    def render_csv(self, report: StudyReport) -> str:
        return self.to_frame(report).to_csv(index=False, float_format="%.17g", lineterminator="\n")

    def render_markdown(self, report: StudyReport) -> str:
        cfg = report.config
        rates = report.rates
        template = self.env.get_template("report.md.j2")
        return template.render(
            config=cfg,
            element=cfg.element.value,
            convective=cfg.convective.value,
            rows=self.to_frame(report).to_dict(orient="records"),
            theory={
                "eocF": rates.velocity_rate,
                "eoc_lp": rates.pressure_lp_rate,
                "eoc_l2": rates.pressure_l2_rate,
            },
            rates=rates,
        )

    def write(self, report: StudyReport, path: Path, fmt: OutputFormat) -> Path:
        fmt = OutputFormat(fmt)
        if fmt is OutputFormat.CSV:
            return self._atomic_write(path, lambda tmp: tmp.write_text(self.render_csv(report)))
        if fmt is OutputFormat.MD:
            return self._atomic_write(path, lambda tmp: tmp.write_text(self.render_markdown(report)))
        frame = self.to_frame(report, diagnostics=True)
        return self._atomic_write(
            path, lambda tmp: frame.to_parquet(tmp, engine="pyarrow", compression="snappy", index=False)
        )

    def render(self, report: StudyReport, fmt: OutputFormat) -> str:
        fmt = OutputFormat(fmt)
        if fmt is OutputFormat.MD:
            return self.render_markdown(report)
        if fmt is OutputFormat.CSV:
            return self.render_csv(report)
        raise ValueError("parquet output needs a file path")

    def _atomic_write(self, path: Path, writer: Callable[[Path], object]) -> Path:
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        try:
            writer(tmp)
            os.replace(tmp, path)
        except BaseException:
            if tmp.exists():
                tmp.unlink()
            raise
        logger.info("Report written to %s", path)
        return path


report_persistence = ReportPersistence()
