"""
Record Mapper Module

Maps result objects to flat JSONL records and records to plot tables, using
the plot-table layout from the configuration.
"""

from collections import OrderedDict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from dynamics.decay_fit import LocalizationReport
from dynamics.evolution import MomentExpectation, MomentRecord
from geometry.property_suites import SuiteResult
from msa.estimators import DecayCurve, InitialBoundDecomposition, ProbabilityEstimate, WeakInteractionScan
from msa.scales import MsaParams

PlotTable = Tuple[List[str], List[List[Any]]]


class RecordMapper:
    """
    Maps estimates, scans, curves and moment series to records and plot tables.
    """

    def __init__(self, config_manager):
        """
        Args:
            config_manager: ConfigManager supplying the plot-table layout
        """
        self.config_manager = config_manager
        self.logger = structlog.get_logger(__name__)

    def estimate_record(self, estimate: ProbabilityEstimate, params: Optional[MsaParams] = None) -> Dict[str, Any]:
        record = {
            "op": estimate.op,
            "params": params.model_dump() if params is not None else None,
            "L": estimate.L,
            "n": estimate.n,
            "N": estimate.N,
            "h": estimate.h,
            "E": estimate.E,
            "interval": list(estimate.interval) if estimate.interval is not None else None,
            "trials": estimate.trials,
            "successes": estimate.successes,
            "point": estimate.point,
            "ci_lo": estimate.ci_lo,
            "ci_hi": estimate.ci_hi,
            "bound": estimate.bound,
            "status": estimate.status,
            "pass": estimate.passed,
            "seed": estimate.seed,
        }
        if estimate.details:
            record["details"] = dict(estimate.details)
        return record

    def scan_records(self, scan: WeakInteractionScan, params: MsaParams) -> List[Dict[str, Any]]:
        records = []
        for row in scan.rows:
            records.append(self.estimate_record(row.estimate, params))
            records.append(self.estimate_record(row.relaxed, params.with_mass(params.m / 2.0)))
        records.append({
            "op": "weakint_summary",
            "h_star_bound": scan.h_star_bound,
            "h_star_stable": scan.h_star_stable,
            "resolvent_checks": scan.resolvent_checks,
            "resolvent_violations": scan.resolvent_violations,
            "resolvent_skipped": scan.resolvent_skipped,
            "worst_relative_residual": scan.worst_relative_residual,
            "seed": scan.rows[0].estimate.seed if scan.rows else None,
        })
        return records

    def initial_bound_records(self, result: InitialBoundDecomposition, params: MsaParams) -> List[Dict[str, Any]]:
        record = self.estimate_record(result.singular, params)
        record["details"] = {
            **record.get("details", {}),
            "nonlocalized_frequency": result.nonlocalized_frequency,
            "resonant_frequency": result.resonant_frequency,
            "vacuous": result.vacuous,
            "holds": result.holds,
        }
        return [record]

    def decay_curve_records(self, curve: DecayCurve, seed: int, m_star: Optional[float] = None) -> List[Dict[str, Any]]:
        records = [{"op": "decay_curve", "n": curve.n, "E": curve.E, "seed": seed, **row._asdict()}
                   for row in curve.rows]
        records.append({"op": "decay_fit", "n": curve.n, "E": curve.E, "seed": seed, "mu_hat": curve.mu_hat,
                        "mu_ci": list(curve.mu_ci), "decaying": curve.decaying, "m_star": m_star})
        return records

    def suite_records(self, results: Sequence[SuiteResult], seed: int) -> List[Dict[str, Any]]:
        return [{"op": "geometry_suite", "suite": r.name, "n": r.n, "L": r.L, "checked": r.checked,
                 "exceptions": r.exceptions, "pass": r.passed, "failures": r.failures, "seed": seed}
                for r in results]

    def moment_records(self, records: Sequence[MomentRecord], expectation: MomentExpectation,
                       seed: int) -> List[Dict[str, Any]]:
        out = []
        for index, record in enumerate(records):
            out.append({"op": "moment_series", "realization": index, "s": record.s,
                        "interval": list(record.interval), "K_size": record.K_size, "origin": list(record.origin),
                        "t_max": record.t_max, "t": record.times.tolist(), "value": record.series.tolist(),
                        "sup": record.sup, "empty_projection": record.empty_projection, "seed": seed})
        out.append({"op": "moment_expectation", "realizations": expectation.realizations,
                    "mean_sup": expectation.mean_sup, "ci_lo": expectation.ci_lo, "ci_hi": expectation.ci_hi,
                    "t_max": float(expectation.times[-1]), "seed": seed})
        return out

    def localization_records(self, report: LocalizationReport, seed: int) -> List[Dict[str, Any]]:
        return [{"op": "localization_report", "median_rate": report.median_rate,
                 "fitted_fraction": report.fitted_fraction, "median_participation": report.median_participation,
                 "delocalized": report.delocalized, "mean_boundary_mass": report.mean_boundary_mass,
                 "boundary_bound": report.boundary_bound, "states": len(report.fits), "seed": seed}]

    def summary_frame(self, records: Sequence[Dict[str, Any]]) -> pd.DataFrame:
        """Scalar fields of the records as a table; nested and list fields are left out."""
        rows = [{k: v for k, v in record.items() if not isinstance(v, (dict, list, tuple, np.ndarray))}
                for record in records]
        return pd.DataFrame(rows)

    def emit_plot_data(self, records: Sequence[Dict[str, Any]]) -> Dict[str, PlotTable]:
        """
        One whitespace table per (quantity, scan axis), optionally split by a record field.

        Returns:
            OrderedDict of table name -> (columns, rows); empty when records is empty
        """
        tables: Dict[str, PlotTable] = OrderedDict()
        if not records:
            self.logger.warning("no records to plot")
            return tables

        for record in records:
            layout = self.config_manager.get_plot_table(record.get("op", ""))
            if not layout:
                continue
            name = layout["table"]
            split = layout.get("split_by")
            if split is not None:
                name = f"{name}_{split}{_label(record.get(split))}"
            columns = list(layout["columns"])
            values = [record.get(c) for c in columns]
            rows = tables.setdefault(name, (columns, []))[1]
            if isinstance(values[0], list):
                rows.extend([list(row) for row in zip(*[v if isinstance(v, list) else [v] * len(values[0])
                                                        for v in values])])
            else:
                rows.append(values)

        for name, (_, rows) in tables.items():
            rows.sort(key=lambda row: (row[0] is None, row[0] if row[0] is not None else 0))
        return tables


def _label(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)
