"""
Energy accounting, controller comparison and result exports of finished runs.

The AHU motor draws ``P = U * I * cos(phi) * sqrt(3)`` while it runs, so the energy of a run is that power times its
ON hours. Every figure is computed from the stores of a run directory and covers only its evaluation range (warm-up
days are excluded).

This module provides:

- :func:`energy_kwh` and :func:`savings_percent`
- :class:`RunData` and :func:`load_run` to read a run directory
- :class:`EnergyReport` and :func:`compare` to compare an MPC run with a manual run
- :func:`metrics_table` and :func:`export_run` to write the plot data and the monthly training metrics table

Example:
    ::

        report = compare(load_run(Path("runs/mpc")), load_run(Path("runs/manual")))
        print(f"{report.savings_percent:.2f} % saved")
        export_run(load_run(Path("runs/mpc")), Path("runs/mpc/report"))
"""

import json
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from logging import getLogger
from pathlib import Path
from typing import Any

import pandas as pd

from .ahu_data import ValidationError
from .plant import OccupancyProfile
from .record_store import RecordStore
from .scenario import ElectricalParams
from .telemetry import SensorReading, detect_gaps, parse_date

_log = getLogger(__name__)

#: Rooms whose occupants may send feedback.
ROOMS = 24

#: Columns of the movements export.
MOVEMENT_COLUMNS = ["date", "ait", "setpoint", "u", "on_minutes", "kwh"]

_METRIC_COLUMNS = ["mse", "scaled_mae", "explained_variance", "r_squared"]


def energy_kwh(on_hours: float, voltage: float, current: float, cos_phi: float) -> float:
    """
    Energy drawn by the three-phase AHU motor.

    Example::

        energy_kwh(1.0, 380.0, 15.4, 0.82)  # ~8.31

    Raises:
        ValidationError: If ``on_hours`` is negative or the motor data is not positive.
    """
    if on_hours < 0:
        raise ValidationError(f"on_hours must not be negative, got {on_hours}")
    return on_hours * ElectricalParams(voltage, current, cos_phi).power_kw


def savings_percent(manual_kwh: float, mpc_kwh: float) -> float:
    """
    Share of the manual energy the MPC saved, in percent. Negative if the MPC used more.

    Raises:
        ValidationError: If the manual run used no energy.
    """
    if not manual_kwh > 0:
        raise ValidationError("Savings are undefined for a baseline without energy use")
    return (manual_kwh - mpc_kwh) / manual_kwh * 100.0


@dataclass(frozen=True)
class RunData:
    """
    The stores and manifest of one run directory.

    Attributes:
        run_dir: Directory the run was read from.
        manifest: Content of ``run.json``.
        stores: Records of every store, by store name. Missing stores are empty.
    """

    run_dir: Path
    manifest: dict[str, Any]
    stores: dict[str, list[dict[str, Any]]]

    @property
    def start(self) -> date:
        return date.fromisoformat(self.manifest["start"])

    @property
    def end(self) -> date:
        return date.fromisoformat(self.manifest["end"])

    @property
    def electrical(self) -> ElectricalParams:
        return ElectricalParams(**self.manifest.get("electrical", {}))

    @property
    def occupancy(self) -> OccupancyProfile:
        return OccupancyProfile(**self.manifest.get("occupancy", {}))

    def records(self, name: str) -> list[dict[str, Any]]:
        """Records of store ``name`` dated within the evaluation range."""
        first = f"{self.start.isoformat()}T00:00"
        stop = f"{(self.end + timedelta(days=1)).isoformat()}T00:00"
        return [r for r in self.stores.get(name, []) if first <= r["date"] < stop]


def load_run(run_dir: Path, logger_name: str = "") -> RunData:
    """
    Read the manifest and every store of a run directory.

    Raises:
        FileNotFoundError: If the directory holds no ``run.json``.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "run.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"{run_dir} is not a run directory (no run.json)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    stores = {
        path.stem: RecordStore(path, logger_name).read_all() for path in sorted(run_dir.glob("*.jsonl"))
    }
    return RunData(run_dir, manifest, stores)


def movement_frame(run: RunData, electrical: ElectricalParams | None = None) -> pd.DataFrame:
    """Movements of the evaluation range with their energy in kWh, in the export column order."""
    electrical = electrical or run.electrical
    frame = pd.DataFrame(run.records("mpc-movements"), columns=MOVEMENT_COLUMNS[:-1] + ["controller"])
    frame["kwh"] = [
        energy_kwh(m / 60.0, electrical.voltage, electrical.current, electrical.cos_phi) for m in frame["on_minutes"]
    ]
    return frame[MOVEMENT_COLUMNS]


@dataclass(frozen=True, eq=False)
class EnergyReport:
    """
    Energy and comfort comparison of an MPC run with a manual run.

    Attributes:
        daily: One row per evaluation day with ON hours and kWh of both runs.
        total_kwh_mpc: Energy of the MPC run.
        total_kwh_manual: Energy of the manual run.
        savings_percent: ``(manual - mpc) / manual`` in percent.
        tracking_mpc: Mean ``|AIT - setpoint|`` of the MPC run over occupied decisions, None without any.
        tracking_manual: The same for the manual run.
    """

    daily: pd.DataFrame
    total_kwh_mpc: float
    total_kwh_manual: float
    savings_percent: float
    tracking_mpc: float | None
    tracking_manual: float | None

    def to_text(self) -> str:
        lines = [
            "Energy comparison (MPC vs manual)",
            "",
            self.daily.to_string(index=False, float_format=lambda v: f"{v:.3f}"),
            "",
            f"Total MPC:    {self.total_kwh_mpc:.3f} kWh",
            f"Total manual: {self.total_kwh_manual:.3f} kWh",
            f"Savings:      {self.savings_percent:.2f} %",
            f"Mean |AIT - setpoint| during occupancy: MPC {_format_optional(self.tracking_mpc)} °C, "
            f"manual {_format_optional(self.tracking_manual)} °C",
        ]
        return "\n".join(lines) + "\n"

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")


def compare(run_mpc: RunData, run_manual: RunData, electrical: ElectricalParams | None = None) -> EnergyReport:
    """
    Compare the energy use and setpoint tracking of two runs.

    Args:
        run_mpc: The MPC run.
        run_manual: The manual run.
        electrical: Motor data. Defaults to the MPC run's manifest.

    Raises:
        ValidationError: If the runs differ in evaluation range or weather seed, or the manual run used no energy.

    Example::

        report = compare(load_run(Path("runs/mpc")), load_run(Path("runs/manual")))
        report.write(Path("runs/comparison.txt"))
    """
    if (run_mpc.start, run_mpc.end) != (run_manual.start, run_manual.end):
        raise ValidationError(
            f"Runs cover different ranges: {run_mpc.start}..{run_mpc.end} vs {run_manual.start}..{run_manual.end}"
        )
    if run_mpc.manifest.get("seed") != run_manual.manifest.get("seed"):
        raise ValidationError("Runs use different weather seeds")
    electrical = electrical or run_mpc.electrical

    mpc = _daily_energy(movement_frame(run_mpc, electrical), "mpc")
    manual = _daily_energy(movement_frame(run_manual, electrical), "manual")
    days = pd.DataFrame({"day": [d.isoformat() for d in _days(run_mpc.start, run_mpc.end)]})
    daily = days.merge(mpc, on="day", how="left").merge(manual, on="day", how="left").fillna(0.0)

    total_mpc = math.fsum(movement_frame(run_mpc, electrical)["kwh"])
    total_manual = math.fsum(movement_frame(run_manual, electrical)["kwh"])
    report = EnergyReport(
        daily,
        total_mpc,
        total_manual,
        savings_percent(total_manual, total_mpc),
        tracking_error(run_mpc),
        tracking_error(run_manual),
    )
    _log.info(f"Compared runs: {total_mpc:.2f} kWh vs {total_manual:.2f} kWh ({report.savings_percent:.2f} %)")
    return report


def tracking_error(run: RunData) -> float | None:
    """Mean ``|AIT - setpoint|`` over decisions taken while the building was occupied."""
    occupancy = run.occupancy
    errors = []
    for record in run.records("mpc-movements"):
        moment = parse_date(record["date"])
        if occupancy.fraction(moment.date(), moment.hour * 60 + moment.minute) > 0:
            errors.append(abs(record["ait"] - record["setpoint"]))
    return math.fsum(errors) / len(errors) if errors else None


def metrics_table(records: list[dict[str, Any]]) -> str:
    """
    Monthly and overall training metrics with increasing and decreasing values side by side.

    Each row averages the nightly training records of one calendar month, the last row those of the entire run.
    Cells read ``increasing / decreasing``.

    Example::

        Months      | Dataset size  | MSE             | Scaled MAE      | Explained variance | R squared
        2023-01     | 10450 / 9870  | 0.0210 / 0.0190 | 0.1045 / 0.0978 | 0.9321 / 0.9410    | 0.9318 / 0.9402
        Entire run  | 10450 / 9870  | 0.0210 / 0.0190 | 0.1045 / 0.0978 | 0.9321 / 0.9410    | 0.9318 / 0.9402
    """
    header = ["Months", "Dataset size", "MSE", "Scaled MAE", "Explained variance", "R squared"]
    frame = pd.DataFrame(records, columns=["date", "direction", *_METRIC_COLUMNS, "train", "val", "test"])
    numeric = [*_METRIC_COLUMNS, "train", "val", "test"]
    frame[numeric] = frame[numeric].astype(float)
    frame["size"] = frame["train"] + frame["val"] + frame["test"]
    frame["month"] = frame["date"].str[:7]

    rows = [header]
    groups = [(month, group) for month, group in frame.groupby("month", sort=True)]
    groups.append(("Entire run", frame))
    for label, group in groups:
        means = group.groupby("direction")[["size", *_METRIC_COLUMNS]].mean()
        row = [label, _pair(means, "size", "{:.0f}")]
        row += [_pair(means, column, "{:.4f}") for column in _METRIC_COLUMNS]
        rows.append(row)

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows) + "\n"


def export_run(run: RunData, out_dir: Path) -> list[Path]:
    """
    Write the plot data and tables of a run.

    Files: ``movements.csv``, ``ait.csv``, ``energy_daily.csv``, ``fos_trends.csv``, ``gaps.csv``, ``feedback.csv``
    and ``metrics_table.txt``. Identical stores give identical files.

    Returns:
        list[Path]: The written files.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def write_csv(frame: pd.DataFrame, name: str) -> None:
        path = out_dir / name
        frame.to_csv(path, index=False, lineterminator="\n")
        written.append(path)

    movements = movement_frame(run)
    write_csv(movements, "movements.csv")
    write_csv(
        pd.DataFrame(run.records("ait-db"), columns=["date", "ait", "humidity_avg", "reporting_count"]),
        "ait.csv",
    )
    write_csv(_daily_energy(movements, "run"), "energy_daily.csv")
    write_csv(
        pd.DataFrame(
            run.records("fos-params"), columns=["date", "direction", "kp", "tau", "theta", "y_init", "source"]
        ),
        "fos_trends.csv",
    )
    write_csv(_gap_frame(run), "gaps.csv")
    write_csv(_feedback_frame(run), "feedback.csv")

    path = out_dir / "metrics_table.txt"
    path.write_text(metrics_table(run.records("training-metrics")), encoding="utf-8")
    written.append(path)
    _log.info(f"Exported {len(written)} files to {out_dir}")
    return written


# ----------------------------------------------------------------------------------------------------------------------
# Private Methods
# ----------------------------------------------------------------------------------------------------------------------


def _days(start: date, end: date) -> list[date]:
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]


def _daily_energy(movements: pd.DataFrame, label: str) -> pd.DataFrame:
    frame = movements.assign(day=movements["date"].str[:10], on_hours=movements["on_minutes"] / 60.0)
    daily = frame.groupby("day", sort=True)[["on_hours", "kwh"]].sum().reset_index()
    return daily.rename(columns={"on_hours": f"on_hours_{label}", "kwh": f"kwh_{label}"})


def _pair(means: pd.DataFrame, column: str, fmt: str) -> str:
    cells = []
    for direction in ("increasing", "decreasing"):
        cells.append(fmt.format(means.loc[direction, column]) if direction in means.index else "-")
    return " / ".join(cells)


def _gap_frame(run: RunData) -> pd.DataFrame:
    readings = [SensorReading.from_record(r) for r in run.records("sensor-db")]
    start = datetime.combine(run.start, datetime.min.time())
    stop = datetime.combine(run.end + timedelta(days=1), datetime.min.time())
    rows = [(sensor_id, slot) for sensor_id, slots in detect_gaps(readings, start, stop) for slot in slots]
    return pd.DataFrame(rows, columns=["sensor_id", "date"])


def _feedback_frame(run: RunData) -> pd.DataFrame:
    """Accepted and rejected feedback per day with the share of rooms that took part."""
    columns = ["day", "accepted", "rejected", "participants", "participation_percent"]
    records = run.records("feedback-db")
    if not records:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(records)
    frame["day"] = frame["date"].str[:10]
    daily = frame.groupby("day", sort=True).agg(
        accepted=("accepted", "sum"),
        total=("accepted", "size"),
        participants=("user_id", "nunique"),
    )
    daily["rejected"] = daily["total"] - daily["accepted"]
    daily["participation_percent"] = daily["participants"] / ROOMS * 100.0
    return daily.reset_index()[columns]


def _format_optional(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"
