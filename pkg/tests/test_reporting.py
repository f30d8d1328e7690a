"""Tests for convergence tables, snapshots and reports."""
import math

import numpy as np
import pandas as pd
import pytest

from experiments import ConvergenceRow, StabilityRow, convergence_orders
from fem import Mesh1D, l2_project
from reporting import (
    format_convergence_table,
    write_convergence_table,
    write_energy_trace,
    write_report,
    write_snapshot,
    write_stability_report,
)


def test_orders_use_rounded_errors():
    rows = [
        ConvergenceRow(N=80, h=0.0785, dt=0.0785, l2_error=8.0912e-2),
        ConvergenceRow(N=160, h=0.0393, dt=0.0393, l2_error=4.0401e-2),
        ConvergenceRow(N=320, h=0.0196, dt=0.0196, l2_error=2.0199e-2),
    ]
    table = format_convergence_table(rows)
    assert list(table.columns) == ["N", "h", "dt", "l2_error", "order"]
    assert list(table["l2_error"]) == ["8.09E-02", "4.04E-02", "2.02E-02"]
    assert table["order"][0] == ""
    assert table["order"][1] == f"{math.log2(8.09e-2 / 4.04e-2):.2f}"


def test_blown_up_rows_print_inf():
    rows = [
        ConvergenceRow(N=10, h=0.1, dt=0.1, l2_error=1e-2),
        ConvergenceRow(N=20, h=0.05, dt=0.05, l2_error=math.inf),
        ConvergenceRow(N=40, h=0.025, dt=0.025, l2_error=1e-3),
    ]
    table = format_convergence_table(rows)
    assert list(table["l2_error"]) == ["1.00E-02", "inf", "1.00E-03"]
    assert list(table["order"]) == ["", "", ""]


def test_convergence_orders():
    orders = convergence_orders([1e-2, 2.5e-3, math.inf, 1e-4])
    assert orders[0] is None
    assert orders[1] == pytest.approx(2.0)
    assert orders[2] is None and orders[3] is None


def test_table_file(tmp_path):
    path = write_convergence_table(tmp_path / "run", [ConvergenceRow(N=8, h=0.5, dt=0.25, l2_error=3.1e-3)])
    assert path.name == "table.csv"
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    assert frame.iloc[0].to_dict() == {"N": "8", "h": "0.5", "dt": "0.25", "l2_error": "3.10E-03", "order": ""}


def test_snapshot_names_and_columns(tmp_path):
    mesh = Mesh1D.uniform(0.0, 1.0, 4)
    u = l2_project(lambda x: x, mesh, 1)
    plain = write_snapshot(tmp_path, u, 0.3)
    field = write_snapshot(tmp_path, u, 1.5, samples_per_cell=2, name="E")
    assert plain.name == "snapshot_t0.3.csv"
    assert field.name == "snapshot_E_t1.5.csv"
    frame = pd.read_csv(plain)
    assert list(frame.columns) == ["x", "u"]
    assert len(frame) == 12
    assert frame["u"].to_numpy() == pytest.approx(frame["x"].to_numpy(), abs=1e-11)
    assert len(pd.read_csv(field)) == 8


def test_energy_and_stability_files(tmp_path):
    energy = pd.DataFrame(dict(step=[0, 1], t=[0.0, 0.1], u_norm_sq=[1.0, 0.9], q_term=[0.0, 0.05], functional=[1.0, 0.95]))
    path = write_energy_trace(tmp_path / "a0_0.5", energy)
    assert pd.read_csv(path)["functional"].tolist() == [1.0, 0.95]
    rows = [StabilityRow(a0=0.5, N=40, dt=0.15, stable=True, initial_norm=1.0, final_norm=0.5, steps=7)]
    frame = pd.read_csv(write_stability_report(tmp_path, rows))
    assert bool(frame["stable"][0])
    assert frame["steps"][0] == 7


def test_report_lines(tmp_path):
    path = write_report(tmp_path, dict(nt=4831, steady_time=np.float64(1.73912345), method="ein-ldg"))
    assert path.read_text().splitlines() == ["nt: 4831", "steady_time: 1.73912", "method: ein-ldg"]
