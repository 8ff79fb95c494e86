import json
import os

import numpy as np
import pandas as pd

from .quantum_state import GridSpec, Wavefunction


def _float_text(v):
    # shortest round-trip decimal
    return repr(float(v))


def write_table(df: pd.DataFrame, path: str) -> str:
    """Write a table as CSV with round-trip float text. Returns path written."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    df.to_csv(path, index=False, float_format=_float_text, lineterminator="\n")
    return path


def read_table(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def write_snapshot(psi: Wavefunction, path: str) -> str:
    """Snapshot file: grid comment lines, then x,re,im rows."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    grid = psi.grid
    df = pd.DataFrame({"x": grid.x, "re": psi.amplitudes.real, "im": psi.amplitudes.imag})
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# hbar={_float_text(psi.hbar)}\n")
        fh.write(f"# xmin={_float_text(grid.x_min)}\n")
        fh.write(f"# xmax={_float_text(grid.x_max)}\n")
        fh.write(f"# n={grid.n}\n")
        df.to_csv(fh, index=False, float_format=_float_text, lineterminator="\n")
    return path


def read_snapshot(path: str) -> Wavefunction:
    header = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
    df = pd.read_csv(path, comment="#", float_precision="round_trip")
    grid = GridSpec(float(header["xmin"]), float(header["xmax"]), int(header["n"]))
    return Wavefunction(grid, float(header["hbar"]), df["re"].to_numpy() + 1j * df["im"].to_numpy())


def write_record(record, path: str) -> str:
    """Dense evolution trace: t,norm,re_autocorr,im_autocorr."""
    df = pd.DataFrame({
        "t": record.times,
        "norm": record.norms,
        "re_autocorr": np.real(record.autocorrelation),
        "im_autocorr": np.imag(record.autocorrelation),
    })
    return write_table(df, path)


def write_json(payload: dict, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_scaling_report(report, csv_path: str, json_path: str):
    """hbar,value table plus {"exponent", "residual"} summary."""
    write_table(pd.DataFrame({"hbar": report.hbars, "value": report.values}), csv_path)
    write_json({"exponent": float(report.exponent), "residual": float(report.residual)}, json_path)
    return csv_path, json_path
