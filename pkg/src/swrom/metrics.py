"""Relative ROM error, projection error and error tables."""

import csv
from dataclasses import asdict, dataclass

import numpy as np


def frobenius(X) -> float:
    """Frobenius norm accumulated in extended precision."""
    X = np.asarray(X, dtype=np.longdouble)
    return float(np.sqrt(np.sum(X * X)))


def relative_error(S_fom, S_rom, V) -> float:
    """``||S_fom - V S_rom||_F / ||S_fom||_F``."""
    S_fom = np.asarray(S_fom, dtype=float)
    S_rom = np.asarray(S_rom, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.shape != (S_fom.shape[0], S_rom.shape[0]) or S_fom.shape[1] != S_rom.shape[1]:
        raise ValueError(f"inconsistent shapes: S_fom {S_fom.shape}, S_rom {S_rom.shape}, V {V.shape}")
    denom = frobenius(S_fom)
    if denom == 0:
        raise ValueError("reference snapshot matrix has zero norm")
    return frobenius(S_fom - V @ S_rom) / denom


def projection_error(S_fom, V) -> float:
    """``||S_fom - V V^T S_fom||_F / ||S_fom||_F``."""
    V = np.asarray(V, dtype=float)
    return relative_error(S_fom, V.T @ np.asarray(S_fom, dtype=float), V)


def field_error(reference, approx) -> float:
    """Absolute Frobenius distance between two fields or snapshot columns."""
    return frobenius(np.asarray(reference) - np.asarray(approx))


@dataclass
class ErrorReport:
    method: str
    r: int
    relative_error: float
    projection_error: float
    parameters: str = ""

    def __post_init__(self):
        if self.relative_error < 0 or self.projection_error < 0:
            raise ValueError("errors must be nonnegative")


def write_table_csv(path, reports) -> None:
    reports = list(reports)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(ErrorReport.__dataclass_fields__))
        writer.writeheader()
        for rep in reports:
            writer.writerow(asdict(rep))


def format_table(reports) -> str:
    """Aligned text table with one ``Method | E`` row per report."""
    rows = [("Method", "r", "E", "E_proj", "parameters")]
    rows += [(rep.method, str(rep.r), f"{rep.relative_error:.3e}", f"{rep.projection_error:.3e}",
              rep.parameters) for rep in reports]
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
