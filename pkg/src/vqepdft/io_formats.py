"""Readers and writers for the on-disk formats used by the workbench.

* FCIDUMP (Molpro namelist header followed by ``value i j k l`` lines).
  Orbital indices are 1-based on disk and 0-based in memory.
* Per-conformation frame tables (CSV, header
  ``frame,delta_g_ev,lambda_ev[,h_da_ev,h_da_sq_ev2]``).
* Result documents: deterministic JSON-shaped text with sorted keys and
  numbers printed to 12 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ParseError

__all__ = [
    "FcidumpRecord",
    "FrameRow",
    "FrameTable",
    "FourPointEnergies",
    "parse_fcidump",
    "read_fcidump",
    "write_fcidump",
    "parse_frame_table",
    "read_frame_table",
    "merge_frame_tables",
    "emit_results",
    "parse_results",
    "format_number",
]

_DUP_TOL = 1e-10


# ---------------------------------------------------------------------------
# FCIDUMP
# ---------------------------------------------------------------------------


@dataclass
class FcidumpRecord:
    """Active-space integrals as stored in an FCIDUMP file.

    ``one_body`` is an ``(n, n)`` array and ``two_body`` an ``(n, n, n, n)``
    array in chemist notation ``(pq|rs)``, both 0-based and fully symmetrised.
    """

    n_orbitals: int
    n_electrons: int
    spin_2s: int
    core_energy: float
    one_body: np.ndarray
    two_body: np.ndarray
    point_group_irreps: list[int] = field(default_factory=list)

    def h1(self, p: int, q: int) -> float:
        return float(self.one_body[p, q])

    def eri(self, p: int, q: int, r: int, s: int) -> float:
        return float(self.two_body[p, q, r, s])

    @property
    def n_alpha(self) -> int:
        return (self.n_electrons + self.spin_2s) // 2

    @property
    def n_beta(self) -> int:
        return (self.n_electrons - self.spin_2s) // 2

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FcidumpRecord):
            return NotImplemented
        return (
            self.n_orbitals == other.n_orbitals
            and self.n_electrons == other.n_electrons
            and self.spin_2s == other.spin_2s
            and self.core_energy == other.core_energy
            and list(self.point_group_irreps) == list(other.point_group_irreps)
            and np.array_equal(self.one_body, other.one_body)
            and np.array_equal(self.two_body, other.two_body)
        )


def _eri_orbit(p: int, q: int, r: int, s: int) -> set[tuple[int, int, int, int]]:
    return {
        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
    }


def _parse_float(token: str, lineno: int) -> float:
    try:
        return float(token.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise ParseError(f"not a number: {token!r}", lineno) from None


def _parse_header(lines: list[str]) -> tuple[dict[str, list[str]], int]:
    """Return the namelist keywords and the index of the first data line."""
    if not lines or not lines[0].lstrip().upper().startswith("&FCI"):
        raise ParseError("header must start with &FCI", 1)
    chunks: list[str] = []
    end = None
    for i, line in enumerate(lines):
        text = line.strip()
        if i == 0:
            text = text[4:]
        upper = text.upper()
        stop = None
        for marker in ("&END", "/"):
            pos = upper.find(marker)
            if pos >= 0 and (stop is None or pos < stop):
                stop = pos
        if stop is not None:
            chunks.append(text[:stop])
            end = i
            break
        chunks.append(text)
    if end is None:
        raise ParseError("unterminated namelist header (missing &END or /)", len(lines))

    body = " ".join(chunks)
    parts = re.split(r"([A-Za-z_][A-Za-z0-9_]*)\s*=", body)
    if parts[0].strip(" ,"):
        raise ParseError(f"unexpected header text {parts[0].strip()!r}", 1)
    keys: dict[str, list[str]] = {}
    for key, raw in zip(parts[1::2], parts[2::2]):
        values = [v for v in re.split(r"[,\s]+", raw) if v]
        keys[key.upper()] = values
    return keys, end + 1


def _header_int(keys: dict[str, list[str]], name: str, default: int | None = None) -> int:
    if name not in keys:
        if default is None:
            raise ParseError(f"header is missing {name}", 1)
        return default
    values = keys[name]
    if len(values) != 1:
        raise ParseError(f"{name} must hold one integer", 1)
    try:
        return int(values[0])
    except ValueError:
        raise ParseError(f"{name} is not an integer: {values[0]!r}", 1) from None


def parse_fcidump(text: str) -> FcidumpRecord:
    """Parse FCIDUMP text into a fully symmetrised :class:`FcidumpRecord`.

    Raises:
        ParseError: malformed header, bad numbers, indices out of range or
            duplicate entries that disagree by more than 1e-10.
    """
    lines = text.splitlines()
    keys, start = _parse_header(lines)
    norb = _header_int(keys, "NORB")
    nelec = _header_int(keys, "NELEC")
    ms2 = _header_int(keys, "MS2", 0)
    if norb < 1:
        raise ParseError("NORB must be positive", 1)
    if nelec < 0 or nelec > 2 * norb:
        raise ParseError("NELEC out of range for NORB", 1)
    try:
        orbsym = [int(v) for v in keys.get("ORBSYM", [])]
    except ValueError:
        raise ParseError("ORBSYM must hold integers", 1) from None
    if orbsym and len(orbsym) != norb:
        raise ParseError("ORBSYM length differs from NORB", 1)

    h1 = np.zeros((norb, norb))
    h2 = np.zeros((norb, norb, norb, norb))
    seen1: set[tuple[int, int]] = set()
    seen2: set[tuple[int, int, int, int]] = set()
    ecore = 0.0
    core_seen = False

    def assign(arr, seen, idx_set, value, lineno):
        for idx in idx_set:
            if idx in seen and abs(arr[idx] - value) > _DUP_TOL:
                raise ParseError(
                    f"inconsistent duplicate entry for {tuple(i + 1 for i in idx)}", lineno
                )
        for idx in idx_set:
            arr[idx] = value
            seen.add(idx)

    for offset, line in enumerate(lines[start:]):
        lineno = start + offset + 1
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise ParseError("expected 'value i j k l'", lineno)
        value = _parse_float(fields[0], lineno)
        try:
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError:
            raise ParseError("orbital indices must be integers", lineno) from None
        if any(x < 0 or x > norb for x in (i, j, k, l)):
            raise ParseError(f"orbital index out of range 1..{norb}", lineno)
        if i == j == k == l == 0:
            if core_seen and abs(ecore - value) > _DUP_TOL:
                raise ParseError("inconsistent duplicate core energy", lineno)
            ecore, core_seen = value, True
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise ParseError("one-body entry needs two nonzero indices", lineno)
            p, q = i - 1, j - 1
            assign(h1, seen1, {(p, q), (q, p)}, value, lineno)
        elif i and j and k and l:
            assign(h2, seen2, _eri_orbit(i - 1, j - 1, k - 1, l - 1), value, lineno)
        else:
            # orbital-energy lines (i 0 0 0) carry no integrals
            if j == k == l == 0 and i > 0:
                continue
            raise ParseError("malformed index pattern", lineno)

    return FcidumpRecord(
        n_orbitals=norb,
        n_electrons=nelec,
        spin_2s=ms2,
        core_energy=ecore,
        one_body=h1,
        two_body=h2,
        point_group_irreps=orbsym,
    )


def read_fcidump(path) -> FcidumpRecord:
    with open(path, encoding="utf-8") as fh:
        return parse_fcidump(fh.read())


def write_fcidump(record: FcidumpRecord, tol: float = 0.0) -> str:
    """Serialise ``record``; values use shortest round-trip float repr."""
    n = record.n_orbitals
    orbsym = record.point_group_irreps or [1] * n
    out = io.StringIO()
    out.write(f"&FCI NORB={n},NELEC={record.n_electrons},MS2={record.spin_2s},\n")
    out.write("  ORBSYM=" + ",".join(str(s) for s in orbsym) + ",\n")
    out.write("  ISYM=1,\n&END\n")
    h1, h2 = record.one_body, record.two_body
    for p in range(n):
        for q in range(p + 1):
            for r in range(n):
                for s in range(r + 1):
                    if p * (p + 1) // 2 + q < r * (r + 1) // 2 + s:
                        continue
                    v = float(h2[p, q, r, s])
                    if v != 0.0 and abs(v) > tol:
                        out.write(f"{v!r:>24} {p + 1:3d} {q + 1:3d} {r + 1:3d} {s + 1:3d}\n")
    for p in range(n):
        for q in range(p + 1):
            v = float(h1[p, q])
            if v != 0.0 and abs(v) > tol:
                out.write(f"{v!r:>24} {p + 1:3d} {q + 1:3d}   0   0\n")
    out.write(f"{float(record.core_energy)!r:>24}   0   0   0   0\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Frame tables
# ---------------------------------------------------------------------------

_FRAME_COLUMNS = {
    "frame": "frame_id",
    "delta_g_ev": "delta_g",
    "lambda_ev": "lambda_",
    "h_da_ev": "h_da",
    "h_da_sq_ev2": "h_da_sq",
}


@dataclass(frozen=True)
class FrameRow:
    """One MD conformation; absent columns are ``None`` rather than zero."""

    frame_id: int
    delta_g: float | None = None
    lambda_: float | None = None
    h_da: float | None = None
    h_da_sq: float | None = None


@dataclass
class FrameTable:
    rows: list[FrameRow] = field(default_factory=list)
    columns: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def has(self, column: str) -> bool:
        return column in self.columns

    def by_frame(self) -> dict[int, FrameRow]:
        return {r.frame_id: r for r in self.rows}


def parse_frame_table(text: str, sq_rtol: float = 2e-5) -> FrameTable:
    """Parse a CSV frame table.

    ``sq_rtol`` bounds ``|h_da**2 - h_da_sq| / h_da_sq`` when both columns are
    present. The default covers six-significant-digit transcriptions.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        return FrameTable()
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    unknown = [h for h in header if h not in _FRAME_COLUMNS]
    if unknown:
        raise ParseError(f"unknown column(s) {unknown}", 1)
    if "frame" not in header:
        raise ParseError("missing 'frame' column", 1)
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names", 1)

    rows: list[FrameRow] = []
    seen: set[int] = set()
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(cells)}", lineno)
        values: dict[str, Any] = {}
        for name, cell in zip(header, cells):
            cell = cell.strip()
            if name == "frame":
                try:
                    values["frame_id"] = int(cell)
                except ValueError:
                    raise ParseError(f"non-integer frame id {cell!r}", lineno) from None
            else:
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r} in {name}", lineno) from None
                if not math.isfinite(x):
                    raise ParseError(f"non-finite cell in {name}", lineno)
                values[_FRAME_COLUMNS[name]] = x
        row = FrameRow(**values)
        if row.frame_id in seen:
            raise ParseError(f"duplicate frame id {row.frame_id}", lineno)
        seen.add(row.frame_id)
        if row.lambda_ is not None and row.lambda_ < 0:
            raise ParseError("lambda must be non-negative", lineno)
        if row.h_da is not None and row.h_da_sq is not None:
            ref = max(abs(row.h_da_sq), 1e-300)
            if abs(row.h_da**2 - row.h_da_sq) / ref > sq_rtol:
                raise ParseError("h_da_sq inconsistent with h_da**2", lineno)
        rows.append(row)
    return FrameTable(rows=rows, columns=tuple(header))


def read_frame_table(path, sq_rtol: float = 2e-5) -> FrameTable:
    with open(path, encoding="utf-8") as fh:
        return parse_frame_table(fh.read(), sq_rtol=sq_rtol)


def merge_frame_tables(*tables: FrameTable) -> FrameTable:
    """Join tables on frame id; later tables fill columns absent in earlier ones."""
    merged: dict[int, dict[str, Any]] = {}
    columns: list[str] = []
    for table in tables:
        for col in table.columns:
            if col not in columns:
                columns.append(col)
        for row in table.rows:
            slot = merged.setdefault(row.frame_id, {"frame_id": row.frame_id})
            for attr in ("delta_g", "lambda_", "h_da", "h_da_sq"):
                val = getattr(row, attr)
                if val is not None:
                    slot[attr] = val
    rows = [FrameRow(**merged[k]) for k in sorted(merged)]
    return FrameTable(rows=rows, columns=tuple(columns))


@dataclass(frozen=True)
class FourPointEnergies:
    """Energies of state X at geometry Y, named ``e_<state><geometry>``."""

    e_ii: float
    e_fi: float
    e_ff: float
    e_if: float

    def __post_init__(self):
        for name in ("e_ii", "e_fi", "e_ff", "e_if"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


# ---------------------------------------------------------------------------
# Result documents
# ---------------------------------------------------------------------------


def format_number(x: float) -> str:
    """12 significant digits, compact exponent: ``9.44e9 -> '9.44000000000e9'``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot emit non-finite number {x}")
    if x == 0.0:
        x = 0.0  # drop the sign of -0.0
    mantissa, exp = f"{x:.11e}".split("e")
    return f"{mantissa}e{int(exp)}"


def _emit(node: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(node, Mapping):
        if not node:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(node.items(), key=lambda kv: str(kv[0]))
        for i, (key, value) in enumerate(items):
            out.append(f"{pad}  {json.dumps(str(key))}: ")
            _emit(value, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(node, (list, tuple, np.ndarray)):
        seq = list(node)
        if not seq:
            out.append("[]")
            return
        out.append("[")
        for i, value in enumerate(seq):
            _emit(value, indent + 1, out)
            if i < len(seq) - 1:
                out.append(", ")
        out.append("]")
    elif isinstance(node, (bool, np.bool_)):
        out.append("true" if node else "false")
    elif node is None:
        out.append("null")
    elif isinstance(node, (int, np.integer)):
        out.append(str(int(node)))
    elif isinstance(node, (float, np.floating)):
        out.append(format_number(node))
    elif isinstance(node, str):
        out.append(json.dumps(node))
    else:
        raise TypeError(f"cannot emit value of type {type(node).__name__}")


def emit_results(record: Mapping[str, Any]) -> str:
    """Deterministic JSON text: sorted keys, floats to 12 significant digits."""
    out: list[str] = []
    _emit(record, 0, out)
    out.append("\n")
    return "".join(out)


def parse_results(text: str) -> dict[str, Any]:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None


def iter_numbers(node: Any) -> Iterable[float]:
    """Yield every numeric leaf of a result tree (helper for tests)."""
    if isinstance(node, Mapping):
        for v in node.values():
            yield from iter_numbers(v)
    elif isinstance(node, (list, tuple)):
        for v in node:
            yield from iter_numbers(v)
    elif isinstance(node, (int, float)) and not isinstance(node, bool):
        yield float(node)
