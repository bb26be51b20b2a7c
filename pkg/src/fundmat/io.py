"""Text formats: match files, F files and the evaluation table."""
from __future__ import annotations

import math

import numpy as np

from .epipolar import MIN_MATCHES, Matches
from .errors import TooFewMatches

TABLE_COLUMNS = ("e_Init 8pt", "e_Init Gp", "e_BA 8pt", "e_BA Gp",
                 "Iter 8pt", "Iter Gp", "Time 8pt", "Time Gp")


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def parse_matches(text: str, min_matches: int = MIN_MATCHES) -> Matches:
    """One "x1 y1 x2 y2" match per line; '#' lines and blank lines are skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 4:
            raise ParseError(lineno, f"expected 4 numbers, found {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ParseError(lineno, f"not a number in {s!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(lineno, "non-finite coordinate")
        rows.append(vals)
    if len(rows) < min_matches:
        raise TooFewMatches(f"need at least {min_matches} matches, found {len(rows)}")
    a = np.array(rows)
    return Matches.from_pixels(a[:, :2], a[:, 2:])


def format_matches(matches: Matches, header: str | None = None) -> str:
    """Inverse of parse_matches; repr() keeps every float exact."""
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    for (x1, y1), (x2, y2) in zip(matches.x1, matches.x2):
        lines.append(" ".join(repr(float(v)) for v in (x1, y1, x2, y2)))
    return "\n".join(lines) + "\n"


def read_matches(path) -> Matches:
    with open(path, encoding="utf-8") as fh:
        return parse_matches(fh.read())


def write_matches(path, matches: Matches, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matches(matches, header))


def format_f(F) -> str:
    F = np.asarray(F, dtype=float).reshape(3, 3)
    return "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in F)


def parse_f(text: str) -> np.ndarray:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ParseError(len(rows), "an F file holds exactly 3 rows of 3 numbers")
    return np.array([[float(v) for v in r] for r in rows])


def write_f(path, F) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_f(F))


def read_f(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return parse_f(fh.read())


def _cell(v, kind):
    if v is None:
        return "failed"
    if kind == "int":
        return str(int(v))
    return f"{v:.6g}"


def format_table(rows: dict[str, dict], timing: bool = True) -> str:
    """Fixed-width table with one line per dataset.

    ``rows`` maps a dataset label to {"EightPoint": report, "Global": report};
    a None report prints as "failed" and a missing method as "-".
    """
    label_w = max([len("data")] + [len(k) for k in rows])
    widths = [max(len(c), 12) for c in TABLE_COLUMNS]
    out = ["data".ljust(label_w) + "".join("  " + c.rjust(w) for c, w in zip(TABLE_COLUMNS, widths))]
    for label, reps in rows.items():
        cells = []
        for attr, kind in (("e_init", "f"), ("e_ba", "f"), ("iterations", "int"), ("time_s", "f")):
            for method in ("EightPoint", "Global"):
                rep = reps.get(method, "-")
                if isinstance(rep, str):
                    cells.append("-")
                elif rep is None:
                    cells.append("failed")
                elif attr == "time_s" and not timing:
                    cells.append("-")
                else:
                    cells.append(_cell(getattr(rep, attr), kind))
        out.append(label.ljust(label_w) + "".join("  " + c.rjust(w) for c, w in zip(cells, widths)))
    return "\n".join(out) + "\n"
