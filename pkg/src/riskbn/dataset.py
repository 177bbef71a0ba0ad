"""Categorical datasets with explicit missing cells.

Records are stored as an integer code matrix: each cell holds the index of
the state in its column's variable, or ``MISSING`` (-1) for an absent value.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError, SchemaError

MISSING = -1

# Characters that would collide with the bespoke text formats (schema,
# model and knowledge files). CSV data files quote everything, so this
# restriction comes from the other formats.
_FORBIDDEN_SUBSTRINGS = (",", ":", "|", "->", "\n", "\r")


def _check_token(token: str, what: str) -> None:
    if not token or token != token.strip():
        raise SchemaError(f"{what} {token!r} is empty or has surrounding whitespace")
    for bad in _FORBIDDEN_SUBSTRINGS:
        if bad in token:
            raise SchemaError(f"{what} {token!r} contains reserved text {bad!r}")


@dataclass(frozen=True)
class Variable:
    """A categorical variable: a name plus its ordered state labels."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        _check_token(self.name, "variable name")
        for state in self.states:
            _check_token(state, f"state of {self.name!r}")
        if len(self.states) < 2:
            raise SchemaError(f"variable {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise SchemaError(f"variable {self.name!r} has duplicate state labels")

    @property
    def card(self) -> int:
        return len(self.states)

    def index_of(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise SchemaError(f"unknown state {label!r} for variable {self.name!r}") from None


class Dataset:
    """Immutable table of categorical records with explicit missing cells."""

    __slots__ = ("variables", "codes", "_index")

    def __init__(self, variables: Sequence[Variable], codes: np.ndarray):
        self.variables: tuple[Variable, ...] = tuple(variables)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate variable names")
        self._index = {name: i for i, name in enumerate(names)}

        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2:
            raise SchemaError("codes must be a 2-d array")
        if codes.shape[1] != len(self.variables):
            raise SchemaError(
                f"code matrix has {codes.shape[1]} columns for {len(self.variables)} variables"
            )
        for j, var in enumerate(self.variables):
            column = codes[:, j]
            bad = (column < MISSING) | (column >= var.card)
            if bad.any():
                row = int(np.argmax(bad))
                raise SchemaError(
                    f"cell ({row}, {var.name}) holds code {int(column[row])}, "
                    f"valid range is 0..{var.card - 1} or {MISSING} for missing"
                )
        codes = codes.copy()
        codes.setflags(write=False)
        self.codes = codes

    @classmethod
    def from_records(
        cls, variables: Sequence[Variable], records: Iterable[Sequence[str | None]]
    ) -> "Dataset":
        """Build a dataset from rows of state labels (None = missing)."""
        variables = tuple(variables)
        rows = []
        for record in records:
            if len(record) != len(variables):
                raise SchemaError(f"record {record!r} has {len(record)} cells, expected {len(variables)}")
            rows.append(
                [MISSING if cell is None else variables[j].index_of(cell) for j, cell in enumerate(record)]
            )
        codes = np.asarray(rows, dtype=np.int64).reshape(len(rows), len(variables))
        return cls(variables, codes)

    @property
    def n_records(self) -> int:
        return self.codes.shape[0]

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def var_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def variable(self, name: str) -> Variable:
        return self.variables[self.var_index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.var_index(name)]

    def missing_mask(self) -> np.ndarray:
        return self.codes == MISSING

    def is_complete(self) -> bool:
        return not (self.codes == MISSING).any()

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        return Dataset(self.variables, self.codes[np.asarray(rows, dtype=np.int64)])

    def record_labels(self, row: int) -> list[str | None]:
        out = []
        for j, var in enumerate(self.variables):
            code = int(self.codes[row, j])
            out.append(None if code == MISSING else var.states[code])
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.variables == other.variables and np.array_equal(self.codes, other.codes)

    def __repr__(self) -> str:
        return f"Dataset({self.n_records} records, {self.n_variables} variables)"


# -- CSV-style data files ----------------------------------------------------


def parse_table(text: str, schema: Sequence[Variable] | None = None, missing_token: str = "") -> Dataset:
    """Parse a comma-separated table with a header row.

    Cells equal to ``missing_token`` (or "NA", always accepted) become
    missing. With an explicit schema the header must match the schema names
    and unknown category labels are an error; without one, states are
    inferred as the sorted unique labels per column.
    """
    tokens = {missing_token, "NA"}
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty data file") from None
    header = [cell.strip() for cell in header]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        rows.append([cell.strip() for cell in row])

    if schema is not None:
        schema = tuple(schema)
        expected = [v.name for v in schema]
        if header != expected:
            raise DataFormatError(f"header {header!r} does not match schema columns {expected!r}")
    else:
        columns: list[list[str]] = [[] for _ in header]
        for row in rows:
            for j, cell in enumerate(row):
                if cell not in tokens:
                    columns[j].append(cell)
        schema = tuple(Variable(name, tuple(sorted(set(col)))) for name, col in zip(header, columns))

    codes = np.full((len(rows), len(schema)), MISSING, dtype=np.int64)
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            if cell in tokens:
                continue
            try:
                codes[i, j] = schema[j].index_of(cell)
            except SchemaError:
                raise DataFormatError(
                    f"row {i + 1}, column {schema[j].name!r}: unknown label {cell!r}"
                ) from None
    return Dataset(schema, codes)


def read_table(path, schema: Sequence[Variable] | None = None, missing_token: str = "") -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return parse_table(handle.read(), schema=schema, missing_token=missing_token)


def format_table(data: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, quoting=csv.QUOTE_ALL, lineterminator="\n")
    writer.writerow([v.name for v in data.variables])
    for i in range(data.n_records):
        writer.writerow(["" if cell is None else cell for cell in data.record_labels(i)])
    return out.getvalue()


def write_table(path, data: Dataset) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(format_table(data))


# -- schema files -------------------------------------------------------------
#
# One variable per line: "name: state1, state2, ... | tier N". The tier part
# is optional; tiers are numbered from 1 (earliest). '#' starts a comment.


def parse_schema(text: str) -> tuple[tuple[Variable, ...], tuple[frozenset[str], ...]]:
    variables: list[Variable] = []
    tier_members: dict[int, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise DataFormatError(f"line {lineno}: expected 'name: states...', got {line!r}")
        name, rest = line.split(":", 1)
        tier = None
        if "|" in rest:
            rest, tier_part = rest.split("|", 1)
            tier_part = tier_part.strip()
            if not tier_part.lower().startswith("tier"):
                raise DataFormatError(f"line {lineno}: expected '| tier N', got {tier_part!r}")
            try:
                tier = int(tier_part[4:].strip())
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad tier number in {tier_part!r}") from None
            if tier < 1:
                raise DataFormatError(f"line {lineno}: tiers are numbered from 1")
        states = tuple(s.strip() for s in rest.split(","))
        variable = Variable(name.strip(), states)
        variables.append(variable)
        if tier is not None:
            tier_members.setdefault(tier, []).append(variable.name)
    tiers = tuple(frozenset(tier_members[t]) for t in sorted(tier_members))
    return tuple(variables), tiers


def format_schema(variables: Sequence[Variable], tiers: Sequence[Iterable[str]] = ()) -> str:
    tier_of = {}
    for position, tier in enumerate(tiers, start=1):
        for name in tier:
            tier_of[name] = position
    lines = []
    for var in variables:
        line = f"{var.name}: {', '.join(var.states)}"
        if var.name in tier_of:
            line += f" | tier {tier_of[var.name]}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def read_schema(path) -> tuple[tuple[Variable, ...], tuple[frozenset[str], ...]]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_schema(handle.read())


def write_schema(path, variables: Sequence[Variable], tiers: Sequence[Iterable[str]] = ()) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_schema(variables, tiers))


# -- splitting ----------------------------------------------------------------


def train_test_split(
    data: Dataset, ratio: float, seed: int, stratify_on: str | None = None
) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-then-split; train gets floor(ratio * n) records.

    With ``stratify_on``, the split preserves per-state proportions to
    within one record per state; records missing the stratification
    variable are pooled and split unstratified.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    n = data.n_records

    if stratify_on is None:
        perm = rng.permutation(n)
        cut = int(np.floor(ratio * n))
        return data.subset(perm[:cut]), data.subset(perm[cut:])

    column = data.column(stratify_on)
    var = data.variable(stratify_on)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    # Missing-valued records form one extra unstratified pool (code -1).
    for code in list(range(var.card)) + [MISSING]:
        pool = np.flatnonzero(column == code)
        if pool.size == 0:
            continue
        perm = pool[rng.permutation(pool.size)]
        cut = int(np.floor(ratio * pool.size))
        train_idx.append(perm[:cut])
        test_idx.append(perm[cut:])
    return (
        data.subset(np.concatenate(train_idx) if train_idx else np.empty(0, dtype=np.int64)),
        data.subset(np.concatenate(test_idx) if test_idx else np.empty(0, dtype=np.int64)),
    )


# -- synthetic missingness ------------------------------------------------------

MECHANISMS = ("MCAR", "MAR", "MNAR")


@dataclass(frozen=True)
class MissingnessSpec:
    """How to blank one column of a complete dataset.

    mechanism: MCAR blanks independently at ``rate``; MAR scales the rate by
    the observed state of ``driver``; MNAR scales it by the target's own
    (pre-blanking) state.
    """

    mechanism: str
    rate: float
    target: str
    seed: int = 0
    driver: str | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must be in [0, 1], got {self.rate}")
        if self.mechanism == "MAR":
            if self.driver is None:
                raise ValueError("MAR requires a driver variable")
            if self.driver == self.target:
                raise ValueError("MAR driver must differ from the target")


def state_blank_rates(rate: float, card: int) -> np.ndarray:
    """Per-state blanking probabilities used by MAR and MNAR.

    State j of J gets rate * 2j / (J - 1 + eps), clipped to [0, 1] and then
    rescaled so the uniform-over-states mean equals ``rate`` (one pass, with
    a final clip; the mean can fall below ``rate`` only when clipping binds).
    """
    eps = 1e-12
    j = np.arange(card, dtype=float)
    raw = np.clip(rate * 2.0 * j / (card - 1 + eps), 0.0, 1.0)
    mean = raw.mean()
    if mean > 0.0:
        raw = np.clip(raw * (rate / mean), 0.0, 1.0)
    return raw


def inject_missing(data: Dataset, spec: MissingnessSpec) -> Dataset:
    """Blank cells of one column according to a missingness specification."""
    target_col = data.var_index(spec.target)
    column = data.codes[:, target_col]
    if (column == MISSING).any():
        raise ValueError(f"target column {spec.target!r} already has missing cells")

    rng = np.random.default_rng(spec.seed)
    draws = rng.random(data.n_records)

    if spec.mechanism == "MCAR":
        probs = np.full(data.n_records, spec.rate)
    elif spec.mechanism == "MAR":
        driver_var = data.variable(spec.driver)
        driver = data.column(spec.driver)
        rates = state_blank_rates(spec.rate, driver_var.card)
        # Records with a missing driver fall back to the base rate.
        probs = np.where(driver == MISSING, spec.rate, rates[np.clip(driver, 0, None)])
    else:  # MNAR: depends on the target's own value
        target_var = data.variables[target_col]
        rates = state_blank_rates(spec.rate, target_var.card)
        probs = rates[column]

    blank = draws < probs
    codes = data.codes.copy()
    codes[blank, target_col] = MISSING
    return Dataset(data.variables, codes)
