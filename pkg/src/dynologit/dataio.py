"""Long-format panel ingestion, transition summaries and result serialization.

Input files have one row per individual-period with a header row, e.g.::

    id,time,y,x1,x2
    17,2003,3,0,1.25
    17,2004,4,1,1.25
    ...

Only individuals observed in exactly four consecutive periods with no missing
outcome or covariate values are kept; their periods are relabelled 0..3.
"""

from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import CONTINUOUS, DISCRETE, ModelShape, PanelDataset
from .estimator import FitResult
from .exceptions import DataError, EmptyDatasetError, InvalidParameterError


@dataclass(frozen=True)
class PanelSchema:
    J: int
    k: int
    covariates: tuple = ()  # (name, kind) pairs
    id_col: str = "id"
    time_col: str = "time"
    outcome_col: str = "y"
    group_col: str | None = None
    delimiter: str = ","
    missing: tuple = ("", "NA", "NaN", ".")

    def __post_init__(self):
        covs = tuple((str(n), str(k)) for n, k in self.covariates)
        for name, kind in covs:
            if kind not in (DISCRETE, CONTINUOUS):
                raise InvalidParameterError(f"covariate {name!r}: kind must be discrete or continuous, got {kind!r}")
        object.__setattr__(self, "covariates", covs)
        object.__setattr__(self, "missing", tuple(self.missing))

    @property
    def shape(self) -> ModelShape:
        return ModelShape(self.J, len(self.covariates), self.k)


@dataclass
class IngestReport:
    rows_read: int = 0
    individuals_seen: int = 0
    spells_kept: int = 0
    individuals_dropped_incomplete: int = 0
    individuals_dropped_missing: int = 0
    groups: dict = field(default_factory=dict)  # group -> {"seen": int, "kept": int}

    def to_dict(self) -> dict:
        return asdict(self)


def parse_covariate_spec(text: str, default_kind: str = DISCRETE) -> list[tuple[str, str]]:
    """``"x1:discrete,x2:continuous"`` -> ``[("x1", "discrete"), ("x2", "continuous")]``."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, _, kind = item.partition(":")
        kind = kind or default_kind
        out.append((name, {"d": DISCRETE, "c": CONTINUOUS}.get(kind, kind)))
    return out


def _parse_outcome(raw: str, J: int, where: str) -> int:
    try:
        val = float(raw)
    except ValueError:
        raise DataError(f"{where}: non-numeric outcome {raw!r}") from None
    if not val.is_integer() or not 1 <= val <= J:
        raise DataError(f"{where}: outcome {raw!r} outside 1..{J}")
    return int(val)


def _parse_time(raw: str, where: str) -> int:
    try:
        val = float(raw)
    except ValueError:
        raise DataError(f"{where}: non-numeric time {raw!r}") from None
    if not val.is_integer():
        raise DataError(f"{where}: time {raw!r} is not an integer period")
    return int(val)


def read_panel(path, schema: PanelSchema) -> tuple[PanelDataset, IngestReport]:
    path = Path(path)
    names = [c for c, _ in schema.covariates]
    report = IngestReport()
    people: "OrderedDict[str, dict]" = OrderedDict()
    group_of: dict = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)") from None
        except csv.Error as exc:
            raise DataError(f"{path}: unparseable file: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8: {exc}") from exc
        header = [h.strip() for h in header]
        needed = [schema.id_col, schema.time_col, schema.outcome_col, *names]
        if schema.group_col:
            needed.append(schema.group_col)
        missing_cols = [c for c in needed if c not in header]
        if missing_cols:
            raise DataError(f"{path}: missing column(s) {missing_cols}")
        pos = {c: header.index(c) for c in needed}
        try:
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                where = f"{path.name}:{lineno}"
                if len(row) != len(header):
                    raise DataError(f"{where}: expected {len(header)} fields, got {len(row)}")
                report.rows_read += 1
                pid = row[pos[schema.id_col]].strip()
                t = _parse_time(row[pos[schema.time_col]].strip(), where)
                person = people.setdefault(pid, {})
                if t in person:
                    raise DataError(f"{where}: duplicate (id, time) = ({pid}, {t})")
                y_raw = row[pos[schema.outcome_col]].strip()
                y = None if y_raw in schema.missing else _parse_outcome(y_raw, schema.J, where)
                xs = []
                for c in names:
                    raw = row[pos[c]].strip()
                    if raw in schema.missing:
                        xs.append(None)
                        continue
                    try:
                        xs.append(float(raw))
                    except ValueError:
                        raise DataError(f"{where}: non-numeric value {raw!r} in column {c!r}") from None
                    if not math.isfinite(xs[-1]):
                        xs[-1] = None
                person[t] = (y, xs)
                if schema.group_col:
                    group_of.setdefault(pid, row[pos[schema.group_col]].strip())
        except csv.Error as exc:
            raise DataError(f"{path}: unparseable file: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8: {exc}") from exc

    ids, Ys, Xs = [], [], []
    groups: dict = defaultdict(lambda: {"seen": 0, "kept": 0})
    for pid, person in people.items():
        report.individuals_seen += 1
        g = group_of.get(pid)
        if g is not None:
            groups[g]["seen"] += 1
        times = sorted(person)
        if len(times) != 4 or times[-1] - times[0] != 3:
            report.individuals_dropped_incomplete += 1
            continue
        obs = [person[t] for t in times]
        if any(y is None or any(v is None for v in xs) for y, xs in obs):
            report.individuals_dropped_missing += 1
            continue
        ids.append(pid)
        Ys.append([y for y, _ in obs])
        Xs.append([xs for _, xs in obs[1:]])
        report.spells_kept += 1
        if g is not None:
            groups[g]["kept"] += 1
    report.groups = {k: dict(v) for k, v in groups.items()}
    shape = schema.shape
    ids_arr = np.empty(len(ids), dtype=object)
    ids_arr[:] = ids
    ds = PanelDataset(
        shape, ids_arr, np.array(Ys, dtype=np.int64).reshape(len(ids), 4),
        np.array(Xs, dtype=float).reshape(len(ids), 3, shape.K), tuple(names), tuple(k for _, k in schema.covariates),
    )
    return ds, report


def write_panel(path, dataset: PanelDataset, x0=None, delimiter: str = ",") -> None:
    """Write a dataset in long format; periods are labelled 0..3.

    ``x0`` supplies period-0 covariates (unused by the estimator); zeros otherwise.
    """
    K = dataset.shape.K
    x0 = np.zeros((len(dataset), K)) if x0 is None else np.asarray(x0, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["id", "time", "y", *dataset.covariate_names])
        for i in range(len(dataset)):
            pid = dataset.ids[i]
            for t in range(4):
                xs = x0[i] if t == 0 else dataset.X[i, t - 1]
                w.writerow([pid, t, int(dataset.Y[i, t]), *(repr(float(v)) for v in xs)])


@dataclass
class TransitionMatrix:
    counts: np.ndarray  # (J, J)
    freq: np.ndarray  # row-normalised; zero rows where the marginal is zero
    marginals: np.ndarray  # row totals

    def table(self) -> str:
        J = self.counts.shape[0]
        lines = ["y/y'" + "".join(f"{j:>9d}" for j in range(1, J + 1)) + f"{'n':>9}"]
        for r in range(J):
            lines.append(f"{r + 1:<4d}" + "".join(f"{100 * v:>9.2f}" for v in self.freq[r]) + f"{int(self.marginals[r]):>9d}")
        return "\n".join(lines)


def transition_matrix(dataset: PanelDataset) -> TransitionMatrix:
    if len(dataset) == 0:
        raise EmptyDatasetError("empty dataset")
    J = dataset.shape.J
    a = dataset.Y[:, :3].reshape(-1) - 1
    b = dataset.Y[:, 1:].reshape(-1) - 1
    counts = np.zeros((J, J))
    np.add.at(counts, (a, b), 1.0)
    marg = counts.sum(axis=1)
    freq = np.divide(counts, marg[:, None], out=np.zeros_like(counts), where=marg[:, None] > 0)
    return TransitionMatrix(counts, freq, marg)


# --------------------------------------------------------------------------
# results

def _nan_to_none(a):
    """JSON-safe copy: arrays to lists, non-finite floats to ``None``."""
    if isinstance(a, np.ndarray):
        return _nan_to_none(a.tolist())
    if isinstance(a, dict):
        return {str(k): _nan_to_none(v) for k, v in a.items()}
    if isinstance(a, (list, tuple)):
        return [_nan_to_none(v) for v in a]
    if isinstance(a, (np.floating, np.integer, np.bool_)):
        a = a.item()
    if isinstance(a, float) and not math.isfinite(a):
        return None
    return a


def _none_to_nan(a) -> np.ndarray:
    return np.array([[np.nan if v is None else v for v in row] for row in a], dtype=float) if a and isinstance(a[0], list) \
        else np.array([np.nan if v is None else v for v in a], dtype=float)


def result_to_dict(result: FitResult) -> dict:
    lo, hi = result.ci()
    return {
        "toolkit": "dynologit",
        "version": __version__,
        "model": result.model,
        "shape": {"J": result.shape.J, "K": result.shape.K, "k": result.shape.k},
        "n": result.n,
        "param_names": list(result.param_names),
        "estimates": _nan_to_none(np.asarray(result.estimates, float)),
        "se": _nan_to_none(result.se),
        "ci_low": _nan_to_none(lo),
        "ci_high": _nan_to_none(hi),
        "vcov": {"names": list(result.param_names), "rows": _nan_to_none(np.asarray(result.vcov, float))},
        "loglik": result.loglik,
        "iterations": result.iterations,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "cell_counts": dict(result.cell_counts),
        "warnings": list(result.warnings),
        "free": None if result.free is None else [bool(v) for v in result.free],
        "config": result.config,
    }


def result_from_dict(d: dict) -> FitResult:
    shape = ModelShape(d["shape"]["J"], d["shape"]["K"], d["shape"]["k"])
    return FitResult(
        model=d["model"],
        param_names=list(d["param_names"]),
        estimates=_none_to_nan(d["estimates"]),
        vcov=_none_to_nan(d["vcov"]["rows"]).reshape(len(d["param_names"]), len(d["param_names"])),
        loglik=float(d["loglik"]),
        iterations=int(d["iterations"]),
        converged=bool(d["converged"]),
        stop_reason=d["stop_reason"],
        n=int(d["n"]),
        shape=shape,
        cell_counts=dict(d["cell_counts"]),
        warnings=list(d["warnings"]),
        free=None if d.get("free") is None else np.array(d["free"], dtype=bool),
        config=dict(d.get("config", {})),
    )


def write_results(result: FitResult, path, format: str = "json", extra: dict | None = None) -> None:
    path = Path(path)
    if format not in ("json", "csv"):
        raise InvalidParameterError(f"format must be json or csv, got {format!r}")
    try:
        if format == "json":
            payload = result_to_dict(result)
            if extra:
                payload.update(extra)
            path.write_text(json.dumps(_nan_to_none(payload), indent=2, allow_nan=False) + "\n", encoding="utf-8")
        else:
            lo, hi = result.ci()
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["name", "estimate", "se", "ci_low", "ci_high"])
                for row in zip(result.param_names, result.estimates, result.se, lo, hi):
                    w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def read_results(path) -> FitResult:
    return result_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_json(path, payload) -> None:
    try:
        Path(path).write_text(json.dumps(_nan_to_none(payload), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def load_theta(path, shape: ModelShape):
    """Read ``{"beta": [...], "rho": r, "gamma": [...]}``.

    ``gamma`` may list the ``J - 2`` free thresholds or all ``J - 1`` with a zero at ``k``.
    """
    from .core import Params

    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        beta, rho, gamma = d["beta"], d["rho"], list(d["gamma"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: cannot read theta (need beta, rho, gamma): {exc}") from exc
    if len(gamma) == shape.J - 1:
        if gamma[shape.k - 2] != 0:
            raise DataError(f"{path}: full threshold list must have gamma_k = 0 at position k")
        gamma = gamma[: shape.k - 2] + gamma[shape.k - 1 :]
    return Params(tuple(beta), rho, tuple(gamma))
