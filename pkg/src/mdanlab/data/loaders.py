from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import sparse

from mdanlab.data.domains import LabeledDomain, UnlabeledDomain
from mdanlab.errors import InputError, ParseError

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"
_SV_ITEM_RE = re.compile(r"^(\d+):(\S+)$")


def _finalize(
    x: np.ndarray,
    y: np.ndarray | None,
    *,
    path: Path,
    domain_id: str | None,
) -> LabeledDomain | UnlabeledDomain:
    if not np.isfinite(x).all():
        bad = int(np.argwhere(~np.isfinite(x))[0][0])
        raise InputError(f"{path}: non-finite feature value in data row {bad + 1}")
    domain_id = domain_id or path.stem
    if y is None:
        return UnlabeledDomain(features=x, domain_id=domain_id)
    return LabeledDomain(features=x, labels=y, domain_id=domain_id)


def _as_int_labels(values: np.ndarray, *, path: Path, first_line: int) -> np.ndarray:
    frac = np.mod(values, 1) != 0
    if frac.any():
        row = int(np.argmax(frac))
        raise ParseError(f"label {values[row]!r} is not an integer", line=first_line + row, path=str(path))
    return values.astype(np.int64)


def load_dense_csv(path: str | Path, *, domain_id: str | None = None) -> LabeledDomain | UnlabeledDomain:
    """表头一行，其后逗号分隔；若最后一列名为 label 则视为带标签。"""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"malformed CSV: {exc}", line=int(match.group(1)) if match else None, path=str(path)) from exc
    except pd.errors.EmptyDataError as exc:
        raise ParseError("empty CSV file", line=1, path=str(path)) from exc

    # 只用于定位非数值单元格；取值用 astype 逐元素解析
    numeric = df.apply(pd.to_numeric, errors="coerce")
    # 字面量 nan 能解析，但留给 _finalize 以非有限值拒绝
    literal_nan = df.apply(lambda col: col.str.strip().str.lower().isin(["nan", "-nan", "+nan"]))
    bad = (numeric.isna() & ~literal_nan).to_numpy()
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        # +2：表头占第 1 行
        raise ParseError(f"non-numeric value {df.iat[row, col]!r} in column {df.columns[col]!r}", line=row + 2, path=str(path))

    labeled = len(df.columns) > 0 and str(df.columns[-1]).strip().lower() == LABEL_COLUMN
    values = df.astype(np.float64).to_numpy()
    if labeled:
        x = values[:, :-1]
        y = _as_int_labels(values[:, -1], path=path, first_line=2)
    else:
        x, y = values, None
    if x.shape[0] == 0:
        raise ParseError("CSV has a header but no data rows", line=2, path=str(path))
    logger.debug("loaded format=dense_csv path=%s shape=%s labeled=%s", path, x.shape, labeled)
    return _finalize(x, y, path=path, domain_id=domain_id)


def load_sparse_sv(path: str | Path, *, dim: int, domain_id: str | None = None) -> LabeledDomain | UnlabeledDomain:
    """每行 `label idx:val idx:val ...`，下标从 0 开始且严格递增；无标签行以 idx:val 开头。"""
    path = Path(path)
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    labels: list[float] = []
    n_rows = 0
    labeled: bool | None = None

    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        has_label = ":" not in tokens[0]
        if labeled is None:
            labeled = has_label
        elif labeled != has_label:
            raise ParseError("mixed labeled and unlabeled lines", line=line_no, path=str(path))
        if has_label:
            try:
                labels.append(float(tokens[0]))
            except ValueError as exc:
                raise ParseError(f"bad label {tokens[0]!r}", line=line_no, path=str(path)) from exc
            tokens = tokens[1:]
        last = -1
        for tok in tokens:
            m = _SV_ITEM_RE.match(tok)
            if not m:
                raise ParseError(f"bad feature token {tok!r}", line=line_no, path=str(path))
            idx = int(m.group(1))
            try:
                val = float(m.group(2))
            except ValueError as exc:
                raise ParseError(f"bad feature value {m.group(2)!r}", line=line_no, path=str(path)) from exc
            if idx <= last:
                raise ParseError(f"feature indices must be strictly increasing ({idx} after {last})", line=line_no, path=str(path))
            if idx >= dim:
                raise InputError(f"{path}:{line_no}: feature index {idx} >= dim {dim}")
            last = idx
            rows.append(n_rows)
            cols.append(idx)
            vals.append(val)
        n_rows += 1

    if n_rows == 0:
        raise ParseError("no data lines", line=1, path=str(path))
    x = sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, dim), dtype=np.float64).toarray()
    y = _as_int_labels(np.asarray(labels), path=path, first_line=1) if labeled else None
    logger.debug("loaded format=sparse_sv path=%s shape=%s labeled=%s", path, x.shape, bool(labeled))
    return _finalize(x, y, path=path, domain_id=domain_id)


def write_dense_csv(path: str | Path, domain: LabeledDomain | UnlabeledDomain, *, include_labels: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(domain.features, columns=[f"x{j}" for j in range(domain.dim)])
    if include_labels and isinstance(domain, LabeledDomain):
        df[LABEL_COLUMN] = domain.labels
    df.to_csv(path, index=False, float_format="%.17g")


def write_sparse_sv(path: str | Path, domain: LabeledDomain | UnlabeledDomain, *, include_labels: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    with_labels = include_labels and isinstance(domain, LabeledDomain)
    for i, row in enumerate(domain.features):
        items = [f"{j}:{float(row[j])!r}" for j in np.flatnonzero(row)]
        head = [str(int(domain.labels[i]))] if with_labels else []
        if not items and not head:
            # 空行会被读取端跳过
            items = ["0:0.0"]
        lines.append(" ".join(head + items))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_domain_file(path: str | Path, *, fmt: str | None = None, dim: int | None = None, domain_id: str | None = None) -> LabeledDomain | UnlabeledDomain:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"domain file not found: {path}")
    fmt = fmt or ("dense_csv" if path.suffix.lower() == ".csv" else "sparse_sv")
    if fmt == "dense_csv":
        return load_dense_csv(path, domain_id=domain_id)
    if fmt == "sparse_sv":
        if dim is None:
            raise InputError(f"{path}: sparse_sv needs an explicit dim")
        return load_sparse_sv(path, dim=dim, domain_id=domain_id)
    raise InputError(f"unknown domain file format {fmt!r}")
