# src/swing_ident/experiments/report.py

import csv
import json
import os

import numpy as np

from ..console_logger import logger
from ..errors import InsufficientDataError, SpecValidationError
from .harness import ResultRecord
from .metrics import rank_correlation

RESULT_COLUMNS = ('scenario', 'K', 'T', 'algorithm', 'eps_m', 'tau_m', 'eps_d', 'tau_d', 'runtime_s', 'seed', 'failure')
SCATTER_COLUMNS = ('scenario', 'K', 'T', 'parameter', 'tau', 'eps')
RESULTS_CSV = 'results.csv'
RESULTS_JSON = 'results.json'
SCATTER_CSV = 'tau_vs_eps.csv'
REPORT_FORMATS = ('csv', 'json')

_FLOAT_FIELDS = ('K', 'T', 'eps_m', 'tau_m', 'eps_d', 'tau_d', 'runtime_s')


class NumpyEncoder(json.JSONEncoder):
    """Serializes numpy scalars and arrays; NaN stays NaN."""
    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        return json.JSONEncoder.default(self, obj)


def _format_cell(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_to_row(record):
    return [_format_cell(getattr(record, name)) for name in RESULT_COLUMNS]


def row_to_record(row):
    values = {}
    for name in RESULT_COLUMNS:
        raw = row.get(name, '')
        if name in _FLOAT_FIELDS:
            values[name] = float(raw) if raw != '' else None
        elif name == 'seed':
            values[name] = int(raw)
        elif name == 'failure':
            values[name] = raw or None
        else:
            values[name] = raw
    return ResultRecord(**values)


def record_to_dict(record):
    return {name: getattr(record, name) for name in RESULT_COLUMNS}


def write_results_csv(records, file_path):
    with open(file_path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(RESULT_COLUMNS)
        for record in records:
            writer.writerow(record_to_row(record))


def read_results_csv(file_path):
    with open(file_path, 'r', newline='') as f:
        reader = csv.DictReader(f)
        missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SpecValidationError(f"{file_path} lacks result columns {missing}")
        return [row_to_record(row) for row in reader]


def scatter_rows(records):
    """Long-format tau-vs-eps rows: one per BPINN cell and parameter."""
    rows = []
    for r in records:
        if r.algorithm != 'bpinn':
            continue
        rows.append((r.scenario, r.K, r.T, 'm', r.tau_m, r.eps_m))
        rows.append((r.scenario, r.K, r.T, 'd', r.tau_d, r.eps_d))
    return rows


def write_scatter_csv(records, file_path):
    rows = scatter_rows(records)
    with open(file_path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(SCATTER_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    return len(rows)


def confidence_correlation(records):
    """Spearman rho of tau against eps over all successful BPINN cells, per parameter."""
    cells = [r for r in records if r.algorithm == 'bpinn' and not r.failed]
    return {
        'n_cells': len(cells),
        'rho_m': rank_correlation([r.tau_m for r in cells], [r.eps_m for r in cells]),
        'rho_d': rank_correlation([r.tau_d for r in cells], [r.eps_d for r in cells]),
    }


def emit_report(records, out_dir, format='csv'):
    """
    Writes the result table and the tau-vs-eps scatter file.

    Args:
        records (list): ResultRecords, nonempty.
        out_dir (str): Destination directory (created if missing).
        format (str): 'csv' writes results.csv; 'json' writes results.json with the
            confidence-correlation summary. The scatter file is CSV in both cases.

    Returns:
        list: Paths written.
    """
    if not records:
        raise InsufficientDataError("No records to report")
    if format not in REPORT_FORMATS:
        raise SpecValidationError(f"Unknown report format '{format}', expected one of {REPORT_FORMATS}")
    os.makedirs(out_dir, exist_ok=True)
    records = sorted(records, key=ResultRecord.sort_key)

    written = []
    if format == 'csv':
        path = os.path.join(out_dir, RESULTS_CSV)
        write_results_csv(records, path)
    else:
        path = os.path.join(out_dir, RESULTS_JSON)
        document = {
            'records': [record_to_dict(r) for r in records],
            'confidence_correlation': confidence_correlation(records),
        }
        with open(path, 'w') as f:
            json.dump(document, f, cls=NumpyEncoder, indent=2)
    written.append(path)

    scatter_path = os.path.join(out_dir, SCATTER_CSV)
    n_rows = write_scatter_csv(records, scatter_path)
    written.append(scatter_path)
    logger.info(f"Report with {len(records)} records and {n_rows} scatter rows written to {out_dir}")
    return written


def load_records(in_dir):
    """Reads results.csv from a sweep directory, falling back to results.json."""
    csv_path = os.path.join(in_dir, RESULTS_CSV)
    if os.path.exists(csv_path):
        return read_results_csv(csv_path)
    json_path = os.path.join(in_dir, RESULTS_JSON)
    if os.path.exists(json_path):
        with open(json_path, 'r') as f:
            return [ResultRecord(**row) for row in json.load(f)['records']]
    raise InsufficientDataError(f"No {RESULTS_CSV} or {RESULTS_JSON} in {in_dir}")
