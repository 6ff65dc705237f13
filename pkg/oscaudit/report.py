"""
Report assembly and the JSON, CSV and xlsx writers.
"""
import io
import re
import sys
import json
import math
import zipfile
import logging

from pathlib import Path
from datetime import datetime
from string import Formatter
from typing import Dict, List, Any, Optional, Sequence, Mapping, TextIO, Tuple

import numpy as np
from openpyxl import Workbook
from openpyxl.styles import Font

from oscaudit import Base, UsageError, OscAuditError
from oscaudit.linalg3 import PRNG_NAME

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1'
PROGRAM = 'oscaudit'
FORMATS = ('json', 'csv', 'xlsx')

PINNED_TIME = datetime(2000, 1, 1)
ZIP_TIME = (1980, 1, 1, 0, 0, 0)
CORE_PROPERTIES = 'docProps/core.xml'
DCTERMS_DATE = re.compile(r'(<dcterms:(?:created|modified)[^>]*>)([^<]*)(</dcterms:(?:created|modified)>)')


def plain(value: Any) -> Any:
    """
    Convert numpy values, tuples and non-finite floats into json compatible python values
    :param value: any nested structure
    :return: structure of dict, list, str, int, float, bool and None
    """
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, OscAuditError):
        return value.to_dict()
    return value


def flatten(record: Mapping[str, Any], prefix: str = '') -> List[Tuple[str, Any]]:
    """
    Nested dictionary to dotted key and value pairs, lists kept as json text
    """
    pairs = []
    for key, value in record.items():
        name = f'{prefix}.{key}' if prefix else str(key)
        if isinstance(value, dict):
            pairs.extend(flatten(value, name))
        elif isinstance(value, (list, tuple)):
            pairs.append((name, json.dumps(plain(value))))
        else:
            pairs.append((name, value))
    return pairs


class Report(Base):
    """
    Results of one subcommand with the header that makes the run reproducible
    """
    def __init__(self, subcommand: str, seed: int = 0, samples: Optional[int] = None, tol: Optional[float] = None,
                 mode: Optional[str] = None) -> None:
        super().__init__()
        self.header = {'schema_version': SCHEMA_VERSION, 'program': PROGRAM, 'subcommand': subcommand,
                       'prng': PRNG_NAME, 'seed': seed, 'samples': samples, 'tol': tol, 'mode': mode}
        self.results: Dict[str, Any] = {}
        self.tables: Dict[str, Dict[str, Any]] = {}
        # Table written by the csv writer
        self.primary: Optional[str] = None

    def add_results(self, results: Dict[str, Any]) -> None:
        self.results.update(results)

    def add_table(self, name: str, rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None,
                  primary: bool = False) -> None:
        """
        Add a table of rows
        :param name: table name, used as sheet name
        :param rows: list of dictionaries
        :param columns: column order, keys of the first row by default
        :param primary: written by the csv writer
        :return: None
        """
        columns = list(columns or (rows[0].keys() if rows else []))
        self.tables[name] = {'columns': columns, 'rows': list(rows)}
        if primary or self.primary is None:
            self.primary = name

    def as_dict(self) -> Dict[str, Any]:
        record = dict(self.header)
        record |= {'results': self.results, 'messages': self.messages, 'errors': self.errors}
        if self.tables:
            record['tables'] = {name: table['rows'] for name, table in self.tables.items()}
        return plain(record)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2, allow_nan=False) + '\n'

    def to_csv(self) -> str:
        return CsvReport(self).text()

    def write(self, fmt: str = 'json', out: Optional[str] = None, stream: Optional[TextIO] = None) -> None:
        """
        Write report in the requested format to a file or a stream
        :param fmt: json, csv or xlsx
        :param out: output path, standard output when None
        :param stream: output stream used when out is None
        :return: None
        """
        if fmt == 'xlsx':
            if not out:
                raise UsageError('xlsx reports need --out')
            XLSXReport(self).save(Path(out))
        elif fmt in ('json', 'csv'):
            text = self.to_json() if fmt == 'json' else self.to_csv()
            if out:
                Path(out).write_text(text, encoding='utf-8', newline='')
            else:
                (stream or sys.stdout).write(text)
        else:
            raise UsageError(f'unknown format {fmt}, use one of {", ".join(FORMATS)}')
        logger.info('%s report written to %s', fmt, out or 'stdout')


class CsvReport(Formatter):
    """
    Csv writer of the primary table, or of the flattened results when there is no table
    """
    def __init__(self, report: Report, digits: int = 12) -> None:
        super().__init__()
        self.report, self.float_format, self.key = report, f'.{digits}g', None
        if report.primary:
            table = report.tables[report.primary]
            self.columns, self.rows = table['columns'], table['rows']
        else:
            self.columns = ['key', 'value']
            self.rows = [{'key': key, 'value': value} for key, value in flatten(plain(report.results))]
        self.line_format = ','.join(f'{{{index}}}' for index in range(len(self.columns))) + '\n'

    def header_line(self) -> str:
        header = self.report.header
        extra = ''.join(f' {key}={header[key]}' for key in ('samples', 'tol', 'mode') if header[key] is not None)
        return (f'# {PROGRAM} schema_version={SCHEMA_VERSION} subcommand={header["subcommand"]} '
                f'prng={header["prng"]} seed={header["seed"]}{extra}\n')

    def text(self) -> str:
        buffer = io.StringIO()
        buffer.write(self.header_line())
        buffer.write(','.join(self.columns) + '\n')
        for row in self.rows:
            buffer.write(self.format(self.line_format, *[row.get(column) for column in self.columns]))
        return buffer.getvalue()

    def get_value(self, key: int | str, args: Sequence[Any], kwargs: Mapping[str, Any]) -> Any:
        self.key = self.columns[key] if isinstance(key, int) else key
        return super().get_value(key, args, kwargs)

    def format_field(self, value: Any, format_spec: str) -> str:
        """
        Control formatting of value
        :param value: Input value
        :param format_spec: Format for this value
        :return: Formatted value
        """
        value = plain(value)
        if value is None:
            return ''
        if isinstance(value, bool):
            return 'true' if value else 'false'
        if isinstance(value, float):
            return format(value, self.float_format)
        if isinstance(value, (list, dict)):
            value = json.dumps(value)
        text = str(value)
        if any(char in text for char in ',"\n'):
            text = '"{}"'.format(text.replace('"', '""'))
        return format(text, format_spec)


class XLSXReport:
    """
    One worksheet per table plus a summary sheet with header and scalar results
    """
    def __init__(self, report: Report) -> None:
        self.report = report
        self.wb = Workbook()

    @staticmethod
    def cell_value(value: Any) -> Any:
        value = plain(value)
        return json.dumps(value) if isinstance(value, (list, dict)) else value

    def write_summary(self) -> None:
        sheet = self.wb.active
        sheet.title = 'summary'
        sheet.append(['key', 'value'])
        for cell in sheet[1]:
            cell.font = Font(bold=True)
        for key, value in self.report.header.items():
            sheet.append([key, self.cell_value(value)])
        for key, value in flatten(plain(self.report.results)):
            sheet.append([key, self.cell_value(value)])
        for message in self.report.messages:
            sheet.append([message['type'], message['text']])

    def write_tables(self) -> None:
        for name, table in self.report.tables.items():
            # Sheet titles are limited to 31 characters
            sheet = self.wb.create_sheet(title=name[:31])
            sheet.append(table['columns'])
            for cell in sheet[1]:
                cell.font = Font(bold=True)
            for row in table['rows']:
                sheet.append([self.cell_value(row.get(column)) for column in table['columns']])

    def save(self, path: Path) -> Path:
        """
        Write the workbook, timestamps pinned so that reruns are byte-identical
        :param path: output path
        :return: path
        """
        self.write_summary()
        self.write_tables()
        self.wb.properties.created = self.wb.properties.modified = PINNED_TIME
        buffer = io.BytesIO()
        self.wb.save(buffer)
        path.write_bytes(pin_archive(buffer.getvalue()))
        return path


def pin_archive(data: bytes) -> bytes:
    """
    Rewrite an xlsx archive with fixed entry dates and fixed document properties dates
    :param data: xlsx bytes from openpyxl
    :return: xlsx bytes
    """
    stamp = PINNED_TIME.strftime('%Y-%m-%dT%H:%M:%SZ')
    buffer = io.BytesIO()
    with zipfile.ZipFile(io.BytesIO(data)) as source, zipfile.ZipFile(buffer, 'w', zipfile.ZIP_DEFLATED) as target:
        for info in source.infolist():
            content = source.read(info.filename)
            if info.filename == CORE_PROPERTIES:
                # openpyxl stamps modified with the save time
                content = DCTERMS_DATE.sub(lambda match: f'{match.group(1)}{stamp}{match.group(3)}',
                                           content.decode('utf-8')).encode('utf-8')
            target.writestr(zipfile.ZipInfo(info.filename, date_time=ZIP_TIME), content,
                            compress_type=zipfile.ZIP_DEFLATED)
    return buffer.getvalue()
