# -*- coding: utf-8 -*-
#
# dnslog.py
#

"""
Reading and writing of tab-separated DNS resolution logs.

One record per line: ``timestamp<TAB>client_id<TAB>qname<TAB>resolved_ip``.
Blank lines and lines starting with ``#`` are ignored.
"""

import io
import re
import logging
import ipaddress

from typing import IO, Iterable, List, NamedTuple, Union


logger = logging.getLogger(__name__)

LABEL_PATTERN = re.compile(r'^[a-z0-9-]+$')

NUM_FIELDS = 4


class LogParseError(ValueError):
    """A malformed line in a DNS log."""

    def __init__(self, line_number: int, reason: str):

        super().__init__(f'Line {line_number}: {reason}')

        self.line_number = line_number
        self.reason = reason


class InvalidNameError(ValueError):
    """A string that is not a valid lowercase dot-separated domain name."""


class DnsLogRecord(NamedTuple):
    """One resolution event."""

    timestamp: int
    client_id: str
    qname: str
    resolved_ip: str

    def serialize(self) -> str:
        return '\t'.join(
            (str(self.timestamp), self.client_id, self.qname, self.resolved_ip)
        )


def validate_qname(qname: str) -> List[str]:
    """Check a domain name and return its labels.

    Raises:
        InvalidNameError: Uppercase or non-ASCII characters, empty labels or
            fewer than two labels.

    """
    if not isinstance(qname, str) or not qname:
        raise InvalidNameError(f'Empty domain name: {qname!r}')

    labels = qname.split('.')
    if len(labels) < 2:
        raise InvalidNameError(f'Domain name needs >= 2 labels: {qname!r}')

    for label in labels:
        if not LABEL_PATTERN.match(label):
            raise InvalidNameError(f'Invalid label {label!r} in {qname!r}')

    return labels


def parse_record(line: str, line_number: int = 0) -> DnsLogRecord:
    """Parse a single log line (without trailing newline)."""

    fields = line.split('\t')
    if len(fields) != NUM_FIELDS:
        raise LogParseError(
            line_number, f'expected {NUM_FIELDS} fields, got {len(fields)}'
        )
    raw_timestamp, client_id, qname, resolved_ip = fields

    # Only canonical integers round-trip through serialize().
    if not re.match(r'^-?(0|[1-9][0-9]*)$', raw_timestamp):
        raise LogParseError(line_number, f'bad timestamp {raw_timestamp!r}')

    if not client_id or client_id.strip() != client_id:
        raise LogParseError(line_number, f'bad client id {client_id!r}')

    try:
        validate_qname(qname)
    except InvalidNameError as exc:
        raise LogParseError(line_number, str(exc)) from exc

    try:
        address = ipaddress.IPv4Address(resolved_ip)
    except ipaddress.AddressValueError as exc:
        raise LogParseError(line_number, f'bad IPv4 {resolved_ip!r}') from exc
    if str(address) != resolved_ip:
        raise LogParseError(line_number, f'non-canonical IPv4 {resolved_ip!r}')

    return DnsLogRecord(int(raw_timestamp), client_id, qname, resolved_ip)


def _to_text_stream(stream: Union[bytes, str, IO]) -> IO:

    if isinstance(stream, bytes):
        return io.StringIO(stream.decode('utf-8'))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream

    # Binary file-like object.
    return io.TextIOWrapper(stream, encoding='utf-8', newline='')


def parse_dns_log(stream: Union[bytes, str, IO],
                  strict: bool = True,
                  errors: list = None) -> List[DnsLogRecord]:
    """Parse a DNS log into records, preserving input order.

    Args:
        stream: Raw bytes, decoded text or an open (text or binary) file.
        strict: Abort on the first malformed line. Otherwise malformed lines
            are skipped.
        errors: Optional list collecting the skipped lines' errors in lenient
            mode.

    Returns:
        The parsed records.

    """
    records = []
    num_skipped = 0
    for line_number, line in enumerate(_to_text_stream(stream), start=1):
        line = line.rstrip('\r\n')
        if not line or line.startswith('#'):
            continue
        try:
            records.append(parse_record(line, line_number))
        except LogParseError as exc:
            if strict:
                raise
            num_skipped += 1
            if errors is not None:
                errors.append(exc)

    if num_skipped > 0:
        logger.warning('Skipped %d malformed log lines', num_skipped)

    return records


def read_dns_log(path_to_file: str, strict: bool = True,
                 errors: list = None) -> List[DnsLogRecord]:

    with open(path_to_file, 'rb') as infile:
        return parse_dns_log(infile.read(), strict=strict, errors=errors)


def format_dns_log(records: Iterable[DnsLogRecord]) -> bytes:
    """Serialize records to UTF-8 log bytes, one line per record."""

    return ''.join(record.serialize() + '\n' for record in records).encode(
        'utf-8'
    )


def write_dns_log(path_to_file: str, records: Iterable[DnsLogRecord]) -> None:

    with open(path_to_file, 'wb') as outfile:
        outfile.write(format_dns_log(records))
