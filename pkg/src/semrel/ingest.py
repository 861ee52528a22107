"""Contract acquisition: creation-transaction detection, hex decoding,
manifest loading, and an opt-in JSON-RPC bytecode fetcher.

The manifest format is line-delimited JSON, one record per line:

    {"id": str, "bytecode_path"?: str, "address"?: str,
     "label": 0|1|null, "deployed_at"?: ISO-8601 str, "source"?: str}

Exactly one of ``bytecode_path``/``address`` is required. Offline use is
the default; nothing here touches the network except :func:`fetch_bytecode`.
"""

from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Optional

import requests

from .errors import (
    DuplicateIdError,
    EmptyCodeError,
    MissingFileError,
    NetworkError,
    NonHexCharacterError,
    OddLengthError,
    ParseError,
    RpcError,
)

__all__ = [
    "TransactionStub",
    "ContractRecord",
    "ManifestEntry",
    "DatasetManifest",
    "detect_creation",
    "hex_decode",
    "fetch_bytecode",
    "load_manifest",
    "save_manifest",
    "manifest_from_csv",
    "read_bytecode_file",
    "resolve_record",
]

ZERO_ADDRESS = b"\x00" * 20

_HEX_DIGITS = frozenset(string.hexdigits)


@dataclass(frozen=True)
class TransactionStub:
    """The slice of a transaction needed for creation detection."""

    hash: bytes
    to: Optional[bytes]
    input: bytes = b""


@dataclass
class ContractRecord:
    """A contract with resolved bytecode, ready for analysis."""

    id: str
    bytecode: bytes
    label: Optional[int] = None
    deployed_at: Optional[datetime] = None
    source: str = ""


@dataclass(frozen=True)
class ManifestEntry:
    """One manifest row; bytecode is still a reference, not bytes."""

    id: str
    bytecode_path: Optional[str] = None
    address: Optional[str] = None
    label: Optional[int] = None
    deployed_at: Optional[datetime] = None
    source: str = ""


@dataclass
class DatasetManifest:
    records: list[ManifestEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def detect_creation(tx: TransactionStub) -> bool:
    """A creation transaction has no recipient (or the zero address)."""
    return tx.to is None or tx.to == ZERO_ADDRESS


def hex_decode(text: str) -> bytes:
    """Decode hex text with optional ``0x`` prefix into bytes."""
    body = text.strip()
    if body.startswith(("0x", "0X")):
        body = body[2:]
    if len(body) % 2:
        raise OddLengthError(f"odd number of hex nibbles ({len(body)})")
    bad = next((c for c in body if c not in _HEX_DIGITS), None)
    if bad is not None:
        raise NonHexCharacterError(f"non-hex character {bad!r}")
    return bytes.fromhex(body)


def _valid_address(addr: str) -> bool:
    body = addr[2:] if addr.startswith(("0x", "0X")) else addr
    return len(body) == 40 and all(c in _HEX_DIGITS for c in body)


def fetch_bytecode(endpoint: str, address: str, timeout: float = 30.0) -> bytes:
    """Fetch deployed code for ``address`` via the node's eth_getCode.

    Returns complete bytes or raises; never a partial body.
    """
    if not _valid_address(address):
        raise ParseError(f"malformed address {address!r}")
    payload = {
        "jsonrpc": "2.0",
        "method": "eth_getCode",
        "params": [address, "latest"],
        "id": 1,
    }
    try:
        resp = requests.post(endpoint, json=payload, timeout=timeout)
        resp.raise_for_status()
        body = resp.json()
    except (requests.RequestException, ValueError) as exc:
        raise NetworkError(f"eth_getCode against {endpoint} failed: {exc}") from exc
    if "error" in body:
        err = body["error"] or {}
        raise RpcError(int(err.get("code", -1)), str(err.get("message", "unknown")))
    code = hex_decode(str(body.get("result", "")))
    if not code:
        raise EmptyCodeError(f"{address} has no code (externally owned account)")
    return code


def _parse_timestamp(raw: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"{where}: bad deployed_at {raw!r}") from exc


def _entry_from_obj(obj: dict, where: str) -> ManifestEntry:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    cid = obj.get("id")
    if not isinstance(cid, str) or not cid:
        raise ParseError(f"{where}: missing or empty id")
    path = obj.get("bytecode_path")
    addr = obj.get("address")
    if (path is None) == (addr is None):
        raise ParseError(f"{where}: exactly one of bytecode_path/address required")
    if addr is not None and not _valid_address(addr):
        raise ParseError(f"{where}: malformed address {addr!r}")
    label = obj.get("label")
    if label not in (0, 1, None):
        raise ParseError(f"{where}: label must be 0, 1, or null, got {label!r}")
    ts = obj.get("deployed_at")
    deployed = _parse_timestamp(ts, where) if ts is not None else None
    return ManifestEntry(
        id=cid,
        bytecode_path=path,
        address=addr,
        label=label,
        deployed_at=deployed,
        source=str(obj.get("source", "") or ""),
    )


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a line-delimited JSON manifest."""
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(str(p))
    records: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        where = f"{p.name}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{where}: invalid JSON ({exc.msg})") from exc
        entry = _entry_from_obj(obj, where)
        if entry.id in seen:
            raise DuplicateIdError(f"{where}: duplicate id {entry.id!r}")
        seen.add(entry.id)
        records.append(entry)
    return DatasetManifest(records)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest back out; inverse of :func:`load_manifest`."""
    lines = []
    for e in manifest:
        obj: dict = {"id": e.id, "label": e.label}
        if e.bytecode_path is not None:
            obj["bytecode_path"] = e.bytecode_path
        if e.address is not None:
            obj["address"] = e.address
        if e.deployed_at is not None:
            obj["deployed_at"] = e.deployed_at.isoformat()
        if e.source:
            obj["source"] = e.source
        lines.append(json.dumps(obj, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def manifest_from_csv(path: str | Path) -> DatasetManifest:
    """Convenience converter from CSV with the same column names."""
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(str(p))
    records: list[ManifestEntry] = []
    seen: set[str] = set()
    with p.open(newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            obj = {k: (v if v != "" else None) for k, v in row.items()}
            if obj.get("label") is not None:
                try:
                    obj["label"] = int(obj["label"])  # type: ignore[arg-type]
                except ValueError as exc:
                    raise ParseError(f"{p.name}:{lineno}: bad label") from exc
            entry = _entry_from_obj(obj, f"{p.name}:{lineno}")
            if entry.id in seen:
                raise DuplicateIdError(f"{p.name}:{lineno}: duplicate id {entry.id!r}")
            seen.add(entry.id)
            records.append(entry)
    return DatasetManifest(records)


def read_bytecode_file(path: str | Path) -> bytes:
    """Read a raw-hex bytecode file (optional 0x prefix and newline)."""
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(str(p))
    return hex_decode(p.read_text())


def resolve_record(
    entry: ManifestEntry,
    base_dir: str | Path = ".",
    endpoint: Optional[str] = None,
) -> ContractRecord:
    """Materialize a manifest entry into a ContractRecord.

    File-backed entries read from disk relative to ``base_dir``;
    address-backed entries need an RPC ``endpoint`` (opt-in).
    """
    if entry.bytecode_path is not None:
        code = read_bytecode_file(Path(base_dir) / entry.bytecode_path)
    else:
        if endpoint is None:
            raise NetworkError(
                f"record {entry.id} is address-backed; pass an RPC endpoint to fetch it"
            )
        code = fetch_bytecode(endpoint, entry.address or "")
    return ContractRecord(
        id=entry.id,
        bytecode=code,
        label=entry.label,
        deployed_at=entry.deployed_at,
        source=entry.source,
    )
