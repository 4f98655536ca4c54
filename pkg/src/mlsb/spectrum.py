"""Persistent marked length / Lyapunov spectrum and the family batch driver."""
from __future__ import annotations

import csv
import fcntl
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import mpmath as mp

from .errors import DataIOError, FingerprintMismatch, StoreLocked, WordError
from .geometry import BilliardTable
from .numeric import DEFAULT_PREC, check_prec, from_decimal, to_decimal
from .solver import solve_periodic
from .symbolic import (build_hn_general, canonicalize, parse_word, render_word,
                       require_admissible, tau_sigma_n)

VERSION = 1


@dataclass(frozen=True)
class Entry:
    word: str            # canonical, rendered
    length: str
    precision_bits: int
    le: str
    residual: str

    def to_json(self) -> dict:
        return {"word": self.word, "length": self.length, "precision_bits": self.precision_bits,
                "le": self.le, "residual": self.residual}

    @property
    def length_value(self):
        return from_decimal(self.length, self.precision_bits)

    @property
    def le_value(self):
        return from_decimal(self.le, self.precision_bits)


class SpectrumStore:
    """Append-only JSON-lines file keyed by canonical words.

    The first line is a header carrying the table fingerprint. The file is
    locked from the first write until close().
    """

    def __init__(self, path, table_sha256: str | None = None):
        self.path = Path(path)
        self.sha = table_sha256
        self._entries: dict[str, Entry] = {}
        self._fh = None
        if self.path.exists() and self.path.stat().st_size > 0:
            self._load()

    @classmethod
    def for_table(cls, path, table: BilliardTable) -> "SpectrumStore":
        return cls(path, table.sha256())

    # -- reading ------------------------------------------------------------
    def _load(self):
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise DataIOError(f"cannot read store: {e}") from None
        try:
            header = json.loads(lines[0])
        except (json.JSONDecodeError, IndexError):
            raise DataIOError("store header is missing or malformed") from None
        if header.get("version") != VERSION or "table_sha256" not in header:
            raise DataIOError("unsupported store header")
        if self.sha is not None and header["table_sha256"] != self.sha:
            raise FingerprintMismatch(
                f"store {self.path} belongs to table {header['table_sha256'][:12]}…, "
                f"not {self.sha[:12]}…")
        self.sha = header["table_sha256"]
        for ln in lines[1:]:
            if not ln.strip():
                continue
            try:
                rec = json.loads(ln)
                e = Entry(rec["word"], rec["length"], int(rec["precision_bits"]),
                          rec["le"], rec["residual"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                # a torn final line from an interrupted batch is skipped
                continue
            self._keep(e)

    def _keep(self, e: Entry):
        old = self._entries.get(e.word)
        if old is None or e.precision_bits >= old.precision_bits:
            self._entries[e.word] = e

    def check_table(self, table: BilliardTable):
        if self.sha is not None and self.sha != table.sha256():
            raise FingerprintMismatch("store fingerprint does not match the table")

    def get(self, word) -> Entry | None:
        return self._entries.get(render_word(canonicalize(_w(word))))

    def length(self, word):
        e = self.get(word)
        if e is None:
            raise KeyError(render_word(_w(word)))
        return e.length_value

    def __contains__(self, word) -> bool:
        return self.get(word) is not None

    def __len__(self):
        return len(self._entries)

    def entries(self) -> list[Entry]:
        return list(self._entries.values())

    # -- writing ------------------------------------------------------------
    def _open_for_write(self):
        if self._fh is not None:
            return
        if self.sha is None:
            raise DataIOError("store has no table fingerprint")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(self.path, "a+", encoding="utf-8")
        try:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            fh.close()
            raise StoreLocked(f"store {self.path} is locked by another writer") from None
        fh.seek(0, os.SEEK_END)
        if fh.tell() == 0:
            fh.write(json.dumps({"table_sha256": self.sha, "version": VERSION}) + "\n")
            fh.flush()
        self._fh = fh

    def add(self, entry: Entry):
        old = self._entries.get(entry.word)
        if old is not None and old.precision_bits >= entry.precision_bits:
            return
        self._open_for_write()
        self._fh.write(json.dumps(entry.to_json()) + "\n")
        self._fh.flush()
        self._keep(entry)

    def close(self):
        if self._fh is not None:
            fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _w(word):
    return parse_word(word) if isinstance(word, str) else tuple(int(x) for x in word)


def entry_from_orbit(orbit) -> Entry:
    P = orbit.precision
    return Entry(render_word(canonicalize(orbit.word)), to_decimal(orbit.length, P), P,
                 to_decimal(orbit.monodromy.le, P), to_decimal(orbit.gradient_norm, P))


def _solve_entry(args) -> Entry:
    table_doc, word, prec = args
    table = BilliardTable.from_json(table_doc, validate=False)
    return entry_from_orbit(solve_periodic(table, word, prec))


def ensure(store: SpectrumStore, table: BilliardTable, words: Sequence, precs: Sequence[int],
           jobs: int = 1) -> list[Entry]:
    """Cached or freshly solved entries, appended in input order."""
    store.check_table(table)
    todo = []
    for w, p in zip(words, precs):
        e = store.get(w)
        if e is None or e.precision_bits < p:
            todo.append((w, p))
    # drop duplicates (the same canonical orbit requested twice), keep max precision
    uniq: dict = {}
    for w, p in todo:
        key = render_word(canonicalize(w))
        if key not in uniq or uniq[key][1] < p:
            uniq[key] = (w, p)
    todo = list(uniq.values())
    if todo:
        if jobs > 1 and len(todo) > 1:
            doc = table.to_json()
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_solve_entry, [(doc, w, p) for w, p in todo]))
        else:
            results = [entry_from_orbit(solve_periodic(table, w, p)) for w, p in todo]
        for e in results:
            store.add(e)
    return [store.get(w) for w in words]


def mls(store: SpectrumStore, table: BilliardTable, word, precision: int = DEFAULT_PREC):
    """Length of the orbit marked by `word`."""
    w = require_admissible(_w(word), table.m)
    return ensure(store, table, [w], [check_prec(precision)])[0].length_value


def mlyap(store: SpectrumStore, table: BilliardTable, word, precision: int = DEFAULT_PREC):
    """Lyapunov exponent (1/p) log mu of the orbit marked by `word`."""
    w = require_admissible(_w(word), table.m)
    return ensure(store, table, [w], [check_prec(precision)])[0].le_value


# -- families --------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    kind: str                     # "tau-sigma-n" or "hn-prime"
    sigma: tuple
    tau: tuple                    # (tau1,) or (tau-, tau+)
    ns: tuple
    min_precision: int = DEFAULT_PREC

    def word(self, n: int) -> tuple:
        if self.kind == "tau-sigma-n":
            if len(self.tau) != 1:
                raise WordError("tau-sigma-n needs a single tau symbol")
            return tau_sigma_n(self.sigma, self.tau[0], n)
        if self.kind == "hn-prime":
            if len(self.tau) != 2:
                raise WordError("hn-prime needs tau = (tau-, tau+)")
            return build_hn_general(self.sigma, self.tau, n)
        raise WordError(f"unknown family kind {self.kind!r}")

    def multiplier(self, n: int) -> int:
        return n + 1 if self.kind == "tau-sigma-n" else 2 * n


@dataclass(frozen=True)
class FamilyRow:
    n: int
    word: tuple
    length: object
    precision_bits: int


def precision_ladder(lam_hat, n: int, floor: int = DEFAULT_PREC) -> int:
    """Mantissa keeping ~20 significant bits of a lambda^n deficit."""
    bits = 64 + math.ceil(n * math.log2(1 / float(lam_hat))) + 40
    return check_prec(max(bits, floor))


def batch_family(store: SpectrumStore, table: BilliardTable, spec: FamilySpec,
                 jobs: int = 1) -> list[FamilyRow]:
    sigma = require_admissible(spec.sigma, table.m)
    words = [spec.word(n) for n in spec.ns]
    for w in words:
        require_admissible(w, table.m)
    lam_hat = solve_periodic(table, sigma, 64).monodromy.lam
    precs = [precision_ladder(lam_hat, n, spec.min_precision) for n in spec.ns]
    top = max(precs + [spec.min_precision])
    # sigma itself at the highest precision used, so that a_n can be formed
    ensure(store, table, [sigma], [top], jobs=1)
    ents = ensure(store, table, words, precs, jobs=jobs)
    return [FamilyRow(n, w, e.length_value, e.precision_bits)
            for n, w, e in zip(spec.ns, words, ents)]


def export_csv(rows: Iterable[FamilyRow], deficits: dict | None = None) -> str:
    """CSV text with columns word,n,length,deficit (deficit blank if unknown)."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["word", "n", "length", "deficit"])
    for r in rows:
        d = "" if not deficits or r.n not in deficits else deficits[r.n]
        wr.writerow([render_word(r.word), r.n, to_decimal(r.length, r.precision_bits), d])
    return buf.getvalue()
