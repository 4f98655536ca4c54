"""Command-line front end.

Exit codes: 0 ok, 1 I/O, 2 invalid table, 3 solver, 4 bad word or family,
5 insufficient data, 6 insufficient precision.
"""
from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import mpmath as mp

from . import inverse, svg
from .errors import DataIOError, InsufficientData, MLSBError, WordError
from .geometry import BilliardTable, check_non_eclipse
from .numeric import DEFAULT_PREC, check_prec, to_decimal
from .solver import solve_periodic
from .spectrum import FamilySpec, SpectrumStore, batch_family, ensure, export_csv
from .symbolic import parse_word, render_word, require_admissible


@dataclass
class RunConfig:
    table: str | None
    precision: int
    store: str | None
    jobs: int
    out: str | None
    round: int | None

    def load_table(self, validate=True) -> BilliardTable:
        if not self.table:
            raise DataIOError("--table is required for this command")
        return BilliardTable.load(self.table, validate=validate)

    def open_store(self, table=None) -> SpectrumStore:
        if not self.store:
            raise DataIOError("no store: pass --store or set MLSB_STORE")
        if table is not None:
            return SpectrumStore.for_table(self.store, table)
        if not Path(self.store).exists():
            raise InsufficientData(f"store {self.store} does not exist")
        return SpectrumStore(self.store)

    def emit(self, text: str):
        if self.out:
            try:
                Path(self.out).write_text(text, encoding="utf-8")
            except OSError as e:
                raise DataIOError(f"cannot write {self.out}: {e}") from None
        else:
            click.echo(text, nl=not text.endswith("\n"))

    def fmt(self, x, prec) -> str:
        if self.round is not None:
            return mp.nstr(x, self.round)
        return to_decimal(x, prec)


def _ns(text: str) -> tuple:
    try:
        if ".." in text:
            a, b = text.split("..")
            return tuple(range(int(a), int(b) + 1))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise WordError(f"bad n range {text!r}; use a..b or a,b,c") from None


def _tau(text: str) -> tuple:
    if "," in text:
        return tuple(int(x) for x in text.split(","))
    return parse_word(text)


def _spec(family, sigma, tau, n, prec) -> FamilySpec:
    if not (sigma and tau and n):
        raise WordError("family needs --sigma, --tau and --n")
    kind = {"tau-sigma-n": "tau-sigma-n", "hn-prime": "hn-prime"}[family]
    return FamilySpec(kind, parse_word(sigma), _tau(tau), _ns(n), prec)


def _deficits(store, spec):
    """D_n = a_n - L_inf when the tail fit is possible, else {}."""
    try:
        series = inverse.deficit_series(store, spec)
        tail = inverse.estimate_linfty_lambda(series)
    except MLSBError:
        return {}, None
    with mp.workprec(series.prec):
        return {n: a - tail.linfty for n, a in series.terms.items()}, series


@click.group()
@click.option("--table", type=str, default=None, help="table JSON file")
@click.option("--precision", type=int, default=DEFAULT_PREC, show_default=True,
              help="working precision in bits (53..4096)")
@click.option("--store", type=str, default=None, envvar="MLSB_STORE",
              help="spectrum store (default $MLSB_STORE)")
@click.option("--jobs", type=int, default=1, show_default=True, help="worker processes")
@click.option("--out", type=str, default=None, help="output path (default stdout)")
@click.option("--round", "round_", type=int, default=None,
              help="print reals with this many significant digits")
@click.pass_context
def cli(ctx, table, precision, store, jobs, out, round_):
    """Dispersing billiards: orbits, length spectra and their inversion."""
    check_prec(precision)
    ctx.obj = RunConfig(table, precision, store, max(1, jobs), out, round_)


@cli.group("table")
def table_group():
    """Table utilities."""


@table_group.command("check")
@click.pass_obj
def table_check(cfg: RunConfig):
    """Validate convexity and the non-eclipse condition."""
    t = cfg.load_table(validate=False)
    cert = check_non_eclipse(t)
    rep = {"valid": True, "obstacles": t.m, "sha256": t.sha256(),
           "min_clearance": f"{cert.min_clearance:.12g}",
           "worst_triple": list(cert.worst),
           "clearances": [{"pair": [i, j], "other": k, "clearance": f"{c:.12g}"}
                          for (i, j, k), c in sorted(cert.clearances.items())]}
    cfg.emit(json.dumps(rep, indent=2) + "\n")


@cli.command("orbit")
@click.option("--word", required=True, help="itinerary, e.g. 3212")
@click.option("--svg", "svg_path", default=None, help="also write a figure")
@click.pass_obj
def orbit_cmd(cfg: RunConfig, word, svg_path):
    """Solve the periodic orbit of a word."""
    t = cfg.load_table()
    w = require_admissible(parse_word(word), t.m)
    orb = solve_periodic(t, w, cfg.precision)
    doc = orb.to_json()
    doc["lyapunov_exponent"] = to_decimal(orb.monodromy.le, cfg.precision)
    doc["lambda"] = to_decimal(orb.monodromy.lam, cfg.precision)
    if cfg.round is not None:
        doc["length"] = mp.nstr(orb.length, cfg.round)
    cfg.emit(json.dumps(doc, indent=2) + "\n")
    if svg_path:
        Path(svg_path).write_text(svg.table_svg(t, [orb]), encoding="utf-8")


@cli.command("spectrum")
@click.option("--family", type=click.Choice(["tau-sigma-n", "hn-prime"]), default="tau-sigma-n")
@click.option("--sigma", default=None)
@click.option("--tau", default=None, help="tau1, or tau-,tau+ for hn-prime")
@click.option("--n", "n", default=None, help="a..b or a,b,c")
@click.option("--words", default=None, help="explicit comma-free words separated by spaces")
@click.pass_obj
def spectrum_cmd(cfg: RunConfig, family, sigma, tau, n, words):
    """Compute and store lengths; print word,n,length,deficit rows."""
    t = cfg.load_table()
    with cfg.open_store(t) as store:
        if words:
            ws = [require_admissible(parse_word(x), t.m) for x in words.split()]
            ents = ensure(store, t, ws, [cfg.precision] * len(ws), jobs=cfg.jobs)
            lines = ["word,n,length,deficit"]
            lines += [f"{render_word(w)},,{cfg.fmt(e.length_value, e.precision_bits)},"
                      for w, e in zip(ws, ents)]
            cfg.emit("\n".join(lines) + "\n")
            return
        spec = _spec(family, sigma, tau, n, cfg.precision)
        rows = batch_family(store, t, spec, jobs=cfg.jobs)
        D, series = _deficits(store, spec)
        dd = {k: cfg.fmt(v, series.precision[k]) for k, v in D.items()} if D else None
        if cfg.round is not None:
            lines = ["word,n,length,deficit"]
            for r in rows:
                lines.append(f"{render_word(r.word)},{r.n},{mp.nstr(r.length, cfg.round)},"
                             f"{dd.get(r.n, '') if dd else ''}")
            cfg.emit("\n".join(lines) + "\n")
        else:
            cfg.emit(export_csv(rows, dd))


@cli.command("invert")
@click.option("--mode", type=click.Choice(["period2", "lyapunov", "discs"]), required=True)
@click.option("--family", type=click.Choice(["tau-sigma-n", "hn-prime"]), default=None)
@click.option("--sigma", default=None)
@click.option("--tau", default=None)
@click.option("--n", "n", default=None)
@click.option("--m", "m", type=int, default=None, help="number of discs (discs mode)")
@click.pass_obj
def invert_cmd(cfg: RunConfig, mode, family, sigma, tau, n, m):
    """Blind inversion from the store; prints an InversionReport."""
    store = cfg.open_store()
    if mode == "period2":
        rep = inverse.invert_period2(store, _spec(family or "tau-sigma-n", sigma, tau, n, 64))
        doc = rep.to_json()
    elif mode == "lyapunov":
        rep = inverse.invert_lyapunov(store, _spec(family or "hn-prime", sigma, tau, n, 64))
        doc = rep.to_json()
    else:
        if m is None:
            raise InsufficientData("discs mode needs --m")
        rec, pairs, lam_err = inverse.invert_discs(store, m, _ns(n or "0..11"),
                                                   max(cfg.precision, 128))
        P = max(cfg.precision, 128)
        doc = {"mode": "discs", "m": m, "precision_bits": P,
               "radii": [to_decimal(r, P) for r in rec.radii],
               "centers": [[to_decimal(c[0], P), to_decimal(c[1], P)] for c in rec.centers],
               "distances": {f"{i}{j}": to_decimal(d, P) for (i, j), d in sorted(rec.distances.items())},
               "pairs": {f"{i}{j}": {"L": to_decimal(v[0], P), "lambda": to_decimal(v[1], P),
                                     "lambda_error": to_decimal(lam_err[(i, j)], 64)}
                         for (i, j), v in sorted(pairs.items())},
               "residual": to_decimal(rec.residual, 64),
               "non_eclipse": rec.non_eclipse}
    cfg.emit(json.dumps(doc, indent=2) + "\n")


@cli.command("plot")
@click.argument("what", type=click.Choice(["table", "orbit", "deficit"]))
@click.option("--word", default=None)
@click.option("--family", type=click.Choice(["tau-sigma-n", "hn-prime"]), default="tau-sigma-n")
@click.option("--sigma", default=None)
@click.option("--tau", default=None)
@click.option("--n", "n", default=None)
@click.pass_obj
def plot_cmd(cfg: RunConfig, what, word, family, sigma, tau, n):
    """Deterministic SVG figures."""
    if what == "deficit":
        store = cfg.open_store()
        spec = _spec(family, sigma, tau, n, 64)
        D, series = _deficits(store, spec)
        if not D:
            raise InsufficientData("store lacks a usable deficit series")
        ks = sorted(k for k in D if D[k] != 0)
        cfg.emit(svg.deficit_svg(ks, [float(D[k]) for k in ks],
                                 f"deficits {render_word(spec.sigma)}"))
        return
    t = cfg.load_table()
    orbits = []
    if what == "orbit":
        if not word:
            raise WordError("plot orbit needs --word")
        orbits = [solve_periodic(t, require_admissible(parse_word(word), t.m), cfg.precision)]
    cfg.emit(svg.table_svg(t, orbits))


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="mlsb", standalone_mode=False)
    except MLSBError as e:
        click.echo(f"error: {e}", err=True)
        trace = getattr(e, "trace", None)
        if trace:
            for row in trace:
                click.echo(f"  {row}", err=True)
        sys.exit(e.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as e:
        e.show()
        sys.exit(4)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
