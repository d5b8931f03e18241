"""Problem files: the native sectioned text format and FCIDUMP.

Native format (1-based indices, ``#`` starts a comment)::

    L 4
    N 2
    alpha 1.0
    [one_body]
    1 2 -1.0          # fills h[1,2] and h[2,1]
    [two_body]
    1 2 1 2 0.5       # fills the whole symmetry orbit of V[1,2,1,2]
    [partition]
    2 2

Every entry is completed over its symmetry orbit.  Listing two entries of
the same orbit is an error, even with equal values.

FCIDUMP stores chemist-notation integrals ``(ij|kl)``; they map to
``V[i,k,j,l]`` of the ``a+_k a+_l a_x a_n`` convention used here.
"""

from __future__ import annotations

import logging
import math
import re
from pathlib import Path

import numpy as np

from .errors import ParseError
from .fock import ManyBodyProblem
from .geometry import FragmentPartition
from .models import FULL_GROUP, canonical_entries, orbit, symmetrize_two_body

log = logging.getLogger(__name__)

SECTIONS = ("one_body", "two_body", "partition")


def _fail(path, lineno, msg):
    raise ParseError(f"{path}:{lineno}: {msg}")


def _index(tok, L, path, lineno):
    try:
        i = int(tok)
    except ValueError:
        _fail(path, lineno, f"index {tok!r} is not an integer")
    if not 1 <= i <= L:
        _fail(path, lineno, f"index {i} outside 1..{L}")
    return i - 1


def _value(tok, path, lineno):
    try:
        v = float(tok)
    except ValueError:
        _fail(path, lineno, f"value {tok!r} is not a number")
    if not math.isfinite(v):
        _fail(path, lineno, f"value {tok!r} is not finite")
    return v


def parse_problem(text: str, path: str = "<string>") -> ManyBodyProblem:
    header: dict[str, str] = {}
    section = None
    one: list[tuple[int, list[str]]] = []
    two: list[tuple[int, list[str]]] = []
    sizes: list[int] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                _fail(path, lineno, f"unknown section [{section}]")
            continue
        toks = line.split()
        if section is None:
            if len(toks) != 2:
                _fail(path, lineno, "header lines must be 'key value'")
            key = toks[0].lower()
            if key in header:
                _fail(path, lineno, f"duplicate header key {key!r}")
            header[key] = toks[1]
        elif section == "one_body":
            if len(toks) != 3:
                _fail(path, lineno, "one-body entries need 'k l value'")
            one.append((lineno, toks))
        elif section == "two_body":
            if len(toks) != 5:
                _fail(path, lineno, "two-body entries need 'k l n x value'")
            two.append((lineno, toks))
        else:
            if sizes is not None:
                _fail(path, lineno, "partition given twice")
            try:
                sizes = [int(t) for t in toks]
            except ValueError:
                _fail(path, lineno, "partition sizes must be integers")
    for key in ("l", "n"):
        if key not in header:
            raise ParseError(f"{path}: missing header key {key.upper()!r}")
    try:
        L, N = int(header["l"]), int(header["n"])
        alpha = float(header.get("alpha", 1.0))
    except ValueError as err:
        raise ParseError(f"{path}: bad header value ({err})") from None
    if L < 2:
        raise ParseError(f"{path}: need L >= 2")
    h = np.zeros((L, L))
    seen1: dict[tuple[int, int], int] = {}
    for lineno, toks in one:
        k, l = (_index(t, L, path, lineno) for t in toks[:2])
        key = (min(k, l), max(k, l))
        if key in seen1:
            _fail(path, lineno, f"one-body entry ({k + 1},{l + 1}) duplicates line {seen1[key]}")
        seen1[key] = lineno
        h[k, l] = h[l, k] = _value(toks[2], path, lineno)
    V = np.zeros((L,) * 4)
    seen2: dict[tuple[int, ...], int] = {}
    for lineno, toks in two:
        idx = tuple(_index(t, L, path, lineno) for t in toks[:4])
        rep = min(orbit(idx))
        if rep in seen2:
            q = ",".join(str(i + 1) for i in idx)
            _fail(path, lineno, f"two-body entry ({q}) is a symmetric partner of line {seen2[rep]}")
        seen2[rep] = lineno
        v = _value(toks[4], path, lineno)
        for j in orbit(idx):
            V[j] = v
    part = None
    if sizes is not None:
        if sum(sizes) != L or any(s < 1 for s in sizes):
            raise ParseError(f"{path}: partition {sizes} does not cover {L} sites")
        part = FragmentPartition(sizes)
    try:
        return ManyBodyProblem(h, V, N, alpha, part, header.get("name", Path(path).stem))
    except ValueError as err:
        raise ParseError(f"{path}: {err}") from None


def read_problem(path) -> ManyBodyProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from None
    if re.match(r"\s*&FCI", text, re.IGNORECASE):
        return parse_fcidump(text, str(path))
    return parse_problem(text, str(path))


def format_problem(problem: ManyBodyProblem) -> str:
    lines = [f"L {problem.L}", f"N {problem.N}", f"alpha {float(problem.alpha)!r}"]
    if problem.name and " " not in problem.name:
        lines.append(f"name {problem.name}")
    lines.append("[one_body]")
    for k in range(problem.L):
        for l in range(k, problem.L):
            if problem.h[k, l] != 0.0:
                lines.append(f"{k + 1} {l + 1} {float(problem.h[k, l])!r}")
    lines.append("[two_body]")
    for idx, v in canonical_entries(_pair_symmetric(problem.V)):
        lines.append(" ".join(str(i + 1) for i in idx) + f" {v!r}")
    if problem.partition is not None:
        lines.append("[partition]")
        lines.append(" ".join(str(s) for s in problem.partition.sizes))
    return "\n".join(lines) + "\n"


def write_problem(problem: ManyBodyProblem, path) -> None:
    Path(path).write_text(format_problem(problem))


def _pair_symmetric(V: np.ndarray) -> np.ndarray:
    """Return ``V`` if it has the full eight-fold symmetry, else its symmetrisation."""
    dev = max(float(np.max(np.abs(V - V.transpose(p)))) for p in FULL_GROUP) if V.size else 0.0
    if dev > 1e-14 * max(1.0, float(np.max(np.abs(V)))):
        log.warning("two-body tensor lacks pair-exchange symmetry (%.2e); writing the "
                    "symmetrised tensor, which defines the same Hamiltonian", dev)
        return symmetrize_two_body(V)
    return V


# ---------------------------------------------------------------------------
# FCIDUMP


def parse_fcidump(text: str, path: str = "<string>", alpha: float = 1.0,
                  partition=None) -> ManyBodyProblem:
    m = re.search(r"&FCI(.*?)(&END|/)", text, re.IGNORECASE | re.DOTALL)
    if not m:
        raise ParseError(f"{path}: missing &FCI ... &END header")
    head = m.group(1)

    def key(name, required=True):
        km = re.search(rf"\b{name}\s*=\s*(-?\d+)", head, re.IGNORECASE)
        if not km:
            if required:
                raise ParseError(f"{path}: FCIDUMP header lacks {name}")
            return None
        return int(km.group(1))

    L, N = key("NORB"), key("NELEC")
    h = np.zeros((L, L))
    V = np.zeros((L,) * 4)
    const = 0.0
    body = text[m.end():]
    start = text[: m.end()].count("\n") + 1
    for off, raw in enumerate(body.splitlines()):
        line = raw.strip()
        if not line:
            continue
        toks = line.split()
        lineno = start + off
        if len(toks) != 5:
            _fail(path, lineno, "FCIDUMP lines need 'value i j k l'")
        v = _value(toks[0].replace("D", "E").replace("d", "e"), path, lineno)
        try:
            i, j, k, l = (int(t) for t in toks[1:])
        except ValueError:
            _fail(path, lineno, "FCIDUMP indices must be integers")
        if any(not 0 <= t <= L for t in (i, j, k, l)):
            _fail(path, lineno, f"index outside 0..{L}")
        if i == j == k == l == 0:
            const = v
        elif k == l == 0:
            if i == 0 or j == 0:
                _fail(path, lineno, "orbital-energy lines are not supported")
            h[i - 1, j - 1] = h[j - 1, i - 1] = v
        else:
            if 0 in (i, j, k, l):
                _fail(path, lineno, "malformed two-electron index")
            a, b, c, d = i - 1, j - 1, k - 1, l - 1
            # (ab|cd) with its eight-fold symmetry, stored as V[a,c,b,d]
            for p, q, r, s in ((a, b, c, d), (b, a, c, d), (a, b, d, c), (b, a, d, c),
                               (c, d, a, b), (d, c, a, b), (c, d, b, a), (d, c, b, a)):
                V[p, r, q, s] = v
    try:
        return ManyBodyProblem(h, V, N, alpha, partition, Path(path).stem, const)
    except ValueError as err:
        raise ParseError(f"{path}: {err}") from None


def read_fcidump(path, alpha: float = 1.0, partition=None) -> ManyBodyProblem:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from None
    return parse_fcidump(text, str(path), alpha, partition)


def format_fcidump(problem: ManyBodyProblem) -> str:
    L = problem.L
    V = _pair_symmetric(problem.V)
    out = [f" &FCI NORB={L},NELEC={problem.N},MS2=0,",
           "  ORBSYM=" + ",".join("1" for _ in range(L)) + ",", "  ISYM=1,", " &END"]
    for i in range(L):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(L):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    v = V[i, k, j, l]
                    if v != 0.0:
                        out.append(f"{float(v)!r} {i + 1} {j + 1} {k + 1} {l + 1}")
    for i in range(L):
        for j in range(i + 1):
            if problem.h[i, j] != 0.0:
                out.append(f"{float(problem.h[i, j])!r} {i + 1} {j + 1} 0 0")
    out.append(f"{float(problem.constant)!r} 0 0 0 0")
    return "\n".join(out) + "\n"


def write_fcidump(problem: ManyBodyProblem, path) -> None:
    Path(path).write_text(format_fcidump(problem))
