"""Plain-text fixture formats: channel dumps and association CSV blocks.

Channel dump::

    # simcf channel dump v1
    # L K N
    6 4 25
    # l k beta re_0 im_0 re_1 im_1 ...
    0 0 1.2e-13 0.1 -0.3 ...

one record per (l, k) in row-major order, the complex vector interleaved as
real/imaginary pairs. Association blocks are one ``# AP l`` header followed
by U comma-separated rows of K zeros and ones, blocks separated by a blank
line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .channel import ChannelSet

_DUMP_MAGIC = "# simcf channel dump v1"


def write_channel_dump(path, channels: ChannelSet) -> None:
    L, K, N = channels.h_sim.shape
    lines = [_DUMP_MAGIC, "# L K N", f"{L} {K} {N}", "# l k beta re_0 im_0 ..."]
    for l in range(L):
        for k in range(K):
            v = channels.h_sim[l, k]
            inter = np.empty(2 * N)
            inter[0::2] = v.real
            inter[1::2] = v.imag
            nums = " ".join(repr(float(x)) for x in inter)
            lines.append(f"{l} {k} {float(channels.beta[l, k])!r} {nums}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_channel_dump(path):
    """Return ``(h_sim, beta)`` arrays from a channel dump file."""
    rows = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or rows[0] != _DUMP_MAGIC:
        raise ValueError(f"{path}: not a channel dump")
    body = [ln for ln in rows if not ln.startswith("#")]
    L, K, N = (int(x) for x in body[0].split())
    h = np.zeros((L, K, N), dtype=complex)
    beta = np.zeros((L, K))
    seen = set()
    for ln in body[1:]:
        parts = ln.split()
        if len(parts) != 3 + 2 * N:
            raise ValueError(f"{path}: record has {len(parts)} fields, expected {3 + 2 * N}")
        l, k = int(parts[0]), int(parts[1])
        beta[l, k] = float(parts[2])
        vals = np.array([float(x) for x in parts[3:]])
        h[l, k] = vals[0::2] + 1j * vals[1::2]
        seen.add((l, k))
    if len(seen) != L * K:
        raise ValueError(f"{path}: expected {L * K} records, found {len(seen)}")
    return h, beta


def write_association_csv(path, A) -> None:
    A = np.asarray(A, dtype=int)
    blocks = []
    for l in range(A.shape[0]):
        rows = [f"# AP {l}"] + [",".join(str(x) for x in row) for row in A[l]]
        blocks.append("\n".join(rows))
    Path(path).write_text("\n\n".join(blocks) + "\n")


def read_association_csv(path) -> np.ndarray:
    blocks = []
    current = None
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if ln.startswith("# AP"):
            current = []
            blocks.append(current)
        elif ln:
            if current is None:
                raise ValueError(f"{path}: data row before the first '# AP' header")
            current.append([int(x) for x in ln.split(",")])
    return np.array(blocks, dtype=int)
