"""Minimal QR code generation for the pad onboarding URLs.

Byte mode only, error-correction level L, versions 1-5 (up to 106 data
bytes), best-of-eight masking. That comfortably covers pad URLs like
``http://host:8000/pad?side=left``; anything longer is rejected rather
than silently mis-encoded. Output is a boolean module matrix plus ASCII
and SVG renderers.
"""

from __future__ import annotations

from typing import List

# (data codewords, ec codewords) per version at level L; all single-block
_VERSION_TABLE = {1: (19, 7), 2: (34, 10), 3: (55, 15), 4: (80, 20), 5: (108, 26)}
_ALIGNMENT = {1: [], 2: [6, 18], 3: [6, 22], 4: [6, 26], 5: [6, 30]}

_EXP = [0] * 512
_LOG = [0] * 256
_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= 0x11D
for _i in range(255, 512):
    _EXP[_i] = _EXP[_i - 255]


def _gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def _generator_poly(degree: int) -> List[int]:
    """Coefficients of prod(x - alpha^i), descending powers, leading 1 first."""
    poly = [1]
    for i in range(degree):
        nxt = [0] * (len(poly) + 1)
        for j, c in enumerate(poly):
            nxt[j] ^= _gf_mul(c, _EXP[i])
            nxt[j + 1] ^= c
        poly = nxt
    return poly[::-1]


def _rs_remainder(data: List[int], degree: int) -> List[int]:
    gen = _generator_poly(degree)
    rem = [0] * degree
    for byte in data:
        factor = byte ^ rem[0]
        rem = rem[1:] + [0]
        if factor:
            for i in range(degree):
                rem[i] ^= _gf_mul(gen[i + 1], factor)
    return rem


def _choose_version(n_bytes: int) -> int:
    for version, (data_cw, _) in _VERSION_TABLE.items():
        # byte mode header: 4 mode bits + 8 count bits (+ terminator fits in pad)
        if n_bytes <= data_cw - 2:
            return version
    raise ValueError(f"payload of {n_bytes} bytes is too long for this encoder")


def _codewords(payload: bytes, version: int) -> List[int]:
    data_cw, ec_cw = _VERSION_TABLE[version]
    bits: List[int] = []

    def push(value: int, width: int) -> None:
        for i in reversed(range(width)):
            bits.append((value >> i) & 1)

    push(0b0100, 4)  # byte mode
    push(len(payload), 8)
    for b in payload:
        push(b, 8)
    push(0, min(4, data_cw * 8 - len(bits)))  # terminator
    while len(bits) % 8:
        bits.append(0)
    data = [
        int("".join(map(str, bits[i:i + 8])), 2) for i in range(0, len(bits), 8)
    ]
    pad = (0xEC, 0x11)
    i = 0
    while len(data) < data_cw:
        data.append(pad[i % 2])
        i += 1
    return data + _rs_remainder(data, ec_cw)


def _empty_matrix(size: int) -> List[List[int]]:
    return [[-1] * size for _ in range(size)]


def _place_finder(m: List[List[int]], row: int, col: int) -> None:
    for r in range(-1, 8):
        for c in range(-1, 8):
            rr, cc = row + r, col + c
            if not (0 <= rr < len(m) and 0 <= cc < len(m)):
                continue
            inside = 0 <= r <= 6 and 0 <= c <= 6
            ring = inside and (r in (0, 6) or c in (0, 6))
            core = 2 <= r <= 4 and 2 <= c <= 4
            m[rr][cc] = 1 if (ring or core) else 0


def _place_function_patterns(m: List[List[int]], version: int) -> None:
    size = len(m)
    _place_finder(m, 0, 0)
    _place_finder(m, 0, size - 7)
    _place_finder(m, size - 7, 0)
    for i in range(8, size - 8):
        bit = 1 if i % 2 == 0 else 0
        m[6][i] = bit
        m[i][6] = bit
    centers = _ALIGNMENT[version]
    for r in centers:
        for c in centers:
            if m[r][c] != -1:
                continue  # overlaps a finder
            for dr in range(-2, 3):
                for dc in range(-2, 3):
                    ring = max(abs(dr), abs(dc)) != 1
                    m[r + dr][c + dc] = 1 if ring else 0
    # reserve format info areas
    for i in range(9):
        if m[8][i] == -1:
            m[8][i] = 0
        if m[i][8] == -1:
            m[i][8] = 0
    for i in range(8):
        if m[8][size - 1 - i] == -1:
            m[8][size - 1 - i] = 0
        if m[size - 1 - i][8] == -1:
            m[size - 1 - i][8] = 0
    m[size - 8][8] = 1  # the always-dark module


def _data_positions(m: List[List[int]]) -> List[tuple]:
    size = len(m)
    positions = []
    col = size - 1
    upward = True
    while col > 0:
        if col == 6:
            col -= 1  # skip the vertical timing column entirely
        rows = range(size - 1, -1, -1) if upward else range(size)
        for row in rows:
            for c in (col, col - 1):
                if m[row][c] == -1:
                    positions.append((row, c))
        upward = not upward
        col -= 2
    return positions


_MASKS = [
    lambda r, c: (r + c) % 2 == 0,
    lambda r, c: r % 2 == 0,
    lambda r, c: c % 3 == 0,
    lambda r, c: (r + c) % 3 == 0,
    lambda r, c: (r // 2 + c // 3) % 2 == 0,
    lambda r, c: (r * c) % 2 + (r * c) % 3 == 0,
    lambda r, c: ((r * c) % 2 + (r * c) % 3) % 2 == 0,
    lambda r, c: ((r + c) % 2 + (r * c) % 3) % 2 == 0,
]


def _format_bits(mask: int) -> int:
    # level L indicator is 0b01
    data = (0b01 << 3) | mask
    rem = data << 10
    gen = 0b10100110111
    for i in range(14, 9, -1):
        if rem & (1 << i):
            rem ^= gen << (i - 10)
    return ((data << 10) | rem) ^ 0b101010000010010


def _place_format(m: List[List[int]], mask: int) -> None:
    size = len(m)
    bits = _format_bits(mask)
    positions_a = [
        (8, 0), (8, 1), (8, 2), (8, 3), (8, 4), (8, 5), (8, 7), (8, 8),
        (7, 8), (5, 8), (4, 8), (3, 8), (2, 8), (1, 8), (0, 8),
    ]
    positions_b = [
        (size - 1, 8), (size - 2, 8), (size - 3, 8), (size - 4, 8),
        (size - 5, 8), (size - 6, 8), (size - 7, 8),
        (8, size - 8), (8, size - 7), (8, size - 6), (8, size - 5),
        (8, size - 4), (8, size - 3), (8, size - 2), (8, size - 1),
    ]
    for i in range(15):
        bit = (bits >> (14 - i)) & 1
        r, c = positions_a[i]
        m[r][c] = bit
        r, c = positions_b[i]
        m[r][c] = bit


def _penalty(m: List[List[int]]) -> int:
    size = len(m)
    score = 0
    for grid in (m, list(zip(*m))):
        for line in grid:
            run = 1
            for i in range(1, size):
                if line[i] == line[i - 1]:
                    run += 1
                else:
                    if run >= 5:
                        score += 3 + (run - 5)
                    run = 1
            if run >= 5:
                score += 3 + (run - 5)
    for r in range(size - 1):
        for c in range(size - 1):
            block = {m[r][c], m[r][c + 1], m[r + 1][c], m[r + 1][c + 1]}
            if len(block) == 1:
                score += 3
    pattern = [1, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0]
    for grid in (m, list(zip(*m))):
        for line in grid:
            line = list(line)
            for i in range(size - 10):
                window = line[i:i + 11]
                if window == pattern or window == pattern[::-1]:
                    score += 40
    dark = sum(sum(row) for row in m)
    ratio = dark * 100 // (size * size)
    score += 10 * (abs(ratio - 50) // 5)
    return score


def encode(text: str) -> List[List[int]]:
    """Encode text into a QR module matrix (1 = dark)."""
    payload = text.encode("utf-8")
    version = _choose_version(len(payload))
    size = 17 + 4 * version
    codewords = _codewords(payload, version)

    template = _empty_matrix(size)
    _place_function_patterns(template, version)
    positions = _data_positions(template)
    bits = []
    for cw in codewords:
        for i in reversed(range(8)):
            bits.append((cw >> i) & 1)
    bits.extend([0] * (len(positions) - len(bits)))  # remainder bits

    best = None
    best_score = None
    for mask in range(8):
        m = [row[:] for row in template]
        for (r, c), bit in zip(positions, bits):
            m[r][c] = bit ^ (1 if _MASKS[mask](r, c) else 0)
        _place_format(m, mask)
        score = _penalty(m)
        if best_score is None or score < best_score:
            best, best_score = m, score
    return best


def to_ascii(matrix: List[List[int]], invert: bool = True) -> str:
    """Terminal rendering, two characters per module, quiet zone included."""
    dark, light = ("  ", "██") if invert else ("██", "  ")
    size = len(matrix)
    quiet = 2
    width = size + 2 * quiet
    lines = [light * width for _ in range(quiet)]
    for row in matrix:
        cells = "".join(dark if cell else light for cell in row)
        lines.append(light * quiet + cells + light * quiet)
    lines.extend(light * width for _ in range(quiet))
    return "\n".join(lines)


def to_svg(matrix: List[List[int]], scale: int = 8) -> str:
    size = len(matrix)
    quiet = 4
    dim = (size + 2 * quiet) * scale
    rects = []
    for r, row in enumerate(matrix):
        for c, cell in enumerate(row):
            if cell:
                rects.append(
                    f'<rect x="{(c + quiet) * scale}" y="{(r + quiet) * scale}" '
                    f'width="{scale}" height="{scale}"/>'
                )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{dim}" height="{dim}" '
        f'viewBox="0 0 {dim} {dim}"><rect width="{dim}" height="{dim}" '
        f'fill="#fff"/><g fill="#000">{"".join(rects)}</g></svg>'
    )
