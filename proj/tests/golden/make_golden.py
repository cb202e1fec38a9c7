#!/usr/bin/env python3
"""Writes the reference PPM grids the ppm unit tests compare against.

Independent of the C++ renderer: tiles sit on a W x H lattice whose row 0 is
the bottom tile row, separated by 1-pixel black borders.
"""

import math
import pathlib

HERE = pathlib.Path(__file__).resolve().parent


def round_half_away(x):
    return math.copysign(math.floor(abs(x) + 0.5), x)


def to_byte(v, affine):
    x = (v + 0.5) * 255.0 if affine else v
    return int(min(255.0, max(0.0, round_half_away(x))))


def render(width, height, p, affine, value):
    """value(k, r, c, ch) -> normalised pixel of tile k."""
    img_w = width * (p + 1) + 1
    img_h = height * (p + 1) + 1
    pix = bytearray(img_w * img_h * 3)
    for y in range(height):
        for x in range(width):
            k = y * width + x
            top = 1 + (height - 1 - y) * (p + 1)
            left = 1 + x * (p + 1)
            for r in range(p):
                for c in range(p):
                    for ch in range(3):
                        pix[((top + r) * img_w + left + c) * 3 + ch] = to_byte(value(k, r, c, ch), affine)
    return b"P6\n%d %d\n255\n" % (img_w, img_h) + bytes(pix)


CASES = {
    "gray_2x2_p2.ppm": (2, 2, 2, True, lambda k, r, c, ch: 0.0),
    "ramp_3x2_p2.ppm": (3, 2, 2, True,
                        lambda k, r, c, ch: ((k * 13 + r * 7 + c * 5 + ch * 3) % 40) / 32 - 0.75),
    "line4_p1_raw.ppm": (4, 1, 1, False, lambda k, r, c, ch: k * 103 - 50 + ch * 0.5),
}

if __name__ == "__main__":
    for name, args in CASES.items():
        (HERE / name).write_bytes(render(*args))
        print(name)
