"""Reference closed forms of the trajectory matrices for k = 1, 2, 3.

These are transcribed formulas, kept independent of the builder so that
:func:`kintraj.verifier.cross_check_closed_forms` compares two separate
routes to the same matrices.
"""

from fractions import Fraction

from kintraj.exact import ONE, R, SIGMA, PolyMatrix, r_power

r = R
s = SIGMA
sqrt_r = r_power(Fraction(1, 2))
cbrt_r = r_power(Fraction(1, 3))
qrt_r = r_power(Fraction(1, 4))
sxrt_r = r_power(Fraction(1, 6))
r_m32 = r_power(Fraction(-3, 2))
inv_s = s**-1


def _a1():
    return PolyMatrix(
        [
            [7 * r**3 - 6 * r_power(Fraction(7, 2)), 4 * (sqrt_r - 1) * r**3 * s],
            [Fraction(21, 2) * inv_s * (r - r_power(Fraction(3, 2))), 7 * r_power(Fraction(3, 2)) - 6 * r],
        ]
    )


def _b1():
    return PolyMatrix(
        [
            [1 + (6 * sqrt_r - 7) * r**3, (sqrt_r - 1) ** 2 * (1 + 2 * sqrt_r) * r**2 * s],
            [
                Fraction(21, 2) * inv_s * (-r + r_power(Fraction(3, 2))),
                1 - Fraction(9, 2) * r + Fraction(7, 2) * r_power(Fraction(3, 2)),
            ],
        ]
    )


def _det_b1():
    return Fraction(1, 2) * (sqrt_r - 1) ** 4 * (1 + sqrt_r) * (
        2 + 6 * sqrt_r + 5 * r + 6 * r_power(Fraction(3, 2)) + 2 * r**2
    )


def _inverse_last_column_1():
    a = _a1()
    det = r_power(Fraction(9, 2))
    return [(-a[0, 1]) / det, a[0, 0] / det]


def _a2():
    return PolyMatrix(
        [
            [
                (-495 * cbrt_r + 320 * sqrt_r + 176) * r**5,
                -2 * (-153 * cbrt_r + 100 * sqrt_r + 53) * r**5 * s,
                24 * (2 * r_power(Fraction(11, 2)) - 3 * r_power(Fraction(16, 3)) + r**5) * s**2,
            ],
            [
                440 * (2 * r_power(Fraction(7, 2)) - 3 * r_power(Fraction(10, 3)) + r**3) * inv_s,
                (816 * cbrt_r - 550 * sqrt_r - 265) * r**3,
                12 * (-16 * cbrt_r + 11 * sqrt_r + 5) * r**3 * s,
            ],
            [
                220 * (-10 * cbrt_r + 7 * sqrt_r + 3) * r * s**-2,
                Fraction(-5, 2) * (-544 * cbrt_r + 385 * sqrt_r + 159) * r * inv_s,
                (-320 * cbrt_r + 231 * sqrt_r + 90) * r,
            ],
        ]
    )


def _inverse_last_column_2():
    return [
        24 * (-3 * sxrt_r + sqrt_r + 2) * s**2 * r_m32,
        12 * (-16 * sxrt_r + 5 * sqrt_r + 11) * s * r_m32,
        (-320 * sxrt_r + 90 * sqrt_r + 231) * r_m32,
    ]


def _a3():
    def p(c3, c4, c2, c0):
        return c3 * cbrt_r + c4 * qrt_r + c2 * sqrt_r + c0 * ONE

    r7, r5, r3 = r**7, r**5, r**3
    return PolyMatrix(
        [
            [
                p(82215, -73920, -17864, 9570) * r7,
                2 * p(-25515, 22880, 5572, -2937) * r7 * s,
                -8 * p(-1701, 1520, 374, -193) * r7 * s**2,
                192 * p(-9, 8, 2, -1) * r7 * s**3,
            ],
            [
                -33495 * p(-9, 8, 2, -1) * r5 * inv_s,
                p(-187110, 165880, 41790, -20559) * r5,
                -4 * p(-12474, 11020, 2805, -1351) * r5 * s,
                96 * p(-66, 58, 15, -7) * r5 * s**2,
            ],
            [
                Fraction(-33495, 2) * p(-48, 42, 11, -5) * r3 * s**-2,
                Fraction(1155, 2) * p(-864, 754, 199, -89) * r3 * inv_s,
                p(133056, -115710, -30855, 13510) * r3,
                24 * p(-704, 609, 165, -70) * r3 * s,
            ],
            [
                Fraction(-33495, 8) * p(-320, 273, 77, -30) * r * s**-3,
                Fraction(1155, 8) * p(-5760, 4901, 1393, -534) * r * s**-2,
                Fraction(-105, 4) * p(-8448, 7163, 2057, -772) * r * inv_s,
                p(-28160, 23751, 6930, -2520) * r,
            ],
        ]
    )


def _inverse_last_column_3():
    return [
        -192 * (-8 * qrt_r + 9 * sxrt_r + sqrt_r - 2) * s**3 * r_m32,
        -96 * (-58 * qrt_r + 66 * sxrt_r + 7 * sqrt_r - 15) * s**2 * r_m32,
        -24 * (-609 * qrt_r + 704 * sxrt_r + 70 * sqrt_r - 165) * s * r_m32,
        (23751 * qrt_r - 28160 * sxrt_r - 2520 * sqrt_r + 6930) * r_m32,
    ]


def reference(k: int) -> dict:
    """Closed forms known for ``k``: keys among ``A``, ``B``, ``det_B``, ``inverse_last_column``."""
    if k == 1:
        return {"A": _a1(), "B": _b1(), "det_B": _det_b1(), "inverse_last_column": _inverse_last_column_1()}
    if k == 2:
        return {"A": _a2(), "inverse_last_column": _inverse_last_column_2()}
    if k == 3:
        return {"A": _a3(), "inverse_last_column": _inverse_last_column_3()}
    raise ValueError(f"no closed forms recorded for k={k}")
