"""Smoke test for the haarmoments_py extension.

Build and install first:  pip install --no-build-isolation ./crates/python
"""
import json
import math
from fractions import Fraction

import haarmoments_py as hm


def frac(pair):
    return Fraction(int(pair[0]), int(pair[1]))


def main():
    table = dict(hm.wg_table(2, 5))
    assert frac(table["[1,1]"]) == Fraction(1, 24)
    assert frac(table["[2]"]) == Fraction(-1, 120)

    for n in range(2, 9):
        assert frac(hm.haar_moment([1, 1], [1, 1], [1, 1], [1, 1], n)) == Fraction(2, n * (n + 1))
    assert frac(hm.haar_moment_orth([1, 1, 1, 1], [1, 1, 1, 1], 4)) == Fraction(3, 24)
    assert hm.hurwitz_count([1, 2, 0], 0) == 2

    kesten = hm.Pencil.uniform_scalar(2, 0.0, 1.0)
    assert abs(kesten.rho_k(7) - math.sqrt(3)) < 1e-12
    assert abs(kesten.ball_norm_estimate(20) - 2 * math.sqrt(3)) < 0.15
    line = hm.Pencil.uniform_scalar(1, 0.0, 1.0)
    assert abs(line.resolvent_oo(3.0)[0][0] - 1 / math.sqrt(5)) < 1e-6
    p = hm.Pencil.from_json(kesten.to_json())
    assert p.d == 2 and p.coeff_dim == 1

    random_pencil = hm.Pencil.random_self_adjoint(2, 2, 3)
    mu = 1.05 * random_pencil.ball_norm_estimate(64) + 0.1
    assert random_pencil.hat_rho_k(mu, 10) < 1.0

    model = hm.TensorModel(30, 0, 1, kesten, 5)
    assert model.total_dim == 30
    assert abs(model.restricted_norm() - 2 * math.sqrt(3)) < 0.6
    rows = hm.freeness_experiment([20], 0, 1, kesten, 1, 2)
    assert len(rows) == 2 and rows == hm.freeness_experiment([20], 0, 1, kesten, 1, 2)

    poly = {"d": 1, "terms": [
        {"word": [0], "matrix": [[[1.0, 0.0]]]},
        {"word": [1], "matrix": [[[1.0, 0.0]]]},
    ]}
    c, shift, residual = hm.sqrt_pencil(json.dumps(poly))
    assert residual < 1e-8 and abs(shift - 3 * c) < 1e-12
    assert abs(hm.poly_norm(json.dumps(poly)) - 2.0) < 0.05

    weights = {"weights": [[[[0.5, 0.0]]], [[[0.3, 0.1]]], [[[0.2, 0.0]]], [[[0.1, -0.2]]]]}
    passed, checked, _ = hm.spectral_mapping(json.dumps(weights), "left")
    assert passed and checked > 0

    try:
        hm.Pencil.from_json("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed pencil accepted")

    print("haarmoments_py smoke test passed")


if __name__ == "__main__":
    main()
