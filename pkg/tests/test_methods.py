from fractions import Fraction

import numpy as np
import pytest

from ssplmm.methods import (BUILTIN_METHODS, Family, MethodTable, canonicalize_downwind,
                            dlmm32, forward_euler, lmm32, moment_vector,
                            moment_vector_perturbed, order_residuals, plmm32,
                            satisfies_order, ssp_coefficient_pair, to_underlying)


def test_table_shapes_are_validated():
    with pytest.raises(ValueError):
        MethodTable(2, Family.CLASSICAL, [1.0], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        MethodTable(2, Family.CLASSICAL, [0.5, 0.5], [0.0, 1.0])
    with pytest.raises(ValueError):
        MethodTable(0, Family.CLASSICAL, [], [0.0])
    with pytest.raises(ValueError):
        MethodTable(65, Family.CLASSICAL, np.ones(65) / 65, np.zeros(66))


def test_explicit_flag_requires_zero_implicit_weights():
    with pytest.raises(ValueError):
        MethodTable(1, Family.CLASSICAL, [1.0], [0.0, 1.0], explicit=True)
    m = MethodTable(1, Family.CLASSICAL, [1.0], [0.0, 1.0], explicit=False)
    assert m.implicit


def test_classical_rejects_second_weights():
    with pytest.raises(ValueError):
        MethodTable(1, Family.CLASSICAL, [1.0], [1.0, 0.0], [0.5, 0.0])


def test_arrays_are_read_only():
    m = dlmm32()
    with pytest.raises(ValueError):
        m.alpha[0] = 1.0


@pytest.mark.parametrize("method,p", [(lmm32(), 2), (forward_euler(), 1), (dlmm32(), 2),
                                      (plmm32(), 2)])
def test_order_residuals_vanish(method, p):
    res = order_residuals(method, p)
    assert res.shape == (p + 1,)
    assert np.all(res == 0.0)


def test_order_residuals_third_order_fails_for_two_step_table():
    # sum alpha j^3 + 3 sum beta j^2 - 8 = 0.5 + 3 * 1.75 - 8
    assert order_residuals(lmm32(), 3)[3] == pytest.approx(-2.25)
    assert not satisfies_order(lmm32(), 3)


def test_additive_residual_layout():
    # forward Euler on both operators
    m = MethodTable(1, Family.ADDITIVE, [1.0], [1.0, 0.0], [1.0, 0.0])
    assert order_residuals(m, 1).tolist() == [0.0, 0.0, 0.0]
    bad = MethodTable(1, Family.ADDITIVE, [1.0], [1.0, 0.0], [0.5, 0.0])
    assert order_residuals(bad, 1).tolist() == [0.0, 0.0, -0.5]


def test_order_residuals_are_exact_for_large_tables():
    # adams-bashforth style rows with huge powers: compare with rational arithmetic
    k, p = 40, 8
    rng = np.random.default_rng(3)
    alpha = rng.random(k)
    beta = rng.random(k + 1)
    m = MethodTable(k, Family.CLASSICAL, alpha, beta, explicit=False)
    res = order_residuals(m, p)
    ref = []
    for i in range(p + 1):
        t = sum(Fraction(float(a)) * j ** i for j, a in enumerate(alpha)) - k ** i
        if i:
            t += sum(Fraction(float(b)) * i * j ** (i - 1) for j, b in enumerate(beta))
        ref.append(float(t))
    assert res.tolist() == ref


def test_ssp_pairs_of_two_step_tables():
    assert ssp_coefficient_pair(dlmm32(), 1.0).r == pytest.approx(2 / 7, abs=1e-15)
    assert ssp_coefficient_pair(plmm32(), 1.0).r == pytest.approx(2 / 9, abs=1e-15)
    assert ssp_coefficient_pair(lmm32(), 1.0) is None


def test_forward_euler_pair_at_zero_ratio():
    cert = ssp_coefficient_pair(forward_euler(), 0.0)
    assert cert.r == 1.0 and cert.r_second == 0.0


def test_certificate_slack():
    cert = ssp_coefficient_pair(plmm32(), 2.0)
    m = plmm32()
    gamma = m.alpha - cert.r * m.beta[:2] - cert.r_second * m.beta_second[:2]
    assert np.allclose(cert.gamma, gamma, atol=1e-15)
    assert cert.gamma.min() == 0.0
    assert cert.r_second == pytest.approx(2.0 * cert.r)


def test_zero_alpha_with_weight_gives_none():
    m = MethodTable(2, Family.CLASSICAL, [0.0, 1.0], [0.5, 0.5, 0.0])
    assert ssp_coefficient_pair(m) is None


def test_unbounded_marker():
    # implicit Euler: no explicit weight bounds r
    m = MethodTable(1, Family.CLASSICAL, [1.0], [0.0, 1.0], explicit=False)
    cert = ssp_coefficient_pair(m)
    assert cert.unbounded


def test_negative_y_rejected():
    with pytest.raises(ValueError):
        ssp_coefficient_pair(dlmm32(), -1.0)


def test_flush_of_tiny_negative_noise():
    m = MethodTable(2, Family.PERTURBED, [0.5, 0.5], [-1e-15, 1.75, 0.0], [0.25, 0.0, 0.0])
    assert ssp_coefficient_pair(m).r == pytest.approx(2 / 7)


def test_to_underlying():
    for m in (dlmm32(), plmm32()):
        u = to_underlying(m)
        assert u.family is Family.CLASSICAL
        assert u.beta.tolist() == [-0.25, 1.75, 0.0]
    m = MethodTable(2, Family.PERTURBED, [0.5, 0.5], [0.1, 1.0, 0.0])
    assert to_underlying(m).beta.tolist() == m.beta.tolist()
    with pytest.raises(ValueError):
        to_underlying(lmm32())


def test_canonicalize():
    c = canonicalize_downwind(plmm32())
    d = dlmm32()
    assert c.beta.tolist() == d.beta.tolist()
    assert c.beta_second.tolist() == d.beta_second.tolist()
    same = MethodTable(2, Family.PERTURBED, [0.5, 0.5], [0.3, 0.2, 0.0], [0.3, 0.2, 0.0])
    z = canonicalize_downwind(same)
    assert not np.any(z.beta) and not np.any(z.beta_second)
    plain = MethodTable(2, Family.PERTURBED, [0.5, 0.5], [0.3, 0.2, 0.0])
    assert canonicalize_downwind(plain).beta.tolist() == plain.beta.tolist()
    with pytest.raises(ValueError):
        canonicalize_downwind(MethodTable(2, Family.PERTURBED, [0.5, 0.5], [-0.3, 0.2, 0.0]))


def test_moment_vectors():
    assert moment_vector(0, 2).entries.tolist() == [1.0, 0.0, 0.0]
    assert moment_vector(2, 2).entries.tolist() == [1.0, 2.0, 4.0]
    assert moment_vector_perturbed(2, 2, -1, 0.5, 2).entries.tolist() == [0.0, -0.5, -2.0]
    # a_1 + x a'_1 with x = 2: (1, 1, 1) + 2 (0, 1, 2)
    assert moment_vector_perturbed(1, 2, 1, 2.0, 2).entries.tolist() == [1.0, 3.0, 5.0]
    with pytest.raises(ValueError):
        moment_vector_perturbed(3, 2, 1, 1.0, 2)


def test_builtin_names():
    assert set(BUILTIN_METHODS) >= {"dlmm32", "plmm32", "lmm32"}
