import mpmath
import numpy as np
import pytest

from axipml.special import (
    SingularPairError,
    ellip_ke,
    legendre_q_half,
    legendre_q_half_deriv,
)

mpmath.mp.dps = 30


class TestEllipticAGM:
    @pytest.mark.parametrize("m", [0.1, 0.9, 0.999, 0.3 + 0.2j, -1.5 + 0.8j,
                                   0.95 + 0.4j, 1e-8])
    def test_against_mpmath(self, m):
        K, E = ellip_ke(np.array([m]))
        Kr = complex(mpmath.ellipk(m))
        Er = complex(mpmath.ellipe(m))
        assert abs(K[0] - Kr) < 1e-13 * abs(Kr)
        assert abs(E[0] - Er) < 5e-13 * abs(Er)

    def test_vectorized(self):
        ms = np.array([0.2, 0.5 + 0.1j, 0.99])
        K, E = ellip_ke(ms)
        for i, m in enumerate(ms):
            assert abs(K[i] - complex(mpmath.ellipk(m))) < 1e-12


class TestLegendreQHalf:
    @pytest.mark.parametrize("chi", [1.0001, 1.5, 3.0, 42.0, 2.0 + 1.2j,
                                     1.02 + 0.3j, 1.0 + 1e-5j, 15.0 + 9.0j])
    def test_against_mpmath(self, chi):
        n_max = 24
        q = legendre_q_half(np.array([chi]), n_max)[0]
        for n in (0, 1, 2, 7, 15, 24):
            ref = complex(mpmath.legenq(n - 0.5, 0, chi, type=3))
            if abs(ref) < 1e-280:
                assert abs(q[n]) < 1e-270
            else:
                assert abs(q[n] - ref) < 2e-11 * abs(ref), (n, q[n], ref)

    def test_near_one_forward_branch(self):
        # chi - 1 = 1e-9: forward recurrence territory
        chi = 1.0 + 1e-9
        q = legendre_q_half(np.array([chi]), 12)[0]
        for n in (0, 5, 12):
            ref = complex(mpmath.legenq(n - 0.5, 0, chi, type=3))
            assert abs(q[n] - ref) < 1e-10 * abs(ref)

    def test_large_chi_decay(self):
        q = legendre_q_half(np.array([1e6]), 10)[0]
        # geometric decay ~ (2 chi)^{-n}
        ratio = np.abs(q[2] / q[1])
        assert ratio < 1e-5

    def test_geometric_decay_ratio_oracle(self):
        # decay ratio approaches 1/(chi + sqrt(chi^2-1))
        chi = 2.5
        q = legendre_q_half(np.array([chi]), 40)[0]
        expect = 1.0 / (chi + np.sqrt(chi**2 - 1))
        ratios = np.abs(q[26:36] / q[25:35])
        assert np.allclose(ratios, expect, rtol=0.05)

    def test_singular_raises(self):
        with pytest.raises(SingularPairError):
            legendre_q_half(np.array([1.0 + 1e-14]), 4)

    def test_chim1_controls_accuracy_near_singularity(self):
        # with chi - 1 supplied exactly, values match mpmath at the point
        # chi = 1 + chim1 to near machine precision despite dQ/dchi ~ 1/(chi-1)
        chim1 = 1e-8
        q = legendre_q_half(np.array([1.0 + chim1]), 8,
                            chim1=np.array([complex(chim1)]))
        chi_mp = 1 + mpmath.mpf(chim1)
        for n in (0, 4, 8):
            ref = complex(mpmath.legenq(n - 0.5, 0, chi_mp, type=3))
            assert abs(q[0, n] - ref) < 1e-13 * abs(ref)

    def test_mixed_branches_vectorized(self):
        chis = np.array([1.0 + 1e-8, 3.0, 1e5, 2.0 + 2.0j])
        q = legendre_q_half(chis, 8)
        for i, chi in enumerate(chis):
            ref = complex(mpmath.legenq(7.5, 0, complex(chi), type=3))
            if abs(ref) > 1e-250:
                assert abs(q[i, 8] - ref) < 5e-11 * abs(ref)

    def test_derivative_identity(self):
        chi = np.array([1.7 + 0.4j])
        q = legendre_q_half(chi, 9)
        dq = legendre_q_half_deriv(chi, q)
        h = 1e-6
        qp = legendre_q_half(chi + h, 8)
        qm = legendre_q_half(chi - h, 8)
        fd = (qp - qm) / (2 * h)
        assert np.abs(dq[:, :9] - fd).max() < 1e-7
