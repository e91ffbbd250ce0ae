import math

import numpy as np
import pytest

from capcover.condition import cond_tail_feasible, cond_tail_infeasible_bound
from capcover.coverage import expected_caps_bound, miles_exact, p_not_covered_bound, wendel
from capcover.mc import (mc_condition_tails, mc_coverage, mc_coverage_multi, mc_det_moment,
                         mc_expected_caps, mc_expected_ln_cond)
from capcover.sampling import binomial_sigma, chunk_sizes, run_chunks, stream, uniform_sphere

PI = math.pi


def test_chunking():
    assert chunk_sizes(25_000) == [10_000, 10_000, 5_000]
    assert sum(chunk_sizes(1)) == 1


def test_streams_independent_and_reproducible():
    a = stream(5, 0).random(4)
    assert np.array_equal(a, stream(5, 0).random(4))
    assert not np.array_equal(a, stream(5, 1).random(4))
    assert not np.array_equal(a, stream(6, 0).random(4))


def test_uniform_sphere_shape_and_norm():
    x = uniform_sphere(stream(1, 0), (50, 4), 3)
    assert x.shape == (50, 4, 4)
    assert np.allclose(np.linalg.norm(x, axis=-1), 1.0)


def test_worker_count_does_not_change_results():
    a = mc_coverage(5, 2, 2.0, 30_000, seed=3, workers=1)
    b = mc_coverage(5, 2, 2.0, 30_000, seed=3, workers=2)
    assert a.value == b.value and a.std_error == b.std_error


def test_coverage_wendel():
    est = mc_coverage(4, 1, PI / 2, 100_000, seed=1)
    assert abs(est.value - 0.5) <= 3 * binomial_sigma(0.5, 100_000)


def test_coverage_miles():
    p = miles_exact(5, 2 * PI / 3)
    est = mc_coverage(5, 2, 2 * PI / 3, 100_000, seed=2)
    assert abs(est.value - p) <= 3 * binomial_sigma(p, 100_000)


def test_coverage_few_caps():
    for n, m in ((1, 2), (2, 1), (3, 2)):
        assert mc_coverage(n, m, PI / 2, 2_000, seed=4).value == 1.0


def test_coverage_bound_small_caps():
    n, m, alpha, N = 12, 2, PI / 3, 50_000
    est = mc_coverage(n, m, alpha, N, seed=8)
    assert est.value <= p_not_covered_bound(n, m, alpha) + 3 * est.std_error


def test_coverage_multi_matches_single():
    alphas = [PI / 2, 2.0, 2.5]
    multi = mc_coverage_multi(6, 2, alphas, 20_000, seed=9)
    for a, e in zip(alphas, multi):
        assert e.value == mc_coverage(6, 2, a, 20_000, seed=9).value


def test_coverage_rejects_bad_input():
    with pytest.raises(ValueError):
        mc_coverage(5, 2, 4.0, 10, seed=1)
    with pytest.raises(ValueError):
        mc_coverage(5, 2, 1.0, 0, seed=1)


def test_condition_tails():
    N = 100_000
    tails = mc_condition_tails(6, 2, [0.5, 1.0], N, seed=5)
    assert abs(tails.feasible_fraction.value - wendel(6, 2)) <= 3 * binomial_sigma(0.5, N)
    assert tails.feasible_tail[1].value == 1.0
    assert tails.infeasible_tail[1].value == 1.0
    nf = tails.feasible_fraction.value * N
    exact = cond_tail_feasible(6, 2, 0.5)
    assert abs(tails.feasible_tail[0].value - exact) <= 3 * binomial_sigma(exact, int(nf))
    b = cond_tail_infeasible_bound(6, 2, 0.5)
    assert tails.infeasible_tail[0].value <= b + 3 * tails.infeasible_tail[0].std_error
    recs = tails.to_records({"n": 6, "m": 2})
    assert len(recs) == 5 and recs[1]["params"]["eps"] == 0.5


def test_condition_tail_circle():
    N = 100_000
    tails = mc_condition_tails(5, 1, [0.5], N, seed=6)
    nf = int(round(tails.feasible_fraction.value * N))
    exact = cond_tail_feasible(5, 1, 0.5)
    assert abs(tails.feasible_tail[0].value - exact) <= 3 * binomial_sigma(exact, nf)


def test_expected_caps_small():
    est = mc_expected_caps(2, PI / 2, 1_000, seed=2)
    assert est.value <= expected_caps_bound(2, PI / 2) + 3 * est.std_error
    assert est.within(7.0)
    assert est.extra["censored"] == 0


def test_expected_caps_circle_is_five():
    est = mc_expected_caps(1, PI / 2, 5_000, seed=7)
    assert est.within(5.0)


def test_expected_caps_censoring():
    est = mc_expected_caps(2, 0.2, 20, seed=1, draw_cap=10)
    assert est.extra["censored"] == 20
    assert est.extra["lower_bound"]
    assert est.value == 10.0


def test_expected_caps_domain():
    with pytest.raises(ValueError):
        mc_expected_caps(2, 2.0, 10, seed=1)


def test_ln_cond_seeds_overlap():
    a = mc_expected_ln_cond(10, 2, 5_000, seed=1)
    b = mc_expected_ln_cond(10, 2, 5_000, seed=2)
    assert a.value <= 5.507 and b.value <= 5.507
    lo_a, hi_a = a.ci95
    lo_b, hi_b = b.ci95
    assert max(lo_a, lo_b) <= min(hi_a, hi_b)
    lo, hi = a.extra["bootstrap_ci95"]
    assert lo < a.value < hi


@pytest.mark.parametrize("m, k", [(2, 2), (3, 2), (4, 3)])
def test_det_moment(m, k):
    est = mc_det_moment(m, k, 200_000, seed=3)
    assert est.within(est.extra["target"])


def test_det_moment_one_by_one():
    # a 1x1 matrix with entry +-1 has |det| = 1 with no noise
    est = mc_det_moment(3, 1, 1_000, seed=3)
    assert est.value == pytest.approx(est.extra["target"], rel=1e-12)
    assert est.std_error == 0.0


def test_det_moment_domain():
    with pytest.raises(ValueError):
        mc_det_moment(2, 3, 10, seed=1)


def test_run_chunks_reproducible():
    f = lambda rng, size: rng.random(size).sum()
    a = run_chunks(f, 25_000, seed=4)
    b = run_chunks(f, 25_000, seed=4)
    assert a == b and len(a) == 3


def test_record_fields():
    rec = mc_coverage(4, 1, PI / 2, 1000, seed=1).to_record("mc_coverage", {"n": 4})
    for key in ("value", "std_error", "ci95", "seed", "trials", "rng"):
        assert key in rec
