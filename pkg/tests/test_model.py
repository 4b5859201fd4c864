import math

import numpy as np
import pytest
from scipy import stats

from noisysort.model import (
    WITH_REPLACEMENT,
    ComparisonDataset,
    SamplingTag,
    derive_seed,
    membership_violation,
    merge_datasets,
    random_member_matrix,
    read_dataset,
    relabel_items,
    sample_with_replacement,
    sample_without_replacement,
    split_with_replacement,
    split_without_replacement,
    stage_budgets,
    star_matrix,
    true_scores,
    write_dataset,
)
from noisysort.perms import Permutation, random_permutation


class TestStarMatrix:
    def test_two_by_two(self):
        m = star_matrix(2, 0.25)
        assert np.allclose(m.entries, [[0.5, 0.25], [0.75, 0.5]])

    def test_entries_take_three_values(self):
        m = star_matrix(5, 0.1)
        assert set(np.round(m.entries.ravel(), 12)) == {0.4, 0.5, 0.6}

    def test_skew_symmetry(self):
        m = star_matrix(6, 0.3)
        off = ~np.eye(6, dtype=bool)
        assert np.allclose((m.entries + m.entries.T)[off], 1.0)

    def test_row_sum_closed_form(self):
        for n in (1, 2, 7, 23, 50):
            lam = 0.2
            scores = true_scores(Permutation.identity(n), star_matrix(n, lam)).s_star
            for i in range(1, n + 1):
                expected = lam * (2 * i - n - 1) + (n - 1) / 2
                assert scores[i - 1] == pytest.approx(expected)

    def test_lambda_range_enforced(self):
        with pytest.raises(ValueError):
            star_matrix(4, 0.5)
        with pytest.raises(ValueError):
            star_matrix(4, 0.0)


class TestMembership:
    def test_star_accepted(self):
        assert membership_violation(star_matrix(6, 0.2).entries, 0.2) is None

    def test_single_violated_entry_rejected(self):
        entries = star_matrix(6, 0.2).entries.copy()
        entries[3, 1] = 0.6  # needs >= 0.7
        entries[1, 3] = 0.4
        assert membership_violation(entries, 0.2) is not None

    def test_random_member_is_valid(self):
        m = random_member_matrix(8, 0.2, 0.05, seed=4)
        assert membership_violation(m.entries, 0.2) is None
        # strictly inside the band somewhere (not the star matrix)
        assert np.any(m.entries[np.tril_indices(8, -1)] > 0.7 + 1e-9)


class TestTrueScores:
    def test_small_example(self):
        ts = true_scores(Permutation.identity(4), star_matrix(4, 0.25))
        assert ts.s_star == (0.75, 1.25, 1.75, 2.25)

    def test_strictly_increasing_for_random_member(self):
        m = random_member_matrix(9, 0.15, 0.02, seed=1)
        ts = true_scores(Permutation.identity(9), m)
        assert all(a < b for a, b in zip(ts.s_star, ts.s_star[1:]))

    def test_single_item(self):
        ts = true_scores(Permutation.identity(1), star_matrix(1, 0.25))
        assert ts.s_star == (0.0,)


class TestWithoutReplacement:
    def test_p_one_observes_every_pair_once(self):
        d = sample_without_replacement(Permutation.identity(20), star_matrix(20, 0.3), 1.0, 5)
        assert d.num_pairs == math.comb(20, 2)
        assert (d.num == 1).all()
        a = d.wins_dense()
        c = d.counts_dense()
        assert np.array_equal(a + a.T, c)
        assert (np.diag(a) == 0).all() and (np.diag(c) == 0).all()

    def test_high_signal_win_rate(self):
        n, lam = 100, 0.49
        wins = losses = 0
        for seed in range(5):
            d = sample_without_replacement(Permutation.identity(n), star_matrix(n, lam), 1.0, seed)
            wins += int(np.sum(np.where(d.second > d.first, d.first_wins, 0)))
            losses += int(np.sum(np.where(d.second > d.first, d.num - d.first_wins, 0)))
        # identity order: the larger-ranked (second) item is stronger
        assert losses / (wins + losses) >= 0.95

    def test_total_count_moments(self):
        n, p = 50, 0.3
        pairs = math.comb(n, 2)
        totals = [
            sample_without_replacement(Permutation.identity(n), star_matrix(n, 0.2), p, s)
            .total_comparisons()
            for s in range(100)
        ]
        mean = np.mean(totals)
        sd_of_mean = math.sqrt(pairs * p * (1 - p) / 100)
        assert abs(mean - p * pairs) <= 3 * sd_of_mean

    def test_p_out_of_range(self):
        with pytest.raises(ValueError):
            sample_without_replacement(Permutation.identity(5), star_matrix(5, 0.2), 0.0, 1)


class TestWithReplacement:
    def test_single_draw(self):
        d = sample_with_replacement(Permutation.identity(6), star_matrix(6, 0.2), 1, 9)
        assert d.num_pairs == 1 and d.total_comparisons() == 1

    def test_budget_exact(self):
        d = sample_with_replacement(Permutation.identity(30), star_matrix(30, 0.2), 12345, 2)
        assert d.total_comparisons() == 12345

    def test_win_distribution_chi_square(self):
        # conditioned on the pair, the stronger item's wins are
        # Bin(N_ij, 1/2 + lam); chi-square GOF over all pairs at the 1% level
        n, lam, total = 20, 0.25, 100_000
        d = sample_with_replacement(Permutation.identity(n), star_matrix(n, lam), total, 11)
        q = 0.5 - lam  # P(first wins): first has the smaller index = weaker rank
        mask = d.num >= 5
        observed = d.first_wins[mask]
        draws = d.num[mask]
        chi2 = float(np.sum((observed - draws * q) ** 2 / (draws * q * (1 - q))))
        pvalue = stats.chi2.sf(chi2, df=int(mask.sum()))
        assert pvalue > 0.01

    def test_pair_marginal_moments(self):
        # each pair's count is Bin(N, 1/C(n,2)); check mean and variance over pairs
        n, total = 20, 100_000
        pairs = math.comb(n, 2)
        d = sample_with_replacement(Permutation.identity(n), star_matrix(n, 0.25), total, 3)
        counts = np.zeros(pairs)
        counts[: d.num_pairs] = np.sort(d.num)[::-1]
        expected = total / pairs
        assert abs(counts.mean() - expected) < 1e-9  # exact: totals are conserved
        var_expected = total * (1 / pairs) * (1 - 1 / pairs)
        assert abs(counts.var() - var_expected) / var_expected < 0.25


class TestSplits:
    def test_single_budget(self):
        ds = split_with_replacement(Permutation.identity(10), star_matrix(10, 0.2), [500], 7)
        assert len(ds) == 1 and ds[0].total_comparisons() == 500

    def test_budget_accounting(self):
        budgets = [250, 250] + [100] * 5
        ds = split_with_replacement(Permutation.identity(12), star_matrix(12, 0.2), budgets, 7)
        assert [d.total_comparisons() for d in ds] == budgets

    def test_distinct_derived_seeds(self):
        ds = split_with_replacement(Permutation.identity(12), star_matrix(12, 0.2), [300, 300], 7)
        assert ds[0].seed != ds[1].seed
        assert ds[0].seed == derive_seed(7, 0)
        assert ds[1].seed == derive_seed(7, 1)
        assert not ds[0].same_data(ds[1])

    def test_stage_budgets_remainder(self):
        assert stage_budgets(10, 3) == [4, 3, 3]
        assert stage_budgets(9, 3) == [3, 3, 3]
        assert sum(stage_budgets(1_000_003, 7)) == 1_000_003

    def test_without_split_partitions_counts_and_wins(self):
        d = sample_without_replacement(Permutation.identity(30), star_matrix(30, 0.2), 0.8, 21)
        parts = split_without_replacement(d, 4, 99)
        assert np.array_equal(sum(p.counts_dense() for p in parts), d.counts_dense())
        assert np.array_equal(sum(p.wins_dense() for p in parts), d.wins_dense())

    def test_without_split_single_bucket_is_same_dataset(self):
        d = sample_without_replacement(Permutation.identity(10), star_matrix(10, 0.2), 0.5, 3)
        assert split_without_replacement(d, 1, 5)[0] is d

    def test_bucket_sizes_multinomial(self):
        n, p, parts = 30, 0.9, 3
        diffs = []
        for seed in range(100):
            d = sample_without_replacement(Permutation.identity(n), star_matrix(n, 0.2), p, seed)
            buckets = split_without_replacement(d, parts, derive_seed(seed, 1))
            total = d.total_comparisons()
            for b in buckets:
                sd = math.sqrt(total * (1 / parts) * (1 - 1 / parts))
                diffs.append((b.total_comparisons() - total / parts) / sd)
        assert np.max(np.abs(diffs)) <= 4.0

    def test_without_split_requires_without_dataset(self):
        d = sample_with_replacement(Permutation.identity(10), star_matrix(10, 0.2), 100, 1)
        with pytest.raises(ValueError):
            split_without_replacement(d, 2, 1)


class TestDeterminismAndEquivalence:
    def test_same_seed_bit_identical(self):
        args = (Permutation.identity(40), star_matrix(40, 0.3), 2000, 77)
        assert sample_with_replacement(*args).same_data(sample_with_replacement(*args))
        argso = (Permutation.identity(40), star_matrix(40, 0.3), 0.4, 77)
        assert sample_without_replacement(*argso).same_data(sample_without_replacement(*argso))

    def test_different_seeds_differ(self):
        m = star_matrix(40, 0.3)
        a = sample_with_replacement(Permutation.identity(40), m, 2000, 1)
        b = sample_with_replacement(Permutation.identity(40), m, 2000, 2)
        assert not a.same_data(b)

    def test_expected_counts_match_across_models(self):
        # p * C(n,2) = N: per-pair expected counts agree within Monte-Carlo error
        n, p = 30, 0.2
        pairs = math.comb(n, 2)
        total = round(p * pairs)
        m = star_matrix(n, 0.25)
        reps = 200
        c1 = np.zeros((n, n))
        c2 = np.zeros((n, n))
        for seed in range(reps):
            c1 += sample_without_replacement(Permutation.identity(n), m, p, seed).counts_dense()
            c2 += sample_with_replacement(Permutation.identity(n), m, total, seed).counts_dense()
        off = ~np.eye(n, dtype=bool)
        mean1 = c1[off].mean() / reps
        mean2 = c2[off].mean() / reps
        assert mean1 == pytest.approx(p, rel=0.05)
        assert mean2 == pytest.approx(p, rel=0.05)


class TestRelabeling:
    def test_relabel_preserves_structure(self):
        rng = np.random.default_rng(5)
        d = sample_with_replacement(Permutation.identity(15), star_matrix(15, 0.25), 900, 8)
        rho = random_permutation(15, rng)
        d2 = relabel_items(d, rho)
        a, a2 = d.wins_dense(), d2.wins_dense()
        r = rho.to_array() - 1
        assert np.array_equal(a2[np.ix_(r, r)], a)


class TestMergeAndIO:
    def test_merge_totals(self):
        parts = split_with_replacement(Permutation.identity(12), star_matrix(12, 0.2),
                                       [300, 200, 100], 5)
        merged = merge_datasets(parts)
        assert merged.total_comparisons() == 600
        assert np.array_equal(merged.wins_dense(), sum(p.wins_dense() for p in parts))

    def test_file_roundtrip(self, tmp_path):
        d = sample_with_replacement(Permutation.identity(25), star_matrix(25, 0.2), 700, 13)
        path = tmp_path / "data.txt"
        write_dataset(d, path)
        d2 = read_dataset(path)
        assert d2.same_data(d)
        assert d2.tag == d.tag and d2.seed == d.seed
        header = path.read_text().splitlines()[0].split()
        assert header == ["25", WITH_REPLACEMENT, "700", "13"]

    def test_file_roundtrip_without(self, tmp_path):
        d = sample_without_replacement(Permutation.identity(15), star_matrix(15, 0.2), 0.45, 3)
        path = tmp_path / "data.txt"
        write_dataset(d, path)
        assert read_dataset(path).same_data(d)

    def test_dataset_invariants_on_construction(self):
        with pytest.raises(ValueError):
            ComparisonDataset(
                n=4,
                first=np.array([2]), second=np.array([1]),  # must be first < second
                num=np.array([1]), first_wins=np.array([0]),
                tag=SamplingTag(WITH_REPLACEMENT, 1), seed=0,
            )
        with pytest.raises(ValueError):
            ComparisonDataset(
                n=4,
                first=np.array([1]), second=np.array([2]),
                num=np.array([1]), first_wins=np.array([2]),  # wins exceed count
                tag=SamplingTag(WITH_REPLACEMENT, 1), seed=0,
            )


class TestSeedDerivation:
    def test_deterministic_and_distinct(self):
        assert derive_seed(42, 0) == derive_seed(42, 0)
        assert derive_seed(42, 0) != derive_seed(42, 1)
        assert derive_seed(42, 0, 1) != derive_seed(42, 1, 0)
        assert derive_seed(42) != derive_seed(43)
