"""
Tests for Hamming ranking and retrieval metrics.
"""
import numpy as np
import pytest

from apps.core.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    EmptyQuerySetError,
    InvalidLabelError,
)
from apps.retrieval.services import (
    average_precision,
    build_database,
    evaluate,
    hamming_distance,
    map_score,
    pack_codes,
    precision_at_radius,
    precision_at_topn,
    precision_recall_by_radius,
    precision_recall_curve,
    query,
    random_code_baseline,
    unpack_codes,
)
from apps.retrieval.structures import CodeDatabase

pytestmark = pytest.mark.unit


def random_codes(rng, count, bits):
    return rng.choice([-1, 1], size=(count, bits))


def naive_distance(a, b):
    return sum(1 for x, y in zip(a, b) if x != y)


def naive_ranking(query_code, codes):
    distances = [naive_distance(query_code, code) for code in codes]
    return sorted(range(len(codes)), key=lambda i: (distances[i], i)), distances


def naive_ap(relevance):
    total = sum(relevance)
    if total == 0:
        return None
    score, hits = 0.0, 0
    for k, rel in enumerate(relevance, start=1):
        if rel:
            hits += 1
            score += hits / k
    return score / total


def ranked_relevance(query_code, query_label, codes, labels):
    order, _ = naive_ranking(query_code, codes)
    return [labels[i] == query_label for i in order]


class TestPacking:
    """Tests for pack_codes / unpack_codes."""

    def test_bit_layout(self):
        """Test bit k sits at position k % 64 of word k // 64"""
        code = -np.ones(70, dtype=int)
        code[[0, 5, 64, 69]] = 1

        words = pack_codes(code)

        assert words.shape == (1, 2)
        assert int(words[0, 0]) == (1 << 0) | (1 << 5)
        assert int(words[0, 1]) == (1 << 0) | (1 << 5)

    @pytest.mark.parametrize('bits', [8, 16, 32, 48, 64, 65, 128])
    def test_inverse(self, bits):
        """Test unpacking restores the +-1 codes"""
        codes = random_codes(np.random.default_rng(bits), 20, bits)
        assert np.array_equal(unpack_codes(pack_codes(codes), bits), codes)


class TestHammingDistance:
    """Tests for hamming_distance."""

    def test_identical(self):
        """Test identical codes are at distance 0"""
        assert hamming_distance([1, -1, 1, 1], [1, -1, 1, 1]) == 0

    def test_single_flip(self):
        """Test (+1,-1,+1) vs (-1,-1,+1) differ in one bit"""
        assert hamming_distance([1, -1, 1], [-1, -1, 1]) == 1

    def test_length_mismatch(self):
        """Test codes of different lengths are rejected"""
        with pytest.raises(DimensionMismatchError):
            hamming_distance([1, 1], [1, 1, 1])

    @pytest.mark.oracle
    def test_naive_oracle(self):
        """Test 10^4 random 64-bit pairs against a positional comparison"""
        rng = np.random.default_rng(0)
        a, b = random_codes(rng, 10_000, 64), random_codes(rng, 10_000, 64)
        packed_a, packed_b = pack_codes(a), pack_codes(b)
        fast = np.bitwise_count(packed_a ^ packed_b).sum(axis=1)
        naive = (a != b).sum(axis=1)
        assert np.array_equal(fast, naive)
        for i in range(0, 10_000, 997):
            assert hamming_distance(a[i], b[i]) == naive_distance(a[i], b[i])

    def test_metric_axioms(self):
        """Test symmetry, identity and the triangle inequality"""
        rng = np.random.default_rng(1)
        for _ in range(300):
            x, y, z = random_codes(rng, 3, 24)
            assert hamming_distance(x, y) == hamming_distance(y, x)
            assert (hamming_distance(x, y) == 0) == np.array_equal(x, y)
            assert hamming_distance(x, z) <= hamming_distance(x, y) + hamming_distance(y, z)


class TestCodeDatabase:
    """Tests for CodeDatabase construction."""

    def test_is_immutable(self):
        """Test the stored arrays are read-only"""
        db = build_database(random_codes(np.random.default_rng(0), 4, 16), [1, 2, 1, 2])
        with pytest.raises(ValueError):
            db.words[0, 0] = 0

    def test_label_count_must_match(self):
        """Test a label per code is required"""
        with pytest.raises(DimensionMismatchError):
            build_database(random_codes(np.random.default_rng(0), 4, 16), [1, 2])

    def test_labels_must_be_positive(self):
        """Test zero labels are rejected"""
        with pytest.raises(InvalidLabelError):
            build_database(random_codes(np.random.default_rng(0), 2, 16), [0, 1])


class TestQuery:
    """Tests for query."""

    def test_exact_match_first(self):
        """Test a query equal to a stored code ranks it first at distance 0"""
        codes = random_codes(np.random.default_rng(2), 30, 32)
        db = build_database(codes, [1] * 30)

        result = query(db, codes[17], k=5)

        assert result.distances[0] == 0
        assert 17 in result.indices[result.distances == 0]

    def test_k_zero(self):
        """Test k = 0 returns nothing"""
        db = build_database(random_codes(np.random.default_rng(2), 5, 16), [1] * 5)
        assert len(query(db, np.ones(16), k=0)) == 0

    def test_k_beyond_size(self):
        """Test k larger than the database returns every item"""
        db = build_database(random_codes(np.random.default_rng(2), 5, 16), [1] * 5)
        assert len(query(db, np.ones(16), k=50)) == 5

    def test_ties_by_position(self):
        """Test equal distances keep ascending database order"""
        codes = np.array([[1, 1, -1, -1], [1, 1, 1, -1], [1, 1, -1, 1], [-1, 1, -1, -1]])
        db = build_database(codes, [1, 2, 3, 4])

        result = query(db, [1, 1, -1, -1], k=4)

        assert result.indices.tolist() == [0, 1, 2, 3]
        assert result.distances.tolist() == [0, 1, 1, 1]

    def test_rows_carry_relevance(self):
        """Test rows and relevance flags follow the ranking"""
        db = build_database(np.array([[1, 1], [-1, -1]]), [2, 1])
        result = query(db, [-1, -1], k=2, query_label=1)
        assert result.relevant.tolist() == [True, False]
        assert result.rows()[0] == {'rank': 1, 'index': 1, 'distance': 0, 'label': 1}

    @pytest.mark.oracle
    def test_exhaustive_sort_oracle(self):
        """Test a 500-code database against an exhaustive sort"""
        rng = np.random.default_rng(3)
        codes = random_codes(rng, 500, 16)
        db = build_database(codes, rng.integers(1, 5, 500))
        for _ in range(20):
            q = random_codes(rng, 1, 16)[0]
            order, distances = naive_ranking(q, codes)

            result = query(db, q, k=500)

            assert result.indices.tolist() == order
            assert result.distances.tolist() == [distances[i] for i in order]


class TestMapScore:
    """Tests for average_precision and map_score."""

    def test_hand_evaluation(self):
        """Test relevant at ranks 1 and 3 of 3 gives (1 + 2/3) / 2"""
        assert average_precision([True, False, True]) == pytest.approx(0.8333, abs=1e-4)

    def test_no_relevant_item(self):
        """Test a ranking without relevant items has no AP"""
        assert average_precision([False, False]) is None

    def test_cutoff(self):
        """Test a top-k cutoff only counts relevant items inside it"""
        assert average_precision([False, True, True], top_k=2) == pytest.approx(0.5)

    def test_all_relevant(self):
        """Test MAP is 1 when every item shares the query label"""
        rng = np.random.default_rng(4)
        db = build_database(random_codes(rng, 10, 16), [2] * 10)
        queries = build_database(random_codes(rng, 3, 16), [2] * 3)
        assert map_score(queries, db) == 1.0

    def test_skips_queries_without_relevant_items(self):
        """Test a query without relevant items does not drag the mean"""
        db = build_database(np.array([[1, 1], [-1, -1]]), [1, 1])
        queries = build_database(np.array([[1, 1], [1, 1]]), [1, 2])
        assert map_score(queries, db) == 1.0

    def test_no_scorable_queries(self):
        """Test only unscorable queries raise"""
        db = build_database(np.array([[1, 1]]), [1])
        with pytest.raises(EmptyQuerySetError):
            map_score(build_database(np.array([[1, 1]]), [2]), db)

    def test_empty_query_set(self):
        """Test zero queries raise"""
        db = build_database(np.array([[1, 1]]), [1])
        empty = CodeDatabase(np.zeros((0, 1), dtype=np.uint64), np.zeros(0, dtype=np.int64), 2)
        with pytest.raises(EmptyQuerySetError):
            map_score(empty, db)

    def test_bit_mismatch(self):
        """Test queries and database must share a code length"""
        db = build_database(np.ones((2, 8)), [1, 1])
        with pytest.raises(DimensionMismatchError):
            map_score(build_database(np.ones((1, 16)), [1]), db)

    @pytest.mark.oracle
    def test_brute_force_oracle(self):
        """Test 100 random instances against an independent AP computation"""
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            bits = int(rng.choice([8, 16]))
            codes, labels = random_codes(rng, n, bits), rng.integers(1, 4, n)
            q_codes, q_labels = random_codes(rng, 4, bits), rng.integers(1, 4, 4)
            aps = [naive_ap(ranked_relevance(q_codes[i], q_labels[i], codes, labels)) for i in range(4)]
            aps = [ap for ap in aps if ap is not None]
            if not aps:
                continue

            value = map_score(build_database(q_codes, q_labels), build_database(codes, labels))

            assert abs(value - sum(aps) / len(aps)) <= 1e-9


class TestPrecisionRecall:
    """Tests for precision_recall_curve and the radius variants."""

    def test_perfect_single_query(self):
        """Test one relevant item at rank 1 passes through (1, 1)"""
        db = build_database(np.array([[1, 1], [-1, -1]]), [1, 2])
        queries = build_database(np.array([[1, 1]]), [1])

        curve = precision_recall_curve(queries, db, points=11)

        assert curve[-1] == (1.0, 1.0)
        assert all(p == 1.0 for _, p in curve)

    def test_late_relevant_item(self):
        """Test recall 0 carries precision 0 when irrelevant items come first"""
        db = build_database(np.array([[1, 1, 1], [1, 1, -1], [-1, -1, -1]]), [2, 2, 1])
        queries = build_database(np.array([[1, 1, 1]]), [1])

        curve = precision_recall_curve(queries, db, points=2)

        assert curve == [(0.0, 0.0), (1.0, pytest.approx(1 / 3))]

    def test_late_relevant_item_interpolated(self):
        """Test interpolation lifts recall 0 to the best later precision"""
        db = build_database(np.array([[1, 1, 1], [1, 1, -1], [-1, -1, -1]]), [2, 2, 1])
        queries = build_database(np.array([[1, 1, 1]]), [1])

        curve = precision_recall_curve(queries, db, points=2, interpolate=True)

        assert curve == [(0.0, pytest.approx(1 / 3)), (1.0, pytest.approx(1 / 3))]

    def test_dip_between_hits(self):
        """Test a miss between two hits shows up at the second hit's recall"""
        db = build_database(np.array([[1, 1, 1], [1, 1, -1], [1, -1, -1]]), [1, 2, 1])
        queries = build_database(np.array([[1, 1, 1]]), [1])

        raw = precision_recall_curve(queries, db, points=3)
        interpolated = precision_recall_curve(queries, db, points=3, interpolate=True)

        assert [p for _, p in raw] == [1.0, 1.0, pytest.approx(2 / 3)]
        assert [p for _, p in interpolated] == [1.0, 1.0, pytest.approx(2 / 3)]

    @pytest.mark.oracle
    @pytest.mark.parametrize('interpolate', [False, True])
    def test_counting_oracle(self, interpolate):
        """Test the curve against per-rank counting"""
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(3, 30))
            codes, labels = random_codes(rng, n, 8), rng.integers(1, 3, n)
            q_codes, q_labels = random_codes(rng, 3, 8), rng.integers(1, 3, 3)
            levels = np.linspace(0, 1, 5)
            curves = []
            for i in range(3):
                relevance = ranked_relevance(q_codes[i], q_labels[i], codes, labels)
                total = sum(relevance)
                if total == 0:
                    continue
                points = []
                for k in range(1, n + 1):
                    hits = sum(relevance[:k])
                    points.append((hits / total, hits / k))
                if interpolate:
                    curves.append([max(p for r, p in points if r >= level - 1e-12) for level in levels])
                else:
                    curves.append([next(p for r, p in points if r >= level - 1e-12) for level in levels])
            if not curves:
                continue

            curve = precision_recall_curve(
                build_database(q_codes, q_labels), build_database(codes, labels), 5, interpolate=interpolate,
            )

            expected = np.mean(curves, axis=0)
            assert np.allclose([p for _, p in curve], expected, atol=1e-12)

    def test_radius_covering_everything(self):
        """Test a radius of b or more equals the global precision"""
        rng = np.random.default_rng(7)
        codes, labels = random_codes(rng, 12, 8), rng.integers(1, 3, 12)
        queries = build_database(random_codes(rng, 4, 8), [1, 2, 1, 2])
        db = build_database(codes, labels)

        expected = np.mean([np.mean(labels == q) for q in [1, 2, 1, 2]])

        assert precision_at_radius(queries, db, radius=8) == pytest.approx(expected)

    def test_empty_balls_contribute_zero(self):
        """Test queries with nothing in range score 0"""
        db = build_database(np.ones((3, 8)), [1, 1, 1])
        queries = build_database(-np.ones((2, 8)), [1, 1])

        assert precision_at_radius(queries, db, radius=3) == 0.0

    def test_empty_balls_skipped_on_request(self):
        """Test empty balls can be left out of the mean instead"""
        db = build_database(np.ones((3, 8)), [1, 1, 1])
        queries = build_database(np.stack([np.ones(8), -np.ones(8)]), [1, 1])

        assert precision_at_radius(queries, db, radius=3) == 0.5
        assert precision_at_radius(queries, db, radius=3, empty_as_zero=False) == 1.0

    @pytest.mark.oracle
    def test_ball_enumeration_oracle(self):
        """Test radius-3 precision against explicit ball enumeration"""
        rng = np.random.default_rng(8)
        for _ in range(30):
            codes, labels = random_codes(rng, 40, 8), rng.integers(1, 3, 40)
            q_codes, q_labels = random_codes(rng, 5, 8), rng.integers(1, 3, 5)
            values = []
            for i in range(5):
                ball = [j for j in range(40) if naive_distance(q_codes[i], codes[j]) <= 3]
                values.append(sum(labels[j] == q_labels[i] for j in ball) / len(ball) if ball else 0.0)

            value = precision_at_radius(build_database(q_codes, q_labels), build_database(codes, labels), 3)

            assert value == pytest.approx(np.mean(values))

    def test_radius_curve(self):
        """Test radius precision/recall reach global values at radius b"""
        rng = np.random.default_rng(9)
        codes, labels = random_codes(rng, 20, 8), rng.integers(1, 3, 20)
        queries = build_database(random_codes(rng, 3, 8), [1, 2, 1])
        db = build_database(codes, labels)

        curve = precision_recall_by_radius(queries, db)

        assert [r for r, _, _ in curve] == list(range(9))
        assert curve[-1][2] == pytest.approx(1.0)
        assert curve[-1][1] == pytest.approx(precision_at_radius(queries, db, radius=8))
        recalls = [c for _, _, c in curve]
        assert recalls == sorted(recalls)


class TestPrecisionAtTopN:
    """Tests for precision_at_topn."""

    def test_all_relevant(self):
        """Test N = n with every item relevant gives 1"""
        db = build_database(random_codes(np.random.default_rng(0), 6, 8), [1] * 6)
        queries = build_database(random_codes(np.random.default_rng(1), 2, 8), [1, 1])
        assert precision_at_topn(queries, db, [6]) == [(6, 1.0)]

    def test_half_relevant_top_item(self):
        """Test N = 1 with the top item relevant for half the queries gives 0.5"""
        db = build_database(np.array([[1, 1], [-1, -1]]), [1, 2])
        queries = build_database(np.array([[1, 1], [1, 1]]), [1, 2])
        assert precision_at_topn(queries, db, [1]) == [(1, 0.5)]

    def test_n_beyond_database(self):
        """Test N larger than the database is refused"""
        db = build_database(np.ones((2, 8)), [1, 1])
        with pytest.raises(ConfigurationError):
            precision_at_topn(db, db, [3])

    @pytest.mark.oracle
    def test_counting_oracle(self):
        """Test against counting relevant items in the ranked prefix"""
        rng = np.random.default_rng(10)
        codes, labels = random_codes(rng, 30, 16), rng.integers(1, 4, 30)
        q_codes, q_labels = random_codes(rng, 6, 16), rng.integers(1, 4, 6)
        n_values = [1, 3, 10, 30]

        curve = precision_at_topn(build_database(q_codes, q_labels), build_database(codes, labels), n_values)

        for n, value in curve:
            expected = np.mean([
                sum(ranked_relevance(q_codes[i], q_labels[i], codes, labels)[:n]) / n for i in range(6)
            ])
            assert value == pytest.approx(expected)


class TestEvaluate:
    """Tests for evaluate and the random baseline."""

    def test_metrics_bounded(self):
        """Test every metric lies in [0, 1]"""
        rng = np.random.default_rng(11)
        db = build_database(random_codes(rng, 40, 16), rng.integers(1, 5, 40))
        queries = build_database(random_codes(rng, 10, 16), rng.integers(1, 5, 10))

        metrics = evaluate(queries, db)

        assert 0 <= metrics.map <= 1 and 0 <= metrics.p_at_radius <= 1
        assert all(0 <= p <= 1 for _, p in metrics.pr_curve)
        assert all(0 <= p <= 1 and 0 <= r <= 1 for _, p, r in metrics.radius_curve)
        assert [n for n, _ in metrics.topn_curve] == [1, 2, 5]

    def test_drops_topn_beyond_database(self):
        """Test top-N values above the database size are skipped"""
        db = build_database(np.ones((3, 8)), [1, 2, 1])
        metrics = evaluate(db, db, topn=[1, 3, 100])
        assert [n for n, _ in metrics.topn_curve] == [1, 3]

    def test_interpolation_never_lowers_the_curve(self):
        """Test the interpolated curve dominates the raw one and is flagged"""
        rng = np.random.default_rng(12)
        db = build_database(random_codes(rng, 30, 8), rng.integers(1, 4, 30))
        queries = build_database(random_codes(rng, 6, 8), rng.integers(1, 4, 6))

        raw = evaluate(queries, db)
        interpolated = evaluate(queries, db, interpolate_pr=True)

        assert not raw.as_dict()['pr_interpolated']
        assert interpolated.as_dict()['pr_interpolated']
        assert all(i >= r - 1e-12 for (_, r), (_, i) in zip(raw.pr_curve, interpolated.pr_curve))

    def test_random_baseline_near_chance(self):
        """Test random codes over four balanced classes score near 0.25"""
        labels = np.random.default_rng(0).permutation(np.repeat([1, 2, 3, 4], 50))
        db = build_database(np.ones((200, 32)), labels)
        queries = build_database(np.ones((40, 32)), np.repeat([1, 2, 3, 4], 10))

        baseline = random_code_baseline(queries, db, seed=3)

        assert 0.2 < baseline < 0.35
