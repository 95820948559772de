import random
import string

import pytest

from labclean.schema import (
    MISSING,
    MISSING_RANGE,
    Censored,
    Interval,
    LowerOnly,
    Numeric,
    Qualitative,
    QualitativeRange,
    UpperOnly,
)
from labclean.valueparse import (
    NullVocabulary,
    ParseMissCounter,
    merge_references,
    parse_reference,
    parse_result,
)


class TestParseResult:
    def test_integer_literal(self):
        assert parse_result("75") == Numeric(75.0)

    def test_comma_decimal(self):
        # oracle: replace the single comma between digits with a dot, reparse
        for raw in ["12,5", "0,1", "1234,99"]:
            assert parse_result(raw) == Numeric(float(raw.replace(",", ".")))

    def test_dot_decimal(self):
        assert parse_result("13.5") == Numeric(13.5)
        assert parse_result(" 13.5 ") == Numeric(13.5)

    def test_qualitative_casefolds_keeps_accents(self):
        assert parse_result("Não Detectado") == Qualitative("não detectado")

    def test_null_vocabulary(self):
        for raw in ["nan", "NaN", "", "  ", "null", "NULL"]:
            assert parse_result(raw) is MISSING

    def test_custom_null_vocabulary_keeps_minimum(self):
        vocab = NullVocabulary(frozenset({"n/a"}))
        assert parse_result("N/A", vocab) is MISSING
        assert parse_result("nan", vocab) is MISSING

    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("<5", Censored("below", 5.0)),
            ("< 5", Censored("below", 5.0)),
            ("<=10", Censored("below", 10.0)),
            ("≤2,5", Censored("below", 2.5)),
            ("Inferior a 8", Censored("below", 8.0)),
            (">120", Censored("above", 120.0)),
            (">= 0.5", Censored("above", 0.5)),
            ("≥1", Censored("above", 1.0)),
            ("Superior a 89", Censored("above", 89.0)),
        ],
    )
    def test_censored_grammar(self, raw, expected):
        assert parse_result(raw) == expected

    def test_scientific_and_underscore_not_numeric(self):
        # only plain decimal literals count as numeric results
        assert isinstance(parse_result("1e3"), Qualitative)
        assert isinstance(parse_result("1_0"), Qualitative)
        assert isinstance(parse_result("inf"), Qualitative)

    def test_totality_fuzz(self):
        rng = random.Random(1234)
        alphabet = string.printable + "áéíóúãõçÃÉ≤≥"
        for _ in range(2000):
            s = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 30)))
            out = parse_result(s)
            assert isinstance(out, (Numeric, Qualitative, Censored, type(MISSING)))

    def test_idempotent_normalization(self):
        # parsing the canonical rendering reproduces the value
        for raw in ["75", "12,5", "Não Detectado", "<5"]:
            first = parse_result(raw)
            if isinstance(first, Numeric):
                assert parse_result(str(first.value)) == first
            elif isinstance(first, Qualitative):
                assert parse_result(first.label) == first


class TestParseReference:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("75 to 99", Interval(75.0, 99.0)),
            ("75 a 99", Interval(75.0, 99.0)),
            ("75 - 99", Interval(75.0, 99.0)),
            ("12,5 a 16,0", Interval(12.5, 16.0)),
            ("1.6 até 2.6", Interval(1.6, 2.6)),
            ("until 89", UpperOnly(89.0)),
            ("até 89", UpperOnly(89.0)),
            ("inferior a 100", UpperOnly(100.0)),
            ("< 100", UpperOnly(100.0)),
            ("<= 100", UpperOnly(100.0)),
            ("superior a 10", LowerOnly(10.0)),
            ("acima de 10", LowerOnly(10.0)),
            ("> 10", LowerOnly(10.0)),
            (">= 10", LowerOnly(10.0)),
        ],
    )
    def test_numeric_grammar(self, raw, expected):
        assert parse_reference(raw) == expected

    def test_qualitative_labels(self):
        assert parse_reference("Não Detectado/Detectado") == QualitativeRange(
            frozenset({"não detectado", "detectado"})
        )
        assert parse_reference("Reagente ou Não Reagente") == QualitativeRange(
            frozenset({"reagente", "não reagente"})
        )

    def test_missing(self):
        assert parse_reference("nan") is MISSING_RANGE
        assert parse_reference(None) is MISSING_RANGE
        assert parse_reference("") is MISSING_RANGE

    def test_swapped_interval_normalized(self):
        assert parse_reference("99 a 75") == Interval(75.0, 99.0)

    def test_parse_miss_counter(self):
        misses = ParseMissCounter()
        assert parse_reference("ver laudo", misses=misses) is MISSING_RANGE
        assert parse_reference("75 a 99", misses=misses) == Interval(75.0, 99.0)
        assert misses.count == 1
        assert misses.samples == ["ver laudo"]

    def test_totality_fuzz(self):
        rng = random.Random(99)
        alphabet = string.printable + "áéçã"
        for _ in range(2000):
            s = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 30)))
            parse_reference(s)  # must not raise


class TestMergeReferences:
    def test_envelope(self):
        # oracle: brute-force min/max over the bound multiset
        merged = merge_references([Interval(75, 99), Interval(70, 105)])
        assert merged == Interval(70, 105)

    def test_singleton_identity(self):
        assert merge_references([UpperOnly(89.0)]) == UpperOnly(89.0)

    def test_no_numeric_bounds(self):
        q = QualitativeRange(frozenset({"detectado"}))
        assert merge_references([MISSING_RANGE, q]) is MISSING_RANGE

    def test_one_sided_merges(self):
        assert merge_references([LowerOnly(5), LowerOnly(3)]) == LowerOnly(3)
        assert merge_references([LowerOnly(5), UpperOnly(9)]) == Interval(5, 9)

    def _random_ranges(self, rng, n):
        # lower bounds below zero, upper bounds above: envelopes never cross,
        # which is what coherent per-analyte references look like
        out = []
        for _ in range(n):
            kind = rng.randrange(5)
            a = rng.uniform(-50, 0)
            b = rng.uniform(0, 50)
            if kind == 0:
                out.append(Interval(a, b))
            elif kind == 1:
                out.append(LowerOnly(a))
            elif kind == 2:
                out.append(UpperOnly(b))
            elif kind == 3:
                out.append(QualitativeRange(frozenset({"x"})))
            else:
                out.append(MISSING_RANGE)
        return out

    def test_commutative_and_idempotent(self):
        rng = random.Random(7)
        for _ in range(200):
            ranges = self._random_ranges(rng, rng.randrange(1, 8))
            merged = merge_references(ranges)
            shuffled = ranges[:]
            rng.shuffle(shuffled)
            assert merge_references(shuffled) == merged
            assert merge_references([merged, merged]) == merged

    def test_associative(self):
        rng = random.Random(8)
        for _ in range(200):
            rs = self._random_ranges(rng, 6)
            left = merge_references([merge_references(rs[:3]), merge_references(rs[3:])])
            assert left == merge_references(rs)

    def test_envelope_monotone_under_additions(self):
        rng = random.Random(9)
        for _ in range(200):
            rs = self._random_ranges(rng, 5)
            base = merge_references(rs)
            grown = merge_references(rs + self._random_ranges(rng, 2))

            def bounds(r):
                if isinstance(r, Interval):
                    return r.min, r.max
                if isinstance(r, LowerOnly):
                    return r.min, None
                if isinstance(r, UpperOnly):
                    return None, r.max
                return None, None

            blo, bhi = bounds(base)
            glo, ghi = bounds(grown)
            # an existing lower bound never rises; an existing upper never drops
            if blo is not None:
                assert glo is not None and glo <= blo
            if bhi is not None:
                assert ghi is not None and ghi >= bhi
