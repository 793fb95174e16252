import os

import numpy as np
import pytest

from contractclear import InvalidData, load_movielens, load_ratings, parse_line, rating_to_alpha

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')
MALFORMED = os.path.join(DATA_DIR, 'u_malformed.data')
FULL_DATASET = os.environ.get('CONTRACTCLEAR_MOVIELENS')


class TestParsing:
    def test_record(self):
        record = parse_line('196\t242\t3\t881250949\n')
        assert (record.user_id, record.item_id, record.rating, record.timestamp) == (196, 242, 3, 881250949)

    @pytest.mark.parametrize('line', [
        '196\t242\t3',
        '196 242 3 881250949',
        'a\t242\t3\t881250949',
        '196\t242\t7\t881250949',
        '0\t242\t3\t881250949',
    ])
    def test_malformed(self, line):
        with pytest.raises(ValueError):
            parse_line(line)

    @pytest.mark.parametrize('rating, alpha', [(1, 5), (3, 12.5), (5, 20)])
    def test_alpha_mapping(self, rating, alpha):
        assert rating_to_alpha(rating) == pytest.approx(alpha)


class TestIngest:
    def test_fixture(self, ratings_path):
        frame, report = load_ratings(ratings_path)
        assert report.records == len(frame) == 25
        assert report.users == 20
        assert report.malformed == 0
        assert not report.is_full_dataset

    def test_population(self, ratings_path):
        pop, report = load_movielens(ratings_path, seed=0)
        assert len(pop) == report.users
        assert list(pop.ids) == sorted(pop.ids)
        assert np.all((pop.alpha >= 5) & (pop.alpha <= 20))
        assert np.all((pop.beta >= 0.5) & (pop.beta <= 5))

    def test_deterministic(self, ratings_path):
        a, _ = load_movielens(ratings_path, seed=4)
        b, _ = load_movielens(ratings_path, seed=4)
        c, _ = load_movielens(ratings_path, seed=5)
        assert a == b
        assert not np.array_equal(a.beta, c.beta)
        np.testing.assert_array_equal(a.alpha, c.alpha)

    def test_lenient_skips_malformed_lines(self):
        pop, report = load_movielens(MALFORMED)
        assert report.malformed == 3
        assert report.malformed_lines == [3, 4, 6]
        assert report.records == 3
        assert len(pop) == 2

    def test_strict_reports_first_bad_line(self):
        with pytest.raises(InvalidData) as info:
            load_movielens(MALFORMED, strict=True)
        assert info.value.line == 3

    def test_unreadable(self, tmp_path):
        with pytest.raises(InvalidData):
            load_movielens(str(tmp_path / 'missing.data'))

    def test_no_valid_records(self, tmp_path):
        path = tmp_path / 'u.data'
        path.write_text('junk\n')
        with pytest.raises(InvalidData):
            load_movielens(str(path))


@pytest.mark.skipif(not FULL_DATASET, reason='set CONTRACTCLEAR_MOVIELENS to the full u.data')
def test_full_dataset():
    pop, report = load_movielens(FULL_DATASET)
    assert report.is_full_dataset
    assert report.malformed == 0
    assert len(pop) == 943
