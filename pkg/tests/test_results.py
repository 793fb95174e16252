import json

import numpy as np
import pytest

from contractclear import (
    InvalidArgument,
    InvalidData,
    ResultFormat,
    ResultTable,
    ResultWriteError,
    read_results,
    render_results,
    write_results,
)


@pytest.fixture
def table():
    t = ResultTable(['mechanism', 'efficiency', 'gini', 'converged', 'pof'], metadata={'master_seed': 3})
    t.add_row(['proportional', 41.2345678, 0.1, True, None])
    t.add_row({'mechanism': 'proposed_equilibrium', 'efficiency': np.float64(45.5), 'gini': 0.05,
               'converged': np.bool_(False), 'pof': 1.0234})
    return t


class TestTable:
    def test_arity(self):
        t = ResultTable(['a', 'b'])
        with pytest.raises(InvalidArgument):
            t.add_row([1])
        with pytest.raises(InvalidArgument):
            ResultTable(['a', 'a'])

    def test_from_records(self):
        t = ResultTable.from_records([{'a': 1, 'b': 2}, {'b': 3, 'c': 4}])
        assert t.columns == ['a', 'b', 'c']
        assert t.rows == [[1, 2, None], [None, 3, 4]]
        assert t.column('b') == [2, 3]
        with pytest.raises(KeyError):
            t.column('z')


class TestRender:
    def test_csv_layout(self, table):
        text = render_results(table)
        lines = text.splitlines()
        assert lines[0] == '# schema_version: 1'
        assert lines[1] == '# master_seed: 3'
        assert lines[2].startswith('# timestamp: ')
        assert lines[3] == 'mechanism,efficiency,gini,converged,pof'
        assert lines[4] == 'proportional,41.2346,0.1,true,'

    def test_json_layout(self, table):
        document = json.loads(render_results(table, 'json'))
        assert document['schema_version'] == 1
        assert document['metadata']['master_seed'] == 3
        assert document['columns'] == table.columns
        assert document['rows'][1] == ['proposed_equilibrium', 45.5, 0.05, False, 1.0234]

    def test_empty_table(self):
        lines = render_results(ResultTable(['a', 'b'])).splitlines()
        assert lines[-1] == 'a,b'


class TestWriteRead:
    @pytest.mark.parametrize('suffix', ['csv', 'json'])
    def test_values_survive(self, table, tmp_path, suffix):
        path = write_results(table, str(tmp_path / f'out.{suffix}'))
        loaded = read_results(path)
        assert loaded.columns == table.columns
        assert loaded.metadata['schema_version'] == 1
        assert loaded.metadata['master_seed'] == 3
        assert 'timestamp' in loaded.metadata
        assert loaded.column('mechanism') == ['proportional', 'proposed_equilibrium']
        assert loaded.column('efficiency') == pytest.approx([41.2345678, 45.5], rel=1e-5)
        assert loaded.column('converged') == [True, False]
        assert loaded.column('pof')[0] is None

    def test_format_override(self, table, tmp_path):
        path = write_results(table, str(tmp_path / 'out.txt'), ResultFormat.json)
        with open(path) as fp:
            assert json.load(fp)['columns'] == table.columns

    def test_deterministic_apart_from_timestamp(self, table, tmp_path):
        def body(name):
            with open(write_results(table, str(tmp_path / name))) as fp:
                return [line for line in fp if not line.startswith('# timestamp')]

        assert body('a.csv') == body('b.csv')

    def test_output_directory_from_environment(self, table, tmp_path, monkeypatch):
        monkeypatch.setenv('CONTRACTCLEAR_OUTPUT_DIR', str(tmp_path / 'runs'))
        path = write_results(table, 'sweep.csv')
        assert path == str(tmp_path / 'runs' / 'sweep.csv')
        assert len(read_results(path)) == 2

    def test_unwritable_destination(self, table, tmp_path):
        blocker = tmp_path / 'file'
        blocker.write_text('')
        with pytest.raises(ResultWriteError):
            write_results(table, str(blocker / 'out.csv'))

    def test_malformed_csv(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text('# schema_version: 1\na,b\n1,2\n3\n')
        with pytest.raises(InvalidData) as info:
            read_results(str(path))
        assert info.value.line == 4
