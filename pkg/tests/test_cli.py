import json
import os

import pytest

from contractclear import read_results
from contractclear.cli import BadArgument, CommandNotFound, main, registry

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'configs')
TWO_AGENT = os.path.join(CONFIG_DIR, 'two_agent.json')


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.json'
    path.write_text(json.dumps({'experiment': {'replications': 2, 'sweep_replications': 2}}))
    return str(path)


def summary(text):
    values = {}
    for line in text.splitlines():
        key, sep, value = line.partition(': ')
        if sep and not key.startswith('#'):
            values[key] = value
    return values


class TestParsing:
    def test_no_command(self, capsys):
        assert main([]) == 1
        assert 'usage:' in capsys.readouterr().err

    def test_unknown_command(self, capsys):
        assert main(['auction']) == 1
        assert 'Command "auction" is not found' in capsys.readouterr().err

    def test_bad_choice(self, capsys):
        assert main(['clear', '--method', 'newton']) == 1

    def test_help(self, capsys):
        assert main(['sweep', '--help']) == 0
        assert '--mechanism' in capsys.readouterr().out

    def test_registry(self):
        names = [cmd.name for cmd in registry.commands]
        assert names[:2] == ['clear', 'compare']
        assert {'sweep', 'grid', 'shock', 'regret', 'statics', 'movielens', 'scaling', 'trajectory'} <= set(names)
        with pytest.raises(CommandNotFound):
            registry.parse(['nope'])
        with pytest.raises(BadArgument):
            registry.parse([])


class TestCommands:
    def test_clear(self, capsys):
        assert main(['clear', '--config', TWO_AGENT]) == 0
        out = capsys.readouterr().out
        values = summary(out)
        assert values['mu_star'] == '1'
        assert values['converged'] == 'true'
        assert values['fejer_violations'] == '0'
        assert 'id,alpha,beta,x' in out

    def test_clear_with_oracle(self, capsys):
        assert main(['clear', '--config', TWO_AGENT, '--method', 'bisection']) == 0
        values = summary(capsys.readouterr().out)
        assert values['method'] == 'bisection'
        assert values['total'] == '8'
        assert 'kappa' not in values

    def test_sweep_to_file(self, small_config, tmp_path):
        out = str(tmp_path / 'sweep.csv')
        assert main(['sweep', '--config', small_config, '--out', out]) == 0
        table = read_results(out)
        assert len(table) == 5
        assert table.column('tau') == [0, 0.5, 1, 1.5, 2]
        assert table.metadata['experiment'] == 'sweep'

    def test_json_output(self, capsys):
        assert main(['statics', '--config', TWO_AGENT, '--format', 'json']) == 0
        out = capsys.readouterr().out
        document = json.loads(out[out.index('{'):])
        assert document['columns'] == ['m', 'mu_star']
        assert len(document['rows']) == 5

    def test_seed_override_changes_digest(self, small_config, tmp_path):
        a, b = str(tmp_path / 'a.json'), str(tmp_path / 'b.json')
        assert main(['compare', '--config', small_config, '--out', a]) == 0
        assert main(['compare', '--config', small_config, '--seed', '3', '--out', b]) == 0
        assert read_results(a).metadata['master_seed'] == 0
        assert read_results(b).metadata['master_seed'] == 3

    def test_regret_horizon(self, capsys):
        assert main(['regret', '--config', TWO_AGENT, '--horizon', '50']) == 0
        assert 'regret: ' in capsys.readouterr().out
        assert main(['regret', '--config', TWO_AGENT, '--horizon', '0']) == 1

    def test_movielens(self, capsys, ratings_path):
        assert main(['movielens', '--data', ratings_path, '--replications', '1', '--capacity', '100']) == 0
        values = summary(capsys.readouterr().out)
        assert values['users'] == '20'
        assert values['records'] == '25'

    def test_movielens_requires_data(self, capsys):
        assert main(['movielens']) == 1
        assert '--data' in capsys.readouterr().err

    def test_trajectory(self, capsys):
        assert main(['trajectory', '--config', TWO_AGENT]) == 0
        assert 'x_0' in capsys.readouterr().out


class TestErrors:
    def test_invalid_config(self, tmp_path, capsys):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'contract': {'tau': -1}}))
        assert main(['clear', '--config', str(path)]) == 1
        assert 'contract.tau' in capsys.readouterr().err

    def test_missing_ratings(self, tmp_path, capsys):
        assert main(['movielens', '--data', str(tmp_path / 'u.data')]) == 1

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / 'file'
        blocker.write_text('')
        assert main(['statics', '--config', TWO_AGENT, '--out', str(blocker / 'x.csv')]) == 2
