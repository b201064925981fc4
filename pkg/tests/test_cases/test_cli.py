import unittest
import json
import os
import sys
import tempfile

# Add project root and src to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
sys.path.insert(0, os.path.join(project_root, 'src'))
sys.path.insert(0, project_root)

from swing_ident.dynamics import read_trajectory_csv
from swing_ident.errors import TrajectoryFormatError
from swing_ident.experiments.cli import load_scenario_constants, main

FD1_CONSTANTS = os.path.join(project_root, 'configs', 'fd1_constants.json')


class TestScenarioConstants(unittest.TestCase):

    def test_committed_file(self):
        self.assertEqual(load_scenario_constants(FD1_CONSTANTS), (0.1, 0.2, (0.3, 0.15)))

    def test_blind_constants(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'c.json')
            with open(path, 'w') as f:
                json.dump({'P': 0.1, 'B': 0.2}, f)
            self.assertEqual(load_scenario_constants(path), (0.1, 0.2, None))


class TestCommands(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def test_simulate_then_estimate(self):
        traj_path = os.path.join(self.dir, 'fd1.csv')
        self.assertEqual(main(['simulate', '--scenario', 'fd1', '--noise', '0', '--out', traj_path]), 0)
        self.assertEqual(len(read_trajectory_csv(traj_path)), 271)

        out = os.path.join(self.dir, 'estimate.json')
        code = main(['estimate', '--algo', 'sindy', '--input', traj_path,
                     '--scenario-constants', FD1_CONSTANTS, '--out', out])
        self.assertEqual(code, 0)
        with open(out, 'r') as f:
            result = json.load(f)
        self.assertEqual(result['algorithm'], 'sindy')
        self.assertLessEqual(result['eps_m'], 5.0)
        self.assertLessEqual(result['eps_d'], 1.0)

    def test_short_bpinn_estimate(self):
        traj_path = os.path.join(self.dir, 'fd2.csv')
        main(['simulate', '--scenario', 'fd2', '--duration', '3', '--noise', '0.01', '--out', traj_path])
        out = os.path.join(self.dir, 'bpinn.json')
        code = main(['estimate', '--algo', 'bpinn', '--input', traj_path, '--scenario-constants', FD1_CONSTANTS,
                     '--iterations', '3', '--particles', '3', '--warmup-epochs', '5', '--out', out])
        self.assertEqual(code, 0)
        with open(out, 'r') as f:
            result = json.load(f)
        self.assertEqual(result['n_particles'], 3)
        self.assertIn('tau_m', result)

    def test_validation_errors_exit_2(self):
        self.assertEqual(main(['simulate', '--scenario', 'fd1', '--noise', '0.2',
                               '--out', os.path.join(self.dir, 'x.csv')]), 2)
        bad = os.path.join(self.dir, 'bad.json')
        with open(bad, 'w') as f:
            json.dump({'P': 0.1}, f)
        self.assertEqual(main(['estimate', '--algo', 'sindy', '--input', os.path.join(self.dir, 'x.csv'),
                               '--scenario-constants', bad]), 2)
        self.assertEqual(main(['report', '--in', self.dir]), 2)

    def test_io_errors_exit_2(self):
        missing = os.path.join(self.dir, 'missing.csv')
        self.assertEqual(main(['estimate', '--algo', 'sindy', '--input', missing,
                               '--scenario-constants', FD1_CONSTANTS]), 2)

    def test_wrong_header_is_a_format_error(self):
        path = os.path.join(self.dir, 'wrong.csv')
        with open(path, 'w') as f:
            f.write('time,angle,speed\n0,0,0\n0.1,0,0\n')
        with self.assertRaises(TrajectoryFormatError):
            read_trajectory_csv(path)
        self.assertEqual(main(['estimate', '--algo', 'sindy', '--input', path,
                               '--scenario-constants', FD1_CONSTANTS]), 2)

    def test_unknown_subcommand_exits(self):
        with self.assertRaises(SystemExit) as ctx:
            main(['fit'])
        self.assertEqual(ctx.exception.code, 2)

    def test_sweep_and_report(self):
        config_path = os.path.join(self.dir, 'sweep.json')
        with open(config_path, 'w') as f:
            json.dump({'scenarios': ['fd1'], 'K_grid': [0.0, 0.01], 'T_grid': [27.0, 24.0], 'n_runs': 2,
                       'algorithms': ['sindy'], 'record_runtime': False}, f)
        out_dir = os.path.join(self.dir, 'sweep')
        self.assertEqual(main(['sweep', '--kind', 'length', '--config', config_path,
                               '--out-dir', out_dir, '--workers', '1']), 0)
        for name in ('spec.json', 'results.csv', 'results.json', 'tau_vs_eps.csv'):
            self.assertTrue(os.path.exists(os.path.join(out_dir, name)), name)
        self.assertTrue(os.path.exists(os.path.join(out_dir, 'console_out', 'harness.log')))

        report_dir = os.path.join(self.dir, 'report')
        self.assertEqual(main(['report', '--in', out_dir, '--format', 'json', '--out-dir', report_dir]), 0)
        with open(os.path.join(report_dir, 'results.json'), 'r') as f:
            self.assertEqual(len(json.load(f)['records']), 2)

    def test_reconstruct(self):
        summary = os.path.join(self.dir, 'recon.json')
        traces = os.path.join(self.dir, 'recon.csv')
        code = main(['reconstruct', '--scenario', 'sd2', '--estimate', '1.7', '1.4', '--estimate', '1.955', '1.4',
                     '--out', traces, '--summary', summary])
        self.assertEqual(code, 0)
        with open(summary, 'r') as f:
            document = json.load(f)
        self.assertEqual(len(document['reconstructions']), 2)
        self.assertLess(document['reconstructions'][0]['rmse_omega'], 1e-9)
        self.assertLess(document['reconstructions'][1]['relative_omega_rmse'], 0.10)

    def test_reconstruct_rejects_nonpositive(self):
        self.assertEqual(main(['reconstruct', '--scenario', 'sd1', '--estimate', '-1', '1.1',
                               '--summary', os.path.join(self.dir, 'r.json')]), 2)


if __name__ == '__main__':
    unittest.main()
