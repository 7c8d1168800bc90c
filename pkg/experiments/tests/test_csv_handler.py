import os
import tempfile

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from data_manager.csv_handler import (
    ResultWriter,
    TraceCSVHandler,
    costs_frame,
    gains_frame,
    gamma_label,
    metrics_frame,
    read_trace,
    runlog_frame,
    write_trace,
)
from data_manager.data_generators import generate_wind_trace
from mcv_control.exceptions import TraceFormatError
from mcv_control.riccati import GainSchedule
from mcv_control.sim import MetricsReport, RunLog
from mcv_control.wind import WindModel, WindTrace


def small_report():
    variance = np.array([[0.0, 0.0, 0.0], [0.1, 0.2, 0.3]])
    return MetricsReport(
        times=np.array([0.0, 0.01]),
        variance=variance,
        rmse=np.sqrt(variance),
        mean_error=np.zeros_like(variance),
        costs=np.array([1.5, 2.5]),
        seeds=[11, 2 ** 63 + 5],
    )


def small_log():
    n = 2
    return RunLog(
        times=np.array([0.0, 0.01]),
        states=np.tile([1.0, 1.0, 8.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], (n, 1)),
        inputs=np.tile([0.0, 0.0, 0.0, 9.81], (n, 1)),
        wind=np.zeros((n, 3)),
        references=np.tile([1.0, 1.0, 7.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], (n, 1)),
        nominal_input=np.array([0.0, 0.0, 0.0, 9.81]),
        seed=3,
    )


class ReadTraceTest(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = tmp.name

    def write(self, text):
        path = os.path.join(self.dir, 'trace.csv')
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def test_valid_trace(self):
        trace = read_trace(self.write("t,wx,wy,wz\n0,1,2,3\n0.5,1.5,2.5,3.5\n1,2,3,4\n"))
        self.assertEqual(len(trace), 3)
        np.testing.assert_array_equal(trace.times, [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(trace.samples[1], [1.5, 2.5, 3.5])

    def test_wrong_header_is_line_one(self):
        with self.assertRaises(TraceFormatError) as ctx:
            read_trace(self.write("time,wx,wy,wz\n0,1,2,3\n1,1,2,3\n"))
        self.assertEqual(ctx.exception.line, 1)

    def test_non_numeric_row_names_its_line(self):
        with self.assertRaises(TraceFormatError) as ctx:
            read_trace(self.write("t,wx,wy,wz\n0,1,2,3\n1,abc,2,3\n2,1,2,3\n"))
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('line 3', str(ctx.exception))

    def test_missing_value_names_its_line(self):
        with self.assertRaises(TraceFormatError) as ctx:
            read_trace(self.write("t,wx,wy,wz\n0,1,2,3\n1,1,2,3\n2,1,,3\n"))
        self.assertEqual(ctx.exception.line, 4)

    def test_extra_field_names_its_line(self):
        with self.assertRaises(TraceFormatError) as ctx:
            read_trace(self.write("t,wx,wy,wz\n0,1,2,3\n1,1,2,3,4\n"))
        self.assertEqual(ctx.exception.line, 3)

    def test_non_increasing_times_names_the_line(self):
        with self.assertRaises(TraceFormatError) as ctx:
            read_trace(self.write("t,wx,wy,wz\n0,1,2,3\n1,1,2,3\n1,1,2,3\n"))
        self.assertEqual(ctx.exception.line, 4)

    def test_empty_file(self):
        with self.assertRaises(TraceFormatError):
            read_trace(self.write(""))

    def test_missing_file_is_os_error(self):
        with self.assertRaises(OSError):
            read_trace(os.path.join(self.dir, 'missing.csv'))

    def test_written_trace_reads_back(self):
        model = WindModel([1.0, 0.0, 0.0], np.diag([0.2, 0.2, 0.1]))
        path = os.path.join(self.dir, 'gen', 'trace.csv')
        trace = generate_wind_trace(model, path, samples=50, period=0.25, seed=1)
        loaded = read_trace(path)
        np.testing.assert_allclose(loaded.samples, trace.samples, rtol=1e-11)
        np.testing.assert_allclose(loaded.times, trace.times)

    def test_handler_caches_until_file_changes(self):
        path = self.write("t,wx,wy,wz\n0,1,2,3\n1,1,2,3\n")
        handler = TraceCSVHandler(path)
        first = handler.load()
        self.assertIs(handler.load(), first)
        self.assertIsNot(handler.load(force=True), first)
        stats = handler.get_statistics()
        np.testing.assert_allclose(stats.mean, [1.0, 2.0, 3.0])


class FrameTest(SimpleTestCase):
    def test_runlog_columns(self):
        df = runlog_frame(small_log())
        self.assertEqual(list(df.columns[:11]), ['t', 'px', 'py', 'pz', 'qw', 'qx', 'qy', 'qz', 'vx', 'vy', 'vz'])
        for column in ('omega_x', 'f_c', 'wind_z', 'pz_ref', 'ex', 'ez'):
            self.assertIn(column, df.columns)
        np.testing.assert_allclose(df['ez'], [0.5, 0.5])

    def test_metrics_columns(self):
        df = metrics_frame(small_report())
        self.assertEqual(list(df.columns[:2]), ['k', 't'])
        np.testing.assert_allclose(df['var_z'], [0.0, 0.3])
        np.testing.assert_allclose(df['std_y'], [0.0, np.sqrt(0.2)])

    def test_costs_keep_full_seed(self):
        df = costs_frame(small_report())
        self.assertEqual(df['seed'].tolist(), ['11', str(2 ** 63 + 5)])

    def test_gains_columns(self):
        schedule = GainSchedule.constant(np.ones((4, 10)), np.eye(10), np.zeros((10, 10)))
        df = gains_frame(schedule)
        self.assertEqual(df.shape, (1, 1 + 40 + 100 + 100))
        self.assertIn('K_3_9', df.columns)
        self.assertIn('H_9_9', df.columns)

    def test_gamma_label(self):
        self.assertEqual(gamma_label(0.0), '0')
        self.assertEqual(gamma_label(0.25), '0.25')
        self.assertEqual(gamma_label(1.0), '1')


class ResultWriterTest(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = tmp.name

    def test_files_and_format(self):
        writer = ResultWriter(os.path.join(self.dir, 'out'))
        path = writer.write_metrics(small_report(), 'gamma_0.5')
        self.assertEqual(os.path.basename(path), 'metrics_gamma_0.5.csv')
        with open(path, 'rb') as f:
            content = f.read()
        self.assertNotIn(b'\r\n', content)
        self.assertTrue(content.startswith(b'k,t,var_x'))
        writer.write_costs(small_report(), 'gamma_0.5')
        writer.write_runlog(small_log(), 'gamma_0.5')
        self.assertEqual(len(writer.written), 3)

    def test_identical_inputs_identical_bytes(self):
        a = ResultWriter(os.path.join(self.dir, 'a')).write_metrics(small_report(), 'x')
        b = ResultWriter(os.path.join(self.dir, 'b')).write_metrics(small_report(), 'x')
        with open(a, 'rb') as fa, open(b, 'rb') as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_trace_file_matches_reader_format(self):
        trace = WindTrace([0.0, 1.0], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        path = os.path.join(self.dir, 'trace.csv')
        write_trace(trace, path)
        self.assertEqual(pd.read_csv(path).columns.tolist(), ['t', 'wx', 'wy', 'wz'])
