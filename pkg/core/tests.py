import numpy as np
from django.test import SimpleTestCase, override_settings

from .exceptions import ConfigurationError, DomainError, InstabilityError, SolverError, SpikeRegError
from .seeding import STREAM_NAMES, resolve_seeds, run_streams


class ExceptionTests(SimpleTestCase):
    def test_value_errors(self):
        self.assertTrue(issubclass(DomainError, ValueError))
        self.assertTrue(issubclass(ConfigurationError, ValueError))
        self.assertTrue(issubclass(SolverError, SpikeRegError))

    def test_instability_carries_step(self):
        error = InstabilityError('firing loop exceeded', step=42)
        self.assertEqual(error.step, 42)
        self.assertIn('42', str(error))
        self.assertEqual(str(InstabilityError('nan')), 'nan')

    def test_solver_residual(self):
        self.assertEqual(SolverError('no solution', residual=0.5).residual, 0.5)


class SeedingTests(SimpleTestCase):
    def test_streams_reproducible(self):
        a, b = run_streams(3), run_streams(3)
        for name in STREAM_NAMES:
            np.testing.assert_array_equal(getattr(a, name).normal(size=5), getattr(b, name).normal(size=5))

    def test_streams_independent(self):
        streams = run_streams(3)
        draws = [getattr(streams, name).normal(size=5) for name in STREAM_NAMES]
        for i in range(len(draws)):
            for j in range(i + 1, len(draws)):
                self.assertFalse(np.array_equal(draws[i], draws[j]))

    def test_different_seeds_differ(self):
        self.assertFalse(np.array_equal(run_streams(1).plant.normal(size=5), run_streams(2).plant.normal(size=5)))

    @override_settings(SPIKEREG_SEED=None, SPIKEREG_DEFAULT_SEEDS=4)
    def test_resolve_default(self):
        self.assertEqual(resolve_seeds(), [0, 1, 2, 3])
        self.assertEqual(resolve_seeds([5, '6']), [5, 6])

    @override_settings(SPIKEREG_SEED=17)
    def test_resolve_master_seed(self):
        self.assertEqual(resolve_seeds(), [17])
        self.assertEqual(resolve_seeds([2]), [2])
