import logging
import os
import tempfile
import unittest

from scripts.logger import LOG_FORMAT, SetupLogger


class TestSetupLogger(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.name = f"laplace_asym_test_{id(self)}"

    def tearDown(self):
        logger = logging.getLogger(self.name)
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)

    def test_creates_directory_and_writes(self):
        log_file = os.path.join(self.tmp.name, "nested", "run.log")
        logger = SetupLogger(log_file=log_file, log_level=logging.DEBUG, name=self.name).get_logger()
        logger.debug("tracking c_n")

        # Assertions
        self.assertTrue(os.path.exists(log_file))
        with open(log_file) as handle:
            line = handle.read()
        self.assertIn("DEBUG", line)
        self.assertIn("tracking c_n", line)
        self.assertFalse(logger.propagate)

    def test_handlers_are_not_duplicated(self):
        log_file = os.path.join(self.tmp.name, "run.log")
        SetupLogger(log_file=log_file, name=self.name)
        logger = SetupLogger(log_file=log_file, name=self.name).get_logger()
        self.assertEqual(len(logger.handlers), 1)

    def test_foreign_handler_does_not_block_the_file(self):
        logger = logging.getLogger(self.name)
        logger.addHandler(logging.NullHandler())
        log_file = os.path.join(self.tmp.name, "run.log")
        SetupLogger(log_file=log_file, name=self.name).get_logger().info("oracle converged")
        with open(log_file) as handle:
            self.assertIn("oracle converged", handle.read())

    def test_new_path_gets_its_own_handler(self):
        first = os.path.join(self.tmp.name, "first.log")
        second = os.path.join(self.tmp.name, "second.log")
        SetupLogger(log_file=first, name=self.name)
        logger = SetupLogger(log_file=second, name=self.name).get_logger()
        logger.info("second run")
        files = sorted(os.path.basename(h.baseFilename) for h in logger.handlers)
        self.assertEqual(files, ["first.log", "second.log"])
        with open(second) as handle:
            self.assertIn("second run", handle.read())

    def test_console_mirror(self):
        log_file = os.path.join(self.tmp.name, "run.log")
        logger = SetupLogger(log_file=log_file, console=True, name=self.name).get_logger()
        kinds = sorted(type(h).__name__ for h in logger.handlers)
        self.assertEqual(kinds, ["FileHandler", "StreamHandler"])
        self.assertEqual(logger.handlers[0].formatter._fmt, LOG_FORMAT)

    def test_child_loggers_share_handlers(self):
        log_file = os.path.join(self.tmp.name, "run.log")
        SetupLogger(log_file=log_file, name=self.name)
        logging.getLogger(f"{self.name}.oracle").info("oracle converged")
        with open(log_file) as handle:
            self.assertIn(f"{self.name}.oracle - INFO - oracle converged", handle.read())


if __name__ == '__main__':
    unittest.main()
