import logging
import os
import sys

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class SetupLogger:
    """
    A class to configure logging for laplace-asym runs.

    Attributes
    ----------
    log_file : str
        Path to the log file.
    log_level : int
        Logging level (e.g., logging.INFO).
    console : bool
        Whether records are mirrored to stderr.
    """

    def __init__(self, log_file='logs/laplace_asym.log', log_level=logging.INFO,
                 console=False, name='laplace_asym'):
        """
        Initialize the logger with the given log file and level.

        Parameters
        ----------
        log_file : str
            File path where logs will be saved.
        log_level : int
            Logging level (default: logging.INFO).
        console : bool
            Also write records to stderr (default: False).
        name : str
            Logger name; library modules log under ``scripts.*`` and are
            attached to this logger's handlers by the CLI.
        """
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

        self.log_file = log_file
        self.log_level = log_level
        self.logger = logging.getLogger(name)
        self.logger.setLevel(log_level)

        formatter = logging.Formatter(LOG_FORMAT)
        target = os.path.abspath(log_file)

        # One FileHandler per path, however often the CLI runs in one process
        if not any(isinstance(h, logging.FileHandler) and h.baseFilename == target for h in self.logger.handlers):
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)

        if console and not any(getattr(h, "stream", None) is sys.stderr for h in self.logger.handlers):
            stream_handler = logging.StreamHandler(sys.stderr)
            stream_handler.setFormatter(formatter)
            self.logger.addHandler(stream_handler)

        self.logger.propagate = False

    def get_logger(self):
        """
        Get the configured logger instance.

        Returns
        -------
        logging.Logger
            The logger instance.
        """
        return self.logger
