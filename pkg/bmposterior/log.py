"""
Logger configuration objects.

Library modules log through ``logging.getLogger(__name__)`` and never install
handlers. Front ends pass one of the objects below (or a ready
``logging.Logger``) to `resolve_logger`.
"""
import enum
import logging

from bmposterior._checks import _check_type


class LoggerLevel(enum.Enum):
    Debug = logging.DEBUG
    Info = logging.INFO
    Warn = logging.WARNING
    Error = logging.ERROR


class ConsoleLogger:
    """
    Logger that writes on standard error

    Attributes
    ----------

    log_level:
        The logging level, eg: ``LoggerLevel.Info``
    """
    def __init__(self, log_level=LoggerLevel.Info):
        _check_type(LoggerLevel, log_level, 'log_level')
        self.log_level = log_level


class FileLogger:
    """
    Logger that writes into a file

    Attributes
    ----------

    log_level:
        The logging level, eg: ``LoggerLevel.Info``
    log_file:
        The file where to write the logs
    """
    def __init__(self, log_level, log_file):
        _check_type(LoggerLevel, log_level, 'log_level')
        _check_type(str, log_file, 'log_file')
        self.log_level = log_level
        self.log_file = log_file


_FORMAT = '%(asctime)s %(levelname)-5s %(name)s %(message)s'


def resolve_logger(logger, name='bmposterior'):
    """
    Turn a logger argument into a ``logging.Logger``.

    Parameters
    ----------

    logger: optional
        ``None`` (the package logger, unconfigured), a ``logging.Logger``,
        a `ConsoleLogger` or a `FileLogger`.
    """
    if logger is None:
        return logging.getLogger(name)
    if isinstance(logger, logging.Logger):
        return logger
    if isinstance(logger, ConsoleLogger):
        handler = logging.StreamHandler()
    elif isinstance(logger, FileLogger):
        handler = logging.FileHandler(logger.log_file)
    else:
        raise ValueError("Logger is expected to be either None, logging.Logger, "
                         "bmposterior.ConsoleLogger or bmposterior.FileLogger")
    resolved = logging.getLogger(name)
    for existing in list(resolved.handlers):
        if getattr(existing, '_bmposterior_handler', False):
            resolved.removeHandler(existing)
            existing.close()
    handler.setFormatter(logging.Formatter(_FORMAT))
    handler._bmposterior_handler = True
    resolved.addHandler(handler)
    resolved.setLevel(logger.log_level.value)
    return resolved
