import logging
import os

from dotenv import load_dotenv

load_dotenv()

RESULT_LEVEL = 35
_configured = False


def addLoggingLevel(levelName: str, levelNum: int, methodName: str | None = None) -> None:
    methodName = methodName or levelName.lower()
    if hasattr(logging, levelName):
        return

    def logForLevel(self, message, *args, **kwargs):
        if self.isEnabledFor(levelNum):
            self._log(levelNum, message, args, **kwargs)

    def logToRoot(message, *args, **kwargs):
        logging.log(levelNum, message, *args, **kwargs)

    logging.addLevelName(levelNum, levelName)
    setattr(logging, levelName, levelNum)
    setattr(logging.getLoggerClass(), methodName, logForLevel)
    setattr(logging, methodName, logToRoot)


def setup_logging() -> None:
    """Install the package handler once; level comes from AMOD_LOGGING_LEVEL."""
    global _configured
    if _configured:
        return
    addLoggingLevel("RESULT", RESULT_LEVEL)

    log_type = os.getenv("AMOD_LOGGING_LEVEL", "info").lower()

    class AmodFormatter(logging.Formatter):
        def format(self, record):
            if isinstance(record.name, str) and record.name.startswith("src."):
                record.name = record.name.split(".")[1]
            return super().format(record)

    handler = logging.StreamHandler()
    if log_type == "result":
        handler.setFormatter(AmodFormatter("%(message)s"))
    else:
        handler.setFormatter(AmodFormatter("%(levelname)-8s [%(name)s] %(message)s"))

    package_logger = logging.getLogger("src")
    package_logger.addHandler(handler)
    package_logger.propagate = False
    if log_type == "result":
        package_logger.setLevel(RESULT_LEVEL)
    elif log_type == "debug":
        package_logger.setLevel(logging.DEBUG)
    elif log_type == "warning":
        package_logger.setLevel(logging.WARNING)
    else:
        package_logger.setLevel(logging.INFO)

    for third_party in ("gradio", "httpx", "httpcore", "matplotlib", "urllib3", "asyncio"):
        logging.getLogger(third_party).setLevel(logging.ERROR)
    _configured = True
