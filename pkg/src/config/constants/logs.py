import os

from src.config.constants.app import PROJECT_NAME


LOGS_DIRECTORY = os.path.expanduser(f"~/log/{PROJECT_NAME}")

LOGGER_FILENAME_FORMAT = PROJECT_NAME + "_" + "{time:YYYY-MM-DD}.log"

LOGGER_MESSAGE_FORMAT = (
    "{time:YYYY-MM-DDTHH:mm:ss.SSSZZ} | {level} | {name}:{function}:{line} | {message} | context: {extra}"
)

# stderr only; stdout carries the JSON lines of command output
LOGGER_CONSOLE_FORMAT = "{time:HH:mm:ss.SSS} | {level: <7} | {message}"
