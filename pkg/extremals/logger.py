# Logging for solver runs and the command-line front end
"""
Structured logging for every solve.
Each run gets a human-readable log and a JSON event record; a dated
system log collects one-line summaries across runs.
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
from functools import wraps


# Paths
PACKAGE_ROOT = Path(__file__).parent.parent
SYSTEM_DIR = PACKAGE_ROOT / "logs" / "system"


class RunLogger:
    """
    Logs all events of one solve (or one CLI command).
    Creates both human-readable and structured (JSON) logs.
    """

    def __init__(self, log_dir: Path, run_id: Optional[str] = None):
        self.run_id = run_id or datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        self.start_time = datetime.now()
        self.events: List[Dict[str, Any]] = []

        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = self.log_dir / f"run_{self.run_id}.log"
        self.json_file = self.log_dir / f"run_{self.run_id}.json"

        self.file_handler = logging.FileHandler(self.log_file, encoding='utf-8')
        self.file_handler.setFormatter(
            logging.Formatter('[%(asctime)s] %(message)s', datefmt='%Y-%m-%d %H:%M:%S')
        )

        self.logger = logging.getLogger(f'extremals_run_{self.run_id}')
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        self.logger.addHandler(self.file_handler)

        self.log_event('RUN_START', {'run_id': self.run_id})

    def log_event(self, event_type: str, data: Optional[Dict[str, Any]] = None):
        """Log an event with optional data."""
        event = {
            'timestamp': datetime.now().isoformat(),
            'type': event_type,
            'data': data or {}
        }
        self.events.append(event)

        if data:
            data_str = json.dumps(data, default=str, ensure_ascii=False)
            if len(data_str) > 500:
                data_str = data_str[:500] + '...'
            self.logger.info(f"{event_type}: {data_str}")
        else:
            self.logger.info(event_type)

    def log_problem(self, description: Dict[str, Any]):
        """Log the problem being solved."""
        self.log_event('PROBLEM', description)

    def log_projection(self, scale: float, nehari_residual: float):
        """Log a Nehari projection."""
        self.log_event('PROJECTION', {'scale': scale, 'nehari_residual': nehari_residual})

    def log_iteration(self, iteration: int, energy: float, two_lambda: float, step: float):
        """Log an accepted mountain-pass step."""
        self.log_event('ITERATION', {
            'iteration': iteration,
            'energy': energy,
            'two_lambda': two_lambda,
            'step': step,
        })

    def log_halving(self, iteration: int, step: float, energy_change: float):
        """Log a rejected trial step that triggers a halving."""
        self.log_event('HALVING', {'iteration': iteration, 'step': step, 'energy_change': energy_change})

    def log_residuals(self, mean_normalized: float, max_normalized: float, count: int):
        """Log the weak-form residual test."""
        self.log_event('RESIDUALS', {
            'mean_normalized': mean_normalized,
            'max_normalized': max_normalized,
            'count': count,
        })

    def log_error(self, error_type: str, error_msg: str, context: Optional[Dict] = None):
        """Log an error."""
        self.log_event('ERROR', {
            'error_type': error_type,
            'message': error_msg,
            'context': context or {}
        })
        self.logger.error(f"ERROR [{error_type}]: {error_msg}")

    def end_run(self, summary: Optional[Dict[str, Any]] = None) -> Tuple[Path, Path]:
        """End the run and save all logs."""
        duration = (datetime.now() - self.start_time).total_seconds()

        self.log_event('RUN_END', {
            'duration_seconds': duration,
            'total_events': len(self.events),
            'summary': summary or {}
        })

        run_data = {
            'run_id': self.run_id,
            'start_time': self.start_time.isoformat(),
            'end_time': datetime.now().isoformat(),
            'duration_seconds': duration,
            'events': self.events,
            'summary': summary or {}
        }

        with open(self.json_file, 'w', encoding='utf-8') as f:
            json.dump(run_data, f, indent=2, default=str, ensure_ascii=False)

        self.file_handler.close()
        self.logger.removeHandler(self.file_handler)

        return self.log_file, self.json_file


class SystemLogger:
    """
    Logs system-wide events (not run-specific).
    """

    def __init__(self, log_dir: Path = SYSTEM_DIR):
        today = datetime.now().strftime("%Y%m%d")

        self.logger = logging.getLogger('extremals_system')
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        self.error_logger = logging.getLogger('extremals_errors')
        self.error_logger.setLevel(logging.ERROR)
        self.error_logger.propagate = False

        try:
            log_dir.mkdir(parents=True, exist_ok=True)
        except OSError:
            # read-only install: keep the API, drop the files
            if not self.logger.handlers:
                self.logger.addHandler(logging.NullHandler())
            if not self.error_logger.handlers:
                self.error_logger.addHandler(logging.NullHandler())
            return

        if not self.logger.handlers:
            handler = logging.FileHandler(log_dir / f"extremals_{today}.log", encoding='utf-8')
            handler.setFormatter(
                logging.Formatter('[%(asctime)s] [%(levelname)s] %(message)s')
            )
            self.logger.addHandler(handler)

        if not self.error_logger.handlers:
            error_handler = logging.FileHandler(log_dir / f"errors_{today}.log", encoding='utf-8')
            error_handler.setFormatter(
                logging.Formatter('[%(asctime)s] %(message)s')
            )
            self.error_logger.addHandler(error_handler)

    def info(self, message: str):
        self.logger.info(message)

    def warning(self, message: str):
        self.logger.warning(message)

    def error(self, message: str, exc_info: bool = False):
        self.logger.error(message, exc_info=exc_info)
        self.error_logger.error(message, exc_info=exc_info)

    def debug(self, message: str):
        self.logger.debug(message)


# Global system logger instance
system_log = SystemLogger()


def log_function_call(func):
    """Decorator to log function calls."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        func_name = func.__name__
        system_log.debug(f"Calling {func_name}")
        try:
            result = func(*args, **kwargs)
            system_log.debug(f"{func_name} completed successfully")
            return result
        except Exception as e:
            system_log.error(f"{func_name} raised {type(e).__name__}: {e}")
            raise
    return wrapper
