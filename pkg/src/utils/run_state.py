import threading


class RunState:
    """Process-wide stop flag shared by the web UI and sweep loops."""

    _instance = None

    def __init__(self):
        if not hasattr(self, "_stop_requested"):
            self._stop_requested = threading.Event()

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(RunState, cls).__new__(cls)
        return cls._instance

    def request_stop(self):
        self._stop_requested.set()

    def clear_stop(self):
        self._stop_requested.clear()

    def is_stop_requested(self):
        return self._stop_requested.is_set()
