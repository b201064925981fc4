# src/swing_ident/json_log_handler.py

import logging

# Attributes passed through `extra=` that are kept on the stored record
STRUCTURED_FIELDS = ('component', 'flag', 'step', 'metrics')


class JSONLogHandler(logging.Handler):
    """
    Keeps every record in memory as a JSON-ready dict:
    {'time', 'level', 'message'} plus any of the structured fields that were set.
    Training loops attach their step and metrics, so a finished run can be
    queried for its progress curve without parsing message text.
    """
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.log_records = []

    def emit(self, record):
        entry = {'time': record.created, 'level': record.levelname, 'message': record.getMessage()}
        for key in STRUCTURED_FIELDS:
            value = getattr(record, key, None)
            if value is not None:
                entry[key] = value
        self.log_records.append(entry)

    def messages(self, level=None, component=None):
        """Message texts, optionally filtered by level name and component."""
        return [e['message'] for e in self.log_records
                if (level is None or e['level'] == level)
                and (component is None or e.get('component') == component)]

    def progress(self, component):
        """(step, metrics) pairs logged by `log_progress` for one component, in order."""
        return [(e['step'], e['metrics']) for e in self.log_records
                if e.get('component') == component and 'metrics' in e]

    def clear(self):
        self.log_records = []
