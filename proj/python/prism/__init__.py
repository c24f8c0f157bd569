"""Python bindings for the prism runtime guard."""

import json as _json

from . import _prism
from ._prism import CorpusError, PolicyError, RiskEngine

__all__ = [
    "CorpusError",
    "Policy",
    "PolicyError",
    "RiskEngine",
    "run_benchmark",
    "scan_text",
    "verify_audit",
]


def scan_text(text, origin="tool_result"):
    """Heuristic verdict for one text: verdict, score, matched_rules, canonical."""
    return _json.loads(_prism.scan_text(text, origin))


class Policy:
    """Policy engine over a JSON policy document (defaults when omitted)."""

    def __init__(self, document=None):
        self._engine = _prism.Policy("" if document is None else _json.dumps(document))

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(_json.load(fh))

    @property
    def revision(self):
        return self._engine.revision

    def check_exec(self, command):
        return _json.loads(self._engine.check_exec(command))

    def check_path(self, path):
        return _json.loads(self._engine.check_path(path))

    def check_url(self, url):
        return _json.loads(self._engine.check_url(url))

    def scan_secrets(self, text):
        return _json.loads(self._engine.scan_secrets(text))

    def reload(self, document):
        return self._engine.reload(_json.dumps(document))


def verify_audit(path, key, anchors=False):
    return _json.loads(_prism.verify_audit(path, key, anchors))


def run_benchmark(corpus_dirs, env_dir, engines=(), mode="mock", ladder=True):
    if isinstance(corpus_dirs, str):
        corpus_dirs = [corpus_dirs]
    return _json.loads(_prism.run_benchmark(list(corpus_dirs), env_dir, list(engines), mode, ladder))
