import pytest
from pydantic import ValidationError

from nqlab.core.config import Settings


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("WORKER_THREADS", "3")
    monkeypatch.setenv("LOG_LEVEL", "debug")
    current = Settings()
    assert current.WORKER_THREADS == 3
    assert current.LOG_LEVEL == "DEBUG"


def test_settings_are_case_sensitive(monkeypatch):
    monkeypatch.delenv("WORKER_THREADS", raising=False)
    monkeypatch.setenv("worker_threads", "7")
    assert Settings().WORKER_THREADS != 7


def test_settings_reject_bad_values(monkeypatch):
    monkeypatch.setenv("QUAD_RETRIES", "0")
    with pytest.raises(ValidationError):
        Settings()


def test_settings_model_config():
    assert Settings.model_config["env_file"] == ".env"
    assert Settings.model_config["case_sensitive"] is True
