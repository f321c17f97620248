"""Client used by the CLI: remote over HTTP, or the app run in-process."""

from __future__ import annotations

import warnings

import httpx

from ..errors import AionfitError


class ServiceError(AionfitError):
    """The service rejected a request or failed while handling it."""

    def __init__(self, status_code: int, category: str, message: str):
        super().__init__(f"{category}: {message}")
        self.status_code = status_code
        self.category = category


class ServiceClient:
    """POST/GET wrapper returning parsed JSON and raising ServiceError on failure.

    Without a server URL the FastAPI app runs in-process, so the CLI works
    standalone while speaking the exact service protocol.
    """

    def __init__(self, server_url: str | None = None, timeout: float = 600.0):
        if server_url:
            self._client = httpx.Client(base_url=server_url, timeout=timeout)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient
            from .app import create_app

            self._client = TestClient(create_app())

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _handle(self, response) -> dict:
        if response.status_code >= 400:
            detail = None
            try:
                detail = response.json().get("detail")
            except Exception:
                pass
            if isinstance(detail, dict) and "message" in detail:
                raise ServiceError(
                    response.status_code,
                    str(detail.get("category", "error")),
                    str(detail["message"]),
                )
            raise ServiceError(response.status_code, "error", str(detail or response.text))
        return response.json()

    def get(self, path: str) -> dict:
        return self._handle(self._client.get(path))

    def post(self, path: str, payload: dict) -> dict:
        return self._handle(self._client.post(path, json=payload))
