"""Subprocess sandbox for candidate scripts.

Each run gets a fresh temp directory, a pruned environment, a
wall-clock timeout with a kill grace period, capped output streams,
and (by default) a startup hook that disables socket creation so
scripts cannot reach the network.
"""

from __future__ import annotations

import logging
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import SandboxError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECONDS = 60.0
DEFAULT_GRACE_SECONDS = 2.0
DEFAULT_STREAM_CAP_BYTES = 65536

TRUNCATION_MARKER = b"\n[output truncated]\n"

_NETWORK_GUARD = """\
import socket

def _blocked(*args, **kwargs):
    raise OSError("network access is disabled in the sandbox")

socket.socket = _blocked
socket.socketpair = _blocked
socket.create_connection = _blocked
socket.getaddrinfo = _blocked
"""


@dataclass(frozen=True)
class SandboxLimits:
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS
    grace_seconds: float = DEFAULT_GRACE_SECONDS
    stream_cap_bytes: int = DEFAULT_STREAM_CAP_BYTES
    allow_network: bool = False
    interpreter: str | None = None

    def __post_init__(self):
        if self.timeout_seconds <= 0:
            raise ValueError(f"timeout_seconds must be positive, got {self.timeout_seconds}")
        if self.grace_seconds < 0:
            raise ValueError(f"grace_seconds must be nonnegative, got {self.grace_seconds}")
        if self.stream_cap_bytes <= 0:
            raise ValueError(f"stream_cap_bytes must be positive, got {self.stream_cap_bytes}")


@dataclass(frozen=True)
class SandboxResult:
    exit_status: int | None
    stdout: str
    stderr: str
    wall_time: float
    timed_out: bool

    @property
    def ok(self) -> bool:
        return self.exit_status == 0 and not self.timed_out


def _cap_stream(data: bytes, cap: int) -> str:
    if len(data) > cap:
        data = data[:cap] + TRUNCATION_MARKER
    return data.decode("utf-8", errors="replace")


def run_sandbox(script: str, limits: SandboxLimits | None = None) -> SandboxResult:
    """Execute a Python script in isolation and report what happened.

    The exit status is None when the run was killed on timeout. Stream
    contents are truncated at the configured cap with a visible marker.
    """
    limits = limits or SandboxLimits()
    interpreter = limits.interpreter or sys.executable
    if not Path(interpreter).exists():
        raise SandboxError(f"interpreter not found: {interpreter}")

    with tempfile.TemporaryDirectory(prefix="paperkg-sandbox-") as tmp:
        tmp_path = Path(tmp)
        script_path = tmp_path / "main.py"
        script_path.write_text(script, "utf-8")

        env = {
            "HOME": tmp,
            "TMPDIR": tmp,
            "PYTHONDONTWRITEBYTECODE": "1",
        }
        for key in ("PATH", "LANG", "LC_ALL", "SYSTEMROOT"):
            if key in os.environ:
                env[key] = os.environ[key]
        if not limits.allow_network:
            (tmp_path / "sitecustomize.py").write_text(_NETWORK_GUARD, "utf-8")
            env["PYTHONPATH"] = tmp

        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                [interpreter, str(script_path)],
                cwd=tmp,
                env=env,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise SandboxError(f"failed to launch sandbox process: {exc}") from exc

        timed_out = False
        try:
            out, err = proc.communicate(timeout=limits.timeout_seconds)
            exit_status: int | None = proc.returncode
        except subprocess.TimeoutExpired:
            timed_out = True
            proc.terminate()
            try:
                out, err = proc.communicate(timeout=limits.grace_seconds)
            except subprocess.TimeoutExpired:
                proc.kill()
                out, err = proc.communicate()
            exit_status = None
        wall_time = time.monotonic() - start

    result = SandboxResult(
        exit_status=exit_status,
        stdout=_cap_stream(out or b"", limits.stream_cap_bytes),
        stderr=_cap_stream(err or b"", limits.stream_cap_bytes),
        wall_time=wall_time,
        timed_out=timed_out,
    )
    logger.debug(
        "sandbox run: exit=%s timed_out=%s wall=%.3fs", result.exit_status, result.timed_out, result.wall_time
    )
    return result
