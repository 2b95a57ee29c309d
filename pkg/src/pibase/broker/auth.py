"""Email/password accounts and bearer-token sessions.

Passwords are stored as salted PBKDF2-SHA256 digests. Login failures are
indistinguishable between unknown email and wrong password so accounts
cannot be enumerated. Tokens are 32 random bytes rendered as hex, tracked
in a server-side session table with an expiry.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import secrets
import threading
import time

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")
_PBKDF2_ITERATIONS = 60_000
MIN_PASSWORD_LENGTH = 8


class AuthError(Exception):
    """Invalid credentials, unknown token, or expired session."""


class ValidationError(ValueError):
    """Registration input rejected (syntax or policy)."""


class DuplicateEmailError(ValidationError):
    """The email is already registered."""


def _digest(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, _PBKDF2_ITERATIONS)


class AuthStore:
    def __init__(self, clock=time.time, token_ttl: float = 86400.0):
        self._clock = clock
        self._token_ttl = token_ttl
        self._accounts: dict[str, dict] = {}  # uid -> record
        self._email_index: dict[str, str] = {}  # lowercased email -> uid
        self._sessions: dict[str, tuple[str, float]] = {}  # token -> (uid, expiry)
        self._lock = threading.Lock()

    def register(self, email: str, password: str, name: str) -> dict:
        """Create an account; returns the full record (digest included).

        The caller persists the record; it must never reach a client.
        """
        if not isinstance(email, str) or not _EMAIL_RE.match(email):
            raise ValidationError(f"invalid email address {email!r}")
        if not isinstance(password, str) or len(password) < MIN_PASSWORD_LENGTH:
            raise ValidationError(
                f"password must be at least {MIN_PASSWORD_LENGTH} characters"
            )
        if not isinstance(name, str) or not name.strip():
            raise ValidationError("name must be non-empty")
        with self._lock:
            key = email.lower()
            if key in self._email_index:
                raise DuplicateEmailError(f"email {email!r} already registered")
            uid = "u" + secrets.token_hex(12)
            salt = secrets.token_bytes(16)
            record = {
                "uid": uid,
                "name": name,
                "email": email,
                "salt": salt.hex(),
                "digest": _digest(password, salt).hex(),
                "created_at": self._clock(),
            }
            self._accounts[uid] = record
            self._email_index[key] = uid
            return dict(record)

    def restore(self, record: dict) -> None:
        """Re-add an account from persisted state."""
        self._accounts[record["uid"]] = dict(record)
        self._email_index[record["email"].lower()] = record["uid"]

    def login(self, email: str, password: str) -> tuple[str, float]:
        """Verify credentials and open a session; returns (token, expiry)."""
        uid = self._email_index.get(email.lower() if isinstance(email, str) else "")
        record = self._accounts.get(uid) if uid else None
        if record is None:
            raise AuthError("invalid credentials")
        expected = bytes.fromhex(record["digest"])
        actual = _digest(password, bytes.fromhex(record["salt"]))
        if not hmac.compare_digest(expected, actual):
            raise AuthError("invalid credentials")
        token = secrets.token_hex(32)
        expiry = self._clock() + self._token_ttl
        with self._lock:
            self._sessions[token] = (uid, expiry)
        return token, expiry

    def authenticate(self, token: str | None) -> str:
        """Resolve a bearer token to a uid or raise."""
        if not token:
            raise AuthError("missing token")
        session = self._sessions.get(token)
        if session is None:
            raise AuthError("unknown token")
        uid, expiry = session
        if self._clock() >= expiry:
            with self._lock:
                self._sessions.pop(token, None)
            raise AuthError("token expired")
        return uid

    def account_count(self) -> int:
        return len(self._accounts)
