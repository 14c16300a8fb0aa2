"""Universal-time conversions and the text formats used on the console.

Universal time (UT) is a float count of seconds since ``UT_REFERENCE``.
"""

from __future__ import annotations

from datetime import datetime, timedelta

UT_REFERENCE = datetime(1951, 1, 1)

# Accepted by add_alarm; fractional seconds are rejected.
ALARM_TIME_FORMAT = "%Y-%m-%dT%H:%M:%S"


def to_datetime(ut: float) -> datetime:
    return UT_REFERENCE + timedelta(seconds=ut)


def from_datetime(moment: datetime) -> float:
    return (moment - UT_REFERENCE).total_seconds()


def parse_iso(text: str) -> float:
    """Parse any ISO-8601 timestamp into UT seconds."""
    return from_datetime(datetime.fromisoformat(text))


def iso_micro(ut: float) -> str:
    """ISO timestamp that always carries microseconds (observation stamps)."""
    return to_datetime(ut).isoformat(timespec="microseconds")


def iso_auto(ut: float) -> str:
    """ISO timestamp that drops the fraction when it is zero (alarm times)."""
    return to_datetime(ut).isoformat()


def spaced_micro(ut: float) -> str:
    """``YYYY-MM-DD HH:MM:SS.ffffff`` as used by alarm triggers and safety errors."""
    return to_datetime(ut).strftime("%Y-%m-%d %H:%M:%S.%f")


def parse_alarm_time(text: str) -> float:
    """Parse ``YYYY-MM-DDTHH:MM:SS`` strictly; raises ValueError otherwise."""
    return from_datetime(datetime.strptime(text, ALARM_TIME_FORMAT))


def format_met(elapsed: float) -> str:
    """Mission elapsed time as ``T+ <Y>Y, <DDD>D, HH:MM:SS`` with 365-day years."""
    total = int(max(elapsed, 0.0))
    years, rest = divmod(total, 365 * 86400)
    days, rest = divmod(rest, 86400)
    hours, rest = divmod(rest, 3600)
    minutes, seconds = divmod(rest, 60)
    return f"T+ {years}Y, {days:03d}D, {hours:02d}:{minutes:02d}:{seconds:02d}"
