import logging
import time
from functools import wraps
from typing import Any, Callable, Optional, Tuple

logger = logging.getLogger(__name__)


def timed(func: Callable) -> Callable:
    """Make func return (result, elapsed seconds) instead of result"""
    @wraps(func)
    def wrapper(*args, **kwargs) -> Tuple[Any, float]:
        started = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed = time.perf_counter() - started
        logger.debug(f"{func.__name__} took {elapsed:.3f}s")
        return result, elapsed
    return wrapper


def format_seconds(seconds: float) -> str:
    """Format wall times for display"""
    if seconds >= 60:
        return f"{seconds / 60:.1f}m"
    if seconds >= 1:
        return f"{seconds:.2f}s"
    return f"{seconds * 1000:.0f}ms"


def accuracy_delta(current: float, quoted: Optional[float]) -> Optional[float]:
    """Difference to a quoted figure in percentage points"""
    if quoted is None:
        return None
    return (current - quoted) * 100
