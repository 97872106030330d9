from typing import List, Optional


def is_comment(line: str) -> bool:
    return line.lstrip().startswith("#")

def parse_int_list(text: str) -> List[int]:
    """'1,5,10,20' -> [1, 5, 10, 20]; an empty string gives []."""
    if not text.strip():
        return []
    return [int(part) for part in text.split(",") if part.strip()]

def seconds_to_ms(seconds: Optional[float]) -> Optional[float]:
    if seconds is None: return None
    return seconds * 1000.0

def fmt_ms(ms: Optional[float]) -> str:
    if ms is None: return ""
    return f"{ms:.3f}"
