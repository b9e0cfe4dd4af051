"""Collects one result line per acceptance criterion for the end-of-run summary."""

LINES: list[str] = []


def record(number: int, title: str, value: float, bound: float, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {value:.3e} (bound {bound:.1e}){' ' + detail if detail else ''}"
    LINES.append(line)
    print(line)
