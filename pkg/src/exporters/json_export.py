"""JSON export for evaluation reports and novelty scores."""

import json
from pathlib import Path
from typing import Iterable, Protocol, Union


class Exportable(Protocol):
    def to_dict(self) -> dict: ...


def export_to_json(
    item: Union[Exportable, dict],
    output_path: Union[str, Path],
    pretty: bool = True,
) -> Path:
    """
    Export a single report to a JSON file.

    Args:
        item: Object with ``to_dict`` (or a plain dict)
        output_path: Output file path
        pretty: Whether to format JSON with indentation

    Returns:
        Path to created file
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    data = item if isinstance(item, dict) else item.to_dict()

    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2 if pretty else None, sort_keys=True, ensure_ascii=False)
        f.write("\n")

    return output_path


def export_to_jsonl(items: Iterable[Exportable], output_path: Union[str, Path]) -> Path:
    """Export records as JSON lines, one object per line."""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    with open(output_path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(json.dumps(item.to_dict(), sort_keys=True, ensure_ascii=False))
            f.write("\n")

    return output_path


def read_jsonl(path: Union[str, Path]) -> list[dict]:
    """Read a JSON-lines file back into dictionaries."""
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
