from typing import Any, Iterable, Sequence

from rich.console import Console
from rich.table import Table

# stderr keeps stdout free for CSV/JSON payloads
console = Console(stderr=True)

def info(msg: str): console.log(f"[bold cyan]INFO[/] {msg}")
def warn(msg: str): console.log(f"[bold yellow]WARN[/] {msg}")
def error(msg: str): console.log(f"[bold red]ERROR[/] {msg}")

def table(title: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]):
    t = Table(title=title)
    for col in columns:
        t.add_column(col)
    for row in rows:
        t.add_row(*(str(v) for v in row))
    console.print(t)
