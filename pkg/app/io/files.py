import csv, io, json, sys, yaml
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

from pydantic import ValidationError

from ..errors import ConfigError, OutputError
from ..models import ExperimentConfig

FLAT_SUFFIXES = {'.txt', '.cfg', '.conf', '.ini', '.properties', ''}
# excluded from output headers: neither changes the results
RUN_ONLY_KEYS = {'run.threads', 'output.path'}


# ----------------- config -----------------
def parse_flat(text: str) -> Dict[str, str]:
    """key=value lines with dotted keys; '#' starts a comment."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split('=', 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def unflatten(data: Mapping[str, Any]) -> Dict[str, Any]:
    """Expand dotted keys into nested dicts; nested input passes through."""
    out: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, Mapping):
            value = unflatten(value)
        node = out
        parts = str(key).split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config key {key!r} collides with a scalar value")
        leaf = parts[-1]
        if isinstance(node.get(leaf), dict) and isinstance(value, dict):
            node[leaf].update(value)
        else:
            node[leaf] = value
    return out


def build_config(data: Mapping[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**unflatten(data))
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str) -> ExperimentConfig:
    p = Path(path)
    try:
        with open(p, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    suffix = p.suffix.lower()
    try:
        if suffix in ['.yaml', '.yml']:
            data = yaml.safe_load(text) or {}
        elif suffix == '.json':
            data = json.loads(text)
        else:
            data = parse_flat(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if not isinstance(data, Mapping):
        raise ConfigError(f"config {path} must hold a mapping, got {type(data).__name__}")
    return build_config(data)


def _flat_value(v: Any) -> str:
    if isinstance(v, bool):
        return 'true' if v else 'false'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ','.join(_flat_value(x) for x in v)
    return str(v)


def flatten_config(cfg: ExperimentConfig) -> Dict[str, str]:
    out: Dict[str, str] = {}

    def walk(prefix: str, node: Any):
        if isinstance(node, dict):
            for k, v in node.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif node is not None:
            out[prefix] = _flat_value(node)

    walk('', cfg.model_dump())
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return ''.join(f"{k}={v}\n" for k, v in flatten_config(cfg).items())


def with_overrides(cfg: ExperimentConfig, overrides: Mapping[str, Any]) -> ExperimentConfig:
    """Re-validate cfg with dotted-key overrides (None values are skipped)."""
    data: Dict[str, Any] = dict(flatten_config(cfg))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(data)


# ----------------- output -----------------
def header_lines(cfg: ExperimentConfig, command: str) -> List[str]:
    meta = {k: v for k, v in flatten_config(cfg).items() if k not in RUN_ONLY_KEYS}
    return [f"command={command}", f"master_seed={cfg.run.seed}"] + [f"{k}={v}" for k, v in meta.items()]


def _cell(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return 'true' if v else 'false'
    return v


def render_csv(rows: Iterable[Mapping[str, Any]], header: Optional[List[str]] = None,
               fieldnames: Optional[List[str]] = None) -> str:
    rows = list(rows)
    buf = io.StringIO()
    for line in header or []:
        buf.write(f"# {line}\n")
    names = fieldnames or (list(rows[0].keys()) if rows else [])
    if names:
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator='\n')
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _cell(r.get(k)) for k in names})
    return buf.getvalue()


def render_json(data: Mapping[str, Any], header: Optional[List[str]] = None) -> str:
    doc = dict(data)
    if header:
        doc = {'meta': dict(line.split('=', 1) for line in header), **doc}
    return json.dumps(doc, indent=2, allow_nan=True) + '\n'


def write_text(path: Optional[str | Path], text: str):
    """Write to path, or to stdout when path is None."""
    if path is None:
        sys.stdout.write(text)
        return
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, 'w', newline='', encoding='utf-8') as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f"cannot write {p}: {e}") from e


def save_json(path: Optional[str | Path], data: Mapping[str, Any], header: Optional[List[str]] = None):
    write_text(path, render_json(data, header))


def save_csv(path: Optional[str | Path], rows: list[dict[str, Any]], header: Optional[List[str]] = None,
             fieldnames: Optional[List[str]] = None):
    write_text(path, render_csv(rows, header, fieldnames))
