from __future__ import annotations
from jinja2 import Environment, FileSystemLoader


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    try:
        return f"{float(value):.3g}"
    except (TypeError, ValueError):
        return str(value)


class SummaryRenderer:
    def __init__(self, template_dir: str, template_name: str = "summary.txt.j2"):
        env = Environment(loader=FileSystemLoader(template_dir), autoescape=False,
                          trim_blocks=True, lstrip_blocks=True)
        env.filters["fmt"] = fmt
        self.tpl = env.get_template(template_name)

    def render(self, report: dict) -> str:
        by_suite = {}
        for entry in report.get("entries", []):
            by_suite.setdefault(entry["suite"], []).append(entry)
        return self.tpl.render(report=report, by_suite=by_suite)
