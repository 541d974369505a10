# -*- coding: utf-8 -*-
"""
Jinja2 environment for the SVG plot templates under ``templates/plots``.
"""
import re
from functools import lru_cache
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined, Template, select_autoescape

from .config import settings


class SvgTemplate(Template):
    """Drops the blank lines left by block tags; output ends with one newline."""

    _BLANK_LINES = re.compile(r"\n\s*\n+")

    def render(self, *args, **kwargs) -> str:
        output = super().render(*args, **kwargs)
        return self._BLANK_LINES.sub("\n", output).strip() + "\n"


def px(value: float) -> str:
    """Coordinate with two decimals, so reruns render identical bytes."""
    return f"{float(value):.2f}"


def create_plot_env(template_dir: Path | str | None = None) -> Environment:
    """
    Environment with autoescaping on (model ids and titles land in XML) and
    undefined variables as errors.

    Args:
        template_dir: defaults to settings.PLOTS_DIR
    """
    env = Environment(
        loader=FileSystemLoader(str(Path(template_dir or settings.PLOTS_DIR))),
        trim_blocks=True,
        lstrip_blocks=True,
        autoescape=select_autoescape(enabled_extensions=("svg", "svg.j2"), default=True),
        undefined=StrictUndefined,
    )
    env.template_class = SvgTemplate
    env.filters["px"] = px
    return env


@lru_cache(maxsize=1)
def plot_env() -> Environment:
    return create_plot_env()


def render_svg(template_name: str, **context) -> str:
    """Render a plot template (e.g. ``line_chart.svg.j2``)."""
    return plot_env().get_template(template_name).render(**context)
