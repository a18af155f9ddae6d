"""
plots.py
Curvas de aprendizado em SVG a partir de um ou mais metrics.csv.

Eixo x: "epoch" (coluna epoch) ou "wall_time" (coluna wall_time_s).
Eixo y: mean_episode_reward. Cada CSV vira uma série com gid "serie-<i>"
e entrada própria na legenda; épocas sem episódio completo ficam de fora.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib import rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from erros import PlotError  # noqa: E402
from metrics import ler_metricas  # noqa: E402

logger = logging.getLogger(__name__)

EixoX = Literal["epoch", "wall_time"]

_COLUNA_X = {"epoch": "epoch", "wall_time": "wall_time_s"}
_ROTULO_X = {"epoch": "época (6000 passos)", "wall_time": "tempo de parede (s)"}


def rotulo_da_serie(caminho: Path) -> str:
    """Nome do arquivo; para metrics.csv, o nome do diretório do run."""
    caminho = Path(caminho)
    if caminho.stem == "metrics" and caminho.parent.name:
        return caminho.parent.name
    return caminho.stem


def emit_plot(metrics_csv: Path | Sequence[Path], out_svg: Path, x_axis: EixoX = "epoch",
              titulo: str | None = None) -> Path:
    if x_axis not in _COLUNA_X:
        raise PlotError(f"Eixo x '{x_axis}' inválido (use 'epoch' ou 'wall_time')")
    arquivos = [Path(metrics_csv)] if isinstance(metrics_csv, (str, Path)) else [Path(p) for p in metrics_csv]
    if not arquivos:
        raise PlotError("Nenhum CSV informado")

    series = []
    for caminho in arquivos:
        registros = ler_metricas(caminho)
        if not registros:
            raise PlotError(f"{caminho}: nenhuma linha de dados")
        pontos = [
            (getattr(r, _COLUNA_X[x_axis]), r.mean_episode_reward)
            for r in registros if r.mean_episode_reward is not None
        ]
        if not pontos:
            raise PlotError(f"{caminho}: nenhuma época com episódio completo")
        series.append((rotulo_da_serie(caminho), pontos))

    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    with rc_context({"svg.fonttype": "none", "svg.hashsalt": "a3cf"}):
        fig = Figure(figsize=(7, 4.5))
        ax = fig.add_subplot()
        for i, (rotulo, pontos) in enumerate(series):
            xs, ys = zip(*pontos)
            (linha,) = ax.plot(xs, ys, label=rotulo, linewidth=1.5)
            linha.set_gid(f"serie-{i}")
        ax.set_xlabel(_ROTULO_X[x_axis])
        ax.set_ylabel("recompensa média por episódio")
        if titulo:
            ax.set_title(titulo)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(out_svg, format="svg")

    logger.info(f"[plot] {len(series)} série(s) → {out_svg}")
    return out_svg
