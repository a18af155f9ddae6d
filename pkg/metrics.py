"""
metrics.py
Registro por época e escrita incremental de metrics.csv.

Colunas (nesta ordem):
  epoch,global_steps,wall_time_s,mean_episode_reward,episodes,mean_policy_loss,mean_value_loss

Reais com 6 algarismos significativos; campos ausentes ficam em branco
(nunca 0). Os workers publicam eventos numa fila; um único consumidor
(MetricsWriter) grava as linhas.
"""

from __future__ import annotations

import csv
import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from tenacity import before_sleep_log, retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from erros import PlotError, UsageError

logger = logging.getLogger(__name__)

COLUNAS = (
    "epoch", "global_steps", "wall_time_s", "mean_episode_reward",
    "episodes", "mean_policy_loss", "mean_value_loss",
)
CABECALHO = ",".join(COLUNAS)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    global_steps: int
    wall_time_s: float
    mean_episode_reward: float | None
    episodes: int
    mean_policy_loss: float | None = None
    mean_value_loss: float | None = None


@dataclass
class ResumoEpoca:
    recompensas: list[float] = field(default_factory=list)
    perdas_politica: list[float] = field(default_factory=list)
    perdas_valor: list[float] = field(default_factory=list)


def drenar_eventos(eventos: queue.Queue) -> ResumoEpoca:
    """Consome os eventos ("episodio", r) e ("perda", politica, valor) acumulados na fila."""
    resumo = ResumoEpoca()
    while True:
        try:
            tipo, *dados = eventos.get_nowait()
        except queue.Empty:
            return resumo
        if tipo == "episodio":
            resumo.recompensas.append(dados[0])
        elif tipo == "perda":
            politica, valor = dados
            if politica is not None:
                resumo.perdas_politica.append(politica)
            if valor is not None:
                resumo.perdas_valor.append(valor)


def _media(valores: list[float]) -> float | None:
    return float(np.mean(valores)) if valores else None


def registro_da_epoca(epoca: int, passos: int, wall_time_s: float, resumo: ResumoEpoca) -> EpochRecord:
    return EpochRecord(
        epoch=epoca,
        global_steps=passos,
        wall_time_s=wall_time_s,
        mean_episode_reward=_media(resumo.recompensas),
        episodes=len(resumo.recompensas),
        mean_policy_loss=_media(resumo.perdas_politica),
        mean_value_loss=_media(resumo.perdas_valor),
    )


# ═══════════════════════════════════════════════════════════════
# FORMATO CSV
# ═══════════════════════════════════════════════════════════════

def _campo(valor) -> str:
    if valor is None:
        return ""
    if isinstance(valor, (int, np.integer)) and not isinstance(valor, bool):
        return str(int(valor))
    return f"{float(valor):.6g}"


def formatar_linha(record: EpochRecord) -> str:
    return ",".join(_campo(getattr(record, c)) for c in COLUNAS)


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.1, min=0.1, max=2),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)
def _anexar(caminho: Path, texto: str) -> None:
    with open(caminho, "a", encoding="utf-8", newline="") as f:
        f.write(texto)


def write_header(caminho: Path) -> Path:
    caminho = Path(caminho)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    caminho.write_text(CABECALHO + "\n", encoding="utf-8")
    return caminho


def write_metrics(record: EpochRecord, caminho: Path) -> None:
    caminho = Path(caminho)
    if not caminho.exists() or caminho.stat().st_size == 0:
        raise UsageError(f"{caminho}: cabeçalho ainda não escrito")
    _anexar(caminho, formatar_linha(record) + "\n")


def _converter(valor: str, tipo):
    return None if valor == "" else tipo(valor)


def ler_metricas(caminho: Path) -> list[EpochRecord]:
    """Lê metrics.csv. Linhas malformadas viram PlotError com o número da linha."""
    caminho = Path(caminho)
    with open(caminho, encoding="utf-8", newline="") as f:
        linhas = list(csv.reader(f))
    if not linhas:
        raise PlotError(f"{caminho}: arquivo vazio")
    if tuple(linhas[0]) != COLUNAS:
        raise PlotError(f"{caminho}: cabeçalho inesperado {linhas[0]}", line=1)

    registros = []
    for numero, linha in enumerate(linhas[1:], start=2):
        if not linha:
            continue
        if len(linha) != len(COLUNAS):
            raise PlotError(f"{caminho}: {len(linha)} campos, esperado {len(COLUNAS)}", line=numero)
        try:
            registros.append(EpochRecord(
                epoch=int(linha[0]),
                global_steps=int(linha[1]),
                wall_time_s=float(linha[2]),
                mean_episode_reward=_converter(linha[3], float),
                episodes=int(linha[4]),
                mean_policy_loss=_converter(linha[5], float),
                mean_value_loss=_converter(linha[6], float),
            ))
        except ValueError as e:
            raise PlotError(f"{caminho}: linha ilegível ({e})", line=numero) from e
    return registros


# ═══════════════════════════════════════════════════════════════
# ESCRITOR COM FILA
# ═══════════════════════════════════════════════════════════════

class MetricsWriter:
    """
    Consumidor único de EpochRecord. `put` enfileira; a thread grava.
    `close` envia o sinal de fim (None), espera e repassa qualquer erro de escrita.
    """

    def __init__(self, caminho: Path, anexar: bool = False):
        self.caminho = Path(caminho)
        if not anexar or not self.caminho.exists():
            write_header(self.caminho)
        self._fila: queue.Queue = queue.Queue()
        self._erro: BaseException | None = None
        self._thread = threading.Thread(target=self._consumir, name="metrics-writer", daemon=True)
        self._thread.start()

    def _consumir(self) -> None:
        while True:
            record = self._fila.get()
            if record is None:
                return
            try:
                write_metrics(record, self.caminho)
            except BaseException as e:
                self._erro = e
                logger.error(f"[metricas] falha ao gravar época {record.epoch}: {e}")

    def put(self, record: EpochRecord) -> None:
        self._fila.put(record)

    def close(self) -> None:
        self._fila.put(None)
        self._thread.join()
        if self._erro is not None:
            raise self._erro

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
