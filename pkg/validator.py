"""
validator.py
Confere um run terminado a partir do metrics.csv e produz relatório.

Checagens:
  - contagem de épocas contra a configuração
  - global_steps avançando exatamente steps_per_epoch por linha
  - wall_time_s não decrescente
  - épocas sem episódio completo
  - perdas não finitas
Resumo: melhor e última recompensa média.
"""

import json
import logging
import math
import sys
from datetime import datetime
from pathlib import Path

from metrics import EpochRecord, ler_metricas

logger = logging.getLogger(__name__)


# ═══════════════════════════════════════════════════════════════
# HELPERS
# ═══════════════════════════════════════════════════════════════

def _saltos_de_passos(records: list[EpochRecord], passos_por_epoca: int) -> list[str]:
    saltos = []
    anterior = records[0].global_steps - passos_por_epoca if records else 0
    for r in records:
        if r.global_steps - anterior != passos_por_epoca:
            saltos.append(f"época {r.epoch}: {anterior} → {r.global_steps}")
        if r.global_steps != r.epoch * passos_por_epoca:
            saltos.append(f"época {r.epoch}: global_steps {r.global_steps} ≠ {r.epoch} × {passos_por_epoca}")
        anterior = r.global_steps
    return saltos


def _recuos_de_tempo(records: list[EpochRecord]) -> list[str]:
    return [
        f"época {b.epoch}: {a.wall_time_s:.3f}s → {b.wall_time_s:.3f}s"
        for a, b in zip(records, records[1:])
        if b.wall_time_s < a.wall_time_s
    ]


def _perdas_nao_finitas(records: list[EpochRecord]) -> list[int]:
    ruins = []
    for r in records:
        for perda in (r.mean_policy_loss, r.mean_value_loss):
            if perda is not None and not math.isfinite(perda):
                ruins.append(r.epoch)
                break
    return ruins


# ═══════════════════════════════════════════════════════════════
# RELATÓRIO
# ═══════════════════════════════════════════════════════════════

def validate_run(records: list[EpochRecord], cfg=None) -> dict:
    """
    `cfg` é um TrainConfig (ou None: passos por época inferidos da primeira linha).
    """
    passos_por_epoca = cfg.steps_per_epoch if cfg is not None else (
        records[0].global_steps // max(records[0].epoch, 1) if records else 0
    )
    recompensas = [(r.epoch, r.mean_episode_reward) for r in records if r.mean_episode_reward is not None]

    relatorio = {
        "timestamp": datetime.now().isoformat(),
        "algo": getattr(cfg, "algo", None),
        "env": getattr(cfg, "env", None),
        "epocas": len(records),
        "ultima_epoca": records[-1].epoch if records else 0,
        "epocas_esperadas": getattr(cfg, "epochs", None),
        "passos_por_epoca": passos_por_epoca,
        "episodios": sum(r.episodes for r in records),
        "saltos_de_passos": _saltos_de_passos(records, passos_por_epoca),
        "recuos_de_tempo": _recuos_de_tempo(records),
        "epocas_sem_episodio": [r.epoch for r in records if r.episodes == 0],
        "perdas_nao_finitas": _perdas_nao_finitas(records),
        "melhor_recompensa": None,
        "ultima_recompensa": None,
        "warnings": [],
    }
    if recompensas:
        epoca, valor = max(recompensas, key=lambda p: p[1])
        relatorio["melhor_recompensa"] = {"epoch": epoca, "valor": valor}
        relatorio["ultima_recompensa"] = {"epoch": recompensas[-1][0], "valor": recompensas[-1][1]}

    esperadas = relatorio["epocas_esperadas"]
    if esperadas is not None and esperadas != relatorio["ultima_epoca"]:
        relatorio["warnings"].append(f"CSV termina na época {relatorio['ultima_epoca']}; configuração pede {esperadas}")
    if records and not recompensas:
        relatorio["warnings"].append("nenhum episódio completo em todo o run")

    for aviso in relatorio["warnings"]:
        logger.warning(f"[relatorio] {aviso}")
    return relatorio


def needs_review(r: dict) -> bool:
    """Run com invariante quebrado: passos, tempo, perdas ou épocas faltando."""
    if r.get("saltos_de_passos"): return True
    if r.get("recuos_de_tempo"): return True
    if r.get("perdas_nao_finitas"): return True
    esperadas = r.get("epocas_esperadas")
    if esperadas is not None and esperadas != r.get("ultima_epoca"): return True
    return False


def salvar_relatorio(r: dict, caminho: Path) -> Path:
    caminho = Path(caminho)
    caminho.write_text(json.dumps(r, ensure_ascii=False, indent=2), encoding="utf-8")
    return caminho


# ═══════════════════════════════════════════════════════════════
# IMPRESSÃO DO RELATÓRIO
# ═══════════════════════════════════════════════════════════════

def imprimir_relatorio(r: dict) -> None:
    print("\n" + "═" * 50)
    print("  RELATÓRIO DO RUN")
    if r.get("algo"):
        print(f"  {r['algo']} em {r.get('env', '?')}")
    print(f"  Gerado em: {r.get('timestamp', '?')}")
    print("═" * 50)

    esperadas = r.get("epocas_esperadas")
    print(f"\n📈 Épocas:              {r['epocas']}" + (f" de {esperadas}" if esperadas is not None else ""))
    print(f"👣 Passos por época:    {r['passos_por_epoca']}")
    print(f"🎬 Episódios:           {r['episodios']}")
    melhor, ultima = r.get("melhor_recompensa"), r.get("ultima_recompensa")
    if melhor:
        print(f"🏆 Melhor recompensa:   {melhor['valor']:.4g} (época {melhor['epoch']})")
        print(f"🏁 Última recompensa:   {ultima['valor']:.4g} (época {ultima['epoch']})")

    print(f"\n{'─'*40}")
    _linha("🔴 Saltos de passos",        r["saltos_de_passos"])
    _linha("🔴 Perdas não finitas",      r["perdas_nao_finitas"])
    _linha("🟠 Recuos de tempo",         r["recuos_de_tempo"])
    _linha("🟡 Épocas sem episódio",     r["epocas_sem_episodio"])

    if r.get("warnings"):
        print(f"\n⚠️  Warnings ({len(r['warnings'])}):")
        for w in r["warnings"][:10]:
            print(f"   • {w}")

    print("\n" + "═" * 50 + "\n")


def _linha(label: str, lista: list) -> None:
    status = "✅ Nenhum" if not lista else f"{len(lista)} encontrado(s)"
    print(f"{label}: {status}")
    if lista:
        for item in lista[:5]:
            print(f"   • {item}")
        if len(lista) > 5:
            print(f"   ... e mais {len(lista) - 5}")


# ═══════════════════════════════════════════════════════════════
# CLI
# ═══════════════════════════════════════════════════════════════

if __name__ == "__main__":
    entrada     = sys.argv[1] if len(sys.argv) > 1 else "metrics.csv"
    saida_relat = sys.argv[2] if len(sys.argv) > 2 else "relatorio.json"

    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")

    relatorio = validate_run(ler_metricas(Path(entrada)))
    salvar_relatorio(relatorio, Path(saida_relat))
    imprimir_relatorio(relatorio)
