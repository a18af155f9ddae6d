"""
settings.py — Configurações centralizadas da aplicação.

Carrega valores do .env e fornece defaults seguros.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# ─── Diretórios ──────────────────────────────────────────────

BASE_DIR = Path(__file__).parent
RUNS_DIR = Path(os.getenv("A3CF_RUNS_DIR", str(BASE_DIR / "runs")))
PRESETS_PATH = Path(os.getenv("A3CF_PRESETS", str(BASE_DIR / "config" / "experimentos.yaml")))

# ─── Logging ─────────────────────────────────────────────────

LOG_LEVEL = os.getenv("A3CF_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"

# ─── Numérico ────────────────────────────────────────────────

# Treino roda em 32 bits; a checagem de gradiente sempre usa 64 bits
DTYPE_TREINO = os.getenv("A3CF_DTYPE_TREINO", "float32")

# ─── Testes ──────────────────────────────────────────────────

# Suites longas de convergência (A3C/DQN no catch, experimento de viés completo)
TESTES_LONGOS = os.getenv("A3CF_TESTES_LONGOS", "0").lower() in ("1", "true", "sim")
