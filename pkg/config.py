"""
config.py
Configuração de um run: modelo TrainConfig, arquivos `chave = valor` e presets.

Formato do arquivo (UTF-8, uma chave por linha):
    algo = "double-a3c"
    env = "catch"
    epochs = 50
    a3c.t_max = 5            # seções com chave pontuada
    catch.frame_stack = 4

Valores passam por yaml.safe_load (0.001, true, 8 ganham o tipo natural).
Precedência: preset < arquivo < flags da CLI < --set.

O snapshot resolvido (config_resolvida.txt) usa o mesmo formato, com chaves
ordenadas e strings entre aspas; relido, gera exatamente o mesmo texto.
"""

from __future__ import annotations

import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import settings
from dqn import DqnConfig
from envs import list_envs
from envs.catch import CatchParams
from envs.gridworld import GridworldParams
from envs.overest import OverestParams
from erros import ConfigError
from tabular import ALGOS as ALGOS_TABULARES
from tabular import TabularConfig

logger = logging.getLogger(__name__)

Algo = Literal["q-learning", "double-q", "dqn", "dueling-dqn", "a3c", "double-a3c", "ls-double-a3c"]
ALGOS_DQN = ("dqn", "dueling-dqn")

_CHAVE_VALIDA = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)*$")


# ═══════════════════════════════════════════════════════════════
# MODELOS
# ═══════════════════════════════════════════════════════════════

class SecaoA3c(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(0.99, ge=0.0, le=1.0)
    t_max: int = Field(5, ge=1)
    worker_count: int = Field(3, ge=1)
    entropy_beta: float = Field(0.0, ge=0.0)
    force_head: Literal[1, 2] | None = None
    deterministic: bool = False


class SecaoArq(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scale: Literal["paper", "desk"] = "desk"
    conv_channels: int = Field(8, ge=1)
    hidden: int = Field(32, ge=1)


class TrainConfig(BaseModel):
    """
    Configuração completa de um run.

    `total_steps`, quando informado, define `epochs = ceil(total_steps / steps_per_epoch)`
    e é arredondado para épocas inteiras; sem ele, vale epochs × steps_per_epoch.
    """

    model_config = ConfigDict(extra="forbid")

    algo: Algo
    env: str = "catch"
    seed: int = Field(0, ge=0)
    epochs: int = Field(1, ge=0)
    steps_per_epoch: int = Field(6000, ge=1)
    total_steps: int | None = Field(None, ge=0)
    eval_episodes: int = Field(100, ge=1)
    output_dir: str | None = None
    lr: float = Field(0.001, gt=0.0)

    gridworld4x4: GridworldParams = Field(default_factory=GridworldParams)
    overest_mdp: OverestParams = Field(default_factory=OverestParams)
    catch: CatchParams = Field(default_factory=CatchParams)

    tabular: TabularConfig = Field(default_factory=TabularConfig)
    dqn: DqnConfig = Field(default_factory=DqnConfig)
    a3c: SecaoA3c = Field(default_factory=SecaoA3c)
    arch: SecaoArq = Field(default_factory=SecaoArq)

    @model_validator(mode="after")
    def _resolver(self):
        if self.env not in list_envs():
            raise ValueError(f"ambiente '{self.env}' não reconhecido. Disponíveis: {', '.join(list_envs())}")
        if self.algo in ALGOS_TABULARES and self.env == "catch":
            raise ValueError(f"'{self.algo}' exige observação one-hot; 'catch' é em pixels")
        if self.total_steps is not None:
            self.epochs = math.ceil(self.total_steps / self.steps_per_epoch)
        self.total_steps = self.epochs * self.steps_per_epoch
        return self

    @property
    def familia(self) -> str:
        if self.algo in ALGOS_TABULARES:
            return "tabular"
        if self.algo in ALGOS_DQN:
            return "dqn"
        return "a3c"

    @property
    def env_params(self) -> dict[str, Any]:
        return getattr(self, self.env).model_dump()

    def diretorio_saida(self) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return settings.RUNS_DIR / f"{self.algo}-{self.env}-s{self.seed}"


# Sementes das seções vêm sempre do `seed` de topo
_EXCLUIR_DO_SNAPSHOT = {"tabular": {"seed"}, "dqn": {"seed"}}


# ═══════════════════════════════════════════════════════════════
# ARQUIVO chave = valor
# ═══════════════════════════════════════════════════════════════

def ler_pares(texto: str, origem: str = "<texto>") -> dict[str, Any]:
    """Lê linhas `chave = valor` num dicionário plano de chaves pontuadas."""
    pares: dict[str, Any] = {}
    for numero, linha in enumerate(texto.splitlines(), start=1):
        conteudo = linha.strip()
        if not conteudo or conteudo.startswith("#"):
            continue
        if "=" not in conteudo:
            raise ConfigError(f"{origem}:{numero}: esperado 'chave = valor', encontrado {conteudo!r}")
        chave, bruto = (p.strip() for p in conteudo.split("=", 1))
        if not _CHAVE_VALIDA.match(chave):
            raise ConfigError(f"{origem}:{numero}: chave inválida {chave!r}")
        if chave in pares:
            raise ConfigError(f"{origem}:{numero}: chave '{chave}' repetida")
        try:
            pares[chave] = yaml.safe_load(bruto) if bruto else None
        except yaml.YAMLError as e:
            raise ConfigError(f"{origem}:{numero}: valor ilegível para '{chave}': {bruto!r}") from e
    return pares


def ler_arquivo(caminho: Path) -> dict[str, Any]:
    caminho = Path(caminho)
    try:
        texto = caminho.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Não foi possível ler {caminho}: {e}") from e
    return ler_pares(texto, origem=str(caminho))


def par_da_cli(texto: str) -> tuple[str, Any]:
    """`--set chave=valor` → (chave, valor tipado)."""
    pares = ler_pares(texto, origem="--set")
    if len(pares) != 1:
        raise ConfigError(f"--set espera exatamente um 'chave=valor': {texto!r}")
    return next(iter(pares.items()))


def aninhar(pares: Mapping[str, Any]) -> dict[str, Any]:
    arvore: dict[str, Any] = {}
    for chave, valor in pares.items():
        *secoes, folha = chave.split(".")
        no = arvore
        for secao in secoes:
            filho = no.setdefault(secao, {})
            if not isinstance(filho, dict):
                raise ConfigError(f"'{secao}' é valor simples e não pode ter subchaves ('{chave}')")
            no = filho
        if isinstance(no.get(folha), dict):
            raise ConfigError(f"'{chave}' é uma seção e não pode receber valor simples")
        no[folha] = valor
    return arvore


def achatar(arvore: Mapping[str, Any], prefixo: str = "") -> dict[str, Any]:
    pares = {}
    for chave, valor in arvore.items():
        nome = f"{prefixo}{chave}"
        if isinstance(valor, Mapping):
            pares.update(achatar(valor, nome + "."))
        else:
            pares[nome] = valor
    return pares


def mesclar(camadas: Iterable[Mapping[str, Any]]) -> dict[str, Any]:
    """
    Sobrepõe camadas planas em ordem. `epochs` e `total_steps` são a mesma
    grandeza: a camada que define uma descarta a outra das camadas anteriores.
    """
    resultado: dict[str, Any] = {}
    for camada in camadas:
        if "epochs" in camada and "total_steps" not in camada:
            resultado.pop("total_steps", None)
        if "total_steps" in camada and "epochs" not in camada:
            resultado.pop("epochs", None)
        resultado.update(camada)
    return resultado


def validar(pares: Mapping[str, Any]) -> TrainConfig:
    try:
        return TrainConfig.model_validate(aninhar(pares))
    except ValidationError as e:
        erros = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '(raiz)'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Configuração inválida: {erros}") from e


# ═══════════════════════════════════════════════════════════════
# PRESETS (config/experimentos.yaml)
# ═══════════════════════════════════════════════════════════════

def carregar_presets(caminho: Path | None = None) -> dict[str, dict]:
    caminho = Path(caminho or settings.PRESETS_PATH)
    if not caminho.exists():
        logger.warning(f"Catálogo de presets não encontrado: {caminho}")
        return {}
    with open(caminho, encoding="utf-8") as f:
        dados = yaml.safe_load(f) or {}
    return dados.get("experimentos", {})


def list_presets(caminho: Path | None = None) -> dict[str, str]:
    """Retorna {nome: descrição} de todos os presets do catálogo."""
    return {nome: p.get("descricao", "") for nome, p in carregar_presets(caminho).items()}


def config_do_preset(nome: str, caminho: Path | None = None) -> dict[str, Any]:
    presets = carregar_presets(caminho)
    if nome not in presets:
        raise ConfigError(f"Preset '{nome}' não encontrado. Disponíveis: {', '.join(presets) or '(nenhum)'}")
    return achatar(presets[nome].get("config", {}))


def load_config(arquivo: Path | None = None, preset: str | None = None,
                sobrescritas: Mapping[str, Any] | None = None) -> TrainConfig:
    camadas = []
    if preset:
        camadas.append(config_do_preset(preset))
    if arquivo:
        camadas.append(ler_arquivo(arquivo))
    if sobrescritas:
        camadas.append(dict(sobrescritas))
    return validar(mesclar(camadas))


# ═══════════════════════════════════════════════════════════════
# SNAPSHOT RESOLVIDO
# ═══════════════════════════════════════════════════════════════

def _formatar_valor(valor: Any) -> str:
    if valor is None:
        return "null"
    if isinstance(valor, bool):
        return "true" if valor else "false"
    if isinstance(valor, int):
        return str(valor)
    if isinstance(valor, float):
        if math.isnan(valor):
            return ".nan"
        if math.isinf(valor):
            return ".inf" if valor > 0 else "-.inf"
        texto = repr(valor)
        # YAML 1.1 só lê expoente com ponto na mantissa: 1e-05 → 1.0e-05
        if "e" in texto:
            mantissa, expoente = texto.split("e")
            if "." not in mantissa:
                mantissa += ".0"
            if expoente[0] not in "+-":
                expoente = "+" + expoente
            texto = f"{mantissa}e{expoente}"
        return texto
    return json.dumps(str(valor), ensure_ascii=False)


def resolved_snapshot(cfg: TrainConfig) -> str:
    pares = achatar(cfg.model_dump(mode="json", exclude=_EXCLUIR_DO_SNAPSHOT))
    linhas = ["# configuração resolvida (pode ser usada como --config)"]
    linhas += [f"{chave} = {_formatar_valor(pares[chave])}" for chave in sorted(pares)]
    return "\n".join(linhas) + "\n"


def salvar_snapshot(cfg: TrainConfig, caminho: Path) -> Path:
    caminho = Path(caminho)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    caminho.write_text(resolved_snapshot(cfg), encoding="utf-8")
    return caminho
