"""
tabular.py
Q-learning e Double Q-learning em tabela, para ambientes com observação one-hot.

Fluxo:
  1. run_tabular: laço ϵ-guloso sobre um ambiente (Double Q age sobre Q^A + Q^B)
  2. q_learning_update / double_q_update: atualização de uma única célula
  3. bias_experiment: Q-learning vs Double Q no overest_mdp, várias sementes

A taxa α pode ser constante ou polinomial por célula: α(s,a) = 1 / n(s,a)^ω,
com n(s,a) o número de atualizações daquela célula na tabela atualizada.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from erros import ConfigError, UsageError
from envs import EnvSpec, Transition, make_env
from envs.overest import LEFT

logger = logging.getLogger(__name__)

Algo = Literal["q-learning", "double-q"]
ALGOS: tuple[str, ...] = ("q-learning", "double-q")


class TabularConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(0.1, gt=0.0, le=1.0)
    gamma: float = Field(0.9, ge=0.0, le=1.0)
    epsilon: float = Field(0.1, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)
    # ω da taxa polinomial; None mantém α constante
    alpha_exponent: float | None = Field(None, gt=0.0)
    init: Literal["zeros", "uniform"] = "zeros"


@dataclass
class QTable:
    values: np.ndarray
    visitas: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or 0 in self.values.shape:
            raise UsageError(f"Tabela Q precisa ser [estados × ações], recebido {self.values.shape}")
        if self.visitas is None:
            self.visitas = np.zeros(self.values.shape, dtype=np.int64)

    @classmethod
    def zeros(cls, num_states: int, num_actions: int) -> "QTable":
        return cls(np.zeros((num_states, num_actions)))

    @classmethod
    def uniform(cls, num_states: int, num_actions: int, rng: np.random.Generator) -> "QTable":
        return cls(rng.uniform(-0.01, 0.01, size=(num_states, num_actions)))

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    @property
    def num_actions(self) -> int:
        return self.values.shape[1]

    def checar_indices(self, estado: int, acao: int) -> None:
        if not 0 <= estado < self.num_states:
            raise UsageError(f"Estado {estado} fora da faixa [0, {self.num_states})")
        if not 0 <= acao < self.num_actions:
            raise UsageError(f"Ação {acao} fora da faixa [0, {self.num_actions})")


@dataclass
class DoubleQTable:
    qa: QTable
    qb: QTable

    def __post_init__(self):
        if self.qa.values.shape != self.qb.values.shape:
            raise UsageError(f"Q^A {self.qa.values.shape} e Q^B {self.qb.values.shape} com dimensões distintas")

    def soma(self) -> np.ndarray:
        return self.qa.values + self.qb.values


def indice_do_estado(obs: np.ndarray) -> int:
    """Índice do estado a partir da observação one-hot."""
    obs = np.asarray(obs)
    if obs.ndim != 1:
        raise UsageError(f"Métodos tabulares exigem observação one-hot; formato recebido {obs.shape}")
    return int(np.argmax(obs))


def _taxa(tabela: QTable, s: int, a: int, cfg: TabularConfig, alpha: float | None) -> float:
    tabela.visitas[s, a] += 1
    if alpha is not None:
        return alpha
    if cfg.alpha_exponent is not None:
        return 1.0 / tabela.visitas[s, a] ** cfg.alpha_exponent
    return cfg.alpha


# ═══════════════════════════════════════════════════════════════
# ATUALIZAÇÕES
# ═══════════════════════════════════════════════════════════════

def q_learning_update(table: QTable, t: Transition, cfg: TabularConfig, alpha: float | None = None) -> QTable:
    s, a = indice_do_estado(t.state), int(t.action)
    s2 = indice_do_estado(t.next_state)
    table.checar_indices(s, a)
    table.checar_indices(s2, 0)

    alvo = t.reward if t.terminal else t.reward + cfg.gamma * table.values[s2].max()
    taxa = _taxa(table, s, a, cfg, alpha)
    table.values[s, a] += taxa * (alvo - table.values[s, a])
    return table


def double_q_update(table: DoubleQTable, t: Transition, cfg: TabularConfig,
                    coin: Literal["A", "B"], alpha: float | None = None) -> DoubleQTable:
    """
    Atualiza só a tabela sorteada. A outra tabela avalia a ação que a
    sorteada escolhe em s': a* = argmax Q^A(s',·), alvo r + γ·Q^B(s', a*).
    """
    if coin == "A":
        atualizada, avaliadora = table.qa, table.qb
    elif coin == "B":
        atualizada, avaliadora = table.qb, table.qa
    else:
        raise UsageError(f"Moeda inválida: {coin!r} (esperado 'A' ou 'B')")

    s, a = indice_do_estado(t.state), int(t.action)
    s2 = indice_do_estado(t.next_state)
    atualizada.checar_indices(s, a)
    atualizada.checar_indices(s2, 0)

    if t.terminal:
        alvo = t.reward
    else:
        a_estrela = int(np.argmax(atualizada.values[s2]))
        alvo = t.reward + cfg.gamma * avaliadora.values[s2, a_estrela]
    taxa = _taxa(atualizada, s, a, cfg, alpha)
    atualizada.values[s, a] += taxa * (alvo - atualizada.values[s, a])
    return table


def epsilon_greedy_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    q_values = np.asarray(q_values).reshape(-1)
    if q_values.size == 0:
        raise UsageError("Vetor de valores vazio")
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError(f"ϵ fora de [0, 1]: {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(q_values.size))
    return int(np.argmax(q_values))


def greedy_policy(table: QTable | DoubleQTable) -> dict[int, int]:
    valores = table.soma() if isinstance(table, DoubleQTable) else table.values
    return {s: int(np.argmax(valores[s])) for s in range(valores.shape[0])}


# ═══════════════════════════════════════════════════════════════
# LAÇO DE CONTROLE
# ═══════════════════════════════════════════════════════════════

@dataclass
class ResultadoTabular:
    algo: str
    tabela: QTable | DoubleQTable
    passos: int = 0
    recompensas: list[float] = field(default_factory=list)
    acoes_iniciais: list[int] = field(default_factory=list)

    @property
    def episodios(self) -> int:
        return len(self.recompensas)


def _nova_tabela(n_estados: int, n_acoes: int, cfg: TabularConfig, rng) -> QTable:
    if cfg.init == "uniform":
        return QTable.uniform(n_estados, n_acoes, rng)
    return QTable.zeros(n_estados, n_acoes)


class ControleTabular:
    """
    Laço ϵ-guloso incremental. `avancar` roda mais passos (ou episódios)
    preservando episódio corrente, tabelas e gerador; o pipeline chama uma
    vez por época.
    """

    def __init__(self, env, algo: Algo, cfg: TabularConfig):
        if algo not in ALGOS:
            raise ConfigError(f"Algoritmo tabular '{algo}' não reconhecido. Disponíveis: {', '.join(ALGOS)}")
        if len(env.observation_shape) != 1:
            raise ConfigError(f"Ambiente '{env.env_id}' não tem observação one-hot")
        self.env = env
        self.algo = algo
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        n_estados, n_acoes = env.observation_shape[0], env.n_actions
        if algo == "q-learning":
            tabela = _nova_tabela(n_estados, n_acoes, cfg, self.rng)
        else:
            tabela = DoubleQTable(_nova_tabela(n_estados, n_acoes, cfg, self.rng),
                                  _nova_tabela(n_estados, n_acoes, cfg, self.rng))
        self.resultado = ResultadoTabular(algo, tabela)
        self._obs = env.reset(seed=cfg.seed)
        self._inicio_episodio = True
        self._retorno = 0.0

    def passo(self) -> None:
        tabela, resultado = self.resultado.tabela, self.resultado
        s = indice_do_estado(self._obs)
        valores = tabela.values[s] if self.algo == "q-learning" else tabela.soma()[s]
        acao = epsilon_greedy_action(valores, self.cfg.epsilon, self.rng)
        if self._inicio_episodio:
            resultado.acoes_iniciais.append(acao)
            self._inicio_episodio = False

        passo = self.env.step(acao)
        t = Transition(self._obs, acao, passo.reward, passo.observation, passo.terminal)
        if self.algo == "q-learning":
            q_learning_update(tabela, t, self.cfg)
        else:
            double_q_update(tabela, t, self.cfg, "A" if self.rng.random() < 0.5 else "B")

        resultado.passos += 1
        self._retorno += passo.reward
        if passo.terminal:
            resultado.recompensas.append(self._retorno)
            self._obs, self._retorno, self._inicio_episodio = self.env.reset(), 0.0, True
        else:
            self._obs = passo.observation

    def avancar(self, steps: int | None = None, episodes: int | None = None) -> ResultadoTabular:
        if (steps is None) == (episodes is None):
            raise UsageError("Informe exatamente um entre steps e episodes")
        r = self.resultado
        alvo_passos = None if steps is None else r.passos + steps
        alvo_episodios = None if episodes is None else r.episodios + episodes
        while True:
            if alvo_passos is not None and r.passos >= alvo_passos:
                break
            if alvo_episodios is not None and r.episodios >= alvo_episodios:
                break
            self.passo()
        return r


def run_tabular(env, algo: Algo, cfg: TabularConfig, steps: int | None = None,
                episodes: int | None = None) -> ResultadoTabular:
    """
    Treina por `steps` passos de ambiente ou por `episodes` episódios completos.

    O ambiente é reiniciado com a semente de `cfg` no primeiro episódio.
    """
    if (steps is None) == (episodes is None):
        raise UsageError("Informe exatamente um entre steps e episodes")
    resultado = ControleTabular(env, algo, cfg).avancar(steps, episodes)
    logger.debug(f"[tabular] {algo}: {resultado.passos} passos, {resultado.episodios} episódios")
    return resultado


# ═══════════════════════════════════════════════════════════════
# EXPERIMENTO DE VIÉS (overest_mdp)
# ═══════════════════════════════════════════════════════════════

COLUNAS_VIES = ("seed", "algo", "episodes", "estimate_QBleft", "frac_left_chosen")

_ESTADO_A, _ESTADO_B = 0, 1


@dataclass
class LinhaVies:
    seed: int
    algo: str
    episodes: int
    estimate_QBleft: float
    frac_left_chosen: float
    # ação gulosa final em A; fica fora do CSV
    greedy_left: bool = False

    def para_csv(self) -> dict:
        linha = asdict(self)
        linha.pop("greedy_left")
        return linha


def _estimativa_em_b(tabela: QTable | DoubleQTable) -> float:
    if isinstance(tabela, QTable):
        return float(tabela.values[_ESTADO_B].max())
    # cada tabela escolhe, a outra avalia; média das duas avaliações cruzadas
    qa, qb = tabela.qa.values[_ESTADO_B], tabela.qb.values[_ESTADO_B]
    return 0.5 * float(qb[np.argmax(qa)] + qa[np.argmax(qb)])


def bias_experiment(seeds: int = 100, episodes: int = 10_000, k: int = 8, gamma: float = 0.95,
                    epsilon: float = 0.1, exponent: float | None = 0.8, alpha: float = 0.1) -> list[LinhaVies]:
    linhas = []
    for seed in range(seeds):
        for algo in ALGOS:
            env = make_env(EnvSpec(env_id="overest_mdp", seed=seed, params={"k": k}))
            cfg = TabularConfig(alpha=alpha, gamma=gamma, epsilon=epsilon, seed=seed,
                                alpha_exponent=exponent)
            r = run_tabular(env, algo, cfg, episodes=episodes)
            esquerda = sum(1 for a in r.acoes_iniciais if a == LEFT)
            linhas.append(LinhaVies(
                seed=seed,
                algo=algo,
                episodes=episodes,
                estimate_QBleft=_estimativa_em_b(r.tabela),
                frac_left_chosen=esquerda / max(len(r.acoes_iniciais), 1),
                greedy_left=greedy_policy(r.tabela)[_ESTADO_A] == LEFT,
            ))
        if (seed + 1) % 10 == 0:
            logger.info(f"[vies] {seed + 1}/{seeds} sementes")
    return linhas


def resumo_vies(linhas: list[LinhaVies]) -> dict[str, dict[str, float]]:
    resumo = {}
    for algo in ALGOS:
        do_algo = [l for l in linhas if l.algo == algo]
        if not do_algo:
            continue
        resumo[algo] = {
            "estimativa_media": float(np.mean([l.estimate_QBleft for l in do_algo])),
            "frac_left_media": float(np.mean([l.frac_left_chosen for l in do_algo])),
            "frac_sementes_gulosa_left": float(np.mean([l.greedy_left for l in do_algo])),
        }
    return resumo


def write_bias_csv(linhas: list[LinhaVies], caminho: Path) -> Path:
    caminho = Path(caminho)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    with open(caminho, "w", newline="", encoding="utf-8") as f:
        escritor = csv.DictWriter(f, fieldnames=COLUNAS_VIES)
        escritor.writeheader()
        for linha in linhas:
            d = linha.para_csv()
            d["estimate_QBleft"] = f"{d['estimate_QBleft']:.6g}"
            d["frac_left_chosen"] = f"{d['frac_left_chosen']:.6g}"
            escritor.writerow(d)
    return caminho
