"""
networks.py
Topologias de rede sobre as camadas de layers.py.

Variantes:
  - dqn            tronco → FC n (valores Q)
  - dueling_dqn    tronco → V escalar + vantagens A; Q = V + A
  - vanilla_a3c    tronco → π (softmax) e V
  - double_a3c     tronco → π, V1 e V2 (três cabeças sobre o mesmo tronco)
  - ls_double_a3c  tronco compartilhado só até a terceira convolução; dois ramos
                   (conv4 + FC oculta), V1 no ramo 1, V2 no ramo 2 e π sobre a
                   concatenação dos dois vetores ocultos

Uma rede é uma lista ordenada de estágios. Cada estágio lê uma ou mais
ativações nomeadas (entradas múltiplas são concatenadas achatadas), aplica
uma sequência de camadas e grava uma ativação nova. A primeira ativação é
sempre "obs".

Nomes de parâmetros carregam o grupo de compartilhamento:
  trunk.*, branch1.*, branch2.*, head.pi, head.v, head.v1, head.v2,
  head.q, head.vs, head.adv
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

import settings
from erros import ConfigError, ShapeError, UsageError
from layers import (
    RELU, SOFTMAX, LayerCache, LayerSpec, conv2d, fully_connected, init_params,
    layer_backward, layer_forward, maxpool2d, output_shape, param_shapes,
)
from params import ParamStore

logger = logging.getLogger(__name__)


class ArchVariant(str, Enum):
    DQN = "dqn"
    VANILLA_A3C = "vanilla_a3c"
    DOUBLE_A3C = "double_a3c"
    LS_DOUBLE_A3C = "ls_double_a3c"
    DUELING_DQN = "dueling_dqn"

    @property
    def politica(self) -> bool:
        return self in (ArchVariant.VANILLA_A3C, ArchVariant.DOUBLE_A3C, ArchVariant.LS_DOUBLE_A3C)

    @property
    def duas_cabecas(self) -> bool:
        return self in (ArchVariant.DOUBLE_A3C, ArchVariant.LS_DOUBLE_A3C)


# Strings aceitas na CLI / arquivos de configuração
_VARIANTE_DO_ALGO = {
    "dqn":           ArchVariant.DQN,
    "dueling-dqn":   ArchVariant.DUELING_DQN,
    "a3c":           ArchVariant.VANILLA_A3C,
    "double-a3c":    ArchVariant.DOUBLE_A3C,
    "ls-double-a3c": ArchVariant.LS_DOUBLE_A3C,
}


def variante_do_algo(algo: str) -> ArchVariant:
    try:
        return _VARIANTE_DO_ALGO[algo]
    except KeyError:
        disponiveis = ", ".join(_VARIANTE_DO_ALGO)
        raise ConfigError(f"Algoritmo de rede '{algo}' não reconhecido. Disponíveis: {disponiveis}") from None


ENTRADA_ESCALA_COMPLETA = (12, 84, 84)


class ArchConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    input_shape: tuple[int, ...]
    n_actions: int = Field(ge=2)
    scale: Literal["paper", "desk"] = "desk"
    conv_channels: int = Field(8, ge=1)
    hidden: int = Field(32, ge=1)

    @field_validator("input_shape")
    @classmethod
    def _formato_positivo(cls, v):
        if not v or any(d <= 0 for d in v):
            raise ValueError(f"formato de entrada inválido: {v}")
        return tuple(v)


@dataclass(frozen=True)
class Stage:
    saida: str
    entradas: tuple[str, ...]
    camadas: tuple[tuple[str | None, LayerSpec], ...]


@dataclass(frozen=True)
class NetOutput:
    policy: np.ndarray | None = None
    values: tuple[float, ...] | None = None
    q_values: np.ndarray | None = None
    logits: np.ndarray | None = None

    def value(self, cabeca: int = 1) -> float:
        if self.values is None:
            raise UsageError("Saída sem cabeça de valor")
        if cabeca not in (1, 2) or cabeca > len(self.values):
            raise UsageError(f"Cabeça de valor {cabeca} inexistente (há {len(self.values)})")
        return self.values[cabeca - 1]


@dataclass
class ForwardCache:
    ativacoes: dict[str, np.ndarray]
    camadas: dict[str, list[LayerCache]]


@dataclass
class Network:
    variant: ArchVariant
    cfg: ArchConfig
    stages: tuple[Stage, ...]
    formatos: dict[str, tuple[int, ...]] = field(default_factory=dict)
    param_shapes: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def value_names(self) -> tuple[str, ...]:
        if self.variant.duas_cabecas:
            return ("v1", "v2")
        if self.variant is ArchVariant.VANILLA_A3C:
            return ("v",)
        return ()

    def value_activation(self, cabeca: int = 1) -> str:
        nomes = self.value_names()
        if not nomes or cabeca > len(nomes):
            raise UsageError(f"Variante {self.variant.value} não tem cabeça de valor {cabeca}")
        return nomes[cabeca - 1]

    def parameter_count(self, prefixo: str = "") -> int:
        return sum(math.prod(s) for k, s in self.param_shapes.items() if k.startswith(prefixo))

    def __repr__(self) -> str:
        return f"<Network {self.variant.value} entrada={self.cfg.input_shape} params={self.parameter_count()}>"


# ═══════════════════════════════════════════════════════════════
# MONTAGEM DOS ESTÁGIOS
# ═══════════════════════════════════════════════════════════════

def _tronco_completo(planos: int, ate_conv3: bool) -> list[tuple[str | None, LayerSpec]]:
    camadas = [
        ("trunk.conv1", conv2d(planos, 32, 5)), (None, RELU), (None, maxpool2d(2)),
        ("trunk.conv2", conv2d(32, 32, 5)), (None, RELU), (None, maxpool2d(2)),
        ("trunk.conv3", conv2d(32, 64, 4)), (None, RELU), (None, maxpool2d(2)),
    ]
    if not ate_conv3:
        camadas += [("trunk.conv4", conv2d(64, 64, 3)), (None, RELU)]
    return camadas


def _ramo_completo(prefixo: str) -> list[tuple[str | None, LayerSpec]]:
    return [(f"{prefixo}.conv4", conv2d(64, 64, 3)), (None, RELU)]


def _tronco_mesa(cfg: ArchConfig) -> list[tuple[str | None, LayerSpec]]:
    if len(cfg.input_shape) == 1:
        return []
    planos = cfg.input_shape[0]
    camadas = [("trunk.conv1", conv2d(planos, cfg.conv_channels, 3)), (None, RELU)]
    # com frame stack a rede também exercita pooling
    if planos >= 4:
        camadas.append((None, maxpool2d(2)))
    return camadas


def _ramo_mesa(cfg: ArchConfig, prefixo: str) -> list[tuple[str | None, LayerSpec]]:
    if len(cfg.input_shape) == 1:
        return []
    return [(f"{prefixo}.conv", conv2d(cfg.conv_channels, cfg.conv_channels, 1)), (None, RELU)]


def _fc_oculta(prefixo: str, formato: tuple[int, ...], oculta: int) -> list[tuple[str | None, LayerSpec]]:
    return [(f"{prefixo}.fc", fully_connected(math.prod(formato), oculta)), (None, RELU)]


def _propagar_formato(camadas, formato: tuple[int, ...]) -> tuple[int, ...]:
    for _, spec in camadas:
        formato = output_shape(spec, formato)
    return formato


def _estagios(variant: ArchVariant, cfg: ArchConfig) -> tuple[list[Stage], dict[str, tuple[int, ...]]]:
    """Monta os estágios e devolve também o formato de cada ativação."""
    formatos: dict[str, tuple[int, ...]] = {"obs": tuple(cfg.input_shape)}
    estagios: list[Stage] = []
    completa = cfg.scale == "paper"
    oculta = 512 if completa else cfg.hidden

    def adicionar(saida: str, entradas: tuple[str, ...], camadas) -> None:
        if len(entradas) == 1:
            formato = formatos[entradas[0]]
        else:
            formato = (sum(math.prod(formatos[e]) for e in entradas),)
        formatos[saida] = _propagar_formato(camadas, formato)
        estagios.append(Stage(saida, entradas, tuple(camadas)))

    def completar_com_fc(camadas, formato_entrada, prefixo):
        formato = _propagar_formato(camadas, formato_entrada)
        return camadas + _fc_oculta(prefixo, formato, oculta)

    entrada = formatos["obs"]

    if variant is ArchVariant.LS_DOUBLE_A3C:
        tronco = _tronco_completo(entrada[0], ate_conv3=True) if completa else _tronco_mesa(cfg)
        # entrada vetorial: o tronco compartilhado é a própria FC oculta
        adicionar("tronco", ("obs",), tronco or _fc_oculta("trunk", entrada, oculta))
        for k in (1, 2):
            ramo = _ramo_completo(f"branch{k}") if completa else _ramo_mesa(cfg, f"branch{k}")
            adicionar(f"h{k}", ("tronco",), completar_com_fc(ramo, formatos["tronco"], f"branch{k}"))
        adicionar("logits", ("h1", "h2"), [("head.pi", fully_connected(2 * oculta, cfg.n_actions))])
        adicionar("pi", ("logits",), [(None, SOFTMAX)])
        adicionar("v1", ("h1",), [("head.v1", fully_connected(oculta, 1))])
        adicionar("v2", ("h2",), [("head.v2", fully_connected(oculta, 1))])
        return estagios, formatos

    tronco = _tronco_completo(entrada[0], ate_conv3=False) if completa else _tronco_mesa(cfg)
    adicionar("h", ("obs",), completar_com_fc(tronco, entrada, "trunk"))

    if variant is ArchVariant.DQN:
        adicionar("q", ("h",), [("head.q", fully_connected(oculta, cfg.n_actions))])
    elif variant is ArchVariant.DUELING_DQN:
        adicionar("vs", ("h",), [("head.vs", fully_connected(oculta, 1))])
        adicionar("adv", ("h",), [("head.adv", fully_connected(oculta, cfg.n_actions))])
        formatos["q"] = (cfg.n_actions,)
    else:
        adicionar("logits", ("h",), [("head.pi", fully_connected(oculta, cfg.n_actions))])
        adicionar("pi", ("logits",), [(None, SOFTMAX)])
        for nome in ("v1", "v2") if variant.duas_cabecas else ("v",):
            adicionar(nome, ("h",), [(f"head.{nome}", fully_connected(oculta, 1))])
    return estagios, formatos


def build_network(variant: ArchVariant, cfg: ArchConfig, store: ParamStore,
                  rng: np.random.Generator, dtype=None) -> Network:
    """
    Constrói a topologia e registra seus parâmetros no armazém.

    Parâmetros já presentes no armazém (mesmo nome e formato) são mantidos;
    os ausentes são inicializados na ordem dos estágios: tronco, π, V.
    """
    variant = ArchVariant(variant)
    if cfg.scale == "paper" and tuple(cfg.input_shape) != ENTRADA_ESCALA_COMPLETA:
        raise ShapeError("escala completa", ENTRADA_ESCALA_COMPLETA, cfg.input_shape)
    if len(cfg.input_shape) not in (1, 3):
        raise ShapeError("entrada da rede", ("C", "H", "W"), cfg.input_shape)

    estagios, formatos = _estagios(variant, cfg)
    dtype = np.dtype(dtype or settings.DTYPE_TREINO)

    formas_params: dict[str, tuple[int, ...]] = {}
    registrados = store.shapes()
    for estagio in estagios:
        for prefixo, spec in estagio.camadas:
            if prefixo is None:
                continue
            formas = param_shapes(spec)
            for nome, forma in formas.items():
                formas_params[f"{prefixo}.{nome}"] = forma
            if all(f"{prefixo}.{n}" in registrados for n in formas):
                for n, forma in formas.items():
                    if registrados[f"{prefixo}.{n}"] != forma:
                        raise ShapeError(f"{prefixo}.{n}", forma, registrados[f"{prefixo}.{n}"])
                continue
            for nome, tensor in init_params(spec, rng, dtype).items():
                store.register(f"{prefixo}.{nome}", tensor)

    net = Network(variant, cfg, tuple(estagios), formatos, formas_params)
    logger.debug(f"[rede] {net!r}")
    return net


# ═══════════════════════════════════════════════════════════════
# FORWARD / BACKWARD
# ═══════════════════════════════════════════════════════════════

def _params_da_camada(params: Mapping[str, np.ndarray], prefixo: str | None) -> dict[str, np.ndarray]:
    if prefixo is None:
        return {}
    try:
        return {"w": params[f"{prefixo}.w"], "b": params[f"{prefixo}.b"]}
    except KeyError as e:
        raise UsageError(f"Parâmetro ausente no snapshot: {e.args[0]}") from None


def _entrada_do_estagio(estagio: Stage, ativacoes: dict[str, np.ndarray]) -> np.ndarray:
    if len(estagio.entradas) == 1:
        return ativacoes[estagio.entradas[0]]
    return np.concatenate([ativacoes[e].reshape(-1) for e in estagio.entradas])


def forward_cached(net: Network, params: Mapping[str, np.ndarray], obs: np.ndarray) -> tuple[NetOutput, ForwardCache]:
    obs = np.asarray(obs)
    if obs.shape != tuple(net.cfg.input_shape):
        raise ShapeError("observação", net.cfg.input_shape, obs.shape)
    dtype = next(iter(params.values())).dtype if params else np.float64
    ativacoes = {"obs": obs.astype(dtype, copy=False)}
    caches: dict[str, list[LayerCache]] = {}

    for estagio in net.stages:
        x = _entrada_do_estagio(estagio, ativacoes)
        lista = []
        for prefixo, spec in estagio.camadas:
            x, cache = layer_forward(spec, _params_da_camada(params, prefixo), x)
            lista.append(cache)
        ativacoes[estagio.saida] = x
        caches[estagio.saida] = lista

    if net.variant is ArchVariant.DUELING_DQN:
        ativacoes["q"] = dueling_combine(ativacoes["vs"][0], ativacoes["adv"])

    return _montar_saida(net, ativacoes), ForwardCache(ativacoes, caches)


def forward(net: Network, params: Mapping[str, np.ndarray], obs: np.ndarray) -> NetOutput:
    saida, _ = forward_cached(net, params, obs)
    return saida


def _montar_saida(net: Network, a: dict[str, np.ndarray]) -> NetOutput:
    if not net.variant.politica:
        return NetOutput(q_values=a["q"])
    valores = tuple(float(a[n][0]) for n in net.value_names())
    return NetOutput(policy=a["pi"], values=valores, logits=a["logits"])


def backward(net: Network, cache: ForwardCache, out_grads: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """
    Gradientes dos parâmetros dado o gradiente de cada saída nomeada.

    `out_grads` aceita qualquer ativação ("logits", "pi", "v", "v1", "v2", "q").
    Estágios cuja saída não recebe gradiente são pulados, então parâmetros
    exclusivos desses estágios não aparecem no resultado.
    """
    grads_ativ: dict[str, np.ndarray] = {}

    def acumular(nome: str, g: np.ndarray) -> None:
        if nome in grads_ativ:
            grads_ativ[nome] = grads_ativ[nome] + g
        else:
            grads_ativ[nome] = g

    for nome, g in out_grads.items():
        if nome not in cache.ativacoes or nome == "obs":
            raise UsageError(f"Saída '{nome}' inexistente na rede {net.variant.value}")
        g = np.asarray(g, dtype=cache.ativacoes[nome].dtype)
        if g.shape != cache.ativacoes[nome].shape:
            raise ShapeError(f"gradiente de '{nome}'", cache.ativacoes[nome].shape, g.shape)
        if nome == "q" and net.variant is ArchVariant.DUELING_DQN:
            acumular("vs", np.array([g.sum()], dtype=g.dtype))
            acumular("adv", g)
        else:
            acumular(nome, g)

    param_grads: dict[str, np.ndarray] = {}
    for estagio in reversed(net.stages):
        g = grads_ativ.pop(estagio.saida, None)
        if g is None:
            continue
        for (prefixo, spec), c in zip(reversed(estagio.camadas), reversed(cache.camadas[estagio.saida])):
            g, pg = layer_backward(spec, c, g)
            if prefixo is not None:
                for k, v in pg.items():
                    param_grads[f"{prefixo}.{k}"] = v

        if len(estagio.entradas) == 1:
            partes = [(estagio.entradas[0], g)]
        else:
            tamanhos = [cache.ativacoes[e].size for e in estagio.entradas]
            cortes = np.cumsum(tamanhos)[:-1]
            partes = [
                (e, p.reshape(cache.ativacoes[e].shape))
                for e, p in zip(estagio.entradas, np.split(g, cortes))
            ]
        for entrada, parte in partes:
            if entrada != "obs":
                acumular(entrada, parte)

    return param_grads


# ═══════════════════════════════════════════════════════════════
# CABEÇAS E AÇÕES
# ═══════════════════════════════════════════════════════════════

def dueling_combine(v: float, advantages: np.ndarray) -> np.ndarray:
    """Q(s,a) = V(s) + A(s,a), sem subtração de média ou máximo."""
    advantages = np.asarray(advantages)
    if not np.issubdtype(advantages.dtype, np.floating):
        advantages = advantages.astype(np.float64)
    return advantages + advantages.dtype.type(v)


def exclusive_head_params(net: Network, cabeca: int) -> list[str]:
    """Parâmetros que só influenciam a cabeça de valor indicada."""
    if not net.variant.duas_cabecas:
        raise UsageError(f"Variante {net.variant.value} não tem duas cabeças de valor")
    prefixo = f"head.v{cabeca}."
    return [k for k in net.param_shapes if k.startswith(prefixo)]


def action_sample(policy: np.ndarray, rng: np.random.Generator) -> int:
    """Amostra por CDF inversa; ações de probabilidade zero nunca saem."""
    p = np.asarray(policy, dtype=np.float64).reshape(-1)
    if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise UsageError(f"Vetor de política inválido: {p}")
    total = p.sum()
    if abs(total - 1.0) > 1e-4:
        raise UsageError(f"Política não soma 1 (soma={total:.6f})")
    acumulada = np.cumsum(p)
    indice = int(np.searchsorted(acumulada, rng.random() * total, side="right"))
    return min(indice, p.size - 1)


def greedy_action(valores: np.ndarray) -> int:
    """argmax com desempate pelo menor índice."""
    valores = np.asarray(valores).reshape(-1)
    if valores.size == 0:
        raise UsageError("Vetor de valores vazio")
    return int(np.argmax(valores))


def acao_gulosa(net: Network, params: Mapping[str, np.ndarray], obs: np.ndarray) -> int:
    saida = forward(net, params, obs)
    return greedy_action(saida.policy if net.variant.politica else saida.q_values)
