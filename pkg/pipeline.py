"""
pipeline.py
Orquestra um run completo: configuração → ambiente/rede → treino por época → checkpoint → relatório.

Artefatos em <output_dir>/:
  config_resolvida.txt   configuração efetiva (reutilizável como --config)
  metrics.csv            uma linha por época, escrita incrementalmente
  checkpoint.a3cf        parâmetros, Adam e metadados do fim do run
  relatorio.json         checagens pós-run (validator.py)

Uso:
    python pipeline.py train --algo double-a3c --env catch --workers 3 --epochs 50 --seed 1 --out runs/d1
    python pipeline.py train --preset catch-dqn
    python pipeline.py train --listar
    python pipeline.py train --config runs/d1/config_resolvida.txt --retomar runs/d1/checkpoint.a3cf
    python pipeline.py eval runs/d1/checkpoint.a3cf --episodes 100
    python pipeline.py plot runs/a/metrics.csv runs/b/metrics.csv --x epoch --out cmp.svg
    python pipeline.py compare catch-a3c catch-double-a3c catch-ls-double-a3c catch-dqn --out runs/cmp
    python pipeline.py bias-experiment --seeds 100 --episodes 10000 --out vies.csv
    python pipeline.py gradcheck
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from pydantic import ValidationError

import settings
from a3c import A3cConfig, run_training
from checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from config import TrainConfig, list_presets, load_config, par_da_cli, salvar_snapshot
from dqn import DqnRunner
from envs import EnvSpec, make_env
from erros import (
    ConfigError, CorruptCheckpointError, EnvMismatchError, PlotError, ShapeError, TrainingAbort, UsageError,
)
from gradcheck import run_suite
from metrics import MetricsWriter, ResumoEpoca, ler_metricas, registro_da_epoca
from networks import ArchConfig, ArchVariant, Network, acao_gulosa, build_network, greedy_action, variante_do_algo
from params import AdamState, ParamStore
from plots import emit_plot
from tabular import ALGOS as ALGOS_TABULARES
from tabular import ControleTabular, DoubleQTable, bias_experiment, indice_do_estado, resumo_vies, write_bias_csv
from validator import imprimir_relatorio, needs_review, salvar_relatorio, validate_run

logger = logging.getLogger(__name__)

ARQ_METRICAS = "metrics.csv"
ARQ_CHECKPOINT = "checkpoint.a3cf"
ARQ_CONFIG = "config_resolvida.txt"
ARQ_RELATORIO = "relatorio.json"

# Época com (número, T ao fim, eventos drenados)
Epocas = Iterator[tuple[int, int, ResumoEpoca]]


# ═══════════════════════════════════════════════════════════════
# MONTAGEM
# ═══════════════════════════════════════════════════════════════

def _envspec(cfg: TrainConfig, seed: int | None = None) -> EnvSpec:
    return EnvSpec(env_id=cfg.env, seed=cfg.seed if seed is None else seed, params=cfg.env_params)


def _montar_rede(cfg: TrainConfig, env, store: ParamStore) -> Network:
    try:
        arq = ArchConfig(
            input_shape=env.observation_shape,
            n_actions=env.n_actions,
            scale=cfg.arch.scale,
            conv_channels=cfg.arch.conv_channels,
            hidden=cfg.arch.hidden,
        )
        return build_network(variante_do_algo(cfg.algo), arq, store, np.random.default_rng(cfg.seed))
    except (ValidationError, ShapeError) as e:
        raise ConfigError(f"Arquitetura incompatível com '{cfg.env}': {e}") from e


def _meta_base(cfg: TrainConfig) -> dict:
    return {
        "algo": cfg.algo,
        "env": cfg.env,
        "env_params": json.dumps(cfg.env_params, sort_keys=True),
        "seed": cfg.seed,
        "steps_per_epoch": cfg.steps_per_epoch,
    }


def _meta_da_rede(net: Network) -> dict:
    return {
        "variant": net.variant.value,
        "arch": json.dumps(net.cfg.model_dump(mode="json"), sort_keys=True),
    }


# ═══════════════════════════════════════════════════════════════
# LAÇOS POR FAMÍLIA
# ═══════════════════════════════════════════════════════════════

def _epocas_a3c(cfg: TrainConfig, net: Network, store: ParamStore, opt: AdamState,
                epoca_inicial: int, T_inicial: int) -> Epocas:
    a3c_cfg = A3cConfig(
        gamma=cfg.a3c.gamma,
        t_max=cfg.a3c.t_max,
        worker_count=cfg.a3c.worker_count,
        total_steps=cfg.total_steps,
        steps_per_epoch=cfg.steps_per_epoch,
        variant=net.variant,
        seed=cfg.seed,
        entropy_beta=cfg.a3c.entropy_beta,
        force_head=cfg.a3c.force_head,
        deterministic=cfg.a3c.deterministic,
    )
    yield from run_training(a3c_cfg, store, net, _envspec(cfg), opt, epoca_inicial, T_inicial)


def _runner_dqn(cfg: TrainConfig, net: Network, store: ParamStore, opt: AdamState, T_inicial: int) -> DqnRunner:
    dqn_cfg = cfg.dqn.model_copy(update={"seed": cfg.seed})
    return DqnRunner(dqn_cfg, net, store, opt, make_env(_envspec(cfg)), passos_iniciais=T_inicial)


def _epocas_dqn(cfg: TrainConfig, runner: DqnRunner, epoca_inicial: int) -> Epocas:
    for epoca in range(epoca_inicial + 1, cfg.epochs + 1):
        resumo = runner.rodar_epoca(epoca, cfg.steps_per_epoch)
        yield epoca, runner.passos, resumo


def _epocas_tabular(cfg: TrainConfig, controle: ControleTabular) -> Epocas:
    for epoca in range(1, cfg.epochs + 1):
        antes = controle.resultado.episodios
        r = controle.avancar(steps=cfg.steps_per_epoch)
        yield epoca, r.passos, ResumoEpoca(recompensas=r.recompensas[antes:])


def _tensores_tabulares(controle: ControleTabular) -> dict[str, np.ndarray]:
    tabela = controle.resultado.tabela
    if isinstance(tabela, DoubleQTable):
        return {"tabela.qa": tabela.qa.values, "tabela.qb": tabela.qb.values}
    return {"tabela.q": tabela.values}


# ═══════════════════════════════════════════════════════════════
# TREINO
# ═══════════════════════════════════════════════════════════════

def run_train(cfg: TrainConfig, retomar: Path | None = None) -> dict:
    """
    Executa um run e grava os artefatos em cfg.diretorio_saida().

    Args:
        cfg:      Configuração validada.
        retomar:  Checkpoint de um run anterior (mesmo algo e ambiente) para continuar.

    Returns:
        Dict com 'saida', 'metricas', 'checkpoint', 'relatorio' e 'epocas'.
    """
    saida = cfg.diretorio_saida()
    saida.mkdir(parents=True, exist_ok=True)
    caminho_metricas = saida / ARQ_METRICAS
    caminho_ckpt = saida / ARQ_CHECKPOINT

    logger.info(f"{'═'*55}")
    logger.info(f"  Treino: {cfg.algo} em {cfg.env} (seed {cfg.seed})")
    logger.info(f"{'═'*55}")

    # ── ETAPA 1: Configuração ────────────────────────────────────
    logger.info(f"[1/4] Gravando configuração resolvida...")
    salvar_snapshot(cfg, saida / ARQ_CONFIG)
    logger.info(f"      {cfg.epochs} época(s) × {cfg.steps_per_epoch} passos → {saida}")

    # ── ETAPA 2: Ambiente e modelo ───────────────────────────────
    logger.info(f"[2/4] Montando ambiente e modelo...")
    env = make_env(_envspec(cfg))
    epoca_inicial, T_inicial, wall_inicial = 0, 0, 0.0
    store, opt, net, controle = ParamStore(), AdamState(lr=cfg.lr), None, None
    runner: DqnRunner | None = None

    if cfg.familia == "tabular":
        if retomar:
            raise ConfigError("Retomada não suportada para algoritmos tabulares")
        controle = ControleTabular(env, cfg.algo, cfg.tabular.model_copy(update={"seed": cfg.seed}))
        epocas = _epocas_tabular(cfg, controle)
        logger.info(f"      Tabela {env.observation_shape[0]}×{env.n_actions}")
    else:
        net = _montar_rede(cfg, env, store)
        ckpt = None
        if retomar:
            epoca_inicial, T_inicial, wall_inicial, opt, ckpt = _restaurar(cfg, Path(retomar), store)
        if cfg.familia == "a3c":
            epocas = _epocas_a3c(cfg, net, store, opt, epoca_inicial, T_inicial)
        else:
            runner = _runner_dqn(cfg, net, store, opt, T_inicial)
            if ckpt is not None:
                if "dqn.rng" not in ckpt.meta:
                    raise ConfigError("Checkpoint DQN sem replay nem gerador salvos; não é possível retomar")
                runner.importar_estado(ckpt.meta, ckpt.estado)
            epocas = _epocas_dqn(cfg, runner, epoca_inicial)
        if cfg.epochs <= epoca_inicial:
            epocas = iter(())
        logger.info(f"      {net!r}")

    # ── ETAPA 3: Treino ──────────────────────────────────────────
    logger.info(f"[3/4] Treinando...")
    relogio = time.monotonic()
    epoca, T, wall = epoca_inicial, T_inicial, wall_inicial
    with MetricsWriter(caminho_metricas, anexar=retomar is not None) as escritor:
        for epoca, T, resumo in epocas:
            wall = wall_inicial + (time.monotonic() - relogio)
            registro = registro_da_epoca(epoca, T, wall, resumo)
            escritor.put(registro)
            _log_epoca(cfg, registro)

    # ── ETAPA 4: Checkpoint + relatório ──────────────────────────
    logger.info(f"[4/4] Gravando checkpoint e relatório...")
    meta = {**_meta_base(cfg), "epoch": epoca, "global_step": T, "wall_time_s": repr(wall)}
    if controle is not None:
        save_checkpoint(_tensores_tabulares(controle), None, meta, caminho_ckpt)
    else:
        meta.update(_meta_da_rede(net), version=store.version)
        estado = None
        if runner is not None:
            meta_runner, estado = runner.exportar_estado()
            meta.update(meta_runner)
        save_checkpoint(store, opt, meta, caminho_ckpt, estado=estado)

    relatorio = validate_run(ler_metricas(caminho_metricas), cfg)
    salvar_relatorio(relatorio, saida / ARQ_RELATORIO)
    imprimir_relatorio(relatorio)
    if needs_review(relatorio):
        logger.warning(f"      Run marcado para revisão: veja {saida / ARQ_RELATORIO}")

    return {
        "saida": saida,
        "metricas": caminho_metricas,
        "checkpoint": caminho_ckpt,
        "relatorio": relatorio,
        "epocas": epoca,
    }


def _restaurar(cfg: TrainConfig, caminho: Path, store: ParamStore) -> tuple[int, int, float, AdamState, Checkpoint]:
    ckpt = load_checkpoint(caminho)
    for chave, esperado in (("algo", cfg.algo), ("env", cfg.env)):
        if ckpt.meta.get(chave) != esperado:
            raise ConfigError(f"Checkpoint de {chave}='{ckpt.meta.get(chave)}'; configuração pede '{esperado}'")
    if int(ckpt.meta.get("steps_per_epoch", cfg.steps_per_epoch)) != cfg.steps_per_epoch:
        raise ConfigError("steps_per_epoch diferente do checkpoint")
    try:
        store.load(ckpt.tensores, version=int(ckpt.meta.get("version", 0)))
    except (UsageError, ShapeError) as e:
        raise EnvMismatchError(f"Checkpoint não corresponde à rede configurada: {e}") from e
    epoca, T = int(ckpt.meta["epoch"]), int(ckpt.meta["global_step"])
    logger.info(f"      Retomando da época {epoca} (T={T}) de {caminho}")
    return epoca, T, float(ckpt.meta.get("wall_time_s", 0.0)), ckpt.adam_state(), ckpt


def _fmt(valor: float | None) -> str:
    return "—" if valor is None else f"{valor:.4g}"


def _log_epoca(cfg: TrainConfig, r) -> None:
    logger.info(
        f"      [época {r.epoch}/{cfg.epochs}] T={r.global_steps} "
        f"recompensa={_fmt(r.mean_episode_reward)} episódios={r.episodes} "
        f"perda π={_fmt(r.mean_policy_loss)} perda V={_fmt(r.mean_value_loss)} ({r.wall_time_s:.1f}s)"
    )


# ═══════════════════════════════════════════════════════════════
# AVALIAÇÃO
# ═══════════════════════════════════════════════════════════════

def evaluate_policy(env, policy_fn: Callable[[np.ndarray], int], episodes: int,
                    seed: int = 0) -> tuple[float, float]:
    """Roda episódios completos com `policy_fn`; retorna (média, desvio) da recompensa."""
    if episodes < 1:
        raise UsageError(f"Número de episódios de avaliação deve ser positivo: {episodes}")
    retornos = []
    obs = env.reset(seed=seed)
    for i in range(episodes):
        if i:
            obs = env.reset()
        total, terminal = 0.0, False
        while not terminal:
            passo = env.step(policy_fn(obs))
            total += passo.reward
            terminal = passo.terminal
            obs = passo.observation
        retornos.append(total)
    return float(np.mean(retornos)), float(np.std(retornos))


def _politica_do_checkpoint(ckpt, env) -> Callable[[np.ndarray], int]:
    algo = ckpt.meta["algo"]
    if algo in ALGOS_TABULARES:
        nomes = ["tabela.q"] if algo == "q-learning" else ["tabela.qa", "tabela.qb"]
        if any(n not in ckpt.tensores for n in nomes):
            raise EnvMismatchError(f"Checkpoint tabular sem {nomes}")
        valores = sum(ckpt.tensores[n] for n in nomes)
        esperado = (env.observation_shape[0], env.n_actions)
        if valores.shape != esperado:
            raise EnvMismatchError(f"Tabela {valores.shape} para ambiente {esperado}")
        return lambda obs: greedy_action(valores[indice_do_estado(obs)])

    try:
        arq = ArchConfig(**json.loads(ckpt.meta["arch"]))
        variante = ArchVariant(ckpt.meta["variant"])
    except (KeyError, ValueError) as e:
        raise EnvMismatchError(f"Metadados de arquitetura ausentes ou inválidos: {e}") from e
    if tuple(arq.input_shape) != tuple(env.observation_shape) or arq.n_actions != env.n_actions:
        raise EnvMismatchError(
            f"Rede para entrada {tuple(arq.input_shape)} e {arq.n_actions} ações; "
            f"ambiente tem {tuple(env.observation_shape)} e {env.n_actions}"
        )
    store = ParamStore()
    net = build_network(variante, arq, store, np.random.default_rng(0))
    try:
        store.load(ckpt.tensores)
    except (UsageError, ShapeError) as e:
        raise EnvMismatchError(f"Tensores do checkpoint não batem com a rede: {e}") from e
    params, _ = store.snapshot()
    return lambda obs: acao_gulosa(net, params, obs)


def run_eval(checkpoint: Path, episodes: int = 100, seed: int = 0) -> tuple[float, float]:
    """Avaliação gulosa (DQN: ϵ=0; A3C: argmax de π; tabular: argmax da tabela)."""
    if episodes < 1:
        raise UsageError(f"Número de episódios de avaliação deve ser positivo: {episodes}")
    ckpt = load_checkpoint(checkpoint)
    faltando = [k for k in ("algo", "env", "env_params") if k not in ckpt.meta]
    if faltando:
        raise EnvMismatchError(f"Checkpoint sem metadados de ambiente: {faltando}")
    try:
        env = make_env(EnvSpec(env_id=ckpt.meta["env"], seed=seed, params=json.loads(ckpt.meta["env_params"])))
    except (ConfigError, ValueError) as e:
        raise EnvMismatchError(f"Ambiente do checkpoint não reconstruível: {e}") from e

    media, desvio = evaluate_policy(env, _politica_do_checkpoint(ckpt, env), episodes, seed)
    logger.info(f"[eval] {ckpt.meta['algo']} em {ckpt.meta['env']}: {media:.4f} ± {desvio:.4f} ({episodes} episódios)")
    return media, desvio


# ═══════════════════════════════════════════════════════════════
# LOTE
# ═══════════════════════════════════════════════════════════════

def run_batch(alvos: list, saida_raiz: Path, sobrescritas: dict | None = None) -> list[dict]:
    """
    Roda vários experimentos em sequência (nomes de preset ou TrainConfig).
    Continua mesmo se um falhar; com ao menos um sucesso, gera os gráficos comparativos.
    """
    saida_raiz = Path(saida_raiz)
    resultados, erros = [], []

    for i, alvo in enumerate(alvos, 1):
        nome = alvo if isinstance(alvo, str) else f"{alvo.algo}-{alvo.env}-s{alvo.seed}"
        logger.info(f"\n[{i}/{len(alvos)}] Experimento: {nome}")
        try:
            if isinstance(alvo, str):
                cfg = load_config(preset=alvo, sobrescritas={**(sobrescritas or {}), "output_dir": str(saida_raiz / nome)})
            else:
                cfg = alvo.model_copy(update={"output_dir": str(saida_raiz / nome)})
            resultados.append({"nome": nome, "status": "ok", **run_train(cfg)})
        except Exception as e:
            logger.error(f"Falha no experimento {nome}: {e}")
            erros.append({"nome": nome, "status": "erro", "erro": str(e)})

    logger.info(f"\n{'═'*55}")
    logger.info(f"  LOTE CONCLUÍDO: {len(resultados)} ok, {len(erros)} erro(s)")
    for e in erros:
        logger.error(f"  ✗ {e['nome']}: {e['erro']}")
    logger.info(f"{'═'*55}")

    if resultados:
        csvs = [r["metricas"] for r in resultados]
        for eixo in ("epoch", "wall_time"):
            try:
                emit_plot(csvs, saida_raiz / f"comparacao_{eixo}.svg", x_axis=eixo)
            except PlotError as e:
                logger.warning(f"Gráfico comparativo ({eixo}) não gerado: {e}")
    return resultados + erros


# ═══════════════════════════════════════════════════════════════
# CLI
# ═══════════════════════════════════════════════════════════════

def _sobrescritas_da_cli(args) -> dict:
    pares = {}
    simples = {
        "algo": args.algo, "env": args.env, "seed": args.seed, "epochs": args.epochs,
        "total_steps": args.total_steps, "steps_per_epoch": args.steps_per_epoch,
        "lr": args.lr, "output_dir": args.out,
        "a3c.worker_count": args.workers, "a3c.t_max": args.tmax,
    }
    pares.update({k: v for k, v in simples.items() if v is not None})
    if args.gamma is not None:
        pares.update({"a3c.gamma": args.gamma, "dqn.gamma": args.gamma, "tabular.gamma": args.gamma})
    if args.deterministic:
        pares["a3c.deterministic"] = True
    for texto in args.set or []:
        chave, valor = par_da_cli(texto)
        pares[chave] = valor
    return pares


def _cmd_train(args) -> int:
    if args.listar:
        print("\nPresets disponíveis:\n")
        for nome, descricao in list_presets().items():
            print(f"  {nome:22} {descricao}")
        print()
        return 0
    cfg = load_config(args.config, args.preset, _sobrescritas_da_cli(args))
    run_train(cfg, retomar=args.retomar)
    return 0


def _cmd_eval(args) -> int:
    media, desvio = run_eval(Path(args.checkpoint), args.episodes, args.seed)
    print(f"recompensa média: {media:.4f} ± {desvio:.4f} ({args.episodes} episódios)")
    return 0


def _cmd_plot(args) -> int:
    emit_plot([Path(p) for p in args.csv], Path(args.out), x_axis=args.x, titulo=args.titulo)
    return 0


def _cmd_bias(args) -> int:
    linhas = bias_experiment(seeds=args.seeds, episodes=args.episodes, k=args.k, gamma=args.gamma,
                             epsilon=args.epsilon, exponent=args.exponent)
    write_bias_csv(linhas, Path(args.out))
    print("\nViés de superestimação em B (overest_mdp):\n")
    for algo, r in resumo_vies(linhas).items():
        print(f"  {algo:12} estimativa={r['estimativa_media']:+.4f}  "
              f"left={r['frac_left_media']:.1%}  sementes gulosas em left={r['frac_sementes_gulosa_left']:.0%}")
    print(f"\nCSV: {args.out}\n")
    return 0


def _cmd_gradcheck(args) -> int:
    resultados = run_suite(args.seed)
    falhas = [r for r in resultados if not r.ok]
    for r in resultados:
        print(f"  {'✅' if r.ok else '❌'} {r.nome:48} {r.erro:.2e}")
    print(f"\n{len(resultados) - len(falhas)}/{len(resultados)} checagens dentro do limiar\n")
    return 1 if falhas else 0


def _cmd_compare(args) -> int:
    sobrescritas = {}
    if args.epochs is not None:
        sobrescritas["epochs"] = args.epochs
    for texto in args.set or []:
        chave, valor = par_da_cli(texto)
        sobrescritas[chave] = valor
    resultados = run_batch(args.presets, Path(args.out), sobrescritas)
    return 0 if any(r["status"] == "ok" for r in resultados) else 1


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pipeline.py",
        description="Motor de RL profundo: tabular, DQN e A3C (vanilla, double, LS double)",
    )
    sub = ap.add_subparsers(dest="comando", required=True, metavar="COMANDO")

    tr = sub.add_parser("train", help="Treina um agente e grava métricas, checkpoint e relatório")
    tr.add_argument("--config", help="Arquivo chave = valor (ex: config_resolvida.txt de outro run)")
    tr.add_argument("--preset", help="Preset de config/experimentos.yaml (ex: catch-a3c)")
    tr.add_argument("--listar", action="store_true", help="Lista os presets disponíveis")
    tr.add_argument("--algo", choices=["q-learning", "double-q", "dqn", "dueling-dqn", "a3c",
                                       "double-a3c", "ls-double-a3c"], help="Algoritmo")
    tr.add_argument("--env", help="Ambiente (gridworld4x4, overest_mdp, catch)")
    tr.add_argument("--workers", type=int, help="Workers A3C (padrão: 3)")
    tr.add_argument("--tmax", type=int, help="Passos por segmento A3C (padrão: 5)")
    tr.add_argument("--gamma", type=float, help="Desconto γ do algoritmo escolhido")
    tr.add_argument("--epochs", type=int, help="Número de épocas (padrão: 1)")
    tr.add_argument("--total-steps", type=int, help="Passos globais; arredonda para épocas inteiras")
    tr.add_argument("--steps-per-epoch", type=int, help="Passos por época (padrão: 6000)")
    tr.add_argument("--lr", type=float, help="Taxa de aprendizado do Adam (padrão: 0.001)")
    tr.add_argument("--seed", type=int, help="Semente (padrão: 0)")
    tr.add_argument("--out", help="Diretório de saída (padrão: runs/<algo>-<env>-s<seed>)")
    tr.add_argument("--deterministic", action="store_true",
                    help="A3C em rodízio determinístico numa única thread")
    tr.add_argument("--set", action="append", metavar="CHAVE=VALOR",
                    help="Sobrescreve qualquer chave pontuada (repetível), ex: a3c.entropy_beta=0.01")
    tr.add_argument("--retomar", metavar="CHECKPOINT", help="Continua o treino a partir de um checkpoint")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="Avalia um checkpoint com a política gulosa")
    ev.add_argument("checkpoint", help="Arquivo .a3cf")
    ev.add_argument("--episodes", type=int, default=100, help="Episódios de avaliação (padrão: 100)")
    ev.add_argument("--seed", type=int, default=0, help="Semente do ambiente (padrão: 0)")
    ev.set_defaults(func=_cmd_eval)

    pl = sub.add_parser("plot", help="Curvas de aprendizado em SVG a partir de metrics.csv")
    pl.add_argument("csv", nargs="+", help="Um ou mais metrics.csv (um por série)")
    pl.add_argument("--x", choices=["epoch", "wall_time"], default="epoch", help="Eixo x (padrão: epoch)")
    pl.add_argument("--out", default="curvas.svg", help="SVG de saída (padrão: curvas.svg)")
    pl.add_argument("--titulo", help="Título do gráfico")
    pl.set_defaults(func=_cmd_plot)

    vi = sub.add_parser("bias-experiment", help="Q-learning vs Double Q no overest_mdp")
    vi.add_argument("--seeds", type=int, default=100, help="Sementes (padrão: 100)")
    vi.add_argument("--episodes", type=int, default=10_000, help="Episódios por semente (padrão: 10000)")
    vi.add_argument("--k", type=int, default=8, help="Ações em B (padrão: 8)")
    vi.add_argument("--gamma", type=float, default=0.95, help="Desconto (padrão: 0.95)")
    vi.add_argument("--epsilon", type=float, default=0.1, help="Exploração (padrão: 0.1)")
    vi.add_argument("--exponent", type=float, default=0.8, help="ω da taxa 1/n^ω (padrão: 0.8)")
    vi.add_argument("--out", default="vies.csv", help="CSV de saída (padrão: vies.csv)")
    vi.set_defaults(func=_cmd_bias)

    gc = sub.add_parser("gradcheck", help="Diferenças finitas em todas as camadas e objetivos")
    gc.add_argument("--seed", type=int, default=0, help="Semente das entradas (padrão: 0)")
    gc.set_defaults(func=_cmd_gradcheck)

    co = sub.add_parser("compare", help="Roda vários presets e sobrepõe as curvas")
    co.add_argument("presets", nargs="+", metavar="PRESET", help="Nomes de preset")
    co.add_argument("--out", default=str(settings.RUNS_DIR / "comparacao"), help="Diretório raiz do lote")
    co.add_argument("--epochs", type=int, help="Sobrescreve o número de épocas de todos os presets")
    co.add_argument("--set", action="append", metavar="CHAVE=VALOR", help="Sobrescrita aplicada a todos")
    co.set_defaults(func=_cmd_compare)
    return ap


def cli_main(argv: list[str] | None = None) -> int:
    """Executa um subcomando. 2 = uso/configuração inválida, 1 = falha em execução."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"Configuração inválida: {e}")
        return 2
    except TrainingAbort as e:
        logger.error(f"Treino abortado: {e}")
        return 1
    except (CorruptCheckpointError, EnvMismatchError, PlotError, UsageError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1


def main() -> None:
    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
