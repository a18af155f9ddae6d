"""
tests/test_pipeline.py
Configuração em camadas, runs curtos de ponta a ponta, retomada, avaliação,
relatório, lote e códigos de saída da CLI.
"""

import sys, os, json, tempfile, unittest
from pathlib import Path

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np

from checkpoint import load_checkpoint, save_checkpoint, serializar
from config import (
    ler_pares, list_presets, load_config, mesclar, par_da_cli, resolved_snapshot, salvar_snapshot, validar,
)
from envs import EnvSpec, make_env, optimal_q_values
from erros import ConfigError, EnvMismatchError, UsageError
from metrics import CABECALHO, EpochRecord, ler_metricas
from pipeline import (
    ARQ_CHECKPOINT, ARQ_CONFIG, ARQ_METRICAS, ARQ_RELATORIO, cli_main, evaluate_policy,
    run_batch, run_eval, run_train,
)
from tests.fixtures import pares_curtos
from validator import needs_review, validate_run

PRESETS = {
    "catch-a3c", "catch-double-a3c", "catch-ls-double-a3c", "catch-dqn",
    "gridworld-q", "gridworld-double-q",
}


class _ComTmp(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.dir = Path(self._tmp.name)

    def _treinar(self, algo, nome="run", **extra):
        return run_train(validar(pares_curtos(algo, self.dir / nome, **extra)))


# ═══════════════════════════════════════════════════════════════
# 1. CONFIGURAÇÃO
# ═══════════════════════════════════════════════════════════════

class TestConfiguracao(_ComTmp):

    def test_pares_tipados(self):
        texto = "# comentário\nalgo = a3c\n\nlr = 0.0005\na3c.deterministic = true\nseed = 4\noutput_dir = null\n"
        self.assertEqual(
            ler_pares(texto),
            {"algo": "a3c", "lr": 0.0005, "a3c.deterministic": True, "seed": 4, "output_dir": None},
        )

    def test_erros_com_numero_da_linha(self):
        for texto in ("algo = a3c\nsem igual", "algo = a3c\nalgo = dqn", "algo = a3c\nChave Ruim = 1"):
            with self.subTest(texto=texto):
                with self.assertRaises(ConfigError) as ctx:
                    ler_pares(texto, origem="x.txt")
                self.assertIn("x.txt:2", str(ctx.exception))

    def test_par_da_cli(self):
        self.assertEqual(par_da_cli("a3c.entropy_beta=0.01"), ("a3c.entropy_beta", 0.01))
        with self.assertRaises(ConfigError):
            par_da_cli("sem_valor")

    def test_precedencia_preset_arquivo_cli(self):
        arquivo = self.dir / "c.txt"
        arquivo.write_text("seed = 5\na3c.t_max = 7\n", encoding="utf-8")
        cfg = load_config(arquivo, "catch-a3c", {"seed": 9})
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.a3c.t_max, 7)
        self.assertEqual(cfg.a3c.worker_count, 3)
        self.assertEqual(cfg.epochs, 34)

    def test_epochs_substitui_total_steps_anterior(self):
        cfg = load_config(preset="catch-a3c", sobrescritas={"epochs": 2})
        self.assertEqual((cfg.epochs, cfg.total_steps), (2, 12_000))
        self.assertEqual(mesclar([{"total_steps": 10}, {"epochs": 1}]), {"epochs": 1})

    def test_total_steps_arredonda_para_epocas(self):
        cfg = validar({"algo": "a3c", "total_steps": 100, "steps_per_epoch": 60})
        self.assertEqual((cfg.epochs, cfg.total_steps), (2, 120))

    def test_chave_desconhecida(self):
        with self.assertRaises(ConfigError):
            validar({"algo": "a3c", "a3c.velocidade": 2})

    def test_tabular_no_catch(self):
        with self.assertRaises(ConfigError):
            validar({"algo": "q-learning", "env": "catch"})

    def test_snapshot_e_ponto_fixo(self):
        cfg = validar(pares_curtos("double-a3c", self.dir, lr=1e-05, **{"a3c.entropy_beta": 0.01}))
        caminho = salvar_snapshot(cfg, self.dir / ARQ_CONFIG)
        recarregada = load_config(caminho)
        self.assertEqual(recarregada, cfg)
        self.assertEqual(resolved_snapshot(recarregada), caminho.read_text(encoding="utf-8"))

    def test_presets_validos(self):
        self.assertTrue(PRESETS <= set(list_presets()))
        for nome in list_presets():
            with self.subTest(preset=nome):
                load_config(preset=nome)

    def test_preset_inexistente(self):
        with self.assertRaises(ConfigError):
            load_config(preset="pong-a3c")


# ═══════════════════════════════════════════════════════════════
# 2. TREINO
# ═══════════════════════════════════════════════════════════════

class TestTreino(_ComTmp):

    def test_artefatos_de_um_run_a3c(self):
        r = self._treinar("a3c")
        registros = ler_metricas(r["metricas"])
        self.assertEqual([x.global_steps for x in registros], [60, 120])
        self.assertEqual(r["epocas"], 2)
        for arquivo in (ARQ_CONFIG, ARQ_METRICAS, ARQ_CHECKPOINT, ARQ_RELATORIO):
            self.assertTrue((r["saida"] / arquivo).exists(), arquivo)

        meta = load_checkpoint(r["checkpoint"]).meta
        self.assertEqual((meta["epoch"], meta["global_step"], meta["variant"]), ("2", "120", "vanilla_a3c"))
        self.assertFalse(needs_review(r["relatorio"]))

    def test_todos_os_algoritmos(self):
        for algo in ("q-learning", "double-q", "dqn", "dueling-dqn", "a3c", "double-a3c", "ls-double-a3c"):
            with self.subTest(algo=algo):
                r = self._treinar(algo, nome=algo)
                self.assertEqual([x.epoch for x in ler_metricas(r["metricas"])], [1, 2])
                self.assertFalse(needs_review(r["relatorio"]), r["relatorio"])

    def test_zero_epocas(self):
        r = self._treinar("a3c", epochs=0)
        self.assertEqual(r["metricas"].read_text(encoding="utf-8"), CABECALHO + "\n")
        self.assertEqual(load_checkpoint(r["checkpoint"]).meta["epoch"], "0")

    def test_mesma_semente_mesmos_parametros(self):
        a = load_checkpoint(self._treinar("double-a3c", nome="a")["checkpoint"]).tensores
        b = load_checkpoint(self._treinar("double-a3c", nome="b")["checkpoint"]).tensores
        self.assertEqual(sorted(a), sorted(b))
        for nome in a:
            np.testing.assert_array_equal(a[nome], b[nome], err_msg=nome)

    def test_retomada_equivale_ao_run_continuo(self):
        extra = {"a3c.worker_count": 2}
        continuo = self._treinar("a3c", nome="continuo", **extra)

        self._treinar("a3c", nome="partes", epochs=1, **extra)
        ckpt = self.dir / "partes" / ARQ_CHECKPOINT
        retomado = run_train(validar(pares_curtos("a3c", self.dir / "partes", **extra)), retomar=ckpt)

        self.assertEqual([x.epoch for x in ler_metricas(retomado["metricas"])], [1, 2])
        a, b = load_checkpoint(continuo["checkpoint"]), load_checkpoint(retomado["checkpoint"])
        self.assertEqual(a.meta["version"], b.meta["version"])
        self.assertEqual(a.meta["adam.step"], b.meta["adam.step"])
        for nome in a.tensores:
            np.testing.assert_array_equal(a.tensores[nome], b.tensores[nome], err_msg=nome)
        for nome in a.adam_m:
            np.testing.assert_array_equal(a.adam_m[nome], b.adam_m[nome], err_msg=nome)

    def test_retomada_dqn_equivale_ao_run_continuo(self):
        # 62 passos por época cortam um episódio do catch ao meio; 50 de capacidade força o anel a girar
        extra = {"steps_per_epoch": 62, "dqn.buffer_capacity": 50}
        continuo = self._treinar("dqn", nome="continuo", **extra)

        self._treinar("dqn", nome="partes", epochs=1, **extra)
        ckpt = self.dir / "partes" / ARQ_CHECKPOINT
        self.assertIn("replay.s", load_checkpoint(ckpt).estado)
        retomado = run_train(validar(pares_curtos("dqn", self.dir / "partes", **extra)), retomar=ckpt)

        linhas_a, linhas_b = ler_metricas(continuo["metricas"]), ler_metricas(retomado["metricas"])
        self.assertEqual(len(linhas_a), len(linhas_b))
        for x, y in zip(linhas_a, linhas_b):
            self.assertEqual(
                (x.epoch, x.global_steps, x.mean_episode_reward, x.episodes, x.mean_value_loss),
                (y.epoch, y.global_steps, y.mean_episode_reward, y.episodes, y.mean_value_loss),
            )

        a, b = load_checkpoint(continuo["checkpoint"]), load_checkpoint(retomado["checkpoint"])
        for chave in ("version", "adam.step", "dqn.rng", "dqn.env", "dqn.retorno", "dqn.replay.r"):
            self.assertEqual(a.meta[chave], b.meta[chave], chave)
        for nome in a.tensores:
            np.testing.assert_array_equal(a.tensores[nome], b.tensores[nome], err_msg=nome)
        for nome in a.adam_m:
            np.testing.assert_array_equal(a.adam_m[nome], b.adam_m[nome], err_msg=nome)
        for nome in a.estado:
            np.testing.assert_array_equal(a.estado[nome], b.estado[nome], err_msg=nome)

    def test_retomada_dqn_sem_estado_salvo(self):
        r = self._treinar("dqn", epochs=1)
        antigo = load_checkpoint(r["checkpoint"])
        meta = {k: v for k, v in antigo.meta.items() if not k.startswith("dqn.") and not k.startswith("adam.")}
        caminho = save_checkpoint(antigo.tensores, antigo.adam_state(), meta, self.dir / "sem_estado.a3cf")
        with self.assertRaises(ConfigError):
            run_train(validar(pares_curtos("dqn", self.dir / "run")), retomar=caminho)

    def test_metricas_dqn_sem_perda_de_politica(self):
        r = self._treinar("dqn")
        registros = ler_metricas(r["metricas"])
        self.assertEqual([x.global_steps for x in registros], [60, 120])
        for x in registros:
            self.assertIsNone(x.mean_policy_loss)
            self.assertIsNotNone(x.mean_value_loss)
            self.assertEqual(x.episodes, 15)

        linhas = r["metricas"].read_text(encoding="utf-8").splitlines()
        self.assertEqual(linhas[0], CABECALHO)
        for linha in linhas[1:]:
            campos = linha.split(",")
            self.assertEqual(campos[5], "")
            self.assertNotEqual(campos[6], "")

    def test_retomada_de_outro_algoritmo(self):
        r = self._treinar("a3c", nome="a3c", epochs=1)
        with self.assertRaises(ConfigError):
            run_train(validar(pares_curtos("double-a3c", self.dir / "double")), retomar=r["checkpoint"])

    def test_retomada_tabular_nao_suportada(self):
        r = self._treinar("q-learning", epochs=1)
        with self.assertRaises(ConfigError):
            run_train(validar(pares_curtos("q-learning", self.dir / "run")), retomar=r["checkpoint"])


# ═══════════════════════════════════════════════════════════════
# 3. AVALIAÇÃO
# ═══════════════════════════════════════════════════════════════

class TestAvaliacao(_ComTmp):

    def test_q_estrela_do_gridworld_sempre_chega(self):
        q = optimal_q_values(EnvSpec(env_id="gridworld4x4"), 0.9)
        meta = {"algo": "q-learning", "env": "gridworld4x4", "env_params": "{}"}
        caminho = save_checkpoint({"tabela.q": q}, None, meta, self.dir / "q.a3cf")
        self.assertEqual(run_eval(caminho, episodes=20), (1.0, 0.0))

    def test_politica_aleatoria_no_catch(self):
        rng = np.random.default_rng(0)
        env = make_env(EnvSpec(env_id="catch", seed=0))
        media, desvio = evaluate_policy(env, lambda obs: int(rng.integers(3)), 1000)
        self.assertAlmostEqual(media, -0.6, delta=0.1)
        self.assertGreater(desvio, 0.0)

    def test_zero_episodios(self):
        env = make_env(EnvSpec(env_id="catch"))
        with self.assertRaises(UsageError):
            evaluate_policy(env, lambda obs: 0, 0)

    def test_avalia_checkpoint_de_rede(self):
        r = self._treinar("dueling-dqn", epochs=1)
        media, _ = run_eval(r["checkpoint"], episodes=10)
        self.assertTrue(-1.0 <= media <= 1.0)

    def test_ambiente_diferente_da_rede(self):
        r = self._treinar("a3c", epochs=1)
        ckpt = load_checkpoint(r["checkpoint"])
        meta = {**ckpt.meta, "env_params": json.dumps({"size": 7})}
        caminho = self.dir / "alterado.a3cf"
        caminho.write_bytes(serializar(meta, ckpt.tensores))
        with self.assertRaises(EnvMismatchError):
            run_eval(caminho, episodes=1)


# ═══════════════════════════════════════════════════════════════
# 4. RELATÓRIO
# ═══════════════════════════════════════════════════════════════

class TestRelatorio(unittest.TestCase):

    def _registros(self, passos=(60, 120, 180), tempos=(1.0, 2.0, 3.0), perda=0.5):
        return [
            EpochRecord(i, p, t, 0.1 * i, 3, perda, 0.2)
            for i, (p, t) in enumerate(zip(passos, tempos), start=1)
        ]

    def test_run_limpo(self):
        r = validate_run(self._registros())
        self.assertFalse(needs_review(r))
        self.assertEqual(r["melhor_recompensa"]["epoch"], 3)
        self.assertEqual(r["episodios"], 9)

    def test_salto_de_passos(self):
        self.assertTrue(needs_review(validate_run(self._registros(passos=(60, 150, 180)))))

    def test_tempo_recuando(self):
        r = validate_run(self._registros(tempos=(1.0, 0.5, 3.0)))
        self.assertEqual(len(r["recuos_de_tempo"]), 1)
        self.assertTrue(needs_review(r))

    def test_perda_nao_finita(self):
        r = validate_run(self._registros(perda=float("nan")))
        self.assertEqual(r["perdas_nao_finitas"], [1, 2, 3])

    def test_epocas_faltando(self):
        cfg = validar({"algo": "a3c", "epochs": 5, "steps_per_epoch": 60})
        r = validate_run(self._registros(), cfg)
        self.assertTrue(needs_review(r))
        self.assertTrue(r["warnings"])


# ═══════════════════════════════════════════════════════════════
# 5. LOTE
# ═══════════════════════════════════════════════════════════════

class TestLote(_ComTmp):

    def test_continua_apos_falha_e_compara(self):
        alvos = [
            validar(pares_curtos("a3c", self.dir / "x")),
            "preset-inexistente",
            validar(pares_curtos("dqn", self.dir / "y")),
        ]
        resultados = run_batch(alvos, self.dir / "lote")
        self.assertEqual(sorted(r["status"] for r in resultados), ["erro", "ok", "ok"])
        self.assertTrue((self.dir / "lote" / "comparacao_epoch.svg").exists())
        self.assertTrue((self.dir / "lote" / "comparacao_wall_time.svg").exists())


# ═══════════════════════════════════════════════════════════════
# 6. CLI
# ═══════════════════════════════════════════════════════════════

class TestCli(_ComTmp):

    def _train(self, *extra):
        return cli_main([
            "train", "--algo", "a3c", "--env", "catch", "--epochs", "1", "--steps-per-epoch", "30",
            "--workers", "1", "--deterministic", "--set", "arch.hidden=8", "--set", "arch.conv_channels=2",
            "--out", str(self.dir / "cli"), *extra,
        ])

    def test_subcomando_desconhecido(self):
        self.assertEqual(cli_main(["voar"]), 2)

    def test_treino_e_avaliacao(self):
        self.assertEqual(self._train(), 0)
        self.assertTrue((self.dir / "cli" / ARQ_METRICAS).exists())
        self.assertEqual(cli_main(["eval", str(self.dir / "cli" / ARQ_CHECKPOINT), "--episodes", "5"]), 0)

    def test_configuracao_invalida(self):
        self.assertEqual(self._train("--set", "a3c.velocidade=2"), 2)
        self.assertEqual(cli_main(["train", "--algo", "q-learning", "--env", "catch"]), 2)

    def test_checkpoint_inexistente(self):
        self.assertEqual(cli_main(["eval", str(self.dir / "nada.a3cf")]), 1)

    def test_checkpoint_corrompido(self):
        caminho = self.dir / "ruim.a3cf"
        caminho.write_bytes(b"A3CF\x01")
        self.assertEqual(cli_main(["eval", str(caminho)]), 1)

    def test_plot_sobrepoe_runs(self):
        a = self._treinar("a3c", nome="a")
        b = self._treinar("dqn", nome="b")
        svg = self.dir / "cmp.svg"
        self.assertEqual(cli_main(["plot", str(a["metricas"]), str(b["metricas"]), "--out", str(svg)]), 0)
        self.assertEqual(svg.read_text(encoding="utf-8").count('id="serie-'), 2)

    def test_listar_presets(self):
        self.assertEqual(cli_main(["train", "--listar"]), 0)

    def test_gradcheck(self):
        self.assertEqual(cli_main(["gradcheck"]), 0)


if __name__ == "__main__":
    unittest.main()
