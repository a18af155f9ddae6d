"""
tests/test_tabular.py
Q-learning e Double Q-learning: atualizações de célula, laço de controle,
convergência contra o oráculo e experimento de viés.
"""

import sys, os, csv, tempfile, unittest
from pathlib import Path

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
from scipy.stats import chisquare

import settings
from envs import EnvSpec, Transition, make_env, optimal_q_values
from erros import ConfigError, UsageError
from tabular import (
    COLUNAS_VIES, ControleTabular, DoubleQTable, QTable, TabularConfig,
    bias_experiment, double_q_update, epsilon_greedy_action, greedy_policy,
    indice_do_estado, q_learning_update, resumo_vies, run_tabular, write_bias_csv,
)
from tests.fixtures import Corredor


def _oh(i, n=3):
    v = np.zeros(n, dtype=np.float32)
    v[i] = 1.0
    return v


def _t(s, a, r, s2, terminal, n=3):
    return Transition(_oh(s, n), a, r, _oh(s2, n), terminal)


def _caminho_guloso(tabela, env, limite=20):
    politica = greedy_policy(tabela)
    obs = env.reset()
    for passo in range(1, limite + 1):
        r = env.step(politica[indice_do_estado(obs)])
        if r.terminal:
            return passo, r.reward
        obs = r.observation
    return None, 0.0


# ═══════════════════════════════════════════════════════════════
# 1. ATUALIZAÇÃO Q-LEARNING
# ═══════════════════════════════════════════════════════════════

class TestQLearningUpdate(unittest.TestCase):

    def setUp(self):
        self.cfg = TabularConfig(alpha=0.5, gamma=0.9)

    def test_terminal_usa_so_recompensa(self):
        tabela = QTable.zeros(3, 2)
        tabela.values[2] = [10.0, 10.0]
        q_learning_update(tabela, _t(0, 1, 1.0, 2, True), self.cfg)
        self.assertAlmostEqual(tabela.values[0, 1], 0.5)

    def test_nao_terminal_usa_max_do_proximo(self):
        tabela = QTable.zeros(3, 2)
        tabela.values[1] = [0.0, 2.0]
        q_learning_update(tabela, _t(0, 0, 0.0, 1, False), self.cfg, alpha=1.0)
        self.assertAlmostEqual(tabela.values[0, 0], 1.8)

    def test_so_a_celula_muda(self):
        tabela = QTable.zeros(3, 2)
        q_learning_update(tabela, _t(0, 1, 1.0, 1, False), self.cfg)
        mascara = np.ones((3, 2), dtype=bool)
        mascara[0, 1] = False
        self.assertTrue(np.all(tabela.values[mascara] == 0.0))

    def test_taxa_polinomial_com_expoente_um_e_media(self):
        cfg = TabularConfig(gamma=0.9, alpha_exponent=1.0)
        tabela = QTable.zeros(3, 2)
        for r in (1.0, 2.0, 3.0, 6.0):
            q_learning_update(tabela, _t(0, 0, r, 2, True), cfg)
        self.assertAlmostEqual(tabela.values[0, 0], 3.0)
        self.assertEqual(tabela.visitas[0, 0], 4)

    def test_indice_fora_da_faixa(self):
        tabela = QTable.zeros(3, 2)
        with self.assertRaises(UsageError):
            q_learning_update(tabela, _t(0, 5, 0.0, 1, False), self.cfg)

    def test_tabela_sem_dimensao(self):
        with self.assertRaises(UsageError):
            QTable(np.zeros((0, 2)))


# ═══════════════════════════════════════════════════════════════
# 2. ATUALIZAÇÃO DOUBLE Q
# ═══════════════════════════════════════════════════════════════

class TestDoubleQUpdate(unittest.TestCase):

    def setUp(self):
        self.cfg = TabularConfig(gamma=0.9)
        self.tabela = DoubleQTable(QTable.zeros(3, 3), QTable.zeros(3, 3))
        self.tabela.qa.values[1] = [0.0, 2.0, 1.0]
        self.tabela.qb.values[1] = [5.0, 0.5, 7.0]

    def test_moeda_a_escolhe_em_a_avalia_em_b(self):
        double_q_update(self.tabela, _t(0, 2, 0.0, 1, False), self.cfg, "A", alpha=1.0)
        self.assertAlmostEqual(self.tabela.qa.values[0, 2], 0.9 * 0.5)
        self.assertEqual(self.tabela.qb.values[0, 2], 0.0)

    def test_moeda_b_escolhe_em_b_avalia_em_a(self):
        double_q_update(self.tabela, _t(0, 2, 0.0, 1, False), self.cfg, "B", alpha=1.0)
        self.assertAlmostEqual(self.tabela.qb.values[0, 2], 0.9 * 1.0)
        self.assertEqual(self.tabela.qa.values[0, 2], 0.0)

    def test_terminal(self):
        double_q_update(self.tabela, _t(0, 0, -1.0, 2, True), self.cfg, "B", alpha=0.5)
        self.assertAlmostEqual(self.tabela.qb.values[0, 0], -0.5)

    def test_moeda_invalida(self):
        with self.assertRaises(UsageError):
            double_q_update(self.tabela, _t(0, 0, 0.0, 1, False), self.cfg, "C")

    def test_tabelas_com_formatos_distintos(self):
        with self.assertRaises(UsageError):
            DoubleQTable(QTable.zeros(3, 2), QTable.zeros(3, 3))

    def test_visitas_por_tabela(self):
        cfg = TabularConfig(gamma=0.9, alpha_exponent=1.0)
        double_q_update(self.tabela, _t(0, 0, 1.0, 2, True), cfg, "A")
        double_q_update(self.tabela, _t(0, 0, 3.0, 2, True), cfg, "B")
        self.assertEqual(self.tabela.qa.visitas[0, 0], 1)
        self.assertEqual(self.tabela.qb.visitas[0, 0], 1)
        self.assertAlmostEqual(self.tabela.qa.values[0, 0], 1.0)
        self.assertAlmostEqual(self.tabela.qb.values[0, 0], 3.0)


# ═══════════════════════════════════════════════════════════════
# 3. SELEÇÃO DE AÇÃO
# ═══════════════════════════════════════════════════════════════

class TestSelecaoDeAcao(unittest.TestCase):

    def test_epsilon_zero_e_guloso(self):
        rng = np.random.default_rng(0)
        acoes = {epsilon_greedy_action(np.array([0.1, 0.9, 0.3]), 0.0, rng) for _ in range(50)}
        self.assertEqual(acoes, {1})

    def test_empate_fica_com_menor_indice(self):
        rng = np.random.default_rng(0)
        self.assertEqual(epsilon_greedy_action(np.array([1.0, 1.0, 0.0]), 0.0, rng), 0)

    def test_epsilon_um_e_uniforme(self):
        rng = np.random.default_rng(42)
        contagem = np.bincount(
            [epsilon_greedy_action(np.array([0.0, 9.0, 0.0, 0.0]), 1.0, rng) for _ in range(4000)],
            minlength=4,
        )
        self.assertGreater(chisquare(contagem).pvalue, 0.001)

    def test_epsilon_fora_da_faixa(self):
        with self.assertRaises(UsageError):
            epsilon_greedy_action(np.zeros(2), 1.5, np.random.default_rng(0))

    def test_observacao_nao_one_hot(self):
        with self.assertRaises(UsageError):
            indice_do_estado(np.zeros((1, 5, 5)))


# ═══════════════════════════════════════════════════════════════
# 4. LAÇO DE CONTROLE
# ═══════════════════════════════════════════════════════════════

class TestLacoDeControle(unittest.TestCase):

    def test_algo_desconhecido(self):
        with self.assertRaises(ConfigError):
            run_tabular(Corredor(), "sarsa", TabularConfig(), steps=10)

    def test_catch_nao_e_one_hot(self):
        env = make_env(EnvSpec(env_id="catch"))
        with self.assertRaises(ConfigError):
            run_tabular(env, "q-learning", TabularConfig(), steps=10)

    def test_exige_steps_ou_episodes(self):
        with self.assertRaises(UsageError):
            run_tabular(Corredor(), "q-learning", TabularConfig())
        with self.assertRaises(UsageError):
            run_tabular(Corredor(), "q-learning", TabularConfig(), steps=5, episodes=5)

    def test_conta_passos_e_episodios(self):
        r = run_tabular(Corredor(), "q-learning", TabularConfig(epsilon=1.0), episodes=5)
        self.assertEqual(r.episodios, 5)
        self.assertEqual(len(r.acoes_iniciais), 5)
        self.assertEqual(r.recompensas, [1.0] * 5)

    def test_controle_incremental_acumula(self):
        controle = ControleTabular(Corredor(), "double-q", TabularConfig(seed=1))
        controle.avancar(steps=30)
        r = controle.avancar(steps=20)
        self.assertEqual(r.passos, 50)
        self.assertIsInstance(r.tabela, DoubleQTable)

    def test_incremental_igual_a_direto(self):
        cfg = TabularConfig(seed=4)
        direto = run_tabular(Corredor(), "q-learning", cfg, steps=200)
        controle = ControleTabular(Corredor(), "q-learning", cfg)
        for _ in range(4):
            controle.avancar(steps=50)
        np.testing.assert_array_equal(controle.resultado.tabela.values, direto.tabela.values)
        self.assertEqual(controle.resultado.recompensas, direto.recompensas)

    def test_corredor_aprende_ir_para_direita(self):
        r = run_tabular(Corredor(), "q-learning", TabularConfig(alpha=0.5, gamma=0.9, seed=2), steps=500)
        self.assertEqual(greedy_policy(r.tabela)[0], 1)
        self.assertEqual(greedy_policy(r.tabela)[1], 1)


# ═══════════════════════════════════════════════════════════════
# 5. CONVERGÊNCIA NO GRIDWORLD
# ═══════════════════════════════════════════════════════════════

class TestConvergenciaGridworld(unittest.TestCase):

    def setUp(self):
        self.spec = EnvSpec(env_id="gridworld4x4")
        self.cfg = TabularConfig(alpha=0.1, gamma=0.9, epsilon=0.1)

    def test_q_learning_rapido(self):
        r = run_tabular(make_env(self.spec), "q-learning", self.cfg, steps=50_000)
        passos, recompensa = _caminho_guloso(r.tabela, make_env(self.spec))
        self.assertEqual((passos, recompensa), (6, 1.0))
        self.assertLess(abs(r.tabela.values[0].max() - 0.9 ** 5), 0.05)

    def test_double_q_rapido(self):
        r = run_tabular(make_env(self.spec), "double-q", self.cfg, steps=100_000)
        passos, recompensa = _caminho_guloso(r.tabela, make_env(self.spec))
        self.assertEqual((passos, recompensa), (6, 1.0))

    def test_q_learning_contra_oraculo_cinco_sementes(self):
        if not settings.TESTES_LONGOS:
            self.skipTest("A3CF_TESTES_LONGOS desativado")
        q_estrela = optimal_q_values(self.spec, 0.9)
        for seed in range(5):
            cfg = self.cfg.model_copy(update={"seed": seed})
            r = run_tabular(make_env(self.spec.model_copy(update={"seed": seed})), "q-learning", cfg, steps=200_000)
            self.assertLess(np.abs(r.tabela.values - q_estrela).max(), 0.05, f"seed {seed}")


# ═══════════════════════════════════════════════════════════════
# 6. EXPERIMENTO DE VIÉS
# ═══════════════════════════════════════════════════════════════

class TestExperimentoDeVies(unittest.TestCase):

    def test_reduzido_q_learning_superestima_mais(self):
        linhas = bias_experiment(seeds=10, episodes=2000)
        resumo = resumo_vies(linhas)
        self.assertEqual(len(linhas), 20)
        self.assertGreater(resumo["q-learning"]["estimativa_media"], resumo["double-q"]["estimativa_media"])

    def test_csv_tem_colunas_declaradas(self):
        linhas = bias_experiment(seeds=2, episodes=50)
        with tempfile.TemporaryDirectory() as tmp:
            caminho = write_bias_csv(linhas, Path(tmp) / "vies.csv")
            with open(caminho, encoding="utf-8", newline="") as f:
                leitor = csv.reader(f)
                self.assertEqual(tuple(next(leitor)), COLUNAS_VIES)
                corpo = list(leitor)
        self.assertEqual(len(corpo), 4)
        self.assertEqual({l[1] for l in corpo}, {"q-learning", "double-q"})
        for linha in corpo:
            self.assertEqual(linha[2], "50")
            self.assertTrue(0.0 <= float(linha[4]) <= 1.0)

    def test_completo(self):
        if not settings.TESTES_LONGOS:
            self.skipTest("A3CF_TESTES_LONGOS desativado")
        resumo = resumo_vies(bias_experiment(seeds=100, episodes=10_000, k=8, gamma=0.95))
        ql, dq = resumo["q-learning"], resumo["double-q"]
        self.assertGreater(ql["estimativa_media"] - dq["estimativa_media"], 0.1)
        self.assertGreater(1.0 - dq["frac_sementes_gulosa_left"], 0.8)
        self.assertGreater(ql["frac_sementes_gulosa_left"], 0.5)


if __name__ == "__main__":
    unittest.main()
