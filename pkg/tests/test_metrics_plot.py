"""
tests/test_metrics_plot.py
metrics.csv (formato, leitura, escritor com fila) e curvas SVG.
"""

import sys, os, queue, tempfile, unittest
from pathlib import Path

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from erros import PlotError, UsageError
from metrics import (
    CABECALHO, EpochRecord, MetricsWriter, ResumoEpoca, drenar_eventos, formatar_linha,
    ler_metricas, registro_da_epoca, write_metrics,
)
from plots import emit_plot, rotulo_da_serie


def _csv(caminho: Path, linhas: list[str]) -> Path:
    caminho.parent.mkdir(parents=True, exist_ok=True)
    caminho.write_text("\n".join([CABECALHO, *linhas]) + "\n", encoding="utf-8")
    return caminho


class _ComTmp(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.dir = Path(self._tmp.name)


# ═══════════════════════════════════════════════════════════════
# 1. FORMATO DA LINHA
# ═══════════════════════════════════════════════════════════════

class TestFormato(unittest.TestCase):

    def test_seis_algarismos_e_brancos(self):
        r = EpochRecord(3, 18000, 12.3456789, 0.5, 10, None, 1.23456789e-7)
        self.assertEqual(formatar_linha(r), "3,18000,12.3457,0.5,10,,1.23457e-07")

    def test_sem_episodio_fica_em_branco(self):
        r = registro_da_epoca(1, 6000, 2.0, ResumoEpoca())
        self.assertIsNone(r.mean_episode_reward)
        self.assertEqual(r.episodes, 0)
        self.assertEqual(formatar_linha(r), "1,6000,2,,0,,")

    def test_eventos_drenados(self):
        fila = queue.Queue()
        for evento in (("episodio", 1.0), ("perda", 0.5, 0.25), ("episodio", -1.0), ("perda", None, 2.0)):
            fila.put(evento)
        resumo = drenar_eventos(fila)
        self.assertEqual(resumo.recompensas, [1.0, -1.0])
        self.assertEqual(resumo.perdas_politica, [0.5])
        self.assertEqual(resumo.perdas_valor, [0.25, 2.0])
        self.assertTrue(fila.empty())

    def test_medias_da_epoca(self):
        resumo = ResumoEpoca(recompensas=[1.0, 0.0], perdas_politica=[0.2, 0.4], perdas_valor=[1.0])
        r = registro_da_epoca(2, 12000, 5.5, resumo)
        self.assertEqual((r.mean_episode_reward, r.episodes), (0.5, 2))
        self.assertAlmostEqual(r.mean_policy_loss, 0.3)


# ═══════════════════════════════════════════════════════════════
# 2. ESCRITA E LEITURA
# ═══════════════════════════════════════════════════════════════

class TestArquivo(_ComTmp):

    def test_escritor_grava_tres_linhas(self):
        caminho = self.dir / "run" / "metrics.csv"
        with MetricsWriter(caminho) as w:
            for e in range(1, 4):
                w.put(EpochRecord(e, e * 60, e * 0.5, None if e == 2 else float(e), 0 if e == 2 else 4, 0.1, 0.2))
        linhas = caminho.read_text(encoding="utf-8").splitlines()
        self.assertEqual(linhas[0], CABECALHO)
        self.assertEqual(len(linhas), 4)
        self.assertEqual(linhas[2], "2,120,1,,0,0.1,0.2")

        registros = ler_metricas(caminho)
        self.assertEqual([r.epoch for r in registros], [1, 2, 3])
        self.assertIsNone(registros[1].mean_episode_reward)
        self.assertEqual(registros[2].mean_episode_reward, 3.0)

    def test_anexar_preserva_linhas(self):
        caminho = _csv(self.dir / "metrics.csv", ["1,60,0.5,1,2,,"])
        with MetricsWriter(caminho, anexar=True) as w:
            w.put(EpochRecord(2, 120, 1.0, 0.0, 2))
        self.assertEqual([r.epoch for r in ler_metricas(caminho)], [1, 2])

    def test_sem_cabecalho(self):
        with self.assertRaises(UsageError):
            write_metrics(EpochRecord(1, 60, 0.1, None, 0), self.dir / "nada.csv")

    def test_linha_malformada_indica_numero(self):
        caminho = _csv(self.dir / "metrics.csv", ["1,60,0.5,1,2,,", "2,120,1.0,1"])
        with self.assertRaises(PlotError) as ctx:
            ler_metricas(caminho)
        self.assertEqual(ctx.exception.line, 3)

    def test_valor_ilegivel(self):
        caminho = _csv(self.dir / "metrics.csv", ["um,60,0.5,1,2,,"])
        with self.assertRaises(PlotError) as ctx:
            ler_metricas(caminho)
        self.assertEqual(ctx.exception.line, 2)

    def test_cabecalho_errado(self):
        caminho = self.dir / "metrics.csv"
        caminho.write_text("epoch,steps\n1,2\n", encoding="utf-8")
        with self.assertRaises(PlotError):
            ler_metricas(caminho)


# ═══════════════════════════════════════════════════════════════
# 3. GRÁFICOS
# ═══════════════════════════════════════════════════════════════

class TestGraficos(_ComTmp):

    def test_uma_serie_por_csv(self):
        a = _csv(self.dir / "a3c-catch-s0" / "metrics.csv", ["1,60,0.5,-0.2,10,,", "2,120,1.1,0.4,10,,"])
        b = _csv(self.dir / "dqn-catch-s0" / "metrics.csv", ["1,60,0.7,,0,,", "2,120,1.5,0.1,8,,"])
        svg = emit_plot([a, b], self.dir / "curvas.svg", x_axis="wall_time", titulo="catch")
        texto = svg.read_text(encoding="utf-8")
        self.assertEqual(texto.count('id="serie-'), 2)
        self.assertIn("a3c-catch-s0", texto)
        self.assertIn("dqn-catch-s0", texto)

    def test_csv_sem_episodios(self):
        a = _csv(self.dir / "metrics.csv", ["1,60,0.5,,0,,"])
        with self.assertRaises(PlotError):
            emit_plot(a, self.dir / "x.svg")

    def test_eixo_invalido(self):
        a = _csv(self.dir / "metrics.csv", ["1,60,0.5,1,1,,"])
        with self.assertRaises(PlotError):
            emit_plot(a, self.dir / "x.svg", x_axis="passos")

    def test_rotulo_da_serie(self):
        self.assertEqual(rotulo_da_serie(Path("runs/a3c-catch-s0/metrics.csv")), "a3c-catch-s0")
        self.assertEqual(rotulo_da_serie(Path("runs/dqn.csv")), "dqn")


if __name__ == "__main__":
    unittest.main()
