import csv
import json
import math

import numpy as np
import pytest

from husimi import cli, fock, ordering
from husimi.errors import ConfigError, ParseError


def run(tmp_path, *argv):
    return cli.main([argv[0], "--out", str(tmp_path), *argv[1:]])


def read_grid(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def manifest(path):
    return json.loads(path.read_text())


def test_dist_coherent_q(tmp_path):
    assert run(tmp_path, "dist", "--state", "coherent 1+0i", "--kind", "q") == 0
    header, data = read_grid(tmp_path / "q.csv")
    assert header == ["re_alpha", "im_alpha", "value"]
    top = data[np.argmax(data[:, 2])]
    assert top[2] == pytest.approx(1 / math.pi, abs=1e-9)
    assert (top[0], top[1]) == pytest.approx((1.0, 0.0), abs=1e-12)
    meta = manifest(tmp_path / "q.json")
    assert meta["kind"] == "q" and meta["measure"] == "alpha"
    assert meta["config"]["dim"] == 32 and meta["units"] == {"hbar": 1.0, "mass": 1.0, "omega": 1.0}


def test_dist_wigner_negativity(tmp_path):
    assert run(tmp_path, "dist", "--state", "fock 1", "--kind", "wigner", "--measure", "qp") == 0
    assert manifest(tmp_path / "wigner.json")["min"] == pytest.approx(-1 / math.pi, abs=1e-9)


def test_dist_vacuum_integral(tmp_path):
    assert run(tmp_path, "dist", "--state", "fock 0") == 0
    assert manifest(tmp_path / "q.json")["integral"] == pytest.approx(1, abs=1e-6)


def test_dist_husimi(tmp_path):
    assert run(tmp_path, "dist", "--state", "fock 0", "--kind", "husimi") == 0
    meta = manifest(tmp_path / "husimi.json")
    assert meta["max"] == pytest.approx(1 / math.pi, abs=1e-9)
    assert meta["kappa"] == 1.0


def test_dist_is_deterministic(tmp_path):
    argv = ("dist", "--state", "mixture 0.3 (random levels=5) + 0.7 (coherent 0.5-0.5i)", "--seed", "7")
    assert run(tmp_path, *argv) == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert run(tmp_path, *argv) == 0
    assert first == {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert run(tmp_path, *argv[:-1], "8") == 0
    assert (tmp_path / "q.csv").read_bytes() != first["q.csv"]


def expect_rows(capsys):
    out = capsys.readouterr().out.split("\n")
    return {line.split()[0]: float(line.split()[1]) for line in out if line.strip()}


def test_expect_gap_q_squared(tmp_path, capsys):
    assert run(tmp_path, "expect", "--state", "fock 0", "--poly", "q^2", "--pipeline", "both") == 0
    rows = expect_rows(capsys)
    assert rows["trace"] == pytest.approx(0.5, abs=1e-9)
    assert rows["phase_space"] == pytest.approx(1.0, abs=1e-6)
    assert rows["discrepancy"] == pytest.approx(-0.5, abs=1e-6)


def test_expect_linear_has_no_gap(tmp_path, capsys):
    assert run(tmp_path, "expect", "--state", "fock 0", "--poly", "q") == 0
    assert expect_rows(capsys)["discrepancy"] == pytest.approx(0, abs=1e-9)


def test_expect_q2p2_matches_rewrite_oracle(tmp_path, capsys):
    assert run(tmp_path, "expect", "--state", "fock 0", "--poly", "q^2*p^2") == 0
    rows = expect_rows(capsys)
    sp = fock.ModeSpace()
    vac = fock.pure_density(fock.number_state(sp, 0))
    f = ordering.PhasePolynomial.monomial(q=2, p=2)
    weyl = ordering.expectation_trace(vac, ordering.to_antinormal(ordering.weyl_quantize(f))).real
    berezin = ordering.expectation_trace(vac, ordering.berezin_quantize(f)).real
    assert rows["trace"] == pytest.approx(weyl, abs=1e-9)
    assert rows["discrepancy"] == pytest.approx(weyl - berezin, abs=1e-5)


@pytest.mark.parametrize("pipeline", ["weyl", "berezin"])
def test_expect_single_pipelines_are_self_consistent(tmp_path, capsys, pipeline):
    assert run(tmp_path, "expect", "--state", "coherent 0.3+0.4i", "--poly", "q*p + p^2", "--pipeline", pipeline) == 0
    assert expect_rows(capsys)["discrepancy"] == pytest.approx(0, abs=1e-5)


def test_parse_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "expect", "--state", "fock 0", "--poly", "q^2 + *p") == 2
    assert "at character 6" in capsys.readouterr().err


def test_guard_exit_code(tmp_path, capsys):
    assert run(tmp_path, "dist", "--state", "coherent 6") == 3
    assert "TruncationError" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    assert run(tmp_path, "dist", "--state", "fock 0", "--grid-samples", "120") == 2
    assert run(tmp_path, "dist", "--state", "fock 0", "--hbar", "-1") == 2
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "dist", "--state", "fock 0", "--measure", "xy")
    assert info.value.code == 2


def test_marginals_export(tmp_path):
    assert run(tmp_path, "marginals", "--state", "fock 0", "--source", "q", "--measure", "qp") == 0
    header, data = read_grid(tmp_path / "q_density.csv")
    assert header == ["q", "value"]
    assert manifest(tmp_path / "q_marginals.json")["density_at_0"] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-6)
    assert run(tmp_path, "marginals", "--state", "fock 0", "--source", "psi") == 0
    assert manifest(tmp_path / "psi_marginals.json")["density_at_0"] == pytest.approx(1 / math.sqrt(math.pi), abs=1e-6)


def test_evolve_rotation(tmp_path):
    assert run(tmp_path, "evolve", "--state", "coherent 1", "--t-final", repr(math.pi / 2), "--steps", "4") == 0
    meta = manifest(tmp_path / "evolve.json")
    final = meta["steps"][-1]["centroid"]
    assert (final["re"], final["im"]) == pytest.approx((0.0, -1.0), abs=1e-6)
    assert len(list(tmp_path.glob("q_step_*.csv"))) == 5


def test_evolve_number_state_grids_identical(tmp_path):
    assert run(tmp_path, "evolve", "--state", "fock 2", "--t-final", "3", "--steps", "3") == 0
    grids = [read_grid(tmp_path / f"q_step_{k:04d}.csv")[1] for k in range(4)]
    for g in grids[1:]:
        np.testing.assert_allclose(g, grids[0], atol=1e-15)


def test_evolve_continuity_report(tmp_path, capsys):
    argv = ("evolve", "--state", "coherent 1", "--t-final", "0.2", "--steps", "4", "--continuity", "--no-grids")
    assert run(tmp_path, *argv) == 0
    out = capsys.readouterr().out
    assert "continuity residual" in out and "ratio" in out
    cont = manifest(tmp_path / "evolve.json")["continuity"]
    assert cont["order_ratio"] == pytest.approx(4, rel=0.2)


def test_evolve_kerr_and_rejections(tmp_path):
    assert run(tmp_path, "evolve", "--state", "coherent 1", "--hamiltonian", "kerr chi=0.1",
               "--t-final", "1", "--steps", "2", "--no-grids") == 0
    assert run(tmp_path, "evolve", "--state", "fock 0", "--hamiltonian", "poly a*a",
               "--t-final", "1") == 2
    assert run(tmp_path, "evolve", "--state", "fock 0", "--hamiltonian", "poly a'*a + 0.5*a*a'",
               "--t-final", "1", "--steps", "2") == 0


def write_desc(tmp_path, desc):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(desc))
    return str(path)


def test_measure_born_table(tmp_path):
    path = write_desc(tmp_path, {"amplitudes": [0.6, 0.8], "separation": 8})
    assert run(tmp_path, "measure", path) == 0
    res = manifest(tmp_path / "measure.json")
    assert res["max_error"] < 2e-3
    assert [row["born"] for row in res["outcomes"]] == pytest.approx([0.36, 0.64])


def test_measure_single_amplitude(tmp_path):
    assert run(tmp_path, "measure", write_desc(tmp_path, {"amplitudes": [1]})) == 0
    assert manifest(tmp_path / "measure.json")["outcomes"][0]["P"] == pytest.approx(1, abs=1e-3)


def test_measure_condition(tmp_path):
    path = write_desc(tmp_path, {"amplitudes": ["0.6", "0.8i"]})
    assert run(tmp_path, "measure", path, "--condition", "2") == 0
    assert manifest(tmp_path / "measure.json")["collapse"]["sup_error"] < 1e-3


def test_measure_random_and_explicit_regions(tmp_path):
    path = write_desc(tmp_path, {"amplitudes": "random", "outcomes": 3})
    assert run(tmp_path, "measure", path, "--seed", "4") == 0
    first = manifest(tmp_path / "measure.json")["amplitudes"]
    assert run(tmp_path, "measure", path, "--seed", "4") == 0
    assert manifest(tmp_path / "measure.json")["amplitudes"] == first
    regions = [{"centre": [-5, 0], "radius": 3}, {"centre": [5, 0], "radius": 3}]
    path = write_desc(tmp_path, {"amplitudes": [[0, 0.6], [0.8, 0]], "regions": regions})
    assert run(tmp_path, "measure", path) == 0
    assert manifest(tmp_path / "measure.json")["max_error"] < 2e-3


def test_measure_descriptor_errors(tmp_path):
    assert run(tmp_path, "measure", write_desc(tmp_path, {"amplitudes": [0.6, 0.8], "separation": 6})) == 3
    assert run(tmp_path, "measure", write_desc(tmp_path, {"amplitudes": [0.6, 0.7]})) == 2
    assert run(tmp_path, "measure", write_desc(tmp_path, {"amplitude": [1]})) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run(tmp_path, "measure", str(bad)) == 2


def test_overlap_command(tmp_path, capsys):
    assert run(tmp_path, "overlap", "--levels", "0", "1") == 0
    assert manifest(tmp_path / "overlap.json")["overlap"] == pytest.approx(1 - math.exp(-1), abs=1e-3)
    assert run(tmp_path, "overlap", "--levels", "2", "2") == 3


def test_state_spec_language():
    sp = fock.ModeSpace(truncation=6)
    rho = cli.parse_state("superpose 1 fock 0 + 1i fock 1", sp)
    np.testing.assert_allclose(rho.matrix[:2, :2], [[0.5, -0.5j], [0.5j, 0.5]], atol=1e-15)
    mix = cli.parse_state("mixture 1 (fock 0) + 3 (superpose 1 fock 1 + -1 fock 2)", sp)
    assert np.trace(mix.matrix).real == pytest.approx(1)
    assert mix.matrix[0, 0].real == pytest.approx(0.25)
    assert mix.matrix[1, 2].real == pytest.approx(-0.375)
    assert cli.parse_complex("-2i") == -2j and cli.parse_complex("1+0.5i") == 1 + 0.5j
    for bad in ("squeezed 1", "fock x", "mixture 1 (fock 0", "superpose fock 0", ""):
        with pytest.raises(ParseError):
            cli.parse_state(bad, sp)
    with pytest.raises(ConfigError):
        cli.parse_state("mixture -1 (fock 0) + 1 (fock 1)", sp)
