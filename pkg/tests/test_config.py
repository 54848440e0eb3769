import math

import numpy as np
import pytest

from hopfkit.config import (DEFAULT_SEED, build_problem, load_config, options_from,
                            parse_config)
from hopfkit.conjugate import view_for
from hopfkit.errors import CatalogError, ConfigurationError
from hopfkit.expressions import Expression, variable_names
from hopfkit.hopf import SolveOptions, evaluate
from hopfkit.output import Records, Table, fmt, render

# expressions


def test_expression_value_and_gradient():
    H = Expression("-ln(1 + p^2)", 1)
    p = np.array([[0.0], [1.0], [2.0]])
    assert H(p) == pytest.approx([0.0, -math.log(2), -math.log(5)])
    assert H.grad(p).ravel() == pytest.approx([0.0, -1.0, -0.8])


def test_expression_two_dimensional():
    f = Expression("x1^2/2 + 3*x2", 2, letters=("p", "x"))
    z = np.array([[1.0, 2.0], [0.0, -1.0]])
    assert f(z) == pytest.approx([6.5, -3.0])
    assert f.grad(z) == pytest.approx(np.array([[1.0, 3.0], [0.0, 3.0]]))


def test_expression_constant_broadcasts():
    f = Expression("2*pi", 1)
    assert f(np.zeros((4, 1))) == pytest.approx([2 * math.pi] * 4)
    assert f.grad(np.zeros((4, 1))).shape == (4, 1)


def test_expression_functions():
    f = Expression("max(abs(p), 1) + sqrt(exp(p))", 1)
    assert f(np.array([[-2.0]]))[0] == pytest.approx(2 + math.exp(-1))


@pytest.mark.parametrize("text", ["__import__('os')", "p.real", "0x10 * p", "p[0]", "1j*p",
                                  "lambda: 1", "q + 1", "1_000 * p", "p; p", ""])
def test_expression_whitelist_rejects(text):
    with pytest.raises(ConfigurationError):
        Expression(text, 1)


def test_variable_names():
    assert variable_names("p", 1) == ["p"]
    assert variable_names("x", 3) == ["x1", "x2", "x3"]


# config


def test_parse_config_defaults():
    cfg = parse_config({"problem": "zero-h"})
    assert cfg.seed == DEFAULT_SEED and cfg.workers is None and cfg.defaults == {}


@pytest.mark.parametrize("raw", [[1, 2], {"problme": "zero-h"}, {"seed": "abc"},
                                 {"options": {"grid_nodes": 2}},
                                 {"options": {"singleton_tol": 0}},
                                 {"options": {"nope": 1}}])
def test_parse_config_rejects(raw):
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_options_from_overrides():
    opts = options_from({"grid_nodes": 101, "cluster_tol": 1e-3, "band_rel": None})
    assert opts.grid_nodes == 101 and opts.cluster_tol == 1e-3
    assert opts.band_rel == SolveOptions().band_rel


def test_load_config_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("problem: {catalog: log-example}\nseed: 7\nworkers: 2\n"
                    "options: {grid_nodes: 1001}\ndefaults: {window: [-1, 1]}\n")
    cfg = load_config(path)
    assert (cfg.seed, cfg.workers, cfg.options, cfg.defaults) == (
        7, 2, {"grid_nodes": 1001}, {"window": [-1, 1]})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_build_problem_catalog_forms():
    assert build_problem("sqrt-example").name == "sqrt-example"
    spec = build_problem({"catalog": "linear-sigma", "dim": 2, "params": {"a": [3.0, 4.0]}})
    assert spec.dim == 2 and spec.lipschitz_bound == pytest.approx(5.0)
    with pytest.raises(CatalogError):
        build_problem("nope")
    with pytest.raises(ConfigurationError):
        build_problem(None)
    with pytest.raises(ConfigurationError):
        build_problem({"catalog": "zero-h", "colour": "red"})


def test_build_expression_problem_matches_catalog():
    spec = build_problem({"hamiltonian": "-ln(1 + p^2)", "initial": "x^2/2", "lipschitz": 4,
                          "horizon": 3, "semiconvexity": 2, "semiconcavity": 1})
    # x^2/2 everywhere agrees with the catalog core on the maximizers involved here
    ell = evaluate(spec, view_for(spec), 2.0, 0.4)
    assert ell.singleton and ell.representatives.ravel() == pytest.approx([2.0], abs=1e-4)
    assert view_for(spec).mode == "numeric"


def test_build_expression_problem_needs_fields():
    with pytest.raises(ConfigurationError):
        build_problem({"hamiltonian": "p^2", "initial": "x^2"})


# output


@pytest.mark.parametrize("v, s", [(None, "none"), (True, "true"), (np.bool_(False), "false"),
                                  (3, "3"), (-0.0, "0"), (1 / 3, "0.333333333333"),
                                  (math.inf, "inf"), (-math.inf, "-inf"), (math.nan, "nan"),
                                  ([1.0, 2.5], "[1,2.5]"), (np.array([0.1]), "[0.1]"),
                                  ("abc", "abc")])
def test_fmt(v, s):
    assert fmt(v) == s


def test_render_records():
    rec = Records([("u", 0.045), ("singleton", True)])
    rec.add("x", [0.3])
    assert render(rec, "kv") == "u=0.045\nsingleton=true\nx=[0.3]\n"
    assert render(rec, "csv") == 'key,value\nu,0.045\nsingleton,true\nx,[0.3]\n'
    assert render(rec, "text").splitlines()[0] == "u          0.045"


def test_render_table():
    tab = Table(["t", "x1"], [[0.5, 1.0], [1.0, -2.0]])
    assert render(tab, "csv") == "t,x1\n0.5,1\n1,-2\n"
    assert render(tab, "kv") == "0.t=0.5\n0.x1=1\n1.t=1\n1.x1=-2\n"


def test_render_quotes_commas():
    assert render(Records([("w", [1, 2])]), "csv") == 'key,value\nw,"[1,2]"\n'
