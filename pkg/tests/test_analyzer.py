"""
Tests for the run-config analyzer and loader
"""

import numpy as np
import pytest

from parataa.anderson import DEFAULT_LAMBDA, Variant
from parataa.config import load_config, load_config_text
from parataa.engine import DEFAULT_TAU
from parataa.errors import ConfigError, ConfigSyntaxError, ConfigValidationError
from parataa.schedule import build_beta_schedule
from parataa.score import GaussianMixtureModel, GuidedModel

BASE = """\
[schedule]
T = 8

[model]
means = [[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]]
"""


def load(source, base_dir=None):
    return load_config_text(source, "test.cfg", base_dir)


def problems(source, base_dir=None):
    """Helper returning every problem message of an invalid config."""
    with pytest.raises(ConfigValidationError) as info:
        load(source, base_dir)
    return [p.message for p in info.value.problems]


def has(messages, text):
    return any(text in m for m in messages)


class TestValidConfigs:
    """Test cases for configs that load."""

    def test_defaults(self):
        """Test a minimal config fills every default."""
        config = load(BASE)
        assert config.T == 8 and config.d == 4
        assert config.schedule.eta == 0.0
        solver = config.solver
        assert solver.variant is Variant.TAA
        assert (solver.k, solver.m) == (1, 3)
        assert solver.tau == DEFAULT_TAU and solver.lam == DEFAULT_LAMBDA
        assert solver.safeguard and solver.w is None and solver.s_max is None
        assert config.run.seed_list() == [0]
        assert config.compare.variants == ["FP", "AA", "AA_PLUS", "TAA"]
        assert config.sweep.m_grid == [1, 2, 3]
        assert config.guidance is None
        assert config.source == "test.cfg"

    @pytest.mark.parametrize("d, m", [(1, 1), (2, 1), (3, 2), (8, 3)])
    def test_history_default_follows_dimension(self, d, m):
        """Test the default m stays below d."""
        source = f"[schedule]\nT = 8\n[model]\ncomponents = 2\ndim = {d}\n"
        assert load(source).solver.m == m

    def test_full_solver_section(self):
        """Test every solver key is carried over."""
        config = load(BASE + "[solver]\nvariant = AA_PLUS\nk = 2\nm = 2\ntau = 0.01\n"
                      "lambda = 0.0\nw = 4\ns_max = 20\nT_init = 6\nsafeguard = false\n"
                      "[run]\nthreads = 3\nseeds = 2\nbase_seed = 5\n")
        solver = config.solver
        assert solver.variant is Variant.AA_PLUS
        assert (solver.k, solver.m, solver.w, solver.s_max, solver.T_init) == (2, 2, 4, 20, 6)
        assert solver.tau == 0.01 and solver.lam == 0.0
        assert not solver.safeguard
        assert solver.workers == 3
        assert config.run.seed_list() == [5, 6]

    def test_integer_accepted_as_float(self):
        """Test integer literals convert for float keys."""
        config = load(BASE + "[solver]\ntau = 0\n")
        assert config.solver.tau == 0.0 and isinstance(config.solver.tau, float)

    def test_fixed_point_may_use_large_history(self):
        """Test m >= d is allowed when no history is used."""
        assert load(BASE + "[solver]\nvariant = FP\nm = 4\n").solver.m == 4

    def test_random_mixture(self):
        """Test seeded random means."""
        config = load("[schedule]\nT = 8\n[model]\ncomponents = 3\ndim = 5\nmodel_seed = 7\n")
        assert config.d == 5 and config.model.K == 3
        means = config.model.component_means()
        assert means.shape == (3, 5)
        assert np.array_equal(means, config.model.component_means())

    def test_builds_models(self):
        """Test the model and guidance specs produce score models."""
        config = load(BASE + "[guidance]\nscale = 2.0\nmeans = [[0, 0, 0, 1]]\n")
        schedule = build_beta_schedule(config.T)
        model = config.build_model(schedule)
        assert isinstance(model, GuidedModel)
        assert config.guidance.scale == 2.0
        assert isinstance(load(BASE).build_model(schedule), GaussianMixtureModel)

    def test_compare_labels(self):
        """Test swept and unsafeguarded labels are valid comparisons."""
        config = load(BASE + '[compare]\nvariants = ["FP+", TAA-NOSG, AA]\n'
                      "fp_plus_k_grid = [1, 2, 4]\n")
        assert config.compare.variants == ["FP+", "TAA-NOSG", "AA"]
        assert config.compare.fp_plus_k_grid == [1, 2, 4]

    def test_default_k_grid(self):
        """Test powers of two below T then T."""
        assert load(BASE).default_k_grid() == [1, 2, 4, 8]

    def test_paths_resolve_against_base(self, tmp_path):
        """Test relative output paths land next to the config."""
        config = load(BASE + '[output]\nreport_csv = "report.csv"\n', tmp_path)
        assert config.output.report_csv == tmp_path / "report.csv"


class TestStructureErrors:
    """Test cases for sections and keys."""

    def test_unknown_section(self):
        """Test an unknown section is reported with its position."""
        with pytest.raises(ConfigValidationError) as info:
            load(BASE + "\n[solvr]\nk = 2\n")
        err = info.value.problems[0]
        assert "unknown section [solvr]" in err.message
        assert (err.line, err.column) == (7, 1)

    def test_unknown_key(self):
        """Test an unknown key."""
        assert has(problems(BASE + "[solver]\norder = 2\n"), "[solver] unknown key 'order'")

    def test_duplicate_key(self):
        """Test a key set twice."""
        assert has(problems(BASE + "[solver]\nk = 2\nk = 3\n"), "duplicate key 'k'")

    def test_duplicate_section(self):
        """Test a section given twice."""
        assert has(problems(BASE + "[run]\nseeds = 1\n[run]\nseeds = 2\n"),
                   "section [run] already defined")

    def test_missing_sections(self):
        """Test required sections without a position."""
        with pytest.raises(ConfigValidationError) as info:
            load("[run]\nseeds = 2\n")
        missing = [p for p in info.value.problems if "missing required section" in p.message]
        assert [p.message for p in missing] == ["missing required section [schedule]",
                                                "missing required section [model]"]
        assert all(p.line is None for p in missing)

    def test_missing_required_key(self):
        """Test T is required."""
        assert has(problems("[schedule]\neta = 0.5\n[model]\ncomponents = 2\ndim = 3\n"),
                   "[schedule] missing required key 'T'")

    def test_all_problems_collected(self):
        """Test several problems are reported together."""
        with pytest.raises(ConfigValidationError) as info:
            load(BASE + "[solver]\nk = 0\norder = 2\n[run]\nseeds = 0\n")
        err = info.value
        assert len(err.problems) == 3
        assert err.message.endswith("(and 2 more)")
        assert isinstance(err, ConfigError)

    def test_syntax_errors_pass_through(self):
        """Test syntax errors are not turned into validation errors."""
        with pytest.raises(ConfigSyntaxError):
            load("[schedule\nT = 8\n")


class TestValueErrors:
    """Test cases for value types and ranges."""

    @pytest.mark.parametrize("entry, text", [
        ("T = 8.5", "[schedule] T: expected an integer, got 8.5"),
        ('T = "8"', "[schedule] T: expected an integer, got '8'"),
        ("T = [8]", "[schedule] T: expected a single value"),
        ("T = 0", "[schedule] T must be at least 1, got 0"),
        ("eta = 1.5", "[schedule] eta must lie in [0.0, 1.0], got 1.5"),
        ("beta_end = 1.0", "[schedule] beta_end must lie strictly between 0 and 1"),
    ])
    def test_schedule_values(self, entry, text):
        """Test schedule keys are typed and ranged."""
        source = f"[schedule]\nT = 8\n{entry}\n[model]\ncomponents = 2\ndim = 3\n"
        if entry.startswith("T ="):
            source = source.replace("T = 8\n", "", 1)
        assert has(problems(source), text)

    def test_beta_order(self):
        """Test beta_start must not exceed beta_end."""
        assert has(problems(BASE.replace("T = 8", "T = 8\nbeta_start = 0.03")),
                   "beta_start 0.03 exceeds beta_end")

    @pytest.mark.parametrize("entry, text", [
        ("k = 9", "k must lie in 1..8"),
        ("w = 12", "w must lie in 1..8"),
        ("T_init = 9", "T_init must lie in 1..8"),
        ("T_init = 0", "T_init must be at least 1"),
        ("m = 4", "history size m=4 must be smaller than the data dimension d=4"),
        ("tau = -1.0", "tau must be at least 0.0"),
        ("safeguard = 1", "expected true or false"),
        ("variant = 3", "expected a name"),
        ('variant = "FP+"', "only valid in [compare] variants"),
        ("variant = TAA-NOSG", "only valid in [compare] variants"),
        ("variant = ANDERSON", "unknown variant 'ANDERSON'"),
    ])
    def test_solver_values(self, entry, text):
        """Test solver keys against T and d."""
        assert has(problems(BASE + f"[solver]\n{entry}\n"), text)

    def test_bad_compare_label(self):
        """Test unknown labels in comparisons."""
        assert has(problems(BASE + "[compare]\nvariants = [FP, NEWTON]\n"),
                   "[compare] variants: unknown variant 'NEWTON'")

    def test_empty_list(self):
        """Test grids must not be empty."""
        assert has(problems(BASE + "[sweep]\nk_grid = []\n"),
                   "expected a non-empty list of integers")

    def test_grids_within_T(self):
        """Test grid entries beyond T."""
        msgs = problems(BASE + "[sweep]\nk_grid = [1, 16]\nm_grid = [1, 4]\n"
                        "[compare]\nfp_plus_k_grid = [32]\n")
        assert has(msgs, "[sweep] k_grid entries [16] exceed T=8")
        assert has(msgs, "[sweep] m_grid entries [4] must be smaller than the data dimension")
        assert has(msgs, "[compare] fp_plus_k_grid entries [32] exceed T=8")


class TestMixtureErrors:
    """Test cases for mixture sections."""

    @pytest.mark.parametrize("body, text", [
        ("means = [[0.0, 1.0]]\ncomponents = 2", "give either means or components"),
        ("s0_sq = 1.0", "needs means or components"),
        ("components = 2", "dim is required"),
        ("means = [[0.0, 1.0]]\ndim = 3", "dim 3 does not match means of dimension 2"),
        ("means = [[0.0, 1.0]]\nweights = [1.0, 2.0]", "2 weights for 1 components"),
        ("means = [[0.0, 1.0]]\nweights = [-1.0]", "mixture weights must be positive"),
        ("means = [[0.0, 1.0], [2.0]]", "expected a list of equal-length number lists"),
        ("means = 3", "expected a list"),
    ])
    def test_model(self, body, text):
        """Test mixture definitions."""
        assert has(problems(f"[schedule]\nT = 8\n[model]\n{body}\n"), text)

    def test_guidance_dimension(self):
        """Test guidance must live in the model's space."""
        assert has(problems(BASE + "[guidance]\nscale = 1.0\nmeans = [[0.0, 0.0]]\n"),
                   "[guidance] dimension 2 does not match [model] dimension 4")

    def test_guidance_scale_required(self):
        """Test the guidance scale is required."""
        assert has(problems(BASE + "[guidance]\nmeans = [[0.0, 0.0, 0.0, 0.0]]\n"),
                   "[guidance] missing required key 'scale'")


class TestOutputPaths:
    """Test cases for output and warm-start paths."""

    def test_missing_directory(self, tmp_path):
        """Test outputs need an existing directory."""
        msgs = problems(BASE + '[output]\nreport_csv = "nope/report.csv"\n', tmp_path)
        assert has(msgs, "[output] report_csv: directory")

    def test_missing_init_trajectory(self, tmp_path):
        """Test warm starts need an existing file."""
        msgs = problems(BASE + '[output]\ninit_trajectory = "absent.bin"\n', tmp_path)
        assert has(msgs, "[output] init_trajectory: no such file")

    def test_warm_start_single_seed(self, tmp_path):
        """Test a warm start with several seeds is rejected at init_trajectory."""
        (tmp_path / "traj.bin").write_bytes(b"")
        source = BASE + '[run]\nseeds = 3\n[output]\ninit_trajectory = "traj.bin"\n'
        with pytest.raises(ConfigValidationError) as info:
            load(source, tmp_path)
        [problem] = info.value.problems
        assert "init_trajectory needs [run] seeds = 1, got 3" in problem.message
        assert problem.line == 9
        config = load(BASE + '[output]\ninit_trajectory = "traj.bin"\n', tmp_path)
        assert config.run.seeds == 1


class TestLoadConfig:
    """Test cases for loading from disk."""

    def test_missing_file(self, tmp_path):
        """Test a missing config file."""
        with pytest.raises(ConfigError) as info:
            load_config(tmp_path / "absent.cfg")
        assert "config file not found" in info.value.message

    def test_loads_relative_to_file(self, tmp_path):
        """Test paths resolve against the config file's directory."""
        (tmp_path / "runs").mkdir()
        path = tmp_path / "runs" / "exp.cfg"
        path.write_text(BASE + '[output]\nsummary_json = "summary.json"\n', encoding="utf-8")
        config = load_config(path)
        assert config.output.summary_json == tmp_path / "runs" / "summary.json"
        assert config.source == str(path)
