import json

import numpy as np
import pytest

from convexpmf.distributions import TrueDistribution, parse_distribution
from convexpmf.harness import (
    ALL_FUNCTIONALS,
    ExperimentSpec,
    HarnessError,
    result_rows,
    rows_to_csv,
    rows_to_json,
    run_campaign,
    run_experiment,
    standard_grid,
    thread_count,
)


def small_spec(dist="geom:0.5", replicates=30, sizes=(10, 50), seed=3):
    return ExperimentSpec(
        distribution=parse_distribution(dist),
        sample_sizes=sizes,
        replicates=replicates,
        seed=seed,
    )


class TestSpecValidation:
    def test_rejects_zero_replicates(self):
        with pytest.raises(ValueError):
            ExperimentSpec(parse_distribution("geom:0.5"), replicates=0)

    def test_rejects_bad_sample_size(self):
        with pytest.raises(ValueError):
            ExperimentSpec(parse_distribution("geom:0.5"), sample_sizes=(0,))

    def test_rejects_unknown_functional(self):
        with pytest.raises(ValueError):
            ExperimentSpec(parse_distribution("geom:0.5"), functionals=("mode",))


class TestRunExperiment:
    def test_cells_cover_the_grid(self):
        spec = small_spec()
        result = run_experiment(spec)
        assert set(result.cells) == {
            (n, est, f)
            for n in spec.sample_sizes
            for est in ("empirical", "constrained")
            for f in ALL_FUNCTIONALS
        }
        for cell in result.cells.values():
            assert np.isfinite(cell.value)
            assert np.isfinite(cell.mc_stderr)

    def test_no_dominance_violations_or_cert_failures(self):
        for dist in ("geom:0.5", "tri:5", "pois:1.0"):
            result = run_experiment(small_spec(dist))
            assert result.dominance_violations == 0
            assert result.certificate_failures == 0

    def test_deterministic_across_runs(self):
        a = run_experiment(small_spec())
        b = run_experiment(small_spec())
        for key in a.cells:
            assert a.cells[key].value == b.cells[key].value
            assert a.cells[key].mc_stderr == b.cells[key].mc_stderr

    def test_thread_count_does_not_change_results(self):
        spec = small_spec(replicates=20, sizes=(25,))
        a = run_experiment(spec, threads=1)
        b = run_experiment(spec, threads=4)
        assert rows_to_csv(result_rows(a)) == rows_to_csv(result_rows(b))

    def test_seed_changes_results(self):
        a = run_experiment(small_spec(seed=3))
        b = run_experiment(small_spec(seed=4))
        assert any(
            a.cells[k].value != b.cells[k].value for k in a.cells
        )

    def test_keep_replicates(self):
        spec = small_spec(replicates=10, sizes=(15,))
        result = run_experiment(spec, keep_replicates=True)
        assert result.replicates is not None
        assert len(result.replicates) == 10
        assert all(rec.n == 15 for rec in result.replicates)
        assert run_experiment(spec).replicates is None

    def test_convex_truth_nonconvex_fraction_sane(self):
        result = run_experiment(small_spec("tri:2", replicates=50, sizes=(10,)))
        frac = result.nonconvex_fraction[10]
        assert 0.0 <= frac <= 1.0

    def test_degenerate_truth_gives_zero_losses(self):
        # every sample from tri:1 is the point mass itself
        result = run_experiment(small_spec("tri:1", replicates=5, sizes=(8,)))
        for est in ("empirical", "constrained"):
            assert result.cells[(8, est, "l2")].value == 0.0
            assert result.cells[(8, est, "tv")].value == 0.0

    def test_nonconvex_truth_uses_projected_reference(self):
        # poisson(1.0) is not convex; the dominance reference is then the
        # projection of the truth, and the counter must still stay at zero
        result = run_experiment(small_spec("pois:1.0", replicates=40, sizes=(30,)))
        assert result.dominance_violations == 0


class TestStandardGrid:
    def test_nine_distributions(self):
        specs = standard_grid(replicates=7, seed=1)
        assert len(specs) == 9
        kinds = [s.distribution.kind for s in specs]
        assert kinds.count("geometric") == 3
        assert kinds.count("triangular") == 3
        assert kinds.count("poisson") == 3
        assert all(s.replicates == 7 and s.seed == 1 for s in specs)

    def test_grid_has_both_regimes(self):
        from convexpmf.distributions import materialize
        from convexpmf.pmf import is_convex

        specs = standard_grid()
        convexities = [is_convex(materialize(s.distribution).probs) for s in specs]
        assert any(convexities)
        assert not all(convexities)


class TestRows:
    def test_row_layout(self):
        result = run_experiment(small_spec(replicates=5, sizes=(12,)))
        rows = result_rows(result)
        assert len(rows) == 2 * len(ALL_FUNCTIONALS)
        assert {r.estimator for r in rows} == {"empirical", "constrained"}
        assert all(r.distribution == "geom" and r.n == 12 for r in rows)

    def test_csv_shape(self):
        rows = result_rows(run_experiment(small_spec(replicates=5, sizes=(12,))))
        text = rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "distribution,param,n,estimator,functional,value,mc_stderr"
        assert len(lines) == 1 + len(rows)
        for line in lines[1:]:
            parts = line.split(",")
            assert len(parts) == 7
            float(parts[5])
            float(parts[6])

    def test_json_schema(self):
        rows = result_rows(run_experiment(small_spec(replicates=5, sizes=(12,))))
        payload = json.loads(rows_to_json(rows))
        assert payload["schema_version"] == 1
        assert len(payload["rows"]) == len(rows)
        first = payload["rows"][0]
        assert set(first) == {
            "distribution",
            "param",
            "n",
            "estimator",
            "functional",
            "value",
            "mc_stderr",
        }

    def test_csv_round_trips_floats_exactly(self):
        rows = result_rows(run_experiment(small_spec(replicates=5, sizes=(12,))))
        text = rows_to_csv(rows)
        for row, line in zip(rows, text.strip().split("\n")[1:]):
            assert float(line.split(",")[5]) == row.value


class TestCampaign:
    def test_runs_multiple_specs(self):
        specs = [small_spec("geom:0.5", 4, (10,)), small_spec("tri:2", 4, (10,))]
        rows = run_campaign(specs)
        assert len(rows) == 2 * 2 * len(ALL_FUNCTIONALS)

    def test_collects_failures(self):
        from types import SimpleNamespace

        good = small_spec("geom:0.5", 3, (10,))
        # duck-typed spec that passes no validation: the failure surfaces
        # inside run_experiment and must not take the good spec down
        bad = SimpleNamespace(
            distribution=TrueDistribution("geometric", 0.5),
            sample_sizes=(5,),
            replicates=3,
            seed=0,
            functionals=("l2", "bogus"),
        )
        with pytest.raises(HarnessError) as err:
            run_campaign([good, bad])
        assert len(err.value.failures) == 1
        assert err.value.failures[0][0] == 1
        # rows from the good spec survive on the exception object
        assert len(err.value.rows) == 2 * len(ALL_FUNCTIONALS)


class TestThreadCount:
    def test_override_wins(self):
        assert thread_count(6) == 6
        assert thread_count(0) == 1

    def test_env_parsing(self, monkeypatch):
        monkeypatch.setenv("CONVEXPMF_THREADS", "3")
        assert thread_count() == 3
        monkeypatch.setenv("CONVEXPMF_THREADS", "junk")
        assert thread_count() == 1
        monkeypatch.delenv("CONVEXPMF_THREADS")
        assert thread_count() == 1
