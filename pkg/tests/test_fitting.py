import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltaproc import (
    CoverageError,
    FitConditions,
    SingularFitError,
    TimePartition,
    TrajectoryParseError,
    TrajectoryRecord,
    estimate_derivatives,
    evaluate_rhs,
    fit_model,
    fit_piece,
    fit_piece_general,
    ingest_trajectories,
    write_trajectories,
)


def scalar_record(t, x, u, dx=None, label="positive", rec_id="r"):
    t = np.asarray(t, dtype=float)
    return TrajectoryRecord(
        id=rec_id,
        label=label,
        t=t,
        x=np.asarray(x, dtype=float).reshape(-1, 1),
        u=np.asarray(u, dtype=float).reshape(-1, 1),
        dx=None if dx is None else np.asarray(dx, dtype=float).reshape(-1, 1),
    )


class TestEstimateDerivatives:
    def test_linear(self):
        rec = scalar_record([0.0, 0.1, 0.2], [0.0, 0.1, 0.2], [1.0] * 3)
        out = estimate_derivatives(rec)
        np.testing.assert_allclose(out.dx[:, 0], 1.0, atol=1e-12)

    def test_quadratic_exact(self):
        t = np.array([0.0, 0.1, 0.2])
        rec = scalar_record(t, t**2, [1.0] * 3)
        out = estimate_derivatives(rec)
        np.testing.assert_allclose(out.dx[:, 0], [0.0, 0.2, 0.4], atol=1e-13)

    def test_tan_derivative(self):
        t = np.arange(0.495, 0.5055, 1e-3)
        rec = scalar_record(t, np.tan(t), np.ones_like(t))
        out = estimate_derivatives(rec)
        i = np.argmin(np.abs(t - 0.5))
        assert out.dx[i, 0] == pytest.approx(1.0 / np.cos(0.5) ** 2, abs=1e-4)

    def test_too_few_samples(self):
        rec = scalar_record([0.0, 0.1], [0.0, 0.1], [1.0, 1.0])
        with pytest.raises(ValueError):
            estimate_derivatives(rec)

    def test_existing_derivatives_untouched(self):
        rec = scalar_record([0, 0.1, 0.2], [0, 1, 4], [1] * 3, dx=[7, 7, 7])
        out = estimate_derivatives(rec)
        np.testing.assert_allclose(out.dx[:, 0], 7.0)


class TestFitPiece:
    def test_first_benchmark_coefficients(self):
        a, b = fit_piece(FitConditions(0.0, 0.5, 0.25, 0.5, 0.5))
        assert (a, b) == pytest.approx((0.5, 0.5))

    def test_second_benchmark_coefficients(self):
        a, b = fit_piece(FitConditions(0.5, 1.0, 0.5, 1.25, 0.5))
        assert (a, b) == pytest.approx((1.5, -0.5))

    def test_constant_derivative(self):
        a, b = fit_piece(FitConditions(0.0, 1.0, 1.0, 1.0, 1.0))
        assert (a, b) == pytest.approx((0.0, 1.0))

    def test_singular_endpoints(self):
        with pytest.raises(SingularFitError):
            fit_piece(FitConditions(0.5, 0.5, 0.1, 0.2, 1.0))

    def test_zero_control(self):
        with pytest.raises(SingularFitError):
            fit_piece(FitConditions(0.0, 1.0, 0.5, 1.0, 0.0))

    @given(
        x_l=st.floats(-3.0, 3.0),
        dx_l=st.floats(-3.0, 3.0),
        dx_r=st.floats(-3.0, 3.0),
        gap=st.floats(0.1, 3.0),
        u=st.floats(0.1, 2.0),
    )
    def test_zero_endpoint_residuals(self, x_l, dx_l, dx_r, gap, u):
        cond = FitConditions(x_l, x_l + gap, dx_l, dx_r, u)
        a, b = fit_piece(cond)
        assert a * cond.x_left + b * u == pytest.approx(dx_l, abs=1e-12)
        assert a * cond.x_right + b * u == pytest.approx(dx_r, abs=1e-12)


class TestFitPieceGeneral:
    def test_exact_recovery(self):
        rng = np.random.default_rng(7)
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        B = np.eye(2)
        xs = rng.normal(size=(6, 2))
        us = rng.normal(size=(6, 2))
        dxs = xs @ A.T + us @ B.T
        A_hat, B_hat = fit_piece_general(xs, us, dxs)
        np.testing.assert_allclose(A_hat, A, atol=1e-10)
        np.testing.assert_allclose(B_hat, B, atol=1e-10)

    def test_scalar_reduction_consistency(self):
        xs = np.array([[0.0], [0.5]])
        us = np.array([[0.5], [0.5]])
        dxs = np.array([[0.25], [0.5]])
        A, B = fit_piece_general(xs, us, dxs)
        a, b = fit_piece(FitConditions(0.0, 0.5, 0.25, 0.5, 0.5))
        assert A[0, 0] == pytest.approx(a)
        assert B[0, 0] == pytest.approx(b)

    def test_unidentifiable(self):
        xs = np.ones((5, 1))
        us = np.ones((5, 1))
        dxs = np.ones((5, 1))
        with pytest.raises(SingularFitError):
            fit_piece_general(xs, us, dxs)

    def test_noisy_full_rank_recovery(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(3, 3))
        B = rng.normal(size=(3, 2))
        xs = rng.normal(size=(12, 3))
        us = rng.normal(size=(12, 2))
        dxs = xs @ A.T + us @ B.T
        A_hat, B_hat = fit_piece_general(xs, us, dxs)
        np.testing.assert_allclose(A_hat, A, atol=1e-9)
        np.testing.assert_allclose(B_hat, B, atol=1e-9)


class TestFitModel:
    def test_benchmark_pieces(self):
        rec = scalar_record(
            [0.0, 1.0, 2.0], [0.0, 0.5, 1.0], [0.5] * 3, dx=[0.25, 0.5, 1.25]
        )
        model = fit_model(rec, TimePartition([0.0, 1.0, 2.0]))
        assert model.pieces[0].A[0, 0] == pytest.approx(0.5)
        assert model.pieces[0].B[0, 0] == pytest.approx(0.5)
        assert model.pieces[1].A[0, 0] == pytest.approx(1.5)
        assert model.pieces[1].B[0, 0] == pytest.approx(-0.5)
        np.testing.assert_allclose([p.anchor[0] for p in model.pieces], [0.5, 1.0])

    def test_case4_pieces(self):
        rec = scalar_record([0.0, 1.0, 2.0], [0.0, 0.5, 1.0], [1.0] * 3, dx=[1.0, 1.25, 2.0])
        model = fit_model(rec, TimePartition([0.0, 1.0, 2.0]))
        assert model.pieces[0].A[0, 0] == pytest.approx(0.5)
        assert model.pieces[0].B[0, 0] == pytest.approx(1.0)
        assert model.pieces[1].A[0, 0] == pytest.approx(1.5)
        assert model.pieces[1].B[0, 0] == pytest.approx(0.5)

    def test_single_piece_linear_data(self):
        t = np.linspace(0.0, 1.0, 11)
        rec = scalar_record(t, 2.0 * t, np.ones_like(t))  # dx/dt = 2 = 0*x + 2*u
        model = fit_model(rec, TimePartition([0.0, 1.0]))
        assert model.pieces[0].A[0, 0] == pytest.approx(0.0, abs=1e-9)
        assert model.pieces[0].B[0, 0] == pytest.approx(2.0, abs=1e-9)

    def test_coverage_error(self):
        rec = scalar_record([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], [1.0] * 3)
        with pytest.raises(CoverageError) as info:
            fit_model(rec, TimePartition([0.0, 1.0, 2.0]))
        assert 2.0 in info.value.uncovered_knots

    def test_negative_label_rejected(self):
        rec = scalar_record(
            [0.0, 1.0, 2.0], [0.0, 0.5, 1.0], [0.5] * 3, dx=[0.25, 0.5, 1.25], label="negative"
        )
        with pytest.raises(ValueError):
            fit_model(rec, TimePartition([0.0, 1.0, 2.0]))
        model = fit_model(rec, TimePartition([0.0, 1.0, 2.0]), allow_negative=True)
        assert len(model.pieces) == 2

    def test_interpolates_supplied_derivatives(self):
        rec = scalar_record(
            [0.0, 1.0, 2.0], [0.0, 0.5, 1.0], [0.5] * 3, dx=[0.25, 0.5, 1.25]
        )
        model = fit_model(rec, TimePartition([0.0, 1.0, 2.0]))
        for k, piece in enumerate(model.pieces):
            for knot_t in (piece.t_start, piece.t_end):
                x = rec.interp_state(knot_t)
                u = rec.interp_control(knot_t)
                dx = rec.interp_derivative(knot_t)
                assert evaluate_rhs(piece, x, u)[0] == pytest.approx(dx[0], abs=1e-10)

    @given(shift=st.floats(-5.0, 5.0))
    def test_time_translation_invariance(self, shift):
        rec = scalar_record(
            [0.0, 1.0, 2.0], [0.0, 0.5, 1.0], [0.5] * 3, dx=[0.25, 0.5, 1.25]
        )
        shifted = scalar_record(
            np.array([0.0, 1.0, 2.0]) + shift,
            [0.0, 0.5, 1.0],
            [0.5] * 3,
            dx=[0.25, 0.5, 1.25],
        )
        m1 = fit_model(rec, TimePartition([0.0, 1.0, 2.0]))
        m2 = fit_model(shifted, TimePartition(np.array([0.0, 1.0, 2.0]) + shift))
        for p1, p2 in zip(m1.pieces, m2.pieces):
            np.testing.assert_allclose(p1.A, p2.A, atol=1e-12)
            np.testing.assert_allclose(p1.B, p2.B, atol=1e-12)


class TestIngest:
    def test_round_trip(self, tmp_path):
        rec = scalar_record(
            [0.0, 1.0, 2.0], [0.0, 0.5, 1.0], [0.5] * 3, dx=[0.25, 0.5, 1.25], rec_id="a"
        )
        neg = scalar_record(
            [0.0, 0.5, 1.0], [0.0, 0.2, 0.1], [0.1] * 3, dx=[0.0, 0.1, 0.0],
            label="negative", rec_id="b",
        )
        path = tmp_path / "data.csv"
        write_trajectories(path, [rec, neg])
        records = ingest_trajectories(path)
        labels = {r.id: r.label for r in records}
        assert labels == {"a": "positive", "b": "negative"}
        back = next(r for r in records if r.id == "a")
        np.testing.assert_allclose(back.t, rec.t)
        np.testing.assert_allclose(back.x, rec.x)
        np.testing.assert_allclose(back.dx, rec.dx)

    def test_three_row_csv(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text(
            "traj_id,label,t,x0,u0\n"
            "# a comment\n"
            "a,positive,0.0,0.0,0.5\n"
            "a,positive,1.0,0.5,0.5\n"
            "a,positive,2.0,1.0,0.5\n"
        )
        records = ingest_trajectories(path)
        assert len(records) == 1
        assert records[0].t.size == 3

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "traj_id,label,t,x0,u0\n"
            "a,positive,0.0,0.0,0.5\n"
            "a,positive,1.0,oops,0.5\n"
        )
        with pytest.raises(TrajectoryParseError) as info:
            ingest_trajectories(path)
        assert info.value.line == 3

    def test_bad_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("traj_id,label,t,x0,u0\na,maybe,0.0,0.0,0.5\n")
        with pytest.raises(TrajectoryParseError):
            ingest_trajectories(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,x,u\n0,0,0\n")
        with pytest.raises(TrajectoryParseError):
            ingest_trajectories(path)
