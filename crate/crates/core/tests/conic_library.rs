//! Small conic programs with known optima.

use noma_core::conic::svec::SQRT2;
use noma_core::conic::{solve, Cone, ConicBuilder, ConicProgram, SolveOptions, SolveStatus};

fn optimum(prog: &ConicProgram) -> f64 {
    let r = solve(prog, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
    assert!(r.objective >= r.dual_objective - 1e-7 * (1.0 + r.objective.abs()));
    r.objective
}

fn lp_lower_bound() -> ConicProgram {
    // min x  s.t. x - z = 3
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(2));
    b.add_equality(&[(v.at(0), 1.0), (v.at(1), -1.0)], 3.0);
    b.add_objective(v.at(0), 1.0);
    b.build()
}

fn soc_norm(a: f64, c: f64) -> ConicProgram {
    // min t  s.t. ‖(a, c)‖ ≤ t
    let mut b = ConicBuilder::new();
    let s = b.add_cone(Cone::SecondOrder(3));
    b.add_equality(&[(s.at(1), 1.0)], a);
    b.add_equality(&[(s.at(2), 1.0)], c);
    b.add_objective(s.at(0), 1.0);
    b.build()
}

fn sdp_trace() -> ConicProgram {
    // min Tr W  s.t. Tr(diag(2,1) W) ≥ 1
    let mut b = ConicBuilder::new();
    let w = b.add_cone(Cone::Psd(2));
    let sl = b.add_cone(Cone::NonNegative(1));
    b.add_equality(&[(w.at(0), 2.0), (w.at(2), 1.0), (sl.at(0), -1.0)], 1.0);
    b.add_objective(w.at(0), 1.0);
    b.add_objective(w.at(2), 1.0);
    b.build()
}

fn lp_simplex() -> ConicProgram {
    // min 2x + y  s.t. x + y = 1
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(2));
    b.add_equality(&[(v.at(0), 1.0), (v.at(1), 1.0)], 1.0);
    b.add_objective(v.at(0), 2.0);
    b.add_objective(v.at(1), 1.0);
    b.build()
}

fn lp_vertex() -> ConicProgram {
    // max x + y  s.t. 2x + y ≤ 4, x + 3y ≤ 6
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(4));
    b.add_equality(&[(v.at(0), 2.0), (v.at(1), 1.0), (v.at(2), 1.0)], 4.0);
    b.add_equality(&[(v.at(0), 1.0), (v.at(1), 3.0), (v.at(3), 1.0)], 6.0);
    b.add_objective(v.at(0), -1.0);
    b.add_objective(v.at(1), -1.0);
    b.build()
}

fn rotated() -> ConicProgram {
    // min x + y  s.t. x y ≥ 25/4, via ‖(x − y, 5)‖ ≤ x + y
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(2));
    let s = b.add_cone(Cone::SecondOrder(3));
    b.add_equality(&[(s.at(0), 1.0), (v.at(0), -1.0), (v.at(1), -1.0)], 0.0);
    b.add_equality(&[(s.at(1), 1.0), (v.at(0), -1.0), (v.at(1), 1.0)], 0.0);
    b.add_equality(&[(s.at(2), 1.0)], 5.0);
    b.add_objective(v.at(0), 1.0);
    b.add_objective(v.at(1), 1.0);
    b.build()
}

fn min_eigenvalue() -> ConicProgram {
    // max λ  s.t. [[2,1],[1,2]] − λI ⪰ 0
    let mut b = ConicBuilder::new();
    let s = b.add_cone(Cone::Psd(2));
    let l = b.add_cone(Cone::NonNegative(1));
    b.add_equality(&[(s.at(0), 1.0), (l.at(0), 1.0)], 2.0);
    b.add_equality(&[(s.at(2), 1.0), (l.at(0), 1.0)], 2.0);
    b.add_equality(&[(s.at(1), 1.0)], SQRT2);
    b.add_objective(l.at(0), -1.0);
    b.build()
}

fn cut_like() -> ConicProgram {
    // min Tr(C X)  s.t. diag X = 1, C = 2(J − I)
    let mut b = ConicBuilder::new();
    let x = b.add_cone(Cone::Psd(3));
    // svec order: (0,0) (1,0) (2,0) (1,1) (2,1) (2,2)
    for d in [0, 3, 5] {
        b.add_equality(&[(x.at(d), 1.0)], 1.0);
    }
    for o in [1, 2, 4] {
        b.add_objective(x.at(o), 2.0 * SQRT2);
    }
    b.build()
}

fn mixed() -> ConicProgram {
    // min t + x  s.t. |1 − x| ≤ t, x ≤ 1, p = x with p a 1×1 PSD block
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(2));
    let s = b.add_cone(Cone::SecondOrder(2));
    let p = b.add_cone(Cone::Psd(1));
    b.add_equality(&[(s.at(1), 1.0), (v.at(0), 1.0)], 1.0);
    b.add_equality(&[(v.at(0), 1.0), (v.at(1), 1.0)], 1.0);
    b.add_equality(&[(p.at(0), 1.0), (v.at(0), -1.0)], 0.0);
    b.add_objective(s.at(0), 1.0);
    b.add_objective(v.at(0), 1.0);
    b.build()
}

#[test]
fn library_optima() {
    let cases: Vec<(&str, ConicProgram, f64)> = vec![
        ("lp lower bound", lp_lower_bound(), 3.0),
        ("soc (1,1)", soc_norm(1.0, 1.0), SQRT2),
        ("sdp trace", sdp_trace(), 0.5),
        ("lp simplex", lp_simplex(), 1.0),
        ("lp vertex", lp_vertex(), -2.8),
        ("soc (3,4)", soc_norm(3.0, 4.0), 5.0),
        ("rotated", rotated(), 5.0),
        ("min eigenvalue", min_eigenvalue(), -1.0),
        ("cut-like sdp", cut_like(), -6.0),
        ("mixed", mixed(), 1.0),
    ];
    for (name, prog, want) in cases {
        let got = optimum(&prog);
        assert!((got - want).abs() <= 1e-6, "{name}: got {got}, want {want}");
    }
}

#[test]
fn sdp_trace_matches_grid_search() {
    // Over diagonal W = diag(a, b) the constraint 2a + b ≥ 1 with minimal a + b.
    let mut best = f64::INFINITY;
    for i in 0..=1000 {
        let a = i as f64 / 1000.0;
        let b = (1.0 - 2.0 * a).max(0.0);
        best = best.min(a + b);
    }
    assert!((optimum(&sdp_trace()) - best).abs() < 1e-6);
}

#[test]
fn detects_infeasibility() {
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(1));
    b.add_equality(&[(v.at(0), 1.0)], -1.0);
    b.add_objective(v.at(0), 1.0);
    let r = solve(&b.build(), &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);

    // ‖(1, 0)‖ ≤ t with t = 0.5
    let mut b = ConicBuilder::new();
    let s = b.add_cone(Cone::SecondOrder(2));
    b.add_equality(&[(s.at(0), 1.0)], 0.5);
    b.add_equality(&[(s.at(1), 1.0)], 1.0);
    let r = solve(&b.build(), &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn detects_unboundedness() {
    let mut b = ConicBuilder::new();
    let v = b.add_cone(Cone::NonNegative(2));
    b.add_equality(&[(v.at(0), 1.0), (v.at(1), -1.0)], 0.0);
    b.add_objective(v.at(0), -1.0);
    let r = solve(&b.build(), &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Unbounded);
}

#[test]
fn optimal_points_satisfy_cones() {
    let prog = cut_like();
    let r = solve(&prog, &SolveOptions::default()).unwrap();
    let x = noma_core::conic::svec::smat(&r.x, 3);
    let lmin = x.symmetric_eigenvalues().min();
    assert!(lmin >= -1e-8);
    assert!(r.primal_residual <= 1e-8 && r.dual_residual <= 1e-8 && r.gap <= 1e-8);
}
