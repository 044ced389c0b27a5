use stefan_spde::obstacle::{
    random_smooth_obstacle, sine_obstacle, solve_penalized, solve_projected, stability_gap, truncation_length_ok, GapNorm,
    ObstacleSolver,
};
use stefan_spde::{Field, GridSpec};

fn grid() -> GridSpec {
    GridSpec::compact(64, 0.1, 4096).unwrap()
}

#[test]
fn projected_agrees_with_small_epsilon() {
    let g = grid();
    let v = sine_obstacle(g);
    let p = solve_projected(&v, g).unwrap();
    let z = solve_penalized(&v, 1e-7, g).unwrap();
    let gap = z.z.sub(&p.z).unwrap().sup_norm();
    assert!(gap <= 2e-3, "gap {gap}");
}

#[test]
fn penalty_violation_shrinks_like_sqrt_epsilon() {
    // at equilibrium (1/eps) (v - z)^2 balances the obstacle's forcing, so the
    // violation falls by sqrt(10) per decade of epsilon
    let g = grid();
    let v = sine_obstacle(g);
    let gaps: Vec<f64> = [1e-4, 1e-5, 1e-6].iter().map(|&e| -solve_penalized(&v, e, g).unwrap().min_gap()).collect();
    for w in gaps.windows(2) {
        let r = w[0] / w[1];
        assert!((r - 10f64.sqrt()).abs() < 0.3, "ratio {r}");
    }
}

#[test]
fn penalized_complementarity_decreases() {
    let g = grid();
    let v = sine_obstacle(g);
    let c: Vec<f64> = [1e-3, 1e-4, 1e-5].iter().map(|&e| solve_penalized(&v, e, g).unwrap().abs_complementarity()).collect();
    assert!(c[1] < c[0] && c[2] < c[1], "{c:?}");
}

#[test]
fn half_line_weighted_stability() {
    let g = GridSpec::half_line(20.0, 1.0, 256, 0.05, 2048).unwrap();
    let v1 = random_smooth_obstacle(g, 1);
    let v2 = random_smooth_obstacle(g, 2);
    let norm = GapNorm::Weighted { r: 1.0 };
    let (dz, dv) = stability_gap(&v1, &v2, g, norm).unwrap();
    assert!(dz <= 1.05 * dv, "{dz} {dv}");
    let sol = solve_projected(&v1, g).unwrap();
    assert!(truncation_length_ok(&g, &sol.z, 1.0));
}

#[test]
fn lap_scale_slows_diffusion() {
    let g = GridSpec::compact(32, 0.05, 2048).unwrap();
    let v = sine_obstacle(g);
    let fast = ObstacleSolver::new(g).solve_projected(&v).unwrap();
    let slow = ObstacleSolver::new(g).with_lap_scale(0.2).solve_projected(&v).unwrap();
    // weaker diffusion spreads less mass away from the obstacle, so less pushing is needed
    assert!(slow.eta_mass() < fast.eta_mass());
    assert!(slow.min_gap() >= 0.0);
}

#[test]
fn csv_export() {
    let g = GridSpec::compact(8, 0.01, 100).unwrap();
    let v = Field::from_fn(g, |t, x| t * x * (1.0 - x));
    let sol = solve_projected(&v, g).unwrap();
    let mut buf = Vec::new();
    sol.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x,z,v,eta_cell\n"));
    assert_eq!(text.lines().count(), 1 + g.levels() * g.nodes());
}
