use stefan_spde::coefficients::Coefficient;
use stefan_spde::picard::{compare_with_direct, picard_iterate, PicardOptions, ROUNDOFF_FLOOR};
use stefan_spde::{BoundaryFunctional, GridSpec, ModelCoefficients, NoisePair};

fn coeffs() -> ModelCoefficients {
    ModelCoefficients::symmetric(
        Coefficient::Affine { intercept: 0.5, slope: -1.0 },
        Coefficient::Affine { intercept: 0.3, slope: 0.1 },
    )
}

fn run(horizon: f64, nt: usize, opts: PicardOptions) -> stefan_spde::picard::PicardOutcome {
    let g = GridSpec::compact(16, horizon, nt).unwrap();
    let noise = NoisePair::sample(g, 9);
    let zeros = vec![0.0; g.nodes()];
    let h = BoundaryFunctional::exp_imbalance(2.0, 10.0).with_clamp(2.0);
    picard_iterate(&zeros, &zeros, &coeffs(), &h, 5.0, &noise, g, opts).unwrap()
}

#[test]
fn shorter_horizon_contracts_faster() {
    let opts = PicardOptions { n_iters: 30, tol: 1e-10, stop_early: true, ..PicardOptions::default() };
    let runs: Vec<_> = [(0.05, 100), (0.1, 200), (0.2, 400)].iter().map(|&(t, nt)| run(t, nt, opts)).collect();
    for w in runs.windows(2) {
        assert!(w[0].report.d[2] < w[1].report.d[2], "d_3: {} vs {}", w[0].report.d[2], w[1].report.d[2]);
        assert!(w[0].report.iters <= w[1].report.iters);
    }
    assert!(runs.iter().all(|r| r.report.converged));
}

#[test]
fn small_grid_agrees_with_direct_scheme() {
    let g = GridSpec::compact(16, 0.05, 200).unwrap();
    let noise = NoisePair::sample(g, 4);
    let zeros = vec![0.0; g.nodes()];
    let h = BoundaryFunctional::exp_imbalance(1.0, 10.0).with_clamp(1.0);
    let mut out = picard_iterate(&zeros, &zeros, &coeffs(), &h, 5.0, &noise, g, PicardOptions::default()).unwrap();
    let gap = compare_with_direct(&mut out, &coeffs(), &h, 5.0, &noise, 1.0).unwrap();
    assert!(out.report.worst_ratio(2, ROUNDOFF_FLOOR) <= 0.8);
    assert!(gap <= 5.0 * (g.dx + g.dt.sqrt()), "gap {gap}");
    assert_eq!(out.report.final_gap_vs_direct, Some(gap));
}

#[test]
fn half_line_variant_runs() {
    let g = GridSpec::half_line(4.0, 0.5, 32, 0.02, 200).unwrap();
    let noise = NoisePair::sample(g, 1);
    let zeros = vec![0.0; g.nodes()];
    let mut c = coeffs();
    c.r = 0.5;
    let h = BoundaryFunctional::exp_imbalance(1.0, 5.0).with_clamp(1.0);
    let mut out = picard_iterate(&zeros, &zeros, &c, &h, 5.0, &noise, g, PicardOptions::default()).unwrap();
    assert!(out.report.converged);
    let gap = compare_with_direct(&mut out, &c, &h, 5.0, &noise, 1.0).unwrap();
    assert!(gap <= 5.0 * (g.dx + g.dt.sqrt()), "gap {gap}");
}
