//! Total Fisher information: brute-force cell sums, the per-N decomposition,
//! limits, the closed-form approximation and its expansion.

mod common;

use common::{rel, rng};
use mzfisher_core::fisher::qfi_per_n_operator_oracle;
use mzfisher_core::fisher::{
    asymptotic_constant, cfi_per_n_analytic, total_cfi_numeric, total_fisher_approx, total_fisher_exact,
    total_fisher_ideal, total_fisher_intermediate, total_fisher_value, ApproxParams, Threshold,
};
use mzfisher_core::numerics::compensated_sum;
use mzfisher_core::optimize::{
    optimize_alpha, optimize_single_component, single_component_objectives, Engine, ScanOptions,
};
use mzfisher_core::states::{build_amplitude_table, postselect, AmplitudeTable, LightSource};

// Every (N_a, N_b) cell evaluated on its own, no prefix sums.
fn brute_force_cells(amps: &AmplitudeTable, n_res: usize) -> f64 {
    let (alpha2, xi) = (amps.alpha_mag() * amps.alpha_mag(), amps.xi_mag());
    let coth = if xi > 0.0 { 1.0 / xi.tanh() } else { 0.0 };
    let mut terms = Vec::new();
    for na in 0..=n_res.min(amps.cutoff()) {
        for nb in 0..=(n_res - na).min(amps.cutoff()) {
            let w = (amps.coherent(na) * amps.squeezed(nb)).square().to_f64();
            let (na, nb) = (na as f64, nb as f64);
            terms.push((na + (1.0 + 2.0 * na + 2.0 * alpha2 * coth) * nb) * w);
        }
    }
    compensated_sum(terms)
}

#[test]
fn prefix_sums_match_cell_sums() {
    let mut r = rng(21);
    for _ in 0..6 {
        let src = common::random_source(&mut r, 60.0);
        let amps = build_amplitude_table(&src, 1e-12).unwrap();
        for n_res in [0, 1, 7, 30, 90] {
            let fast = total_fisher_value(&amps, &src, Threshold::Finite(n_res)).unwrap();
            let slow = brute_force_cells(&amps, n_res);
            assert!(
                rel(fast, slow) < 1e-12 || (fast - slow).abs() < 1e-300,
                "{fast} vs {slow}"
            );
        }
    }
}

#[test]
fn total_is_the_weighted_sum_of_components() {
    let src = LightSource::from_split(10.0, 6.0).unwrap();
    let amps = build_amplitude_table(&src, 1e-12).unwrap();
    for n_res in [5, 20, 50] {
        let report = total_fisher_exact(&amps, &src, Threshold::Finite(n_res)).unwrap();
        assert!(rel(report.weighted_sum(), report.total_exact) < 1e-10);
        assert!(report.total_exact >= 0.0 && report.total_exact <= report.total_ideal);
        for rec in &report.per_n {
            if rec.gen_prob > 0.0 {
                let state = postselect(&amps, rec.total_n).unwrap();
                assert!(rel(rec.fisher, cfi_per_n_analytic(&state, src.alpha_mag(), src.xi_mag())) < 1e-14);
            }
        }
    }
}

#[test]
fn counting_probabilities_reproduce_the_total() {
    let src = LightSource::from_split(10.0, 6.0).unwrap();
    let amps = build_amplitude_table(&src, 1e-12).unwrap();
    let exact = total_fisher_value(&amps, &src, Threshold::Finite(20)).unwrap();
    for phi in [0.3, 0.6, 1.2] {
        let numeric = total_cfi_numeric(&amps, 20, phi).unwrap();
        assert!(rel(numeric, exact) < 1e-8, "φ = {phi}: {numeric} vs {exact}");
    }
    let report = total_fisher_exact(&amps, &src, Threshold::Finite(20))
        .unwrap()
        .with_numeric_check(&amps, 0.6)
        .unwrap();
    assert_eq!(report.phi, Some(0.6));
    assert!(rel(report.total_numeric.unwrap(), exact) < 1e-8);
}

#[test]
fn ideal_limit_for_several_splits() {
    for n_bar in [2.0, 10.0, 50.0] {
        for frac in [0.2, 0.5, 0.8] {
            let src = LightSource::from_split(n_bar, frac * n_bar).unwrap();
            let amps = build_amplitude_table(&src, 1e-14).unwrap();
            let exact = total_fisher_value(&amps, &src, Threshold::Infinite).unwrap();
            let truncated = total_fisher_value(&amps, &src, Threshold::Finite(2 * amps.cutoff())).unwrap();
            let ideal = total_fisher_ideal(&src).unwrap();
            assert!(rel(exact, ideal.closed_form) < 1e-8, "{n_bar}, {frac}");
            assert_eq!(exact, truncated);
            assert!(rel(ideal.mean_form, ideal.closed_form) < 1e-12);
        }
    }
    let split = LightSource::from_means(5.0, 5.0).unwrap();
    let amps = build_amplitude_table(&split, 1e-14).unwrap();
    let v = total_fisher_value(&amps, &split, Threshold::Infinite).unwrap();
    assert!(rel(v, 60.0 + 10.0 * 30f64.sqrt()) < 1e-8);
}

#[test]
fn monotone_in_threshold() {
    let src = LightSource::from_split(20.0, 9.0).unwrap();
    let amps = build_amplitude_table(&src, 1e-12).unwrap();
    let mut prev = -1.0;
    for n_res in 0..=120 {
        let v = total_fisher_value(&amps, &src, Threshold::Finite(n_res)).unwrap();
        assert!(v >= prev, "n_res = {n_res}");
        prev = v;
    }
    assert_eq!(total_fisher_value(&amps, &src, Threshold::Finite(0)).unwrap(), 0.0);
}

#[test]
fn approximation_is_below_ideal_and_converges() {
    for n_bar in [10.0, 40.0] {
        for frac in [0.1, 0.4, 0.7, 0.95] {
            let src = LightSource::from_split(n_bar, frac * n_bar).unwrap();
            let ideal = total_fisher_ideal(&src).unwrap().value();
            let na = src.coherent_mean();
            for n_res in (na.ceil() as usize)..(12 * n_bar as usize) {
                let approx = total_fisher_approx(&src, Threshold::Finite(n_res)).unwrap();
                assert!(approx <= ideal * (1.0 + 1e-14));
            }
            let far = total_fisher_approx(&src, Threshold::Finite(400 * n_bar as usize)).unwrap();
            assert!(rel(far, ideal) < 1e-6, "{far} vs {ideal}");
        }
    }
}

#[test]
fn intermediate_form_tracks_the_exact_sum() {
    let src = LightSource::from_split(40.0, 20.0).unwrap();
    let amps = build_amplitude_table(&src, 1e-12).unwrap();
    for k in [2.0, 5.0] {
        let n_res = Threshold::Finite((k * 40.0) as usize);
        let exact = total_fisher_value(&amps, &src, n_res).unwrap();
        let mid = total_fisher_intermediate(&amps, &src, n_res).unwrap();
        let approx = total_fisher_approx(&src, n_res).unwrap();
        assert!(rel(mid, exact) < 0.05, "{mid} vs {exact}");
        assert!(rel(approx, exact) < 0.05, "{approx} vs {exact}");
    }
    let ideal = total_fisher_ideal(&src).unwrap().value();
    assert!(
        rel(
            total_fisher_intermediate(&amps, &src, Threshold::Infinite).unwrap(),
            ideal
        ) < 1e-8
    );
}

#[test]
fn half_threshold_expansion_orders() {
    let s = asymptotic_constant();
    assert!((s.leading - 0.1987).abs() < 1e-4);
    let mut erfc_scaled = Vec::new();
    let mut gauss_scaled = Vec::new();
    for nb in [50.0, 100.0, 200.0] {
        // n_res = n̄ = 2 n̄_b with n̄_a = n̄_b
        let p = ApproxParams::new(nb, nb, 2.0 * nb).unwrap();
        erfc_scaled.push((p.erfc_term() - s.erfc_expansion(nb)) * nb * nb);
        gauss_scaled.push((p.gaussian_term() - s.gaussian_expansion(nb)) * nb * nb * nb);
    }
    // residual × n̄_b^order settles to a constant
    for v in [&erfc_scaled, &gauss_scaled] {
        assert!(rel(v[2], v[1]) < 0.05 && rel(v[1], v[0]) < 0.1, "{v:?}");
    }
}

#[test]
fn joint_objective_is_the_component_qfi() {
    // α² = 6, sinh²ξ = 2, N = 10
    let objectives = single_component_objectives(8.0, 6.0, 40).unwrap();
    let src = LightSource::from_means(6.0, 2.0).unwrap();
    let amps = AmplitudeTable::for_source(&src, 40).unwrap();
    let state = postselect(&amps, 10).unwrap();
    let direct = state.gen_prob() * qfi_per_n_operator_oracle(&state);
    assert!(rel(objectives[10], direct) < 1e-13);
    let analytic = state.gen_prob() * cfi_per_n_analytic(&state, src.alpha_mag(), src.xi_mag());
    assert!(rel(objectives[10], analytic) < 1e-10);
}

#[test]
fn joint_optimum_at_eight_photons() {
    let best = optimize_single_component(8.0, 0.01, 72).unwrap();
    assert_eq!(best.total_n, 10);
    assert!((best.alpha2 / 8.0 - 0.75).abs() <= 0.02);
}

#[test]
fn scan_grid_refinement_is_stable() {
    let coarse = ScanOptions {
        grid_step: 0.02,
        refine: false,
        ..ScanOptions::default()
    };
    let fine = ScanOptions {
        grid_step: 0.01,
        ..coarse
    };
    for n_res in [Threshold::Finite(10), Threshold::Finite(20), Threshold::Infinite] {
        let a = optimize_alpha(10.0, n_res, Engine::Exact, &coarse).unwrap();
        let b = optimize_alpha(10.0, n_res, Engine::Exact, &fine).unwrap();
        assert!((a.argmax - b.argmax).abs() <= a.resolution + 1e-12, "{n_res}");
    }
}

#[test]
fn approx_engine_never_exceeds_ideal() {
    let opts = ScanOptions::default();
    let scan = optimize_alpha(30.0, Threshold::Finite(30), Engine::Approx, &opts).unwrap();
    for &(a, v) in &scan.grid {
        let ideal = total_fisher_ideal(&LightSource::from_split(30.0, a).unwrap())
            .unwrap()
            .value();
        assert!(v <= ideal * (1.0 + 1e-14));
    }
}
