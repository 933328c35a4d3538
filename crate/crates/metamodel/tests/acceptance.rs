//! Acceptance suite: one test per shipping criterion, each printing a
//! single PASS/FAIL line with its measured figure. Run with
//! `cargo test -p metamodel --test acceptance -- --nocapture`.

use std::time::Instant;

use metamodel::basis::{
    enumerate_hyperbolic, lra_parameter_count, tensor_basis_count, total_degree_count, PolyFamily,
};
use metamodel::benchmarks::{beam_deflection, beam_input_model, Benchmark};
use metamodel::input::InputModel;
use metamodel::lra::{self, StoppingRule};
use metamodel::metrics;
use metamodel::pce::{self, PceFitConfig};
use metamodel::regression;
use metamodel::sampling;
use metamodel::stdnorm;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn report(criterion: &str, pass: bool, detail: &str, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "[acceptance] {criterion}: {status} ({detail}; {:.1}s)",
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "{criterion}: {detail}");
}

/// Standardized coordinates of a unit-hypercube design under a model.
fn standardize(model: &InputModel, unit: &DMatrix<f64>) -> DMatrix<f64> {
    let physical = model.sample(unit).expect("design inside hypercube");
    let mut out = DMatrix::<f64>::zeros(unit.nrows(), unit.ncols());
    let mut row = vec![0.0; unit.ncols()];
    for i in 0..unit.nrows() {
        for j in 0..unit.ncols() {
            row[j] = physical[(i, j)];
        }
        let z = model.to_standard(&row).expect("in support");
        for j in 0..unit.ncols() {
            out[(i, j)] = z[j];
        }
    }
    out
}

struct PreparedSet {
    physical: DMatrix<f64>,
    standardized: DMatrix<f64>,
    responses: DVector<f64>,
}

fn prepare(benchmark: &Benchmark, unit: &DMatrix<f64>) -> PreparedSet {
    let model = benchmark.input_model().expect("input model");
    let physical = model.sample(unit).expect("hypercube");
    let responses =
        DVector::from_vec(benchmark.evaluate_batch(&physical).expect("evaluations"));
    let standardized = standardize(&model, unit);
    PreparedSet {
        physical,
        standardized,
        responses,
    }
}

fn default_degree_candidates() -> Vec<u32> {
    (1..=20).collect()
}

/// The beam study runs the correction step to a tighter differential
/// threshold than the cross-benchmark default.
fn beam_rule() -> StoppingRule {
    StoppingRule {
        max_iterations: 50,
        min_error_decrease: 1e-8,
    }
}

#[test]
fn c01_beam_reproduction() {
    let started = Instant::now();
    let benchmark = Benchmark::Beam;
    let ed = prepare(&benchmark, &sampling::sobol(5, 50).unwrap().points);
    let families = vec![PolyFamily::Hermite; 5];
    let (_, _, model) = lra::select_rank_cv3(
        &ed.standardized,
        &ed.responses,
        &families,
        &[5; 5],
        20,
        &beam_rule(),
        42,
    )
    .expect("rank selection");

    let val = prepare(&benchmark, &sampling::mcs(5, 100_000, 777).unwrap().points);
    let predictions = model.predict_batch(&val.standardized).unwrap();
    let err = metrics::generalization_error(&predictions, val.responses.as_slice())
        .unwrap()
        .relative;
    report(
        "C1 beam reproduction",
        err <= 1e-3,
        &format!("LRA p=5 N=50 CV3 rank={} err_G={err:.3e} <= 1e-3", model.rank()),
        started,
    );
}

#[test]
fn c02_beam_rank_by_loo() {
    let started = Instant::now();
    let benchmark = Benchmark::Beam;
    let families = vec![PolyFamily::Hermite; 5];
    let mut picks = Vec::new();
    for n in [50usize, 100, 200, 1000] {
        let ed = prepare(&benchmark, &sampling::sobol(5, n).unwrap().points);
        let models = lra::fit_lra_sequence(
            &ed.standardized,
            &ed.responses,
            &families,
            &[5; 5],
            20,
            &beam_rule(),
        )
        .expect("sequence");
        let (rank, _) = lra::select_rank_loo(&models).expect("loo pick");
        picks.push((n, rank));
    }
    let all_one = picks.iter().all(|&(_, r)| r == 1);
    report(
        "C2 beam rank criterion",
        all_one,
        &format!("R_LOO per N: {picks:?} (all must be 1)"),
        started,
    );
}

#[test]
fn c03_beam_lra_vs_pce_gap() {
    let started = Instant::now();
    let benchmark = Benchmark::Beam;
    let ed = prepare(&benchmark, &sampling::sobol(5, 50).unwrap().points);
    let families = vec![PolyFamily::Hermite; 5];

    let (_, lra_model) = lra::select_degree_cv3(
        &ed.standardized,
        &ed.responses,
        &families,
        &default_degree_candidates(),
        20,
        &beam_rule(),
        42,
    )
    .expect("degree selection");
    let pce_model = pce::fit_sparse_pce(
        &ed.standardized,
        &ed.responses,
        &families,
        &PceFitConfig::default(),
    )
    .expect("pce fit");

    let val = prepare(&benchmark, &sampling::mcs(5, 100_000, 778).unwrap().points);
    let lra_pred = lra_model.predict_batch(&val.standardized).unwrap();
    let pce_pred = pce_model.predict_batch(&val.standardized).unwrap();
    let err_lra = metrics::generalization_error(&lra_pred, val.responses.as_slice())
        .unwrap()
        .relative;
    let err_pce = metrics::generalization_error(&pce_pred, val.responses.as_slice())
        .unwrap()
        .relative;
    let ratio = err_pce / err_lra;
    report(
        "C3 beam LRA-vs-PCE gap",
        ratio >= 100.0,
        &format!("err_G PCE {err_pce:.3e} / LRA {err_lra:.3e} = {ratio:.1} >= 100"),
        started,
    );
}

#[test]
fn c04_basis_cardinalities() {
    let started = Instant::now();
    let card10 = enumerate_hyperbolic(10, 3, 1.0).unwrap().len();
    let card50 = total_degree_count(50, 3);
    let mut law_holds = true;
    for m in 1..=10usize {
        for p in 0..=6u32 {
            let brute = enumerate_hyperbolic(m, p, 1.0).unwrap().len() as u128;
            if brute != total_degree_count(m, p) {
                law_holds = false;
            }
        }
    }
    report(
        "C4 basis cardinalities",
        card10 == 286 && card50 == 23_426 && law_holds,
        &format!("card(10,3)={card10}, card(50,3)={card50}, count law M<=10 p<=6 ok={law_holds}"),
        started,
    );
}

#[test]
fn c05_parameter_count_identity() {
    let started = Instant::now();
    let tensor = tensor_basis_count(&[3; 10]);
    let lra_params: Vec<u128> = (1..=10).map(|r| lra_parameter_count(&[3; 10], r)).collect();
    let pass = tensor == 1_048_576 && lra_params.iter().enumerate().all(|(i, &v)| v == 40 * (i as u128 + 1));
    report(
        "C5 parameter-count identity",
        pass,
        &format!("tensor(10,3)={tensor}, rank-R parameters=40R ({:?}...)", &lra_params[..3]),
        started,
    );
}

#[test]
fn c06_eole_truncation() {
    let started = Instant::now();
    let field = match Benchmark::by_name("eole-field").unwrap().unwrap() {
        Benchmark::EoleField(f) => f,
        _ => unreachable!(),
    };
    let trace_err = (field.total_trace() - 121.0).abs();
    report(
        "C6 EOLE truncation",
        field.retained() == 53 && trace_err <= 1e-8,
        &format!("M={}, |trace-121|={trace_err:.2e}", field.retained()),
        started,
    );
}

#[test]
fn c07_loo_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = 30 + (rng.random::<u64>() % 171) as usize; // 30..=200
        let p = 2 + (rng.random::<u64>() % 19) as usize; // 2..=20
        let m = DMatrix::<f64>::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::<f64>::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let fit = regression::ols(&m, &y).unwrap();
        let fast = regression::loo_error(&fit).unwrap();

        let mut acc = 0.0;
        for leave in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&i| i != leave).collect();
            let m_train = m.select_rows(keep.iter());
            let y_train = DVector::from_fn(n - 1, |i, _| y[keep[i]]);
            let sub = regression::ols(&m_train, &y_train).unwrap();
            let pred: f64 = (0..p).map(|j| m[(leave, j)] * sub.coefficients[j]).sum();
            let e = y[leave] - pred;
            acc += e * e;
        }
        let explicit = acc / n as f64;
        worst = worst.max((fast - explicit).abs() / explicit.max(1e-300));
    }
    report(
        "C7 LOO oracle equivalence",
        worst <= 1e-9,
        &format!("max relative gap over 50 systems = {worst:.2e} <= 1e-9"),
        started,
    );
}

#[test]
fn c08_als_monotonicity_and_recovery() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(5678);
    let mut monotone = true;
    for _ in 0..100 {
        let m = 2 + (rng.random::<u64>() % 4) as usize; // 2..=5
        let n = 30 + (rng.random::<u64>() % 71) as usize;
        let unit = sampling::mcs(m, n, rng.random()).unwrap();
        let points =
            DMatrix::from_fn(n, m, |i, j| stdnorm::quantile(unit.points[(i, j)]));
        let y = DVector::from_fn(n, |i, _| {
            let mut acc = 0.0;
            for d in 0..m {
                acc += (d as f64 + 1.0) * points[(i, d)] / m as f64;
            }
            acc.tanh() + 0.25 * points[(i, 0)] * points[(i, m - 1)]
        });
        let var = metrics::empirical_variance(y.as_slice());
        let out = lra::correction_step(
            &points,
            &y,
            &vec![PolyFamily::Hermite; m],
            &vec![2; m],
            &StoppingRule {
                max_iterations: 30,
                min_error_decrease: 1e-10,
            },
            var,
        )
        .unwrap();
        for w in out.sweep_errors.windows(2) {
            if w[1] > w[0] + 1e-12 * w[0].max(1.0) {
                monotone = false;
            }
        }
    }

    // separable product-of-linears targets recovered to 1e-8
    let mut worst_recovery: f64 = 0.0;
    for trial in 0..20 {
        let m = 2 + (trial % 4) as usize;
        let n = 8 * m;
        let unit = sampling::sobol(m, n).unwrap();
        let points =
            DMatrix::from_fn(n, m, |i, j| stdnorm::quantile(unit.points[(i, j)]));
        let coeffs: Vec<(f64, f64)> = (0..m)
            .map(|_| (1.0 + rng.random::<f64>(), 2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let y = DVector::from_fn(n, |i, _| {
            coeffs
                .iter()
                .enumerate()
                .map(|(d, &(a, b))| a + b * points[(i, d)])
                .product()
        });
        // the differential threshold must ask for at least the depth the
        // recovery claim checks
        let models = lra::fit_lra_sequence(
            &points,
            &y,
            &vec![PolyFamily::Hermite; m],
            &vec![1; m],
            1,
            &StoppingRule {
                max_iterations: 50,
                min_error_decrease: 1e-10,
            },
        )
        .unwrap();
        worst_recovery = worst_recovery.max(models[0].rank_errors()[0]);
    }
    report(
        "C8 ALS monotonicity and exact recovery",
        monotone && worst_recovery <= 1e-8,
        &format!(
            "sweep errors non-increasing on 100 targets: {monotone}; worst rank-one recovery error {worst_recovery:.2e} <= 1e-8"
        ),
        started,
    );
}

fn truss_conditional_cell(
    benchmark: &Benchmark,
    families: &[PolyFamily],
    unit: &DMatrix<f64>,
    val: &PreparedSet,
    threshold: f64,
) -> (f64, f64, f64, f64) {
    let ed = prepare(benchmark, unit);
    let (_, lra_model) = lra::select_degree_cv3(
        &ed.standardized,
        &ed.responses,
        families,
        &default_degree_candidates(),
        20,
        &StoppingRule::default(),
        91,
    )
    .expect("lra fit");
    let pce_model = pce::fit_sparse_pce(
        &ed.standardized,
        &ed.responses,
        families,
        &PceFitConfig::default(),
    )
    .expect("pce fit");
    let lra_pred = lra_model.predict_batch(&val.standardized).unwrap();
    let pce_pred = pce_model.predict_batch(&val.standardized).unwrap();
    let e_lra = metrics::generalization_error(&lra_pred, val.responses.as_slice())
        .unwrap()
        .relative;
    let e_pce = metrics::generalization_error(&pce_pred, val.responses.as_slice())
        .unwrap()
        .relative;
    let c_lra =
        metrics::conditional_generalization_error(&lra_pred, val.responses.as_slice(), threshold, 30)
            .unwrap()
            .relative;
    let c_pce =
        metrics::conditional_generalization_error(&pce_pred, val.responses.as_slice(), threshold, 30)
            .unwrap()
            .relative;
    (e_lra, e_pce, c_lra, c_pce)
}

#[test]
fn c09_conditional_tail_truss() {
    let started = Instant::now();
    let benchmark = Benchmark::by_name("truss").unwrap().unwrap();
    let families = vec![PolyFamily::Hermite; 10];
    let val = prepare(&benchmark, &sampling::mcs(10, 50_000, 4242).unwrap().points);
    let threshold = metrics::response_quantile(val.responses.as_slice(), 0.999);

    // matched design size: scan a pinned grid for the closest err_G pair
    let mut matched = (100usize, f64::INFINITY);
    let mut scan_log = Vec::new();
    for n in [60usize, 80, 100, 150, 200] {
        let unit = sampling::sobol(10, n).unwrap().points;
        let (e_lra, e_pce, _, _) =
            truss_conditional_cell(&benchmark, &families, &unit, &val, threshold);
        let gap = (e_pce / e_lra).ln().abs();
        scan_log.push(format!("N={n}: lra {e_lra:.1e} pce {e_pce:.1e}"));
        if gap < matched.1 {
            matched = (n, gap);
        }
    }
    let n_matched = matched.0;
    let factor_ok = matched.1 <= 2f64.ln();

    // 20 maximin-LHS replications at the matched size
    let mut pce_worse = 0usize;
    for rep in 0..20u64 {
        let unit = sampling::maximin_lhs(10, n_matched, 10_000 + rep * 31, 5)
            .unwrap()
            .points;
        let (_, _, c_lra, c_pce) =
            truss_conditional_cell(&benchmark, &families, &unit, &val, threshold);
        if c_pce > c_lra {
            pce_worse += 1;
        }
    }
    report(
        "C9 conditional-error tail behavior",
        pce_worse >= 15 && factor_ok,
        &format!(
            "matched N={n_matched} (|log ratio|={:.2}, within x2: {factor_ok}; scan: {}); PCE tail error above LRA in {pce_worse}/20 LHS replications (need >= 15)",
            matched.1,
            scan_log.join(", ")
        ),
        started,
    );
}

#[test]
fn c10_truss_scale_sanity() {
    let started = Instant::now();
    let benchmark = Benchmark::by_name("truss").unwrap().unwrap();
    let families = vec![PolyFamily::Hermite; 10];
    let ed = prepare(&benchmark, &sampling::sobol(10, 500).unwrap().points);
    let (degree, model) = lra::select_degree_cv3(
        &ed.standardized,
        &ed.responses,
        &families,
        &default_degree_candidates(),
        20,
        &StoppingRule::default(),
        2025,
    )
    .expect("degree selection");
    let val = prepare(&benchmark, &sampling::mcs(10, 50_000, 4243).unwrap().points);
    let predictions = model.predict_batch(&val.standardized).unwrap();
    let err = metrics::generalization_error(&predictions, val.responses.as_slice())
        .unwrap()
        .relative;
    report(
        "C10 truss scale sanity",
        err <= 1e-2,
        &format!(
            "N=500 CV3 degree={degree} rank={} err_G={err:.3e} <= 1e-2",
            model.rank()
        ),
        started,
    );
}

#[test]
fn c11_property_suites() {
    let started = Instant::now();

    // polynomial orthonormality at 1e-8
    let mut ortho_ok = true;
    for family in [PolyFamily::Hermite, PolyFamily::Legendre] {
        let (nodes, weights) = metamodel::basis::gauss_rule(family, 64);
        for j in 0..=20usize {
            for k in j..=20usize {
                let acc: f64 = nodes
                    .iter()
                    .zip(weights.iter())
                    .map(|(&x, &w)| {
                        w * metamodel::basis::eval_univariate(family, j, x)
                            * metamodel::basis::eval_univariate(family, k, x)
                    })
                    .sum();
                let expect = if j == k { 1.0 } else { 0.0 };
                if (acc - expect).abs() >= 1e-8 {
                    ortho_ok = false;
                }
            }
        }
    }

    // input-model round trips at 1e-8
    let mut round_trip_ok = true;
    let model = beam_input_model().unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x: Vec<f64> = model
            .marginals()
            .iter()
            .map(|m| m.quantile(0.001 + 0.998 * rng.random::<f64>()))
            .collect();
        let z = model.to_standard(&x).unwrap();
        let back = model.from_standard(&z).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            if (a - b).abs() / a.abs().max(1e-6) > 1e-8 {
                round_trip_ok = false;
            }
        }
    }

    // equiangularity of the regression path at 1e-8
    let mut equi_ok = true;
    for seed in 0..10u64 {
        let n = 50;
        let mut local = ChaCha12Rng::seed_from_u64(900 + seed);
        let m = DMatrix::<f64>::from_fn(n, 10, |_, _| local.random::<f64>() * 2.0 - 1.0);
        let y = DVector::<f64>::from_fn(n, |_, _| local.random::<f64>() * 2.0 - 1.0);
        let path = regression::lar_path(&m, &y).unwrap();
        let scale = path.active_correlations[0][0].max(1e-12);
        for corrs in &path.active_correlations {
            let max = corrs.iter().cloned().fold(0.0f64, f64::max);
            let min = corrs.iter().cloned().fold(f64::INFINITY, f64::min);
            if max - min > 1e-8 * scale {
                equi_ok = false;
            }
        }
    }

    // determinism byte-checks
    let sobol_same = sampling::sobol(7, 100).unwrap().points
        == sampling::sobol(7, 100).unwrap().points;
    let lhs_same =
        sampling::lhs(4, 30, 5).unwrap().points == sampling::lhs(4, 30, 5).unwrap().points;
    let beam = Benchmark::Beam;
    let ed = prepare(&beam, &sampling::sobol(5, 40).unwrap().points);
    let families = vec![PolyFamily::Hermite; 5];
    let cfg = PceFitConfig {
        p_t_candidates: (1..=6).collect(),
        q_candidates: vec![0.5, 1.0],
        basis_cap: 50_000,
    };
    let pce_a = pce::fit_sparse_pce(&ed.standardized, &ed.responses, &families, &cfg).unwrap();
    let pce_b = pce::fit_sparse_pce(&ed.standardized, &ed.responses, &families, &cfg).unwrap();
    let pce_same = pce_a.to_json().into_bytes() == pce_b.to_json().into_bytes();
    let lra_a = lra::select_rank_cv3(
        &ed.standardized, &ed.responses, &families, &[3; 5], 5,
        &StoppingRule::default(), 3,
    )
    .unwrap();
    let lra_b = lra::select_rank_cv3(
        &ed.standardized, &ed.responses, &families, &[3; 5], 5,
        &StoppingRule::default(), 3,
    )
    .unwrap();
    let lra_same = lra_a.2.to_json().into_bytes() == lra_b.2.to_json().into_bytes();
    let determinism_ok = sobol_same && lhs_same && pce_same && lra_same;

    report(
        "C11 property suites",
        ortho_ok && round_trip_ok && equi_ok && determinism_ok,
        &format!(
            "orthonormality {ortho_ok}, round trips {round_trip_ok}, equiangularity {equi_ok}, determinism {determinism_ok}"
        ),
        started,
    );
}

#[test]
fn beam_mean_point_check() {
    // cheap anchor for the beam formula used across the suite
    let u = beam_deflection(&[0.15, 0.3, 5.0, 30_000.0, 0.01]).unwrap();
    assert!((u - 1.25 / 486.0).abs() < 1e-15);
}
