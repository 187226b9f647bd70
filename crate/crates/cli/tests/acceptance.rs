//! Acceptance checks, one pass/fail line per criterion.
//!
//! Run with `cargo test -p oig-cli --test acceptance`; add `--release` to
//! make criterion 8 (10-fold Concrete for three algorithms) quicker.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use oig_core::data::{augment_dependent, synthesize_regression, table, DependentInput, SynthKind};
use oig_core::gains::{gain_gradient, gain_hessian};
use oig_core::gradients::{bp_gradient, hwo_gradient, input_autocorrelation, transform_gradient, GradientMatrix};
use oig_core::kfold::{run_kfold, KfoldConfig};
use oig_core::linalg::{inverse_whitening_from_autocorrelation, ols_factor, ols_solve, SymmetricMatrix, DEFAULT_OLS_TOL};
use oig_core::network::{forward, Dataset, Task};
use oig_core::trainers::{initialize, train_from, TrainTrace};
use oig_core::{Algorithm, TrainConfig};
use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = (bool, String);

const PAPER_CONCRETE_OIG_HWO: f64 = 27.1604;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn config(alg: Algorithm, nh: usize, iters: usize, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(alg, nh);
    c.n_iterations = iters;
    c.seed = seed;
    c
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn gradient_fd() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let instances = 120;
    for seed in 0..instances {
        let (p, d) = random_instance(seed);
        let c = forward(&p, &d).unwrap();
        let g = bp_gradient(&p, &c, &d).unwrap();
        for k in 0..p.n_hidden() {
            for n in 0..=p.n_inputs() {
                worst = worst.max(rel_err(-g.0[(k, n)], fd_input_weight(&p, &d, k, n)));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-6 && secs < 10.0,
        format!("{instances} instances, worst relative error {worst:.2e} (limit 1e-6), {secs:.2} s (limit 10 s)"),
    )
}

fn gain_system() -> Outcome {
    let mut worst_fd = 0.0_f64;
    let mut worst_asym = 0.0_f64;
    let mut min_ev = f64::INFINITY;
    for seed in 0..120 {
        let (p, d) = random_instance(seed);
        let c = forward(&p, &d).unwrap();
        let g = bp_gradient(&p, &c, &d).unwrap();
        let dr = gain_gradient(&p, &c, &d, &g).unwrap();
        for m in 0..=p.n_inputs() {
            let fd = fd_gain(&p, &d, &g.0, m);
            worst_fd = worst_fd.max((dr[m] - fd).abs() / (fd.abs() + 1e-12));
        }
        let h = gain_hessian(&p, &c, &d, &g).unwrap();
        let m = h.as_matrix();
        worst_asym = worst_asym.max((m - m.transpose()).amax());
        // eigenvalue relative to the Hessian scale
        let scale = m.diagonal().max().max(1.0);
        min_ev = min_ev.min(SymmetricEigen::new(m.clone()).eigenvalues.min() / scale);
    }
    (
        worst_fd <= 1e-5 && worst_asym == 0.0 && min_ev >= -1e-10,
        format!(
            "d_r worst relative error {worst_fd:.2e} (limit 1e-5), max asymmetry {worst_asym:e}, min scaled eigenvalue {min_ev:.2e} (limit -1e-10)"
        ),
    )
}

fn ols() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let gram = |rng: &mut ChaCha8Rng, order: usize, dependent: &[usize]| {
        let rows = 2 * order + 5;
        let mut b = gaussian(rng, rows, order);
        for &j in dependent {
            let combo = b.column(j - 1) * 1.5 - b.column(j - 2);
            b.set_column(j, &combo);
        }
        SymmetricMatrix::from_lower(b.tr_mul(&b) / rows as f64).unwrap()
    };
    let mut worst_full = 0.0_f64;
    for _ in 0..100 {
        let order = rng.random_range(1..=30);
        let r = gram(&mut rng, order, &[]);
        let cols = rng.random_range(1..=4);
        let c = gaussian(&mut rng, order, cols);
        let w = ols_solve(&r, &c, &ols_factor(&r, 1e-12).unwrap()).unwrap().solution;
        let direct = r.as_matrix().clone().lu().solve(&c).unwrap().transpose();
        worst_full = worst_full.max(rel(&w, &direct));
    }
    let mut worst_reduced = 0.0_f64;
    let mut frozen_ok = true;
    for _ in 0..100 {
        let order = rng.random_range(4..=30);
        let mut dependent: Vec<usize> = (0..rng.random_range(1..=order / 3)).map(|_| rng.random_range(2..order)).collect();
        dependent.sort_unstable();
        dependent.dedup();
        let r = gram(&mut rng, order, &dependent);
        let c = gaussian(&mut rng, order, 2);
        let f = ols_factor(&r, DEFAULT_OLS_TOL).unwrap();
        let w = ols_solve(&r, &c, &f).unwrap().solution;
        let flagged: Vec<usize> = (0..order).filter(|&i| f.dependent_mask[i]).collect();
        frozen_ok &= flagged == dependent;
        frozen_ok &= dependent.iter().all(|&j| w.column(j).iter().all(|&v| v == 0.0));
        let keep: Vec<usize> = (0..order).filter(|i| !dependent.contains(i)).collect();
        let rk = r.as_matrix().select_rows(&keep).select_columns(&keep);
        let direct = rk.lu().solve(&c.select_rows(&keep)).unwrap().transpose();
        worst_reduced = worst_reduced.max(rel(&w.select_columns(&keep), &direct));
    }
    (
        worst_full <= 1e-8 && worst_reduced <= 1e-8 && frozen_ok,
        format!(
            "full rank worst {worst_full:.2e}, reduced worst {worst_reduced:.2e} (limit 1e-8), dependent positions exactly zero: {frozen_ok}"
        ),
    )
}

fn whitening_equivalence() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 800..900 {
        let (p, d) = random_instance(seed);
        let c = forward(&p, &d).unwrap();
        let g = bp_gradient(&p, &c, &d).unwrap();
        let ri = input_autocorrelation(&d).unwrap();
        let a = inverse_whitening_from_autocorrelation(ri.matrix(), 1e-12).unwrap();
        let mapped = transformed_gradient(&p, &d, &a) * &a;
        let hwo = hwo_gradient(&g, &ri, 1e-12).unwrap();
        worst = worst.max(rel(&hwo.g_hwo, &mapped));
    }
    (worst <= 1e-6, format!("100 instances, worst relative difference {worst:.2e} (limit 1e-6)"))
}

fn dependent_immunity() -> Outcome {
    let iters = 50;
    let base_raw = synthesize_regression(SynthKind::Teacher, 200, 6).unwrap();
    let specs: Vec<DependentInput> = vec![DependentInput::copy_of(0), "2*x1,-1*x2,3".parse().unwrap()];
    let aug_raw = augment_dependent(&base_raw, &specs).unwrap();
    let (base, aug) = (base_raw.to_dataset().unwrap(), aug_raw.to_dataset().unwrap());
    let c = config(Algorithm::OigHwo, 6, iters, 5);
    let init = initialize(&c, &base).unwrap();
    let a = train_from(&c, init.clone(), &base, &base, &mut |_| Ok(())).unwrap();
    let b = train_from(&c, init.with_appended_inputs(specs.len()), &aug, &aug, &mut |_| Ok(())).unwrap();
    let worst = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(x, y)| (x.train_mse - y.train_mse).abs())
        .fold(0.0, f64::max);
    // the weights after every prefix of the run
    let n = base.n_inputs();
    let mut frozen = true;
    for k in 1..=iters {
        let ck = config(Algorithm::OigHwo, 6, k, 5);
        let t = train_from(&ck, init.with_appended_inputs(specs.len()), &aug, &aug, &mut |_| Ok(())).unwrap();
        frozen &= t.final_params.w.columns(n, specs.len()).iter().all(|&v| v == 0.0);
    }
    (
        a.records.len() == iters && b.records.len() == iters && worst <= 1e-9 && frozen,
        format!("{iters} iterations, max |dE| {worst:.2e} (limit 1e-9), appended input weights stay zero: {frozen}"),
    )
}

fn lemmas() -> Outcome {
    let mut zero_ok = true;
    let mut identity_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for seed in 0..50 {
        let (p, d) = random_instance(seed);
        let n1 = p.n_inputs() + 1;
        let zero = GradientMatrix(DMatrix::zeros(p.n_hidden(), n1));
        let rmat = input_autocorrelation(&d).unwrap();
        zero_ok &= transform_gradient(&zero, rmat.matrix()).unwrap().0.iter().all(|&v| v == 0.0);

        // a signed permutation is orthogonal in floating point, so AᵀA = I exactly
        let mut perm: Vec<usize> = (0..n1).collect();
        for i in (1..n1).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let a = DMatrix::from_fn(n1, n1, |r, c| {
            if perm[r] == c {
                if rng.random_bool(0.5) {
                    -1.0
                } else {
                    1.0
                }
            } else {
                0.0
            }
        });
        let rmat = SymmetricMatrix::new(a.transpose() * &a).unwrap();
        let c = forward(&p, &d).unwrap();
        let g = bp_gradient(&p, &c, &d).unwrap();
        identity_ok &= transform_gradient(&g, &rmat).unwrap() == g;
    }
    (
        zero_ok && identity_ok,
        format!("G = 0 maps to 0: {zero_ok}; orthogonal A maps G to itself exactly: {identity_ok}"),
    )
}

fn non_increasing(t: &TrainTrace, slack: f64) -> Option<usize> {
    t.records
        .windows(2)
        .find(|w| w[1].train_mse > w[0].train_mse + slack)
        .map(|w| w[1].iteration)
}

fn monotone_descent() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..5 {
        let table = synthesize_regression(SynthKind::Teacher, 300, 100 + seed).unwrap();
        let d = table.to_dataset().unwrap();
        for (alg, iters) in [
            (Algorithm::OwoBp, 200),
            (Algorithm::OigBp, 200),
            (Algorithm::OigHwo, 200),
            (Algorithm::Lm, 200),
        ] {
            let c = config(alg, 8, iters, seed);
            let t = train_from(&c, initialize(&c, &d).unwrap(), &d, &d, &mut |_| Ok(())).unwrap();
            if let Some(k) = non_increasing(&t, 1e-9) {
                failures.push(format!("{alg} seed {seed} rises at {k}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        "5 teacher seeds x 200 iterations, OWO-BP, OIG-BP, OIG-HWO and LM never rise (slack 1e-9)".to_string()
    } else {
        failures.join("; ")
    };
    (failures.is_empty(), detail)
}

fn concrete_ordering() -> Outcome {
    let start = Instant::now();
    let root = workspace_root().join("data");
    let desc = table::load_descriptor(&root.join("concrete.desc")).unwrap();
    let tbl = table::load_table(&root.join("concrete.csv"), &desc).unwrap();
    assert_eq!((tbl.n_rows(), tbl.n_in, tbl.n_out), (1030, 8, 1));
    let mean = |alg| {
        let kc = KfoldConfig {
            train: config(alg, 13, 1000, 0),
            k: 10,
            fold_seed: 1,
            norm: oig_core::data::NormMode::ZScore,
        };
        run_kfold(&tbl, &kc).unwrap().aggregate.test_error
    };
    let owo = mean(Algorithm::OwoBp);
    let bp = mean(Algorithm::OigBp);
    let hwo = mean(Algorithm::OigHwo);
    let ratio = hwo / PAPER_CONCRETE_OIG_HWO;
    let secs = start.elapsed().as_secs_f64();
    (
        hwo <= bp && bp <= owo && (0.5..=2.0).contains(&ratio) && secs < 600.0,
        format!(
            "mean test MSE OIG-HWO {hwo:.4} <= OIG-BP {bp:.4} <= OWO-BP {owo:.4}; OIG-HWO / {PAPER_CONCRETE_OIG_HWO} = {ratio:.3} (limit 2); {secs:.1} s (limit 600 s)"
        ),
    )
}

/// Per-iteration multiplies written out term by term; the OLS term is kept
/// as six times its value so the `1/6` and `3/2` stay exact.
fn closed_form(alg: Algorithm, n: u128, m: u128, nh: u128, nv: u128) -> u128 {
    let nu = n + nh + 1;
    let nw = m * (n + nh + 1) + nh * (n + 1);
    let ols6 = nu * (nu + 1) * (6 * m + nu * (2 * nu + 1) + 9);
    let ols = ols6 / 6 + u128::from(ols6 % 6 >= 3);
    let bp = nv * (m * nu + 2 * nh * (n + 1) + m * (n + 6 * nh + 4)) + nw;
    let owo_bp = nv * (2 * nh * (n + 2) + m * (nu + 1) + m * (n + 6 * nh + 4) + nu * (nu + 1) / 2) + ols + nh * (n + 1);
    let oig = owo_bp + nv * ((n + 1) * (3 * m * nh + m * n + 2 * (m + n) + 3)) + (n + 1).pow(3)
        - nv * (m * (n + 6 * nh + 4) + nh * (n + 1));
    match alg {
        Algorithm::OwoBp => owo_bp,
        Algorithm::OigBp => oig,
        // the per-iteration G·CᵀC product on top of OIG-BP
        Algorithm::OigHwo => oig + nh * (n + 1) * (n + 2),
        Algorithm::Lm => bp + nv * (m * nu * (nu + 3 * nh * (n + 1)) + 4 * nh * nh * (n + 1) * (n + 1)) + nw.pow(3) + nw.pow(2),
        Algorithm::Scg => 4 * nv * (nh * (n + 1) + m * nu) + 10 * (nh * (n + 1) + m * nu),
    }
}

fn multiply_accounting() -> Outcome {
    let (n, m, nh, nv) = (17usize, 9usize, 13usize, 4745usize);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = gaussian(&mut rng, nv, n);
    let mix = gaussian(&mut rng, n, m);
    let t = (&x * &mix).map(f64::tanh);
    let d = Dataset::new(&x, t, Task::Approximation).unwrap();
    let mut exact = true;
    let mut detail = Vec::new();
    for alg in Algorithm::ALL {
        let iters = if alg == Algorithm::Lm { 2 } else { 3 };
        let c = config(alg, nh, iters, 1);
        let trace = train_from(&c, initialize(&c, &d).unwrap(), &d, &d, &mut |_| Ok(())).unwrap();
        let per = closed_form(alg, n as u128, m as u128, nh as u128, nv as u128);
        exact &= trace.records.len() == iters;
        exact &= trace
            .records
            .iter()
            .all(|r| u128::from(r.cumulative_multiplies) == r.iteration as u128 * per);
        detail.push(format!("{alg} {per}"));
    }
    let ratio = closed_form(Algorithm::Lm, 17, 9, 13, 4745) as f64 / closed_form(Algorithm::OigBp, 17, 9, 13, 4745) as f64;
    (
        exact && ratio >= 10.0,
        format!("k x per-iteration exact: {exact} ({}); M_lm / M_oig = {ratio:.1} (limit 10)", detail.join(", ")),
    )
}

fn oig(args: &[&str], out: &Path) -> std::process::Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    Command::new(env!("CARGO_BIN_EXE_oig")).args(&all).output().expect("run oig")
}

/// Everything but manifests, which carry a timestamp.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_str().unwrap().ends_with("_manifest.txt"))
        .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let concrete = workspace_root().join("data/concrete.csv");
    let concrete = concrete.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["train", "--data", concrete, "--algo", "oig-hwo", "--iters", "20", "--seed", "3"],
        vec!["train", "--synthetic", "teacher", "--algo", "scg", "--iters", "20", "--hidden", "5"],
        vec!["compare", "--synthetic", "correlated", "--iters", "10", "--hidden", "4"],
        vec!["kfold", "--synthetic", "noisy-linear", "--patterns", "100", "--k", "4", "--iters", "10", "--hidden", "3"],
        vec!["dependent-demo", "--synthetic", "teacher", "--augment", "x2", "--algo", "oig-hwo,oig-bp", "--iters", "10", "--hidden", "4"],
    ];
    let mut same = true;
    let mut n_files = 0;
    for args in &commands {
        let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let o = oig(args, dir.path());
                assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
                outputs(dir.path())
            })
            .collect();
        n_files += runs[0].len();
        same &= !runs[0].is_empty() && runs[0] == runs[1];
    }
    (
        same,
        format!("{} commands run twice, {n_files} output files byte-identical: {same}", commands.len()),
    )
}

fn shared_start() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let concrete = workspace_root().join("data/concrete.csv");
    let o = oig(
        &["compare", "--data", concrete.to_str().unwrap(), "--algo", "owo-bp,oig-bp,oig-hwo,scg,lm", "--iters", "5"],
        dir.path(),
    );
    if !o.status.success() {
        return (false, format!("compare failed: {}", String::from_utf8_lossy(&o.stderr)));
    }
    let first: Vec<f64> = Algorithm::ALL
        .iter()
        .map(|a| {
            let text = fs::read_to_string(dir.path().join(format!("curve_{}.txt", a.name()))).unwrap();
            text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap()
        })
        .collect();
    let spread = first.iter().map(|v| (v - first[0]).abs() / first[0]).fold(0.0, f64::max);
    let reported = String::from_utf8_lossy(&o.stdout).contains("shared start: PASS");
    (
        spread <= 1e-12 && reported,
        format!("five algorithms start at MSE {:.6}, max relative spread {spread:.1e} (limit 1e-12)", first[0]),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gradient vs finite differences", gradient_fd),
        ("gain gradient and Hessian", gain_system),
        ("OLS solve and dependence freezing", ols),
        ("HWO equals whitened-input gradient", whitening_equivalence),
        ("OIG-HWO immune to dependent inputs", dependent_immunity),
        ("gradient transform lemmas", lemmas),
        ("monotone descent", monotone_descent),
        ("Concrete 10-fold ordering", concrete_ordering),
        ("multiply accounting", multiply_accounting),
        ("determinism", determinism),
        ("shared start", shared_start),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {}  {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
