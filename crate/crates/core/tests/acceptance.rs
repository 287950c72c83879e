//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion, preceded
//! by the measured quantities behind it.
//!
//! The process exits non-zero only if a check cannot run at all, or if
//! `CVKIT_ACCEPTANCE_STRICT=1` is set and some criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cvkit::fock::{apply_loss, embed, fidelity, squeezer, FockCutoff, GaussianCircuit, Mode, TwoModeState};
use cvkit::homodyne::{joint_pdf, pdf_grid, Channel, CorrelationPattern, HomodyneSampler, QuadGrid};
use cvkit::maxlik::{reconstruct_with, BinPovm, DEFAULT_ITERATIONS};
use cvkit::mlp::{evaluate_accuracy, init_model, loss_and_gradient, train_with, Example, TrainConfig, TrainOutcome};
use cvkit::pipeline::dataset::DatasetRecord;
use cvkit::pipeline::embed::{ppt_silhouette, source_matrix, EmbedSource};
use cvkit::pipeline::evaluate::{evaluate, spearman, EvaluateOptions};
use cvkit::pipeline::generate::{generate_records, GenerateOptions};
use cvkit::pipeline::sweep::{first_zero_crossing, loss_sweep, LossSweepOptions};
use cvkit::seeding::{rng_for, CvRng};
use cvkit::stellar::{synthesize_random_state, GenerationRanges, PhotonSubtraction};
use cvkit::tsne::{embed_with_keys, TsneConfig};
use cvkit::witness::{label_state, qfi_quadratic_forms, variance, GeneratorSet, LabelVector};
use cvkit::Result;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

const SEED: u64 = 7;

const VACUUM_PDF_TOL: f64 = 1e-10;
const PDF_NORM_TOL: f64 = 2e-3;
const SQUEEZE_VAR_TOL: f64 = 1e-6;
const LOSS_TOL: f64 = 1e-12;
const PURE_QFI_TOL: f64 = 1e-8;
const BELL_PPT_TOL: f64 = 1e-12;

const PRODUCT_DRAWS: usize = 1000;
const ORDER_TOL: f64 = 1e-9;

const GRAD_PARAMS: usize = 100;
const GRAD_REL_TOL: f64 = 1e-5;

const MAXLIK_STATES: usize = 50;
const VACUUM_FIDELITY: f64 = 0.99;
const FIDELITY_LOW: (f64, f64) = (0.73, 0.07);
const FIDELITY_HIGH: (f64, f64) = (0.95, 0.07);

const DESK_STATES: usize = 2000;
const DESK_EPOCHS: usize = 300;
const DESK_PPT: f64 = 0.85;
const DESK_QFI: f64 = 0.75;
const SWEEP_STATES: usize = 500;
const MAXLIK_FLAT: f64 = 0.05;

const QFI1_THRESHOLD: (f64, f64) = (0.33, 0.07);

const CLUSTER_STATES: usize = 500;
const GRAD_MIN_MAGNITUDE: f64 = 1e-4;

struct Criterion {
    id: usize,
    name: &'static str,
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn new(id: usize, name: &'static str) -> Self {
        Self {
            id,
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, pass: bool, detail: String) {
        println!("    {} {detail}", if pass { "ok  " } else { "FAIL" });
        self.checks.push((pass, detail));
    }

    fn note(&self, detail: String) {
        println!("    info {detail}");
    }

    fn finish(self, started: Instant) -> bool {
        let pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.0);
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.0).map(|c| c.1.as_str()).collect();
        println!(
            "{} [{}] {} ({} checks, {:.1}s){}",
            if pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.checks.len(),
            started.elapsed().as_secs_f64(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(": {}", failed.join("; "))
            }
        );
        pass
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn tmsv(r: f64, cutoff: FockCutoff) -> Result<TwoModeState> {
    let mut psi = DVector::zeros(cutoff.dim());
    for n in 0..cutoff.local_dim() {
        psi[cutoff.index(n, n)] = Complex64::new(r.tanh().powi(n as i32) / r.cosh(), 0.0);
    }
    let norm = psi.norm();
    TwoModeState::from_pure(&(psi / Complex64::new(norm, 0.0)), cutoff)
}

fn random_states(count: usize, ranges: &GenerationRanges, stream: u64) -> Result<Vec<TwoModeState>> {
    (0..count as u64)
        .map(|i| Ok(synthesize_random_state(ranges, FockCutoff::default(), &mut rng_for(SEED, &[stream, i]))?.state))
        .collect()
}

fn physics_kernel() -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(1, "physics kernel");
    let cutoff = FockCutoff::default();

    let vacuum = TwoModeState::vacuum(cutoff);
    let pts: Vec<f64> = (0..=16).map(|k| -4.0 + 0.5 * k as f64).collect();
    let mut err: f64 = 0.0;
    for channel in Channel::ALL {
        for &a in &pts {
            for &b in &pts {
                let exact = (-(a * a + b * b) / 2.0).exp() / (2.0 * PI);
                err = err.max((joint_pdf(&vacuum, channel, a, b)? - exact).abs());
            }
        }
    }
    c.check(err <= VACUUM_PDF_TOL, format!("vacuum joint pdf max error {err:.2e} (tol {VACUUM_PDF_TOL:e})"));

    let grid = QuadGrid::default();
    let centers = grid.sample_centers();
    let w = grid.sample_cell_width();
    let mut worst: f64 = 0.0;
    for state in random_states(20, &GenerationRanges::default(), 0x101)? {
        for channel in Channel::ALL {
            let total = pdf_grid(&state, channel, &centers, &centers)?.sum() * w * w;
            worst = worst.max((total - 1.0).abs());
        }
    }
    c.check(
        worst <= PDF_NORM_TOL,
        format!("pdf normalization |∫p − 1| ≤ {worst:.2e} over 20 states × 4 channels at n_max=9 (tol {PDF_NORM_TOL:e})"),
    );

    let big = FockCutoff::new(24)?;
    let x1 = embed(&cvkit::fock::build_mode_operators(big).x, Mode::One);
    let mut err: f64 = 0.0;
    for r in [0.2, 0.5] {
        let s = squeezer(Complex64::new(r, 0.0), big.local_dim());
        let mut psi = DVector::zeros(big.dim());
        for n in 0..big.local_dim() {
            psi[big.index(n, 0)] = s[(n, 0)];
        }
        let state = TwoModeState::from_pure(&psi, big)?;
        err = err.max((variance(&state, &x1) - (-2.0 * r).exp()).abs());
    }
    c.check(
        err <= SQUEEZE_VAR_TOL,
        format!("squeezed vacuum Var(x) − e^(−2r) max {err:.2e} for r ∈ {{0.2, 0.5}} at n_max=24 (tol {SQUEEZE_VAR_TOL:e})"),
    );

    let one = TwoModeState::fock(1, 0, cutoff)?;
    let mut err: f64 = 0.0;
    for eta in [0.0, 0.1, 0.37, 0.8, 1.0] {
        let out = apply_loss(&one, eta, 0.0)?;
        let mut expected = DMatrix::<Complex64>::zeros(cutoff.dim(), cutoff.dim());
        expected[(0, 0)] = Complex64::new(eta, 0.0);
        let i1 = cutoff.index(1, 0);
        expected[(i1, i1)] = Complex64::new(1.0 - eta, 0.0);
        err = err.max(max_abs((out.rho() - expected).iter().map(|z| z.norm())));
    }
    c.check(err <= LOSS_TOL, format!("loss on |1⟩⟨1| max entry error {err:.2e} (tol {LOSS_TOL:e})"));

    let pure_ranges = GenerationRanges {
        eta_max: 0.0,
        ..Default::default()
    };
    let mut err: f64 = 0.0;
    for state in random_states(20, &pure_ranges, 0x102)? {
        let forms = qfi_quadratic_forms(&state, GeneratorSet::Second)?;
        let ops = GeneratorSet::Second.operators(cutoff);
        for (m, mode) in [Mode::One, Mode::Two].into_iter().enumerate() {
            for (k, op) in ops.iter().enumerate() {
                let a = m * ops.len() + k;
                err = err.max((forms.fisher[(a, a)] - 4.0 * variance(&state, &embed(op, mode))).abs());
            }
        }
    }
    c.check(
        err <= PURE_QFI_TOL,
        format!("pure-state F_Q − 4·Var max {err:.2e} over 20 states × 10 generators (tol {PURE_QFI_TOL:e})"),
    );

    let mut bell = DVector::zeros(cutoff.dim());
    // only the 4×4 block of |0⟩,|1⟩ per mode is occupied
    bell[cutoff.index(0, 0)] = Complex64::new(0.5f64.sqrt(), 0.0);
    bell[cutoff.index(1, 1)] = Complex64::new(0.5f64.sqrt(), 0.0);
    let bell = TwoModeState::from_pure(&bell, cutoff)?;
    let min_pt = -cvkit::witness::ppt_witness(&bell)?;
    c.check(
        (min_pt + 0.5).abs() <= BELL_PPT_TOL,
        format!("PT minimum eigenvalue of (|00⟩+|11⟩)/√2 in the 4×4 block = {min_pt:.15}"),
    );
    Ok(c.finish(t))
}

/// Random single-mode state on levels 0..=2, as amplitudes.
fn local_amplitudes(rng: &mut CvRng) -> [Complex64; 3] {
    let mut a = [Complex64::new(0.0, 0.0); 3];
    let top = rng.random_range(0..3);
    for z in a.iter_mut().take(top + 1) {
        *z = Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..2.0 * PI));
    }
    let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.map(|z| z / n)
}

fn single_product_state(index: u64) -> Result<TwoModeState> {
    let cutoff = FockCutoff::default();
    let mut rng = rng_for(SEED, &[0x201, index]);
    let ranges = GenerationRanges::default();
    let polar = |rng: &mut CvRng, max: f64| Complex64::from_polar(rng.random_range(0.0..max), rng.random_range(0.0..2.0 * PI));
    let circuit = GaussianCircuit {
        bs_in: None,
        squeeze: [polar(&mut rng, ranges.r_max), polar(&mut rng, ranges.r_max)],
        displace: [polar(&mut rng, ranges.alpha_max), polar(&mut rng, ranges.alpha_max)],
        bs_out: None,
        loss: [rng.random_range(0.0..ranges.eta_max), rng.random_range(0.0..ranges.eta_max)],
    };
    let (a, b) = (local_amplitudes(&mut rng), local_amplitudes(&mut rng));
    let grid = DMatrix::from_fn(3, 3, |i, j| a[i] * b[j]);
    let (psi, leakage) = circuit.evolve_pure(&grid, cutoff)?;
    let pure = TwoModeState::from_grid(&psi, cutoff)?.with_leakage(leakage);
    apply_loss(&pure, circuit.loss[0], circuit.loss[1])
}

/// Odd indices give an even mixture of two product states.
fn random_product_state(index: u64) -> Result<TwoModeState> {
    let first = single_product_state(index)?;
    if index.is_multiple_of(2) {
        return Ok(first);
    }
    let other = single_product_state(index + (1 << 32))?;
    TwoModeState::from_density((first.rho() + other.rho()) * Complex64::new(0.5, 0.0), first.cutoff())
}

fn witness_suite() -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(2, "witness suite");
    let mut false_pos = [0usize; 3];
    let mut order_gap = f64::INFINITY;
    for i in 0..PRODUCT_DRAWS as u64 {
        let state = random_product_state(i)?;
        let (w, l) = label_state(&state)?;
        for (k, &hit) in l.as_array().iter().enumerate() {
            false_pos[k] += hit as usize;
        }
        order_gap = order_gap.min(w.qfi2 - w.qfi1);
    }
    c.check(
        false_pos == [0, 0, 0],
        format!("{PRODUCT_DRAWS} random product states: false positives (ppt, qfi1, qfi2) = {false_pos:?}"),
    );

    let mut tmsv_labels = Vec::new();
    for r in [0.3, 0.6] {
        let (w, l) = label_state(&tmsv(r, FockCutoff::default())?)?;
        order_gap = order_gap.min(w.qfi2 - w.qfi1);
        tmsv_labels.push((r, l));
    }
    let all_on = tmsv_labels.iter().all(|(_, l)| *l == LabelVector::new(true, true, true));
    c.check(
        all_on,
        format!(
            "two-mode squeezed vacuum labels {}",
            tmsv_labels
                .iter()
                .map(|(r, l)| format!("r={r}: {:?}", l.as_array().map(u8::from)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );

    for state in random_states(300, &GenerationRanges::default(), 0x202)? {
        let (w, _) = label_state(&state)?;
        order_gap = order_gap.min(w.qfi2 - w.qfi1);
    }
    c.check(
        order_gap >= -ORDER_TOL,
        format!("min(qfi2 − qfi1) = {order_gap:.3e} over {} states (tol −{ORDER_TOL:e})", PRODUCT_DRAWS + 302),
    );
    Ok(c.finish(t))
}

fn gradient_check() -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(3, "gradient check");
    let mut model = init_model(SEED);
    let patterns: Vec<CorrelationPattern> = random_states(4, &GenerationRanges::default(), 0x301)?
        .iter()
        .map(cvkit::homodyne::pattern_from_pdf)
        .collect::<Result<_>>()?;
    let refs: Vec<&CorrelationPattern> = patterns.iter().collect();
    let labels = vec![
        LabelVector::new(true, false, true),
        LabelVector::new(false, false, false),
        LabelVector::new(true, true, true),
        LabelVector::new(false, true, false),
    ];
    let (_, grads) = loss_and_gradient::<CvRng>(&model, &refs, &labels, 0.0, None);
    let mut rng = rng_for(SEED, &[0x302]);
    let mut offset = 0;
    let mut per_layer = Vec::new();
    let mut worst: f64 = 0.0;
    let mut worst_at = (0, 0, 0.0, 0.0);
    let per = GRAD_PARAMS.div_ceil(model.layers.len());
    for g in &grads {
        let w = g.weights.len();
        let n = w + g.bias.len();
        let mut checked = 0;
        let mut tries = 0;
        while checked < per && tries < 50 * per {
            tries += 1;
            let k = rng.random_range(0..n);
            let analytic = if k < w { g.weights[k] } else { g.bias[k - w] };
            let h = 1e-6;
            let base = model.parameter(offset + k);
            model.set_parameter(offset + k, base + h);
            let up = loss_and_gradient::<CvRng>(&model, &refs, &labels, 0.0, None).0;
            model.set_parameter(offset + k, base - h);
            let down = loss_and_gradient::<CvRng>(&model, &refs, &labels, 0.0, None).0;
            model.set_parameter(offset + k, base);
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            // a central difference resolves the loss only to about eps·L/h ≈ 1e-10,
            // so smaller gradients cannot be compared at relative precision
            if scale < GRAD_MIN_MAGNITUDE {
                continue;
            }
            let err = (analytic - numeric).abs() / scale;
            if err > worst {
                worst = err;
                worst_at = (per_layer.len(), k, analytic, numeric);
            }
            checked += 1;
        }
        per_layer.push(checked);
        offset += n;
    }
    let total: usize = per_layer.iter().sum();
    c.check(
        total >= GRAD_PARAMS && per_layer.iter().all(|&k| k > 0),
        format!("{total} parameters with |gradient| ≥ {GRAD_MIN_MAGNITUDE:e} checked, per layer {per_layer:?}"),
    );
    c.note(format!(
        "worst entry: layer {} parameter {} analytic {:.6e} numeric {:.6e}",
        worst_at.0, worst_at.1, worst_at.2, worst_at.3
    ));
    c.check(worst < GRAD_REL_TOL, format!("max relative error {worst:.2e} (tol {GRAD_REL_TOL:e})"));
    Ok(c.finish(t))
}

fn maxlik_suite() -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(4, "MaxLik baseline");
    let cutoff = FockCutoff::default();
    let grid = QuadGrid::default();
    let povm = BinPovm::new(cutoff, grid)?;

    let mut monotone_runs = 0;
    let mut worst_drop: f64 = 0.0;
    let mut fids: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (i, state) in random_states(MAXLIK_STATES, &GenerationRanges::default(), 0x401)?.iter().enumerate() {
        let sampler = HomodyneSampler::with_grid(state, &grid)?;
        for (slot, n) in [10usize, 100_000].into_iter().enumerate() {
            let samples = sampler.sample(n, &mut rng_for(SEED, &[0x402, i as u64, n as u64]));
            let rec = reconstruct_with(&povm, &samples, DEFAULT_ITERATIONS)?;
            let drop = max_abs(rec.log_likelihood.windows(2).map(|w| w[0] - w[1]));
            worst_drop = worst_drop.max(drop);
            monotone_runs += usize::from(drop <= 1e-12);
            fids[slot].push(fidelity(state, &rec.state)?);
        }
    }
    c.check(
        monotone_runs == 2 * MAXLIK_STATES,
        format!(
            "log-likelihood non-decreasing over {DEFAULT_ITERATIONS} iterations in {monotone_runs}/{} runs (largest drop {worst_drop:.1e})",
            2 * MAXLIK_STATES
        ),
    );

    let vacuum = TwoModeState::vacuum(cutoff);
    let samples = HomodyneSampler::with_grid(&vacuum, &grid)?.sample(10_000, &mut rng_for(SEED, &[0x403]));
    let f_vac = fidelity(&vacuum, &reconstruct_with(&povm, &samples, DEFAULT_ITERATIONS)?.state)?;
    c.check(
        f_vac >= VACUUM_FIDELITY,
        format!("vacuum self-reconstruction fidelity {f_vac:.4} at N=10000 (need ≥ {VACUUM_FIDELITY})"),
    );

    for (slot, n, (target, tol)) in [(0, 10, FIDELITY_LOW), (1, 100_000, FIDELITY_HIGH)] {
        let m = mean(&fids[slot]);
        c.check(
            (m - target).abs() <= tol,
            format!("mean fidelity over {MAXLIK_STATES} states at N={n}: {m:.4} (target {target} ± {tol})"),
        );
        let roots: Vec<f64> = fids[slot].iter().map(|f| f.sqrt()).collect();
        c.note(format!("root fidelity Tr√(√ρσ√ρ) mean at N={n}: {:.4}", mean(&roots)));
    }
    Ok(c.finish(t))
}

struct DeskRun {
    records: Vec<DatasetRecord>,
    examples: Vec<Example>,
    outcome: TrainOutcome,
}

fn desk_training() -> Result<DeskRun> {
    let started = Instant::now();
    let records = generate_records(&GenerateOptions {
        count: DESK_STATES,
        seed: SEED,
        ..Default::default()
    })?;
    println!("    info generated {DESK_STATES} states in {:.0}s", started.elapsed().as_secs_f64());
    let examples: Vec<Example> = records.iter().map(|r| r.example()).collect();
    let config = TrainConfig {
        epochs: DESK_EPOCHS,
        seed: SEED,
        ..Default::default()
    };
    let started = Instant::now();
    let outcome = train_with(init_model(SEED), &examples, &config, |r| {
        if r.epoch % 50 == 0 {
            println!(
                "    info epoch {:>3} train {:.4} val {:.4} acc {:.3} {:.3} {:.3}",
                r.epoch, r.train_loss, r.val_loss, r.val_accuracy[0], r.val_accuracy[1], r.val_accuracy[2]
            );
        }
    })?;
    println!("    info trained {DESK_EPOCHS} epochs in {:.0}s", started.elapsed().as_secs_f64());
    Ok(DeskRun {
        records,
        examples,
        outcome,
    })
}

fn desk_learning(run: &DeskRun) -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(5, "desk-scale learning");
    let val: Vec<Example> = run.outcome.val_indices.iter().map(|&i| run.examples[i].clone()).collect();
    let acc = evaluate_accuracy(&run.outcome.best_model, &val)?;
    c.note(format!("best epoch {} of {DESK_EPOCHS}", run.outcome.best_epoch));
    c.check(
        acc[0] >= DESK_PPT && acc[1] >= DESK_QFI && acc[2] >= DESK_QFI,
        format!(
            "validation accuracy on exact patterns ppt {:.4} qfi1 {:.4} qfi2 {:.4} (need ≥ {DESK_PPT}, {DESK_QFI}, {DESK_QFI})",
            acc[0], acc[1], acc[2]
        ),
    );

    let opts = EvaluateOptions {
        n_states: SWEEP_STATES,
        seed: SEED,
        ..Default::default()
    };
    let report = evaluate(&run.outcome.best_model, &opts)?;
    c.note(format!(
        "unseen exact patterns: ppt {:.4} qfi1 {:.4} qfi2 {:.4}",
        report.theory_accuracy[0], report.theory_accuracy[1], report.theory_accuracy[2]
    ));
    for row in &report.rows {
        let ml = row.maxlik.unwrap_or([f64::NAN; 3]);
        c.note(format!(
            "N={:<6} nn {:.3} {:.3} {:.3} | maxlik {:.3} {:.3} {:.3} fidelity {:.4}",
            row.n,
            row.nn[0],
            row.nn[1],
            row.nn[2],
            ml[0],
            ml[1],
            ml[2],
            row.maxlik_fidelity.unwrap_or(f64::NAN)
        ));
    }
    let ns: Vec<f64> = report.rows.iter().map(|r| r.n as f64).collect();
    let nn_ppt: Vec<f64> = report.rows.iter().map(|r| r.nn[0]).collect();
    let rho = spearman(&ns, &nn_ppt);
    c.check(rho > 0.0, format!("Spearman(N, NN PPT accuracy) = {rho:.3} over {SWEEP_STATES} unseen states (need > 0)"));
    let ml_ppt: Vec<f64> = report.rows.iter().map(|r| r.maxlik.map_or(f64::NAN, |m| m[0])).collect();
    let centre = mean(&ml_ppt);
    let spread = max_abs(ml_ppt.iter().map(|a| (a - centre).abs()));
    c.check(
        spread <= MAXLIK_FLAT,
        format!("MaxLik PPT accuracy within ±{spread:.3} of its mean {centre:.3} across the sweep (need ±{MAXLIK_FLAT})"),
    );
    Ok(c.finish(t))
}

fn robustness_sweep() -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(6, "robustness sweep");
    let opts = LossSweepOptions::default();
    let rows = loss_sweep(None, &opts)?;
    let etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let qfi1: Vec<f64> = rows.iter().map(|r| r.witness.qfi1).collect();
    let crossing = first_zero_crossing(&etas, &qfi1);
    let (target, tol) = QFI1_THRESHOLD;
    c.check(
        crossing.is_some_and(|x| (x - target).abs() <= tol),
        format!("first-order QFI witness crosses zero at η = {} (target {target} ± {tol})", crossing.map_or("none".into(), |x| format!("{x:.3}"))),
    );
    let state = cvkit::stellar::photon_subtracted_state(&PhotonSubtraction::reference(0.5), opts.cutoff)?;
    let (w, _) = label_state(&state)?;
    c.check(w.ppt_min > 0.0, format!("PPT witness at η = 0.5: {:.5} (need > 0)", w.ppt_min));
    let at_zero = &rows[0].witness;
    c.note(format!(
        "η = 0 witnesses ppt {:.4} qfi1 {:.4} qfi2 {:.4}",
        at_zero.ppt_min, at_zero.qfi1, at_zero.qfi2
    ));
    Ok(c.finish(t))
}

fn clustering(run: &DeskRun) -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(7, "clustering property");
    let subset: Vec<DatasetRecord> = run
        .outcome
        .val_indices
        .iter()
        .chain(&run.outcome.train_indices)
        .take(CLUSTER_STATES)
        .map(|&i| run.records[i].clone())
        .collect();
    let patterns: Vec<&CorrelationPattern> = subset.iter().map(|r| &r.pattern).collect();
    let keys: Vec<u64> = subset.iter().map(|r| r.state_id).collect();
    let mut scores = Vec::new();
    for source in [EmbedSource::Raw, EmbedSource::Features] {
        let data = source_matrix(source, Some(&run.outcome.best_model), &patterns)?;
        let s = ppt_silhouette(&data, &subset)?;
        let tsne = TsneConfig {
            seed: SEED,
            ..Default::default()
        };
        let e = embed_with_keys(&data, &keys, &tsne)?;
        c.check(
            e.final_kl < e.initial_kl,
            format!("t-SNE on {source} ({} dims): KL {:.4} -> {:.4}", data.ncols(), e.initial_kl, e.final_kl),
        );
        scores.push(s);
    }
    c.check(
        scores[1] > scores[0],
        format!(
            "E_PPT silhouette on {CLUSTER_STATES} states: features {:.4} vs raw {:.4}",
            scores[1], scores[0]
        ),
    );
    Ok(c.finish(t))
}

fn cli(args: &[&str], threads: &str) -> Result<()> {
    let out = Command::new(env!("CARGO_BIN_EXE_cvkit"))
        .env("CVKIT_THREADS", threads)
        .args(args)
        .output()?;
    if !out.status.success() {
        return Err(cvkit::CvError::Config(format!(
            "cvkit {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )));
    }
    Ok(())
}

fn pipeline_run(dir: &Path, threads: &str) -> Result<Vec<(String, Vec<u8>)>> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    fs::write(dir.join("generate.cfg"), "count = 40\n")?;
    fs::write(dir.join("train.cfg"), "epochs = 3\n")?;
    fs::write(dir.join("evaluate.cfg"), "n_states = 6\nn_list = 10, 1000\n")?;
    cli(&["generate", "--seed", "3", "--config", &p("generate.cfg"), "--out", &p("d.cvds")], threads)?;
    cli(
        &["train", "--seed", "3", "--dataset", &p("d.cvds"), "--config", &p("train.cfg"), "--out", &p("m.cvnn")],
        threads,
    )?;
    cli(
        &["evaluate", "--seed", "3", "--model", &p("m.cvnn"), "--config", &p("evaluate.cfg"), "--out", &p("eval.csv")],
        threads,
    )?;
    ["d.cvds", "m.cvnn", "m.cvnn.final", "m.cvnn.history.csv", "eval.csv"]
        .iter()
        .map(|f| Ok((f.to_string(), fs::read(dir.join(f))?)))
        .collect()
}

fn reproducibility() -> Result<bool> {
    let t = Instant::now();
    let mut c = Criterion::new(8, "reproducibility");
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    let first = pipeline_run(a.path(), "1")?;
    let second = pipeline_run(b.path(), "2")?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        c.check(x == y, format!("{name}: {} bytes, identical across runs: {}", x.len(), x == y));
    }
    Ok(c.finish(t))
}

/// Criteria selected by `CVKIT_ACCEPTANCE_ONLY` (comma separated ids), or all.
fn selected() -> Vec<usize> {
    match std::env::var("CVKIT_ACCEPTANCE_ONLY") {
        Ok(v) if !v.trim().is_empty() => v.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        _ => (1..=8).collect(),
    }
}

fn main() {
    let started = Instant::now();
    let only = selected();
    let want = |id: usize| only.contains(&id);
    let mut results = Vec::new();
    let mut record = |r: Result<bool>, id: usize| match r {
        Ok(pass) => results.push(pass),
        Err(e) => {
            println!("FAIL [{id}] could not run: {e}");
            results.push(false);
        }
    };
    if want(1) {
        record(physics_kernel(), 1);
    }
    if want(2) {
        record(witness_suite(), 2);
    }
    if want(3) {
        record(gradient_check(), 3);
    }
    if want(4) {
        record(maxlik_suite(), 4);
    }
    if want(5) || want(7) {
        match desk_training() {
            Ok(run) => {
                if want(5) {
                    record(desk_learning(&run), 5);
                }
                if want(7) {
                    record(clustering(&run), 7);
                }
            }
            Err(e) => {
                for id in [5, 7].into_iter().filter(|&id| want(id)) {
                    println!("FAIL [{id}] could not run: {e}");
                    record(Ok(false), id);
                }
            }
        }
    }
    if want(6) {
        record(robustness_sweep(), 6);
    }
    if want(8) {
        record(reproducibility(), 8);
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    let strict = std::env::var("CVKIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
