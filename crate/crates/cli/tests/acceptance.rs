//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Stdio};

use cavity_purify::channel::{
    channel_spectrum, measurement_operators, ConditionalChannel, TRAPPING_TOL,
};
use cavity_purify::closed_form::{closed_form_three_emitter, ClosedForm, Validity};
use cavity_purify::dynamics::{build_tc_hamiltonian, HamiltonianSpec, SpectralHamiltonian};
use cavity_purify::hilbert::{total_excitation_operator, CompositeSpace, DensityMatrix, StateVector};
use cavity_purify::linalg::{max_abs, unitary_residual};
use cavity_purify::protocol::{run_purification, ProtocolResult};
use cavity_purify::states::{make_named_state, StateLabel};
use cavity_purify::verify::{standard_grid, GENERIC_GAMMA_TAU};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn product(cfg: &str) -> DensityMatrix {
    make_named_state(&StateLabel::Product(cfg.into()), cfg.len())
        .unwrap()
        .density_matrix()
}

fn run(n: usize, gt: f64, initial: &str, target: StateLabel, steps: usize) -> ProtocolResult {
    let ch = ConditionalChannel::for_emitters(n, gt, 1).unwrap();
    let target = make_named_state(&target, n).unwrap();
    run_purification(&product(initial), &ch, steps, &target).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn two_emitter_probability() -> Outcome {
    let mut worst = 0.0f64;
    for gt in standard_grid() {
        let r = run(2, gt, "eg", StateLabel::Singlet, 20);
        for rec in &r.records {
            let c = (6f64.sqrt() * gt).cos().powi(2 * rec.step as i32);
            worst = worst.max((rec.p_cumulative - 0.5 * (1.0 + c)).abs());
        }
    }
    check(worst <= 1e-10, format!("max |ΔP| = {worst:e}"))
}

fn two_emitter_fidelity() -> Outcome {
    let mut worst = 0.0f64;
    let mut invalid_above_one = 0;
    for gt in standard_grid() {
        let r = run(2, gt, "eg", StateLabel::Singlet, 20);
        for rec in &r.records {
            let c = (6f64.sqrt() * gt).cos().powi(2 * rec.step as i32);
            worst = worst.max((rec.fidelity - 1.0 / (1.0 + c)).abs());
            let literal = ClosedForm::TwoFidelityLiteral.evaluate(gt, rec.step as u32, 1);
            if literal.value > 1.0 && literal.validity != Validity::Valid {
                invalid_above_one += 1;
            }
        }
    }
    check(
        worst <= 1e-10 && invalid_above_one > 0,
        format!("max |ΔF| = {worst:e}; literal form flagged above 1 at {invalid_above_one} points"),
    )
}

fn single_step_purification() -> Outcome {
    let r = run(2, PI / (2.0 * 6f64.sqrt()), "eg", StateLabel::Singlet, 1);
    let (p, f) = (r.records[1].p_cumulative, r.records[1].fidelity);
    check(
        (p - 0.5).abs() <= 1e-12 && (f - 1.0).abs() <= 1e-12,
        format!("P1 = {p:.17}, F1 = {f:.17}"),
    )
}

fn three_emitter_laws() -> Outcome {
    let (mut dp, mut df) = (0.0f64, 0.0f64);
    for gt in standard_grid() {
        let r = run(3, gt, "egg", StateLabel::W, 20);
        for rec in &r.records {
            let c10 = (10f64.sqrt() * gt).cos().powi(2 * rec.step as i32);
            let c1 = gt.cos().powi(2 * rec.step as i32);
            dp = dp.max((rec.p_cumulative - (c10 + 2.0 * c1) / 3.0).abs());
            df = df.max((rec.fidelity - c10 / (c10 + 2.0 * c1)).abs());
        }
    }
    check(dp <= 1e-10 && df <= 1e-10, format!("max |ΔP| = {dp:e}, max |ΔF| = {df:e}"))
}

fn w_state_limit() -> Outcome {
    let r = run(3, PI / 10f64.sqrt(), "egg", StateLabel::W, 20);
    let last = r.last();
    check(
        (last.p_cumulative - 1.0 / 3.0).abs() <= 1e-6 && last.fidelity >= 1.0 - 1e-6,
        format!("P20 = {:.12}, 1 - F20 = {:e}", last.p_cumulative, 1.0 - last.fidelity),
    )
}

fn purify(args: &[&str], output: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_purify"))
        .args(args)
        .arg("--output")
        .arg(output)
        .stderr(Stdio::null())
        .status()
        .map_err(|e| format!("cannot start purify: {e}"))?;
    if !status.success() {
        return Err(format!("purify {} exited with {status}", args.join(" ")));
    }
    std::fs::read(output).map_err(|e| e.to_string())
}

fn figure_curves() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let gt = PI / 6f64.sqrt();
    let bytes = purify(
        &["protocol", "--emitters", "3", "--gamma-tau", "pi/sqrt(6)", "--steps", "12"],
        &dir.path().join("fig.csv"),
    )?;
    let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty output")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("no column {name}"));
    let (cn, cp, cf, cy) = (col("N")?, col("P_cumulative")?, col("F")?, col("Y_product")?);

    let (mut worst, mut y_expected) = (0.0f64, 1.0f64);
    let (mut prev_p, mut prev_f) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut monotone = true;
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let num = |i: usize| cells[i].parse::<f64>().map_err(|e| e.to_string());
        let n: u32 = cells[cn].parse().map_err(|_| "bad N")?;
        let (p, f, y) = (num(cp)?, num(cf)?, num(cy)?);
        let (pc, fc) = closed_form_three_emitter(gt, n);
        y_expected *= pc.value;
        worst = worst
            .max((p - pc.value).abs())
            .max((f - fc.value).abs())
            .max((y - y_expected).abs());
        monotone &= p <= prev_p && f >= prev_f;
        prev_p = p;
        prev_f = f;
        rows += 1;
    }
    check(
        rows == 13 && worst <= 1e-10 && monotone,
        format!("{rows} rows, max deviation {worst:e}, monotone = {monotone}"),
    )
}

fn trapping_spectroscopy() -> Outcome {
    let singlet = make_named_state(&StateLabel::Singlet, 2).unwrap();
    let mut worst = 0.0f64;
    let mut counts = Vec::new();
    for k in 1..=3 {
        for &gt in &GENERIC_GAMMA_TAU {
            let ch = ConditionalChannel::for_emitters(2, gt, k).unwrap();
            let sp = channel_spectrum(&ch).unwrap();
            let unit: Vec<usize> = (0..sp.pairs().len())
                .filter(|&i| (sp.pairs()[i].magnitude() - 1.0).abs() <= 1e-9)
                .collect();
            counts.push(unit.len());
            if let [i] = unit[..] {
                let fid = sp.pairs()[i].vector.overlap(singlet.state()).unwrap();
                worst = worst.max(1.0 - fid);
            }
        }
    }
    let all_one = counts.iter().all(|&c| c == 1);
    check(
        all_one && worst <= 1e-10,
        format!("{} channels, one unit eigenvalue each = {all_one}, max 1 - F = {worst:e}", counts.len()),
    )
}

fn degeneracy_structure() -> Outcome {
    let mut ok = true;
    let mut seen = Vec::new();
    for &gt in &GENERIC_GAMMA_TAU {
        let sp = channel_spectrum(&ConditionalChannel::for_emitters(3, gt, 1).unwrap()).unwrap();
        let values = sp.eigenvalues();
        let mut pairs = 0;
        let mut larger = 0;
        for (i, a) in values.iter().enumerate() {
            let close = values.iter().filter(|b| (*a - **b).norm() <= 1e-8).count();
            if close == 2 && values[..i].iter().all(|b| (*a - *b).norm() > 1e-8) {
                pairs += 1;
            }
            if close > 2 {
                larger += 1;
            }
        }
        ok &= values.len() == 8 && pairs == 2 && larger == 0;
        seen.push(pairs);
    }
    check(ok, format!("2-fold groups per interval: {seen:?}"))
}

fn ghz_not_generated() -> Outcome {
    let ghz = make_named_state(&StateLabel::Ghz, 3).unwrap();
    let mut worst = 0.0f64;
    for &gt in &GENERIC_GAMMA_TAU {
        let sp = channel_spectrum(&ConditionalChannel::for_emitters(3, gt, 1).unwrap()).unwrap();
        for pair in sp.pairs() {
            if pair.magnitude() >= 1.0 - TRAPPING_TOL {
                worst = worst.max(pair.vector.overlap(ghz.state()).unwrap());
            }
        }
    }
    check(worst < 1e-3, format!("max GHZ overlap with persisting eigenvectors = {worst:e}"))
}

fn random_state(rng: &mut ChaCha8Rng, space: CompositeSpace, support: &[usize]) -> StateVector {
    loop {
        let mut amps = vec![Complex64::new(0.0, 0.0); space.dim()];
        for &i in support {
            amps[i] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let v = StateVector::from_slice(space, &amps).unwrap();
        if v.norm() > 1e-3 {
            return v.normalized().unwrap();
        }
    }
}

fn structural_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cases = 60;
    let (mut comm, mut unit, mut contr, mut compl) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..cases {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(0..=3);
        let space = CompositeSpace::new(n, n + k).unwrap();
        let mult: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let spec = HamiltonianSpec::new(space, rng.random_range(0.2..2.0))
            .unwrap()
            .with_multipliers(mult)
            .unwrap();
        let h = build_tc_hamiltonian(&spec);
        comm = comm.max(max_abs(h.commutator(&total_excitation_operator(space)).unwrap().matrix()));
        let t = rng.random_range(0.0..3.0);
        let u = SpectralHamiltonian::new(&h).unwrap().propagator(t).unwrap();
        unit = unit.max(unitary_residual(u.matrix()));

        let ch = cavity_purify::channel::conditional_channel(&spec, t, k).unwrap();
        contr = contr.max(channel_spectrum(&ch).unwrap().magnitudes()[0] - 1.0);

        let ops = measurement_operators(&spec, t, k).unwrap();
        let support: Vec<usize> = (0..space.emitter_dim()).collect();
        let v = random_state(&mut rng, space.emitter_space(), &support);
        let total: f64 = ops.iter().map(|m| (m * v.amplitudes()).norm_squared()).sum();
        compl = compl.max((total - 1.0).abs());
    }
    check(
        comm <= 1e-12 && unit <= 1e-10 && contr <= 1e-10 && compl <= 1e-10,
        format!(
            "{cases} cases: |[H,N]| = {comm:e}, |U†U-I| = {unit:e}, max |λ|-1 = {contr:e}, |Σp-1| = {compl:e}"
        ),
    )
}

fn mixed_state_purification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gt = PI / 10f64.sqrt();
    let ch = ConditionalChannel::for_emitters(3, gt, 1).unwrap();
    let w = make_named_state(&StateLabel::W, 3).unwrap();
    let space = ch.emitter_space();
    let support: Vec<usize> = ["egg", "geg", "gge"]
        .iter()
        .map(|c| space.parse_config(c).unwrap())
        .collect();

    let mut slowest = 0usize;
    let mut failures = 0;
    let mut made = 0;
    while made < 20 {
        let rank = rng.random_range(1..=3);
        let mix: Vec<(f64, StateVector)> = (0..rank)
            .map(|_| (rng.random_range(0.05..1.0), random_state(&mut rng, space, &support)))
            .collect();
        let rho = DensityMatrix::mixture(&mix).unwrap();
        if rho.expectation_in(w.state()).unwrap() < 0.05 {
            continue;
        }
        made += 1;
        let r = run_purification(&rho, &ch, 25, &w).unwrap();
        match r.records.iter().find(|rec| rec.fidelity >= 0.99) {
            Some(rec) => slowest = slowest.max(rec.step),
            None => failures += 1,
        }
    }

    let vacuum = run_purification(&product("ggg"), &ch, 25, &w).unwrap();
    let vacuum_best = vacuum.records.iter().map(|r| r.fidelity).fold(0.0, f64::max);
    check(
        failures == 0 && vacuum_best < 0.99,
        format!("20 states, {failures} failed, slowest reached F ≥ 0.99 at N = {slowest}; vacuum best F = {vacuum_best}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 4] = [
        &["protocol", "--emitters", "3", "--gamma-tau", "pi/sqrt(6)", "--steps", "12"],
        &["protocol", "--trajectories", "5000", "--seed", "42", "--format", "json"],
        &["spectrum", "--emitters", "3", "--gamma-tau", "0.83"],
        &["sweep", "--gamma-tau", "0.1:3.0:30", "--kept-photons", "1,2,3", "--steps", "10", "--jobs", "4"],
    ];
    let mut total = 0;
    for (i, args) in runs.iter().enumerate() {
        let a = purify(args, &dir.path().join(format!("a{i}")))?;
        let b = purify(args, &dir.path().join(format!("b{i}")))?;
        if a != b {
            return Err(format!("outputs differ for `{}`", args.join(" ")));
        }
        total += a.len();
    }
    let mut serial: Vec<&str> = runs[3].to_vec();
    serial.pop();
    serial.push("1");
    let one = purify(&serial, &dir.path().join("serial"))?;
    let four = purify(runs[3], &dir.path().join("parallel"))?;
    check(
        one == four,
        format!("4 configurations byte-identical ({total} bytes), sweep independent of --jobs = {}", one == four),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("two-emitter probability law", two_emitter_probability),
        ("two-emitter fidelity adjudication", two_emitter_fidelity),
        ("single-step exact purification", single_step_purification),
        ("three-emitter laws", three_emitter_laws),
        ("W-state limit", w_state_limit),
        ("three-emitter curves at γτ = π/√6", figure_curves),
        ("trapping spectroscopy", trapping_spectroscopy),
        ("degeneracy structure", degeneracy_structure),
        ("GHZ non-generability", ghz_not_generated),
        ("structural invariants", structural_invariants),
        ("mixed-state purification", mixed_state_purification),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
