//! Desk-scale pilot: AC-on vs AC-off ensembles for a config, printed per
//! sample together with the averaged kick envelope.
//!
//! cargo run --release --example pilot -- configs/proof_of_principle.toml [cycles]

use std::path::PathBuf;

use pdtc::experiments::{run_points, ExperimentConfig, PointSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().expect("config path"));
    let mut cfg = ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{e}"));
    if let Some(c) = args.next() {
        cfg.schedule.cycles = c.parse().expect("cycles");
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let base = PointSpec::base(&cfg);
    let mut on = base.clone();
    on.label = "ac_on".into();
    let t = std::time::Instant::now();
    let pts = run_points(&cfg, &[base.ac_off(), on], workers).unwrap();
    println!(
        "L={} samples={} cycles={} amplitude={} ({:.1} s)",
        cfg.graph.n_spins,
        cfg.graph.n_samples,
        cfg.schedule.cycles,
        cfg.drive.amplitude,
        t.elapsed().as_secs_f64()
    );
    for p in &pts {
        let fs: Vec<String> = p.fidelities().iter().map(|f| format!("{f:.3}")).collect();
        println!(
            "{:<8} F={:.4} std={:.4} sem={:.4} T2'={:?} censored={} b_eff={:?}",
            p.spec.label,
            p.f_mean.unwrap_or(f64::NAN),
            p.f_std.unwrap_or(f64::NAN),
            p.f_sem().unwrap_or(f64::NAN),
            p.t2_mean,
            p.t2_censored,
            p.b_eff
        );
        println!("  per sample [{}]", fs.join(", "));
        // One post-kick sample per period.
        if let Some(tr) = p.mean_trace.as_ref() {
            let env: Vec<String> = tr
                .kicks()
                .step_by(5)
                .map(|s| format!("{:.3}", s.ix * s.toggle()))
                .collect();
            println!("  envelope every 5 periods [{}]", env.join(", "));
        }
    }
}
