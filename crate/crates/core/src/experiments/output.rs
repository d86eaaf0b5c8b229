use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::{config_points, map_dome, run_points, ConfigError, DomeMap, ExperimentConfig, ExperimentKind, PointResult, SweepResult};
use crate::analysis::fidelity;
use crate::propagator::TimeTrace;

/// Version of the run-directory layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed run directory: {0}")]
    Malformed(String),
}

impl RunError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub result: SweepResult,
    pub dome: Option<DomeMap>,
}

impl RunOutcome {
    pub fn failed_samples(&self) -> usize {
        self.result.failed_samples()
    }

    /// 0 when every trajectory succeeded, 2 on partial failure.
    pub fn exit_code(&self) -> i32 {
        if self.failed_samples() == 0 {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct ManifestPoint<'a> {
    index: usize,
    label: &'a str,
    ac: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    parameter: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    amplitude: f64,
    phase: f64,
    frequency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_res: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    gamma_y: f64,
    n_pulses: usize,
    sigma: f64,
    schedule_hash: &'a str,
    schedule: String,
    trace: String,
    graph_seeds: Vec<u64>,
    disorder_seeds: Vec<u64>,
    n_ok: usize,
    n_failed: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2_mean: Option<f64>,
    t2_censored: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2_lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beat_frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_spinlock: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_m_plateau: Option<f64>,
    /// Late-time mean of `|<I^c>|` over the last quarter of the kicks, the
    /// simulated counterpart of the plateau.
    #[serde(skip_serializing_if = "Option::is_none")]
    late_plateau: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    name: &'a str,
    kind: &'static str,
    generator: String,
    n_spins: usize,
    n_samples: usize,
    cycles: usize,
    axis: crate::operators::Axis,
    time_unit: &'static str,
    summary: &'static str,
    samples: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dome: Option<&'static str>,
    failed_samples: usize,
    points: Vec<ManifestPoint<'a>>,
}

fn trace_name(p: &PointResult) -> String {
    format!("traces/p{:03}.csv", p.index)
}

fn schedule_name(p: &PointResult) -> String {
    format!("schedules/p{:03}.json", p.index)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 22] = [
    "point",
    "label",
    "ac",
    "parameter",
    "value",
    "amplitude",
    "phase",
    "frequency",
    "f_res",
    "period",
    "gamma_y",
    "n_pulses",
    "sigma",
    "n_ok",
    "n_failed",
    "f_mean",
    "f_std",
    "t2_mean",
    "t2_censored",
    "t2_lower_bound",
    "beat_frequency",
    "schedule_hash",
];

fn late_plateau(p: &PointResult, axis: crate::operators::Axis) -> Option<f64> {
    let t = p.mean_trace.as_ref()?;
    let v: Vec<f64> = t.kicks().map(|s| s.component(axis).abs()).collect();
    let tail = &v[v.len() - (v.len() / 4).max(1)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn csv_string(rows: Vec<Vec<String>>, header: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn summary_csv(result: &SweepResult) -> String {
    let rows = result
        .points
        .iter()
        .map(|p| {
            vec![
                p.index.to_string(),
                p.spec.label.clone(),
                u8::from(p.spec.is_ac_on()).to_string(),
                p.spec.parameter.map(|x| x.as_str()).unwrap_or("").to_string(),
                opt(p.spec.value),
                p.spec.amplitude.to_string(),
                p.spec.phase.to_string(),
                p.frequency.to_string(),
                opt(p.f_res),
                opt(p.period),
                p.spec.gamma_y.to_string(),
                p.spec.n_pulses.to_string(),
                p.spec.sigma.to_string(),
                p.n_ok().to_string(),
                p.n_failed().to_string(),
                opt(p.f_mean),
                opt(p.f_std),
                opt(p.t2_mean),
                p.t2_censored.to_string(),
                opt(p.t2_lower_bound),
                opt(p.beat_frequency),
                p.schedule_hash.clone(),
            ]
        })
        .collect();
    csv_string(rows, &SUMMARY_COLUMNS)
}

fn samples_csv(result: &SweepResult) -> String {
    let rows = result
        .points
        .iter()
        .flat_map(|p| {
            p.samples.iter().map(move |r| {
                vec![
                    p.index.to_string(),
                    r.sample.to_string(),
                    r.graph_seed.to_string(),
                    r.disorder_seed.to_string(),
                    opt(r.j_spinlock),
                    opt(r.fidelity),
                    opt(r.lifetime),
                    u8::from(r.censored).to_string(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
        })
        .collect();
    csv_string(
        rows,
        &["point", "sample", "graph_seed", "disorder_seed", "j_spinlock", "fidelity", "lifetime", "censored", "error"],
    )
}

fn dome_csv(d: &DomeMap) -> String {
    let mut s = String::from("gamma_y,ac,kick,time,value\n");
    let mut emit = |grid: &Vec<Vec<f64>>, ac: u8| {
        for (g, col) in d.gammas.iter().zip(grid) {
            for (k, (t, v)) in d.kick_times.iter().zip(col).enumerate() {
                let _ = writeln!(s, "{g},{ac},{},{t},{v}", k + 1);
            }
        }
    };
    emit(&d.off, 0);
    if let Some(on) = &d.on {
        emit(on, 1);
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Persist a finished experiment into `dir`.
pub fn write_run(cfg: &ExperimentConfig, result: &SweepResult, dome: Option<&DomeMap>, dir: &Path) -> Result<(), RunError> {
    for sub in ["traces", "schedules", "graphs"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    write_file(&dir.join("config.toml"), &cfg.to_toml_string())?;
    let axis = cfg.observed_axis();
    for p in &result.points {
        write_file(&dir.join(schedule_name(p)), &p.schedule_json)?;
        if let Some(t) = &p.mean_trace {
            let path = dir.join(trace_name(p));
            let f = fs::File::create(&path).map_err(io_err(&path))?;
            let header = vec![
                ("point".to_string(), p.index.to_string()),
                ("label".to_string(), p.spec.label.clone()),
                ("n_samples".to_string(), p.n_ok().to_string()),
                ("schedule_hash".to_string(), p.schedule_hash.clone()),
            ];
            t.write_csv(BufWriter::new(f), &header).map_err(io_err(&path))?;
        }
    }
    for i in 0..cfg.graph.n_samples {
        let seed = cfg.graph.seed + i as u64;
        let path = dir.join(format!("graphs/graph_{seed}.json"));
        if let Ok(g) = super::ensemble_graph(cfg, i) {
            let json = serde_json::to_string_pretty(&g).expect("graph serializes");
            write_file(&path, &json)?;
        }
    }
    write_file(&dir.join("summary.csv"), &summary_csv(result))?;
    write_file(&dir.join("samples.csv"), &samples_csv(result))?;
    if let Some(d) = dome {
        write_file(&dir.join("dome.csv"), &dome_csv(d))?;
    }
    let points = result
        .points
        .iter()
        .map(|p| ManifestPoint {
            index: p.index,
            label: &p.spec.label,
            ac: p.spec.is_ac_on(),
            parameter: p.spec.parameter.map(|x| x.as_str()),
            value: p.spec.value,
            amplitude: p.spec.amplitude,
            phase: p.spec.phase,
            frequency: p.frequency,
            f_res: p.f_res,
            period: p.period,
            gamma_y: p.spec.gamma_y,
            n_pulses: p.spec.n_pulses,
            sigma: p.spec.sigma,
            schedule_hash: &p.schedule_hash,
            schedule: schedule_name(p),
            trace: trace_name(p),
            graph_seeds: p.samples.iter().map(|s| s.graph_seed).collect(),
            disorder_seeds: p.samples.iter().map(|s| s.disorder_seed).collect(),
            n_ok: p.n_ok(),
            n_failed: p.n_failed(),
            failures: p
                .samples
                .iter()
                .filter_map(|s| s.error.as_ref().map(|e| format!("sample {}: {e}", s.sample)))
                .collect(),
            f_mean: p.f_mean,
            f_std: p.f_std,
            t2_mean: p.t2_mean,
            t2_censored: p.t2_censored,
            t2_lower_bound: p.t2_lower_bound,
            beat_frequency: p.beat_frequency,
            b_eff: p.b_eff,
            j_spinlock: p.j_spinlock,
            oracle_m_plateau: p.oracle_m_plateau,
            late_plateau: late_plateau(p, axis),
        })
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: &cfg.name,
        kind: result.kind.as_str(),
        generator: format!("pdtc {}", env!("CARGO_PKG_VERSION")),
        n_spins: cfg.graph.n_spins,
        n_samples: cfg.graph.n_samples,
        cycles: cfg.schedule.cycles,
        axis,
        time_unit: "1/J (median coupling)",
        summary: "summary.csv",
        samples: "samples.csv",
        dome: dome.map(|_| "dome.csv"),
        failed_samples: result.failed_samples(),
        points,
    };
    let text = toml::to_string(&manifest).map_err(|e| RunError::Malformed(e.to_string()))?;
    write_file(&dir.join("manifest.toml"), &text)
}

/// Run the experiment described by `cfg` and write it to `dir`.
pub fn run_config(cfg: &ExperimentConfig, dir: &Path, workers: usize) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let (result, dome) = if cfg.kind == ExperimentKind::Dome {
        let d = map_dome(cfg, &cfg.dome.clone().unwrap_or_default().grid(), workers)?;
        (d.result.clone(), Some(d))
    } else {
        let points = run_points(cfg, &config_points(cfg), workers)?;
        let parameter = cfg.sweep.as_ref().map(|s| s.parameter).filter(|_| cfg.kind != ExperimentKind::Run);
        (
            SweepResult {
                kind: cfg.kind,
                parameter,
                points,
            },
            None,
        )
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_run(cfg, &result, dome.as_ref(), dir)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        result,
        dome,
    })
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub point: usize,
    pub label: String,
    pub ac: bool,
    pub f_mean: Option<f64>,
    pub f_std: Option<f64>,
    pub t2_mean: Option<f64>,
    pub t2_censored: usize,
    pub n_ok: usize,
    pub n_failed: usize,
}

fn parse_opt(key: &str, s: &str) -> Result<Option<f64>, RunError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| RunError::Malformed(format!("column `{key}`: cannot parse {s:?}")))
}

fn parse_usize(key: &str, s: &str) -> Result<usize, RunError> {
    s.parse()
        .map_err(|_| RunError::Malformed(format!("column `{key}`: cannot parse {s:?}")))
}

pub fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>, RunError> {
    let path = dir.join("summary.csv");
    let mut rd = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => RunError::Io {
            path: path.display().to_string(),
            source: io,
        },
        other => RunError::Malformed(format!("{other:?}")),
    })?;
    let malformed = |e: csv::Error| RunError::Malformed(format!("summary.csv: {e}"));
    let header = rd.headers().map_err(malformed)?.clone();
    let col = |name: &str| -> Result<usize, RunError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RunError::Malformed(format!("summary.csv lacks column `{name}`")))
    };
    let idx = [
        col("point")?,
        col("label")?,
        col("ac")?,
        col("f_mean")?,
        col("f_std")?,
        col("t2_mean")?,
        col("t2_censored")?,
        col("n_ok")?,
        col("n_failed")?,
    ];
    rd.records()
        .map(|rec| {
            let f = rec.map_err(malformed)?;
            Ok(SummaryRow {
                point: parse_usize("point", &f[idx[0]])?,
                label: f[idx[1]].to_string(),
                ac: &f[idx[2]] == "1",
                f_mean: parse_opt("f_mean", &f[idx[3]])?,
                f_std: parse_opt("f_std", &f[idx[4]])?,
                t2_mean: parse_opt("t2_mean", &f[idx[5]])?,
                t2_censored: parse_usize("t2_censored", &f[idx[6]])?,
                n_ok: parse_usize("n_ok", &f[idx[7]])?,
                n_failed: parse_usize("n_failed", &f[idx[8]])?,
            })
        })
        .collect()
}

/// Human-readable report of a run directory. The fidelity of each stored
/// mean trace is recomputed and must agree with the summary.
pub fn report(dir: &Path) -> Result<String, RunError> {
    let manifest_path = dir.join("manifest.toml");
    let manifest: toml::Table = fs::read_to_string(&manifest_path)
        .map_err(io_err(&manifest_path))?
        .parse()
        .map_err(|e: toml::de::Error| RunError::Malformed(e.to_string()))?;
    let cfg = ExperimentConfig::from_path(&dir.join("config.toml"))?;
    let rows = read_summary(dir)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} ({}), L={}, {} samples per point",
        manifest.get("name").and_then(|v| v.as_str()).unwrap_or("?"),
        manifest.get("kind").and_then(|v| v.as_str()).unwrap_or("?"),
        cfg.graph.n_spins,
        cfg.graph.n_samples
    );
    let _ = writeln!(out, "{:>5}  {:<28} {:>3} {:>10} {:>10} {:>10} {:>5}", "point", "label", "ac", "F", "std", "T2'", "cens");
    let axis = cfg.observed_axis();
    for r in &rows {
        let path = dir.join(format!("traces/p{:03}.csv", r.point));
        if r.n_ok > 0 {
            let f = fs::File::open(&path).map_err(io_err(&path))?;
            let (trace, _): (TimeTrace<f64>, _) =
                TimeTrace::read_csv(BufReader::new(f)).map_err(|e| RunError::Malformed(format!("{}: {e}", path.display())))?;
            let recomputed = fidelity(&trace, axis).map_err(|e| RunError::Malformed(e.to_string()))?.f;
            if let Some(m) = r.f_mean {
                if (recomputed - m).abs() > 1e-9 * m.abs().max(1.0) {
                    return Err(RunError::Malformed(format!(
                        "point {}: trace gives F={recomputed}, summary says {m}",
                        r.point
                    )));
                }
            }
        }
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
        let _ = writeln!(
            out,
            "{:>5}  {:<28} {:>3} {:>10} {:>10} {:>10} {:>5}",
            r.point,
            r.label,
            u8::from(r.ac),
            show(r.f_mean),
            show(r.f_std),
            show(r.t2_mean),
            r.t2_censored
        );
        if r.n_failed > 0 {
            let _ = writeln!(out, "       {} of {} samples failed", r.n_failed, r.n_ok + r.n_failed);
        }
    }
    Ok(out)
}
