//! Ensembles of trajectories over random clusters, parameter sweeps, dome
//! maps and run-directory persistence.

mod config;
mod output;
pub mod fgr;

pub use config::{
    ConfigError, DisorderConfig, DomeConfig, DriveConfig, EngineConfig, ExperimentConfig, ExperimentKind,
    GraphConfig, Scale, ScheduleChoice, ScheduleConfig, SweepConfig, SweepParameter, DESK_CYCLES,
};
pub use output::{read_summary, report, run_config, write_run, RunError, RunOutcome, SummaryRow, SCHEMA_VERSION};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{beat_frequency, effective_field, fidelity, lifetime_1e, mean_std, prethermal_oracle};
use crate::lattice::{orient_graph, sample_graph, SpinGraph};
use crate::operators::{build_hdd, build_hsl, build_operators};
use crate::propagator::{initial_state, Propagator, TimeTrace};
use crate::sequence::{sample_disorder, AcDrive, PulseSchedule, ScheduleRecord};

/// One operating point of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSpec {
    pub label: String,
    pub parameter: Option<SweepParameter>,
    pub value: Option<f64>,
    pub amplitude: f64,
    pub phase: f64,
    /// Absolute drive frequency; `None` means `f_res + detuning`.
    pub frequency: Option<f64>,
    pub detuning: f64,
    pub gamma_y: f64,
    pub n_pulses: usize,
    pub sigma: f64,
}

impl PointSpec {
    pub fn base(cfg: &ExperimentConfig) -> Self {
        Self {
            label: "base".into(),
            parameter: None,
            value: None,
            amplitude: cfg.drive.amplitude,
            phase: cfg.drive.phase,
            frequency: cfg.drive.frequency,
            detuning: cfg.drive.detuning,
            gamma_y: cfg.schedule.gamma_y,
            n_pulses: cfg.schedule.n_pulses,
            sigma: cfg.disorder.sigma,
        }
    }

    pub fn with(&self, parameter: SweepParameter, value: f64) -> Self {
        let mut p = self.clone();
        p.parameter = Some(parameter);
        p.value = Some(value);
        p.label = format!("{}={value}", parameter.as_str());
        match parameter {
            SweepParameter::Phase => p.phase = value,
            SweepParameter::Amplitude => p.amplitude = value,
            SweepParameter::Frequency => p.frequency = Some(value),
            SweepParameter::Detuning => {
                p.frequency = None;
                p.detuning = value;
            }
            SweepParameter::GammaY => p.gamma_y = value,
            SweepParameter::NPulses => p.n_pulses = value as usize,
            SweepParameter::Sigma => p.sigma = value,
        }
        p
    }

    pub fn ac_off(&self) -> Self {
        let mut p = self.clone();
        p.amplitude = 0.0;
        p.label = if self.parameter.is_some() {
            format!("{},ac_off", self.label)
        } else {
            "ac_off".into()
        };
        p
    }

    pub fn is_ac_on(&self) -> bool {
        self.amplitude > 0.0
    }
}

/// Outcome of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRecord {
    pub sample: usize,
    pub graph_seed: u64,
    pub disorder_seed: u64,
    pub j_spinlock: Option<f64>,
    pub fidelity: Option<f64>,
    pub lifetime: Option<f64>,
    pub censored: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub index: usize,
    pub spec: PointSpec,
    pub period: Option<f64>,
    pub f_res: Option<f64>,
    /// Realized drive frequency.
    pub frequency: f64,
    pub schedule_hash: String,
    pub schedule_json: String,
    pub samples: Vec<SampleRecord>,
    pub f_mean: Option<f64>,
    /// Sample standard deviation of `F`; absent for fewer than two samples.
    pub f_std: Option<f64>,
    /// Mean over samples whose envelope crossed `1/e` inside the window.
    pub t2_mean: Option<f64>,
    pub t2_censored: usize,
    /// Shortest window among censored samples.
    pub t2_lower_bound: Option<f64>,
    /// Sample-averaged trace.
    pub mean_trace: Option<TimeTrace<f64>>,
    pub beat_frequency: Option<f64>,
    pub b_eff: Option<f64>,
    pub j_spinlock: Option<f64>,
    pub oracle_m_plateau: Option<f64>,
}

impl PointResult {
    pub fn n_ok(&self) -> usize {
        self.samples.iter().filter(|s| s.error.is_none()).count()
    }

    pub fn n_failed(&self) -> usize {
        self.samples.len() - self.n_ok()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.fidelity).collect()
    }

    /// Standard error of the mean fidelity.
    pub fn f_sem(&self) -> Option<f64> {
        self.f_std.map(|s| s / (self.n_ok() as f64).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub parameter: Option<SweepParameter>,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn ac_on(&self) -> impl Iterator<Item = &PointResult> {
        self.points.iter().filter(|p| p.spec.is_ac_on())
    }

    pub fn ac_off(&self) -> impl Iterator<Item = &PointResult> {
        self.points.iter().filter(|p| !p.spec.is_ac_on())
    }

    /// AC-off counterpart of `p`: same swept value, or the shared baseline.
    pub fn baseline_for(&self, p: &PointResult) -> Option<&PointResult> {
        self.ac_off()
            .find(|b| b.spec.parameter == p.spec.parameter && b.spec.value == p.spec.value)
            .or_else(|| self.ac_off().find(|b| b.spec.value.is_none()))
    }

    pub fn failed_samples(&self) -> usize {
        self.points.iter().map(|p| p.n_failed()).sum()
    }

    /// Points where every sample failed.
    pub fn failed_points(&self) -> Vec<&PointResult> {
        self.points.iter().filter(|p| p.n_ok() == 0).collect()
    }
}

struct Prepared {
    spec: PointSpec,
    schedule: PulseSchedule<f64>,
    drive: AcDrive<f64>,
    record: ScheduleRecord<f64>,
}

fn prepare(cfg: &ExperimentConfig, spec: &PointSpec) -> Result<Prepared, ConfigError> {
    let schedule = cfg.schedule.build(Some(spec.gamma_y), Some(spec.n_pulses))?;
    let res = schedule.resonances();
    let f_res = res.get(cfg.drive.resonance).copied().or_else(|| res.first().copied());
    if cfg.drive.resonance > 0 && cfg.drive.resonance >= res.len() {
        return Err(ConfigError::Invalid {
            key: "drive.resonance".into(),
            reason: format!("schedule has {} resonances", res.len()),
        });
    }
    let frequency = match spec.frequency {
        Some(f) => f,
        None => f_res.unwrap_or(0.0) + spec.detuning,
    };
    if !(frequency >= 0.0) {
        return Err(ConfigError::Invalid {
            key: "drive.detuning".into(),
            reason: format!("realized frequency {frequency} is negative"),
        });
    }
    let drive = AcDrive::new(spec.amplitude, frequency, spec.phase).map_err(ConfigError::from)?;
    let record = ScheduleRecord::new(&schedule, &drive, None);
    Ok(Prepared {
        spec: spec.clone(),
        schedule,
        drive,
        record,
    })
}

/// Graph used by ensemble sample `sample`: oriented and with unit median
/// coupling, so times are in units of `1/J`.
pub fn ensemble_graph(cfg: &ExperimentConfig, sample: usize) -> Result<SpinGraph<f64>, String> {
    let seed = cfg.graph.seed + sample as u64;
    let g = sample_graph(cfg.graph.n_spins, cfg.graph.r_min, cfg.graph.r_max, seed).map_err(|e| e.to_string())?;
    Ok(orient_graph(&g).map_err(|e| e.to_string())?.with_unit_median())
}

struct TrajectoryOk {
    trace: TimeTrace<f64>,
    j_spinlock: f64,
}

fn run_trajectory(cfg: &ExperimentConfig, p: &Prepared, sample: usize) -> Result<TrajectoryOk, String> {
    let n = cfg.graph.n_spins;
    let graph = ensemble_graph(cfg, sample)?;
    let ops = build_operators(n).map_err(|e| e.to_string())?;
    let disorder =
        sample_disorder(p.spec.sigma, n, cfg.disorder.seed + sample as u64).map_err(|e| e.to_string())?;
    let zeta = (p.spec.sigma > 0.0).then_some(disorder.zeta.as_slice());
    let hdd = build_hdd(&graph, &ops, zeta).map_err(|e| e.to_string())?;
    let j_spinlock = build_hsl(&graph, &ops).map_err(|e| e.to_string())?.j_spinlock();
    let mut prop =
        Propagator::new(&ops, &hdd, Some(&disorder), cfg.engine.options()).map_err(|e| e.to_string())?;
    let mut state = initial_state(&ops, cfg.observed_axis());
    let trace = prop.evolve(&mut state, &p.schedule, &p.drive).map_err(|e| e.to_string())?;
    Ok(TrajectoryOk { trace, j_spinlock })
}

fn mean_trace(traces: &[&TimeTrace<f64>]) -> Option<TimeTrace<f64>> {
    let first = traces.first()?;
    let mut out = (*first).clone();
    let k = traces.len() as f64;
    for (i, s) in out.samples.iter_mut().enumerate() {
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for t in traces {
            let o = &t.samples[i];
            x += o.ix;
            y += o.iy;
            z += o.iz;
        }
        s.ix = x / k;
        s.iy = y / k;
        s.iz = z / k;
    }
    Some(out)
}

fn aggregate(
    cfg: &ExperimentConfig,
    index: usize,
    p: &Prepared,
    outcomes: Vec<(usize, Result<TrajectoryOk, String>)>,
) -> PointResult {
    let axis = cfg.observed_axis();
    let smooth = p.schedule.kicks_per_cycle();
    let mut samples = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::new();
    let mut jsl = Vec::new();
    for (sample, out) in &outcomes {
        let mut rec = SampleRecord {
            sample: *sample,
            graph_seed: cfg.graph.seed + *sample as u64,
            disorder_seed: cfg.disorder.seed + *sample as u64,
            j_spinlock: None,
            fidelity: None,
            lifetime: None,
            censored: false,
            error: None,
        };
        match out {
            Ok(t) => {
                let f = fidelity(&t.trace, axis);
                let life = lifetime_1e(&t.trace, axis, smooth);
                match (f, life) {
                    (Ok(f), Ok(life)) => {
                        rec.fidelity = Some(f.f);
                        rec.lifetime = Some(life.lifetime);
                        rec.censored = life.censored;
                        rec.j_spinlock = Some(t.j_spinlock);
                        traces.push(&t.trace);
                        jsl.push(t.j_spinlock);
                    }
                    (Err(e), _) | (_, Err(e)) => rec.error = Some(e.to_string()),
                }
            }
            Err(e) => rec.error = Some(e.clone()),
        }
        samples.push(rec);
    }
    let fs: Vec<f64> = samples.iter().filter_map(|s| s.fidelity).collect();
    let (f_mean, f_std) = match mean_std(&fs) {
        Some((m, s)) => (Some(m), s),
        None => (None, None),
    };
    let crossed: Vec<f64> = samples
        .iter()
        .filter(|s| !s.censored)
        .filter_map(|s| s.lifetime)
        .collect();
    let censored: Vec<f64> = samples.iter().filter(|s| s.censored).filter_map(|s| s.lifetime).collect();
    let mean = mean_trace(&traces);
    let beat = mean
        .as_ref()
        .and_then(|t| beat_frequency(t, axis, 0.1).frequency);
    let j_spinlock = mean_std(&jsl).map(|(m, _)| m);
    let tau_y = cfg.schedule.tau_y;
    let b_eff = (cfg.schedule.kind != ScheduleChoice::SingleTone)
        .then(|| effective_field(&p.drive, tau_y, p.spec.gamma_y.abs()).ok())
        .flatten()
        .and_then(|b| p.schedule.period().map(|t| b / t));
    let oracle_m_plateau = match (b_eff, j_spinlock) {
        (Some(b), Some(j)) => prethermal_oracle(b, j, 1.0).ok().map(|o| o.m_plateau),
        _ => None,
    };
    PointResult {
        index,
        spec: p.spec.clone(),
        period: p.schedule.period(),
        f_res: p.record.f_res.first().copied(),
        frequency: p.drive.frequency,
        schedule_hash: p.record.hash(),
        schedule_json: p.record.to_json(),
        samples,
        f_mean,
        f_std,
        t2_mean: mean_std(&crossed).map(|(m, _)| m),
        t2_censored: censored.len(),
        t2_lower_bound: censored.iter().copied().reduce(f64::min),
        mean_trace: mean,
        beat_frequency: beat,
        b_eff,
        j_spinlock,
        oracle_m_plateau,
    }
}

fn thread_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

/// Run every `(point, sample)` trajectory on `workers` threads. Results are
/// merged by index, so the output does not depend on scheduling.
pub fn run_points(
    cfg: &ExperimentConfig,
    specs: &[PointSpec],
    workers: usize,
) -> Result<Vec<PointResult>, ConfigError> {
    let prepared = specs.iter().map(|s| prepare(cfg, s)).collect::<Result<Vec<_>, _>>()?;
    let n_samples = cfg.graph.n_samples;
    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|p| (0..n_samples).map(move |s| (p, s)))
        .collect();
    let outcomes: Vec<Result<TrajectoryOk, String>> = thread_pool(workers).install(|| {
        jobs.par_iter()
            .map(|&(p, s)| {
                let r = run_trajectory(cfg, &prepared[p], s);
                if let Err(e) = &r {
                    log::warn!("point {p} sample {s} failed: {e}");
                }
                r
            })
            .collect()
    });
    let mut per_point: Vec<Vec<(usize, Result<TrajectoryOk, String>)>> =
        (0..prepared.len()).map(|_| Vec::with_capacity(n_samples)).collect();
    for ((p, s), out) in jobs.into_iter().zip(outcomes) {
        per_point[p].push((s, out));
    }
    Ok(per_point
        .into_iter()
        .enumerate()
        .map(|(i, outs)| aggregate(cfg, i, &prepared[i], outs))
        .collect())
}

/// Ensemble over `cfg.graph.n_samples` clusters at a single point.
pub fn run_ensemble(cfg: &ExperimentConfig, spec: &PointSpec, workers: usize) -> Result<PointResult, ConfigError> {
    Ok(run_points(cfg, std::slice::from_ref(spec), workers)?.remove(0))
}

/// Points for a sweep. With `compare_off`, parameters that change the
/// schedule or disorder get an AC-off twin per value; the others share one
/// AC-off baseline.
pub fn sweep_points(cfg: &ExperimentConfig, parameter: SweepParameter, values: &[f64], compare_off: bool) -> Vec<PointSpec> {
    let base = PointSpec::base(cfg);
    let mut pts: Vec<PointSpec> = values.iter().map(|v| base.with(parameter, *v)).collect();
    if compare_off {
        match parameter {
            SweepParameter::GammaY | SweepParameter::NPulses | SweepParameter::Sigma => {
                let offs: Vec<PointSpec> = pts.iter().map(|p| p.ac_off()).collect();
                pts.extend(offs);
            }
            _ => pts.push(base.ac_off()),
        }
    }
    pts
}

pub fn sweep(
    cfg: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    compare_off: bool,
    workers: usize,
) -> Result<SweepResult, ConfigError> {
    let specs = sweep_points(cfg, parameter, values, compare_off);
    Ok(SweepResult {
        kind: ExperimentKind::Sweep,
        parameter: Some(parameter),
        points: run_points(cfg, &specs, workers)?,
    })
}

pub fn sweep_phase(cfg: &ExperimentConfig, phases: &[f64], workers: usize) -> Result<SweepResult, ConfigError> {
    sweep(cfg, SweepParameter::Phase, phases, true, workers)
}

pub fn sweep_amplitude(cfg: &ExperimentConfig, amplitudes: &[f64], workers: usize) -> Result<SweepResult, ConfigError> {
    sweep(cfg, SweepParameter::Amplitude, amplitudes, true, workers)
}

/// Sweep of the detuning `f_AC - f_res`.
pub fn sweep_frequency(cfg: &ExperimentConfig, detunings: &[f64], workers: usize) -> Result<SweepResult, ConfigError> {
    sweep(cfg, SweepParameter::Detuning, detunings, true, workers)
}

/// Disorder sweep, each strength with and without the AC field.
pub fn sweep_disorder(cfg: &ExperimentConfig, sigmas: &[f64], workers: usize) -> Result<SweepResult, ConfigError> {
    let mut r = sweep(cfg, SweepParameter::Sigma, sigmas, true, workers)?;
    r.kind = ExperimentKind::Noise;
    Ok(r)
}

/// `F_AC / F_off` per disorder strength.
pub fn relative_gain(result: &SweepResult) -> Vec<(f64, Option<f64>)> {
    result
        .ac_on()
        .filter_map(|p| {
            let v = p.spec.value?;
            let off = result.baseline_for(p)?;
            let g = match (p.f_mean, off.f_mean) {
                (Some(a), Some(b)) if b != 0.0 => Some(a / b),
                _ => None,
            };
            Some((v, g))
        })
        .collect()
}

/// Signed post-kick `<I^c>` over a grid of `y` angles, with and without AC.
#[derive(Clone, Debug, PartialEq)]
pub struct DomeMap {
    pub gammas: Vec<f64>,
    /// Time of each post-kick sample.
    pub kick_times: Vec<f64>,
    /// `off[g][k]`: sample-averaged value at kick `k` for angle `g`.
    pub off: Vec<Vec<f64>>,
    pub on: Option<Vec<Vec<f64>>>,
    pub result: SweepResult,
}

impl DomeMap {
    /// Column index of the angle closest to `gamma`.
    pub fn column(&self, gamma: f64) -> usize {
        self.gammas
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - gamma).abs().total_cmp(&(b.1 - gamma).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// First kick at which `|value|` drops below `level`.
    pub fn first_below(column: &[f64], level: f64) -> Option<usize> {
        column.iter().position(|v| v.abs() < level)
    }
}

pub fn map_dome(cfg: &ExperimentConfig, gammas: &[f64], workers: usize) -> Result<DomeMap, ConfigError> {
    let base = PointSpec::base(cfg);
    let with_ac = base.is_ac_on();
    let mut specs: Vec<PointSpec> = gammas
        .iter()
        .map(|g| base.with(SweepParameter::GammaY, *g).ac_off())
        .collect();
    if with_ac {
        specs.extend(gammas.iter().map(|g| base.with(SweepParameter::GammaY, *g)));
    }
    let points = run_points(cfg, &specs, workers)?;
    let axis = cfg.observed_axis();
    let column = |p: &PointResult| -> Vec<f64> {
        p.mean_trace
            .as_ref()
            .map(|t| t.kicks().map(|s| s.component(axis)).collect())
            .unwrap_or_default()
    };
    let kick_times = points
        .iter()
        .find_map(|p| p.mean_trace.as_ref())
        .map(|t| t.kicks().map(|s| s.time).collect())
        .unwrap_or_default();
    let n = gammas.len();
    let off = points[..n].iter().map(column).collect();
    let on = with_ac.then(|| points[n..].iter().map(column).collect());
    Ok(DomeMap {
        gammas: gammas.to_vec(),
        kick_times,
        off,
        on,
        result: SweepResult {
            kind: ExperimentKind::Dome,
            parameter: Some(SweepParameter::GammaY),
            points,
        },
    })
}

/// Point list for a config, as used by [`run_config`].
pub fn config_points(cfg: &ExperimentConfig) -> Vec<PointSpec> {
    match cfg.kind {
        ExperimentKind::Run => {
            let base = PointSpec::base(cfg);
            if base.is_ac_on() {
                let mut on = base.clone();
                on.label = "ac_on".into();
                vec![base.ac_off(), on]
            } else {
                let mut off = base;
                off.label = "ac_off".into();
                vec![off]
            }
        }
        ExperimentKind::Sweep | ExperimentKind::Noise => {
            let sw = cfg.sweep.as_ref().expect("validated");
            let compare = sw.compare_off || cfg.kind == ExperimentKind::Noise;
            sweep_points(cfg, sw.parameter, &sw.values, compare)
        }
        ExperimentKind::Dome => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!(
            "name = \"t\"\nkind = \"{kind}\"\n[graph]\nn_spins = 4\nn_samples = 3\n[schedule]\ncycles = 4\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn single_sample_has_no_spread() {
        let mut cfg = small("run", "");
        cfg.graph.n_samples = 1;
        let r = run_ensemble(&cfg, &PointSpec::base(&cfg), 1).unwrap();
        assert!(r.f_mean.is_some());
        assert_eq!(r.f_std, None);
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let cfg = small("run", "");
        let pts = config_points(&cfg);
        let a = run_points(&cfg, &pts, 1).unwrap();
        let b = run_points(&cfg, &pts, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(!a[0].spec.is_ac_on() && a[1].spec.is_ac_on());
    }

    #[test]
    fn aggregation_ignores_sample_order() {
        let cfg = small("run", "");
        let r = run_ensemble(&cfg, &PointSpec::base(&cfg), 1).unwrap();
        let mut fs = r.fidelities();
        fs.reverse();
        let (m, s) = mean_std(&fs).unwrap();
        assert!((m - r.f_mean.unwrap()).abs() < 1e-15);
        assert!((s.unwrap() - r.f_std.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small("run", "");
        // impossible packing for the sampler
        cfg.graph.r_min = 5.0;
        cfg.graph.r_max = 5.0001;
        cfg.graph.n_spins = 12;
        cfg.graph.n_samples = 2;
        let r = run_ensemble(&cfg, &PointSpec::base(&cfg), 1).unwrap();
        assert_eq!(r.n_failed(), 2);
        assert!(r.samples.iter().all(|s| s.error.is_some()));
        assert_eq!(r.f_mean, None);
    }

    #[test]
    fn sweep_baselines() {
        let cfg = small("sweep", "[sweep]\nparameter = \"phase\"\nvalues = [0.0, 1.0]\ncompare_off = true\n");
        let pts = config_points(&cfg);
        assert_eq!(pts.len(), 3);
        let cfg = small("noise", "[sweep]\nparameter = \"sigma\"\nvalues = [0.0, 1.0]\n");
        assert_eq!(config_points(&cfg).len(), 4);
    }
}
