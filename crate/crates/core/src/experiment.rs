//! Desk-scale experiments: configuration, execution and tabular output.
//!
//! Every experiment writes comma-separated data with a header row, and
//! returns an [`ExperimentSummary`] with its pass/fail checks. Outputs depend
//! only on the configuration, so identical configs give byte-identical files.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{online_estimate, scan_estimate, OnlineOptions};
use crate::fokker_planck::ergodicity::{ergodicity_profile, DEFAULT_BINS};
use crate::fokker_planck::evolve::{coefficient_distance, fp_evolve, kl_divergence, max_stable_dt};
use crate::fokker_planck::stationary::{
    current_at, current_sweep, probability_current, recursion_residual, stationary_distribution, FourierDistribution,
    C0, DEFAULT_DEPTH, DEFAULT_MAX_ORDER,
};
use crate::record_io::{self, RecordFile};
use crate::spin::{build_collective_ops, coherent_state_x, max_entropy_state, CollectiveOps, DensityMatrix};
use crate::trajectory::diagnostics::lyapunov_check;
use crate::trajectory::qubit::{circular_distance, BlochState};
use crate::trajectory::{
    generate_wiener, run_trajectory, Drive, Integrator, MeasurementRecord, Trajectory, TrajectoryOptions,
    WienerRealization,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig1Convergence,
    Fig2Stationary,
    Fig3Current,
    Fig4Replay,
    Fig5Multiqubit,
    Fig6Online,
    Ergodicity,
    Lyapunov,
    KlMonotone,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig1Convergence,
        Experiment::Fig2Stationary,
        Experiment::Fig3Current,
        Experiment::Fig4Replay,
        Experiment::Fig5Multiqubit,
        Experiment::Fig6Online,
        Experiment::Ergodicity,
        Experiment::Lyapunov,
        Experiment::KlMonotone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1Convergence => "fig1_convergence",
            Experiment::Fig2Stationary => "fig2_stationary",
            Experiment::Fig3Current => "fig3_current",
            Experiment::Fig4Replay => "fig4_replay",
            Experiment::Fig5Multiqubit => "fig5_multiqubit",
            Experiment::Fig6Online => "fig6_online",
            Experiment::Ergodicity => "ergodicity",
            Experiment::Lyapunov => "lyapunov",
            Experiment::KlMonotone => "kl_monotone",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_qubits: usize,
    pub b: f64,
    pub dt: f64,
    pub total_time: f64,
    pub seed: u64,
    pub integrator: Integrator,
    pub output_path: PathBuf,
    /// Steps between stored samples.
    pub stride: usize,
    /// Field grid for sweeps and scans; angle grid for `lyapunov`.
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    /// Online learning rate; `None` means 0.5·dt.
    pub gamma: Option<f64>,
    pub b0: f64,
    pub b_max: f64,
    pub max_order: usize,
    pub depth: usize,
    pub bins: usize,
    pub draws: usize,
    pub theta0: f64,
    pub tv_bound: f64,
    /// Load the noise (dW) or measurement (dY) record instead of generating one.
    pub record_in: Option<PathBuf>,
    pub record_out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            n_qubits: 1,
            b: 1.0,
            dt: 0.01,
            total_time: 400.0,
            seed: 1,
            integrator: Integrator::Kraus,
            output_path: PathBuf::from(format!("{}.csv", experiment.name())),
            stride: 100,
            grid_min: -1.5,
            grid_max: 1.5,
            grid_step: 0.05,
            gamma: None,
            b0: 0.5,
            b_max: 2.0,
            max_order: DEFAULT_MAX_ORDER,
            depth: DEFAULT_DEPTH,
            bins: DEFAULT_BINS,
            draws: 100_000,
            theta0: 0.3,
            tv_bound: 0.03,
            record_in: None,
            record_out: None,
        };
        match experiment {
            Experiment::Fig3Current => (c.grid_min, c.grid_max) = (0.05, 2.0),
            Experiment::Fig4Replay => c.b = 0.1,
            Experiment::Fig5Multiqubit => {
                c.n_qubits = 10;
                c.b = 5.0;
                c.dt = 1e-3;
                c.total_time = 20.0;
                c.stride = 1000;
            }
            Experiment::Ergodicity => {
                c.total_time = 1e5;
                c.stride = 1;
            }
            Experiment::Lyapunov => {
                c.b = 0.0;
                c.dt = 1e-3;
                c.total_time = 1e-3;
                (c.grid_min, c.grid_max, c.grid_step) = (0.0, 1.0, 0.5);
            }
            Experiment::KlMonotone => {
                c.max_order = 220;
                c.dt = 0.1;
                c.total_time = 30.0;
                c.stride = 1;
            }
            _ => {}
        }
        c
    }

    /// Sets one field from its textual form. Keys match the config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn fmt::Display| Error::InvalidArgument(format!("{key} = '{value}': {e}"));
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "experiment" => {
                let e: Experiment = value.parse().map_err(|e: String| bad(&e))?;
                if e != self.experiment {
                    return Err(bad(&format!("config is for {e}, not {}", self.experiment)));
                }
            }
            "n_qubits" => self.n_qubits = num(value).map_err(|e| bad(&e))?,
            "b" => self.b = num(value).map_err(|e| bad(&e))?,
            "dt" => self.dt = num(value).map_err(|e| bad(&e))?,
            "time" | "total_time" => self.total_time = num(value).map_err(|e| bad(&e))?,
            "seed" => self.seed = num(value).map_err(|e| bad(&e))?,
            "integrator" => self.integrator = value.parse().map_err(|e: crate::Error| bad(&e))?,
            "out" | "output_path" => self.output_path = PathBuf::from(value),
            "stride" => self.stride = num(value).map_err(|e| bad(&e))?,
            "grid_min" => self.grid_min = num(value).map_err(|e| bad(&e))?,
            "grid_max" => self.grid_max = num(value).map_err(|e| bad(&e))?,
            "grid_step" => self.grid_step = num(value).map_err(|e| bad(&e))?,
            "gamma" => self.gamma = Some(num(value).map_err(|e| bad(&e))?),
            "b0" => self.b0 = num(value).map_err(|e| bad(&e))?,
            "b_max" => self.b_max = num(value).map_err(|e| bad(&e))?,
            "max_order" => self.max_order = num(value).map_err(|e| bad(&e))?,
            "depth" => self.depth = num(value).map_err(|e| bad(&e))?,
            "bins" => self.bins = num(value).map_err(|e| bad(&e))?,
            "draws" => self.draws = num(value).map_err(|e| bad(&e))?,
            "theta0" => self.theta0 = num(value).map_err(|e| bad(&e))?,
            "tv_bound" => self.tv_bound = num(value).map_err(|e| bad(&e))?,
            "record_in" => self.record_in = Some(PathBuf::from(value)),
            "record_out" => self.record_out = Some(PathBuf::from(value)),
            _ => return Err(Error::InvalidArgument(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: k + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, got '{line}'")))?;
            self.set(key.trim(), value.trim()).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.5 * self.dt)
    }

    pub fn steps(&self) -> usize {
        (self.total_time / self.dt).round() as usize
    }

    /// grid_min, grid_min + step, … up to grid_max (inclusive within rounding).
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.grid_max - self.grid_min) / self.grid_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.grid_min + self.grid_step * k as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        let finite = [
            ("b", self.b),
            ("dt", self.dt),
            ("time", self.total_time),
            ("grid_min", self.grid_min),
            ("grid_max", self.grid_max),
            ("grid_step", self.grid_step),
            ("b0", self.b0),
            ("b_max", self.b_max),
            ("theta0", self.theta0),
            ("tv_bound", self.tv_bound),
            ("gamma", self.gamma()),
        ];
        if let Some((name, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return fail(format!("{name} must be finite"));
        }
        if self.dt <= 0.0 {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.total_time < self.dt {
            return fail(format!("time {} is shorter than dt {}", self.total_time, self.dt));
        }
        if self.n_qubits == 0 {
            return fail("n_qubits must be at least 1".into());
        }
        if self.stride == 0 {
            return fail("stride must be at least 1".into());
        }
        match self.experiment {
            Experiment::Fig1Convergence | Experiment::Fig4Replay if self.n_qubits != 1 => {
                fail(format!("{} is a single-qubit experiment", self.experiment))
            }
            Experiment::Fig3Current | Experiment::Fig6Online | Experiment::Lyapunov
                if !(self.grid_step > 0.0 && self.grid_max >= self.grid_min) =>
            {
                fail("grid needs grid_step > 0 and grid_max ≥ grid_min".into())
            }
            Experiment::Fig6Online if !(0.0 <= self.b0 && self.b0 <= self.b_max && self.gamma() > 0.0) => {
                fail("online estimation needs 0 ≤ b0 ≤ b_max and gamma > 0".into())
            }
            Experiment::Fig2Stationary | Experiment::KlMonotone if self.max_order < 2 || self.depth == 0 => {
                fail("max_order must be at least 2 and depth at least 1".into())
            }
            Experiment::Ergodicity if self.bins == 0 => fail("bins must be positive".into()),
            Experiment::Lyapunov if self.draws < 2 => fail("draws must be at least 2".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            detail: format!("{value:.3e} < {bound:e}"),
            pass: value < bound,
        }
    }

    fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            detail: format!("{value:.4} within {tol:.4} of {target}"),
            pass: (value - target).abs() <= tol,
        }
    }

    fn holds(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            detail: pass.to_string(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub experiment: Experiment,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl ExperimentSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.experiment, if self.passed() { "PASS" } else { "FAIL" })?;
        for c in &self.checks {
            write!(f, " {}[{}]={}", c.name, if c.pass { "ok" } else { "fail" }, c.detail)?;
        }
        let outs: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        write!(f, " -> {}", outs.join(", "))
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `dir/name.csv` → `dir/name_<suffix>.csv`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

const QUBIT_INITIALS: [(f64, f64); 4] = [(0.5, -0.5), (0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5)];
const SPREAD_TOL: f64 = 1e-2;
const PURITY_TOL: f64 = 1e-3;
const REPLAY_TOL: f64 = 1e-2;
const MULTI_L1_TOL: f64 = 1e-2;
const RESIDUAL_TOL: f64 = 1e-9;
const FLATNESS_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-10;
const MEAN_PEAK: f64 = 0.4;
const DENSITY_POINTS: usize = 1024;
const ONLINE_BAND: f64 = 0.1;
const TRACKING_TOL: f64 = 0.1;
const SIGMAS: f64 = 5.0;
const KL_SLACK: f64 = 1e-15;
const FP_L2_TOL: f64 = 1e-6;
/// c_2 of the second initial density in `kl_monotone`, in units of c_0.
const KL_PERTURBATION: f64 = 0.3;

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let run = Runner { cfg: config };
    let (outputs, checks) = match config.experiment {
        Experiment::Fig1Convergence => run.convergence()?,
        Experiment::Fig2Stationary => run.stationary()?,
        Experiment::Fig3Current => run.current()?,
        Experiment::Fig4Replay => run.replay()?,
        Experiment::Fig5Multiqubit => run.multiqubit()?,
        Experiment::Fig6Online => run.online()?,
        Experiment::Ergodicity => run.ergodicity()?,
        Experiment::Lyapunov => run.lyapunov()?,
        Experiment::KlMonotone => run.kl_monotone()?,
    };
    Ok(ExperimentSummary {
        experiment: config.experiment,
        outputs,
        checks,
    })
}

type Outcome = Result<(Vec<PathBuf>, Vec<Check>)>;

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
}

impl Runner<'_> {
    fn options(&self) -> TrajectoryOptions {
        TrajectoryOptions {
            integrator: self.cfg.integrator,
            stride: self.cfg.stride,
        }
    }

    fn loaded(&self) -> Result<Option<RecordFile>> {
        let Some(path) = &self.cfg.record_in else {
            return Ok(None);
        };
        let mut file = record_io::load(path)?;
        file.expect_dt(self.cfg.dt)?;
        let steps = self.cfg.steps();
        if file.len() < steps {
            return Err(Error::InvalidArgument(format!(
                "{} holds {} steps, the run needs {steps}",
                path.display(),
                file.len()
            )));
        }
        file.increments.truncate(steps);
        Ok(Some(file))
    }

    fn save(&self, file: RecordFile, outputs: &mut Vec<PathBuf>) -> Result<()> {
        if let Some(path) = &self.cfg.record_out {
            record_io::save(path, &file)?;
            outputs.push(path.clone());
        }
        Ok(())
    }

    fn realization(&self) -> Result<WienerRealization> {
        match self.loaded()? {
            Some(file) => file.into_realization(),
            None => generate_wiener(self.cfg.dt, self.cfg.steps(), self.cfg.seed),
        }
    }

    /// A loaded dY record, or the record of a fresh run from `truth_initial`.
    fn record(&self, ops: &CollectiveOps, truth_initial: &DensityMatrix) -> Result<(MeasurementRecord, Option<Trajectory>)> {
        if let Some(file) = self.loaded()? {
            return Ok((file.into_record()?, None));
        }
        let w = generate_wiener(self.cfg.dt, self.cfg.steps(), self.cfg.seed)?;
        let truth = run_trajectory(truth_initial, ops, self.cfg.b, Drive::Wiener(&w), self.options())?;
        Ok((truth.record.clone(), Some(truth)))
    }

    fn convergence(&self) -> Outcome {
        let ops = build_collective_ops(1)?;
        let w = self.realization()?;
        let runs: Vec<Trajectory> = QUBIT_INITIALS
            .par_iter()
            .map(|&(x, z)| {
                let rho = BlochState::new(x, 0.0, z).to_density();
                run_trajectory(&rho, &ops, self.cfg.b, Drive::Wiener(&w), self.options())
            })
            .collect::<Result<_>>()?;

        let mut header = vec!["t".to_string()];
        header.extend((0..4).map(|i| format!("theta_{i}")));
        header.extend((0..4).map(|i| format!("mixedness_{i}")));
        header.push("theta_spread".into());
        let mut table = Table::new(header);
        let (mut spread, mut mixed) = (0.0, 0.0);
        for (k, &t) in runs[0].times.iter().enumerate() {
            let states: Vec<BlochState> = runs.iter().map(|r| BlochState::from_density(&r.states[k])).collect();
            let thetas: Vec<f64> = states.iter().map(|s| s.rho_z.atan2(s.rho_x)).collect();
            spread = 0.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    spread = f64::max(spread, circular_distance(thetas[i], thetas[j]));
                }
            }
            mixed = states.iter().map(BlochState::mixedness).fold(0.0, f64::max);
            let mut row = vec![t];
            row.extend(&thetas);
            row.extend(states.iter().map(BlochState::mixedness));
            row.push(spread);
            table.push(row);
        }
        table.write(&self.cfg.output_path)?;
        let mut outputs = vec![self.cfg.output_path.clone()];
        self.save(RecordFile::from(&w), &mut outputs)?;
        Ok((
            outputs,
            vec![
                Check::below("final_theta_spread", spread, SPREAD_TOL),
                Check::below("final_mixedness", mixed, PURITY_TOL),
            ],
        ))
    }

    fn stationary(&self) -> Outcome {
        let dist = stationary_distribution(self.cfg.b, self.cfg.max_order, self.cfg.depth)?;
        let mut coeffs = Table::new(["m", "re", "im"]);
        for m in (0..=dist.max_order()).step_by(2) {
            let c = dist.coeff(m as i64);
            coeffs.push(vec![m as f64, c.re, c.im]);
        }
        coeffs.write(&self.cfg.output_path)?;

        let mut density = Table::new(["theta", "density", "current"]);
        for theta in FourierDistribution::grid(DENSITY_POINTS) {
            density.push(vec![theta, dist.density(theta), current_at(&dist, theta)]);
        }
        let density_path = sibling_path(&self.cfg.output_path, "density");
        density.write(&density_path)?;

        Ok((
            vec![self.cfg.output_path.clone(), density_path],
            vec![
                Check::below("recursion_residual", recursion_residual(&dist), RESIDUAL_TOL),
                Check::below("current_flatness", probability_current(&dist).flatness, FLATNESS_TOL),
                Check::below("normalization_error", (dist.integral() - 1.0).abs(), NORM_TOL),
            ],
        ))
    }

    fn current(&self) -> Outcome {
        let rows = current_sweep(&self.cfg.grid())?;
        let mut table = Table::new(["B", "J_sta", "J_ratio", "mean_theta"]);
        for r in &rows {
            table.push(vec![r.b, r.j_sta, r.j_ratio, r.mean_theta]);
        }
        table.write(&self.cfg.output_path)?;
        let increasing = rows.windows(2).all(|w| w[1].j_ratio > w[0].j_ratio);
        let peak = rows
            .iter()
            .max_by(|a, b| a.mean_theta.total_cmp(&b.mean_theta))
            .map_or(f64::NAN, |r| r.b);
        Ok((
            vec![self.cfg.output_path.clone()],
            vec![
                Check::holds("j_ratio_increasing", increasing),
                Check::near("mean_theta_peak", peak, MEAN_PEAK, 0.1 + 1e-12),
            ],
        ))
    }

    fn replay(&self) -> Outcome {
        let ops = build_collective_ops(1)?;
        let initials: Vec<DensityMatrix> = QUBIT_INITIALS
            .iter()
            .map(|&(x, z)| BlochState::new(x, 0.0, z).to_density())
            .collect();
        let (record, _) = self.record(&ops, &initials[0])?;
        let runs: Vec<Trajectory> = initials
            .par_iter()
            .map(|rho| run_trajectory(rho, &ops, self.cfg.b, Drive::Record(&record), self.options()))
            .collect::<Result<_>>()?;

        let mut table = Table::new(["t", "theta_ref", "distance_1", "distance_2", "distance_3"]);
        let mut worst = 0.0;
        for (k, &t) in runs[0].times.iter().enumerate() {
            let reference = BlochState::from_density(&runs[0].states[k]);
            let mut row = vec![t, reference.rho_z.atan2(reference.rho_x)];
            row.extend(runs[1..].iter().map(|r| BlochState::from_density(&r.states[k]).distance(&reference)));
            worst = row[2..].iter().cloned().fold(0.0, f64::max);
            table.push(row);
        }
        table.write(&self.cfg.output_path)?;
        let mut outputs = vec![self.cfg.output_path.clone()];
        self.save(RecordFile::from(&record), &mut outputs)?;
        Ok((outputs, vec![Check::below("final_replay_distance", worst, REPLAY_TOL)]))
    }

    fn multiqubit(&self) -> Outcome {
        let ops = build_collective_ops(self.cfg.n_qubits)?;
        let coherent = coherent_state_x(&ops);
        let mixed = max_entropy_state(&ops);
        let (record, _) = self.record(&ops, &coherent)?;
        let (a, b) = rayon::join(
            || run_trajectory(&coherent, &ops, self.cfg.b, Drive::Record(&record), self.options()),
            || run_trajectory(&mixed, &ops, self.cfg.b, Drive::Record(&record), self.options()),
        );
        let (a, b) = (a?, b?);

        let mut table = Table::new([
            "t",
            "mixedness_coherent",
            "mixedness_max_entropy",
            "l1_distance",
            "jx_coherent",
            "jz_coherent",
            "jx_max_entropy",
            "jz_max_entropy",
        ]);
        let (mut mixedness, mut l1) = (0.0, 0.0);
        for (k, &t) in a.times.iter().enumerate() {
            let (ra, rb) = (&a.states[k], &b.states[k]);
            mixedness = f64::max(1.0 - ra.purity(), 1.0 - rb.purity());
            l1 = ra.l1_distance(rb);
            table.push(vec![
                t,
                1.0 - ra.purity(),
                1.0 - rb.purity(),
                l1,
                ra.expectation(ops.jx()),
                ops.mean_jz(ra.matrix()),
                rb.expectation(ops.jx()),
                ops.mean_jz(rb.matrix()),
            ]);
        }
        table.write(&self.cfg.output_path)?;
        let mut outputs = vec![self.cfg.output_path.clone()];
        self.save(RecordFile::from(&record), &mut outputs)?;
        Ok((
            outputs,
            vec![
                Check::below("final_mixedness", mixedness, PURITY_TOL),
                Check::below("final_l1_distance", l1, MULTI_L1_TOL),
            ],
        ))
    }

    fn online(&self) -> Outcome {
        let ops = build_collective_ops(self.cfg.n_qubits)?;
        let rho0 = coherent_state_x(&ops);
        let (record, truth) = self.record(&ops, &rho0)?;
        let options = OnlineOptions {
            b0: self.cfg.b0,
            gamma: self.cfg.gamma(),
            b_max: self.cfg.b_max,
            stride: self.cfg.stride,
            ema_time: None,
        };
        let grid = self.cfg.grid();
        let (trace, scan) = rayon::join(
            || online_estimate(&record, &ops, &rho0, options),
            || scan_estimate(&record, &ops, &grid, &rho0, self.cfg.integrator),
        );
        let (trace, scan) = (trace?, scan?);

        let mut header = vec!["t", "B_est", "loglik", "loglik_grad", "jx", "jz"];
        if truth.is_some() {
            header.extend(["jx_true", "jz_true"]);
        }
        let mut table = Table::new(header);
        let tail_start = 0.75 * record.duration();
        let (mut tail_sum, mut track_sum, mut tail_n) = (0.0, 0.0, 0usize);
        for (k, &t) in trace.times.iter().enumerate() {
            let mut row = vec![t, trace.b_est[k], trace.loglik[k], trace.loglik_grad[k], trace.jx[k], trace.jz[k]];
            let in_tail = t >= tail_start - 1e-9;
            if let Some(truth) = &truth {
                let rho = &truth.states[k];
                let (jx, jz) = (rho.expectation(ops.jx()), ops.mean_jz(rho.matrix()));
                row.extend([jx, jz]);
                if in_tail {
                    track_sum += (jx - trace.jx[k]).abs().max((jz - trace.jz[k]).abs());
                }
            }
            if in_tail {
                tail_sum += trace.b_est[k];
                tail_n += 1;
            }
            table.push(row);
        }
        table.write(&self.cfg.output_path)?;

        let mut scan_table = Table::new(["B", "loglik_T"]);
        for (b, l) in scan.grid.iter().zip(&scan.loglik) {
            scan_table.push(vec![*b, *l]);
        }
        let scan_path = sibling_path(&self.cfg.output_path, "scan");
        scan_table.write(&scan_path)?;

        let mut checks = Vec::new();
        if let Some(b_true) = record.b_true {
            let tail_mean = tail_sum / tail_n.max(1) as f64;
            checks.push(Check::near("tail_mean_b_est", tail_mean, b_true, ONLINE_BAND * b_true.abs()));
            checks.push(Check::near("scan_argmax", scan.argmax, b_true, self.cfg.grid_step + 1e-9));
        }
        if truth.is_some() {
            checks.push(Check::below("tail_tracking", track_sum / tail_n.max(1) as f64, TRACKING_TOL));
        }
        let mut outputs = vec![self.cfg.output_path.clone(), scan_path];
        self.save(RecordFile::from(&record), &mut outputs)?;
        Ok((outputs, checks))
    }

    fn ergodicity(&self) -> Outcome {
        let t = self.cfg.total_time;
        let checkpoints: Vec<f64> = [t / 100.0, t / 10.0, t].into_iter().filter(|&c| c >= self.cfg.dt).collect();
        let profile = ergodicity_profile(self.cfg.b, &checkpoints, self.cfg.dt, self.cfg.seed, self.cfg.bins, self.cfg.theta0)?;
        let mut header = vec!["theta".to_string()];
        header.extend(profile.iter().map(|r| format!("p_t{}", r.total_time)));
        header.push("expected".into());
        let mut table = Table::new(header);
        let w = std::f64::consts::TAU / self.cfg.bins as f64;
        let last = profile.last().expect("at least one checkpoint");
        for k in 0..self.cfg.bins {
            let mut row = vec![-std::f64::consts::PI + (k as f64 + 0.5) * w];
            row.extend(profile.iter().map(|r| r.histogram[k]));
            row.push(last.expected[k]);
            table.push(row);
        }
        table.write(&self.cfg.output_path)?;
        let decreasing = profile.windows(2).all(|p| p[1].tv_distance < p[0].tv_distance);
        Ok((
            vec![self.cfg.output_path.clone()],
            vec![
                Check::holds("tv_decreasing", decreasing),
                Check::below("final_tv_distance", last.tv_distance, self.cfg.tv_bound),
            ],
        ))
    }

    fn lyapunov(&self) -> Outcome {
        let samples = lyapunov_check(&self.cfg.grid(), self.cfg.dt, self.cfg.draws, self.cfg.seed);
        let mut table = Table::new(["theta", "v", "predicted", "mean_dv", "std_err", "z"]);
        let mut worst: f64 = 0.0;
        for s in &samples {
            let z = (s.mean_dv - s.predicted) / s.std_err;
            worst = worst.max(z.abs());
            table.push(vec![s.theta, s.v, s.predicted, s.mean_dv, s.std_err, z]);
        }
        table.write(&self.cfg.output_path)?;
        Ok((vec![self.cfg.output_path.clone()], vec![Check::below("max_abs_z", worst, SIGMAS)]))
    }

    /// `dt` is the sampling interval; the RK4 step is the largest stable
    /// step that divides it.
    fn kl_monotone(&self) -> Outcome {
        let (b, m) = (self.cfg.b, self.cfg.max_order & !1);
        let first = FourierDistribution::uniform(b, m);
        let mut c = first.coefficients().to_vec();
        c[2] = Complex64::new(KL_PERTURBATION * C0, 0.0);
        let second = FourierDistribution::from_coefficients(b, c)?;
        let substeps = (self.cfg.dt / max_stable_dt(b, m)).ceil().max(1.0) as usize;
        let h = self.cfg.dt / substeps as f64;
        let steps = self.cfg.steps() * substeps;
        let (ea, eb) = rayon::join(
            || fp_evolve(&first, b, h, steps, substeps),
            || fp_evolve(&second, b, h, steps, substeps),
        );
        let (ea, eb) = (ea?, eb?);
        let kl: Vec<f64> = ea.states.par_iter().zip(&eb.states).map(|(p, q)| kl_divergence(p, q)).collect();

        let mut table = Table::new(["t", "kl", "l2_distance"]);
        let mut l2 = f64::NAN;
        for (k, &t) in ea.times.iter().enumerate() {
            l2 = coefficient_distance(&ea.states[k], &eb.states[k]);
            table.push(vec![t, kl[k], l2]);
        }
        table.write(&self.cfg.output_path)?;
        let monotone = kl.windows(2).all(|w| w[1] <= w[0] + KL_SLACK);
        Ok((
            vec![self.cfg.output_path.clone()],
            vec![
                Check::holds("kl_non_increasing", monotone),
                Check::below("final_l2_distance", l2, FP_L2_TOL),
            ],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("fig7".parse::<Experiment>().is_err());
    }

    #[test]
    fn config_text_overrides_defaults() {
        let mut c = ExperimentConfig::new(Experiment::Fig6Online);
        c.apply_text("# online run\nb = 0.8\ndt=0.02   # coarser\nintegrator = euler\n\nout = x.csv\n")
            .unwrap();
        assert_eq!(c.b, 0.8);
        assert_eq!(c.gamma(), 0.01);
        assert_eq!(c.integrator, Integrator::Euler);
        assert_eq!(c.output_path, PathBuf::from("x.csv"));
    }

    #[test]
    fn config_errors_name_the_line() {
        let mut c = ExperimentConfig::new(Experiment::Fig1Convergence);
        for (text, line) in [("b = 1\nbogus = 2\n", 2), ("\n\ndt\n", 3), ("seed = -1\n", 1), ("experiment = lyapunov", 1)] {
            match c.apply_text(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Experiment::Fig1Convergence);
        assert!(c.validate().is_ok());
        c.n_qubits = 2;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Experiment::Fig5Multiqubit);
        c.total_time = 0.5 * c.dt;
        assert!(c.validate().is_err());
        c.total_time = 1.0;
        c.dt = -1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Experiment::Fig6Online);
        c.b0 = 3.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn grid_is_inclusive() {
        let c = ExperimentConfig::new(Experiment::Fig3Current);
        let g = c.grid();
        assert_eq!(g.len(), 40);
        assert!((g[39] - 2.0).abs() < 1e-12);
        assert_eq!(ExperimentConfig::new(Experiment::Fig6Online).grid().len(), 61);
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling_path(Path::new("out/a.csv"), "scan"), PathBuf::from("out/a_scan.csv"));
        assert_eq!(sibling_path(Path::new("a"), "density"), PathBuf::from("a_density"));
    }
}
