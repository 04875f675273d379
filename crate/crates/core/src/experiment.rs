//! Seeded experiment batches: convergence traces and baseline power sweeps.
//!
//! Configs are TOML with flat dotted keys (`dims.m = 3`, `ao.mm.tol = 1e-4`).
//! Results are written as CSV together with a gnuplot script. Rows are
//! assembled in key order, so output is byte-identical across runs when the
//! timestamp header is disabled.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{ao_solve, baseline_random_phase, baseline_zero_phase, AOConfig};
use crate::channel::{generate_channel, Dims, FadingConfig, WiretapChannel};
use crate::error::{Error, Result};

/// Overrides `output_dir` from the config file when set.
pub const OUTPUT_DIR_ENV: &str = "IRS_WIRETAP_OUTPUT_DIR";

/// Slack on per-step trace monotonicity checked by the audits.
pub const MONOTONE_TOL: f64 = 1e-6;
/// Slack on per-instance AO vs zero-phase dominance checked by the audits.
pub const DOMINANCE_TOL: f64 = 1e-8;

const RANDOM_PHASE_SALT: u64 = 0x7261_6e64_5048_4153;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Dims,
    #[serde(default)]
    pub fading: FadingConfig,
    pub power_grid_dbm: Vec<f64>,
    pub num_channels: usize,
    #[serde(default)]
    pub ao: AOConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, then applies [`OUTPUT_DIR_ENV`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.fading.validate()?;
        self.ao.validate()?;
        if self.num_channels == 0 {
            return Err(Error::Config("num_channels must be >= 1".into()));
        }
        if self.power_grid_dbm.is_empty() {
            return Err(Error::Config("power_grid_dbm must not be empty".into()));
        }
        if self.power_grid_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("power_grid_dbm entries must be finite".into()));
        }
        if self.power_grid_dbm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("power_grid_dbm must be strictly increasing".into()));
        }
        Ok(())
    }

    /// The channel for `(channel_id, power_index)`.
    pub fn channel(&self, channel_id: usize, power_index: usize) -> Result<WiretapChannel> {
        let seed = seed_schedule(self.master_seed, channel_id as u64, power_index as u64);
        generate_channel(self.dims, &self.fading.with_seed(seed))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-instance seed: nested SplitMix64 finalizers over
/// `power_index`, `channel_id` and `master_seed`, in that order. Stable
/// across versions; changing it changes every generated channel.
pub fn seed_schedule(master_seed: u64, channel_id: u64, power_index: u64) -> u64 {
    let h = splitmix64(power_index);
    let h = splitmix64(h ^ channel_id);
    splitmix64(h ^ master_seed)
}

/// Controls the optional `# generated ...` first line of each CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    pub timestamp: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { timestamp: true }
    }
}

/// Opens the output file before any work starts, so an unwritable location
/// fails fast.
fn create_output(dir: &Path, name: &str) -> Result<(PathBuf, File)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, file))
}

fn header(opts: OutputOptions) -> String {
    if !opts.timestamp {
        return String::new();
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("# generated unix_time={secs}\n")
}

#[derive(Debug, Clone)]
pub struct ChannelTrace {
    pub channel_id: usize,
    /// `C_s` in bits after each outer iteration.
    pub values: Vec<f64>,
    pub converged: bool,
}

impl ChannelTrace {
    pub fn iterations(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutput {
    pub csv_path: PathBuf,
    pub script_path: PathBuf,
    pub power_dbm: f64,
    pub traces: Vec<ChannelTrace>,
}

impl ConvergenceOutput {
    pub fn median_iterations(&self) -> f64 {
        let mut it: Vec<usize> = self.traces.iter().map(ChannelTrace::iterations).collect();
        it.sort_unstable();
        let k = it.len();
        if k % 2 == 1 {
            it[k / 2] as f64
        } else {
            0.5 * (it[k / 2 - 1] + it[k / 2]) as f64
        }
    }
}

/// Full AO traces for `num_channels` channels at the first grid power.
///
/// CSV columns: `channel_id,iteration,c_s_bits`.
pub fn run_convergence(cfg: &ExperimentConfig, opts: OutputOptions) -> Result<ConvergenceOutput> {
    cfg.validate()?;
    let (csv_path, mut file) = create_output(&cfg.output_dir, "convergence.csv")?;
    let power_dbm = cfg.power_grid_dbm[0];

    let traces = (0..cfg.num_channels)
        .into_par_iter()
        .map(|id| {
            let ch = cfg.channel(id, 0)?;
            let rep = ao_solve(&ch, power_dbm, &cfg.ao)?;
            Ok(ChannelTrace { channel_id: id, values: rep.trace.iter().map(|&(_, v)| v).collect(), converged: rep.converged })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = header(opts);
    csv.push_str("channel_id,iteration,c_s_bits\n");
    for t in &traces {
        for (k, v) in t.values.iter().enumerate() {
            writeln!(csv, "{},{},{:e}", t.channel_id, k + 1, v).unwrap();
        }
    }
    file.write_all(csv.as_bytes())?;

    let script_path = cfg.output_dir.join("convergence.gp");
    fs::write(&script_path, convergence_script(power_dbm))?;

    audit_convergence_csv(&csv)?;
    Ok(ConvergenceOutput { csv_path, script_path, power_dbm, traces })
}

/// Checks that every channel's trace in an emitted convergence CSV is
/// non-decreasing within [`MONOTONE_TOL`].
pub fn audit_convergence_csv(csv: &str) -> Result<()> {
    let mut last: Option<(u64, f64)> = None;
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let parse_err = || Error::Audit(format!("malformed convergence row: {line}"));
        if fields.len() != 3 {
            return Err(parse_err());
        }
        let id: u64 = fields[0].parse().map_err(|_| parse_err())?;
        let v: f64 = fields[2].parse().map_err(|_| parse_err())?;
        if !v.is_finite() {
            return Err(Error::Audit(format!("non-finite rate for channel {id}")));
        }
        if let Some((prev_id, prev_v)) = last {
            if prev_id == id && v < prev_v - MONOTONE_TOL {
                return Err(Error::Audit(format!("channel {id}: trace decreased from {prev_v} to {v}")));
            }
        }
        last = Some((id, v));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    AO,
    ZeroPhase,
    RandomPhase,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::AO, Scheme::ZeroPhase, Scheme::RandomPhase];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::AO => "AO",
            Scheme::ZeroPhase => "ZeroPhase",
            Scheme::RandomPhase => "RandomPhase",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub power_dbm: f64,
    pub scheme: Scheme,
    pub mean_c_s: f64,
    pub stderr_c_s: f64,
    pub num_channels: usize,
}

/// Per-channel values of one sweep point, indexed like [`Scheme::ALL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceResult {
    pub power_index: usize,
    pub channel_id: usize,
    pub values: [f64; 3],
    pub ao_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub csv_path: PathBuf,
    pub script_path: PathBuf,
    pub rows: Vec<SweepRow>,
    pub instances: Vec<InstanceResult>,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// AO against the zero-phase and random-phase baselines at every grid power.
/// All schemes see the same channel for a given `(power, channel_id)`.
///
/// CSV columns: `power_dbm,scheme,mean_c_s,stderr_c_s,num_channels`.
pub fn run_sweep(cfg: &ExperimentConfig, opts: OutputOptions) -> Result<SweepOutput> {
    cfg.validate()?;
    let (csv_path, mut file) = create_output(&cfg.output_dir, "sweep.csv")?;

    let jobs: Vec<(usize, usize)> =
        (0..cfg.power_grid_dbm.len()).flat_map(|pi| (0..cfg.num_channels).map(move |id| (pi, id))).collect();
    let instances = jobs
        .into_par_iter()
        .map(|(pi, id)| {
            let p = cfg.power_grid_dbm[pi];
            let ch = cfg.channel(id, pi)?;
            let ao = ao_solve(&ch, p, &cfg.ao)?;
            let zero = baseline_zero_phase(&ch, p, &cfg.ao.cov)?;
            let phase_seed = seed_schedule(cfg.master_seed ^ RANDOM_PHASE_SALT, id as u64, pi as u64);
            let random = baseline_random_phase(&ch, p, &cfg.ao.cov, phase_seed)?;
            Ok(InstanceResult { power_index: pi, channel_id: id, values: [ao.final_c_s(), zero, random], ao_iterations: ao.iterations })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (pi, &power_dbm) in cfg.power_grid_dbm.iter().enumerate() {
        let at_power: Vec<&InstanceResult> = instances.iter().filter(|r| r.power_index == pi).collect();
        for (si, scheme) in Scheme::ALL.into_iter().enumerate() {
            let xs: Vec<f64> = at_power.iter().map(|r| r.values[si]).collect();
            let (mean_c_s, stderr_c_s) = mean_and_stderr(&xs);
            rows.push(SweepRow { power_dbm, scheme, mean_c_s, stderr_c_s, num_channels: xs.len() });
        }
    }

    let mut csv = header(opts);
    csv.push_str("power_dbm,scheme,mean_c_s,stderr_c_s,num_channels\n");
    for r in &rows {
        writeln!(csv, "{},{},{:e},{:e},{}", r.power_dbm, r.scheme.label(), r.mean_c_s, r.stderr_c_s, r.num_channels).unwrap();
    }
    file.write_all(csv.as_bytes())?;

    let script_path = cfg.output_dir.join("sweep.gp");
    fs::write(&script_path, sweep_script())?;

    audit_sweep(&rows, &instances)?;
    Ok(SweepOutput { csv_path, script_path, rows, instances })
}

fn audit_sweep(rows: &[SweepRow], instances: &[InstanceResult]) -> Result<()> {
    for r in rows {
        if !r.mean_c_s.is_finite() || !r.stderr_c_s.is_finite() {
            return Err(Error::Audit(format!("non-finite mean for {} at {} dBm", r.scheme.label(), r.power_dbm)));
        }
        if r.mean_c_s < 0.0 {
            return Err(Error::Audit(format!("negative mean for {} at {} dBm", r.scheme.label(), r.power_dbm)));
        }
    }
    for inst in instances {
        if inst.values[0] < inst.values[1] - DOMINANCE_TOL {
            return Err(Error::Audit(format!(
                "channel {} at power index {}: AO {} below zero-phase baseline {}",
                inst.channel_id, inst.power_index, inst.values[0], inst.values[1]
            )));
        }
    }
    Ok(())
}

fn convergence_script(power_dbm: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xlabel 'iteration'\n\
         set ylabel 'C_s (bit/s/Hz)'\n\
         set title 'AO convergence, P = {power_dbm} dBm'\n\
         plot for [id=0:*] 'convergence.csv' every ::1 using ($1 == id ? $2 : 1/0):3 with linespoints\n"
    )
}

fn sweep_script() -> String {
    "set datafile separator ','\n\
     set key top left\n\
     set xlabel 'P (dBm)'\n\
     set ylabel 'mean C_s (bit/s/Hz)'\n\
     plot for [s in 'AO ZeroPhase RandomPhase'] 'sweep.csv' every ::1 \\\n  \
     using 1:(strcol(2) eq s ? $3 : 1/0):4 with yerrorlines title s\n"
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let text = format!(
            "dims.m = 2\ndims.n = 4\ndims.d = 2\ndims.e = 1\n\
             fading.dist_ai = 2.0\nfading.dist_ib = 2.0\nfading.dist_ie = 3.0\n\
             power_grid_dbm = [20.0, 30.0]\nnum_channels = 3\nmaster_seed = 11\n\
             ao.max_ao_iters = 50\nao.mm.tol = 1e-4\noutput_dir = {:?}\n",
            dir.to_str().unwrap()
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn seed_schedule_examples() {
        assert_eq!(seed_schedule(1, 2, 3), seed_schedule(1, 2, 3));
        assert_ne!(seed_schedule(0, 0, 0), seed_schedule(0, 0, 1));
        let mut seen = HashSet::new();
        for master in 0..4u64 {
            for id in 0..50u64 {
                for p in 0..50u64 {
                    assert!(seen.insert(seed_schedule(master, id, p)));
                }
            }
        }
        assert_eq!(seen.len(), 10_000);
    }

    #[test]
    fn config_validation() {
        let base = "dims.m = 2\ndims.n = 4\ndims.d = 1\ndims.e = 1\nnum_channels = 1\n";
        assert!(ExperimentConfig::from_toml_str(&format!("{base}power_grid_dbm = [30.0]\n")).is_ok());
        assert!(ExperimentConfig::from_toml_str(&format!("{base}power_grid_dbm = []\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{base}power_grid_dbm = [30.0, 20.0]\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{base}power_grid_dbm = [30.0]\nbogus = 1\n")).is_err());
        let zero = base.replace("num_channels = 1", "num_channels = 0");
        assert!(ExperimentConfig::from_toml_str(&format!("{zero}power_grid_dbm = [30.0]\n")).is_err());
    }

    #[test]
    fn convergence_with_vanishing_power_is_flat_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.num_channels = 1;
        cfg.power_grid_dbm = vec![-300.0];
        let out = run_convergence(&cfg, OutputOptions { timestamp: false }).unwrap();
        assert_eq!(out.traces.len(), 1);
        assert!(out.traces[0].values.iter().all(|v| v.abs() < 1e-12));
        let csv = fs::read_to_string(&out.csv_path).unwrap();
        assert!(csv.starts_with("channel_id,iteration,c_s_bits\n0,1,"));
        assert!(out.script_path.exists());
    }

    #[test]
    fn sweep_is_reproducible_and_channel_matched() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let opts = OutputOptions { timestamp: false };
        let a = run_sweep(&cfg, opts).unwrap();
        let first = fs::read(&a.csv_path).unwrap();
        let b = run_sweep(&cfg, opts).unwrap();
        assert_eq!(first, fs::read(&b.csv_path).unwrap());
        assert_eq!(a.rows.len(), 6);
        for r in &a.rows {
            assert!(r.mean_c_s >= 0.0);
        }
        for inst in &a.instances {
            let ch = cfg.channel(inst.channel_id, inst.power_index).unwrap();
            let zero = baseline_zero_phase(&ch, cfg.power_grid_dbm[inst.power_index], &cfg.ao.cov).unwrap();
            assert_eq!(zero.to_bits(), inst.values[1].to_bits());
        }
        let with_ts = run_sweep(&cfg, OutputOptions { timestamp: true }).unwrap();
        let text = fs::read_to_string(&with_ts.csv_path).unwrap();
        assert!(text.starts_with("# generated"));
        assert_eq!(text.lines().skip(1).collect::<Vec<_>>().join("\n") + "\n", String::from_utf8(first).unwrap());
    }

    #[test]
    fn unwritable_output_fails_before_solving() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let mut cfg = small_config(&blocker.join("sub"));
        cfg.num_channels = 10_000;
        assert!(matches!(run_sweep(&cfg, OutputOptions::default()), Err(Error::Io(_))));
        assert!(matches!(run_convergence(&cfg, OutputOptions::default()), Err(Error::Io(_))));
    }

    #[test]
    fn audit_rejects_decreasing_trace() {
        let good = "channel_id,iteration,c_s_bits\n0,1,1.0\n0,2,1.5\n1,1,0.2\n";
        assert!(audit_convergence_csv(good).is_ok());
        let bad = "channel_id,iteration,c_s_bits\n0,1,1.0\n0,2,0.9\n";
        assert!(matches!(audit_convergence_csv(bad), Err(Error::Audit(_))));
    }

    #[test]
    fn stderr_formula() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[4.0]), (4.0, 0.0));
    }
}
