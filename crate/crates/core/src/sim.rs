//! End-to-end quadrature-evolution runs: Gaussian carrier synthesis, the
//! two-layer noisy transmission (block-transform look plus per-carrier
//! spread diversity), fusion into a real regressor, least-squares recovery,
//! per-carrier error statistics, key-rate reporting, and the CSV emitters.
//!
//! Every trial draws from its own counter-indexed RNG stream, so results are
//! byte-identical across execution modes, thread counts, and repeated runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{
    aggregate_coefficient, measure, transmit, LogicalChannel, Measured, Measurement, SubChannel,
};
use crate::config::{CovMode, SimConfig};
use crate::error::{Error, Result};
use crate::gqi::{beta_window, dgqi_estimate};
use crate::keyrate::{keyrate_report, KeyRateReport};
use crate::qe::{
    build_cov_kk, build_cov_xk, build_cov_xx, empirical_covariances_from_matrices, DeconvKernel,
    EstimatorBundle,
};
use crate::rng::{sample_complex_carrier, CarrierRng};
use crate::spectral::{spectrum_to_autocorr, SpectralDensity, UnitaryFft};

/// How the trial loop executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Plain serial loop over trials.
    Sequential,
    /// Data-parallel loop over trials; output is identical to sequential.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl ExecMode {
    /// Human-readable mode name.
    pub fn label(self) -> &'static str {
        match self {
            ExecMode::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => "parallel",
        }
    }
}

/// Parallel when the feature is enabled, otherwise sequential.
pub fn default_mode() -> ExecMode {
    #[cfg(feature = "parallel")]
    {
        ExecMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    {
        ExecMode::Sequential
    }
}

/// Trial-0 traces backing the figure files.
#[derive(Debug, Clone)]
pub struct FigureData {
    /// Source in-phase quadrature per carrier.
    pub x: Vec<f64>,
    /// Received-minus-sent in-phase deviation on carrier 0's spread block.
    pub delta_x: Vec<f64>,
    /// Received in-phase view of that block.
    pub x_prime: Vec<f64>,
    /// Windowed inverse-transform estimate of that block.
    pub gqi: Vec<Complex64>,
    /// Recombined carrier-scale observation.
    pub kappa: Vec<Complex64>,
    /// Recovered source quadrature.
    pub x_est: Vec<f64>,
    /// Recovery error, exactly `x - x_est` entry by entry.
    pub e: Vec<f64>,
}

/// Aggregate statistics over all trials.
#[derive(Debug, Clone)]
pub struct RunStats {
    /// Mean recovery error per carrier (should hover near zero).
    pub per_j_err_mean: Vec<f64>,
    /// Mean squared recovery error per carrier.
    pub per_j_err_sq: Vec<f64>,
    /// Sample variance of the source quadrature per carrier.
    pub per_j_x_var: Vec<f64>,
    /// Mean squared error pooled over carriers and trials.
    pub mean_err: f64,
    /// Sample variance across trials of the per-trial mean squared error.
    pub err_trial_var: f64,
    /// Standard error of `mean_err` across trials.
    pub err_std_err: f64,
    /// Pooled sample variance of the derotated block-transform observation.
    pub regressor_variance: f64,
    /// Trace of the model error covariance.
    pub trace_ee: f64,
}

/// Per-trial sample matrices (one column per trial).
#[derive(Debug, Clone)]
pub struct Samples {
    /// Source in-phase quadratures.
    pub x: DMatrix<f64>,
    /// Fused real regressors.
    pub k_fused: DMatrix<f64>,
    /// Derotated block-transform-only regressors.
    pub k_raw: DMatrix<f64>,
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: SimConfig,
    pub mode: ExecMode,
    pub stats: RunStats,
    pub figures: FigureData,
    pub bundle: EstimatorBundle,
    pub cov_ee: DMatrix<f64>,
    pub keyrate: Option<KeyRateReport>,
    pub samples: Samples,
    pub wallclock_ms: u128,
}

/// Summary of a run that also wrote its figure files.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub config: SimConfig,
    pub mode: String,
    pub trials: usize,
    pub wallclock_ms: u128,
    pub mean_err: f64,
    pub err_std_err: f64,
    pub trace_ee: f64,
    pub regressor_variance: f64,
    pub keyrate: Option<KeyRateReport>,
    pub figure_paths: Vec<(String, PathBuf)>,
}

/// One row of the recombination-width sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub m: usize,
    pub mean_err: f64,
    /// Variance across trials of the per-trial mean squared error.
    pub err_var: f64,
    pub trace_ee: f64,
    pub report: KeyRateReport,
}

/// Carriers padded up to a whole number of blocks.
pub(crate) fn padded_len(d: usize, m: usize) -> usize {
    d.div_ceil(m) * m
}

/// Immutable per-run state shared by every trial.
struct TrialContext {
    d: usize,
    d_pad: usize,
    m: usize,
    omega: f64,
    sigma_w0_sq: f64,
    seed: u64,
    channel: LogicalChannel,
    measurement: Measurement,
    beta: Vec<f64>,
    mean_beta: f64,
    /// Unit phasor cancelling the aggregate transmittance phase.
    derot: Complex64,
    fft: UnitaryFft,
    /// ramps[b][i] = exp(+2 pi i b i / m); recombination conjugates it.
    ramps: Vec<Vec<Complex64>>,
}

impl TrialContext {
    fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let m = config.m;
        let channel = LogicalChannel::new(
            config
                .transmittances
                .iter()
                .map(|&t| SubChannel::new(t, config.sigma_n_sq))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let beta = beta_window(&config.window, m)?;
        let mean_beta = beta.iter().sum::<f64>() / m as f64;
        if mean_beta.abs() < 1e-9 {
            return Err(Error::Parameter(
                "window mean is zero; recombination cannot be normalized".into(),
            ));
        }
        let tbar = aggregate_coefficient(&channel);
        if tbar.norm() < 1e-12 {
            return Err(Error::Parameter(
                "aggregate transmittance vanishes; no signal reaches the receiver".into(),
            ));
        }
        let ramps = (0..m)
            .map(|b| {
                (0..m)
                    .map(|i| {
                        Complex64::from_polar(
                            1.0,
                            std::f64::consts::TAU * ((b * i) % m) as f64 / m as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(TrialContext {
            d: config.d,
            d_pad: padded_len(config.d, m),
            m,
            omega: config.omega(),
            sigma_w0_sq: config.sigma_w0_sq,
            seed: config.seed,
            channel,
            measurement: Measurement::Heterodyne {
                detection_variance: config.detection_variance,
            },
            beta,
            mean_beta,
            derot: Complex64::from_polar(1.0, -tbar.arg()),
            fft: UnitaryFft::new(m)?,
            ramps,
        })
    }
}

/// Carrier-0 spread-block traces captured on trial 0.
struct BlockTrace {
    delta_x: Vec<f64>,
    x_prime: Vec<f64>,
    kappa: Vec<Complex64>,
}

struct TrialData {
    x: Vec<f64>,
    k_raw: Vec<f64>,
    k_fused: Vec<f64>,
    block: Option<BlockTrace>,
}

fn expect_both(measured: Measured) -> Vec<Complex64> {
    match measured {
        Measured::Both(v) => v,
        Measured::X(_) => unreachable!("heterodyne measurement returns both quadratures"),
    }
}

/// Block-transform look: per m-block inverse transform, noisy transmission,
/// measurement, forward transform. Consumes RNG draws in block order.
fn layer_a(ctx: &TrialContext, z: &[Complex64], rng: &mut CarrierRng) -> Result<Vec<Complex64>> {
    let mut kappa = Vec::with_capacity(z.len());
    for block in z.chunks_exact(ctx.m) {
        let sub = ctx.fft.idft(block)?;
        let noisy = transmit(&sub, &ctx.channel, rng)?;
        let received = expect_both(measure(&noisy, ctx.measurement, rng)?);
        kappa.extend(ctx.fft.dft(&received)?);
    }
    Ok(kappa)
}

/// One full trial. Draw order: carrier samples, block-transform noise in
/// block order, then spread-diversity noise in carrier order.
fn simulate_trial(ctx: &TrialContext, trial: u64) -> Result<TrialData> {
    let mut rng = CarrierRng::for_trial(ctx.seed, trial);
    let z = sample_complex_carrier(ctx.d_pad, ctx.sigma_w0_sq, &mut rng)?;
    let kappa = layer_a(ctx, &z, &mut rng)?;

    let m = ctx.m;
    let mf = m as f64;
    let spread_scale = 1.0 / ctx.omega.sqrt();
    let recomb_scale = ctx.omega.sqrt() / (mf * ctx.mean_beta);
    let mut x = Vec::with_capacity(ctx.d);
    let mut k_raw = Vec::with_capacity(ctx.d);
    let mut k_fused = Vec::with_capacity(ctx.d);
    let mut block = None;
    for (j, &zj) in z.iter().take(ctx.d).enumerate() {
        let ramp = &ctx.ramps[j % m];
        let sent: Vec<Complex64> = ramp.iter().map(|&r| zj * spread_scale * r).collect();
        let noisy = transmit(&sent, &ctx.channel, &mut rng)?;
        let received = expect_both(measure(&noisy, ctx.measurement, &mut rng)?);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            acc += ctx.beta[i] * received[i] * ramp[i].conj();
        }
        let g = acc * recomb_scale;
        let fused = (kappa[j] * ctx.omega + g * mf) / (ctx.omega + mf);
        x.push(zj.re);
        k_raw.push((ctx.derot * kappa[j]).re);
        k_fused.push((ctx.derot * fused).re);
        if trial == 0 && j == 0 {
            block = Some(BlockTrace {
                delta_x: received.iter().zip(&sent).map(|(r, s)| r.re - s.re).collect(),
                x_prime: received.iter().map(|r| r.re).collect(),
                kappa: Vec::new(),
            });
        }
    }
    if let Some(trace) = block.as_mut() {
        trace.kappa = kappa[..ctx.d].to_vec();
    }
    Ok(TrialData {
        x,
        k_raw,
        k_fused,
        block,
    })
}

fn run_trials(ctx: &TrialContext, trials: usize, mode: ExecMode) -> Result<Vec<TrialData>> {
    match mode {
        ExecMode::Sequential => (0..trials as u64).map(|t| simulate_trial(ctx, t)).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..trials as u64)
                .into_par_iter()
                .map(|t| simulate_trial(ctx, t))
                .collect()
        }
    }
}

/// Quadrature noise variance of the fused regressor implied by the model:
/// the inverse-variance blend of the block-transform look (per-look noise
/// sigma_n^2 + detection variance) and the m-fold spread-diversity look,
/// inflated by the window factor mean(beta^2) / mean(beta)^2.
pub fn fused_noise_variance(config: &SimConfig) -> Result<f64> {
    let omega = config.omega();
    let m = config.m as f64;
    let beta = beta_window(&config.window, config.m)?;
    let mean_b = beta.iter().sum::<f64>() / m;
    if mean_b.abs() < 1e-9 {
        return Err(Error::Parameter(
            "window mean is zero; recombination cannot be normalized".into(),
        ));
    }
    let mean_b2 = beta.iter().map(|b| b * b).sum::<f64>() / m;
    let window_factor = mean_b2 / (mean_b * mean_b);
    let look = config.sigma_n_sq + config.detection_variance;
    let w_a = look;
    let w_c = (omega / m) * look * window_factor;
    Ok((omega * omega * w_a + m * m * w_c) / ((omega + m) * (omega + m)))
}

/// Closed-form per-carrier residual for a uniform transmittance profile:
/// sigma^2 w / (|T|^2 sigma^2 + w) with w the fused regressor noise.
pub fn analytic_error_law(config: &SimConfig) -> Result<f64> {
    let w = fused_noise_variance(config)?;
    let tbar = config.transmittances.iter().sum::<Complex64>() / config.m as f64;
    let gain = tbar.norm_sqr();
    let s2 = config.sigma_w0_sq;
    let denom = gain * s2 + w;
    if denom <= 0.0 {
        return Ok(s2);
    }
    Ok(s2 * w / denom)
}

/// Runs the pipeline and returns estimates, statistics, and figure traces
/// without touching the filesystem.
pub fn run_core(config: &SimConfig, mode: ExecMode) -> Result<RunOutput> {
    let started = Instant::now();
    let ctx = TrialContext::new(config)?;
    let n = config.trials;
    let d = config.d;

    let mut data = run_trials(&ctx, n, mode)?;
    let block = data[0]
        .block
        .take()
        .expect("trial zero records the block trace");

    let x_mat = DMatrix::from_fn(d, n, |r, c| data[c].x[r]);
    let k_mat = DMatrix::from_fn(d, n, |r, c| data[c].k_fused[r]);
    let k_raw = DMatrix::from_fn(d, n, |r, c| data[c].k_raw[r]);
    drop(data);

    let tbar = aggregate_coefficient(&ctx.channel);
    let (cov_xx, cov_kk, cov_xk) = match config.cov_mode {
        CovMode::Empirical => empirical_covariances_from_matrices(&x_mat, &k_mat, config.reg_eps)?,
        CovMode::Analytic => {
            let spectrum = SpectralDensity::white(config.sigma_w0_sq, config.theta_points)?;
            let cov_xx = build_cov_xx(&spectrum, d)?;
            let gbar = vec![tbar.norm_sqr(); config.theta_points];
            let w = fused_noise_variance(config)?;
            let cov_kk = build_cov_kk(&spectrum, &gbar, w, d, config.reg_eps)?;
            let auto = spectrum_to_autocorr(&spectrum, d - 1);
            let tau = DeconvKernel {
                taps: vec![tbar.norm()],
            };
            let cov_xk = build_cov_xk(&tau, &auto, 1.0, d, d)?;
            (cov_xx, cov_kk, cov_xk)
        }
    };
    let bundle = EstimatorBundle::from_covariances(cov_xx, cov_kk, cov_xk)?;
    let (cov_ee, trace_ee) = bundle.error_covariance()?;

    let est_mat = &bundle.xi * &k_mat;
    let e_mat = &x_mat - &est_mat;

    let nf = n as f64;
    let df = d as f64;
    let mut per_j_err_mean = vec![0.0; d];
    let mut per_j_err_sq = vec![0.0; d];
    let mut x_sum = vec![0.0; d];
    let mut x_sq = vec![0.0; d];
    let mut per_trial_sq = vec![0.0; n];
    for c in 0..n {
        let ecol = e_mat.column(c);
        let xcol = x_mat.column(c);
        let mut acc = 0.0;
        for r in 0..d {
            let e = ecol[r];
            per_j_err_mean[r] += e;
            per_j_err_sq[r] += e * e;
            acc += e * e;
            x_sum[r] += xcol[r];
            x_sq[r] += xcol[r] * xcol[r];
        }
        per_trial_sq[c] = acc / df;
    }
    per_j_err_mean.iter_mut().for_each(|v| *v /= nf);
    per_j_err_sq.iter_mut().for_each(|v| *v /= nf);
    let per_j_x_var: Vec<f64> = x_sum
        .iter()
        .zip(&x_sq)
        .map(|(&s, &sq)| {
            if n >= 2 {
                (sq - s * s / nf) / (nf - 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mean_err = per_trial_sq.iter().sum::<f64>() / nf;
    let err_trial_var = if n >= 2 {
        per_trial_sq
            .iter()
            .map(|&v| (v - mean_err) * (v - mean_err))
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    let err_std_err = (err_trial_var / nf).sqrt();

    let raw_count = (d * n) as f64;
    let raw_mean = k_raw.iter().sum::<f64>() / raw_count;
    let regressor_variance = if d * n >= 2 {
        k_raw.iter().map(|&v| (v - raw_mean) * (v - raw_mean)).sum::<f64>() / (raw_count - 1.0)
    } else {
        0.0
    };

    let keyrate = if mean_err > 0.0 && mean_err < config.sigma_w0_sq {
        Some(keyrate_report(
            config.m,
            config.sigma_w0_sq,
            mean_err,
            err_std_err,
            config.eve_excess_noise,
            config.theta_points,
        )?)
    } else {
        None
    };

    let figures = FigureData {
        x: x_mat.column(0).iter().copied().collect(),
        gqi: dgqi_estimate(&block.x_prime, &ctx.beta)?,
        delta_x: block.delta_x,
        x_prime: block.x_prime,
        kappa: block.kappa,
        x_est: est_mat.column(0).iter().copied().collect(),
        e: e_mat.column(0).iter().copied().collect(),
    };

    Ok(RunOutput {
        config: config.clone(),
        mode,
        stats: RunStats {
            per_j_err_mean,
            per_j_err_sq,
            per_j_x_var,
            mean_err,
            err_trial_var,
            err_std_err,
            regressor_variance,
            trace_ee,
        },
        figures,
        bundle,
        cov_ee,
        keyrate,
        samples: Samples {
            x: x_mat,
            k_fused: k_mat,
            k_raw,
        },
        wallclock_ms: started.elapsed().as_millis(),
    })
}

/// Streaming variance of the in-phase block-transform observation over
/// fresh trials, running only the draws that precede it. Because the
/// per-trial draw order puts the carrier samples and block-transform noise
/// first, the probed values match a full run bit for bit.
pub fn kappa_variance_probe(
    config: &SimConfig,
    trials: usize,
    mode: ExecMode,
) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(Error::Parameter("variance probe needs >= 2 trials".into()));
    }
    let ctx = TrialContext::new(config)?;
    let probe_one = |t: u64| -> Result<(f64, f64)> {
        let mut rng = CarrierRng::for_trial(ctx.seed, t);
        let z = sample_complex_carrier(ctx.d_pad, ctx.sigma_w0_sq, &mut rng)?;
        let kappa = layer_a(&ctx, &z, &mut rng)?;
        let (mut s, mut sq) = (0.0, 0.0);
        for k in &kappa[..ctx.d] {
            s += k.re;
            sq += k.re * k.re;
        }
        Ok((s, sq))
    };
    let partials: Vec<(f64, f64)> = match mode {
        ExecMode::Sequential => (0..trials as u64)
            .map(probe_one)
            .collect::<Result<Vec<_>>>()?,
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..trials as u64)
                .into_par_iter()
                .map(probe_one)
                .collect::<Result<Vec<_>>>()?
        }
    };
    let count = (trials * ctx.d) as f64;
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), &(s, sq)| (a + s, b + sq));
    let mean = sum / count;
    let var = (sumsq - count * mean * mean) / (count - 1.0);
    // sampling error of a Gaussian variance estimate from independent draws
    let std_err = var * (2.0 / (count - 1.0)).sqrt();
    Ok((var, std_err))
}

/// 17-significant-digit float formatting; parses back to the same bits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(
    dir: &Path,
    name: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = String::with_capacity(4096);
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row);
        buf.push('\n');
    }
    fs::write(&path, buf)?;
    Ok(path)
}

fn scalar_rows<'a>(values: &'a [f64]) -> impl Iterator<Item = String> + 'a {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{i},{}", fmt_float(v)))
}

fn complex_rows<'a>(values: &'a [Complex64]) -> impl Iterator<Item = String> + 'a {
    values
        .iter()
        .enumerate()
        .map(|(i, z)| format!("{i},{},{}", fmt_float(z.re), fmt_float(z.im)))
}

/// Writes the eight per-run figure files into `dir` and returns their paths.
pub fn write_figures(output: &RunOutput, dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    fs::create_dir_all(dir)?;
    let fig = &output.figures;
    let tables: [(&str, &str, Box<dyn Iterator<Item = String>>); 8] = [
        ("fig_s1a", "j,x", Box::new(scalar_rows(&fig.x))),
        ("fig_s1b", "i,delta_x", Box::new(scalar_rows(&fig.delta_x))),
        ("fig_s2", "i,x_prime", Box::new(scalar_rows(&fig.x_prime))),
        ("fig_s3a", "i,gqi_re,gqi_im", Box::new(complex_rows(&fig.gqi))),
        ("fig_s3b", "j,kappa_re,kappa_im", Box::new(complex_rows(&fig.kappa))),
        ("fig_s4a", "j,x_est", Box::new(scalar_rows(&fig.x_est))),
        ("fig_s4b", "j,e", Box::new(scalar_rows(&fig.e))),
        (
            "fig_s5",
            "j,err_var",
            Box::new(scalar_rows(&output.stats.per_j_err_sq)),
        ),
    ];
    let mut paths = Vec::with_capacity(tables.len());
    for (name, header, rows) in tables {
        let path = write_table(dir, &format!("{name}.csv"), header, rows)?;
        paths.push((name.to_string(), path));
    }
    Ok(paths)
}

/// Runs the pipeline in the default execution mode and writes the figure
/// files into `outdir`.
pub fn run_pipeline(config: &SimConfig, outdir: &Path) -> Result<SimReport> {
    let output = run_core(config, default_mode())?;
    let figure_paths = write_figures(&output, outdir)?;
    Ok(SimReport {
        config: output.config,
        mode: output.mode.label().to_string(),
        trials: config.trials,
        wallclock_ms: output.wallclock_ms,
        mean_err: output.stats.mean_err,
        err_std_err: output.stats.err_std_err,
        trace_ee: output.stats.trace_ee,
        regressor_variance: output.stats.regressor_variance,
        keyrate: output.keyrate,
        figure_paths,
    })
}

/// Reruns the pipeline for every recombination width in `[m_min, m_max]`,
/// broadcasting the (required) uniform transmittance profile to each width.
pub fn sweep_m(
    config: &SimConfig,
    m_min: usize,
    m_max: usize,
    mode: ExecMode,
) -> Result<Vec<SweepRow>> {
    if m_min == 0 || m_max < m_min {
        return Err(Error::Parameter(format!(
            "sweep range [{m_min}, {m_max}] is empty or starts at zero"
        )));
    }
    let first = config.transmittances.first().copied().ok_or_else(|| {
        Error::Parameter("sweep needs at least one transmittance".into())
    })?;
    if config.transmittances.iter().any(|&t| t != first) {
        return Err(Error::Parameter(
            "sweep requires a uniform transmittance profile".into(),
        ));
    }
    let mut rows = Vec::with_capacity(m_max - m_min + 1);
    for m in m_min..=m_max {
        let mut cfg = config.clone();
        cfg.m = m;
        cfg.transmittances = vec![first; m];
        let out = run_core(&cfg, mode)?;
        let report = out.keyrate.ok_or_else(|| {
            Error::Numerical(format!(
                "sweep point m = {m} produced a degenerate residual ({})",
                out.stats.mean_err
            ))
        })?;
        rows.push(SweepRow {
            m,
            mean_err: out.stats.mean_err,
            err_var: out.stats.err_trial_var,
            trace_ee: out.stats.trace_ee,
            report,
        });
    }
    Ok(rows)
}

/// Writes the sweep table as `fig_s6.csv` inside `dir`.
pub fn emit_sweep_csv(rows: &[SweepRow], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    write_table(
        dir,
        "fig_s6.csv",
        "m,mean_err,err_var,trace_ee,keyrate",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.m,
                fmt_float(r.mean_err),
                fmt_float(r.err_var),
                fmt_float(r.trace_ee),
                fmt_float(r.report.rate)
            )
        }),
    )
}

/// Writes a one-row key-rate table as `keyrate.csv` inside `dir`.
pub fn emit_keyrate_csv(report: &KeyRateReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    write_table(
        dir,
        "keyrate.csv",
        "m,d_ab,d_be,rate_raw,rate,entropy_bob",
        std::iter::once(format!(
            "{},{},{},{},{},{}",
            report.m,
            fmt_float(report.d_ab),
            fmt_float(report.d_be),
            fmt_float(report.rate_raw),
            fmt_float(report.rate),
            fmt_float(report.entropy_bob)
        )),
    )
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Parameter(
            "rank correlation needs two equally long series of length >= 2".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "rank correlation requires finite values".into(),
        ));
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - mean) * (y - mean);
        da += (x - mean) * (x - mean);
        db += (y - mean) * (y - mean);
    }
    if da == 0.0 || db == 0.0 {
        return Err(Error::Numerical(
            "rank correlation undefined for a constant series".into(),
        ));
    }
    Ok(num / (da * db).sqrt())
}

/// 1-based ranks with ties averaged.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).expect("finite values"));
    let mut out = vec![0.0; v.len()];
    let mut pos = 0;
    while pos < idx.len() {
        let mut end = pos + 1;
        while end < idx.len() && v[idx[end]] == v[idx[pos]] {
            end += 1;
        }
        let avg = (pos + 1 + end) as f64 / 2.0;
        for &i in &idx[pos..end] {
            out[i] = avg;
        }
        pos = end;
    }
    out
}
