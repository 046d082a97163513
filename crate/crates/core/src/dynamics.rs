//! Overdamped Langevin dynamics of cluster points with drift `β_η`,
//! integrated by Euler–Maruyama on a periodic box.
//!
//! Centres are frozen. The integration-by-parts identity that drives the
//! equilibrium diffusion differentiates only in cluster directions, so only
//! cluster points move: each follows `dy = -(y - x)/σ² dt + √2 dW` towards
//! the minimum image of its own centre.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::calculus::CylinderFunction;
use crate::clusters::ClusterKernel;
use crate::error::{invalid, Error, Result};
use crate::process::{project, sample_marked, ClusterProcessModel, MarkedConfiguration};
use crate::rng::{replicate, split_key};
use crate::stats::{pair_functional, CheckRecord, EstimateWithError, TestFunction};
use crate::{Point, Window};

/// Ratio `Δt / σ²` above which a step is refused.
pub const STABILITY_RATIO: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Record every `stride` steps (and at time 0).
    pub stride: usize,
    pub periodic_box: Window,
}

impl DynamicsConfig {
    pub fn validate(&self, kernel: &ClusterKernel) -> Result<f64> {
        let sigma = kernel
            .gaussian_sigma()
            .ok_or_else(|| Error::Unsupported("dynamics need the translation-Gaussian kernel".into()))?;
        if !(self.dt >= 0.0) {
            return Err(invalid(format!("time step must be nonnegative, got {}", self.dt)));
        }
        let bound = STABILITY_RATIO * sigma * sigma;
        if self.dt > bound {
            return Err(Error::StabilityBound { dt: self.dt, bound });
        }
        if self.stride == 0 {
            return Err(invalid("stride must be at least 1"));
        }
        if self.periodic_box.dim() != kernel.geometry().chart_dim() {
            return Err(invalid("periodic box dimension does not match the kernel"));
        }
        Ok(sigma)
    }
}

fn wrap(v: f64, lo: f64, hi: f64) -> f64 {
    let l = hi - lo;
    let r = (v - lo).rem_euclid(l) + lo;
    if r >= hi {
        lo
    } else {
        r
    }
}

fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Maps every cluster point into the box.
pub fn wrap_into_box(state: &MarkedConfiguration, b: &Window) -> MarkedConfiguration {
    MarkedConfiguration {
        pairs: state
            .pairs
            .iter()
            .map(|(x, y)| {
                let y = y
                    .iter()
                    .map(|p| {
                        let c: Vec<f64> = p.coords().iter().enumerate().map(|(i, &v)| wrap(v, b.lo()[i], b.hi()[i])).collect();
                        Point::euclidean(&c)
                    })
                    .collect();
                (x.clone(), y)
            })
            .collect(),
        window: state.window.clone(),
    }
}

/// One Euler–Maruyama step `y ← y + β Δt + √(2Δt) ξ`, drift towards the
/// minimum image of the centre, result wrapped into the box.
pub fn langevin_step<R: Rng + ?Sized>(
    state: &MarkedConfiguration,
    kernel: &ClusterKernel,
    cfg: &DynamicsConfig,
    rng: &mut R,
) -> Result<MarkedConfiguration> {
    let sigma = cfg.validate(kernel)?;
    if cfg.dt == 0.0 {
        return Ok(state.clone());
    }
    let s2 = sigma * sigma;
    let noise = (2.0 * cfg.dt).sqrt();
    let b = &cfg.periodic_box;
    let mut out = state.clone();
    for (x, y) in out.pairs.iter_mut() {
        let xc = x.coords();
        for p in y.iter_mut() {
            let c: Vec<f64> = p
                .coords()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let (lo, hi) = (b.lo()[i], b.hi()[i]);
                    let d = min_image(v - xc[i], hi - lo);
                    let xi: f64 = rng.sample(StandardNormal);
                    wrap(v - d / s2 * cfg.dt + noise * xi, lo, hi)
                })
                .collect();
            *p = Point::euclidean(&c);
        }
    }
    Ok(out)
}

fn equilibrium_start<R: Rng + ?Sized>(model: &ClusterProcessModel, cfg: &DynamicsConfig, rng: &mut R) -> Result<MarkedConfiguration> {
    Ok(wrap_into_box(&sample_marked(model, rng)?, &cfg.periodic_box))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Mean over replicas of the per-replica least-squares slope.
    pub drift_slope: f64,
    pub slope_se: f64,
    pub z: f64,
    pub n_replicas: usize,
}

fn ols_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let den: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Starts each replica from `μ̂` (wrapped into the box), runs the dynamics
/// and records `⟨f, γ_t⟩` on the window. The drift z-score is that of the
/// replica-averaged least-squares slope against zero.
pub fn stationarity_test<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    cfg: &DynamicsConfig,
    f: &TestFunction,
    rng: &mut R,
    n_replicas: usize,
) -> Result<StationarityReport> {
    cfg.validate(model.kernel())?;
    if n_replicas < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: n_replicas });
    }
    let key = split_key(rng);
    let series: Vec<Vec<f64>> = replicate(key, n_replicas, |_, r| -> Result<Vec<f64>> {
        let mut state = equilibrium_start(model, cfg, r)?;
        let mut out = vec![pair_functional(f, &project(&state).points)];
        for step in 1..=cfg.n_steps {
            state = langevin_step(&state, model.kernel(), cfg, r)?;
            if step % cfg.stride == 0 {
                out.push(pair_functional(f, &project(&state).points));
            }
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let m = series[0].len();
    let times: Vec<f64> = (0..m).map(|k| (k * cfg.stride) as f64 * cfg.dt).collect();
    let mut mean = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    for k in 0..m {
        let col: Vec<f64> = series.iter().map(|s| s[k]).collect();
        let e = EstimateWithError::from_samples(&col);
        mean.push(e.value);
        se.push(e.std_error);
    }
    // regress on step index so the slope is not scaled by Δt
    let idx: Vec<f64> = (0..m).map(|k| k as f64).collect();
    let slopes: Vec<f64> = series.iter().map(|s| ols_slope(&idx, s)).collect();
    let e = EstimateWithError::from_samples(&slopes);
    Ok(StationarityReport {
        times,
        mean,
        se,
        drift_slope: e.value,
        slope_se: e.std_error,
        z: e.z_to(0.0),
        n_replicas,
    })
}

/// `E[F₁(γ₀) F₂(γ_t)] = E[F₂(γ₀) F₁(γ_t)]` at equilibrium after `lag` steps.
pub fn reversibility_test<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    cfg: &DynamicsConfig,
    f1: &CylinderFunction,
    f2: &CylinderFunction,
    lag: usize,
    rng: &mut R,
    n_replicas: usize,
) -> Result<CheckRecord> {
    cfg.validate(model.kernel())?;
    let key = split_key(rng);
    let pairs: Vec<(f64, f64)> = replicate(key, n_replicas, |_, r| -> Result<(f64, f64)> {
        let mut state = equilibrium_start(model, cfg, r)?;
        let g0 = project(&state).points;
        for _ in 0..lag {
            state = langevin_step(&state, model.kernel(), cfg, r)?;
        }
        let gt = project(&state).points;
        Ok((f1.eval(&g0) * f2.eval(&gt), f2.eval(&g0) * f1.eval(&gt)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(CheckRecord::paired("reversibility", &pairs))
}

/// Stationary variance of the Euler–Maruyama chain for the OU drift
/// `-(y - x)/σ²`: `σ² / (1 - a/2)` with `a = Δt/σ²`.
pub fn em_stationary_variance(sigma: f64, dt: f64) -> f64 {
    let a = dt / (sigma * sigma);
    sigma * sigma / (1.0 - 0.5 * a)
}

/// Exact OU transition over `Δt`: mean factor and conditional variance.
pub fn ou_exact_transition(sigma: f64, dt: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let k = (-dt / s2).exp();
    (k, s2 * (1.0 - k * k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuVarianceReport {
    pub variance: EstimateWithError,
    pub target: f64,
    pub em_variance: f64,
    /// `|σ²_EM / σ² - 1|`, which does not exceed `Δt/σ²`.
    pub em_relative_bias: f64,
    pub z: f64,
}

/// Single centre, single point in `ℝ^d`: runs `burn_in` steps from the
/// centre on each replica and estimates the per-coordinate variance of
/// `y - x` against `σ²`.
pub fn ou_variance_check<R: Rng + ?Sized>(
    sigma: f64,
    dt: f64,
    burn_in: usize,
    rng: &mut R,
    n_replicas: usize,
) -> Result<OuVarianceReport> {
    let kernel = ClusterKernel::gaussian(1, sigma, crate::clusters::SizeLaw::Fixed(1))?;
    let half = 100.0 * sigma;
    let cfg = DynamicsConfig {
        dt,
        n_steps: burn_in,
        stride: 1,
        periodic_box: Window::cube(-half, half, 1),
    };
    cfg.validate(&kernel)?;
    let key = split_key(rng);
    let x = Point::euclidean(&[0.0]);
    let finals: Vec<f64> = replicate(key, n_replicas, |_, r| -> Result<f64> {
        let mut state = MarkedConfiguration {
            pairs: vec![(x.clone(), vec![x.clone()])],
            window: cfg.periodic_box.clone(),
        };
        for _ in 0..burn_in {
            state = langevin_step(&state, &kernel, &cfg, r)?;
        }
        let y = state.pairs[0].1[0].coords()[0];
        Ok(y * y)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let variance = EstimateWithError::from_samples(&finals);
    let target = sigma * sigma;
    let em = em_stationary_variance(sigma, dt);
    Ok(OuVarianceReport {
        variance,
        target,
        em_variance: em,
        em_relative_bias: (em / target - 1.0).abs(),
        z: variance.z_to(target),
    })
}
