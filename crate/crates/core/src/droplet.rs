//! Droplets `D_B(w) = {x : φ_x(w) ∈ B}`, droplet clusters (unions over the
//! components of `w̄`) and their `θ`-measures, all by Monte Carlo against
//! the reference window so every placement family is handled alike.

use rand::Rng;
use serde::Serialize;

use crate::centres::ReferenceMeasure;
use crate::clusters::{ClusterKernel, ParentComponent};
use crate::error::{invalid, Result};
use crate::process::ClusterProcessModel;
use crate::rng::{replicate, split_key};
use crate::stats::{EstimateWithError, Summary};
use crate::{Point, Region};

/// Relative depth of the band next to the window boundary in which droplet
/// hits signal that the droplet may extend beyond the window.
const EDGE_BAND: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct DropletQuery {
    pub kernel: ClusterKernel,
    pub shape: Region,
    pub reference: ReferenceMeasure,
}

/// `φ_x(w) ∈ B`. Radial placement draws its angle from `rng`, so the result
/// is then a Bernoulli variable whose mean is the membership probability.
pub fn droplet_contains<R: Rng + ?Sized>(query: &DropletQuery, w: &ParentComponent, x: &Point, rng: &mut R) -> Result<bool> {
    Ok(query.shape.contains(&query.kernel.place(x, w, rng)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropletEstimate {
    pub estimate: EstimateWithError,
    /// Some hit fell next to the window boundary: the droplet may be cut.
    pub truncated: bool,
}

/// `θ(D̄_B(w̄))` by `n_mc` chart-uniform points of the reference window,
/// weighted by the chart density of `θ`.
pub fn droplet_cluster_measure<R: Rng + ?Sized>(
    query: &DropletQuery,
    w: &[ParentComponent],
    rng: &mut R,
    n_mc: usize,
) -> Result<DropletEstimate> {
    if n_mc < 1000 {
        return Err(invalid(format!("droplet measures need n_mc >= 1000, got {n_mc}")));
    }
    let est = union_measure(query, w, rng, n_mc)?;
    if est.truncated {
        log::warn!("droplet cluster reaches the boundary of the reference window; measure is truncated");
    }
    Ok(est)
}

fn union_measure<R: Rng + ?Sized>(query: &DropletQuery, w: &[ParentComponent], rng: &mut R, n: usize) -> Result<DropletEstimate> {
    let theta = &query.reference;
    let win = theta.window();
    let vol = win.volume();
    let geometry = theta.geometry();
    let mut vals = Vec::with_capacity(n);
    let mut truncated = false;
    for _ in 0..n {
        let x = win.sample_uniform(rng);
        let p = geometry.point_from_chart(&x)?;
        let mut hit = false;
        for wi in w {
            if query.shape.contains(&query.kernel.place(&p, wi, rng)?) {
                hit = true;
                break;
            }
        }
        if hit {
            truncated |= win.relative_depth(&x) < EDGE_BAND;
            vals.push(theta.chart_density(&x) * vol);
        } else {
            vals.push(0.0);
        }
    }
    Ok(DropletEstimate {
        estimate: EstimateWithError::from_samples(&vals),
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaBarRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub z: f64,
}

fn query_for(model: &ClusterProcessModel, b: &Region) -> Result<DropletQuery> {
    let reference = model
        .centres()
        .reference()
        .ok_or_else(|| invalid("droplet checks need a reference measure (poisson or gibbs centres)"))?
        .clone();
    Ok(DropletQuery {
        kernel: model.kernel().clone(),
        shape: b.clone(),
        reference,
    })
}

/// Both sides of `σ̄(𝔛_B) = ∫ θ(D̄_B(w̄)) Q(dw̄)` over the centre window.
///
/// Left: `x ~ θ/θ(W)`, `w̄ ~ Q`, average of `θ(W) 1{some φ_x(w_i) ∈ B}`.
/// Right: `w̄ ~ Q`, each with an independent inner estimate of the droplet
/// cluster measure from `n_inner` points; the SE is the spread of the inner
/// estimates across outer draws, which accounts for both levels.
pub fn sigma_bar_check<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    b: &Region,
    rng: &mut R,
    n_outer: usize,
    n_inner: usize,
) -> Result<SigmaBarRecord> {
    let q = query_for(model, b)?;
    let theta = &q.reference;
    let mass = theta.total_mass();
    let (kl, kr) = (split_key(rng), split_key(rng));
    let lhs: Vec<f64> = replicate(kl, n_outer, |_, r| -> Result<f64> {
        let x = theta.sample_normalised(r)?;
        let w = q.kernel.sample_parent(r);
        for wi in &w {
            if q.shape.contains(&q.kernel.place(&x, wi, r)?) {
                return Ok(mass);
            }
        }
        Ok(0.0)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let inner = replicate(kr, n_outer, |_, r| -> Result<DropletEstimate> {
        let w = q.kernel.sample_parent(r);
        union_measure(&q, &w, r, n_inner)
    });
    let mut rhs = Vec::with_capacity(n_outer);
    let mut truncated = false;
    for e in inner {
        let e = e?;
        truncated |= e.truncated;
        rhs.push(e.estimate.value);
    }
    if truncated {
        log::warn!("some droplet clusters reach the boundary of the centre window");
    }
    let (l, r) = (EstimateWithError::from_samples(&lhs), EstimateWithError::from_samples(&rhs));
    Ok(SigmaBarRecord {
        lhs: l.value,
        rhs: r.value,
        se_lhs: l.std_error,
        se_rhs: r.std_error,
        z: l.z_against(&r),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionProbe {
    /// Largest `θ(D_B(w))` over the sampled components: a lower bound for
    /// the supremum, not an estimate of it.
    pub sup_droplet_measure_lower_bound: f64,
    pub droplet_measures: Summary,
    pub mean_cluster_size: EstimateWithError,
}

/// Probes the finiteness conditions: droplet measures of single components
/// and the mean cluster size.
pub fn condition_probe<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    b: &Region,
    rng: &mut R,
    n_samples: usize,
    n_mc: usize,
) -> Result<ConditionProbe> {
    let q = query_for(model, b)?;
    let key = split_key(rng);
    let parent = model.kernel().parent();
    let res = replicate(key, n_samples, |_, r| -> Result<(f64, f64)> {
        let size = parent.size.sample(r) as f64;
        let w = parent.component.sample(r);
        let m = droplet_cluster_measure(&q, std::slice::from_ref(&w), r, n_mc)?;
        Ok((size, m.estimate.value))
    });
    let mut sizes = Vec::with_capacity(n_samples);
    let mut measures = Vec::with_capacity(n_samples);
    for v in res {
        let (s, m) = v?;
        sizes.push(s);
        measures.push(m);
    }
    let summary = Summary::of(&measures);
    Ok(ConditionProbe {
        sup_droplet_measure_lower_bound: summary.max,
        droplet_measures: summary,
        mean_cluster_size: EstimateWithError::from_samples(&sizes),
    })
}
