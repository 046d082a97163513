use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::config::{self, ExperimentConfig};
use super::{Cli, Command};
use crate::calculus::{ibp_test, ibp_test_general, marked_beta, qi_test, rn_density};
use crate::centres::{sample_centres, CentreProcess};
use crate::dynamics::{reversibility_test, stationarity_test, DynamicsConfig, STABILITY_RATIO};
use crate::droplet::sigma_bar_check;
use crate::error::{Error, Result};
use crate::io::{write_point_pattern, write_time_series};
use crate::process::{
    properness_report, sample_cluster_process, sample_marked, sample_via_varpi, ClusterProcessModel, Configuration,
};
use crate::rng::{replicate, seeded, split_key, StreamRng};
use crate::stats::{
    cluster_laplace_theoretical, correlation_identity_check, empirical_laplace, ks_two_sample, pair_functional,
    CheckRecord, CorrelationMeasure, EstimateWithError, SymmetricTensor, TestFunction, DEFAULT_LAPLACE_NODES,
};

const DEFAULT_REPLICAS: usize = 1000;
const DEFAULT_MAX_Z: f64 = 3.0;
const DEFAULT_SIGNIFICANCE: f64 = 0.001;

#[derive(Debug)]
pub enum Outcome {
    Passed,
    /// The JSON lines of the records that failed their threshold.
    Failed(Vec<String>),
}

struct Context {
    command: Command,
    cfg: ExperimentConfig,
    model: ClusterProcessModel,
    hash: String,
    seed: u64,
    replicas: usize,
    out: Option<PathBuf>,
    records: Vec<String>,
    failures: Vec<String>,
}

impl Context {
    fn emit<S: Serialize>(&mut self, body: &S, pass: Option<bool>) -> Result<()> {
        let mut v = match serde_json::to_value(body).map_err(|e| Error::Io(e.to_string()))? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        v.insert("command".into(), json!(self.command.name()));
        v.insert("config_hash".into(), json!(self.hash));
        v.insert("seed".into(), json!(self.seed));
        v.insert("replicas".into(), json!(self.replicas));
        if let Some(p) = pass {
            v.insert("pass".into(), json!(p));
        }
        let line = Value::Object(v).to_string();
        if pass == Some(false) {
            self.failures.push(line.clone());
        }
        self.records.push(line);
        Ok(())
    }

    fn check(&mut self, rec: &CheckRecord) -> Result<()> {
        let pass = rec.passes(self.max_z());
        self.emit(rec, Some(pass))
    }

    fn max_z(&self) -> f64 {
        self.cfg.test.max_z.unwrap_or(DEFAULT_MAX_Z)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("{} writes files: give --out or `output`", self.command.name())))
    }

    fn write_file(&self, name: &str, contents: &str) -> Result<()> {
        let dir = self.out_dir()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    fn f(&self) -> Result<TestFunction> {
        self.cfg.test.f.as_ref().map(config::test_function).transpose()?.ok_or_else(|| missing("f"))
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidParameter(format!("[test] `{key}` is required for this command"))
}

fn hash_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidParameter("--config is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let model = cfg.model(&base_dir)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let default_replicas = if cli.command == Command::Sample { 1 } else { DEFAULT_REPLICAS };
    let replicas = cli.replicas.or(cfg.replicas).unwrap_or(default_replicas);
    let out = cli.out.clone().or_else(|| cfg.output.as_ref().map(|o| base_dir.join(o)));
    let mut ctx = Context {
        command: cli.command,
        cfg,
        model,
        hash: hash_hex(&bytes),
        seed,
        replicas,
        out,
        records: Vec::new(),
        failures: Vec::new(),
    };
    let run = |ctx: &mut Context| dispatch(ctx, &mut seeded(seed));
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("--threads: {e}")))?;
            pool.install(|| run(&mut ctx))?
        }
        None => run(&mut ctx)?,
    }
    let mut jsonl = String::new();
    for r in &ctx.records {
        println!("{r}");
        jsonl.push_str(r);
        jsonl.push('\n');
    }
    if ctx.out.is_some() {
        ctx.write_file(&format!("{}.jsonl", ctx.command.name()), &jsonl)?;
    }
    Ok(if ctx.failures.is_empty() { Outcome::Passed } else { Outcome::Failed(ctx.failures) })
}

fn dispatch(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    match ctx.command {
        Command::Sample => sample(ctx, rng),
        Command::LaplaceCheck => laplace(ctx, rng),
        Command::VarpiCheck => varpi(ctx, rng),
        Command::DropletCheck => droplet(ctx, rng),
        Command::QiCheck => qi(ctx, rng),
        Command::IbpCheck => ibp(ctx, rng),
        Command::CorrCheck => corr(ctx, rng),
        Command::Dynamics => dynamics(ctx, rng),
        Command::Properness => properness(ctx, rng),
    }
}

fn sample(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    ctx.out_dir()?;
    let model = &ctx.model;
    let dim = model.geometry().chart_dim();
    let key = split_key(rng);
    let samples = replicate(key, ctx.replicas, |_, r| -> Result<(String, usize, usize)> {
        let m = sample_marked(model, r)?;
        let mut pts = Vec::new();
        let mut marks = Vec::new();
        for (i, (_, y)) in m.pairs.iter().enumerate() {
            for p in y.iter().filter(|p| m.window.contains(p.chart())) {
                pts.push(p.clone());
                marks.push(i as u64);
            }
        }
        Ok((write_point_pattern(&pts, Some(&marks), dim), pts.len(), m.pairs.len()))
    });
    for (i, s) in samples.into_iter().enumerate() {
        let (csv, n_points, n_clusters) = s?;
        let file = format!("sample_{i}.csv");
        ctx.write_file(&file, &csv)?;
        ctx.emit(&json!({"test": "sample", "replica": i, "n_points": n_points, "n_clusters": n_clusters, "file": file}), None)?;
    }
    Ok(())
}

fn cluster_samples(model: &ClusterProcessModel, rng: &mut StreamRng, n: usize, varpi: bool) -> Result<Vec<Configuration>> {
    let key = split_key(rng);
    replicate(key, n, |_, r| if varpi { sample_via_varpi(model, r) } else { sample_cluster_process(model, r) })
        .into_iter()
        .collect()
}

#[derive(Serialize)]
struct EstimatorRecord<'a> {
    estimator: &'a str,
    value: f64,
    std_error: f64,
    n: usize,
}

impl<'a> EstimatorRecord<'a> {
    fn new(estimator: &'a str, e: &EstimateWithError) -> Self {
        EstimatorRecord { estimator, value: e.value, std_error: e.std_error, n: e.n }
    }
}

fn laplace(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let f = ctx.f()?;
    let samples = cluster_samples(&ctx.model, rng, ctx.replicas, false)?;
    let emp = empirical_laplace(&samples, &f)?;
    ctx.emit(&EstimatorRecord::new("empirical", &emp), None)?;
    let nodes = ctx.cfg.test.n_nodes.unwrap_or(DEFAULT_LAPLACE_NODES);
    let inner = ctx.cfg.test.n_inner.unwrap_or(1000);
    match cluster_laplace_theoretical(&ctx.model, &f, rng, nodes, inner) {
        Ok(th) => {
            ctx.emit(&EstimatorRecord::new("theoretical", &th), None)?;
            ctx.check(&CheckRecord::independent("laplace", emp, th))
        }
        Err(Error::NoClosedForm(msg)) => {
            log::warn!("{msg}");
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn varpi(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let f = ctx.f()?;
    let a = cluster_samples(&ctx.model, rng, ctx.replicas, false)?;
    let b = cluster_samples(&ctx.model, rng, ctx.replicas, true)?;
    let va: Vec<f64> = a.iter().map(|c| pair_functional(&f, &c.points)).collect();
    let vb: Vec<f64> = b.iter().map(|c| pair_functional(&f, &c.points)).collect();
    let ks = ks_two_sample(&va, &vb)?;
    let sig = ctx.cfg.test.significance.unwrap_or(DEFAULT_SIGNIFICANCE);
    ctx.emit(&json!({"test": "ks", "statistic": ks.statistic, "p_value": ks.p_value, "n1": ks.n1, "n2": ks.n2, "significance": sig}), Some(ks.p_value >= sig))?;
    let rec = CheckRecord::independent("varpi-laplace", empirical_laplace(&a, &f)?, empirical_laplace(&b, &f)?);
    ctx.check(&rec)
}

fn region(ctx: &Context) -> Result<crate::Region> {
    ctx.cfg.test.region.as_ref().map(config::region).transpose()?.ok_or_else(|| missing("region"))
}

fn droplet(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let b = region(ctx)?;
    let n_outer = ctx.cfg.test.n_outer.unwrap_or(ctx.replicas);
    let n_inner = ctx.cfg.test.n_inner.unwrap_or(2000);
    let rec = sigma_bar_check(&ctx.model, &b, rng, n_outer, n_inner)?;
    let pass = rec.z.abs() <= ctx.max_z();
    ctx.emit(&rec, Some(pass))
}

fn cylinder(ctx: &Context, second: bool) -> Result<Option<crate::calculus::CylinderFunction>> {
    let c = if second { &ctx.cfg.test.cylinder2 } else { &ctx.cfg.test.cylinder };
    c.as_ref().map(config::cylinder).transpose()
}

fn qi(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let phi = ctx.cfg.test.diffeo.as_ref().map(config::diffeo).transpose()?.ok_or_else(|| missing("diffeo"))?;
    let f = cylinder(ctx, false)?.ok_or_else(|| missing("cylinder"))?;
    let model = &ctx.model;
    let key = split_key(rng);
    let rho: Vec<f64> = replicate(key, ctx.replicas, |_, r| rn_density(model.kernel(), &phi, &sample_marked(model, r)?))
        .into_iter()
        .collect::<Result<_>>()?;
    let rec = CheckRecord::independent("unit-mean-density", EstimateWithError::from_samples(&rho), EstimateWithError::exact(1.0));
    ctx.check(&rec)?;
    let rec = qi_test(&ctx.model, &phi, &f, rng, ctx.replicas)?;
    ctx.check(&rec)
}

fn ibp(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let v = ctx.cfg.test.field.as_ref().map(config::field).transpose()?.ok_or_else(|| missing("field"))?;
    let f = cylinder(ctx, false)?.ok_or_else(|| missing("cylinder"))?;
    let model = &ctx.model;
    let key = split_key(rng);
    let betas: Vec<f64> = replicate(key, ctx.replicas, |_, r| marked_beta(model.kernel(), &sample_marked(model, r)?, &v))
        .into_iter()
        .collect::<Result<_>>()?;
    let rec = CheckRecord::independent("mean-zero-beta", EstimateWithError::from_samples(&betas), EstimateWithError::exact(0.0));
    ctx.check(&rec)?;
    let rec = ibp_test(&ctx.model, &f, &v, rng, ctx.replicas)?;
    ctx.check(&rec)?;
    if let (Some(terms), Some(f2)) = (&ctx.cfg.test.field_terms, cylinder(ctx, true)?) {
        let field = config::field_terms(terms)?;
        let rec = ibp_test_general(&ctx.model, &f, &f2, &field, rng, ctx.replicas)?;
        ctx.check(&rec)?;
    }
    Ok(())
}

fn corr(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let f = ctx.f()?;
    let g = ctx.cfg.test.g.as_ref().map(config::test_function).transpose()?;
    let centres = ctx.model.centres().on_window(ctx.model.window())?;
    let window = ctx.model.window().clone();
    let key = split_key(rng);
    let samples: Vec<Configuration> = replicate(key, ctx.replicas, |_, r| -> Result<Configuration> {
        let mut points = sample_centres(&centres, r)?;
        points.retain(|p| window.contains(p.chart()));
        Ok(Configuration { points, window: window.clone() })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let inside: Vec<_>;
    let measure = match &centres {
        CentreProcess::Poisson(theta) => CorrelationMeasure::Poisson(theta),
        CentreProcess::Lattice(points) => {
            inside = points.iter().filter(|p| window.contains(p.chart())).cloned().collect();
            CorrelationMeasure::Atomic(&inside)
        }
        CentreProcess::Gibbs(_) => {
            return Err(Error::Unsupported("corr-check needs poisson or lattice centres".into()));
        }
    };
    let mut rec = correlation_identity_check(&samples, &SymmetricTensor(vec![f.clone()]), measure)?;
    rec.test = "correlation-n1".into();
    let mut recs = vec![rec];
    if let Some(g) = g {
        let mut rec = correlation_identity_check(&samples, &SymmetricTensor(vec![f, g]), measure)?;
        rec.test = "correlation-n2".into();
        recs.push(rec);
    }
    for r in &recs {
        ctx.check(r)?;
    }
    Ok(())
}

fn dynamics(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let f = ctx.f()?;
    let sigma = ctx
        .model
        .kernel()
        .gaussian_sigma()
        .ok_or_else(|| Error::Unsupported("dynamics need the translation-Gaussian kernel".into()))?;
    let t = &ctx.cfg.test;
    let cfg = DynamicsConfig {
        dt: t.dt.unwrap_or(STABILITY_RATIO * sigma * sigma),
        n_steps: t.n_steps.unwrap_or(1000),
        stride: t.stride.unwrap_or(10),
        periodic_box: ctx.model.window().clone(),
    };
    let rep = stationarity_test(&ctx.model, &cfg, &f, rng, ctx.replicas)?;
    if ctx.out.is_some() {
        ctx.write_file("dynamics.csv", &write_time_series(&rep.times, &rep.mean, &rep.se))?;
    }
    let pass = rep.z.abs() <= ctx.max_z();
    ctx.emit(
        &json!({"test": "stationarity", "drift_slope": rep.drift_slope, "slope_se": rep.slope_se, "z": rep.z, "n": rep.n_replicas}),
        Some(pass),
    )?;
    if let (Some(f1), Some(f2)) = (cylinder(ctx, false)?, cylinder(ctx, true)?) {
        let lag = ctx.cfg.test.lag.unwrap_or(cfg.n_steps);
        let rec = reversibility_test(&ctx.model, &cfg, &f1, &f2, lag, rng, ctx.replicas)?;
        ctx.check(&rec)?;
    }
    Ok(())
}

fn properness(ctx: &mut Context, rng: &mut StreamRng) -> Result<()> {
    let b = region(ctx)?;
    let rep = properness_report(&ctx.model, rng, ctx.replicas, &b)?;
    let mut v = serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?;
    v["test"] = json!("properness");
    ctx.emit(&v, None)
}
