//! CSV artifacts. Floats are written with 17 significant digits in
//! scientific notation, so every value parses back to the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::CoverageReport;
use crate::error::{Error, Result};
use crate::hyper::{ComponentParams, FitResult, HyperParams, TraceEntry};
use crate::kernel::Layout;
use crate::linearization::{LinearizedModel, ObservationSet, SimulationBundle, SimulationRecord};
use crate::pipeline::{DensityRow, MseRow, ReplicationRow};
use crate::posterior::GaussianDist;
use crate::predictive::PredictiveTheta;

/// Formats a float for CSV output.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as a number")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as an index")))
}

/// Header plus string rows, the common form of every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?)
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    }

    fn prefixed(&self, prefix: &str) -> Vec<usize> {
        let mut idx: Vec<(usize, usize)> = self
            .header
            .iter()
            .enumerate()
            .filter_map(|(c, h)| h.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()).map(|k| (k, c)))
            .collect();
        idx.sort();
        idx.into_iter().map(|(_, c)| c).collect()
    }
}

fn lambda_header(q: usize) -> Vec<String> {
    (1..=q).map(|d| format!("lambda_{d}")).collect()
}

fn hdr(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

// design

pub fn design_table(points: &DMatrix<f64>) -> Table {
    let mut t = Table::new(lambda_header(points.ncols()));
    for r in points.row_iter() {
        t.push(r.iter().map(|v| fmt_f64(*v)).collect());
    }
    t
}

pub fn parse_design(t: &Table) -> Result<DMatrix<f64>> {
    let cols = t.prefixed("lambda_");
    if cols.is_empty() {
        return Err(Error::Parse("design has no lambda_ columns".into()));
    }
    let mut m = DMatrix::zeros(t.rows.len(), cols.len());
    for (i, r) in t.rows.iter().enumerate() {
        for (d, &c) in cols.iter().enumerate() {
            m[(i, d)] = parse_f64(&r[c], "design")?;
        }
    }
    Ok(m)
}

// simulation bundle

pub fn bundle_table(bundle: &SimulationBundle) -> Table {
    let p = bundle.theta_dim().unwrap_or(0);
    let mut h = hdr(&["lambda_index", "x_index"]);
    h.extend((1..=p).map(|u| format!("theta_{u}")));
    h.push("y".into());
    let mut t = Table::new(h);
    for r in &bundle.records {
        let mut row = vec![r.lambda_index.to_string(), r.x_index.to_string()];
        row.extend(r.theta.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(r.output));
        t.push(row);
    }
    t
}

pub fn parse_bundle(t: &Table) -> Result<SimulationBundle> {
    let (lj, xi, y) = (t.col("lambda_index")?, t.col("x_index")?, t.col("y")?);
    let th = t.prefixed("theta_");
    if th.is_empty() {
        return Err(Error::Parse("bundle has no theta_ columns".into()));
    }
    let records = t
        .rows
        .iter()
        .map(|r| {
            Ok(SimulationRecord {
                lambda_index: parse_usize(&r[lj], "lambda_index")?,
                x_index: parse_usize(&r[xi], "x_index")?,
                theta: th.iter().map(|&c| parse_f64(&r[c], "theta")).collect::<Result<_>>()?,
                output: parse_f64(&r[y], "y")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationBundle::new(records))
}

// linear coefficients

pub fn coefficients_table(lin: &LinearizedModel) -> Table {
    let p = lin.p();
    let mut h = hdr(&["lambda_index", "x_index", "g0"]);
    h.extend((1..=p).map(|u| format!("g1_{u}")));
    let mut t = Table::new(h);
    for (j, s) in lin.slopes.iter().enumerate() {
        for i in 0..lin.n() {
            let mut row = vec![j.to_string(), i.to_string(), fmt_f64(lin.intercepts[(j, i)])];
            row.extend((0..p).map(|u| fmt_f64(s[(i, u)])));
            t.push(row);
        }
    }
    t
}

/// Residual variances are not part of the schema and come back as zero.
pub fn parse_coefficients(t: &Table) -> Result<LinearizedModel> {
    let (lj, xi, g0) = (t.col("lambda_index")?, t.col("x_index")?, t.col("g0")?);
    let g1 = t.prefixed("g1_");
    if g1.is_empty() {
        return Err(Error::Parse("coefficients have no g1_ columns".into()));
    }
    let mut cells = Vec::with_capacity(t.rows.len());
    let (mut m, mut n) = (0, 0);
    for r in &t.rows {
        let j = parse_usize(&r[lj], "lambda_index")?;
        let i = parse_usize(&r[xi], "x_index")?;
        m = m.max(j + 1);
        n = n.max(i + 1);
        let slopes: Vec<f64> = g1.iter().map(|&c| parse_f64(&r[c], "g1")).collect::<Result<_>>()?;
        cells.push((j, i, parse_f64(&r[g0], "g0")?, slopes));
    }
    if cells.len() != m * n {
        return Err(Error::Parse(format!("expected {} coefficient rows for {m} λ × {n} x, found {}", m * n, cells.len())));
    }
    let p = g1.len();
    let mut intercepts = DMatrix::zeros(m, n);
    let mut slopes = vec![DMatrix::zeros(n, p); m];
    let mut seen = vec![false; m * n];
    for (j, i, a, s) in cells {
        if std::mem::replace(&mut seen[j * n + i], true) {
            return Err(Error::Parse(format!("duplicate coefficients for λ_{j}, x_{i}")));
        }
        intercepts[(j, i)] = a;
        for (u, v) in s.into_iter().enumerate() {
            slopes[j][(i, u)] = v;
        }
    }
    let zero_intercept = intercepts.iter().all(|v| *v == 0.0);
    Ok(LinearizedModel { intercepts, slopes, residual_variance: DMatrix::zeros(m, n), zero_intercept })
}

// observations

/// `var` is the total variance σ²_ε + δ².
pub fn observations_table(obs: &ObservationSet) -> Table {
    let mut t = Table::new(hdr(&["x_index", "x", "z", "var"]));
    let var = obs.total_variance();
    for i in 0..obs.len() {
        t.push(vec![i.to_string(), fmt_f64(obs.x[i]), fmt_f64(obs.z[i]), fmt_f64(var[i])]);
    }
    t
}

pub fn parse_observations(t: &Table) -> Result<ObservationSet> {
    let (xi, x, z, v) = (t.col("x_index")?, t.col("x")?, t.col("z")?, t.col("var")?);
    let mut rows: Vec<(usize, f64, f64, f64)> = t
        .rows
        .iter()
        .map(|r| Ok((parse_usize(&r[xi], "x_index")?, parse_f64(&r[x], "x")?, parse_f64(&r[z], "z")?, parse_f64(&r[v], "var")?)))
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(k, r)| r.0 != k) {
        return Err(Error::Parse("x_index must run over 0..n without gaps".into()));
    }
    ObservationSet::new(rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect(), rows.iter().map(|r| r.3).collect())
}

// posterior moments

pub fn mean_table(mean: &DVector<f64>) -> Table {
    let mut t = Table::new(hdr(&["index", "mean"]));
    for (i, v) in mean.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*v)]);
    }
    t
}

pub fn cov_table(cov: &DMatrix<f64>) -> Table {
    let mut t = Table::new(hdr(&["row", "col", "value"]));
    for r in 0..cov.nrows() {
        for c in 0..cov.ncols() {
            t.push(vec![r.to_string(), c.to_string(), fmt_f64(cov[(r, c)])]);
        }
    }
    t
}

/// Rebuilds a Gaussian from its mean and covariance tables; `p` restores the layout.
pub fn parse_gaussian(mean: &Table, cov: &Table, p: usize) -> Result<GaussianDist> {
    let (ic, mc) = (mean.col("index")?, mean.col("mean")?);
    let len = mean.rows.len();
    let mut mu = DVector::zeros(len);
    for r in &mean.rows {
        let i = parse_usize(&r[ic], "index")?;
        if i >= len {
            return Err(Error::Parse(format!("mean index {i} out of range")));
        }
        mu[i] = parse_f64(&r[mc], "mean")?;
    }
    let (rc, cc, vc) = (cov.col("row")?, cov.col("col")?, cov.col("value")?);
    if cov.rows.len() != len * len {
        return Err(Error::Parse("covariance table is not square with the mean".into()));
    }
    let mut c = DMatrix::zeros(len, len);
    for r in &cov.rows {
        let (i, j) = (parse_usize(&r[rc], "row")?, parse_usize(&r[cc], "col")?);
        if i >= len || j >= len {
            return Err(Error::Parse(format!("covariance entry ({i}, {j}) out of range")));
        }
        c[(i, j)] = parse_f64(&r[vc], "value")?;
    }
    if p == 0 || len % p != 0 {
        return Err(Error::Parse(format!("length {len} is not a multiple of p={p}")));
    }
    GaussianDist::new(mu, c, Layout::new(p, len / p))
}

// predictions and targets

/// One row per (point, component) with the 95% band.
pub fn predictions_table(pred: &PredictiveTheta) -> Table {
    let q = pred.lambdas.ncols();
    let mut h = lambda_header(q);
    h.extend(hdr(&["comp", "mean", "var", "ci_lo", "ci_hi"]));
    let mut t = Table::new(h);
    let p = pred.layout.components;
    for i in 0..pred.len() {
        for u in 0..p {
            let mut row: Vec<String> = pred.lambdas.row(i).iter().map(|v| fmt_f64(*v)).collect();
            let (lo, hi) = pred.interval(i, u);
            row.push((u + 1).to_string());
            row.push(fmt_f64(pred.mean[pred.layout.index(i, u)]));
            row.push(fmt_f64(pred.variance(i, u)));
            row.push(fmt_f64(lo));
            row.push(fmt_f64(hi));
            t.push(row);
        }
    }
    t
}

/// A parsed predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub lambda: Vec<f64>,
    pub component: usize,
    pub mean: f64,
    pub var: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub fn parse_predictions(t: &Table) -> Result<Vec<PredictionRow>> {
    let lc = t.prefixed("lambda_");
    let (cc, mc, vc, lo, hi) = (t.col("comp")?, t.col("mean")?, t.col("var")?, t.col("ci_lo")?, t.col("ci_hi")?);
    t.rows
        .iter()
        .map(|r| {
            Ok(PredictionRow {
                lambda: lc.iter().map(|&c| parse_f64(&r[c], "lambda")).collect::<Result<_>>()?,
                component: parse_usize(&r[cc], "comp")?,
                mean: parse_f64(&r[mc], "mean")?,
                var: parse_f64(&r[vc], "var")?,
                ci_lo: parse_f64(&r[lo], "ci_lo")?,
                ci_hi: parse_f64(&r[hi], "ci_hi")?,
            })
        })
        .collect()
}

pub fn truth_table(lambdas: &DMatrix<f64>, truth: &DVector<f64>, p: usize) -> Table {
    let mut h = lambda_header(lambdas.ncols());
    h.extend(hdr(&["comp", "theta"]));
    let mut t = Table::new(h);
    for i in 0..lambdas.nrows() {
        for u in 0..p {
            let mut row: Vec<String> = lambdas.row(i).iter().map(|v| fmt_f64(*v)).collect();
            row.push((u + 1).to_string());
            row.push(fmt_f64(truth[i * p + u]));
            t.push(row);
        }
    }
    t
}

// hyperparameters

pub fn hyperfit_table(params: &HyperParams, nll: f64) -> Table {
    let q = params.lambda_dim();
    let mut h = hdr(&["component", "beta", "sigma2"]);
    h.extend((1..=q).map(|d| format!("psi_{d}")));
    h.push("nll".into());
    let mut t = Table::new(h);
    for (u, c) in params.iter().enumerate() {
        let mut row = vec![(u + 1).to_string(), fmt_f64(c.beta), fmt_f64(c.variance)];
        row.extend(c.lengthscales.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(nll));
        t.push(row);
    }
    t
}

/// Returns φ̂ and the recorded ℓ(φ̂).
pub fn parse_hyperfit(t: &Table) -> Result<(HyperParams, f64)> {
    let (cc, bc, sc, nc) = (t.col("component")?, t.col("beta")?, t.col("sigma2")?, t.col("nll")?);
    let pc = t.prefixed("psi_");
    let mut rows: Vec<(usize, ComponentParams)> = t
        .rows
        .iter()
        .map(|r| {
            Ok((
                parse_usize(&r[cc], "component")?,
                ComponentParams {
                    beta: parse_f64(&r[bc], "beta")?,
                    variance: parse_f64(&r[sc], "sigma2")?,
                    lengthscales: pc.iter().map(|&c| parse_f64(&r[c], "psi")).collect::<Result<_>>()?,
                },
            ))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.0);
    let nll = t.rows.first().map(|r| parse_f64(&r[nc], "nll")).transpose()?.unwrap_or(f64::NAN);
    Ok((HyperParams::new(rows.into_iter().map(|r| r.1).collect())?, nll))
}

pub fn trace_table(fit: &FitResult, p: usize, q: usize) -> Table {
    let mut h = hdr(&["start", "eval"]);
    h.extend((1..=p).map(|u| format!("log_sigma2_{u}")));
    for u in 1..=p {
        h.extend((1..=q).map(|d| format!("log_psi_{u}_{d}")));
    }
    h.push("nll".into());
    let mut t = Table::new(h);
    for e in &fit.trace {
        let mut row = vec![e.start.to_string(), e.eval.to_string()];
        row.extend(e.x.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(e.nll));
        t.push(row);
    }
    t
}

pub fn parse_trace(t: &Table) -> Result<Vec<TraceEntry>> {
    let (sc, ec, nc) = (t.col("start")?, t.col("eval")?, t.col("nll")?);
    let xs: Vec<usize> = (0..t.header.len()).filter(|c| t.header[*c].starts_with("log_")).collect();
    t.rows
        .iter()
        .map(|r| {
            Ok(TraceEntry {
                start: parse_usize(&r[sc], "start")?,
                eval: parse_usize(&r[ec], "eval")?,
                x: xs.iter().map(|&c| parse_f64(&r[c], "trace")).collect::<Result<_>>()?,
                nll: parse_f64(&r[nc], "nll")?,
            })
        })
        .collect()
}

// scores

pub fn mse_table(rows: &[MseRow]) -> Table {
    let mut t = Table::new(hdr(&["estimator", "component", "mse"]));
    for r in rows {
        t.push(vec![r.estimator.clone(), r.component.to_string(), fmt_f64(r.mse)]);
    }
    t
}

pub fn parse_mse(t: &Table) -> Result<Vec<MseRow>> {
    let (ec, cc, mc) = (t.col("estimator")?, t.col("component")?, t.col("mse")?);
    t.rows
        .iter()
        .map(|r| Ok(MseRow { estimator: r[ec].clone(), component: parse_usize(&r[cc], "component")?, mse: parse_f64(&r[mc], "mse")? }))
        .collect()
}

pub fn coverage_table(report: &CoverageReport) -> Table {
    let mut t = Table::new(hdr(&["x_index", "x_value", "alpha", "N", "coverage"]));
    for ((i, x), c) in report.x_indices.iter().zip(&report.x_values).zip(&report.coverage) {
        t.push(vec![i.to_string(), fmt_f64(*x), fmt_f64(report.alpha), report.pairs.to_string(), fmt_f64(*c)]);
    }
    t
}

/// The seed is not part of the schema and must be supplied.
pub fn parse_coverage(t: &Table, seed: u64) -> Result<CoverageReport> {
    let (ic, xc, ac, nc, cc) = (t.col("x_index")?, t.col("x_value")?, t.col("alpha")?, t.col("N")?, t.col("coverage")?);
    let first = t.rows.first().ok_or_else(|| Error::Parse("coverage table is empty".into()))?;
    Ok(CoverageReport {
        x_indices: t.rows.iter().map(|r| parse_usize(&r[ic], "x_index")).collect::<Result<_>>()?,
        x_values: t.rows.iter().map(|r| parse_f64(&r[xc], "x_value")).collect::<Result<_>>()?,
        coverage: t.rows.iter().map(|r| parse_f64(&r[cc], "coverage")).collect::<Result<_>>()?,
        alpha: parse_f64(&first[ac], "alpha")?,
        pairs: parse_usize(&first[nc], "N")?,
        seed,
    })
}

pub fn replication_table(rows: &[ReplicationRow]) -> Table {
    let mut t = Table::new(hdr(&["example", "n", "m", "rep", "estimator", "component", "mse", "status"]));
    for r in rows {
        t.push(vec![
            r.example.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.rep.to_string(),
            r.estimator.clone(),
            r.component.to_string(),
            fmt_f64(r.mse),
            r.status.clone(),
        ]);
    }
    t
}

pub fn parse_replication(t: &Table) -> Result<Vec<ReplicationRow>> {
    let c: Vec<usize> = ["example", "n", "m", "rep", "estimator", "component", "mse", "status"]
        .iter()
        .map(|n| t.col(n))
        .collect::<Result<_>>()?;
    t.rows
        .iter()
        .map(|r| {
            Ok(ReplicationRow {
                example: parse_usize(&r[c[0]], "example")? as u32,
                n: parse_usize(&r[c[1]], "n")?,
                m: parse_usize(&r[c[2]], "m")?,
                rep: parse_usize(&r[c[3]], "rep")?,
                estimator: r[c[4]].clone(),
                component: parse_usize(&r[c[5]], "component")?,
                mse: parse_f64(&r[c[6]], "mse")?,
                status: r[c[7]].clone(),
            })
        })
        .collect()
}

pub fn densities_table(rows: &[DensityRow]) -> Table {
    let q = rows.first().map_or(1, |r| r.lambda.len());
    let mut h = lambda_header(q);
    h.extend(hdr(&["x_index", "x", "mean", "var"]));
    let mut t = Table::new(h);
    for r in rows {
        let mut row: Vec<String> = r.lambda.iter().map(|v| fmt_f64(*v)).collect();
        row.extend([r.x_index.to_string(), fmt_f64(r.x), fmt_f64(r.mean), fmt_f64(r.var)]);
        t.push(row);
    }
    t
}

pub fn parse_densities(t: &Table) -> Result<Vec<DensityRow>> {
    let lc = t.prefixed("lambda_");
    let (ic, xc, mc, vc) = (t.col("x_index")?, t.col("x")?, t.col("mean")?, t.col("var")?);
    t.rows
        .iter()
        .map(|r| {
            Ok(DensityRow {
                lambda: lc.iter().map(|&c| parse_f64(&r[c], "lambda")).collect::<Result<_>>()?,
                x_index: parse_usize(&r[ic], "x_index")?,
                x: parse_f64(&r[xc], "x")?,
                mean: parse_f64(&r[mc], "mean")?,
                var: parse_f64(&r[vc], "var")?,
            })
        })
        .collect()
}
