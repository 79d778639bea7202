//! File formats: series and edge tables (CSV), fit archives and reports
//! (JSON), trajectories and traces (CSV). Writers are canonical: fixed field
//! order, fixed float formatting and LF line endings.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BetaPosterior, FitResult, GaussianMoment, LikelihoodKind, ModelConfig, NetworkSeries,
    Sigma0Posterior, TauPosterior, TraceRecord, VariationalState,
};

pub const ARCHIVE_VERSION: &str = "dynlsm-fit-v1";

/// Header metadata of a series file: `# n=..,T=..,kind=..,noise_sd=..,seed=..`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesHeader {
    pub n: usize,
    pub t_len: usize,
    pub kind: LikelihoodKind,
    pub noise_sd: Option<f64>,
    pub seed: Option<u64>,
}

fn header_line(h: &SeriesHeader) -> String {
    let mut s = format!("# n={},T={},kind={}", h.n, h.t_len, h.kind.as_str());
    if let Some(sd) = h.noise_sd {
        s += &format!(",noise_sd={sd}");
    }
    if let Some(seed) = h.seed {
        s += &format!(",seed={seed}");
    }
    s
}

fn parse_header(line: &str, path: &str) -> Result<SeriesHeader> {
    let err = |message: String| Error::Parse {
        path: path.to_string(),
        line: 1,
        message,
    };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| err("expected header comment `# n=..,T=..,kind=..`".into()))?;
    let (mut n, mut t_len, mut kind, mut noise_sd, mut seed) = (None, None, None, None, None);
    for field in body.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("header field `{field}` is not key=value")))?;
        let bad = |what: &str| err(format!("header field `{key}`: invalid {what} `{value}`"));
        match key.trim() {
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad("integer"))?),
            "T" => t_len = Some(value.parse::<usize>().map_err(|_| bad("integer"))?),
            "kind" => kind = Some(value.parse::<LikelihoodKind>().map_err(|_| bad("kind"))?),
            "noise_sd" => noise_sd = Some(value.parse::<f64>().map_err(|_| bad("number"))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("integer"))?),
            other => return Err(err(format!("unknown header field `{other}`"))),
        }
    }
    Ok(SeriesHeader {
        n: n.ok_or_else(|| err("header is missing field `n`".into()))?,
        t_len: t_len.ok_or_else(|| err("header is missing field `T`".into()))?,
        kind: kind.ok_or_else(|| err("header is missing field `kind`".into()))?,
        noise_sd,
        seed,
    })
}

/// One row of a `t,i,j,value` table, converted to 0-based indices with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRow {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

fn parse_index(
    field: &str,
    name: &str,
    bound: Option<usize>,
) -> std::result::Result<usize, String> {
    let v: usize = field
        .trim()
        .parse()
        .map_err(|_| format!("field `{name}`: `{field}` is not a positive integer"))?;
    if v == 0 || bound.is_some_and(|b| v > b) {
        return Err(match bound {
            Some(b) => format!("field `{name}`: {v} outside 1..={b}"),
            None => format!("field `{name}`: indices are 1-based, got 0"),
        });
    }
    Ok(v - 1)
}

/// Parse `t,i,j[,value]` rows after the optional header.
///
/// `bounds = Some((n, T))` range-checks indices; `need_value` requires the
/// fourth column. Duplicate unordered triples are rejected.
fn parse_edge_rows<R: BufRead>(
    lines: std::iter::Enumerate<std::io::Lines<R>>,
    path: &str,
    bounds: Option<(usize, usize)>,
    need_value: bool,
) -> Result<Vec<EdgeRow>> {
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut saw_columns = false;
    for (k, line) in lines {
        let line = line?;
        let line_no = k + 1;
        let err = |message: String| Error::Parse {
            path: path.to_string(),
            line: line_no,
            message,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_columns {
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols.len() < 3 || cols[..3] != ["t", "i", "j"] {
                return Err(err(format!(
                    "expected column header `t,i,j,...`, got `{trimmed}`"
                )));
            }
            if need_value && cols.len() < 4 {
                return Err(err("column header lacks a value column".into()));
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let want = if need_value { 4 } else { 3 };
        if fields.len() < want {
            return Err(err(format!("expected {want} fields, got {}", fields.len())));
        }
        let (n_bound, t_bound) = match bounds {
            Some((n, t)) => (Some(n), Some(t)),
            None => (None, None),
        };
        let t = parse_index(fields[0], "t", t_bound).map_err(err)?;
        let a = parse_index(fields[1], "i", n_bound).map_err(err)?;
        let b = parse_index(fields[2], "j", n_bound).map_err(err)?;
        if a == b {
            return Err(err(format!("self-edge i = j = {}", a + 1)));
        }
        let (i, j) = (a.min(b), a.max(b));
        let value = if fields.len() > 3 {
            let raw = fields[3].trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| err(format!("field `value`: `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("field `value`: non-finite `{raw}`")));
            }
            v
        } else {
            f64::NAN
        };
        if !seen.insert((t, i, j)) {
            return Err(err(format!(
                "duplicate row for t={},i={},j={}",
                t + 1,
                i + 1,
                j + 1
            )));
        }
        rows.push(EdgeRow { t, i, j, value });
    }
    if !saw_columns {
        return Err(Error::Schema(format!("{path}: no `t,i,j` column header")));
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Parse a series from any reader; `name` labels diagnostics.
///
/// Absent unordered pairs are missing unless `dense_zeros` is set, in which
/// case they are observed zeros (bernoulli only).
pub fn parse_series<R: Read>(
    reader: R,
    name: &str,
    dense_zeros: bool,
) -> Result<(NetworkSeries, SeriesHeader)> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let first = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::Schema(format!("{name}: empty series file"))),
    };
    let header = parse_header(first.trim(), name)?;
    if dense_zeros && header.kind != LikelihoodKind::Bernoulli {
        return Err(Error::Schema(format!(
            "{name}: dense zeros apply to bernoulli series only"
        )));
    }
    let rows = parse_edge_rows(lines, name, Some((header.n, header.t_len)), true)?;
    let (n, t_len) = (header.n, header.t_len);
    let len = t_len * n * n;
    let mut values = vec![0.0; len];
    let mut mask = vec![dense_zeros; len];
    for r in rows {
        for (a, b) in [(r.i, r.j), (r.j, r.i)] {
            let k = r.t * n * n + a * n + b;
            values[k] = r.value;
            mask[k] = true;
        }
    }
    let series = NetworkSeries::new(header.kind, n, t_len, values, Some(mask), header.noise_sd)?;
    Ok((series, header))
}

pub fn read_series(path: &Path, dense_zeros: bool) -> Result<(NetworkSeries, SeriesHeader)> {
    parse_series(open(path)?, &path.display().to_string(), dense_zeros)
}

pub fn write_series_to<W: Write>(
    w: &mut W,
    series: &NetworkSeries,
    seed: Option<u64>,
) -> Result<()> {
    let header = SeriesHeader {
        n: series.n(),
        t_len: series.t_len(),
        kind: series.kind(),
        noise_sd: series.noise_sd(),
        seed,
    };
    writeln!(w, "{}", header_line(&header))?;
    writeln!(w, "t,i,j,value")?;
    for (t, i, j) in series.observed_pairs() {
        writeln!(w, "{},{},{},{}", t + 1, i + 1, j + 1, series.value(t, i, j))?;
    }
    Ok(())
}

pub fn write_series(path: &Path, series: &NetworkSeries, seed: Option<u64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_series_to(&mut w, series, seed)?;
    w.flush()?;
    Ok(())
}

/// Read a `t,i,j[,value]` table (scores, labels, hold-out lists, pair lists).
pub fn read_edge_table(path: &Path, need_value: bool) -> Result<Vec<EdgeRow>> {
    let name = path.display().to_string();
    let rows = parse_edge_rows(open(path)?.lines().enumerate(), &name, None, need_value)?;
    if rows.is_empty() {
        return Err(Error::Schema(format!("{name}: no data rows")));
    }
    Ok(rows)
}

fn write_provenance<W: Write>(w: &mut W, provenance: Option<&str>) -> Result<()> {
    if let Some(p) = provenance {
        writeln!(w, "# {p}")?;
    }
    Ok(())
}

/// Write a `t,i,j,<column>` table with 1-based indices, optionally preceded
/// by a `# ...` provenance line.
pub fn write_edge_table(
    path: &Path,
    column: &str,
    rows: &[EdgeRow],
    provenance: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_provenance(&mut w, provenance)?;
    writeln!(w, "t,i,j,{column}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t + 1, r.i + 1, r.j + 1, r.value)?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory table `t,i,x1..xd`, one row per node and time.
pub fn write_trajectory(
    path: &Path,
    traj: &[DMatrix<f64>],
    provenance: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_provenance(&mut w, provenance)?;
    let d = traj.first().map_or(0, |x| x.ncols());
    let cols: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    writeln!(w, "t,i,{}", cols.join(","))?;
    for (t, x) in traj.iter().enumerate() {
        for i in 0..x.nrows() {
            let coords: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", t + 1, i + 1, coords.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> Result<Vec<DMatrix<f64>>> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let d = rdr.headers()?.len().saturating_sub(2);
    if d == 0 {
        return Err(Error::Schema(format!(
            "{name}: trajectory needs columns t,i,x1.."
        )));
    }
    let mut entries: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| Error::Parse {
            path: name.clone(),
            line,
            message,
        };
        let idx = |k: usize, what: &str| parse_index(&rec[k], what, None).map_err(err);
        let (t, i) = (idx(0, "t")?, idx(1, "i")?);
        let coords = (2..2 + d)
            .map(|k| {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| err(format!("coordinate column {} unreadable", k - 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        entries.push((t, i, coords));
    }
    let t_len = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let n = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != t_len * n {
        return Err(Error::Schema(format!(
            "{name}: expected {} rows for n={n}, T={t_len}, got {}",
            t_len * n,
            entries.len()
        )));
    }
    let mut traj = vec![DMatrix::from_element(n, d, f64::NAN); t_len];
    for (t, i, c) in entries {
        for (k, v) in c.into_iter().enumerate() {
            traj[t][(i, k)] = v;
        }
    }
    if traj.iter().any(|x| x.iter().any(|v| v.is_nan())) {
        return Err(Error::Schema(format!("{name}: duplicate or missing rows")));
    }
    Ok(traj)
}

pub fn write_trace(path: &Path, trace: &[TraceRecord], provenance: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_provenance(&mut w, provenance)?;
    writeln!(w, "sweep,statistic,elbo,wall_time_s")?;
    for r in trace {
        let elbo = r.elbo.map_or(String::new(), |e| e.to_string());
        writeln!(w, "{},{},{},{}", r.sweep, r.statistic, elbo, r.wall_time_s)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON formatter writing every float with 17 significant digits.
struct CanonicalFloats;

impl serde_json::ser::Formatter for CanonicalFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Canonical JSON bytes: compact, fields in declaration order, floats in
/// `{:.16e}`, trailing newline. Non-finite floats become `null`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFloats);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMoments {
    /// `n x T x d`, node-major then time then coordinate.
    pub means: Vec<f64>,
    /// `n x T x d x d`, each covariance row-major.
    pub covariances: Vec<f64>,
    /// `n x (T-1) x d x d` lag-one cross-covariances, row-major.
    pub cross_covariances: Vec<f64>,
}

/// Serialized fit: configuration, data dimensions, all variational moments
/// and the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArchive {
    pub version: String,
    pub config: ModelConfig,
    pub kind: LikelihoodKind,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub d: usize,
    pub noise_sd: Option<f64>,
    pub beta: BetaPosterior,
    pub moments: ArchiveMoments,
    pub tau: Vec<TauPosterior>,
    pub sigma0: Vec<Sigma0Posterior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: usize,
}

fn row_major(m: &DMatrix<f64>, out: &mut Vec<f64>) {
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter());
    }
}

impl FitArchive {
    pub fn from_fit(
        fit: &FitResult,
        cfg: &ModelConfig,
        data: &NetworkSeries,
        include_xi: bool,
    ) -> Self {
        let st = &fit.state;
        let mut moments = ArchiveMoments {
            means: Vec::with_capacity(st.n * st.t_len * st.d),
            covariances: Vec::with_capacity(st.n * st.t_len * st.d * st.d),
            cross_covariances: Vec::new(),
        };
        for m in &st.marginals {
            moments.means.extend(m.mean.iter());
            row_major(&m.cov, &mut moments.covariances);
        }
        for c in &st.cross {
            row_major(c, &mut moments.cross_covariances);
        }
        FitArchive {
            version: ARCHIVE_VERSION.to_string(),
            config: cfg.clone(),
            kind: data.kind(),
            n: st.n,
            t_len: st.t_len,
            d: st.d,
            noise_sd: data.noise_sd(),
            beta: st.beta,
            moments,
            tau: st.tau.clone(),
            sigma0: st.sigma0.clone(),
            xi: if include_xi { st.xi.clone() } else { None },
            trace: fit.trace.clone(),
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }

    /// Reject NaN or infinite values anywhere in the archive.
    pub fn check_finite(&self) -> Result<()> {
        let m = &self.moments;
        let mut fields: Vec<(&str, Vec<f64>)> = vec![
            ("moments.means", m.means.clone()),
            ("moments.covariances", m.covariances.clone()),
            ("moments.cross_covariances", m.cross_covariances.clone()),
            ("beta", vec![self.beta.mean, self.beta.var]),
            ("noise_sd", self.noise_sd.into_iter().collect()),
            ("xi", self.xi.clone().unwrap_or_default()),
        ];
        fields.push((
            "tau",
            self.tau
                .iter()
                .flat_map(|t| match t {
                    TauPosterior::Fixed { variance } => vec![*variance],
                    TauPosterior::Gig(g) => vec![g.p, g.a, g.b, g.mean_inverse],
                })
                .collect(),
        ));
        fields.push((
            "sigma0",
            self.sigma0
                .iter()
                .flat_map(|s| match s {
                    Sigma0Posterior::Fixed { variance } => vec![*variance],
                    Sigma0Posterior::InverseGamma(g) => vec![g.shape, g.rate, g.mean_inverse],
                })
                .collect(),
        ));
        fields.push((
            "trace",
            self.trace
                .iter()
                .flat_map(|r| [r.statistic, r.wall_time_s, r.elbo.unwrap_or(0.0)])
                .collect(),
        ));
        for (name, values) in fields {
            if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Schema(format!(
                    "field `{name}`: non-finite value at {k}"
                )));
            }
        }
        Ok(())
    }

    /// Rebuild the variational state after checking every array length.
    pub fn state(&self) -> Result<VariationalState> {
        let (n, t_len, d) = (self.n, self.t_len, self.d);
        let m = &self.moments;
        let check = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Schema(format!(
                    "field `{what}`: expected {want} values, got {got}"
                )))
            }
        };
        check("moments.means", m.means.len(), n * t_len * d)?;
        check(
            "moments.covariances",
            m.covariances.len(),
            n * t_len * d * d,
        )?;
        check(
            "moments.cross_covariances",
            m.cross_covariances.len(),
            n * t_len.saturating_sub(1) * d * d,
        )?;
        if self.tau.len() != 1 && self.tau.len() != n {
            return Err(Error::Schema(format!(
                "field `tau`: expected 1 or {n} entries"
            )));
        }
        if self.sigma0.len() != 1 && self.sigma0.len() != n {
            return Err(Error::Schema(format!(
                "field `sigma0`: expected 1 or {n} entries"
            )));
        }
        if let Some(xi) = &self.xi {
            check("xi", xi.len(), t_len * n * n)?;
        }
        let marginals = (0..n * t_len)
            .map(|k| GaussianMoment {
                mean: DVector::from_column_slice(&m.means[k * d..(k + 1) * d]),
                cov: DMatrix::from_row_slice(d, d, &m.covariances[k * d * d..(k + 1) * d * d]),
            })
            .collect();
        let cross = m
            .cross_covariances
            .chunks(d * d)
            .map(|c| DMatrix::from_row_slice(d, d, c))
            .collect();
        Ok(VariationalState {
            n,
            t_len,
            d,
            marginals,
            cross,
            beta: self.beta,
            tau: self.tau.clone(),
            sigma0: self.sigma0.clone(),
            xi: self.xi.clone(),
        })
    }
}

pub fn parse_archive(bytes: &[u8], name: &str) -> Result<FitArchive> {
    let raw: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::Schema(format!("{name}: not a fit archive: {e}")))?;
    match raw.get("version").and_then(|v| v.as_str()) {
        Some(ARCHIVE_VERSION) => {}
        Some(other) => {
            return Err(Error::Schema(format!(
                "{name}: field `version`: expected {ARCHIVE_VERSION}, got {other}"
            )))
        }
        None => return Err(Error::Schema(format!("{name}: field `version` missing"))),
    }
    let archive: FitArchive =
        serde_json::from_value(raw).map_err(|e| Error::Schema(format!("{name}: {e}")))?;
    archive.state()?;
    Ok(archive)
}

pub fn save_archive(path: &Path, archive: &FitArchive) -> Result<()> {
    archive.check_finite()?;
    write_json(path, archive)
}

pub fn load_archive(path: &Path) -> Result<FitArchive> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    parse_archive(&bytes, &path.display().to_string())
}
