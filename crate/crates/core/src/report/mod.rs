//! Byte-stable report and curve emission.
//!
//! Reports serialize to JSON with sorted keys and every float printed with
//! 17 significant digits, so equal inputs give byte-identical output on
//! any platform and thread count, and parsing the bytes back recovers the
//! exact same numbers. Curves emit as CSV in plot-ready columns: the
//! model curve on a dense grid with the observations overlaid where they
//! exist, plus the relative residual Q_data/Q_model - 1 for detrended
//! inspection.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::fit::{FitError, FitResult, GateResult, GrowthModel, LadderReport};
use crate::forecast::{self, Forecast, ForecastError};
use crate::kernel::{self, GrowthFamily, HinderingWeights, SolverSettings};
use crate::stats::{FTestResult, TimeSeries};

/// Schema tag written into every report.
pub const SCHEMA: &str = "hinderfit/1";

/// Errors from report construction, emission and parsing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("serialization failed: {message}")]
    Serialize { message: String },
    #[error("cannot parse report: {message}")]
    Parse { message: String },
    #[error("unsupported schema {found:?}, expected {expected:?}")]
    Schema { found: String, expected: &'static str },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// What went in: size, span and labels of the analyzed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub n: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_unit: String,
    pub q_unit: String,
    pub source: String,
}

/// One row of the candidate table, with the dimensionless range
/// x = g_u (t - t_h) the data covered under that candidate. The range is
/// the honest caveat on any selection: families are near-identical left
/// of x = -4, so a dataset confined there cannot distinguish them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub family: String,
    pub g_u: f64,
    pub q_h: f64,
    pub t_h: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub rss: f64,
    pub fvu: f64,
    pub fvu_log: f64,
    pub n_params: u32,
    pub converged: bool,
}

/// Quantities derived from the chosen model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Unhindered doubling time ln 2 / g_u.
    pub doubling_time: f64,
    /// Finite ceiling, for the families that have one.
    pub carrying_capacity: Option<f64>,
    /// Dimensional series coefficients alpha_k = a_k / Q_h^k, for the
    /// series families.
    pub alpha_coefficients: Option<Vec<(u32, f64)>>,
}

/// Full analysis record: input digest, gate, candidate table, F-chain,
/// chosen model, forecasts and derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub input: InputDigest,
    pub gate: GateResult,
    pub candidates: Vec<CandidateRow>,
    pub f_chain: Vec<FTestResult>,
    pub chosen: FitResult,
    pub forecasts: Vec<Forecast>,
    pub derived: DerivedQuantities,
}

fn chosen_weights(family: &GrowthFamily) -> Option<HinderingWeights> {
    match family {
        GrowthFamily::SingleTerm { k } => HinderingWeights::single(*k).ok(),
        GrowthFamily::MultiTerm { weights } => Some(weights.clone()),
        _ => None,
    }
}

/// Assembles the document for a completed ladder run.
pub fn build_report(
    dataset: &Dataset,
    ladder: &LadderReport,
    forecasts: &[Forecast],
) -> Result<ReportDocument, ReportError> {
    let (t_min, t_max) = dataset.series.span();
    let input = InputDigest {
        n: dataset.series.len(),
        t_min,
        t_max,
        t_unit: dataset.t_unit.clone(),
        q_unit: dataset.q_unit.clone(),
        source: dataset.source.clone(),
    };

    let candidates = ladder
        .candidates
        .iter()
        .map(|fit| CandidateRow {
            family: fit.model.family.label(),
            g_u: fit.model.g_u,
            q_h: fit.model.q_h,
            t_h: fit.model.t_h,
            x_lo: fit.model.x_at(t_min),
            x_hi: fit.model.x_at(t_max),
            rss: fit.rss,
            fvu: fit.fvu,
            fvu_log: fit.fvu_log,
            n_params: fit.n_params,
            converged: fit.converged,
        })
        .collect();

    let chosen = &ladder.chosen;
    let alpha = chosen_weights(&chosen.model.family)
        .map(|w| kernel::alpha_coefficients(&w, chosen.model.q_h))
        .transpose()
        .map_err(FitError::from)?;
    let derived = DerivedQuantities {
        doubling_time: forecast::doubling_time(chosen.model.g_u)?,
        carrying_capacity: forecast::carrying_capacity(&chosen.model),
        alpha_coefficients: alpha,
    };

    Ok(ReportDocument {
        schema: SCHEMA.to_string(),
        input,
        gate: ladder.gate.clone(),
        candidates,
        f_chain: ladder.f_chain.clone(),
        chosen: chosen.clone(),
        forecasts: forecasts.to_vec(),
        derived,
    })
}

/// Compact JSON formatter that prints every float with 17 significant
/// digits (`{:.16e}`), enough to reproduce the exact bit pattern on
/// re-parse.
struct SciFloatFormatter;

impl serde_json::ser::Formatter for SciFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes a report to its canonical bytes: sorted keys, compact
/// layout, 17-significant-digit floats, one trailing newline.
pub fn emit_report_json(doc: &ReportDocument) -> Result<Vec<u8>, ReportError> {
    // round trip through Value: its map is a BTreeMap, which sorts keys
    let value = serde_json::to_value(doc).map_err(|e| ReportError::Serialize {
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFloatFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| ReportError::Serialize { message: e.to_string() })?;
    out.push(b'\n');
    Ok(out)
}

/// Parses report bytes, checking the schema tag before the structure.
pub fn parse_report(bytes: &[u8]) -> Result<ReportDocument, ReportError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| ReportError::Parse { message: e.to_string() })?;
    let found = value
        .get("schema")
        .and_then(serde_json::Value::as_str)
        .unwrap_or_default()
        .to_string();
    if found != SCHEMA {
        return Err(ReportError::Schema { found, expected: SCHEMA });
    }
    serde_json::from_value(value).map_err(|e| ReportError::Parse { message: e.to_string() })
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Emits plot-ready curves as CSV.
///
/// Rows are the sorted union of the evaluation grid and the observation
/// times, so the model curve stays dense while every data point gets a
/// row. Columns: t, x_minus_xh, Q_model, g_model, Q_data, rel_residual;
/// the last two are empty on rows without an observation, and
/// rel_residual = Q_data/Q_model - 1 is the detrended residual.
pub fn emit_curves_csv(
    model: &GrowthModel,
    grid: &[f64],
    data: Option<&TimeSeries>,
    settings: &SolverSettings,
) -> Result<Vec<u8>, ReportError> {
    let mut times: Vec<f64> = grid.to_vec();
    if let Some(series) = data {
        times.extend_from_slice(series.times());
    }
    times.sort_by(f64::total_cmp);
    times.dedup();

    let curve = forecast::forecast_series(model, &times, settings)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["t", "x_minus_xh", "Q_model", "g_model", "Q_data", "rel_residual"])
        .map_err(|e| ReportError::Serialize { message: e.to_string() })?;

    let empty = (&[][..], &[][..]);
    let (obs_t, obs_q) = data.map_or(empty, |s| (s.times(), s.values()));
    let mut next_obs = 0usize;
    for f in &curve {
        let mut q_data = String::new();
        let mut residual = String::new();
        if next_obs < obs_t.len() && obs_t[next_obs] == f.t {
            q_data = fmt_float(obs_q[next_obs]);
            residual = fmt_float(obs_q[next_obs] / f.q - 1.0);
            next_obs += 1;
        }
        writer
            .write_record([
                fmt_float(f.t),
                fmt_float(f.x_minus_xh),
                fmt_float(f.q),
                fmt_float(f.g),
                q_data,
                residual,
            ])
            .map_err(|e| ReportError::Serialize { message: e.to_string() })?;
    }
    writer
        .into_inner()
        .map_err(|e| ReportError::Serialize { message: e.to_string() })
}
