//! CSV rows and the metadata sidecar.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use priv_ebc::MechMask;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::ExperimentError;

/// What a row holds, written to the `trial` column: a trial number, `summary`, or
/// `skip`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Trial(u32),
    /// Aggregate over one `(mech_mask, epsilon)` group: mean relative error, median
    /// elapsed time, total skipped terms.
    Summary,
    /// Requested ego that could not be run.
    Skip,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKind::Trial(t) => write!(f, "{t}"),
            RowKind::Summary => f.write_str("summary"),
            RowKind::Skip => f.write_str("skip"),
        }
    }
}

impl FromStr for RowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summary" => Ok(RowKind::Summary),
            "skip" => Ok(RowKind::Skip),
            t => t
                .parse()
                .map(RowKind::Trial)
                .map_err(|_| format!("bad trial column {t:?}")),
        }
    }
}

mod display_fromstr {
    use super::*;

    pub fn serialize<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: fmt::Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// One CSV line. Columns follow field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    /// Ego label, `*` on summary rows.
    pub ego: String,
    pub ego_degree: Option<usize>,
    pub epsilon: f64,
    #[serde(with = "display_fromstr")]
    pub trial: RowKind,
    #[serde(with = "display_fromstr")]
    pub mech_mask: MechMask,
    pub true_ebc: Option<f64>,
    pub private_ebc: Option<f64>,
    /// Empty when the true value is zero.
    pub relative_error: Option<f64>,
    pub elapsed_ms: Option<f64>,
    pub skipped_terms: Option<usize>,
}

pub const COLUMNS: [&str; 11] = [
    "dataset",
    "ego",
    "ego_degree",
    "epsilon",
    "trial",
    "mech_mask",
    "true_ebc",
    "private_ebc",
    "relative_error",
    "elapsed_ms",
    "skipped_terms",
];

/// `|private - true| / true`, absent when `true` is not positive.
pub fn relative_error(true_ebc: f64, private_ebc: f64) -> Option<f64> {
    (true_ebc > 0.0).then(|| (private_ebc - true_ebc).abs() / true_ebc)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    // Header written by hand so an empty run still has one.
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(ExperimentError::Config(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(ExperimentError::from))
        .collect()
}

/// Everything about a run that does not fit the row schema.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunMetadata {
    pub mode: String,
    pub dataset: String,
    pub nodes: usize,
    pub edges: usize,
    pub x_nodes: usize,
    pub partition_seed: u64,
    pub x_fraction: f64,
    pub master_seed: u64,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub clamp: String,
    pub mech_masks: Vec<String>,
    pub precision_bits: u32,
    pub parallelism: String,
    /// True when any mask other than `all` ran; such rows are not private releases.
    pub non_private: bool,
    /// Egos with zero true EBC: their rows carry no relative error and stay out of
    /// every average.
    pub zero_ebc_egos: Vec<String>,
    /// Egos with at most one Y-side neighbour, answered without any exchange.
    pub degenerate_egos: Vec<String>,
    pub skipped_egos: Vec<String>,
    /// One-off stratum-law construction per `(mask, ε)` group, in row order.
    pub law_build_ms: Vec<f64>,
    /// Degree mode: largest gap between a degree bucket's median relative error and
    /// the overall median, as a percentage of the largest relative error seen.
    pub degree_spread_pct: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn write_metadata<W: Write>(out: W, meta: &RunMetadata) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(out, meta)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_convention() {
        assert_eq!(relative_error(0.0, 3.0), None);
        assert_eq!(relative_error(2.0, 3.0), Some(0.5));
        assert_eq!(relative_error(2.0, -2.0), Some(2.0));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn row_kind_round_trip() {
        for k in [
            RowKind::Trial(0),
            RowKind::Trial(17),
            RowKind::Summary,
            RowKind::Skip,
        ] {
            assert_eq!(k.to_string().parse::<RowKind>().unwrap(), k);
        }
        assert!("-1".parse::<RowKind>().is_err());
    }
}
