//! Versioned JSON instance files.
//!
//! A file carries either a multiset (the five reduction kinds) or explicit
//! data `A`, `b` (generic kind), never both. Serialization is canonical:
//! fixed key order, pretty-printed, trailing newline, so gen -> parse ->
//! re-serialize is byte-identical.

use anyhow::{bail, Context, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use l12lab::model::{PartitionInstance, ProblemInstance, ProblemKind};
use l12lab::reduction::{build_instance, ReductionParams};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format_version: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiset: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Generic kind only; reduction kinds imply their own sign constraint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonneg: Option<bool>,
}

impl InstanceFile {
    pub fn for_reduction(s: &PartitionInstance, params: &ReductionParams) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            kind: params.kind().name().to_string(),
            multiset: Some(s.elements().to_vec()),
            tau: params.tau(),
            lambda: params.lambda(),
            a: None,
            b: None,
            nonneg: None,
        }
    }

    pub fn for_generic(a: Vec<Vec<f64>>, b: Vec<f64>, lambda: f64, nonneg: bool) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            kind: ProblemKind::Generic.name().to_string(),
            multiset: None,
            tau: None,
            lambda: Some(lambda),
            a: Some(a),
            b: Some(b),
            nonneg: Some(nonneg),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).context("instance file is not valid JSON")?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            bail!(
                "unsupported format_version `{}` (this build reads `{}`)",
                self.format_version,
                FORMAT_VERSION
            );
        }
        let kind = ProblemKind::parse(&self.kind)?;
        match kind {
            ProblemKind::Generic => {
                if self.multiset.is_some() {
                    bail!("generic instances carry A and b, not a multiset");
                }
                if self.tau.is_some() {
                    bail!("generic instances take lambda, not tau");
                }
                let a = match &self.a {
                    Some(a) => a,
                    None => bail!("generic instances need the matrix A"),
                };
                let b = match &self.b {
                    Some(b) => b,
                    None => bail!("generic instances need the vector b"),
                };
                if self.lambda.is_none() {
                    bail!("generic instances need lambda");
                }
                if a.is_empty() || a[0].is_empty() {
                    bail!("A must have at least one row and one column");
                }
                let cols = a[0].len();
                if a.iter().any(|row| row.len() != cols) {
                    bail!("rows of A have unequal lengths");
                }
                if b.len() != a.len() {
                    bail!("b has {} entries, A has {} rows", b.len(), a.len());
                }
            }
            _ => {
                if self.a.is_some() || self.b.is_some() || self.nonneg.is_some() {
                    bail!("kind `{}` carries a multiset, not explicit data", self.kind);
                }
                match &self.multiset {
                    Some(set) if !set.is_empty() => {}
                    _ => bail!("kind `{}` needs a non-empty multiset", self.kind),
                }
                // presence and sign of tau/lambda are checked by the builder
                ReductionParams::for_kind(kind, self.tau, self.lambda)?;
            }
        }
        Ok(())
    }

    /// The problem instance this file denotes, plus the reduction parameters
    /// when the file carries a multiset (generic files have none).
    pub fn build(&self) -> Result<(ProblemInstance, Option<ReductionParams>)> {
        self.validate()?;
        let kind = ProblemKind::parse(&self.kind)?;
        if kind == ProblemKind::Generic {
            let rows = self.a.as_ref().expect("validated");
            let b = self.b.as_ref().expect("validated");
            let ncols = rows[0].len();
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let a = Array2::from_shape_vec((rows.len(), ncols), flat).expect("validated shape");
            let inst = ProblemInstance::generic(
                a,
                Array1::from(b.clone()),
                self.lambda.expect("validated"),
                self.nonneg.unwrap_or(false),
            )?;
            return Ok((inst, None));
        }
        let params = ReductionParams::for_kind(kind, self.tau, self.lambda)?;
        let s = PartitionInstance::new(self.multiset.clone().expect("validated"))?;
        let inst = build_instance(&s, &params)?;
        Ok((inst, Some(params)))
    }

    /// Canonical serialization: fixed key order, two-space indent, newline
    /// at the end.
    pub fn canonical_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("instance files serialize");
        text.push('\n');
        text
    }

    /// Content hash of the canonical serialization, as lowercase hex.
    pub fn digest(&self) -> String {
        let bytes = Sha256::digest(self.canonical_json().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in bytes {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let s = PartitionInstance::new(vec![1, 2, 3]).unwrap();
        let params = ReductionParams::nup(1.0).unwrap();
        let file = InstanceFile::for_reduction(&s, &params);
        let text = file.canonical_json();
        let parsed = InstanceFile::parse(&text).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.canonical_json(), text);
    }

    #[test]
    fn decimal_values_survive_round_trips() {
        let file = InstanceFile::for_generic(
            vec![vec![0.1 + 0.2, 1.0], vec![-2.5e-17, 3.0]],
            vec![0.3333333333333333, 1e300],
            0.7000000000000001,
            true,
        );
        let parsed = InstanceFile::parse(&file.canonical_json()).unwrap();
        assert_eq!(parsed, file);
    }

    #[test]
    fn rejects_malformed_documents() {
        // multiset and explicit data at once
        let text = r#"{"format_version":"1","kind":"up","multiset":[1],"lambda":1.0,"A":[[1.0]],"b":[1.0]}"#;
        assert!(InstanceFile::parse(text).is_err());
        // wrong parameter for the kind
        let text = r#"{"format_version":"1","kind":"cp","multiset":[1,2],"lambda":1.0}"#;
        assert!(InstanceFile::parse(text).is_err());
        // unknown version
        let text = r#"{"format_version":"2","kind":"pqp","multiset":[1,2]}"#;
        assert!(InstanceFile::parse(text).is_err());
        // unknown field
        let text = r#"{"format_version":"1","kind":"pqp","multiset":[1,2],"extra":0}"#;
        assert!(InstanceFile::parse(text).is_err());
        // ragged matrix
        let text =
            r#"{"format_version":"1","kind":"generic","lambda":1.0,"A":[[1.0],[1.0,2.0]],"b":[0.0,0.0]}"#;
        assert!(InstanceFile::parse(text).is_err());
    }

    #[test]
    fn builds_instances_of_both_shapes() {
        let s = PartitionInstance::new(vec![1, 2, 3]).unwrap();
        let file = InstanceFile::for_reduction(&s, &ReductionParams::cp(1.0).unwrap());
        let (inst, params) = file.build().unwrap();
        assert_eq!(inst.dim(), 6);
        assert_eq!(params.unwrap().tau(), Some(1.0));

        let file = InstanceFile::for_generic(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            0.5,
            false,
        );
        let (inst, params) = file.build().unwrap();
        assert_eq!(inst.dim(), 2);
        assert!(params.is_none());
        assert!(!inst.nonneg());
    }
}
