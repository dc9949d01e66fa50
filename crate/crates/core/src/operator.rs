//! The builtin operator family as a JSON tree.
//!
//! ```json
//! {"op": "product", "factors": [
//!     {"op": "multiplier", "multiplier": {"kind": "weight_power", "s": -2}},
//!     {"op": "multiplier", "multiplier": {"kind": "casimir_plus_one"}}
//! ]}
//! ```
//!
//! Products compose right to left: `factors[0]` acts last.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dual::{IrrepLabel, Label};
use crate::error::{Error, Result};
use crate::fourier::FourierCoefficients;
use crate::galerkin::{assemble_truncated, compose, index_codomain, GalerkinOperator, PeterWeylBasis};
use crate::group::GroupSpec;
use crate::linalg::{c, CMat};
use crate::symbol::{true_composition, MatrixSymbol};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    /// An invariant multiplier `g(xi) I`.
    Multiplier { multiplier: Multiplier },
    /// Pointwise multiplication by `c(x) = sum value * eta(x)_{row,col}`.
    Multiply { coefficients: Vec<CoefficientTerm> },
    /// Circle operator with symbol `e^{2 pi i k x}` on `l >= 0`, `1` on `l < 0`.
    Winding { k: i64 },
    Sum { terms: Vec<OperatorSpec> },
    Product { factors: Vec<OperatorSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Multiplier {
    /// `<xi>^s`.
    WeightPower { s: f64 },
    /// `exp(-t lambda_xi)`.
    Heat { t: f64 },
    /// `lambda_xi + 1`.
    CasimirPlusOne,
    /// Per-label values; labels not listed take `default`, or are outside the
    /// symbol's support when no default is given.
    Table {
        values: Vec<TableEntry>,
        #[serde(default)]
        default: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub label: Label,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientTerm {
    pub label: Label,
    #[serde(default)]
    pub row: usize,
    #[serde(default)]
    pub col: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("{path}: {msg}"))
}

fn finite(path: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("{name} must be finite")))
    }
}

impl OperatorSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Structural checks against `group`; errors name the offending node,
    /// e.g. `operator.factors[1]`.
    pub fn validate(&self, group: GroupSpec) -> Result<()> {
        self.validate_at(group, "operator")
    }

    fn validate_at(&self, group: GroupSpec, path: &str) -> Result<()> {
        match self {
            OperatorSpec::Identity => Ok(()),
            OperatorSpec::Multiplier { multiplier } => {
                let path = format!("{path}.multiplier");
                match multiplier {
                    Multiplier::WeightPower { s } => finite(&path, "s", *s),
                    Multiplier::Heat { t } => finite(&path, "t", *t),
                    Multiplier::CasimirPlusOne => Ok(()),
                    Multiplier::Table { values, default } => {
                        if let Some(d) = default {
                            finite(&path, "default", *d)?;
                        }
                        for (n, e) in values.iter().enumerate() {
                            let p = format!("{path}.values[{n}]");
                            IrrepLabel::new(group, e.label.clone()).map_err(|err| invalid(&p, err))?;
                            finite(&p, "value", e.value)?;
                        }
                        Ok(())
                    }
                }
            }
            OperatorSpec::Multiply { coefficients } => {
                if coefficients.is_empty() {
                    return Err(invalid(path, "multiply needs at least one coefficient"));
                }
                for (n, t) in coefficients.iter().enumerate() {
                    let p = format!("{path}.coefficients[{n}]");
                    let xi = IrrepLabel::new(group, t.label.clone()).map_err(|err| invalid(&p, err))?;
                    if group == GroupSpec::Su3 && !xi.is_trivial() {
                        return Err(invalid(&p, "SU(3) coefficients must use the trivial label"));
                    }
                    if t.row >= xi.dim || t.col >= xi.dim {
                        return Err(invalid(&p, format!("entry ({}, {}) outside a {}-dimensional label", t.row, t.col, xi.dim)));
                    }
                    finite(&p, "re", t.re)?;
                    finite(&p, "im", t.im)?;
                }
                Ok(())
            }
            OperatorSpec::Winding { .. } => {
                if group != GroupSpec::torus(1) {
                    return Err(invalid(path, format!("winding requires T^1, not {group}")));
                }
                Ok(())
            }
            OperatorSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(invalid(path, "sum needs at least one term"));
                }
                for (n, t) in terms.iter().enumerate() {
                    t.validate_at(group, &format!("{path}.terms[{n}]"))?;
                }
                Ok(())
            }
            OperatorSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(invalid(path, "product needs at least one factor"));
                }
                for (n, f) in factors.iter().enumerate() {
                    f.validate_at(group, &format!("{path}.factors[{n}]"))?;
                }
                Ok(())
            }
        }
    }

    /// Declared order. Smoothing and bounded multipliers count as order 0.
    pub fn order(&self) -> f64 {
        match self {
            OperatorSpec::Multiplier { multiplier: Multiplier::WeightPower { s } } => *s,
            OperatorSpec::Multiplier { multiplier: Multiplier::CasimirPlusOne } => 2.0,
            OperatorSpec::Sum { terms } => terms.iter().map(|t| t.order()).fold(f64::NEG_INFINITY, f64::max),
            OperatorSpec::Product { factors } => factors.iter().map(|f| f.order()).sum(),
            _ => 0.0,
        }
    }

    /// SHA-256 of the canonical JSON of `(group, self)`.
    pub fn fingerprint(&self, group: GroupSpec) -> String {
        let text = serde_json::to_string(&(group, self)).expect("serializable operator");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Compact JSON, used as a human-readable description.
    pub fn describe(&self) -> String {
        serde_json::to_string(self).expect("serializable operator")
    }

    pub fn symbol(&self, group: GroupSpec) -> Result<MatrixSymbol> {
        self.validate(group)?;
        self.symbol_unchecked(group)
    }

    fn symbol_unchecked(&self, group: GroupSpec) -> Result<MatrixSymbol> {
        let s = match self {
            OperatorSpec::Identity => MatrixSymbol::identity(group),
            OperatorSpec::Multiplier { multiplier } => match multiplier {
                Multiplier::WeightPower { s } => MatrixSymbol::lambda(group, *s),
                Multiplier::Heat { t } => {
                    let t = *t;
                    MatrixSymbol::scalar_multiplier(group, 0.0, move |xi| c((-t * xi.casimir).exp(), 0.0))
                        .with_description(format!("heat({t})"))
                }
                Multiplier::CasimirPlusOne => {
                    MatrixSymbol::scalar_multiplier(group, 2.0, |xi| c(xi.casimir + 1.0, 0.0)).with_description("casimir+1")
                }
                Multiplier::Table { values, default } => {
                    let map: BTreeMap<Label, f64> = values.iter().map(|e| (e.label.clone(), e.value)).collect();
                    match default {
                        Some(d) => {
                            let d = *d;
                            MatrixSymbol::scalar_multiplier(group, 0.0, move |xi| c(*map.get(&xi.label).unwrap_or(&d), 0.0))
                                .with_description("table")
                        }
                        None => {
                            let table = map
                                .into_iter()
                                .map(|(l, v)| IrrepLabel::new(group, l).map(|xi| (xi.clone(), CMat::identity(xi.dim, xi.dim) * c(v, 0.0))))
                                .collect::<Result<Vec<_>>>()?;
                            MatrixSymbol::invariant_table(group, 0.0, table)?
                        }
                    }
                }
            },
            OperatorSpec::Multiply { coefficients } => {
                let mut blocks: BTreeMap<Label, CMat> = BTreeMap::new();
                for t in coefficients {
                    let xi = IrrepLabel::new(group, t.label.clone())?;
                    let m = blocks.entry(t.label.clone()).or_insert_with(|| CMat::zeros(xi.dim, xi.dim));
                    // d Tr(eta(x) E_{col,row}) / d = eta(x)_{row,col}
                    m[(t.col, t.row)] += c(t.re, t.im) / xi.dim as f64;
                }
                let entries = blocks
                    .into_iter()
                    .map(|(l, m)| IrrepLabel::new(group, l).map(|xi| (xi, m)))
                    .collect::<Result<Vec<_>>>()?;
                MatrixSymbol::multiplication(FourierCoefficients::new(group, entries)?)
            }
            OperatorSpec::Winding { k } => MatrixSymbol::winding(*k),
            OperatorSpec::Sum { terms } => {
                let mut acc = terms[0].symbol_unchecked(group)?;
                for t in &terms[1..] {
                    acc = acc.add(&t.symbol_unchecked(group)?)?;
                }
                acc
            }
            OperatorSpec::Product { factors } => {
                let mut acc = factors[factors.len() - 1].symbol_unchecked(group)?;
                for f in factors[..factors.len() - 1].iter().rev() {
                    acc = true_composition(&f.symbol_unchecked(group)?, &acc)?;
                }
                acc
            }
        };
        Ok(s.with_order(self.order()).with_description(self.describe()))
    }

    /// Finite-rank realization on `domain`.
    ///
    /// Products chain the factors' Galerkin matrices through intermediate
    /// codomains; everything else assembles its symbol onto
    /// [`index_codomain`].
    pub fn galerkin(&self, group: GroupSpec, domain: &PeterWeylBasis, min_level: Option<usize>) -> Result<GalerkinOperator> {
        self.validate(group)?;
        self.galerkin_unchecked(group, domain, min_level)
    }

    fn galerkin_unchecked(&self, group: GroupSpec, domain: &PeterWeylBasis, min_level: Option<usize>) -> Result<GalerkinOperator> {
        let mut g = match self {
            OperatorSpec::Product { factors } => {
                let mut acc = factors[factors.len() - 1].galerkin_unchecked(group, domain, min_level)?;
                for f in factors[..factors.len() - 1].iter().rev() {
                    let next = f.galerkin_unchecked(group, &acc.codomain, min_level)?;
                    acc = compose(&next, &acc)?;
                }
                acc
            }
            _ => {
                let sigma = self.symbol_unchecked(group)?;
                let codomain = index_codomain(&sigma, domain)?;
                assemble_truncated(&sigma, domain, &codomain, min_level)?
            }
        };
        g.description = self.describe();
        Ok(g)
    }
}
