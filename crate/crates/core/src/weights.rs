//! Relevance weights for the adaptive distances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|∏ λ - 1|` for every product constraint.
pub const PRODUCT_TOLERANCE: f64 = 1e-9;

/// How relevance weights are attached to the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// One weight per variable for the whole map.
    #[serde(rename = "P1")]
    GlobalVariable,
    /// One weight per variable component (mean, dispersion) for the whole map.
    #[serde(rename = "P2")]
    GlobalComponent,
    /// One weight per variable and neuron.
    #[serde(rename = "P3")]
    ClusterVariable,
    /// One weight per variable component and neuron.
    #[serde(rename = "P4")]
    ClusterComponent,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::GlobalVariable,
        Scheme::GlobalComponent,
        Scheme::ClusterVariable,
        Scheme::ClusterComponent,
    ];

    pub fn is_cluster_wise(self) -> bool {
        matches!(self, Scheme::ClusterVariable | Scheme::ClusterComponent)
    }

    pub fn is_component_wise(self) -> bool {
        matches!(self, Scheme::GlobalComponent | Scheme::ClusterComponent)
    }

    pub fn code(self) -> &'static str {
        match self {
            Scheme::GlobalVariable => "P1",
            Scheme::GlobalComponent => "P2",
            Scheme::ClusterVariable => "P3",
            Scheme::ClusterComponent => "P4",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(Scheme::GlobalVariable),
            "P2" => Ok(Scheme::GlobalComponent),
            "P3" => Ok(Scheme::ClusterVariable),
            "P4" => Ok(Scheme::ClusterComponent),
            other => Err(Error::InvalidConfig(format!(
                "unknown weight scheme `{other}`"
            ))),
        }
    }
}

/// Relevance weights `Λ` under one scheme.
///
/// Stored as `groups × width`, where `groups` is 1 for global schemes and
/// `M` for cluster-wise ones, and `width` is `P` (variable schemes) or `2P`
/// (component schemes, laid out as `[λ_{1,M}, λ_{1,V}, λ_{2,M}, …]`).
/// Each group carries one product-to-one constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    scheme: Scheme,
    neurons: usize,
    variables: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    /// All weights equal to one.
    pub fn unit(scheme: Scheme, neurons: usize, variables: usize) -> Self {
        let len = layout(scheme, neurons, variables).0 * layout(scheme, neurons, variables).1;
        Self {
            scheme,
            neurons,
            variables,
            values: vec![1.0; len],
        }
    }

    pub fn new(scheme: Scheme, neurons: usize, variables: usize, values: Vec<f64>) -> Result<Self> {
        let (groups, width) = layout(scheme, neurons, variables);
        if values.len() != groups * width {
            return Err(Error::DimensionMismatch {
                expected: groups * width,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::SchemeMismatch(
                "relevance weights must be positive and finite".into(),
            ));
        }
        let w = Self {
            scheme,
            neurons,
            variables,
            values,
        };
        let residual = w.max_product_residual();
        if residual > PRODUCT_TOLERANCE {
            return Err(Error::ConstraintViolation { residual });
        }
        Ok(w)
    }

    /// Internal constructor for freshly computed weights; the caller
    /// guarantees the layout.
    pub(crate) fn from_raw(
        scheme: Scheme,
        neurons: usize,
        variables: usize,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(
            values.len(),
            layout(scheme, neurons, variables).0 * layout(scheme, neurons, variables).1
        );
        Self {
            scheme,
            neurons,
            variables,
            values,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    /// Number of product constraints (1 or `M`).
    pub fn groups(&self) -> usize {
        layout(self.scheme, self.neurons, self.variables).0
    }

    /// Weights per group (`P` or `2P`).
    pub fn width(&self) -> usize {
        layout(self.scheme, self.neurons, self.variables).1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn group(&self, g: usize) -> &[f64] {
        let w = self.width();
        &self.values[g * w..(g + 1) * w]
    }

    /// `(λ_mean, λ_dispersion)` applied to variable `j` when comparing
    /// against neuron `m`. Variable schemes return the same weight twice.
    #[inline]
    pub fn component_weights(&self, m: usize, j: usize) -> (f64, f64) {
        let g = if self.scheme.is_cluster_wise() { m } else { 0 };
        let w = self.width();
        if self.scheme.is_component_wise() {
            let base = g * w + 2 * j;
            (self.values[base], self.values[base + 1])
        } else {
            let v = self.values[g * w + j];
            (v, v)
        }
    }

    /// Largest `|∏ λ - 1|` over all constraint groups.
    pub fn max_product_residual(&self) -> f64 {
        (0..self.groups())
            .map(|g| {
                let log_sum: f64 = self.group(g).iter().map(|v| v.ln()).sum();
                (log_sum.exp() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn satisfies_constraint(&self, tol: f64) -> bool {
        self.max_product_residual() <= tol
    }
}

fn layout(scheme: Scheme, neurons: usize, variables: usize) -> (usize, usize) {
    let groups = if scheme.is_cluster_wise() { neurons } else { 1 };
    let width = if scheme.is_component_wise() {
        2 * variables
    } else {
        variables
    };
    (groups, width)
}
