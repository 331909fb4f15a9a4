use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitFamily {
    /// σ² = 2 / (fan_in + fan_out)
    Glorot,
    /// σ² = 2 / fan_in
    He,
    /// σ² = 1 / fan_in
    #[serde(rename = "lecun")]
    LeCun,
    /// σ² = sigma²
    FixedSigma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDistribution {
    Normal,
    /// Symmetric interval with the same variance as the normal counterpart.
    Uniform,
}

/// Weight initializer. Biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub family: InitFamily,
    pub distribution: InitDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl InitSpec {
    pub fn fixed_sigma(sigma: f64) -> Self {
        Self {
            family: InitFamily::FixedSigma,
            distribution: InitDistribution::Normal,
            sigma: Some(sigma),
        }
    }

    pub fn new(family: InitFamily, distribution: InitDistribution) -> Self {
        Self {
            family,
            distribution,
            sigma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.family, self.sigma) {
            (InitFamily::FixedSigma, Some(s)) if s > 0.0 && s.is_finite() => Ok(()),
            (InitFamily::FixedSigma, _) => Err(Error::invalid(
                "fixed_sigma initializer needs a finite sigma > 0",
            )),
            (_, None) => Ok(()),
            (_, Some(_)) => Err(Error::invalid(
                "sigma is only meaningful for the fixed_sigma initializer",
            )),
        }
    }

    /// Short label used in result tables, e.g. `fixed_sigma(0.01)/normal`.
    pub fn label(&self) -> String {
        let dist = match self.distribution {
            InitDistribution::Normal => "normal",
            InitDistribution::Uniform => "uniform",
        };
        match self.family {
            InitFamily::Glorot => format!("glorot/{dist}"),
            InitFamily::He => format!("he/{dist}"),
            InitFamily::LeCun => format!("lecun/{dist}"),
            InitFamily::FixedSigma => format!("fixed_sigma({})/{dist}", self.sigma.unwrap_or(f64::NAN)),
        }
    }
}

/// Weight variance σ² prescribed by `spec` for a layer with the given fans.
pub fn init_variance(spec: &InitSpec, fan_in: usize, fan_out: usize) -> Result<f64> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid("fan_in and fan_out must be at least 1"));
    }
    spec.validate()?;
    let (fi, fo) = (fan_in as f64, fan_out as f64);
    Ok(match spec.family {
        InitFamily::Glorot => 2.0 / (fi + fo),
        InitFamily::He => 2.0 / fi,
        InitFamily::LeCun => 1.0 / fi,
        InitFamily::FixedSigma => {
            let s = spec.sigma.unwrap_or_default();
            s * s
        }
    })
}
