//! Least-squares model of log citations on country author shares.
//!
//! Each article is one row: an intercept, then the article's share for every
//! focal country. [`OTHERS`](crate::corpus::OTHERS) is the omitted reference,
//! so `a + β_c` predicts `ln(1 + citations)` for an article authored entirely
//! by country `c`. Rank-deficient designs are solved in the minimum-norm
//! sense; only estimable combinations are reported as identified.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::corpus::{CountryCode, CountrySet, SubjectYearSlice};
use crate::stats::{self, CiMode, Interval, StatsError};

/// Row-space membership tolerance for identifiability, relative to `|v|`.
pub const IDENTIFIABILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("insufficient data: {rows} rows, need at least 2")]
    InsufficientData { rows: usize },
    #[error("country {0} is not a regression column")]
    UnknownCountry(String),
    #[error("country {0} is not identified by the design")]
    NotIdentified(String),
    #[error("overall geometric mean is {0}; indicator undefined")]
    DivisionDegenerate(f64),
    #[error("confidence interval unavailable: {0}")]
    CiUnavailable(String),
    #[error("design/response mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Which response the design regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    /// `ln(1 + citations)`, the indicator's model.
    Log1p,
    /// Raw citation counts.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    countries: Vec<CountryCode>,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl DesignMatrix {
    /// `rows` are share vectors over `countries` (no intercept entry).
    pub fn new(
        countries: Vec<CountryCode>,
        rows: &[Vec<f64>],
        response: Vec<f64>,
    ) -> Result<Self, RegressionError> {
        if rows.len() != response.len() {
            return Err(RegressionError::Shape(format!(
                "{} rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        let p = countries.len() + 1;
        let mut x = DMatrix::zeros(rows.len(), p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != countries.len() {
                return Err(RegressionError::Shape(format!(
                    "row {i} has {} entries for {} countries",
                    row.len(),
                    countries.len()
                )));
            }
            x[(i, 0)] = 1.0;
            for (j, &v) in row.iter().enumerate() {
                x[(i, j + 1)] = v;
            }
        }
        Ok(DesignMatrix {
            countries,
            x,
            y: DVector::from_vec(response),
        })
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    /// Full matrix including the leading intercept column.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }
}

pub fn build_design(slice: &SubjectYearSlice, countries: &CountrySet) -> DesignMatrix {
    build_design_with(slice, countries, Response::Log1p)
}

pub fn build_design_with(
    slice: &SubjectYearSlice,
    countries: &CountrySet,
    response: Response,
) -> DesignMatrix {
    let focal = countries.focal().to_vec();
    let rows: Vec<Vec<f64>> = slice
        .articles
        .iter()
        .map(|a| focal.iter().map(|c| a.share_of(c, countries)).collect())
        .collect();
    let y = slice
        .articles
        .iter()
        .map(|a| match response {
            Response::Log1p => stats::log1p_transform(a.citations()),
            Response::Raw => a.citations() as f64,
        })
        .collect();
    DesignMatrix::new(focal, &rows, y).expect("rows built from the focal set")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    countries: Vec<CountryCode>,
    /// `[a, β_1, …, β_k]`.
    coefficients: Vec<f64>,
    residuals: Vec<f64>,
    rank: usize,
    residual_df: i64,
    identified: Vec<bool>,
    /// `σ² (X'X)⁺`, absent when there are no residual degrees of freedom.
    covariance: Option<DMatrix<f64>>,
}

impl RegressionFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn residual_df(&self) -> i64 {
        self.residual_df
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank < self.coefficients.len()
    }

    pub fn residual_variance(&self) -> Option<f64> {
        (self.residual_df > 0)
            .then(|| self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residual_df as f64)
    }

    fn column(&self, country: &CountryCode) -> Result<usize, RegressionError> {
        self.countries
            .iter()
            .position(|c| c == country)
            .map(|i| i + 1)
            .ok_or_else(|| RegressionError::UnknownCountry(country.to_string()))
    }

    pub fn is_identified(&self, country: &CountryCode) -> Result<bool, RegressionError> {
        Ok(self.identified[self.column(country)? - 1])
    }

    pub fn slope(&self, country: &CountryCode) -> Result<f64, RegressionError> {
        Ok(self.coefficients[self.column(country)?])
    }

    /// `a + β_c`, the modelled log-citation of an article fully by `country`.
    pub fn pure_prediction(&self, country: &CountryCode) -> Result<f64, RegressionError> {
        let j = self.column(country)?;
        if !self.identified[j - 1] {
            return Err(RegressionError::NotIdentified(country.to_string()));
        }
        Ok(self.coefficients[0] + self.coefficients[j])
    }

    /// `SE(β_c)`; `None` without residual degrees of freedom.
    pub fn se_slope(&self, country: &CountryCode) -> Result<Option<f64>, RegressionError> {
        let j = self.column(country)?;
        Ok(self.covariance.as_ref().map(|cov| cov[(j, j)].max(0.0).sqrt()))
    }

    /// `SE(a + β_c)` from the full covariance of the combination.
    pub fn se_pure(&self, country: &CountryCode) -> Result<Option<f64>, RegressionError> {
        let j = self.column(country)?;
        Ok(self.covariance.as_ref().map(|cov| {
            (cov[(0, 0)] + cov[(j, j)] + 2.0 * cov[(0, j)]).max(0.0).sqrt()
        }))
    }

    pub fn predict(&self, design: &DesignMatrix) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (design.matrix() * beta).iter().copied().collect()
    }
}

/// Ordinary least squares via the singular value decomposition; returns the
/// minimum-norm solution when the design is rank deficient.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionFit, RegressionError> {
    let n = design.rows();
    if n < 2 {
        return Err(RegressionError::InsufficientData { rows: n });
    }
    let x = design.matrix();
    let y = design.response();
    let p = x.ncols();

    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s_max = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let tol = s_max * (n.max(p) as f64) * f64::EPSILON;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let rank = kept.len();

    let mut beta = DVector::zeros(p);
    let mut gram_pinv = DMatrix::zeros(p, p);
    for &i in &kept {
        let s = svd.singular_values[i];
        let vi = v_t.row(i).transpose();
        let coef = u.column(i).dot(y) / s;
        beta += &vi * coef;
        gram_pinv += (&vi * vi.transpose()) / (s * s);
    }

    let residuals: Vec<f64> = (y - x * &beta).iter().copied().collect();
    let residual_df = n as i64 - rank as i64;

    // (1, e_c) is estimable iff it lies in the row space spanned by the kept
    // right singular vectors.
    let identified = (1..p)
        .map(|j| {
            let mut v = DVector::zeros(p);
            v[0] = 1.0;
            v[j] = 1.0;
            let mut proj = DVector::zeros(p);
            for &i in &kept {
                let vi = v_t.row(i).transpose();
                proj += &vi * vi.dot(&v);
            }
            (v - proj).norm() <= IDENTIFIABILITY_TOLERANCE * 2f64.sqrt()
        })
        .collect();

    let covariance = (residual_df > 0).then(|| {
        let sigma2 = residuals.iter().map(|r| r * r).sum::<f64>() / residual_df as f64;
        gram_pinv * sigma2
    });

    Ok(RegressionFit {
        countries: design.countries().to_vec(),
        coefficients: beta.iter().copied().collect(),
        residuals,
        rank,
        residual_df,
        identified,
        covariance,
    })
}

/// `(exp(a + β_c) − 1) / μ_g`.
pub fn reg_indicator(
    fit: &RegressionFit,
    mu_g: f64,
    country: &CountryCode,
) -> Result<f64, RegressionError> {
    let pred = fit.pure_prediction(country)?;
    if !(mu_g > 0.0) {
        return Err(RegressionError::DivisionDegenerate(mu_g));
    }
    Ok(pred.exp_m1() / mu_g)
}

/// `(exp(a + β_c ± t·SE) − 1) / μ_g` with `t` from Student's t on the
/// residual degrees of freedom. `SE` is `SE(β_c)` in literal mode and
/// `SE(a + β_c)` in corrected mode.
pub fn reg_indicator_ci(
    fit: &RegressionFit,
    mu_g: f64,
    country: &CountryCode,
    level: f64,
    mode: CiMode,
) -> Result<Interval, RegressionError> {
    let pred = fit.pure_prediction(country)?;
    if !(mu_g > 0.0) {
        return Err(RegressionError::DivisionDegenerate(mu_g));
    }
    let se = match mode {
        CiMode::Literal => fit.se_slope(country)?,
        CiMode::Corrected => fit.se_pure(country)?,
    }
    .ok_or_else(|| {
        RegressionError::CiUnavailable(format!(
            "no residual degrees of freedom (df = {})",
            fit.residual_df
        ))
    })?;
    let t = stats::t_critical(level, fit.residual_df as f64)?;
    Ok(Interval::new(
        (pred - t * se).exp_m1() / mu_g,
        (pred + t * se).exp_m1() / mu_g,
    ))
}
