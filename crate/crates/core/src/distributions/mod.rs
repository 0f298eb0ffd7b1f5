//! Asset-loss law: i.i.d. losses `1 - exp(T/alpha)` with `T` drawn from a
//! standardized log-return law and `alpha` calibrated so that a bank holding a
//! single asset fails with probability `q`.
//!
//! A sole-asset bank holds `1/eta` buffers of that asset and fails iff the
//! loss reaches `eta`, i.e. iff `T ≤ alpha·ln(1 - eta)`. Setting that
//! probability to `q` gives `alpha = quantile(q) / ln(1 - eta)`.

mod tdist;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::LossVector;
use crate::registry::Registry;

pub use tdist::{inc_beta, t_cdf, t_quantile};

/// Largest double strictly below 1. A total loss of exactly 1 is not
/// representable by the law, so rounding up to it is clamped here.
const MAX_LOSS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Distribution of the standardized log-return shock `T`.
pub trait LossLaw: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn cdf(&self, t: f64) -> f64;
    fn quantile(&self, p: f64) -> Result<f64>;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

/// Student-t shocks drawn by the normal/gamma ratio `Z / sqrt(G/df)`.
pub struct StudentT {
    df: f64,
    chi2: Gamma<f64>,
}

impl StudentT {
    pub fn new(df: f64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::param("df", format!("{df} is not a positive real")));
        }
        // Shape df/2 < 1 is boosted internally: draw at shape + 1 and
        // multiply by U^(1/shape).
        let chi2 = Gamma::new(0.5 * df, 2.0).map_err(|e| Error::param("df", e.to_string()))?;
        Ok(StudentT { df, chi2 })
    }

    pub fn df(&self) -> f64 {
        self.df
    }
}

impl fmt::Debug for StudentT {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StudentT").field("df", &self.df).finish()
    }
}

impl LossLaw for StudentT {
    fn name(&self) -> &'static str {
        "student_t"
    }

    fn cdf(&self, t: f64) -> f64 {
        t_cdf(t, self.df)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        t_quantile(p, self.df)
    }

    fn sample(&self, mut rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        let g = self.chi2.sample(&mut rng);
        z / (g / self.df).sqrt()
    }
}

/// Standard normal shocks.
#[derive(Debug)]
pub struct StandardNormalLaw {
    normal: Normal,
}

impl Default for StandardNormalLaw {
    fn default() -> Self {
        StandardNormalLaw {
            normal: Normal::standard(),
        }
    }
}

impl LossLaw for StandardNormalLaw {
    fn name(&self) -> &'static str {
        "normal"
    }

    fn cdf(&self, t: f64) -> f64 {
        self.normal.cdf(t)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("p", format!("{p} not in (0, 1)")));
        }
        Ok(self.normal.inverse_cdf(p))
    }

    fn sample(&self, mut rng: &mut dyn RngCore) -> f64 {
        StandardNormal.sample(&mut rng)
    }
}

pub type LossLawFactory = fn(df: f64) -> Result<Arc<dyn LossLaw>>;

/// Built-in loss laws by name: `student_t` (uses `df`) and `normal`.
pub fn loss_laws() -> Registry<LossLawFactory> {
    let mut reg: Registry<LossLawFactory> = Registry::new("loss law");
    reg.register("student_t", |df| Ok(Arc::new(StudentT::new(df)?)));
    reg.register("normal", |_| Ok(Arc::new(StandardNormalLaw::default())));
    reg
}

/// One Student-t variate.
pub fn sample_t<R: Rng + ?Sized>(df: f64, rng: &mut R) -> Result<f64> {
    let law = StudentT::new(df)?;
    let mut rng = rng;
    Ok(law.sample(&mut rng))
}

fn check_calibration_domain(q: f64, eta: f64) -> Result<()> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::param("q", format!("{q} not in (0, 0.5)")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", format!("{eta} not in (0, 1)")));
    }
    Ok(())
}

/// `alpha = t_quantile(q, df) / ln(1 - eta)`; positive on the valid domain.
pub fn calibrate_alpha(q: f64, eta: f64, df: f64) -> Result<f64> {
    check_calibration_domain(q, eta)?;
    Ok(t_quantile(q, df)? / (1.0 - eta).ln())
}

/// A calibrated loss law.
#[derive(Debug, Clone)]
pub struct LossModel {
    law: Arc<dyn LossLaw>,
    alpha: f64,
    q: f64,
    eta: f64,
}

impl LossModel {
    pub fn calibrate(law: Arc<dyn LossLaw>, q: f64, eta: f64) -> Result<Self> {
        check_calibration_domain(q, eta)?;
        let alpha = law.quantile(q)? / (1.0 - eta).ln();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(
                "q",
                format!("calibrated scale {alpha} is not positive"),
            ));
        }
        Ok(LossModel { law, alpha, q, eta })
    }

    /// Student-t law with `df` degrees of freedom.
    pub fn student_t(q: f64, eta: f64, df: f64) -> Result<Self> {
        LossModel::calibrate(Arc::new(StudentT::new(df)?), q, eta)
    }

    pub fn law(&self) -> &dyn LossLaw {
        self.law.as_ref()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Maps a shock to a loss, clamped strictly below 1.
    #[inline]
    pub fn loss_from_shock(&self, t: f64) -> f64 {
        (1.0 - (t / self.alpha).exp()).min(MAX_LOSS)
    }

    pub fn sample_loss(&self, rng: &mut dyn RngCore) -> f64 {
        self.loss_from_shock(self.law.sample(rng))
    }

    pub(crate) fn fill(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        for v in out {
            *v = self.sample_loss(rng);
        }
    }
}

/// `m` i.i.d. asset losses.
pub fn sample_losses<R: RngCore>(m: usize, model: &LossModel, rng: &mut R) -> Result<LossVector> {
    if m == 0 {
        return Err(Error::param("m", "at least one asset is required"));
    }
    let mut v = vec![0.0; m];
    model.fill(rng, &mut v);
    Ok(LossVector::from_unchecked(v))
}
