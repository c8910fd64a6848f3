use serde::{Deserialize, Serialize};

/// Acceptance windows standing in for unquantified absolute constants.
///
/// None of these values is a sharp constant; they are deliberately generous
/// two-sided proxies and every check reads them from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windows {
    /// Number of standard errors allowed in statistical comparisons.
    pub sigma_k: f64,
    /// Weight means below this many standard errors count as degenerate.
    pub degenerate_sigma: f64,
    /// Relative slack for sampler-vs-quadrature comparisons.
    pub oracle_rel: f64,
    pub epsi_lo: f64,
    pub epsi_hi: f64,
    pub remark_lo: f64,
    pub remark_hi: f64,
    pub haar_threshold: f64,
    pub haar_fraction_min: f64,
    pub khintchine_lo: f64,
    pub khintchine_hi: f64,
    pub diag_lower: f64,
    pub sym_sum_max: f64,
    pub orlicz_lo: f64,
    pub orlicz_hi: f64,
    pub ratio_max: f64,
    pub term_max: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub steiner_const: f64,
    pub permavg_lo: f64,
    pub permavg_hi: f64,
}

impl Default for Windows {
    fn default() -> Self {
        Windows {
            sigma_k: 4.0,
            degenerate_sigma: 6.0,
            oracle_rel: 0.01,
            epsi_lo: 0.05,
            epsi_hi: 20.0,
            remark_lo: 0.8,
            remark_hi: 1.25,
            haar_threshold: 0.05,
            haar_fraction_min: 0.95,
            khintchine_lo: 0.5,
            khintchine_hi: 1.05,
            diag_lower: 0.02,
            sym_sum_max: 10.0,
            orlicz_lo: 0.1,
            orlicz_hi: 10.0,
            ratio_max: 30.0,
            term_max: 30.0,
            scale_lo: 0.05,
            scale_hi: 20.0,
            steiner_const: 10.0,
            permavg_lo: 0.2,
            permavg_hi: 5.0,
        }
    }
}
