//! Quaternion weight initialization from the polar form of a weight.
//!
//! Each weight is `w = φ (cos θ + u sin θ)` with `θ ~ U(-π, π)`,
//! `φ ~ U(-σ, σ)` and `u` a purely imaginary unit quaternion whose
//! components are drawn from `U(0, 1)` before normalization. `σ` follows the
//! Glorot or He criterion counted in quaternion units.
//!
//! Two readings of the variance of `W` coexist. With Normal(0, σ²)
//! components, `|W|` is Chi-distributed with four degrees of freedom and
//! `E|W|² = 4σ²`. The uniform-φ construction used here instead gives
//! `E|W|² = E φ² = σ²/3`. [`audit_init`] measures both and reports them side
//! by side.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::qcore::{Algebra, Quaternion, Tensor};
use crate::rng::{rng_from_seed, uniform, QRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Glorot,
    He,
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glorot" | "xavier" => Ok(Criterion::Glorot),
            "he" | "kaiming" => Ok(Criterion::He),
            other => Err(Error::Config(format!("unknown init criterion `{other}`"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Glorot => "glorot",
            Criterion::He => "he",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub criterion: Criterion,
    pub n_in: usize,
    pub n_out: usize,
    pub seed: u64,
}

impl InitConfig {
    pub fn glorot(n_in: usize, n_out: usize, seed: u64) -> Self {
        Self {
            criterion: Criterion::Glorot,
            n_in,
            n_out,
            seed,
        }
    }

    pub fn sigma(&self) -> Result<f64> {
        sigma_for(self.criterion, self.n_in, self.n_out)
    }
}

/// Glorot: `1/√(2(n_in + n_out))`; He: `1/√(2 n_in)`.
pub fn sigma_for(criterion: Criterion, n_in: usize, n_out: usize) -> Result<f64> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::Config(format!(
            "fan values must be positive (n_in={n_in}, n_out={n_out})"
        )));
    }
    Ok(match criterion {
        Criterion::Glorot => 1.0 / (2.0 * (n_in + n_out) as f64).sqrt(),
        Criterion::He => 1.0 / (2.0 * n_in as f64).sqrt(),
    })
}

/// One draw of the polar construction, kept whole for auditing.
#[derive(Debug, Clone, Copy)]
pub struct PolarSample {
    pub theta: f64,
    pub phi: f64,
    pub axis: [f64; 3],
    pub weight: Quaternion,
}

pub fn sample_polar(rng: &mut QRng, sigma: f64) -> PolarSample {
    let theta = uniform(rng, -PI, PI);
    let phi = uniform(rng, -sigma, sigma);
    // The all-zero axis has probability zero but would divide by zero.
    let axis = loop {
        let (x, y, z) = (uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0));
        let n = (x * x + y * y + z * z).sqrt();
        if n > 0.0 {
            break [x / n, y / n, z / n];
        }
    };
    let (s, c) = theta.sin_cos();
    let weight = Quaternion::from_parts(
        phi * c,
        phi * axis[0] * s,
        phi * axis[1] * s,
        phi * axis[2] * s,
    );
    PolarSample {
        theta,
        phi,
        axis,
        weight,
    }
}

/// Quaternion weight matrix of shape `rows × cols`, row-major draw order.
pub fn quaternion_init(cfg: &InitConfig, rows: usize, cols: usize) -> Result<Tensor> {
    let sigma = cfg.sigma()?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut t = Tensor::zeros(Algebra::Quaternion, rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            t.set_quat(r, c, sample_polar(&mut rng, sigma).weight);
        }
    }
    Ok(t)
}

/// Real baseline weights: Glorot/He uniform with the usual real-valued limits.
pub fn real_init(cfg: &InitConfig, rows: usize, cols: usize) -> Result<Tensor> {
    if cfg.n_in == 0 || cfg.n_out == 0 {
        return Err(Error::Config("fan values must be positive".into()));
    }
    let limit = match cfg.criterion {
        Criterion::Glorot => (6.0 / (cfg.n_in + cfg.n_out) as f64).sqrt(),
        Criterion::He => (6.0 / cfg.n_in as f64).sqrt(),
    };
    let mut rng = rng_from_seed(cfg.seed);
    let values = (0..rows * cols).map(|_| uniform(&mut rng, -limit, limit)).collect();
    Tensor::real(rows, cols, values)
}

/// Initializer for either algebra.
pub fn init_weights(algebra: Algebra, cfg: &InitConfig, rows: usize, cols: usize) -> Result<Tensor> {
    match algebra {
        Algebra::Quaternion => quaternion_init(cfg, rows, cols),
        Algebra::Real => real_init(cfg, rows, cols),
    }
}

/// Quaternion with i.i.d. Normal(0, σ²) components: the construction under
/// which `|W|` is Chi(4)-distributed.
pub fn sample_normal_components(rng: &mut QRng, sigma: f64) -> Quaternion {
    let mut c = [0.0; 4];
    for v in &mut c {
        let z: f64 = StandardNormal.sample(rng);
        *v = sigma * z;
    }
    Quaternion::from_parts(c[0], c[1], c[2], c[3])
}

#[derive(Debug, Clone, Serialize)]
pub struct InitAuditReport {
    pub sample_count: usize,
    pub sigma: f64,
    /// `E|W|² − |E W|²` of the emitted weights.
    pub empirical_var_magnitude: f64,
    /// Chi(4) target `4σ²`.
    pub expected_var: f64,
    /// `σ²/3`, implied by `φ ~ U(-σ, σ)`.
    pub construction_var: f64,
    /// `E|W|² − |E W|²` under Normal(0, σ²) components, same sample count.
    pub normal_construction_var: f64,
    /// `|empirical / expected − 1| > 0.05`.
    pub paper_target_discrepancy: bool,
    pub component_means: [f64; 4],
    pub component_stderrs: [f64; 4],
    pub means_within_3se: bool,
    pub max_polar_residual: f64,
    pub max_magnitude_over_sigma: f64,
    pub theta_chi2: f64,
    pub theta_uniformity_pvalue: f64,
    /// Kolmogorov–Smirnov distance of `|w|/σ` from U(0, 1).
    pub magnitude_ks_statistic: f64,
    pub magnitude_ks_pvalue: f64,
}

pub const THETA_BINS: usize = 16;

/// Draws `sample_count` weights through [`sample_polar`] and checks them
/// against the distribution their construction implies.
pub fn audit_init(cfg: &InitConfig, sample_count: usize) -> Result<InitAuditReport> {
    if sample_count < 10_000 {
        return Err(Error::Config(format!(
            "audit needs at least 10000 samples, got {sample_count}"
        )));
    }
    let sigma = cfg.sigma()?;
    let mut rng = rng_from_seed(cfg.seed);
    let n = sample_count as f64;

    let mut sum = [0.0; 4];
    let mut sum_sq = [0.0; 4];
    let mut mag_sq = 0.0;
    let mut max_residual: f64 = 0.0;
    let mut max_mag: f64 = 0.0;
    let mut bins = [0usize; THETA_BINS];
    let mut scaled_mags = Vec::with_capacity(sample_count);

    for _ in 0..sample_count {
        let s = sample_polar(&mut rng, sigma);
        let c = s.weight.to_array();
        for p in 0..4 {
            sum[p] += c[p];
            sum_sq[p] += c[p] * c[p];
        }
        let m = s.weight.norm();
        mag_sq += m * m;
        max_residual = max_residual.max((m - s.phi.abs()).abs());
        max_mag = max_mag.max(m / sigma);
        scaled_mags.push(m / sigma);
        let b = (((s.theta + PI) / (2.0 * PI)) * THETA_BINS as f64) as usize;
        bins[b.min(THETA_BINS - 1)] += 1;
    }

    let means = sum.map(|s| s / n);
    let mut stderrs = [0.0; 4];
    for p in 0..4 {
        let var = (sum_sq[p] / n - means[p] * means[p]) * n / (n - 1.0);
        stderrs[p] = (var / n).sqrt();
    }
    let mean_norm_sq: f64 = means.iter().map(|m| m * m).sum();
    let empirical = mag_sq / n - mean_norm_sq;
    let expected = 4.0 * sigma * sigma;

    let expected_per_bin = n / THETA_BINS as f64;
    let chi2: f64 = bins
        .iter()
        .map(|&o| (o as f64 - expected_per_bin).powi(2) / expected_per_bin)
        .sum();
    let chi = ChiSquared::new((THETA_BINS - 1) as f64).expect("positive dof");
    let theta_p = chi.sf(chi2);

    let (ks, ks_p) = ks_uniform(&mut scaled_mags);

    let mut normal_rng = rng_from_seed(crate::rng::derive_seed(cfg.seed, "normal-construction"));
    let mut nsum = [0.0; 4];
    let mut nmag = 0.0;
    for _ in 0..sample_count {
        let w = sample_normal_components(&mut normal_rng, sigma);
        for (acc, v) in nsum.iter_mut().zip(w.to_array()) {
            *acc += v;
        }
        nmag += w.norm_squared();
    }
    let nmean_sq: f64 = nsum.iter().map(|s| (s / n) * (s / n)).sum();

    Ok(InitAuditReport {
        sample_count,
        sigma,
        empirical_var_magnitude: empirical,
        expected_var: expected,
        construction_var: sigma * sigma / 3.0,
        normal_construction_var: nmag / n - nmean_sq,
        paper_target_discrepancy: (empirical / expected - 1.0).abs() > 0.05,
        component_means: means,
        component_stderrs: stderrs,
        means_within_3se: (0..4).all(|p| means[p].abs() <= 3.0 * stderrs[p]),
        max_polar_residual: max_residual,
        max_magnitude_over_sigma: max_mag,
        theta_chi2: chi2,
        theta_uniformity_pvalue: theta_p,
        magnitude_ks_statistic: ks,
        magnitude_ks_pvalue: ks_p,
    })
}

/// One-sample KS test against U(0, 1); sorts `values` in place.
fn ks_uniform(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let cdf = v.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    (d, kolmogorov_sf(lambda))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

impl InitAuditReport {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("sample_count", self.sample_count.to_string());
        kv("sigma", format!("{:.12e}", self.sigma));
        kv("empirical_var_magnitude", format!("{:.12e}", self.empirical_var_magnitude));
        kv("expected_var", format!("{:.12e}", self.expected_var));
        kv("construction_var", format!("{:.12e}", self.construction_var));
        kv("normal_construction_var", format!("{:.12e}", self.normal_construction_var));
        kv("paper_target_discrepancy", self.paper_target_discrepancy.to_string());
        for (p, name) in ["r", "i", "j", "k"].iter().enumerate() {
            kv(&format!("mean_{name}"), format!("{:.12e}", self.component_means[p]));
            kv(&format!("stderr_{name}"), format!("{:.12e}", self.component_stderrs[p]));
        }
        kv("means_within_3se", self.means_within_3se.to_string());
        kv("max_polar_residual", format!("{:.12e}", self.max_polar_residual));
        kv("max_magnitude_over_sigma", format!("{:.12e}", self.max_magnitude_over_sigma));
        kv("theta_chi2", format!("{:.12e}", self.theta_chi2));
        kv("theta_uniformity_pvalue", format!("{:.12e}", self.theta_uniformity_pvalue));
        kv("magnitude_ks_statistic", format!("{:.12e}", self.magnitude_ks_statistic));
        kv("magnitude_ks_pvalue", format!("{:.12e}", self.magnitude_ks_pvalue));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_for(Criterion::Glorot, 256, 256).unwrap(), 0.03125);
        assert_eq!(sigma_for(Criterion::He, 2, 999).unwrap(), 0.5);
        assert_eq!(sigma_for(Criterion::Glorot, 1, 1).unwrap(), 0.5);
        assert!(sigma_for(Criterion::Glorot, 0, 3).is_err());
        assert!(sigma_for(Criterion::He, 3, 0).is_err());
    }

    #[test]
    fn polar_construction_identities() {
        let mut rng = rng_from_seed(11);
        for _ in 0..5_000 {
            let s = sample_polar(&mut rng, 0.2);
            let w = s.weight;
            let vec_sq = w.x() * w.x() + w.y() * w.y() + w.z() * w.z();
            let expect = s.phi * s.phi * s.theta.sin().powi(2);
            assert!((vec_sq - expect).abs() < 1e-12);
            assert!((w.norm() - s.phi.abs()).abs() < 1e-12);
            assert!(w.norm() <= 0.2);
            assert!(s.axis.iter().all(|&a| a >= 0.0));
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = InitConfig::glorot(4, 4, 42);
        let a = quaternion_init(&cfg, 4, 4).unwrap();
        let b = quaternion_init(&cfg, 4, 4).unwrap();
        assert_eq!(a.data(), b.data());
        let c = quaternion_init(&InitConfig::glorot(4, 4, 43), 4, 4).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn audit_rejects_small_samples() {
        assert!(audit_init(&InitConfig::glorot(4, 4, 1), 9_999).is_err());
    }

    #[test]
    fn audit_statistics() {
        let cfg = InitConfig::glorot(256, 256, 5);
        let rep = audit_init(&cfg, 100_000).unwrap();
        assert_eq!(rep.expected_var, 0.00390625);
        assert!(rep.means_within_3se, "{:?}", rep.component_means);
        assert!(rep.theta_uniformity_pvalue > 0.01);
        assert!(rep.magnitude_ks_pvalue > 0.01);
        let ratio = rep.empirical_var_magnitude / rep.construction_var;
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
        assert!(rep.paper_target_discrepancy);
        let normal_ratio = rep.normal_construction_var / rep.expected_var;
        assert!((0.95..=1.05).contains(&normal_ratio), "normal ratio {normal_ratio}");
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Reference values of the Kolmogorov survival function.
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.0) - 0.2700).abs() < 1e-3);
    }
}
