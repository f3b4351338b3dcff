//! Readout timing, Purcell and photon-number constraints, and the two regime
//! classifiers (readout strategy and accessible model).
//!
//! All inputs share one energy unit; times come out in its inverse. Only
//! magnitudes of the anharmonicity and dispersive shift enter.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutParams {
    /// Resonator linewidth `κ`.
    pub kappa: f64,
    /// Dispersive shift `χ`.
    pub chi: f64,
    /// Mean readout photon number `n̄`.
    pub photons: f64,
    /// Anharmonicity `A` (sign kept, magnitude used).
    pub anharmonicity: f64,
    /// Hopping `J`.
    pub hopping: f64,
    /// Largest hop distance `L` an excitation may travel.
    pub hop_distance: f64,
    /// Purcell-filter suppression `η_PF` in `(0, 1]`.
    pub purcell_factor: f64,
    /// `ε₁ = n̄ / n̄_crit`.
    pub photon_budget: f64,
    /// `ε₂ = L γ_P / J`.
    pub purcell_budget: f64,
    /// Qubit decoherence rate `Γ`.
    pub decoherence: f64,
    /// Frequency spread `Δω`.
    pub spread: f64,
    /// Qubit frequency `ω_q`.
    pub qubit_frequency: f64,
}

fn nonzero(x: f64, what: &'static str) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::ZeroDivisor(what));
    }
    Ok(x)
}

/// `1/κ + (κ² + (χ/2)²) / (κ n̄ χ²)`.
pub fn measurement_time(p: &ReadoutParams) -> Result<f64> {
    let kappa = nonzero(p.kappa, "kappa")?;
    let chi = nonzero(p.chi, "chi")?;
    let photons = nonzero(p.photons, "photon number")?;
    Ok(1.0 / kappa + (kappa * kappa + 0.25 * chi * chi) / (kappa * photons * chi * chi))
}

/// Critical photon number and Purcell rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    /// `n̄_crit = |A| / 4|χ|`.
    pub critical_photons: f64,
    /// `γ_P = η_PF κ |χ| / |A|`.
    pub purcell_rate: f64,
}

pub fn constraints(p: &ReadoutParams) -> Result<Constraints> {
    let a = nonzero(p.anharmonicity, "anharmonicity")?.abs();
    let chi = nonzero(p.chi, "chi")?.abs();
    Ok(Constraints { critical_photons: a / (4.0 * chi), purcell_rate: p.purcell_factor * p.kappa * chi / a })
}

fn budget_coefficient(p: &ReadoutParams) -> Result<f64> {
    let a = nonzero(p.anharmonicity, "anharmonicity")?;
    let e = nonzero(p.photon_budget * p.purcell_budget, "budget fractions")?;
    Ok(4.0 * p.purcell_factor * p.hop_distance / e / (a * a))
}

/// `J/κ + (4 η_PF L / (ε₁ ε₂)) κ² / (J A²)`, as printed.
///
/// The second term carries a stray `1/J`; see
/// [`optimized_measurement_time_consistent`] for the dimensionless form.
pub fn optimized_measurement_time(p: &ReadoutParams) -> Result<f64> {
    let j = nonzero(p.hopping, "hopping")?;
    let kappa = nonzero(p.kappa, "kappa")?;
    Ok(j / kappa + budget_coefficient(p)? * kappa * kappa / j)
}

/// `J/κ + 4 η_PF L κ² / (ε₁ ε₂ A²)`: substituting the fixed budget ratios
/// into [`measurement_time`] for `κ ≫ χ`.
pub fn optimized_measurement_time_consistent(p: &ReadoutParams) -> Result<f64> {
    let j = nonzero(p.hopping, "hopping")?;
    let kappa = nonzero(p.kappa, "kappa")?;
    Ok(j / kappa + budget_coefficient(p)? * kappa * kappa)
}

/// Linewidth minimizing [`optimized_measurement_time`]: for `a/κ + b κ²`
/// the minimum sits at `κ = (a / 2b)^{1/3}`.
pub fn optimal_linewidth(p: &ReadoutParams) -> Result<f64> {
    let j = nonzero(p.hopping, "hopping")?;
    let b = nonzero(budget_coefficient(p)? / j, "purcell factor")?;
    Ok(libm::cbrt(j / (2.0 * b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutRegime {
    FastReadout,
    StarkFreeze,
    WeakContinuous,
}

impl ReadoutRegime {
    pub fn label(&self) -> &'static str {
        match self {
            Self::FastReadout => "fast-readout",
            Self::StarkFreeze => "stark-freeze",
            Self::WeakContinuous => "weak-continuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutThresholds {
    /// Prefactor of the fast-readout bound.
    pub fast_constant: f64,
    /// Multiplier on `ε₁ |A|` for the weak-continuous bound.
    pub weak_factor: f64,
}

impl Default for ReadoutThresholds {
    fn default() -> Self {
        Self { fast_constant: 0.03, weak_factor: 1.0 }
    }
}

/// `c √(ε₁ε₂ / (η_PF L)) |A|`.
pub fn fast_readout_threshold(p: &ReadoutParams, t: &ReadoutThresholds) -> Result<f64> {
    let den = nonzero(p.purcell_factor * p.hop_distance, "purcell factor times hop distance")?;
    Ok(t.fast_constant * libm::sqrt(p.photon_budget * p.purcell_budget / den) * p.anharmonicity.abs())
}

/// Lower edge of the stark-freeze band as printed, `c √(ε₁ε₂ / L) |A|`
/// (no filter factor).
pub fn stark_freeze_lower_bound(p: &ReadoutParams, t: &ReadoutThresholds) -> Result<f64> {
    let l = nonzero(p.hop_distance, "hop distance")?;
    Ok(t.fast_constant * libm::sqrt(p.photon_budget * p.purcell_budget / l) * p.anharmonicity.abs())
}

/// `ε₁ |A|` times the weak factor.
pub fn weak_continuous_threshold(p: &ReadoutParams, t: &ReadoutThresholds) -> f64 {
    t.weak_factor * p.photon_budget * p.anharmonicity.abs()
}

/// Fast readout when `J` is at or below the fast threshold; weak continuous
/// when `J` exceeds `ε₁|A|`; stark freeze in between. A `J` on a threshold
/// goes to the lower-`J` regime, and the fast check wins if the two
/// thresholds cross.
pub fn classify_readout_regime(p: &ReadoutParams, t: &ReadoutThresholds) -> Result<ReadoutRegime> {
    let j = p.hopping.abs();
    if j <= fast_readout_threshold(p, t)? {
        Ok(ReadoutRegime::FastReadout)
    } else if j > weak_continuous_threshold(p, t) {
        Ok(ReadoutRegime::WeakContinuous)
    } else {
        Ok(ReadoutRegime::StarkFreeze)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRegime {
    Uncoupled,
    ParticleLike,
    SpinLike,
    Semiclassical,
}

impl ModelRegime {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Uncoupled => "uncoupled",
            Self::ParticleLike => "particle-like",
            Self::SpinLike => "spin-like",
            Self::Semiclassical => "semiclassical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelClassification {
    pub regime: ModelRegime,
    /// Set when no rule matched and the nearest band was chosen.
    pub ambiguous: bool,
}

/// Reading of "much smaller than" as a ratio.
pub const DEFAULT_SCALE_SEPARATION: f64 = 10.0;

pub fn classify_model_regime(j: f64, qubit_frequency: f64, anharmonicity: f64, spread: f64) -> ModelClassification {
    classify_model_regime_with(j, qubit_frequency, anharmonicity, spread, DEFAULT_SCALE_SEPARATION)
}

/// Uncoupled if `J < Δω`; particle-like if `J ≤ ω_q/s`; spin-like if
/// `ω_q ≤ J ≤ |A|/s`; semiclassical if `J > max(ω_q, |A|)`. Otherwise the
/// band nearest in `ln J` is returned with the ambiguity flag.
pub fn classify_model_regime_with(j: f64, qubit_frequency: f64, anharmonicity: f64, spread: f64, separation: f64) -> ModelClassification {
    let (j, wq, a, dw) = (j.abs(), qubit_frequency.abs(), anharmonicity.abs(), spread.abs());
    let exact = |regime| ModelClassification { regime, ambiguous: false };
    if j < dw {
        return exact(ModelRegime::Uncoupled);
    }
    if j <= wq / separation {
        return exact(ModelRegime::ParticleLike);
    }
    if wq <= j && j <= a / separation {
        return exact(ModelRegime::SpinLike);
    }
    if j > wq.max(a) {
        return exact(ModelRegime::Semiclassical);
    }
    // distance of ln J to each band in log space
    let lj = libm::log(j);
    let interval = |lo: f64, hi: f64| -> f64 {
        if lo > hi {
            return f64::INFINITY;
        }
        if lj < lo {
            lo - lj
        } else if lj > hi {
            lj - hi
        } else {
            0.0
        }
    };
    let ln = |x: f64| if x > 0.0 { libm::log(x) } else { f64::NEG_INFINITY };
    let candidates = [
        (ModelRegime::Uncoupled, interval(f64::NEG_INFINITY, ln(dw))),
        (ModelRegime::ParticleLike, interval(f64::NEG_INFINITY, ln(wq / separation))),
        (ModelRegime::SpinLike, interval(ln(wq), ln(a / separation))),
        (ModelRegime::Semiclassical, interval(ln(wq.max(a)), f64::INFINITY)),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.1 < best.1 {
            best = *c;
        }
    }
    ModelClassification { regime: best.0, ambiguous: true }
}
