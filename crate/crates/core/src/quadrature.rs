//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Subdivision is global: the segment with the largest error estimate is
//! bisected until the summed estimate meets the tolerance. Known kinks of
//! the integrand can be passed as breakpoints so that no segment straddles
//! them. Results are summed in segment order, so identical inputs give
//! bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Evaluate inner cumulative hazards in closed form where the rate
    /// family allows it. When false they are integrated numerically.
    pub closed_form_hazards: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 200,
            closed_form_hazards: true,
        }
    }
}

impl QuadratureConfig {
    /// Tight tolerances used for finite-difference diagnostics, where the
    /// quadrature error is amplified by 1/h.
    pub fn tight() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-16,
            max_subdivisions: 400,
            closed_form_hazards: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment {
        lo,
        hi,
        value: res_k * half,
        error: err,
    }
}

/// Integrates `f` over `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    integrate_with_breaks(f, lo, hi, &[], cfg)
}

/// Integrates `f` over `[lo, hi]`, never letting a segment straddle one of
/// `breaks`. Breakpoints outside the open interval are ignored.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain(format!(
            "integration bounds must be finite, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    if hi < lo {
        return integrate_with_breaks(f, hi, lo, breaks, cfg).map(|v| -v);
    }

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut segments = Vec::with_capacity(cuts.len() + 16);
    let mut left = lo;
    for c in cuts.into_iter().chain(std::iter::once(hi)) {
        segments.push(gk15(&f, left, c));
        left = c;
    }

    let total = |segs: &[Segment]| -> (f64, f64) {
        segs.iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };

    let mut subdivisions = segments.len();
    loop {
        let (value, error) = total(&segments);
        let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= target {
            return Ok(value);
        }
        if !value.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::NAN,
                requested: target,
            });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                achieved: error,
                requested: target,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("at least one segment");
        let seg = segments[worst];
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // interval collapsed to adjacent floats; accept what we have
            return Ok(value);
        }
        segments[worst] = gk15(&f, seg.lo, mid);
        segments.insert(worst + 1, gk15(&f, mid, seg.hi));
        subdivisions += 1;
    }
}
