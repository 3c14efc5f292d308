//! Adaptive quadrature for vector-valued integrands on finite intervals:
//! a 15-point Kronrod rule with embedded 7-point Gauss error estimation,
//! refined by bisecting the segment with the worst estimate. Callers can
//! force initial cuts at known kinks (piece breakpoints, support endpoints)
//! so the error estimator never straddles them.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and budget for one integration run.
///
/// The target is `total error <= max(abs_tol, rel_tol * |value|)` with the
/// value measured in the max norm across components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureSpec {
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_subdivisions")]
    pub max_subdivisions: usize,
    #[serde(default)]
    pub extra_breakpoints: Vec<f64>,
}

fn default_abs_tol() -> f64 {
    1e-10
}

fn default_rel_tol() -> f64 {
    1e-8
}

fn default_max_subdivisions() -> usize {
    4000
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: default_abs_tol(),
            rel_tol: default_rel_tol(),
            max_subdivisions: default_max_subdivisions(),
            extra_breakpoints: Vec::new(),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidInput(
                "quadrature subdivision cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct QuadratureOutcome {
    pub value: Vec<f64>,
    pub error_estimate: f64,
    pub subdivisions: usize,
}

// 15-point Kronrod abscissae on [-1, 1] (positive half; symmetric) with the
// embedded 7-point Gauss weights `WG` and Kronrod weights `WGK`.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Error rescaling from the embedded-rule difference, following the classic
/// library formula: dampen by the scaled variation and floor at roundoff.
fn rescale_error(err: f64, result_abs: f64, result_asc: f64) -> f64 {
    let err = err.abs();
    let mut scaled = err;
    if result_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / result_asc).powf(1.5);
        scaled = if scale < 1.0 {
            result_asc * scale
        } else {
            result_asc
        };
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * result_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

struct Segment {
    lo: f64,
    hi: f64,
    value: Vec<f64>,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15(f: &mut dyn FnMut(f64) -> Vec<f64>, lo: f64, hi: f64, dim: usize) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    debug_assert_eq!(fc.len(), dim);
    let mut resk: Vec<f64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut resg: Vec<f64> = fc.iter().map(|v| v * WG[3]).collect();
    let mut resabs: Vec<f64> = fc.iter().map(|v| v.abs() * WGK[7]).collect();
    let mut samples: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::with_capacity(7);
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(center - half * x);
        let f2 = f(center + half * x);
        for c in 0..dim {
            let sum = f1[c] + f2[c];
            resk[c] += WGK[j] * sum;
            resabs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            if j % 2 == 1 {
                resg[c] += WG[j / 2] * sum;
            }
        }
        samples.push((j, f1, f2));
    }
    // Scaled variation around the Kronrod mean, per component.
    let mut resasc = vec![0.0; dim];
    for c in 0..dim {
        let mean = resk[c] * 0.5;
        resasc[c] = WGK[7] * (fc[c] - mean).abs();
        for (j, f1, f2) in &samples {
            resasc[c] += WGK[*j] * ((f1[c] - mean).abs() + (f2[c] - mean).abs());
        }
    }
    let value: Vec<f64> = resk.iter().map(|v| v * half).collect();
    let mut err = 0.0f64;
    let mut finite = true;
    for c in 0..dim {
        finite &= value[c].is_finite();
        let e = rescale_error(
            (resk[c] - resg[c]) * half,
            resabs[c] * half.abs(),
            resasc[c] * half.abs(),
        );
        err = err.max(e);
    }
    if !finite || !err.is_finite() {
        err = f64::INFINITY;
    }
    Segment { lo, hi, value, err }
}

/// Integrate `f` over [a, b], seeding cuts at every breakpoint strictly
/// inside the interval (callers pass piece boundaries and support endpoints;
/// `spec.extra_breakpoints` is appended).
pub fn integrate(
    f: &mut dyn FnMut(f64) -> Vec<f64>,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadratureOutcome> {
    spec.validate()?;
    assert!(a.is_finite() && b.is_finite() && a <= b, "bad interval");
    let dim_probe = f(0.5 * (a + b));
    let dim = dim_probe.len();
    if a == b {
        return Ok(QuadratureOutcome {
            value: vec![0.0; dim],
            error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .chain(&spec.extra_breakpoints)
        .copied()
        .filter(|t| t.is_finite() && *t > a && *t < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.insert(0, a);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    let mut segments = 0usize;
    for w in cuts.windows(2) {
        heap.push(gk15(f, w[0], w[1], dim));
        segments += 1;
    }

    let span = b - a;
    loop {
        let total_err: f64 =
            heap.iter().map(|s| s.err).sum::<f64>() + frozen.iter().map(|s| s.err).sum::<f64>();
        let mut value_norm = 0.0f64;
        for c in 0..dim {
            let v: f64 = heap.iter().map(|s| s.value[c]).sum::<f64>()
                + frozen.iter().map(|s| s.value[c]).sum::<f64>();
            value_norm = value_norm.max(v.abs());
        }
        let tol = spec.abs_tol.max(spec.rel_tol * value_norm);
        if total_err <= tol {
            break;
        }
        if segments >= spec.max_subdivisions {
            return Err(Error::QuadratureFailure {
                estimate: total_err,
                tolerance: tol,
                subdivisions: segments,
            });
        }
        let Some(worst) = heap.pop() else {
            // Every segment is frozen at roundoff width and the estimate
            // still exceeds the tolerance.
            return Err(Error::QuadratureFailure {
                estimate: total_err,
                tolerance: tol,
                subdivisions: segments,
            });
        };
        let width = worst.hi - worst.lo;
        if width <= 4.0 * f64::EPSILON * span.max(worst.lo.abs()).max(worst.hi.abs()) {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        heap.push(gk15(f, worst.lo, mid, dim));
        heap.push(gk15(f, mid, worst.hi, dim));
        segments += 1;
    }

    // Deterministic final summation: left to right.
    let mut all: Vec<Segment> = heap.into_vec();
    all.extend(frozen);
    all.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut value = vec![0.0; dim];
    let mut error_estimate = 0.0;
    for s in &all {
        for c in 0..dim {
            value[c] += s.value[c];
        }
        error_estimate += s.err;
    }
    Ok(QuadratureOutcome {
        value,
        error_estimate,
        subdivisions: segments,
    })
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let out = integrate(&mut |t| vec![f(t)], a, b, breakpoints, spec)?;
    Ok((out.value[0], out.error_estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_near_exact() {
        let spec = QuadratureSpec::default();
        let (v, e) = integrate_scalar(&mut |t| t * t, 0.0, 1.0, &[], &spec).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 1e-14);
        assert!(e <= 1e-10);
    }

    #[test]
    fn sine_over_half_period() {
        let spec = QuadratureSpec::default();
        let (v, _) =
            integrate_scalar(&mut |t| t.sin(), 0.0, std::f64::consts::PI, &[], &spec).unwrap();
        assert!((v - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn vector_components_integrate_independently() {
        let spec = QuadratureSpec::default();
        let out = integrate(&mut |t| vec![1.0, t], 0.0, 2.0, &[], &spec).unwrap();
        assert!((out.value[0] - 2.0).abs() <= 1e-12);
        assert!((out.value[1] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn breakpoint_handles_jump_integrand() {
        let spec = QuadratureSpec::default();
        let mut f = |t: f64| if t <= 1.0 { 0.0 } else { 1.0 };
        let (v, _) = integrate_scalar(&mut f, 0.0, 2.0, &[1.0], &spec).unwrap();
        assert!((v - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn smooth_bump_matches_frozen_reference() {
        // integral of exp(-1/(1-u^2)) over [-1, 1], reference from a
        // high-precision evaluation.
        let spec = QuadratureSpec::default();
        let mut bump = |u: f64| {
            let w = 1.0 - u * u;
            if w <= 0.0 {
                0.0
            } else {
                (-1.0 / w).exp()
            }
        };
        let (v, _) = integrate_scalar(&mut bump, -1.0, 1.0, &[], &spec).unwrap();
        assert!((v - 0.443993816168079437823048921171).abs() <= 1e-12, "got {v}");
    }

    #[test]
    fn cap_of_one_interval_fails_on_oscillation() {
        let spec = QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 1,
            extra_breakpoints: Vec::new(),
        };
        let err = integrate_scalar(&mut |t| (50.0 * t).sin(), 0.0, 3.0, &[], &spec).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn extra_breakpoints_come_from_spec() {
        let spec = QuadratureSpec {
            extra_breakpoints: vec![0.5],
            ..QuadratureSpec::default()
        };
        let mut f = |t: f64| if t <= 0.5 { t } else { 0.0 };
        let (v, _) = integrate_scalar(&mut f, 0.0, 1.0, &[], &spec).unwrap();
        assert!((v - 0.125).abs() <= 1e-9);
    }

    #[test]
    fn error_estimate_bounds_true_error() {
        let spec = QuadratureSpec::default();
        let (v, e) = integrate_scalar(&mut |t| (-t).exp() * (5.0 * t).cos(), 0.0, 4.0, &[], &spec)
            .unwrap();
        let exact = {
            // antiderivative of e^{-t} cos(5t): e^{-t}(5 sin(5t) - cos(5t))/26
            let f = |t: f64| (-t).exp() * (5.0 * (5.0 * t).sin() - (5.0 * t).cos()) / 26.0;
            f(4.0) - f(0.0)
        };
        assert!((v - exact).abs() <= e.max(1e-13));
    }

    #[test]
    fn spec_defaults_are_engineering_defaults() {
        let spec = QuadratureSpec::default();
        assert_eq!(spec.abs_tol, 1e-10);
        assert_eq!(spec.rel_tol, 1e-8);
        assert_eq!(spec.max_subdivisions, 4000);
        let parsed: QuadratureSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed.abs_tol, 1e-10);
    }

    #[test]
    fn rejects_nonpositive_tolerances() {
        let spec = QuadratureSpec {
            abs_tol: 0.0,
            ..QuadratureSpec::default()
        };
        assert!(integrate_scalar(&mut |_| 1.0, 0.0, 1.0, &[], &spec).is_err());
    }
}
