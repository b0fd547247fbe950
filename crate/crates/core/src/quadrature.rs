//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * hw, ((k - g) * hw).abs())
}

/// Integrate `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`.
///
/// Intervals are bisected largest-error-first up to `max_intervals`.
/// Endpoints are never evaluated.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    integrate_breakpoints(f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`], with the initial partition given by `points`
/// (strictly increasing). Useful when the integrand has known scales.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(f: F, points: &[f64], abs_tol: f64, rel_tol: f64) -> Quadrature {
    const MAX_INTERVALS: usize = 4000;
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (v, e) = kronrod(&f, w[0], w[1]);
            evaluations += 15;
            intervals.push((w[0], w[1], v, e));
        }
    }
    loop {
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        if error <= target || intervals.len() >= MAX_INTERVALS {
            return Quadrature { value, error, evaluations };
        }
        let (k, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, iv)| if iv.3 > acc.1 { (i, iv.3) } else { acc });
        let (a, b, _, _) = intervals.swap_remove(k);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            // Interval exhausted at machine resolution.
            return Quadrature { value, error, evaluations };
        }
        let (v1, e1) = kronrod(&f, a, m);
        let (v2, e2) = kronrod(&f, m, b);
        evaluations += 30;
        intervals.push((a, m, v1, e1));
        intervals.push((m, b, v2, e2));
    }
}

/// Integrate over `[a, inf)` via `x = a + s/(1-s)`, `s in [0, 1)`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    let g = |s: f64| {
        let d = 1.0 - s;
        f(a + s / d) / (d * d)
    };
    integrate_breakpoints(g, &[0.0, 0.5, 0.9, 0.99, 0.999, 1.0], abs_tol, rel_tol)
}

/// Breakpoints `a, a+s, a+10s, a+100s, ...` capped at `b`, for integrands
/// that vary on scale `s` near `a` and slowly beyond.
pub fn geometric_breakpoints(a: f64, b: f64, s: f64) -> Vec<f64> {
    let mut pts = vec![a];
    let mut x = s;
    while a + x < b {
        pts.push(a + x);
        x *= 10.0;
    }
    pts.push(b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((q.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((q.value - 2.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn half_line_lorentzian() {
        let q = integrate_half_line(|x| 1.0 / (1.0 + x * x), 0.0, 1e-14, 1e-14);
        assert!((q.value - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_span() {
        let p = geometric_breakpoints(0.0, 5.0, 0.01);
        assert_eq!(p, vec![0.0, 0.01, 0.1, 1.0, 5.0]);
    }
}
