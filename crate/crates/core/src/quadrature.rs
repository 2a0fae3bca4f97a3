//! Gauss–Legendre rules and an adaptive Gauss–Kronrod integrator for
//! small fixed-size complex vector integrands.

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
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

fn gk15<const N: usize, F>(f: &F, a: f64, b: f64) -> ([Complex64; N], f64)
where
    F: Fn(f64) -> [Complex64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let zero = Complex64::new(0.0, 0.0);
    let mut kron = [zero; N];
    let mut gauss = [zero; N];
    let fc = f(center);
    for n in 0..N {
        kron[n] = fc[n] * WGK[7];
        gauss[n] = fc[n] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for n in 0..N {
            let s = f1[n] + f2[n];
            kron[n] += s * WGK[j];
            if j % 2 == 1 {
                gauss[n] += s * WG[j / 2];
            }
        }
    }
    let mut err = 0.0f64;
    for n in 0..N {
        kron[n] *= half;
        gauss[n] *= half;
        err = err.max((kron[n] - gauss[n]).norm());
    }
    (kron, err)
}

/// Adaptive Gauss–Kronrod integration of a complex vector function over
/// [a, b]. Subintervals are bisected until their error estimate drops below
/// their share of `abs_tol`; the recursion order is fixed, so results are
/// deterministic.
pub fn integrate_adaptive<const N: usize, F>(f: &F, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> [Complex64; N]
where
    F: Fn(f64) -> [Complex64; N],
{
    let (est, err) = gk15(f, a, b);
    refine(f, a, b, est, err, abs_tol, max_depth)
}

fn refine<const N: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    est: [Complex64; N],
    err: f64,
    tol: f64,
    depth: u32,
) -> [Complex64; N]
where
    F: Fn(f64) -> [Complex64; N],
{
    if err <= tol || depth == 0 {
        return est;
    }
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    let child_tol = tol / std::f64::consts::SQRT_2;
    let l = refine(f, a, m, l, el, child_tol, depth - 1);
    let r = refine(f, m, b, r, er, child_tol, depth - 1);
    let mut out = l;
    for n in 0..N {
        out[n] += r[n];
    }
    out
}
