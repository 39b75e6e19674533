//! Distribution functions and classical hypothesis tests.
//!
//! Student-t and F tail probabilities go through the regularized incomplete
//! beta function, evaluated with Lentz's continued fraction. Studentized-range
//! critical values come from an embedded α = 0.01 table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased (n - 1) sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Population (n) standard deviation.
pub fn std_population(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// I_x(a, b), the regularized incomplete beta function.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// P(T <= t) for Student's t with `df` (possibly fractional) degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).min(1.0)
}

/// Inverse CDF by bisection; `p` in (0, 1).
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// P(F > f) for the F distribution with (d1, d2) degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

impl TTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

/// Two-sided Welch (unequal variance) t-test of mean(a) - mean(b).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Validation(format!(
            "welch test needs at least 2 samples per group (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    let diff = mean(a) - mean(b);
    if se2 <= 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided_p(t, df),
    })
}

/// Significance of a Pearson correlation `r` over `n` pairs: t = r sqrt((n-2)/(1-r^2)), df = n - 2.
pub fn correlation_test(r: f64, n: usize) -> Result<TTest> {
    if n < 3 {
        return Err(Error::Validation(format!("correlation test needs n >= 3, got {n}")));
    }
    let df = (n - 2) as f64;
    let t = if r.abs() >= 1.0 {
        r.signum() * f64::INFINITY
    } else {
        r * (df / (1.0 - r * r)).sqrt()
    };
    Ok(TTest {
        t,
        df,
        p: student_t_two_sided_p(t, df),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_within: f64,
    pub group_means: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<Anova> {
    let k = groups.len();
    if k < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Validation("ANOVA needs at least 2 groups of at least 2 values".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    let (dfb, dfw) = (k - 1, n - k);
    let ms_within = ss_within / dfw as f64;
    if !(ms_within > 0.0) {
        return Err(Error::Degenerate("zero within-group variance".into()));
    }
    let f = (ss_between / dfb as f64) / ms_within;
    Ok(Anova {
        f,
        p: f_survival(f, dfb as f64, dfw as f64),
        df_between: dfb,
        df_within: dfw,
        ms_within,
        group_means: means,
        group_sizes: groups.iter().map(Vec::len).collect(),
    })
}

const Q_DF: [f64; 5] = [10.0, 20.0, 30.0, 60.0, 120.0];

/// Upper 1% points of the studentized range, rows by df (10, 20, 30, 60, 120, ∞),
/// columns by number of groups k = 2..=12.
const Q_01: [[f64; 11]; 6] = [
    [4.4820, 5.2702, 5.7686, 6.1361, 6.4275, 6.6690, 6.8749, 7.0544, 7.2133, 7.3559, 7.4850],
    [4.0239, 4.6392, 5.0180, 5.2933, 5.5095, 5.6876, 5.8389, 5.9703, 6.0865, 6.1905, 6.2846],
    [3.8891, 4.4549, 4.7992, 5.0476, 5.2418, 5.4012, 5.5361, 5.6531, 5.7563, 5.8485, 5.9318],
    [3.7622, 4.2822, 4.5944, 4.8178, 4.9913, 5.1330, 5.2525, 5.3558, 5.4466, 5.5276, 5.6007],
    [3.7016, 4.1999, 4.4970, 4.7085, 4.8722, 5.0055, 5.1176, 5.2143, 5.2992, 5.3748, 5.4429],
    [3.6428, 4.1203, 4.4028, 4.6028, 4.7570, 4.8822, 4.9872, 5.0775, 5.1566, 5.2270, 5.2902],
];

/// Critical value q(0.01; k, df). Interpolates linearly in ln(df) between
/// tabulated df, and linearly in 1/df between 120 and infinity.
pub fn studentized_range_critical_01(k: usize, df: f64) -> Result<f64> {
    if !(2..=12).contains(&k) {
        return Err(Error::Config(format!("studentized range table covers k = 2..=12, got {k}")));
    }
    if !(df >= Q_DF[0]) {
        return Err(Error::Config(format!("studentized range table starts at df = 10, got {df}")));
    }
    let col = k - 2;
    if df >= 120.0 {
        let (q120, qinf) = (Q_01[4][col], Q_01[5][col]);
        let w = (1.0 / df) / (1.0 / 120.0);
        return Ok(qinf + (q120 - qinf) * w);
    }
    let i = Q_DF.iter().rposition(|&d| d <= df).expect("df >= 10");
    let (d0, d1) = (Q_DF[i], Q_DF[i + 1]);
    let w = (df.ln() - d0.ln()) / (d1.ln() - d0.ln());
    Ok(Q_01[i][col] + (Q_01[i + 1][col] - Q_01[i][col]) * w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub i: usize,
    pub j: usize,
    pub mean_diff: f64,
    pub q: f64,
    pub q_critical: f64,
    pub significant: bool,
}

/// Tukey-Kramer comparisons of every pair of groups at α = 0.01.
pub fn tukey_kramer_01(anova: &Anova) -> Result<Vec<PairComparison>> {
    let k = anova.group_means.len();
    let q_critical = studentized_range_critical_01(k, anova.df_within as f64)?;
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = anova.group_means[i] - anova.group_means[j];
            let se = ((anova.ms_within / 2.0)
                * (1.0 / anova.group_sizes[i] as f64 + 1.0 / anova.group_sizes[j] as f64))
                .sqrt();
            let q = diff.abs() / se;
            out.push(PairComparison {
                i,
                j,
                mean_diff: diff,
                q,
                q_critical,
                significant: q > q_critical,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson quadrature of the t density, independent of the
    /// incomplete-beta route.
    fn t_cdf_by_quadrature(t: f64, df: f64) -> f64 {
        let c = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
        let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let n = 20_000;
        let h = t.abs() / n as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let half = s * h / 3.0;
        if t >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn t_cdf_table_value() {
        let p = student_t_cdf(2.447, 6.0);
        assert!((p - 0.975).abs() < 1e-3, "{p}");
        assert!((p - t_cdf_by_quadrature(2.447, 6.0)).abs() < 1e-9);
    }

    #[test]
    fn t_cdf_matches_quadrature() {
        for &df in &[1.0, 2.5, 6.0, 17.3, 120.0] {
            for &t in &[-4.0, -1.3, -0.2, 0.0, 0.7, 2.0, 5.5] {
                let a = student_t_cdf(t, df);
                let b = t_cdf_by_quadrature(t, df);
                assert!((a - b).abs() < 1e-8, "df={df} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn two_sided_p_consistent_with_cdf() {
        for &t in &[0.3, 1.9, 3.7] {
            let p = student_t_two_sided_p(t, 6.0);
            assert!((p - 2.0 * (1.0 - student_t_cdf(t, 6.0))).abs() < 1e-12);
            assert!((student_t_two_sided_p(-t, 6.0) - p).abs() < 1e-15);
        }
        assert_eq!(student_t_two_sided_p(0.0, 6.0), 1.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let q = student_t_quantile(0.975, 6.0);
        assert!((q - 2.4469).abs() < 1e-3);
        assert!((student_t_cdf(q, 6.0) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn f_survival_reference() {
        // F(1, d) equals t^2 with d degrees of freedom.
        let t: f64 = 2.3;
        assert!((f_survival(t * t, 1.0, 9.0) - student_t_two_sided_p(t, 9.0)).abs() < 1e-12);
        // F(2, d2): closed form (1 + 2f/d2)^(-d2/2)
        let (f, d2) = (3.1, 14.0);
        let exact = (1.0f64 + 2.0 * f / d2).powf(-d2 / 2.0);
        assert!((f_survival(f, 2.0, d2) - exact).abs() < 1e-12);
    }

    #[test]
    fn welch_against_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let r = welch_t_test(&a, &b).unwrap();
        let (va, vb) = (variance(&a) / 4.0, variance(&b) / 5.0);
        let t = (2.5 - 6.0) / (va + vb).sqrt();
        let df = (va + vb).powi(2) / (va * va / 3.0 + vb * vb / 4.0);
        assert!((r.t - t).abs() < 1e-12);
        assert!((r.df - df).abs() < 1e-12);
        assert!(welch_t_test(&[1.0], &b).is_err());
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn correlation_test_edges() {
        let r = correlation_test(0.0, 10).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert_eq!(correlation_test(1.0, 10).unwrap().p, 0.0);
        assert!(correlation_test(0.5, 2).is_err());
    }

    #[test]
    fn anova_hand_example() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let a = one_way_anova(&groups).unwrap();
        // SSB = 3*(9+0+9) = 54, SSW = 6 -> F = 27/1 = 27
        assert!((a.f - 27.0).abs() < 1e-12);
        assert_eq!((a.df_between, a.df_within), (2, 6));
        let exact = (1.0f64 + 2.0 * 27.0 / 6.0).powf(-3.0);
        assert!((a.p - exact).abs() < 1e-12);
        assert!(one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }

    #[test]
    fn studentized_range_k2_matches_t() {
        // q(α; 2, df) = sqrt(2) * t(1 - α/2; df)
        for &df in &[10.0, 20.0, 30.0, 60.0, 120.0] {
            let q = studentized_range_critical_01(2, df).unwrap();
            let t = student_t_quantile(0.995, df);
            assert!((q - 2f64.sqrt() * t).abs() < 2e-4, "df={df}: {q} vs {}", 2f64.sqrt() * t);
        }
        // interpolated df stays between neighbours
        let q = studentized_range_critical_01(12, 45.0).unwrap();
        assert!(q < 5.9318 && q > 5.6007);
        let q = studentized_range_critical_01(12, 1e9).unwrap();
        assert!((q - 5.2902).abs() < 1e-6);
        assert!(studentized_range_critical_01(13, 50.0).is_err());
        assert!(studentized_range_critical_01(3, 5.0).is_err());
    }

    #[test]
    fn tukey_kramer_equals_hsd_when_balanced() {
        let groups: Vec<Vec<f64>> = (0..4)
            .map(|g| (0..15).map(|i| g as f64 * 0.8 + ((i * 7 + g * 3) % 11) as f64 / 5.0).collect())
            .collect();
        let a = one_way_anova(&groups).unwrap();
        let pairs = tukey_kramer_01(&a).unwrap();
        assert_eq!(pairs.len(), 6);
        // HSD: q = |diff| / sqrt(MSW / n)
        for p in &pairs {
            let hsd = p.mean_diff.abs() / (a.ms_within / 15.0).sqrt();
            assert!((p.q - hsd).abs() < 1e-12);
        }
    }

    #[test]
    fn tukey_pair_count_for_twelve_groups() {
        let groups: Vec<Vec<f64>> = (0..12)
            .map(|g| (0..5).map(|i| (g * 5 + i) as f64 % 7.0).collect())
            .collect();
        let a = one_way_anova(&groups).unwrap();
        assert_eq!(tukey_kramer_01(&a).unwrap().len(), 66);
    }
}
