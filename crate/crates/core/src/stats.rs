//! Replicate statistics: win/tie frequencies and a one-sided paired t-test.

use serde::{Deserialize, Serialize};

use crate::record::sig9;
use crate::{Error, Result};

/// Relative tolerance under which two losses count as equal.
pub const EQ_TOL: f64 = 1e-8;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = d.recip();
    let mut h = d;
    for m in 1..=10_000 {
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
        d = d.recip();
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
        d = d.recip();
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedLosses {
    pub greedy: Vec<f64>,
    pub two_stage: Vec<f64>,
    pub support_sizes: Vec<usize>,
}

impl PairedLosses {
    pub fn new(greedy: Vec<f64>, two_stage: Vec<f64>, support_sizes: Vec<usize>) -> Result<Self> {
        let r = greedy.len();
        if r < 2 || two_stage.len() != r || support_sizes.len() != r {
            return Err(Error::Dimension(format!(
                "need at least two paired replicates, got {} / {} / {}",
                r,
                two_stage.len(),
                support_sizes.len()
            )));
        }
        if greedy.iter().chain(&two_stage).any(|v| !v.is_finite()) {
            return Err(Error::Domain("paired losses must be finite".into()));
        }
        Ok(Self {
            greedy,
            two_stage,
            support_sizes,
        })
    }

    pub fn len(&self) -> usize {
        self.greedy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.greedy.is_empty()
    }
}

/// Fractions of replicates where greedy is strictly worse, and tied.
pub fn empirical_probabilities(p: &PairedLosses, eq_tol: f64) -> (f64, f64) {
    let r = p.greedy.len();
    if r == 0 {
        return (0.0, 0.0);
    }
    let (mut greater, mut equal) = (0usize, 0usize);
    for (&g, &t) in p.greedy.iter().zip(&p.two_stage) {
        let tol = eq_tol * t.abs().max(1.0);
        let diff = g - t;
        if diff > tol {
            greater += 1;
        } else if diff.abs() <= tol {
            equal += 1;
        }
    }
    (greater as f64 / r as f64, equal as f64 / r as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    #[serde(serialize_with = "sig9")]
    pub t: f64,
    pub df: usize,
    /// `P(T_df > t)`.
    #[serde(serialize_with = "sig9")]
    pub p_one_sided: f64,
    /// All differences were identical; `t` is ±∞ or NaN.
    pub degenerate: bool,
}

/// Paired t-test of `mean(a − b) > 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let r = a.len();
    if r < 2 || b.len() != r {
        return Err(Error::Dimension(format!(
            "paired t-test needs two equal-length samples of size >= 2, got {} and {}",
            r,
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let MeanSd { mean, sd } = MeanSd::of(&diffs);
    let df = r - 1;
    if sd == 0.0 || diffs.iter().all(|&d| d == diffs[0]) {
        let (t, p) = if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (f64::NAN, 0.5)
        };
        return Ok(TTest {
            t,
            df,
            p_one_sided: p,
            degenerate: true,
        });
    }
    let t = mean / (sd / (r as f64).sqrt());
    Ok(TTest {
        t,
        df,
        p_one_sided: student_t_sf(t, df as f64),
        degenerate: false,
    })
}

/// Sample mean and standard deviation (divisor `n − 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    #[serde(serialize_with = "sig9")]
    pub mean: f64,
    #[serde(serialize_with = "sig9")]
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = if values.len() > 1 {
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub replicates: usize,
    pub greedy: MeanSd,
    pub two_stage: MeanSd,
    pub support_ip_size: MeanSd,
    #[serde(serialize_with = "sig9")]
    pub p_greater: f64,
    #[serde(serialize_with = "sig9")]
    pub p_equal: f64,
    #[serde(serialize_with = "sig9")]
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    #[serde(serialize_with = "sig9")]
    pub p_value_one_sided: f64,
    pub degenerate: bool,
}

impl ExperimentReport {
    pub fn from_paired(p: &PairedLosses, eq_tol: f64) -> Result<Self> {
        let (p_greater, p_equal) = empirical_probabilities(p, eq_tol);
        let test = paired_t_test(&p.greedy, &p.two_stage)?;
        let sizes: Vec<f64> = p.support_sizes.iter().map(|&s| s as f64).collect();
        Ok(Self {
            replicates: p.len(),
            greedy: MeanSd::of(&p.greedy),
            two_stage: MeanSd::of(&p.two_stage),
            support_ip_size: MeanSd::of(&sizes),
            p_greater,
            p_equal,
            t_statistic: test.t,
            degrees_of_freedom: test.df,
            p_value_one_sided: test.p_one_sided,
            degenerate: test.degenerate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        // ln(9!) = ln 362880
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x ; I_x(a, 1) = x^a ; I_x(1, b) = 1 - (1 - x)^b
        for x in [0.1, 0.4, 0.77] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.0, 1.0, x) - x.powi(3)).abs() < 1e-14);
            let want = 1.0 - (1.0 - x).powf(2.5);
            assert!((regularized_incomplete_beta(1.0, 2.5, x) - want).abs() < 1e-14);
        }
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn cauchy_and_df2_closed_forms() {
        // df = 1 is Cauchy; df = 2 has sf = (1 - t / sqrt(t² + 2)) / 2
        for t in [-3.0, -0.5, 0.0, 0.7, 2.0, 10.0] {
            let cauchy = 0.5 - f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_sf(t, 1.0) - cauchy).abs() < 1e-13);
            let df2 = 0.5 * (1.0 - t / (t * t + 2.0).sqrt());
            assert!((student_t_sf(t, 2.0) - df2).abs() < 1e-13);
        }
    }

    #[test]
    fn empirical_examples() {
        let p = PairedLosses::new(vec![3.0, 3.0, 3.0], vec![1.0, 2.0, 3.0], vec![2; 3]).unwrap();
        let (g, e) = empirical_probabilities(&p, EQ_TOL);
        assert!((g - 2.0 / 3.0).abs() < 1e-15 && (e - 1.0 / 3.0).abs() < 1e-15);
        let p = PairedLosses::new(vec![1.0, 2.0], vec![1.0, 2.0 + 1e-12], vec![2; 2]).unwrap();
        assert_eq!(empirical_probabilities(&p, EQ_TOL), (0.0, 1.0));
    }

    #[test]
    fn t_test_examples() {
        // d = [1, 2, 3]: t = 2·sqrt(3), df = 2; tail from the df = 2 closed form
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!((r.t - 12f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.p_one_sided - 0.037_089_950_113_724_27).abs() < 1e-12);
        assert!(!r.degenerate);

        let r = paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(r.degenerate && r.p_one_sided == 0.5);
        let r = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!(r.degenerate && r.p_one_sided == 0.0);
        let r = paired_t_test(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(r.degenerate && r.p_one_sided == 1.0);

        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn paired_losses_validation() {
        assert!(PairedLosses::new(vec![1.0], vec![1.0], vec![1]).is_err());
        assert!(PairedLosses::new(vec![1.0, f64::INFINITY], vec![1.0, 1.0], vec![1, 1]).is_err());
        assert!(PairedLosses::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![1]).is_err());
    }

    #[test]
    fn report_aggregates() {
        let p = PairedLosses::new(vec![5.0, 4.0, 6.0], vec![3.0, 3.5, 4.0], vec![6, 7, 8]).unwrap();
        let r = ExperimentReport::from_paired(&p, EQ_TOL).unwrap();
        assert_eq!(r.replicates, 3);
        assert!((r.greedy.mean - 5.0).abs() < 1e-15 && (r.greedy.sd - 1.0).abs() < 1e-15);
        assert!((r.support_ip_size.mean - 7.0).abs() < 1e-15);
        assert_eq!(r.p_greater, 1.0);
        assert!(r.p_value_one_sided < 0.05);
    }

    proptest! {
        #[test]
        fn swapping_samples_mirrors_the_test(
            a in proptest::collection::vec(-10.0f64..10.0, 3..30),
            shift in proptest::collection::vec(-3.0f64..3.0, 30),
        ) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let fwd = paired_t_test(&a, &b).unwrap();
            let rev = paired_t_test(&b, &a).unwrap();
            prop_assume!(!fwd.degenerate);
            prop_assert!((fwd.t + rev.t).abs() <= 1e-10 * fwd.t.abs().max(1.0));
            prop_assert!((fwd.p_one_sided + rev.p_one_sided - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn probabilities_ignore_order(
            pairs in proptest::collection::vec((0.0f64..5.0, 0.0f64..5.0), 2..20),
            rot in 0usize..20,
        ) {
            let (g, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let n = g.len();
            let base = PairedLosses::new(g.clone(), t.clone(), vec![0; n]).unwrap();
            let (mut g2, mut t2) = (g, t);
            g2.rotate_left(rot % n);
            t2.rotate_left(rot % n);
            g2.reverse();
            t2.reverse();
            let moved = PairedLosses::new(g2, t2, vec![0; n]).unwrap();
            prop_assert_eq!(
                empirical_probabilities(&base, EQ_TOL),
                empirical_probabilities(&moved, EQ_TOL)
            );
        }

        #[test]
        fn sf_is_monotone(t1 in -20.0f64..20.0, dt in 0.0f64..5.0, df in 1usize..200) {
            let lo = student_t_sf(t1 + dt, df as f64);
            let hi = student_t_sf(t1, df as f64);
            prop_assert!(lo <= hi + 1e-15);
            prop_assert!((0.0..=1.0).contains(&lo));
        }
    }
}
