//! Log-space kernels shared by the density, bound and oracle code.

pub use statrs::function::gamma::ln_gamma;

use libm::erfc;

/// `ln C(n, k)` for real `n >= k >= 0`.
pub fn ln_choose(n: f64, k: f64) -> f64 {
    if k < 0.0 || k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0.0 || k == n {
        return 0.0;
    }
    // through the binomial mass at p = 1/2, which keeps full relative
    // precision where log-gamma differences cancel
    ln_binom_pmf_raw(k, n, 0.5, 0.5) + n * std::f64::consts::LN_2
}

/// `x * ln(y)` with the convention `0 * ln(0) = 0`.
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `x * ln(x / y)` with `0 * ln(0 / y) = 0`.
pub fn xlnxy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Upper standard-normal tail `Pr{Z >= x}`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `stirlerr` at `n = 0, 1/2, 1, ..., 15`.
const STIRLERR_HALVES: [f64; 31] = [
    0.0,
    0.15342640972002736,
    0.08106146679532726,
    0.05481412105191765,
    0.0413406959554093,
    0.03316287351993629,
    0.02767792568499834,
    0.023746163656297496,
    0.020790672103765093,
    0.018488450532673187,
    0.016644691189821193,
    0.015134973221917378,
    0.013876128823070748,
    0.012810465242920227,
    0.01189670994589177,
    0.011104559758206917,
    0.010411265261972096,
    0.009799416126158804,
    0.009255462182712733,
    0.008768700134139386,
    0.00833056343336287,
    0.00793411456431402,
    0.007573675487951841,
    0.007244554301320383,
    0.00694284010720953,
    0.006665247032707682,
    0.006408994188004207,
    0.006171712263039458,
    0.0059513701127588475,
    0.0057462165130101155,
    0.005554733551962801,
];

/// Stirling-series remainder `ln Gamma(n + 1) - (n + 1/2) ln n + n - ln sqrt(2 pi)`.
pub fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let twice = 2.0 * n;
        if twice == twice.floor() {
            return STIRLERR_HALVES[twice as usize];
        }
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Deviance term `x ln(x / np) + np - x`, accurate when `x` is close to `np`.
pub fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        xlnxy(x, np) + np - x
    }
}

/// `ln Pr{Bin(n, p) = x}` with `q = 1 - p` given separately; `n` may be real.
pub fn ln_binom_pmf_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if x == n {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    if x < 0.0 || x > n {
        return f64::NEG_INFINITY;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = 2.0 * LN_SQRT_2PI + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

/// `ln Pr{Bin(n, p) = k}`.
pub fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    ln_binom_pmf_raw(k as f64, n as f64, p, 1.0 - p)
}

/// `ln Pr{Poisson(mu) = k}`.
pub fn ln_poisson_pmf(k: u64, mu: f64) -> f64 {
    let x = k as f64;
    if k == 0 {
        return -mu;
    }
    -stirlerr(x) - bd0(x, mu) - LN_SQRT_2PI - 0.5 * x.ln()
}

/// `ln Pr{X = k}` for `k` failures before the `size`-th success, success
/// probability `p`; `size` may be real.
pub fn ln_negbin_pmf(k: u64, size: f64, p: f64) -> f64 {
    let x = k as f64;
    let ans = ln_binom_pmf_raw(size, x + size, p, 1.0 - p);
    (size / (size + x)).ln() + ans
}

/// `ln Pr{K = k}` when drawing `draws` units without replacement from
/// `marked` marked and `unmarked` unmarked units.
pub fn ln_hypergeom_pmf(k: u64, marked: u64, unmarked: u64, draws: u64) -> f64 {
    let total = marked + unmarked;
    if k > marked || k > draws || draws - k > unmarked || draws > total {
        return f64::NEG_INFINITY;
    }
    let p = draws as f64 / total as f64;
    let q = (total - draws) as f64 / total as f64;
    ln_binom_pmf_raw(k as f64, marked as f64, p, q) + ln_binom_pmf_raw((draws - k) as f64, unmarked as f64, p, q)
        - ln_binom_pmf_raw(draws as f64, total as f64, p, q)
}

/// Stable running sum of terms given by their logarithms.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    pub fn add(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        if ln_term > self.max {
            self.scaled = self.scaled * (self.max - ln_term).exp() + 1.0;
            self.max = ln_term;
        } else {
            self.scaled += (ln_term - self.max).exp();
        }
    }

    pub fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    pub fn value(&self) -> f64 {
        self.ln().exp()
    }
}

impl FromIterator<f64> for LogSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = LogSum::default();
        for t in iter {
            acc.add(t);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_choose_small_values() {
        assert!((ln_choose(10.0, 4.0) - 210f64.ln()).abs() < 1e-13);
        assert_eq!(ln_choose(5.0, 0.0), 0.0);
        assert_eq!(ln_choose(5.0, 6.0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_matches_direct_sum() {
        let terms = [0.1f64, 0.2, 0.3, 1e-20];
        let acc: LogSum = terms.iter().map(|t| t.ln()).collect();
        assert!((acc.value() - 0.6).abs() < 1e-15);
        let empty = LogSum::default();
        assert_eq!(empty.value(), 0.0);
    }

    #[test]
    fn normal_sf_reference_points() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_sf(1.96) / 0.024_997_895_148_220_435 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn saddle_point_kernels_match_log_gamma_forms() {
        for &(k, n, p) in &[(0u64, 10u64, 0.3), (3, 10, 0.3), (10, 10, 0.3), (370, 738, 0.5), (5, 1000, 0.001)] {
            let direct = ln_choose(n as f64, k as f64) + xlny(k as f64, p) + xlny((n - k) as f64, 1.0 - p);
            assert!((ln_binom_pmf(k, n, p) - direct).abs() < 1e-11, "{k} {n} {p}");
        }
        for &(k, mu) in &[(0u64, 2.0), (7, 2.0), (400, 380.0)] {
            let direct = xlny(k as f64, mu) - mu - ln_gamma(k as f64 + 1.0);
            assert!((ln_poisson_pmf(k, mu) - direct).abs() < 1e-11);
        }
        for &(k, r, p) in &[(0u64, 2.5, 0.4), (9, 2.5, 0.4), (50, 0.3, 0.9)] {
            let direct = ln_gamma(k as f64 + r) - ln_gamma(k as f64 + 1.0) - ln_gamma(r) + xlny(k as f64, 1.0 - p) + r * p.ln();
            assert!((ln_negbin_pmf(k, r, p) - direct).abs() < 1e-11);
        }
        let direct = (5.0f64 / 210.0).ln();
        assert!((ln_hypergeom_pmf(4, 5, 5, 4) - direct).abs() < 1e-13);
        assert_eq!(ln_hypergeom_pmf(5, 5, 5, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_masses_sum_to_one() {
        let total: LogSum = (0..=738).map(|k| ln_binom_pmf(k, 738, 0.37)).collect();
        assert!((total.value() - 1.0).abs() < 1e-13);
    }
}
