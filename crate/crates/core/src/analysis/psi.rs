//! The cluster-size pmf `ψ_k = k^-2 d^-(Γ0 + Γ1 k)` and its convolutions.
//!
//! At realistic exponents the masses are far below `f64::MIN_POSITIVE`, so
//! everything lives in log space.

use serde_json::json;

use super::Report;
use crate::error::{Error, Result};

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|&x| (x - top).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    log_sum_exp([a, b])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiPmf {
    d: usize,
    gamma0: f64,
    gamma1: f64,
    kmax: usize,
    log_mass: Vec<f64>,
    log_positive: f64,
    log_tail: f64,
    cross_exponent: f64,
}

impl PsiPmf {
    pub fn new(d: usize, gamma0: f64, gamma1: f64, kmax: usize) -> Result<Self> {
        if d < 7 {
            return Err(Error::InvalidParameter(format!("d = {d} must be at least 7")));
        }
        if !(gamma0 > 0.0 && gamma1 > 0.0 && gamma0.is_finite() && gamma1.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponents ({gamma0}, {gamma1}) must be positive")));
        }
        if kmax == 0 {
            return Err(Error::InvalidParameter("kmax must be positive".into()));
        }
        let ln_d = (d as f64).ln();
        let formula = |k: usize| -2.0 * (k as f64).ln() - (gamma0 + gamma1 * k as f64) * ln_d;

        // Terms shrink at least geometrically (ratio d^-Γ1), so summing until
        // they stop registering gives the full series.
        let series = |from: usize| {
            let anchor = formula(from);
            let mut rel = 0.0;
            let mut k = from;
            loop {
                let term = (formula(k) - anchor).exp();
                rel += term;
                if term <= rel * 1e-18 || k - from > 10_000_000 {
                    break;
                }
                k += 1;
            }
            anchor + rel.ln()
        };
        let log_positive = series(1);
        let log_tail = series(kmax + 1);
        let positive = log_positive.exp();
        if positive >= 1.0 {
            return Err(Error::InvalidParameter(format!("exponents ({gamma0}, {gamma1}) leave no mass at 0")));
        }
        let mut log_mass = vec![(-positive).ln_1p()];
        log_mass.extend((1..=kmax).map(formula));
        Ok(PsiPmf { d, gamma0, gamma1, kmax, log_mass, log_positive, log_tail, cross_exponent: 20.0 * gamma0 / 1000.0 })
    }

    /// Exponents `(1000, 100)`.
    pub fn reference(d: usize, kmax: usize) -> Result<Self> {
        PsiPmf::new(d, 1000.0, 100.0, kmax)
    }

    /// Overrides the exponent `c` in the joint bound `d^-c ψ_{k+1} ψ_{ℓ+1}`.
    /// Defaults to `20·Γ0/1000`, i.e. 20 at `Γ0 = 1000`.
    pub fn with_cross_exponent(mut self, c: f64) -> Self {
        self.cross_exponent = c;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn cross_exponent(&self) -> f64 {
        self.cross_exponent
    }

    /// `ln ψ_k` for `0 <= k <= kmax`.
    pub fn psi_log(&self, k: usize) -> Result<f64> {
        self.log_mass.get(k).copied().ok_or(Error::OutOfRange { index: k, max: self.kmax })
    }

    /// `ln ψ_k` for any `k`, past the truncation too.
    pub(crate) fn psi_log_any(&self, k: usize) -> f64 {
        match self.log_mass.get(k) {
            Some(&x) => x,
            None => -2.0 * (k as f64).ln() - (self.gamma0 + self.gamma1 * k as f64) * (self.d as f64).ln(),
        }
    }

    pub fn log_mass(&self) -> &[f64] {
        &self.log_mass
    }

    /// `ln Σ_{k>=1} ψ_k` over the untruncated support.
    pub fn log_positive_mass(&self) -> f64 {
        self.log_positive
    }

    /// `ln Σ_{k>kmax} ψ_k`, the mass cut off by truncation.
    pub fn log_tail_mass(&self) -> f64 {
        self.log_tail
    }

    /// `Σ_{i<q} (1 + 16 d^-Γ0)^i`.
    pub fn f_q(&self, q: usize) -> f64 {
        let r = 1.0 + 16.0 * (self.d as f64).powf(-self.gamma0);
        (0..q).map(|i| r.powi(i as i32)).sum()
    }
}

/// Exact `q`-fold convolution of a log-space pmf on `0..len`. The result has
/// length `q·(len-1)+1`; nothing is truncated.
pub fn convolve_log(pmf: &[f64], q: usize) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    if pmf.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = pmf.to_vec();
    for _ in 1..q {
        acc = convolve_pair(&acc, pmf);
    }
    Ok(acc)
}

fn convolve_pair(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let mut terms = Vec::new();
    (0..len)
        .map(|k| {
            terms.clear();
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            terms.extend((lo..=hi).map(|i| a[i] + b[k - i]));
            log_sum_exp(terms.iter().copied())
        })
        .collect()
}

/// Entry `k` of a convolution produced by [`convolve_log`].
pub fn conv_entry(conv: &[f64], k: usize) -> Result<f64> {
    conv.get(k).copied().ok_or(Error::OutOfRange { index: k, max: conv.len().saturating_sub(1) })
}

/// Log tails `ln Σ_{j>=k} conv[j]` for every `k`.
fn log_tails(conv: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; conv.len() + 1];
    for k in (0..conv.len()).rev() {
        out[k] = log_add(out[k + 1], conv[k]);
    }
    out
}

fn check_q(p: &PsiPmf, q: usize, kmax: usize) -> Result<()> {
    if q == 0 || q > p.d {
        return Err(Error::InvalidParameter(format!("need 1 <= q <= d (q = {q}, d = {})", p.d)));
    }
    if kmax > p.kmax {
        return Err(Error::OutOfRange { index: kmax, max: p.kmax });
    }
    Ok(())
}

/// Checks `P(Y_1+…+Y_q = k) <= f_q ψ_k` for `1 <= k <= kmax`, with `Y_i ~ ψ`
/// i.i.d. Values at `k <= kmax` only involve summands `<= kmax`, so the
/// truncated convolution is exact there.
pub fn verify_simple_convolution(p: &PsiPmf, q: usize, kmax: usize) -> Result<Report> {
    check_q(p, q, kmax)?;
    let conv = convolve_log(&p.log_mass[..=kmax], q)?;
    let ln_f = p.f_q(q).ln();
    let mut report = Report::new(
        "simple_convolution",
        json!({"d": p.d, "gamma0": p.gamma0, "gamma1": p.gamma1, "q": q, "kmax": kmax, "f_q": p.f_q(q)}),
    );
    for k in 1..=kmax {
        let lhs = conv[k];
        let rhs = ln_f + p.log_mass[k];
        report.record(rhs - lhs, 1e-9, || json!({"k": k, "log_lhs": lhs, "log_rhs": rhs}));
    }
    Ok(report)
}

/// Exact log tails of `q` i.i.d. ψ draws and of the joint event with at
/// least two coordinatewise-positive pairs.
#[derive(Debug, Clone)]
pub struct PsiTails {
    q: usize,
    log_psi0: f64,
    /// `ln P(ΣY >= k)`.
    sum_tail: Vec<f64>,
    /// `positive_tail[r][k] = ln Σ_{y_1..y_r >= 1, Σy >= k} Π ψ_{y_i}`.
    positive_tail: Vec<Vec<f64>>,
    ln_fact: Vec<f64>,
}

impl PsiTails {
    /// Truncation at `p.kmax()` is compensated by adding a union bound on
    /// the cut-off mass to every tail, so all values are upper bounds.
    pub fn new(p: &PsiPmf, q: usize) -> Result<Self> {
        check_q(p, q, 0)?;
        let deficit = (q as f64).ln() + p.log_tail;
        let full = convolve_log(&p.log_mass, q)?;
        let sum_tail = log_tails(&full).into_iter().map(|t| log_add(t, deficit)).collect();

        let mut positive = p.log_mass.clone();
        positive[0] = f64::NEG_INFINITY;
        let mut positive_tail = vec![Vec::new(), Vec::new()];
        let mut power = positive.clone();
        for r in 2..=q {
            power = convolve_pair(&power, &positive);
            let cut = (r as f64).ln() + p.log_tail + (r as f64 - 1.0) * p.log_positive;
            positive_tail.push(log_tails(&power).into_iter().map(|t| log_add(t, cut)).collect());
        }
        let mut ln_fact = vec![0.0; q + 1];
        for i in 1..=q {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        Ok(PsiTails { q, log_psi0: p.log_mass[0], sum_tail, positive_tail, ln_fact })
    }

    pub fn sum_tail_log(&self, k: usize) -> f64 {
        *self.sum_tail.get(k).unwrap_or(&f64::NEG_INFINITY)
    }

    fn g(&self, r: usize, k: usize) -> f64 {
        // Every summand of an r-fold positive sum is at least r.
        let row = &self.positive_tail[r];
        *row.get(k).unwrap_or(&f64::NEG_INFINITY)
    }

    /// `ln P(J >= 2, ΣY >= k, ΣY' >= ℓ)` with `Z_i = (Y_i, Y'_i)`.
    ///
    /// Splits the `q` indices into `m` with both coordinates positive, `a`
    /// with only the first, `b` with only the second and `c` with neither; the
    /// coordinates are independent so each split factorises.
    pub fn joint_tail_log(&self, k: usize, l: usize) -> f64 {
        let q = self.q;
        let mut terms = Vec::new();
        for m in 2..=q {
            for a in 0..=(q - m) {
                for b in 0..=(q - m - a) {
                    let c = q - m - a - b;
                    let multinomial = self.ln_fact[q] - self.ln_fact[m] - self.ln_fact[a] - self.ln_fact[b] - self.ln_fact[c];
                    let zeros = (a + b + 2 * c) as f64 * self.log_psi0;
                    terms.push(multinomial + zeros + self.g(m + a, k) + self.g(m + b, l));
                }
            }
        }
        log_sum_exp(terms)
    }
}

/// Checks, for `0 <= k, ℓ <= kmax` and `Z_i ~ ψ⊗ψ` i.i.d.:
/// (a) `P(ΣZ >= (k,ℓ)) <= 2q² ψ_k ψ_ℓ`, using the product of one-coordinate tails;
/// (b) `P(J >= 2, ΣZ >= (k,ℓ)) <= d^-c ψ_{k+1} ψ_{ℓ+1}` with `c` the cross exponent.
pub fn verify_psi_tail_bounds(p: &PsiPmf, q: usize, kmax: usize) -> Result<Report> {
    check_q(p, q, kmax)?;
    let tails = PsiTails::new(p, q)?;
    let ln_d = (p.d as f64).ln();
    let ln_2q2 = (2.0 * (q * q) as f64).ln();
    let mut report = Report::new(
        "psi_tail_bounds",
        json!({"d": p.d, "gamma0": p.gamma0, "gamma1": p.gamma1, "q": q, "kmax": kmax, "cross_exponent": p.cross_exponent}),
    );
    for k in 0..=kmax {
        for l in 0..=kmax {
            let lhs = tails.sum_tail_log(k) + tails.sum_tail_log(l);
            let rhs = ln_2q2 + p.log_mass[k] + p.log_mass[l];
            report.record(rhs - lhs, 1e-9, || json!({"part": "a", "k": k, "l": l, "log_lhs": lhs, "log_rhs": rhs}));

            let lhs = tails.joint_tail_log(k, l);
            let rhs = -p.cross_exponent * ln_d + p.psi_log_any(k + 1) + p.psi_log_any(l + 1);
            let margin = if lhs == f64::NEG_INFINITY { f64::INFINITY } else { rhs - lhs };
            report.record(margin, 1e-9, || json!({"part": "b", "k": k, "l": l, "log_lhs": lhs, "log_rhs": rhs}));
        }
    }
    Ok(report)
}
