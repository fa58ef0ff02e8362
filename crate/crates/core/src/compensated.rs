//! Error-free transformations and compensated accumulation.
//!
//! Used where a result has to be accurate relative to a quantity much smaller
//! than its summands: residuals of nearly converged iterates, and the
//! residuals that drive iterative refinement.

/// `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `a · b = p + e` exactly (barring underflow).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Running sum carried in twice the working precision.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    pub fn new(v: f64) -> Self {
        CompensatedSum { hi: v, lo: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let (s, e) = two_sum(self.hi, v);
        self.hi = s;
        self.lo += e;
    }

    /// Adds `a · b` without rounding the product first.
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.lo += e;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `Σ aᵢbᵢ` as accurate as if computed in twice the working precision.
pub fn dot2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = CompensatedSum::default();
    for (x, y) in a.iter().zip(b) {
        acc.add_product(*x, *y);
    }
    acc.value()
}

/// A vector stored as an unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleVec {
    pub hi: Vec<f64>,
    pub lo: Vec<f64>,
}

impl DoubleVec {
    pub fn from_hi(hi: Vec<f64>) -> Self {
        let lo = vec![0.0; hi.len()];
        DoubleVec { hi, lo }
    }

    /// Renormalizes each pair so that `hi` is the rounded value.
    pub fn normalized(hi: Vec<f64>, lo: Vec<f64>) -> Self {
        let mut out = DoubleVec { hi, lo };
        for (h, l) in out.hi.iter_mut().zip(out.lo.iter_mut()) {
            let (s, e) = two_sum(*h, *l);
            *h = s;
            *l = e;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.hi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hi.is_empty()
    }

    /// `self + c · v`, with the product and the sum kept exact up to the
    /// final renormalization.
    pub fn add_scaled(&self, c: f64, v: &[f64]) -> DoubleVec {
        let mut hi = Vec::with_capacity(self.len());
        let mut lo = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (p, pe) = two_prod(c, v[i]);
            let (s, se) = two_sum(self.hi[i], p);
            let (h, l) = two_sum(s, se + pe + self.lo[i]);
            hi.push(h);
            lo.push(l);
        }
        DoubleVec { hi, lo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sum_is_exact() {
        let (s, e) = two_sum(1.0, 1e-20);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-20);
    }

    #[test]
    fn two_prod_is_exact() {
        let a = 1.0 + f64::EPSILON;
        let (p, e) = two_prod(a, a);
        // (1+u)² = 1 + 2u + u²; the u² term is the rounding error.
        assert_eq!(p, 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(e, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn dot2_cancels_cleanly() {
        // Naive evaluation returns 0; the exact value is 1.
        let a = [1e16, 1.0, -1e16];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>(), 0.0);
        assert_eq!(dot2(&a, &b), 1.0);
    }

    #[test]
    fn double_vec_keeps_small_increments() {
        let v = DoubleVec::from_hi(vec![1.0]);
        let w = v.add_scaled(1e-20, &[1.0]).add_scaled(-1.0, &[1.0]);
        assert_eq!(w.hi[0] + w.lo[0], 1e-20);
    }
}
