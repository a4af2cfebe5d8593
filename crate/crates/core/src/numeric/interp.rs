/// Piecewise cubic Hermite interpolant through `(t_k, f_k, f'_k)`.
///
/// Outside the node range the table extrapolates linearly from the nearest
/// end using the stored end slope.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    t: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
}

impl HermiteTable {
    /// Nodes must be strictly increasing and at least two.
    pub fn new(t: Vec<f64>, f: Vec<f64>, df: Vec<f64>) -> Self {
        assert!(t.len() >= 2, "need at least two nodes");
        assert!(t.len() == f.len() && t.len() == df.len(), "node arrays differ in length");
        assert!(t.windows(2).all(|w| w[0] < w[1]), "nodes must be strictly increasing");
        Self { t, f, df }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn first(&self) -> f64 {
        self.t[0]
    }

    pub fn last(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        match self.t.binary_search_by(|probe| probe.total_cmp(&t)) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.t.len() - 2),
        }
    }

    /// Value and first derivative at `t`.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        if t <= self.t[0] {
            return (self.f[0] + self.df[0] * (t - self.t[0]), self.df[0]);
        }
        if t >= self.t[n - 1] {
            return (self.f[n - 1] + self.df[n - 1] * (t - self.t[n - 1]), self.df[n - 1]);
        }
        let i = self.segment(t);
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let (m0, m1) = (self.df[i] * h, self.df[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * f0 + h10 * m0 + h01 * f1 + h11 * m1;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let deriv = (d00 * f0 + d10 * m0 + d01 * f1 + d11 * m1) / h;
        (value, deriv)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let p = |t: f64| 2.0 * t * t * t - t * t + 3.0 * t - 5.0;
        let dp = |t: f64| 6.0 * t * t - 2.0 * t + 3.0;
        let t: Vec<f64> = vec![-1.0, -0.2, 0.5, 2.0];
        let table = HermiteTable::new(
            t.clone(),
            t.iter().map(|&x| p(x)).collect(),
            t.iter().map(|&x| dp(x)).collect(),
        );
        for k in 0..=60 {
            let x = -1.0 + 3.0 * k as f64 / 60.0;
            let (v, d) = table.eval_with_derivative(x);
            assert!((v - p(x)).abs() < 1e-12);
            assert!((d - dp(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn extrapolates_linearly() {
        let table = HermiteTable::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 2.0]);
        assert_eq!(table.eval(3.0), 1.0 + 2.0 * 2.0);
        assert_eq!(table.eval(-1.0), -1.0);
    }
}
