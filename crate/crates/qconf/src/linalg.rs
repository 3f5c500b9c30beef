//! Small dense matrices over any `Scalar` field, plus the numeric pieces the
//! confluence checks need: characteristic polynomials, polynomial roots, and
//! null spaces at working precision. Sizes stay tiny (n <= 5), so everything
//! is straightforward Gauss elimination.

use rug::Float;

use crate::error::{Error, Result};
use crate::scalar::{ComplexAP, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T: Scalar> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> Mat<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        assert!(n > 0, "empty matrix");
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Mat { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &T {
        &self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn proto(&self) -> T {
        self.rows[0][0].zero_like()
    }

    pub fn zero(n: usize, proto: &T) -> Self {
        Mat {
            rows: vec![vec![proto.zero_like(); n]; n],
        }
    }

    pub fn identity(n: usize, proto: &T) -> Self {
        let mut m = Mat::zero(n, proto);
        for i in 0..n {
            m.rows[i][i] = proto.one_like();
        }
        m
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(&T) -> U) -> Mat<U> {
        Mat {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(&mut f).collect())
                .collect(),
        }
    }

    pub fn try_map<U: Scalar>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<Mat<U>> {
        let mut rows = Vec::with_capacity(self.n());
        for r in &self.rows {
            let mut row = Vec::with_capacity(r.len());
            for e in r {
                row.push(f(e)?);
            }
            rows.push(row);
        }
        Ok(Mat { rows })
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n(), other.n());
        self.map_indexed(|i, j, a| a.clone() + &other.rows[i][j])
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n(), other.n());
        self.map_indexed(|i, j, a| a.clone() - &other.rows[i][j])
    }

    fn map_indexed(&self, mut f: impl FnMut(usize, usize, &T) -> T) -> Self {
        Mat {
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| r.iter().enumerate().map(|(j, a)| f(i, j, a)).collect())
                .collect(),
        }
    }

    pub fn mul_scalar(&self, c: &T) -> Self {
        self.map(|a| a.clone() * c)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n();
        assert_eq!(n, other.n());
        let proto = self.proto();
        let mut out = Mat::zero(n, &proto);
        for i in 0..n {
            for j in 0..n {
                let mut s = proto.zero_like();
                for k in 0..n {
                    s = s + &(self.rows[i][k].clone() * &other.rows[k][j]);
                }
                out.rows[i][j] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(n, v.len());
        (0..n)
            .map(|i| {
                let mut s = self.proto();
                for k in 0..n {
                    s = s + &(self.rows[i][k].clone() * &v[k]);
                }
                s
            })
            .collect()
    }

    pub fn trace(&self) -> T {
        let mut s = self.proto();
        for i in 0..self.n() {
            s = s + &self.rows[i][i];
        }
        s
    }

    /// Gauss-Jordan inverse with first-nonzero pivoting; sizes are tiny and
    /// the numeric instances run at high precision, so no scaled pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n();
        let mut a = self.rows.clone();
        let mut b = Mat::identity(n, &self.proto()).rows;
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a[r][col].is_zero())
                .ok_or(Error::SingularMatrix)?;
            a.swap(col, pivot);
            b.swap(col, pivot);
            let inv = a[col][col].inv().map_err(|_| Error::SingularMatrix)?;
            for j in 0..n {
                a[col][j] = a[col][j].clone() * &inv;
                b[col][j] = b[col][j].clone() * &inv;
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = a[r][j].clone() - &(f.clone() * &a[col][j]);
                    b[r][j] = b[r][j].clone() - &(f.clone() * &b[col][j]);
                }
            }
        }
        Ok(Mat { rows: b })
    }

    /// Characteristic polynomial, ascending coefficients, monic of degree n.
    /// Faddeev-LeVerrier: only ring operations and division by integers, so
    /// it stays exact over exact scalars.
    pub fn char_poly(&self) -> Vec<T> {
        let n = self.n();
        let proto = self.proto();
        let mut c = vec![proto.zero_like(); n + 1];
        c[n] = proto.one_like();
        let mut m = Mat::zero(n, &proto);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            m = self.mul(&m);
            for i in 0..n {
                m.rows[i][i] = m.rows[i][i].clone() + &c[n - k + 1];
            }
            let t = self.mul(&m).trace();
            c[n - k] = -(t.div_by(&proto.from_i64(k as i64)).expect("k != 0"));
        }
        c
    }

    pub fn det(&self) -> T {
        let c0 = self.char_poly().swap_remove(0);
        if self.n() % 2 == 1 {
            -c0
        } else {
            c0
        }
    }
}

impl Mat<ComplexAP> {
    pub fn max_abs(&self) -> Float {
        let mut best = Float::with_val(self.rows[0][0].prec(), 0);
        for r in &self.rows {
            for e in r {
                let a = e.abs();
                if a > best {
                    best = a;
                }
            }
        }
        best
    }

    pub fn dist(&self, other: &Self) -> Float {
        assert_eq!(self.n(), other.n());
        let mut best = Float::with_val(self.rows[0][0].prec(), 0);
        for (r1, r2) in self.rows.iter().zip(&other.rows) {
            for (a, b) in r1.iter().zip(r2) {
                let d = a.dist(b);
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    /// Eigenvalues via the characteristic polynomial.
    pub fn eigenvalues(&self) -> Result<Vec<ComplexAP>> {
        polynomial_roots(&self.char_poly())
    }

    /// Basis of the null space, treating entries below `tol` as zero during
    /// elimination. Vectors come back in reduced-echelon form.
    pub fn null_space(&self, tol: f64) -> Vec<Vec<ComplexAP>> {
        let n = self.n();
        let prec = self.rows[0][0].prec();
        let mut a = self.rows.clone();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut free_cols: Vec<usize> = Vec::new();
        let mut row = 0usize;
        for col in 0..n {
            let mut best = row;
            for r in row..n {
                if a[r][col].abs() > a[best][col].abs() {
                    best = r;
                }
            }
            if row >= n || a[best][col].abs().to_f64() < tol {
                free_cols.push(col);
                continue;
            }
            a.swap(row, best);
            let inv = a[row][col].recip().expect("pivot above tolerance");
            for j in 0..n {
                a[row][j] = a[row][j].clone() * &inv;
            }
            for r in 0..n {
                if r == row {
                    continue;
                }
                let f = a[r][col].clone();
                if f.abs().to_f64() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[r][j] = a[r][j].clone() - &(f.clone() * &a[row][j]);
                }
            }
            pivots.push((row, col));
            row += 1;
        }
        free_cols
            .iter()
            .map(|&f| {
                let mut v = vec![ComplexAP::zero(prec); n];
                v[f] = ComplexAP::one(prec);
                for &(r, c) in &pivots {
                    v[c] = -a[r][f].clone();
                }
                v
            })
            .collect()
    }
}

/// Roots of a polynomial with ComplexAP coefficients (ascending order) by
/// Durand-Kerner iteration. The leading coefficient must be non-negligible.
pub fn polynomial_roots(coeffs: &[ComplexAP]) -> Result<Vec<ComplexAP>> {
    let deg = coeffs.len() - 1;
    let lead = &coeffs[deg];
    if Scalar::is_zero(lead) {
        return Err(Error::LeadingCoefficientVanishes);
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let prec = lead.prec();
    let lead_inv = lead.recip()?;
    let monic: Vec<ComplexAP> = coeffs.iter().map(|c| c.clone() * &lead_inv).collect();
    let eval = |x: &ComplexAP| {
        let mut v = ComplexAP::zero(prec);
        for c in monic.iter().rev() {
            v = v * x + c;
        }
        v
    };
    let seed = ComplexAP::from_f64(prec, 0.4, 0.9);
    let mut xs: Vec<ComplexAP> = Vec::with_capacity(deg);
    let mut p = ComplexAP::one(prec);
    for _ in 0..deg {
        p = p * &seed;
        xs.push(p.clone());
    }
    let stop = Float::with_val(prec, 1e-40);
    for _ in 0..2000 {
        let mut max_step = Float::with_val(prec, 0);
        for i in 0..deg {
            let mut den = ComplexAP::one(prec);
            for j in 0..deg {
                if j != i {
                    let d = xs[i].clone() - &xs[j];
                    den = den * &d;
                }
            }
            let den_inv = match den.recip() {
                Ok(v) => v,
                Err(_) => {
                    // exact collision inside a root cluster: nudge apart and
                    // force another sweep
                    let mag = Float::with_val(prec, 1e-25) * &(Float::with_val(prec, 1) + &xs[i].abs());
                    let bump = ComplexAP::new(prec, mag.clone(), mag);
                    xs[i] = xs[i].clone() + &bump;
                    max_step = Float::with_val(prec, 1);
                    continue;
                }
            };
            let step = eval(&xs[i]) * &den_inv;
            let sz = step.abs();
            if sz > max_step {
                max_step = sz;
            }
            xs[i] = xs[i].clone() - &step;
        }
        if max_step < stop {
            return Ok(xs);
        }
    }
    // multiple roots stall the sweep at the rounding floor; accept the
    // cluster if every residual is negligible at this precision
    let mut scale = Float::with_val(prec, 1);
    for c in &monic {
        let a = c.abs();
        if a > scale {
            scale = a;
        }
    }
    let mut worst = Float::with_val(prec, 0);
    for x in &xs {
        let r = eval(x).abs();
        if r > worst {
            worst = r;
        }
    }
    let accept = (Float::with_val(prec, 1) >> (prec / 2)) * &scale;
    if worst < accept {
        return Ok(xs);
    }
    Err(Error::NoConvergence(
        "root iteration did not stabilize".into(),
    ))
}
