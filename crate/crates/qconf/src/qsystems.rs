//! Matrix q-difference systems sigma X = A(Q) X, gauge transforms, argument
//! pullbacks, regular-singularity and non-resonance predicates, and the
//! numeric four-condition confluence check for families A_{q0^t} as t -> 0.


use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::qop::{companion_qdiff, OpBasis, PolyQ, QDiffOp, RatQ};
use crate::scalar::{ComplexAP, Scalar};

/// A linear q-difference system sigma X(Q) = A(Q) X(Q).
#[derive(Debug, Clone, PartialEq)]
pub struct QSystem<S: Scalar> {
    pub q: S,
    pub a: Mat<RatQ<S>>,
}

impl<S: Scalar> QSystem<S> {
    pub fn new(q: S, a: Mat<RatQ<S>>) -> Self {
        assert!(
            !Scalar::is_zero(&a.det()),
            "system matrix must not be identically singular"
        );
        QSystem { q, a }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn eval_at(&self, qq: &S) -> Result<Mat<S>> {
        self.a.try_map(|e| e.eval(qq))
    }
}

/// Invertible gauge matrix F(Q); the action on systems is
/// A |-> F(qQ) A(Q) F(Q)^{-1}.
#[derive(Debug, Clone)]
pub struct GaugeTransform<S: Scalar> {
    pub f: Mat<RatQ<S>>,
}

impl<S: Scalar> GaugeTransform<S> {
    pub fn new(f: Mat<RatQ<S>>) -> Result<Self> {
        if Scalar::is_zero(&f.det()) {
            return Err(Error::SingularGauge);
        }
        Ok(GaugeTransform { f })
    }
}

/// Applies a gauge transform: (sigma F) A F^{-1}.
pub fn gauge<S: Scalar>(sys: &QSystem<S>, f: &GaugeTransform<S>) -> Result<QSystem<S>> {
    let shifted = f.f.map(|e| e.scale_arg(&sys.q));
    let finv = f.f.inverse().map_err(|_| Error::SingularGauge)?;
    Ok(QSystem {
        q: sys.q.clone(),
        a: shifted.mul(&sys.a).mul(&finv),
    })
}

/// Rescales the argument: A(Q) -> A(Q/c).
pub fn pullback_system<S: Scalar>(sys: &QSystem<S>, c: &S) -> Result<QSystem<S>> {
    let cinv = c.inv().map_err(|_| Error::ZeroScale)?;
    Ok(QSystem {
        q: sys.q.clone(),
        a: sys.a.map(|e| e.scale_arg(&cinv)),
    })
}

/// The sigma-system satisfied by the delta-iterate vector of a delta-form
/// scalar operator: A = Id + (q-1) B with B the operator's companion. For
/// this presentation (A - Id)/(q-1) recovers B, which is the quantity with a
/// finite q -> 1 limit.
pub fn sigma_system_from_delta_op<S: Scalar>(op: &QDiffOp<S>) -> Result<QSystem<S>> {
    assert!(op.basis == OpBasis::Delta, "expects a delta-form operator");
    let b = companion_qdiff(op)?;
    let qm1 = RatQ::from_poly(PolyQ::constant(op.q.clone() - &op.q.one_like()));
    let a = Mat::identity(b.n(), &b.entry(0, 0).zero_like()).add(&b.mul_scalar(&qm1));
    Ok(QSystem {
        q: op.q.clone(),
        a,
    })
}

/// Whether A can be evaluated at Q = 0 and is invertible there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularSingularReport {
    pub evaluable_at_zero: bool,
    pub invertible_at_zero: bool,
}

impl RegularSingularReport {
    pub fn holds(&self) -> bool {
        self.evaluable_at_zero && self.invertible_at_zero
    }
}

pub fn is_regular_singular_witness<S: Scalar>(sys: &QSystem<S>) -> RegularSingularReport {
    let zero = sys.q.zero_like();
    match sys.eval_at(&zero) {
        Err(_) => RegularSingularReport {
            evaluable_at_zero: false,
            invertible_at_zero: false,
        },
        Ok(a0) => RegularSingularReport {
            evaluable_at_zero: true,
            invertible_at_zero: !Scalar::is_zero(&a0.det()),
        },
    }
}

/// Multiplicative non-resonance: no ratio of distinct eigenvalues lies within
/// `tol` of q^k for |k| <= k_max.
pub fn is_nonresonant(eigs: &[ComplexAP], q: &ComplexAP, k_max: i64, tol: f64) -> bool {
    for (i, a) in eigs.iter().enumerate() {
        for (j, b) in eigs.iter().enumerate() {
            if i == j {
                continue;
            }
            let ratio = match b.recip() {
                Ok(binv) => a.clone() * &binv,
                Err(_) => return false,
            };
            for k in -k_max..=k_max {
                let qk = match q.pow_i64(k) {
                    Ok(v) => v,
                    Err(_) => return false,
                };
                if ratio.dist(&qk).to_f64() < tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Additive non-resonance for differential exponents: no difference of
/// distinct eigenvalues lies within `tol` of a nonzero integer of magnitude
/// <= k_max.
pub fn is_nonresonant_additive(eigs: &[ComplexAP], k_max: i64, tol: f64) -> bool {
    for (i, a) in eigs.iter().enumerate() {
        for (j, b) in eigs.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = a.clone() - b;
            for k in 1..=k_max {
                let kc = a.from_i64(k);
                if d.dist(&kc).to_f64() < tol || d.dist(&(-kc)).to_f64() < tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Grid, sample, and tolerance inputs of the confluence check.
pub struct SauloySetup<'a> {
    pub q0: ComplexAP,
    /// decreasing t grid; q runs through q0^t
    pub ts: &'a [f64],
    /// Q points for the sample-based convergence of B
    pub samples: &'a [ComplexAP],
    /// declared pole locations of the family in the Q plane
    pub poles: &'a [ComplexAP],
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct SauloyReport {
    pub ts: Vec<f64>,
    /// successive-difference norms of B at each sample point (outer: sample)
    pub sample_diffs: Vec<Vec<f64>>,
    pub b_limit_at_samples: Vec<Mat<ComplexAP>>,
    pub b_limit_at_zero: Mat<ComplexAP>,
    pub regular_singular: bool,
    pub nonresonant: bool,
    /// eigenvalues of the limit B(0), sorted by (re, im)
    pub exponents: Vec<ComplexAP>,
    /// successive-difference norms of the diagonalizing transforms at Q = 0
    pub transform_diffs: Vec<f64>,
    pub transform_limit: Mat<ComplexAP>,
    pub passed: bool,
}

const SPIRAL_KMAX: i64 = 50;
const SPIRAL_TOL: f64 = 1e-9;

fn on_common_spiral(a: &ComplexAP, b: &ComplexAP, q0: &ComplexAP) -> bool {
    let ratio = match b.recip() {
        Ok(binv) => a.clone() * &binv,
        Err(_) => return false,
    };
    for k in -SPIRAL_KMAX..=SPIRAL_KMAX {
        if let Ok(qk) = q0.pow_i64(k) {
            if ratio.dist(&qk).to_f64() < SPIRAL_TOL {
                return true;
            }
        }
    }
    false
}

fn tail_converges(diffs: &[f64], tol: f64) -> bool {
    let m = diffs.len();
    if m == 0 {
        return false;
    }
    if diffs[m - 1] >= tol {
        return false;
    }
    let floor = tol * 1e-6;
    m < 2
        || (diffs[m - 2] >= diffs[m - 1])
        || (diffs[m - 2] < floor && diffs[m - 1] < floor)
}

fn sorted_eigen_order(eigs: &[ComplexAP]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..eigs.len()).collect();
    idx.sort_by(|&i, &j| {
        let (ri, ii) = (eigs[i].re().to_f64(), eigs[i].im().to_f64());
        let (rj, ij) = (eigs[j].re().to_f64(), eigs[j].im().to_f64());
        ri.partial_cmp(&rj)
            .unwrap()
            .then(ii.partial_cmp(&ij).unwrap())
    });
    idx
}

/// Sorted eigenvalues and the column matrix of normalized eigenvectors of a
/// small numeric matrix; errors on (near-)coinciding eigenvalues.
pub fn eigen_transform(m: &Mat<ComplexAP>) -> Result<(Vec<ComplexAP>, Mat<ComplexAP>)> {
    let n = m.n();
    let eigs = m.eigenvalues()?;
    let order = sorted_eigen_order(&eigs);
    let sorted: Vec<ComplexAP> = order.iter().map(|&i| eigs[i].clone()).collect();
    let scale = 1.0 + m.max_abs().to_f64();
    for i in 0..n {
        for j in (i + 1)..n {
            if sorted[i].dist(&sorted[j]).to_f64() < 1e-8 * scale {
                return Err(Error::JordanCaseUnsupported(format!(
                    "eigenvalues {i} and {j} coincide within tolerance"
                )));
            }
        }
    }
    let mut columns: Vec<Vec<ComplexAP>> = Vec::with_capacity(n);
    for l in &sorted {
        let shifted = m.sub(&Mat::identity(n, &m.proto()).mul_scalar(l));
        let ns = shifted.null_space(1e-25 * scale);
        if ns.len() != 1 {
            return Err(Error::JordanCaseUnsupported(format!(
                "eigenspace dimension {} for a simple eigenvalue",
                ns.len()
            )));
        }
        let mut v = ns.into_iter().next().unwrap();
        let vmax = v
            .iter()
            .map(|e| e.abs().to_f64())
            .fold(0.0f64, f64::max);
        let lead = v
            .iter()
            .position(|e| e.abs().to_f64() > 0.5 * vmax)
            .expect("null space vector is nonzero");
        let linv = v[lead].recip()?;
        for e in v.iter_mut() {
            *e = e.clone() * &linv;
        }
        columns.push(v);
    }
    let rows = (0..n)
        .map(|i| (0..n).map(|j| columns[j][i].clone()).collect())
        .collect();
    Ok((sorted, Mat::from_rows(rows)))
}

/// Runs the four-condition confluence check on a family of systems along
/// q = q0^t: (i) declared poles pairwise off common q0-spirals and samples
/// off pole spirals, (ii) B = (A - Id)/(q - 1) converges at every sample,
/// (iii) the limit is regular singular and non-resonant at Q = 0, (iv) the
/// diagonalizing transforms of B(0) converge. The fitted limits are the
/// values at the smallest t.
pub fn sauloy_confluence_check(
    family: impl Fn(&ComplexAP) -> Result<QSystem<ComplexAP>>,
    setup: &SauloySetup,
) -> Result<SauloyReport> {
    assert!(setup.ts.len() >= 2, "need at least two grid points");
    assert!(
        setup.ts.windows(2).all(|w| w[1] < w[0]),
        "t grid must strictly decrease"
    );
    let prec = setup.q0.prec();

    // (i) pole spirals
    for (i, p) in setup.poles.iter().enumerate() {
        for (j, r) in setup.poles.iter().enumerate().skip(i + 1) {
            if on_common_spiral(p, r, &setup.q0) {
                return Err(Error::PolesOnCommonSpiral(format!(
                    "poles {i} and {j} lie on one spiral"
                )));
            }
        }
        for (s, qq) in setup.samples.iter().enumerate() {
            if on_common_spiral(qq, p, &setup.q0) {
                return Err(Error::PolesOnCommonSpiral(format!(
                    "sample {s} lies on the spiral of pole {i}"
                )));
            }
        }
    }

    // B at every sample and at Q = 0, for each t
    let zero_q = ComplexAP::zero(prec);
    let mut eval_points: Vec<ComplexAP> = setup.samples.to_vec();
    eval_points.push(zero_q);
    let mut b_per_t: Vec<Vec<Mat<ComplexAP>>> = Vec::with_capacity(setup.ts.len());
    for &t in setup.ts {
        let qt = setup
            .q0
            .pow(&ComplexAP::from_f64(prec, t, 0.0))?;
        let sys = family(&qt)?;
        assert!(
            sys.q.approx_eq(&qt, 1e-12),
            "family must be evaluated at the supplied q"
        );
        let qm1_inv = (qt.clone() - &ComplexAP::one(prec)).recip()?;
        let id = Mat::identity(sys.n(), &ComplexAP::zero(prec));
        let mut at_points = Vec::with_capacity(eval_points.len());
        for p in &eval_points {
            let a = sys.eval_at(p)?;
            at_points.push(a.sub(&id).mul_scalar(&qm1_inv));
        }
        b_per_t.push(at_points);
    }

    // (ii) sample convergence by successive differences
    let n_samples = setup.samples.len();
    let mut sample_diffs = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let diffs: Vec<f64> = b_per_t
            .windows(2)
            .map(|w| w[0][s].dist(&w[1][s]).to_f64())
            .collect();
        if !tail_converges(&diffs, setup.tol) {
            return Err(Error::NoConvergence(format!(
                "B does not stabilize at sample {s}: {diffs:?}"
            )));
        }
        sample_diffs.push(diffs);
    }
    let last = b_per_t.last().unwrap();
    let b_limit_at_samples: Vec<Mat<ComplexAP>> = last[..n_samples].to_vec();
    let b_limit_at_zero = last[n_samples].clone();

    // the same stabilization must hold at Q = 0 for (iii) and (iv)
    let zero_diffs: Vec<f64> = b_per_t
        .windows(2)
        .map(|w| w[0][n_samples].dist(&w[1][n_samples]).to_f64())
        .collect();
    if !tail_converges(&zero_diffs, setup.tol) {
        return Err(Error::NoConvergence(format!(
            "B(0) does not stabilize: {zero_diffs:?}"
        )));
    }

    // (iii) structure of the limit at Q = 0
    let (exponents, transform_limit) = eigen_transform(&b_limit_at_zero)?;
    let regular_singular = true; // B evaluated at Q = 0 just fine above
    let nonresonant = is_nonresonant_additive(&exponents, SPIRAL_KMAX, SPIRAL_TOL);

    // (iv) convergence of the diagonalizing transforms at Q = 0
    let mut transforms = Vec::with_capacity(setup.ts.len());
    for per_t in &b_per_t {
        let (_, p) = eigen_transform(&per_t[n_samples])?;
        transforms.push(p);
    }
    let transform_diffs: Vec<f64> = transforms
        .windows(2)
        .map(|w| w[0].dist(&w[1]).to_f64())
        .collect();
    if !tail_converges(&transform_diffs, setup.tol) {
        return Err(Error::NoConvergence(format!(
            "diagonalizing transforms do not stabilize: {transform_diffs:?}"
        )));
    }

    let passed = regular_singular && nonresonant;
    Ok(SauloyReport {
        ts: setup.ts.to_vec(),
        sample_diffs,
        b_limit_at_samples,
        b_limit_at_zero,
        regular_singular,
        nonresonant,
        exponents,
        transform_diffs,
        transform_limit,
        passed,
    })
}
