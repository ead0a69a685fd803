//! Pointwise algebra of the Weyl operator acting on antisymmetric index
//! pairs: chain powers, scalar invariants, characteristic coefficients via
//! the Newton recursion, the nondegeneracy test, the Cayley–Hamilton
//! residual, and the closed-form solve of `C·V = H`.
//!
//! Everything here works on a single numeric [`WeylPoint`]; no symbolic
//! expressions are involved.

use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use crate::tensor::{
    einsum, einsum_scalar, generalized_delta, max_abs_residual, PointMetric, ResidualReport,
    Tensor, Variance,
};

/// Variance pattern of the mixed Weyl tensor `C^{ab}_{cd}`.
pub const MIXED_PAIR: [Variance; 4] = [
    Variance::Up,
    Variance::Up,
    Variance::Down,
    Variance::Down,
];

/// Relative tolerance for the structural invariants of a float-mode Weyl
/// tensor (antisymmetries, trace-freeness, pair interchange, first Bianchi).
pub const WEYL_INVARIANT_TOL: f64 = 1e-10;

/// A numeric Weyl tensor at one point together with the metric there.
///
/// Construction validates the full set of algebraic Weyl symmetries.  Chain
/// powers are memoised; the cache is guarded by a lock so shared references
/// can be used from several threads.
pub struct WeylPoint {
    n: usize,
    bivector_count: usize,
    metric: PointMetric,
    weyl: Tensor,
    sample_seed: Option<u64>,
    chains: RwLock<Vec<Tensor>>,
}

impl WeylPoint {
    /// Validate the algebraic symmetries of `weyl` against `metric` and wrap
    /// them up.  `weyl` must be the mixed form `C^{ab}_{cd}`.
    pub fn new(metric: PointMetric, weyl: Tensor) -> Result<Self> {
        let n = weyl.dim();
        if weyl.rank() != 4 || weyl.variance() != MIXED_PAIR {
            return Err(Error::Variance(
                "Weyl tensor must be C^{ab}_{cd} (up, up, down, down)".into(),
            ));
        }
        if metric.dim() != n {
            return Err(Error::Shape("metric dimension mismatch".into()));
        }
        if metric.lower.mode() != weyl.mode() {
            return Err(Error::ModeMismatch);
        }
        if n < 3 {
            return Err(Error::Dimension(n));
        }

        // Residuals are judged relative to the magnitude of the form they
        // are computed on: the mixed and all-lower forms differ by two
        // powers of the metric, which a steep conformal factor can make
        // arbitrarily large or small.
        let check = |name: &str, worst: &Scalar, scale: f64| -> Result<()> {
            let ok = match worst {
                Scalar::Exact(_) => worst.is_zero(),
                Scalar::Float(v) => (v.abs() / scale.max(f64::MIN_POSITIVE)) < WEYL_INVARIANT_TOL,
            };
            if ok {
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "Weyl symmetry violated: {name} residual {worst:?}"
                )))
            }
        };
        let mixed_scale = weyl.max_abs().abs_f64().max(1.0);

        // Pair antisymmetries of the mixed form.
        let asym_up = weyl.add(&weyl.transpose(&[1, 0, 2, 3])?)?;
        check("upper-pair antisymmetry", &asym_up.max_abs(), mixed_scale)?;
        let asym_dn = weyl.add(&weyl.transpose(&[0, 1, 3, 2])?)?;
        check("lower-pair antisymmetry", &asym_dn.max_abs(), mixed_scale)?;

        // All four mixed single traces vanish.
        for spec in ["abad->bd", "abca->bc", "abbd->ad", "abcb->ac"] {
            let tr = einsum(spec, &[&weyl], &[Variance::Up, Variance::Down])?;
            check("trace-freeness", &tr.max_abs(), mixed_scale)?;
        }

        // Pair interchange and first Bianchi hold for the all-lower form.
        let low = einsum(
            "efcd,ea,fb->abcd",
            &[&weyl, &metric.lower, &metric.lower],
            &[Variance::Down; 4],
        )?;
        let low_scale = low.max_abs().abs_f64().max(1.0);
        let swap = low.sub(&low.transpose(&[2, 3, 0, 1])?)?;
        check("pair-interchange symmetry", &swap.max_abs(), low_scale)?;
        let bianchi = low
            .add(&low.transpose(&[0, 2, 3, 1])?)?
            .add(&low.transpose(&[0, 3, 1, 2])?)?;
        check("first Bianchi identity", &bianchi.max_abs(), low_scale)?;

        Ok(WeylPoint {
            n,
            bivector_count: n * (n - 1) / 2,
            metric,
            weyl,
            sample_seed: None,
            chains: RwLock::new(Vec::new()),
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Seed used by the random generator that produced this point, when it
    /// came from one; carried through for report provenance.
    pub fn sample_seed(&self) -> Option<u64> {
        self.sample_seed
    }

    pub(crate) fn with_sample_seed(mut self, seed: u64) -> Self {
        self.sample_seed = Some(seed);
        self
    }

    /// `N = n(n-1)/2`, the number of independent antisymmetric index pairs;
    /// also the degree of the characteristic polynomial.
    pub fn bivector_count(&self) -> usize {
        self.bivector_count
    }

    pub fn metric(&self) -> &PointMetric {
        &self.metric
    }

    pub fn weyl(&self) -> &Tensor {
        &self.weyl
    }

    pub fn mode(&self) -> Mode {
        self.weyl.mode()
    }

    /// `p`-th chain power: `chain(1) = C`, and
    /// `chain(p+1)^{ab}_{cd} = chain(p)^{ab}_{ij} C^{ij}_{cd}`.
    pub fn chain(&self, p: usize) -> Tensor {
        assert!(p >= 1, "chain order must be at least 1");
        {
            let cache = self.chains.read().expect("chain cache poisoned");
            if cache.len() >= p {
                return cache[p - 1].clone();
            }
        }
        let mut cache = self.chains.write().expect("chain cache poisoned");
        while cache.len() < p {
            let next = match cache.last() {
                None => self.weyl.clone(),
                Some(prev) => einsum("abij,ijcd->abcd", &[prev, &self.weyl], &MIXED_PAIR)
                    .expect("chain contraction"),
            };
            cache.push(next);
        }
        cache[p - 1].clone()
    }

    /// Scalar invariant `C̄_p = chain(p)^{ab}_{ab}`.
    pub fn trace_invariant(&self, p: usize) -> Scalar {
        einsum_scalar("abab", &[&self.chain(p)]).expect("chain trace")
    }
}

/// Scalar invariants `C̄_p` and characteristic coefficients `c_k` of a
/// [`WeylPoint`].  `coefficients` is empty when only traces were requested.
#[derive(Clone, Debug)]
pub struct InvariantSet {
    mode: Mode,
    traces: Vec<Scalar>,
    coefficients: Vec<Scalar>,
}

impl InvariantSet {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `C̄_p` for `1 <= p <= max_trace_order()`.
    pub fn trace(&self, p: usize) -> &Scalar {
        &self.traces[p - 1]
    }

    pub fn max_trace_order(&self) -> usize {
        self.traces.len()
    }

    pub fn traces(&self) -> &[Scalar] {
        &self.traces
    }

    /// `c_k` for `0 <= k <= coefficients().len() - 1`.
    pub fn coefficient(&self, k: usize) -> &Scalar {
        &self.coefficients[k]
    }

    pub fn coefficients(&self) -> &[Scalar] {
        &self.coefficients
    }

    pub fn has_coefficients(&self) -> bool {
        !self.coefficients.is_empty()
    }
}

/// Scalar invariants `C̄_p` for `p = 1..=max_p` (no characteristic
/// coefficients).
pub fn invariants(w: &WeylPoint, max_p: usize) -> InvariantSet {
    assert!(max_p >= 1);
    let traces: Vec<Scalar> = (1..=max_p).map(|p| w.trace_invariant(p)).collect();
    InvariantSet {
        mode: w.mode(),
        traces,
        coefficients: Vec::new(),
    }
}

/// Traces up to order `N` plus the characteristic coefficients `c_0..c_N`
/// from the Newton recursion `k·c_k = -Σ_{i=1..k} C̄_i c_{k-i}` (with
/// `C̄_1 = 0`).
pub fn characteristic_coefficients(w: &WeylPoint) -> InvariantSet {
    characteristic_coefficients_up_to(w, w.bivector_count())
}

/// Newton recursion truncated at order `min(max_k, N)`; avoids computing
/// high chain powers when only the low coefficients are needed.
pub fn characteristic_coefficients_up_to(w: &WeylPoint, max_k: usize) -> InvariantSet {
    let nb = w.bivector_count().min(max_k.max(1));
    let mode = w.mode();
    let mut inv = invariants(w, nb);
    let mut coeffs = Vec::with_capacity(nb + 1);
    coeffs.push(Scalar::one(mode));
    for k in 1..=nb {
        let mut s = Scalar::zero(mode);
        for i in 2..=k {
            s = s.add(&inv.trace(i).mul(&coeffs[k - i]));
        }
        let ck = s
            .neg()
            .div(&Scalar::from_int(k as i64, mode))
            .expect("k is a positive integer");
        coeffs.push(ck);
    }
    inv.coefficients = coeffs;
    inv
}

/// Outcome of the Weyl nondegeneracy test `c_N != 0`.
#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    pub nondegenerate: bool,
    /// The determinant surrogate `c_N`.
    pub c_n: Scalar,
    /// Float mode only: per-component magnitude scale `s` used for the
    /// threshold (`c_N` scales like the `N`-th power of the Weyl magnitude).
    pub scale: f64,
    /// Float mode only: the threshold `tol * s^N` that `|c_N|` must exceed.
    pub threshold: f64,
}

/// Nondegeneracy test using freshly computed coefficients.
pub fn nondegeneracy(w: &WeylPoint, tol: f64) -> NondegeneracyReport {
    nondegeneracy_with(w, &characteristic_coefficients(w), tol)
}

/// Nondegeneracy test given precomputed coefficients: in exact mode
/// `c_N != 0`; in float mode `|c_N| > tol·s^N` with `s = sqrt(C̄_2/N)` when
/// `C̄_2 > 0`, else `s` = the largest Weyl component magnitude.
pub fn nondegeneracy_with(w: &WeylPoint, inv: &InvariantSet, tol: f64) -> NondegeneracyReport {
    let nb = w.bivector_count();
    assert!(inv.has_coefficients(), "coefficients not computed");
    let c_n = inv.coefficient(nb).clone();
    match w.mode() {
        Mode::Exact => NondegeneracyReport {
            nondegenerate: !c_n.is_zero(),
            c_n,
            scale: 0.0,
            threshold: 0.0,
        },
        Mode::Float => {
            let c2 = inv.trace(2).to_f64();
            let scale = if c2 > 0.0 {
                (c2 / nb as f64).sqrt()
            } else {
                w.weyl().max_abs().abs_f64()
            };
            let threshold = tol * scale.powi(nb as i32);
            NondegeneracyReport {
                nondegenerate: c_n.abs_f64() > threshold,
                c_n,
                scale,
                threshold,
            }
        }
    }
}

/// Antisymmetrised pair of Kronecker deltas
/// `δ^a_[c δ^b_d] = (δ^a_c δ^b_d - δ^a_d δ^b_c)/2`, the identity element of
/// the chain algebra.
pub fn delta_pair(n: usize, mode: Mode) -> Tensor {
    let half = Scalar::one(mode)
        .div(&Scalar::from_int(2, mode))
        .expect("2 != 0");
    generalized_delta(n, 2, mode)
        .expect("delta order 2")
        .scale(&half)
}

/// Residual of the Cayley–Hamilton identity for the Weyl operator:
/// `Σ_{k=0..N-1} c_k chain(N-k) + c_N δ^a_[c δ^b_d] = 0`.
pub fn cayley_hamilton_residual(w: &WeylPoint) -> Result<ResidualReport> {
    cayley_hamilton_residual_with(w, &characteristic_coefficients(w))
}

/// Same as [`cayley_hamilton_residual`] with precomputed coefficients.
pub fn cayley_hamilton_residual_with(
    w: &WeylPoint,
    inv: &InvariantSet,
) -> Result<ResidualReport> {
    let nb = w.bivector_count();
    let mode = w.mode();
    let mut lhs = Tensor::zeros(w.dimension(), &MIXED_PAIR, mode);
    for k in 0..nb {
        let ck = inv.coefficient(k);
        if ck.is_zero() {
            continue;
        }
        lhs = lhs.add(&w.chain(nb - k).scale(ck))?;
    }
    let rhs = delta_pair(w.dimension(), mode).scale(&inv.coefficient(nb).neg());
    max_abs_residual(&lhs, &rhs)
}

/// Closed-form solution of the pointwise linear system
/// `C^{ab}_{cd} V^d = H^{ab}_c` for nondegenerate Weyl:
///
/// `V^a = 2/((n-1) c_N) Σ_{k in {0,2,3,..,N-2}} c_k chain(N-1-k)^{ab}_{ij} H^{ij}_b`.
pub fn solve_weyl_linear(w: &WeylPoint, h: &Tensor) -> Result<Tensor> {
    let n = w.dimension();
    let mode = w.mode();
    if h.rank() != 3
        || h.variance() != [Variance::Up, Variance::Up, Variance::Down]
        || h.dim() != n
    {
        return Err(Error::Shape(
            "right side must be H^{ab}_c (up, up, down)".into(),
        ));
    }
    if h.mode() != mode {
        return Err(Error::ModeMismatch);
    }
    let asym = h.add(&h.transpose(&[1, 0, 2])?)?;
    let worst = asym.max_abs();
    let asym_ok = match &worst {
        Scalar::Exact(_) => worst.is_zero(),
        Scalar::Float(v) => v.abs() / h.max_abs().abs_f64().max(1.0) < 1e-9,
    };
    if !asym_ok {
        return Err(Error::Invalid(
            "right side H^{ab}_c must be antisymmetric in its upper pair".into(),
        ));
    }

    let nb = w.bivector_count();
    let inv = characteristic_coefficients(w);
    let c_n = inv.coefficient(nb);
    if c_n.is_zero() {
        return Err(Error::DegenerateWeyl(
            "characteristic coefficient c_N vanishes; the linear system has no unique solution"
                .into(),
        ));
    }

    let mut acc = Tensor::zeros(n, &[Variance::Up], mode);
    for k in (0..=nb - 2).filter(|&k| k != 1) {
        let ck = inv.coefficient(k);
        if ck.is_zero() {
            continue;
        }
        let term = einsum("abij,ijb->a", &[&w.chain(nb - 1 - k), h], &[Variance::Up])?;
        acc = acc.add(&term.scale(ck))?;
    }
    let factor = Scalar::from_int(2, mode).div(&Scalar::from_int((n - 1) as i64, mode).mul(c_n))?;
    Ok(acc.scale(&factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identities::{random_weyl, WeylSampleConfig};
    use num_rational::BigRational;

    fn sample(n: usize, seed: u64) -> WeylPoint {
        random_weyl(&WeylSampleConfig::lorentzian(n, seed, Mode::Exact)).expect("sample")
    }

    #[test]
    fn chain_composition_matches_direct_power() {
        let w = sample(4, 1);
        let composed = einsum(
            "abij,ijcd->abcd",
            &[&w.chain(2), &w.chain(2)],
            &MIXED_PAIR,
        )
        .unwrap();
        let r = max_abs_residual(&composed, &w.chain(4)).unwrap();
        assert!(r.absolute.is_zero());
    }

    #[test]
    fn first_trace_vanishes_and_second_matches_brute_force() {
        let w = sample(4, 2);
        assert!(w.trace_invariant(1).is_zero());
        // Quadruple-loop oracle for C̄_2 = C^{ab}_{cd} C^{cd}_{ab}.
        let c = w.weyl();
        let mut acc = Scalar::zero(Mode::Exact);
        for a in 0..4 {
            for b in 0..4 {
                for cc in 0..4 {
                    for d in 0..4 {
                        acc = acc.add(&c.get(&[a, b, cc, d]).mul(c.get(&[cc, d, a, b])));
                    }
                }
            }
        }
        assert!(w.trace_invariant(2).sub(&acc).is_zero());
    }

    #[test]
    fn newton_coefficients_match_closed_forms() {
        let w = sample(4, 3);
        let inv = characteristic_coefficients(&w);
        let rat = |num: i64, den: i64| {
            Scalar::from_rational(
                &BigRational::new(num.into(), den.into()),
                Mode::Exact,
            )
        };
        assert!(inv.coefficient(0).sub(&Scalar::one(Mode::Exact)).is_zero());
        assert!(inv.coefficient(1).is_zero());
        let c2 = inv.trace(2);
        let c3 = inv.trace(3);
        let c4 = inv.trace(4);
        let c5 = inv.trace(5);
        let c6 = inv.trace(6);
        // c_2 = -C̄2/2
        assert!(inv
            .coefficient(2)
            .sub(&c2.mul(&rat(-1, 2)))
            .is_zero());
        // c_3 = -C̄3/3
        assert!(inv
            .coefficient(3)
            .sub(&c3.mul(&rat(-1, 3)))
            .is_zero());
        // c_4 = -C̄4/4 + C̄2²/8
        let c4_closed = c4.mul(&rat(-1, 4)).add(&c2.mul(c2).mul(&rat(1, 8)));
        assert!(inv.coefficient(4).sub(&c4_closed).is_zero());
        // c_5 = -C̄5/5 + C̄2·C̄3/6
        let c5_closed = c5.mul(&rat(-1, 5)).add(&c2.mul(c3).mul(&rat(1, 6)));
        assert!(inv.coefficient(5).sub(&c5_closed).is_zero());
        // c_6 = -(1/6)(C̄6 - (3/4)C̄2·C̄4 - (1/3)C̄3² + (1/8)C̄2³)
        let inner = c6
            .add(&c2.mul(c4).mul(&rat(-3, 4)))
            .add(&c3.mul(c3).mul(&rat(-1, 3)))
            .add(&c2.mul(c2).mul(c2).mul(&rat(1, 8)));
        let c6_closed = inner.mul(&rat(-1, 6));
        assert!(inv.coefficient(6).sub(&c6_closed).is_zero());
    }

    #[test]
    fn cayley_hamilton_holds_and_detects_perturbation() {
        let w = sample(4, 4);
        let r = cayley_hamilton_residual(&w).unwrap();
        assert!(r.absolute.is_zero());

        let mut inv = characteristic_coefficients(&w);
        inv.coefficients[2] = inv.coefficients[2].add(&Scalar::one(Mode::Exact));
        let bad = cayley_hamilton_residual_with(&w, &inv).unwrap();
        assert!(!bad.absolute.is_zero());
    }

    #[test]
    fn nondegeneracy_generic_and_zero_cases() {
        let w = sample(4, 5);
        assert!(nondegeneracy(&w, 1e-9).nondegenerate);

        // Build a flat-metric zero Weyl point directly.
        let mut lower = Tensor::zeros(4, &[Variance::Down, Variance::Down], Mode::Exact);
        let mut upper = Tensor::zeros(4, &[Variance::Up, Variance::Up], Mode::Exact);
        for i in 0..4 {
            lower.set(&[i, i], Scalar::one(Mode::Exact));
            upper.set(&[i, i], Scalar::one(Mode::Exact));
        }
        let zero = WeylPoint::new(
            PointMetric::new(lower, upper).unwrap(),
            Tensor::zeros(4, &MIXED_PAIR, Mode::Exact),
        )
        .unwrap();
        let rep = nondegeneracy(&zero, 1e-9);
        assert!(!rep.nondegenerate);
        assert!(rep.c_n.is_zero());
        // Degenerate system with nonzero right side must refuse to solve.
        let mut h = Tensor::zeros(4, &[Variance::Up, Variance::Up, Variance::Down], Mode::Exact);
        h.set(&[0, 1, 2], Scalar::one(Mode::Exact));
        h.set(&[1, 0, 2], Scalar::from_int(-1, Mode::Exact));
        assert!(matches!(
            solve_weyl_linear(&zero, &h),
            Err(Error::DegenerateWeyl(_))
        ));
    }

    #[test]
    fn solve_round_trips_and_is_scale_invariant() {
        for n in [4usize, 5] {
            let w = sample(n, 6);
            let mode = Mode::Exact;
            let mut v = Tensor::zeros(n, &[Variance::Up], mode);
            for i in 0..n {
                v.set(&[i], Scalar::from_int(3 - i as i64, mode));
            }
            let h = einsum("abcd,d->abc", &[w.weyl(), &v], &[Variance::Up, Variance::Up, Variance::Down]).unwrap();
            let solved = solve_weyl_linear(&w, &h).unwrap();
            let rt = max_abs_residual(&solved, &v).unwrap();
            assert!(rt.absolute.is_zero(), "round trip failed at n={n}");

            // residual of the linear system itself
            let back = einsum("abcd,d->abc", &[w.weyl(), &solved], &[Variance::Up, Variance::Up, Variance::Down]).unwrap();
            assert!(max_abs_residual(&back, &h).unwrap().absolute.is_zero());

            // replacing (C, H) by (2C, 2H) leaves the solution unchanged
            let two = Scalar::from_int(2, mode);
            let w2 = WeylPoint::new(
                PointMetric::new(w.metric().lower.clone(), w.metric().upper.clone()).unwrap(),
                w.weyl().scale(&two),
            )
            .unwrap();
            let solved2 = solve_weyl_linear(&w2, &h.scale(&two)).unwrap();
            assert!(max_abs_residual(&solved2, &v).unwrap().absolute.is_zero());
        }
    }

    #[test]
    fn invariants_scale_covariantly() {
        let w = sample(4, 7);
        let lam = Scalar::from_int(2, Mode::Exact);
        let w2 = WeylPoint::new(
            PointMetric::new(w.metric().lower.clone(), w.metric().upper.clone()).unwrap(),
            w.weyl().scale(&lam),
        )
        .unwrap();
        let a = characteristic_coefficients(&w);
        let b = characteristic_coefficients(&w2);
        let mut pow = Scalar::one(Mode::Exact);
        for p in 1..=6 {
            pow = pow.mul(&lam);
            assert!(b.trace(p).sub(&a.trace(p).mul(&pow)).is_zero());
        }
        let mut powk = Scalar::one(Mode::Exact);
        for k in 1..=6 {
            powk = powk.mul(&lam);
            assert!(b
                .coefficient(k)
                .sub(&a.coefficient(k).mul(&powk))
                .is_zero());
        }
    }

    #[test]
    fn zero_right_side_gives_zero_solution() {
        let w = sample(4, 8);
        let h = Tensor::zeros(4, &[Variance::Up, Variance::Up, Variance::Down], Mode::Exact);
        let v = solve_weyl_linear(&w, &h).unwrap();
        assert!(v.max_abs().is_zero());
    }
}
