//! Dense tensors over tagged scalars with explicit index variance.
//!
//! Components are stored row-major. Dimensions 2..=8 and ranks 0..=8 are
//! supported; curvature work uses 4..=8. A small einsum-style contraction
//! helper keeps the many index gymnastics in the identity layer readable
//! and directly comparable against their reference transcriptions.

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Up,
    Down,
}

impl Variance {
    pub fn flip(self) -> Self {
        match self {
            Variance::Up => Variance::Down,
            Variance::Down => Variance::Up,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tensor {
    n: usize,
    variance: Vec<Variance>,
    data: Vec<Scalar>,
}

/// Metric data at one evaluation point: g_ab and its inverse.
#[derive(Clone, Debug)]
pub struct PointMetric {
    pub lower: Tensor,
    pub upper: Tensor,
}

impl PointMetric {
    pub fn new(lower: Tensor, upper: Tensor) -> Result<Self> {
        if lower.rank() != 2 || upper.rank() != 2 {
            return Err(Error::Shape("metric must be rank 2".into()));
        }
        Ok(PointMetric { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }
}

impl Tensor {
    pub fn zeros(n: usize, variance: &[Variance], mode: Mode) -> Self {
        let len = n.pow(variance.len() as u32);
        Tensor {
            n,
            variance: variance.to_vec(),
            data: vec![Scalar::zero(mode); len],
        }
    }

    pub fn scalar(value: Scalar) -> Self {
        Tensor {
            n: 1,
            variance: vec![],
            data: vec![value],
        }
    }

    pub fn from_data(n: usize, variance: Vec<Variance>, data: Vec<Scalar>) -> Result<Self> {
        if data.len() != n.pow(variance.len() as u32) {
            return Err(Error::Shape(format!(
                "expected {} components, got {}",
                n.pow(variance.len() as u32),
                data.len()
            )));
        }
        if let Some(first) = data.first() {
            let mode = first.mode();
            if data.iter().any(|s| s.mode() != mode) {
                return Err(Error::ModeMismatch);
            }
        }
        Ok(Tensor {
            n,
            variance,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn mode(&self) -> Mode {
        self.data.first().map(Scalar::mode).unwrap_or(Mode::Exact)
    }

    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut off = 0;
        for &i in idx {
            debug_assert!(i < self.n);
            off = off * self.n + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> &Scalar {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Scalar) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn add_assign_at(&mut self, idx: &[usize], value: &Scalar) {
        let off = self.offset(idx);
        self.data[off] = self.data[off].add(value);
    }

    /// Largest absolute component, as an exact-or-float scalar.
    pub fn max_abs(&self) -> Scalar {
        let mut best = Scalar::zero(self.mode());
        for s in &self.data {
            let a = s.abs();
            if a.cmp_abs(&best) == std::cmp::Ordering::Greater {
                best = a;
            }
        }
        best
    }

    pub fn scale(&self, factor: &Scalar) -> Tensor {
        Tensor {
            n: self.n,
            variance: self.variance.clone(),
            data: self.data.iter().map(|s| s.mul(factor)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Tensor {
            n: self.n,
            variance: self.variance.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Tensor {
            n: self.n,
            variance: self.variance.clone(),
            data,
        })
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.n != other.n || self.variance != other.variance {
            return Err(Error::Shape(format!(
                "shape mismatch: {}^{:?} vs {}^{:?}",
                self.n,
                self.variance.len(),
                other.n,
                other.variance.len()
            )));
        }
        Ok(())
    }

    /// Reorder slots: axes[k] names the source slot that becomes slot k.
    pub fn transpose(&self, axes: &[usize]) -> Result<Tensor> {
        if axes.len() != self.rank() {
            return Err(Error::Shape("transpose axes arity mismatch".into()));
        }
        let mut seen = vec![false; axes.len()];
        for &a in axes {
            if a >= axes.len() || seen[a] {
                return Err(Error::Shape("transpose axes must be a permutation".into()));
            }
            seen[a] = true;
        }
        let rank = self.rank();
        let variance = axes.iter().map(|&a| self.variance[a]).collect();
        let mut out = Tensor {
            n: self.n,
            variance,
            data: vec![Scalar::zero(self.mode()); self.data.len()],
        };
        let mut idx = vec![0usize; rank];
        let mut src = vec![0usize; rank];
        loop {
            for k in 0..rank {
                src[axes[k]] = idx[k];
            }
            let v = self.get(&src).clone();
            out.set(&idx, v);
            if !increment(&mut idx, self.n) {
                break;
            }
        }
        Ok(out)
    }
}

pub(crate) fn increment(idx: &mut [usize], n: usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < n {
            return true;
        }
        idx[k] = 0;
    }
    false
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor(n={}, rank={})", self.n, self.rank())
    }
}

// ---------------------------------------------------------------------------
// spec operations
// ---------------------------------------------------------------------------

pub fn outer_product(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.n != b.n {
        return Err(Error::Shape("outer product dimension mismatch".into()));
    }
    if a.mode() != b.mode() && !a.data.is_empty() && !b.data.is_empty() {
        return Err(Error::ModeMismatch);
    }
    if a.rank() + b.rank() > 8 {
        return Err(Error::Shape("outer product rank exceeds 8".into()));
    }
    let mut variance = a.variance.clone();
    variance.extend_from_slice(&b.variance);
    let mut data = Vec::with_capacity(a.data.len() * b.data.len());
    for x in &a.data {
        for y in &b.data {
            data.push(x.mul(y));
        }
    }
    Ok(Tensor {
        n: a.n,
        variance,
        data,
    })
}

/// Contract two slots. Opposite variance contracts directly; equal variance
/// requires the metric, which mediates by raising or lowering slot `b`.
pub fn contract(t: &Tensor, a: usize, b: usize, metric: Option<&PointMetric>) -> Result<Tensor> {
    if a == b || a >= t.rank() || b >= t.rank() {
        return Err(Error::Shape("contract needs two distinct valid slots".into()));
    }
    let t = if t.variance[a] == t.variance[b] {
        let m = metric.ok_or_else(|| {
            Error::Variance("contracting equal-variance slots requires a metric".into())
        })?;
        raise_lower(t, b, m, t.variance[b].flip())?
    } else {
        t.clone()
    };
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    let rank = t.rank();
    let out_variance: Vec<Variance> = (0..rank)
        .filter(|&k| k != a && k != b)
        .map(|k| t.variance[k])
        .collect();
    let mut out = Tensor::zeros(t.n, &out_variance, t.mode());
    if out_variance.is_empty() {
        let mut acc = Scalar::zero(t.mode());
        let mut idx = vec![0usize; rank];
        for i in 0..t.n {
            idx[a] = i;
            idx[b] = i;
            acc = acc.add(t.get(&idx));
        }
        out.data[0] = acc;
        return Ok(out);
    }
    let mut oidx = vec![0usize; out_variance.len()];
    let mut idx = vec![0usize; rank];
    loop {
        let mut pos = 0;
        for k in 0..rank {
            if k == a || k == b {
                continue;
            }
            idx[k] = oidx[pos];
            pos += 1;
        }
        let mut acc = Scalar::zero(t.mode());
        for i in 0..t.n {
            idx[a] = i;
            idx[b] = i;
            acc = acc.add(t.get(&idx));
        }
        out.set(&oidx, acc);
        if !increment(&mut oidx, t.n) {
            break;
        }
    }
    Ok(out)
}

/// Raise or lower one slot with the metric.
pub fn raise_lower(t: &Tensor, slot: usize, metric: &PointMetric, to: Variance) -> Result<Tensor> {
    if slot >= t.rank() {
        return Err(Error::Shape("raise_lower slot out of range".into()));
    }
    if t.variance[slot] == to {
        return Ok(t.clone());
    }
    let g = match to {
        Variance::Up => &metric.upper,
        Variance::Down => &metric.lower,
    };
    let n = t.n;
    let rank = t.rank();
    let mut variance = t.variance.clone();
    variance[slot] = to;
    let mut out = Tensor::zeros(n, &variance, t.mode());
    let mut idx = vec![0usize; rank];
    let mut src = vec![0usize; rank];
    loop {
        let mut acc = Scalar::zero(t.mode());
        src.copy_from_slice(&idx);
        for e in 0..n {
            src[slot] = e;
            acc = acc.add(&g.get(&[idx[slot], e]).mul(t.get(&src)));
        }
        out.set(&idx, acc);
        if !increment(&mut idx, n) {
            break;
        }
    }
    Ok(out)
}

/// Antisymmetrize over the named slots with 1/k! normalization. All named
/// slots must share one variance.
pub fn antisymmetrize(t: &Tensor, slots: &[usize]) -> Result<Tensor> {
    if slots.is_empty() {
        return Ok(t.clone());
    }
    let v0 = t.variance[slots[0]];
    for &s in slots {
        if s >= t.rank() {
            return Err(Error::Shape("antisymmetrize slot out of range".into()));
        }
        if t.variance[s] != v0 {
            return Err(Error::Variance(
                "antisymmetrized slots must share variance".into(),
            ));
        }
    }
    let k = slots.len();
    let mut out = Tensor::zeros(t.n, &t.variance, t.mode());
    let mut perm: Vec<usize> = (0..k).collect();
    let mut axes: Vec<usize> = (0..t.rank()).collect();
    // sum over permutations of the chosen slots
    loop_permutations(&mut perm, &mut |p, sign| {
        for (pos, &s) in slots.iter().enumerate() {
            axes[s] = slots[p[pos]];
        }
        // axes maps output slot -> source slot
        let mut idx = vec![0usize; t.rank()];
        let mut src = vec![0usize; t.rank()];
        loop {
            for j in 0..t.rank() {
                src[axes[j]] = idx[j];
            }
            let term = t.get(&src);
            let off = out.offset(&idx);
            out.data[off] = if sign > 0 {
                out.data[off].add(term)
            } else {
                out.data[off].sub(term)
            };
            if !increment(&mut idx, t.n) {
                break;
            }
        }
        for &s in slots {
            axes[s] = s;
        }
    });
    let norm = Scalar::from_int(factorial(k) as i64, t.mode());
    let inv = Scalar::one(t.mode()).div(&norm)?;
    Ok(out.scale(&inv))
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product::<u64>().max(1)
}

/// Enumerate permutations with signs via Heap's algorithm.
fn loop_permutations(perm: &mut Vec<usize>, f: &mut impl FnMut(&[usize], i32)) {
    let k = perm.len();
    let mut c = vec![0usize; k];
    let mut sign = 1;
    f(perm, sign);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            f(perm, sign);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Generalized Kronecker delta of order k in dimension n, determinant
/// convention (no 1/k!): delta^{a1..ak}_{b1..bk} = det(delta^{ai}_{bj}).
/// Slots are the k upper indices followed by the k lower indices.
/// For k = n+1 the tensor vanishes identically.
pub fn generalized_delta(n: usize, k: usize, mode: Mode) -> Result<Tensor> {
    if k == 0 || 2 * k > 8 {
        return Err(Error::Shape("generalized delta order out of range".into()));
    }
    let mut variance = vec![Variance::Up; k];
    variance.extend(vec![Variance::Down; k]);
    let mut out = Tensor::zeros(n, &variance, mode);
    let mut idx = vec![0usize; 2 * k];
    loop {
        let (upper, lower) = idx.split_at(k);
        let mut acc = 0i64;
        let mut perm: Vec<usize> = (0..k).collect();
        loop_permutations(&mut perm, &mut |p, sign| {
            let mut all = true;
            for i in 0..k {
                if upper[i] != lower[p[i]] {
                    all = false;
                    break;
                }
            }
            if all {
                acc += sign as i64;
            }
        });
        if acc != 0 {
            let off = out.offset(&idx);
            out.data[off] = Scalar::from_int(acc, mode);
        }
        if !increment(&mut idx, n) {
            break;
        }
    }
    Ok(out)
}

/// Residual between two same-shape tensors: the maximum absolute component
/// difference, plus (float mode) a relative version scaled by
/// max(|a|, |b|, 1).
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub absolute: Scalar,
    pub relative: Option<f64>,
}

pub fn max_abs_residual(a: &Tensor, b: &Tensor) -> Result<ResidualReport> {
    a.check_same_shape(b)?;
    let diff = a.sub(b)?;
    let absolute = diff.max_abs();
    let relative = match absolute {
        Scalar::Float(d) => {
            let scale = a.max_abs().abs_f64().max(b.max_abs().abs_f64()).max(1.0);
            Some(d / scale)
        }
        Scalar::Exact(_) => None,
    };
    Ok(ResidualReport {
        absolute,
        relative,
    })
}

// ---------------------------------------------------------------------------
// einsum-style contraction helper
// ---------------------------------------------------------------------------

/// Evaluate a contraction written in subscript notation, e.g.
/// `einsum("abij,ijcd->abcd", &[&x, &y], &variance, mode)`.
///
/// Subscripts are single ASCII letters; repeated letters are summed.
/// Variance bookkeeping is the caller's responsibility (summed pairs are
/// assumed upper against lower by construction); the output variance is
/// supplied explicitly. This mirrors the reference transcriptions of the
/// identities one-to-one, which keeps them auditable.
pub fn einsum(spec: &str, inputs: &[&Tensor], out_variance: &[Variance]) -> Result<Tensor> {
    let (in_specs, out_spec) = parse_einsum_spec(spec, inputs.len())?;
    let n = inputs
        .first()
        .map(|t| t.dim())
        .ok_or_else(|| Error::Shape("einsum needs at least one input".into()))?;
    let mode = inputs[0].mode();
    for (t, s) in inputs.iter().zip(in_specs.iter()) {
        if t.dim() != n {
            return Err(Error::Shape("einsum dimension mismatch".into()));
        }
        if t.mode() != mode {
            return Err(Error::ModeMismatch);
        }
        if t.rank() != s.len() {
            return Err(Error::Shape(format!(
                "einsum subscript arity {} vs tensor rank {}",
                s.len(),
                t.rank()
            )));
        }
    }
    if out_spec.len() != out_variance.len() {
        return Err(Error::Shape(
            "einsum output variance arity mismatch".into(),
        ));
    }

    // assign each distinct letter an axis id; output letters first
    let mut letters: Vec<char> = Vec::new();
    for &c in &out_spec {
        if letters.contains(&c) {
            return Err(Error::Shape("einsum output letters must be distinct".into()));
        }
        letters.push(c);
    }
    for s in &in_specs {
        for &c in s {
            if !letters.contains(&c) {
                letters.push(c);
            }
        }
    }
    for &c in &out_spec {
        if !in_specs.iter().any(|s| s.contains(&c)) {
            return Err(Error::Shape(format!(
                "einsum output letter `{c}` missing from inputs"
            )));
        }
    }
    let axis_of = |c: char| letters.iter().position(|&l| l == c).unwrap();
    let n_out = out_spec.len();
    let n_total = letters.len();

    // per-input strides over the combined axis vector
    let mut strides: Vec<Vec<usize>> = Vec::with_capacity(inputs.len());
    for (t, s) in inputs.iter().zip(in_specs.iter()) {
        let mut st = vec![0usize; n_total];
        let mut stride = 1usize;
        for &c in s.iter().rev() {
            st[axis_of(c)] += stride;
            stride *= t.dim();
        }
        strides.push(st);
    }

    let mut out = Tensor::zeros(n, out_variance, mode);
    let mut combined = vec![0usize; n_total];
    let mut out_idx = vec![0usize; n_out];
    loop {
        // inner sum over non-output axes
        for k in n_out..n_total {
            combined[k] = 0;
        }
        let mut acc = Scalar::zero(mode);
        loop {
            let mut term = Scalar::one(mode);
            let mut zero_hit = false;
            for (ti, t) in inputs.iter().enumerate() {
                let mut off = 0usize;
                for (axis, &v) in combined.iter().enumerate() {
                    off += strides[ti][axis] * v;
                }
                let s = &t.data[off];
                if s.is_zero() {
                    zero_hit = true;
                    break;
                }
                term = term.mul(s);
            }
            if !zero_hit {
                acc = acc.add(&term);
            }
            if n_out == n_total || !increment(&mut combined[n_out..], n) {
                break;
            }
        }
        if !acc.is_zero() {
            out.set(&out_idx, acc);
        }
        if n_out == 0 {
            break;
        }
        if !increment(&mut out_idx, n) {
            break;
        }
        combined[..n_out].copy_from_slice(&out_idx);
    }
    Ok(out)
}

fn parse_einsum_spec(spec: &str, n_inputs: usize) -> Result<(Vec<Vec<char>>, Vec<char>)> {
    let (lhs, rhs) = spec
        .split_once("->")
        .ok_or_else(|| Error::Shape("einsum spec needs `->`".into()))?;
    let in_specs: Vec<Vec<char>> = lhs.split(',').map(|s| s.chars().collect()).collect();
    if in_specs.len() != n_inputs {
        return Err(Error::Shape(format!(
            "einsum spec has {} operands, got {} tensors",
            in_specs.len(),
            n_inputs
        )));
    }
    Ok((in_specs, rhs.chars().collect()))
}

/// Convenience: scalar (rank 0) einsum result.  The `->` and empty output
/// list may be omitted.
pub fn einsum_scalar(spec: &str, inputs: &[&Tensor]) -> Result<Scalar> {
    let owned;
    let spec = if spec.contains("->") {
        spec
    } else {
        owned = format!("{spec}->");
        &owned
    };
    let t = einsum(spec, inputs, &[])?;
    Ok(t.data[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mode;

    fn t_from(n: usize, variance: Vec<Variance>, vals: Vec<i64>) -> Tensor {
        Tensor::from_data(
            n,
            variance,
            vals.into_iter()
                .map(|v| Scalar::from_int(v, Mode::Exact))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn generalized_delta_conventions() {
        // full self-trace of the order-2 delta is n(n-1)
        for n in 2..=5 {
            let d = generalized_delta(n, 2, Mode::Exact).unwrap();
            let tr = einsum_scalar("abab->", &[&d]).unwrap();
            assert_eq!(tr.to_f64() as i64, (n * (n - 1)) as i64);
        }
        // order n+1 vanishes identically
        let d = generalized_delta(3, 4, Mode::Exact).unwrap();
        assert!(d.max_abs().is_zero());
    }

    #[test]
    fn antisymmetrize_is_projection() {
        let t = t_from(
            2,
            vec![Variance::Down, Variance::Down],
            vec![1, 2, 3, 4],
        );
        let a = antisymmetrize(&t, &[0, 1]).unwrap();
        // [[0, -1/2], [1/2, 0]]
        assert_eq!(format!("{}", a.get(&[0, 1])), "-1/2");
        let twice = antisymmetrize(&a, &[0, 1]).unwrap();
        let r = max_abs_residual(&a, &twice).unwrap();
        assert!(r.absolute.is_zero());
    }

    #[test]
    fn contract_with_metric_mediation() {
        // v^a w^b with Euclidean metric: contracting the two Up slots
        // gives the dot product.
        let v = t_from(3, vec![Variance::Up], vec![1, 2, 3]);
        let w = t_from(3, vec![Variance::Up], vec![4, 5, 6]);
        let vw = outer_product(&v, &w).unwrap();
        let eye = t_from(
            3,
            vec![Variance::Down, Variance::Down],
            vec![1, 0, 0, 0, 1, 0, 0, 0, 1],
        );
        let eye_up = t_from(
            3,
            vec![Variance::Up, Variance::Up],
            vec![1, 0, 0, 0, 1, 0, 0, 0, 1],
        );
        let m = PointMetric::new(eye, eye_up).unwrap();
        let dot = contract(&vw, 0, 1, Some(&m)).unwrap();
        assert_eq!(dot.rank(), 0);
        assert_eq!(dot.data()[0].to_f64(), 32.0);
        // without a metric the equal-variance contraction must fail
        assert!(contract(&vw, 0, 1, None).is_err());
    }

    #[test]
    fn einsum_matches_manual_contraction() {
        let a = t_from(
            2,
            vec![Variance::Up, Variance::Down],
            vec![1, 2, 3, 4],
        );
        let b = t_from(
            2,
            vec![Variance::Up, Variance::Down],
            vec![5, 6, 7, 8],
        );
        let ab = einsum(
            "ij,jk->ik",
            &[&a, &b],
            &[Variance::Up, Variance::Down],
        )
        .unwrap();
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        assert_eq!(ab.get(&[0, 0]).to_f64(), 19.0);
        assert_eq!(ab.get(&[1, 1]).to_f64(), 50.0);
        let tr = einsum_scalar("ii->", &[&a]).unwrap();
        assert_eq!(tr.to_f64(), 5.0);
    }

    #[test]
    fn transpose_permutes_slots() {
        let a = t_from(
            2,
            vec![Variance::Up, Variance::Down],
            vec![1, 2, 3, 4],
        );
        let at = a.transpose(&[1, 0]).unwrap();
        assert_eq!(at.get(&[0, 1]).to_f64(), 3.0);
        assert_eq!(at.variance(), &[Variance::Down, Variance::Up]);
    }

    #[test]
    fn residual_reports_relative_in_float() {
        let a = Tensor::from_data(
            2,
            vec![Variance::Up],
            vec![Scalar::Float(100.0), Scalar::Float(0.0)],
        )
        .unwrap();
        let b = Tensor::from_data(
            2,
            vec![Variance::Up],
            vec![Scalar::Float(100.0 + 1e-6), Scalar::Float(0.0)],
        )
        .unwrap();
        let r = max_abs_residual(&a, &b).unwrap();
        assert!((r.relative.unwrap() - 1e-8).abs() < 1e-12);
    }
}
