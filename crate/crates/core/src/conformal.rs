//! Conformal-Einstein classification of metrics.
//!
//! A metric `g` is conformally Einstein when some rescaling `Ω² g` is an
//! Einstein metric.  For metrics with a nondegenerate Weyl operator the
//! candidate gradient `K^a = 2 Ω^{-1} ∇^a Ω` is determined algebraically by
//! the Weyl tensor and its divergence, so the property can be decided by
//!
//! 1. extracting `K` in closed form (several routes, see
//!    [`ExtractionMethod`]),
//! 2. checking that the associated covector is a gradient (vanishing curl),
//!    and
//! 3. checking the trace-free part of the Ricci tensor of the rescaled
//!    metric, assembled directly from `K` (see
//!    [`einstein_condition_residual`]).
//!
//! All routes build `K` symbolically over the shared curvature bundle, so a
//! single extraction can be evaluated at many sample points.  Everything here
//! avoids expression expansion: contractions are assembled with the raw
//! constructors, which only fold constants and drop structural zeros.

use num_rational::BigRational;

use crate::curvature::{
    curvature_bundle, evaluate_field, evaluate_field_with, evaluate_metric, CurvatureBundle,
    MetricSpec, TensorField,
};
use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use crate::symexpr::{
    self, differentiate_with, evaluate_with, int, is_zero_expr, mul, neg, prod, quot, ratio, sum,
    Binding, DiffCache, EvalCache, Expr,
};
use crate::tensor::{
    antisymmetrize, einsum, einsum_scalar, max_abs_residual, increment, ResidualReport, Tensor,
    Variance,
};
use crate::weyl::{self, WeylPoint, MIXED_PAIR};

/// Default relative tolerance for the classification residuals.
pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// A residual this many times above the tolerance is a confident failure;
/// residuals in between leave the verdict inconclusive.
pub const FAILURE_FACTOR: f64 = 10.0;

/// Float threshold (relative to the natural scale of the denominator) below
/// which a method's scalar denominator counts as degenerate at a point.
pub const DEGENERACY_TOL: f64 = 1e3 * f64::EPSILON;

/// |det g| at or below this marks a sample point as unusable in float mode.
pub const DET_FLOOR: f64 = 1e-12;

const UP: [Variance; 1] = [Variance::Up];
const SIX_SLOT: [Variance; 6] = [
    Variance::Down,
    Variance::Down,
    Variance::Down,
    Variance::Up,
    Variance::Up,
    Variance::Up,
];
const FIVE_SLOT: [Variance; 5] = [
    Variance::Down,
    Variance::Down,
    Variance::Up,
    Variance::Up,
    Variance::Up,
];

// ---------------------------------------------------------------------------
// symbolic contraction helpers (no simplification, zero-aware)
// ---------------------------------------------------------------------------

/// Einsum over component fields.  Mirrors [`crate::tensor::einsum`] but
/// produces expressions; structural zeros in any factor drop the whole term.
fn field_einsum(
    spec: &str,
    inputs: &[&TensorField],
    out_variance: &[Variance],
) -> Result<TensorField> {
    let (lhs, rhs) = spec
        .split_once("->")
        .ok_or_else(|| Error::Shape("einsum spec needs `->`".into()))?;
    let in_specs: Vec<Vec<char>> = lhs.split(',').map(|s| s.chars().collect()).collect();
    if in_specs.len() != inputs.len() {
        return Err(Error::Shape(format!(
            "spec lists {} operands, got {}",
            in_specs.len(),
            inputs.len()
        )));
    }
    let out_spec: Vec<char> = rhs.chars().collect();
    if out_spec.len() != out_variance.len() {
        return Err(Error::Shape("output variance length mismatch".into()));
    }
    let n = inputs
        .first()
        .map(|t| t.dim())
        .ok_or_else(|| Error::Shape("einsum needs at least one operand".into()))?;
    let mut letters: Vec<char> = Vec::new();
    for (idx, ch) in out_spec.iter().enumerate() {
        if out_spec[..idx].contains(ch) {
            return Err(Error::Shape(format!("output letter `{ch}` repeated")));
        }
        letters.push(*ch);
    }
    for s in &in_specs {
        for ch in s {
            if !letters.contains(ch) {
                letters.push(*ch);
            }
        }
    }
    for (t, s) in inputs.iter().zip(&in_specs) {
        if t.dim() != n {
            return Err(Error::Shape("operand dimensions differ".into()));
        }
        if t.rank() != s.len() {
            return Err(Error::Shape(format!(
                "operand rank {} does not match spec `{}`",
                t.rank(),
                s.iter().collect::<String>()
            )));
        }
    }
    for ch in &out_spec {
        if !in_specs.iter().any(|s| s.contains(ch)) {
            return Err(Error::Shape(format!("output letter `{ch}` unbound")));
        }
    }
    let maps: Vec<Vec<usize>> = in_specs
        .iter()
        .map(|s| {
            s.iter()
                .map(|ch| letters.iter().position(|c| c == ch).unwrap())
                .collect()
        })
        .collect();
    let out_rank = out_spec.len();
    let out_len = n.pow(out_rank as u32);
    let mut terms: Vec<Vec<Expr>> = vec![Vec::new(); out_len];
    let mut assign = vec![0usize; letters.len()];
    let max_rank = in_specs.iter().map(Vec::len).max().unwrap_or(0);
    let mut scratch = vec![0usize; max_rank];
    loop {
        let mut factors: Vec<Expr> = Vec::with_capacity(inputs.len());
        let mut zero = false;
        for (t, map) in inputs.iter().zip(&maps) {
            for (slot, &li) in map.iter().enumerate() {
                scratch[slot] = assign[li];
            }
            let e = t.get(&scratch[..map.len()]);
            if is_zero_expr(e) {
                zero = true;
                break;
            }
            factors.push(e.clone());
        }
        if !zero {
            let mut off = 0usize;
            for &digit in assign.iter().take(out_rank) {
                off = off * n + digit;
            }
            terms[off].push(prod(factors));
        }
        if !increment(&mut assign, n) {
            break;
        }
    }
    let comps: Vec<Expr> = terms.into_iter().map(sum).collect();
    TensorField::from_components(n, out_variance.to_vec(), comps)
}

/// Scalar-valued einsum over fields; the `->` may be omitted.
fn field_einsum_scalar(spec: &str, inputs: &[&TensorField]) -> Result<Expr> {
    let owned;
    let spec = if spec.contains("->") {
        spec
    } else {
        owned = format!("{spec}->");
        &owned
    };
    let t = field_einsum(spec, inputs, &[])?;
    Ok(t.components()[0].clone())
}

fn field_map(f: &TensorField, g: impl FnMut(&Expr) -> Expr) -> TensorField {
    let comps: Vec<Expr> = f.components().iter().map(g).collect();
    TensorField::from_components(f.dim(), f.variance().to_vec(), comps)
        .expect("shape is preserved")
}

fn field_scale(f: &TensorField, factor: Expr) -> TensorField {
    field_map(f, |e| mul(factor.clone(), e.clone()))
}

fn field_add(a: &TensorField, b: &TensorField) -> TensorField {
    debug_assert_eq!(a.variance(), b.variance());
    let comps: Vec<Expr> = a
        .components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| sum(vec![x.clone(), y.clone()]))
        .collect();
    TensorField::from_components(a.dim(), a.variance().to_vec(), comps).expect("matching shapes")
}

fn field_sub(a: &TensorField, b: &TensorField) -> TensorField {
    debug_assert_eq!(a.variance(), b.variance());
    let comps: Vec<Expr> = a
        .components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| sum(vec![x.clone(), neg(y.clone())]))
        .collect();
    TensorField::from_components(a.dim(), a.variance().to_vec(), comps).expect("matching shapes")
}

/// Antisymmetrize a field over the given (same-variance) slots, with the
/// usual 1/k! normalization.
fn field_antisymmetrize(f: &TensorField, slots: &[usize]) -> TensorField {
    let n = f.dim();
    let rank = f.rank();
    let perms = crate::identities::permutations_with_signs(slots.len());
    let norm = int(perms.len() as i64);
    let mut out = TensorField::zeros(n, f.variance());
    let mut idx = vec![0usize; rank];
    loop {
        let mut terms = Vec::with_capacity(perms.len());
        for (perm, sign) in &perms {
            let mut src = idx.clone();
            for (t, &p) in perm.iter().enumerate() {
                src[slots[t]] = idx[slots[p]];
            }
            let e = f.get(&src);
            if is_zero_expr(e) {
                continue;
            }
            terms.push(if *sign > 0 { e.clone() } else { neg(e.clone()) });
        }
        out.set(&idx, quot(sum(terms), norm.clone()));
        if !increment(&mut idx, n) {
            break;
        }
    }
    out
}

/// Lower a vector field with the metric, without simplifying.
fn field_lower(v: &TensorField, m: &MetricSpec) -> TensorField {
    let n = m.dimension;
    let mut out = TensorField::zeros(n, &[Variance::Down]);
    for a in 0..n {
        let mut terms = Vec::new();
        for b in 0..n {
            let gab = m.component(a, b);
            let vb = v.get(&[b]);
            if is_zero_expr(gab) || is_zero_expr(vb) {
                continue;
            }
            terms.push(mul(gab.clone(), vb.clone()));
        }
        out.set(&[a], sum(terms));
    }
    out
}

/// Coordinate partials `∂_e f_a` of a covector field (first slot is the
/// derivative index).
fn covector_partials(f: &TensorField, coords: &[String]) -> TensorField {
    let n = f.dim();
    let mut out = TensorField::zeros(n, &[Variance::Down, Variance::Down]);
    for e in 0..n {
        let mut dc = DiffCache::new(&coords[e]);
        for a in 0..n {
            out.set(&[e, a], differentiate_with(f.get(&[a]), &mut dc));
        }
    }
    out
}

/// Covariant derivative `∇_e f_a = ∂_e f_a − Γ^m_{ea} f_m` of a covector
/// field, assembled without simplification.
fn covector_covariant(f: &TensorField, gamma: &TensorField, coords: &[String]) -> TensorField {
    let n = f.dim();
    let mut out = TensorField::zeros(n, &[Variance::Down, Variance::Down]);
    for e in 0..n {
        let mut dc = DiffCache::new(&coords[e]);
        for a in 0..n {
            let mut terms = vec![differentiate_with(f.get(&[a]), &mut dc)];
            for m in 0..n {
                let gam = gamma.get(&[m, e, a]);
                let fm = f.get(&[m]);
                if is_zero_expr(gam) || is_zero_expr(fm) {
                    continue;
                }
                terms.push(neg(mul(gam.clone(), fm.clone())));
            }
            out.set(&[e, a], sum(terms));
        }
    }
    out
}

/// Weyl chain powers `chain(1) = C`, `chain(p) = chain(p−1)·C` as fields.
fn chain_fields(bundle: &CurvatureBundle, max_p: usize) -> Result<Vec<TensorField>> {
    let mut chains = vec![bundle.weyl22.clone()];
    while chains.len() < max_p {
        let next = field_einsum(
            "abij,ijcd->abcd",
            &[chains.last().unwrap(), &bundle.weyl22],
            &MIXED_PAIR,
        )?;
        chains.push(next);
    }
    Ok(chains)
}

/// Chain trace `C̄_p`, given materialized chains up to at least `p − 1`.
/// `C̄_1` vanishes identically (the Weyl operator is trace-free), so it is
/// returned as a structural zero.
fn chain_trace_expr(chains: &[TensorField], weyl: &TensorField, p: usize) -> Result<Expr> {
    if p == 1 {
        return Ok(symexpr::zero());
    }
    if p <= chains.len() {
        field_einsum_scalar("abab", &[&chains[p - 1]])
    } else if p == chains.len() + 1 {
        field_einsum_scalar("abij,ijab", &[&chains[p - 2], weyl])
    } else {
        Err(Error::Shape(format!("chain power {p} not materialized")))
    }
}

/// Characteristic coefficients `c_0 = 1, c_k = −(1/k) Σ_{i≤k} C̄_i c_{k−i}`
/// as expressions over the given traces (`traces[i]` holds `C̄_{i+1}`).
fn newton_coefficient_exprs(traces: &[Expr]) -> Vec<Expr> {
    let nb = traces.len();
    let mut coeffs = vec![symexpr::one()];
    for k in 1..=nb {
        let mut terms = Vec::with_capacity(k);
        for i in 1..=k {
            if is_zero_expr(&traces[i - 1]) || is_zero_expr(&coeffs[k - i]) {
                continue;
            }
            terms.push(mul(traces[i - 1].clone(), coeffs[k - i].clone()));
        }
        coeffs.push(quot(neg(sum(terms)), int(k as i64)));
    }
    coeffs
}

// ---------------------------------------------------------------------------
// candidate gradient
// ---------------------------------------------------------------------------

/// The available closed-form routes for the candidate gradient `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractionMethod {
    /// Cayley–Hamilton inversion of the Weyl operator; works in every
    /// supported dimension whenever `c_N ≠ 0`.
    General,
    /// Four-dimensional single-trace route through `chain(order)`,
    /// `order ∈ 2..=6`.
    FourDim { order: usize },
    /// Five-dimensional route with denominator `C̄_2² − 4 C̄_2²̂`.
    FiveDim,
    /// Six-dimensional route with denominator `C̄_3 − 4 Ĉ_3`.
    SixDim,
    /// Route through the double three-form built from two Weyl factors;
    /// applies in dimensions five and six.
    Lovelock,
}

impl ExtractionMethod {
    pub fn label(&self) -> String {
        match self {
            ExtractionMethod::General => "general".into(),
            ExtractionMethod::FourDim { order } => format!("dim4:{order}"),
            ExtractionMethod::FiveDim => "dim5".into(),
            ExtractionMethod::SixDim => "dim6".into(),
            ExtractionMethod::Lovelock => "lovelock".into(),
        }
    }

    /// Parse a method name: `general`, `dim4`, `dim4:<order>`, `dim5`,
    /// `dim6` or `lovelock`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "general" => Ok(ExtractionMethod::General),
            "dim5" => Ok(ExtractionMethod::FiveDim),
            "dim6" => Ok(ExtractionMethod::SixDim),
            "lovelock" => Ok(ExtractionMethod::Lovelock),
            "dim4" => Ok(ExtractionMethod::FourDim { order: 2 }),
            _ => {
                if let Some(rest) = t.strip_prefix("dim4:") {
                    let order: usize = rest
                        .parse()
                        .map_err(|_| Error::Invalid(format!("bad dim4 chain order `{rest}`")))?;
                    if !(2..=6).contains(&order) {
                        return Err(Error::Invalid(format!(
                            "dim4 chain order must lie in 2..=6, got {order}"
                        )));
                    }
                    Ok(ExtractionMethod::FourDim { order })
                } else {
                    Err(Error::Invalid(format!("unknown extraction method `{s}`")))
                }
            }
        }
    }

    /// Dimensions in which this route applies.
    pub fn supports_dimension(&self, n: usize) -> bool {
        match self {
            ExtractionMethod::General => (4..=8).contains(&n),
            ExtractionMethod::FourDim { .. } => n == 4,
            ExtractionMethod::FiveDim => n == 5,
            ExtractionMethod::SixDim => n == 6,
            ExtractionMethod::Lovelock => n == 6,
        }
    }

    /// The lowest-order route for a dimension.  The general route sums
    /// chains to order `N - 1` with characteristic-coefficient weights; in
    /// float arithmetic that loses several digits to cancellation once
    /// `N = n(n-1)/2` is large, while the low-order dimension-specific
    /// routes stay near machine precision.  Where no specific route
    /// exists (n = 7, 8) the general one is the only choice.
    pub fn preferred(n: usize) -> Result<Self> {
        match n {
            4 => Ok(ExtractionMethod::FourDim { order: 2 }),
            5 => Ok(ExtractionMethod::FiveDim),
            6 => Ok(ExtractionMethod::SixDim),
            7 | 8 => Ok(ExtractionMethod::General),
            other => Err(Error::Dimension(other)),
        }
    }
}

fn require_dimension(method: ExtractionMethod, n: usize) -> Result<()> {
    if !(4..=8).contains(&n) {
        return Err(Error::Dimension(n));
    }
    if method.supports_dimension(n) {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "method `{}` does not apply in dimension {n}",
            method.label()
        )))
    }
}

/// A scalar an extraction route divides by, kept for diagnostics.  `weight`
/// is its homogeneity degree in the Weyl tensor, which sets the scale used
/// by the float degeneracy threshold.
#[derive(Clone, Debug)]
pub struct DenominatorSpec {
    pub name: String,
    pub expr: Expr,
    pub weight: usize,
}

/// Candidate conformal gradient, as symbolic component fields over the
/// metric's coordinates.
#[derive(Clone, Debug)]
pub struct KCandidate {
    pub method: ExtractionMethod,
    pub coordinates: Vec<String>,
    /// `K^a`.
    pub vector: TensorField,
    /// `K_a`.
    pub covector: TensorField,
    /// Scalars the route divided by.
    pub denominators: Vec<DenominatorSpec>,
}

fn finish_candidate(
    bundle: &CurvatureBundle,
    method: ExtractionMethod,
    vector: TensorField,
    denominators: Vec<DenominatorSpec>,
) -> KCandidate {
    let covector = field_lower(&vector, &bundle.metric);
    KCandidate {
        method,
        coordinates: bundle.metric.coordinates.clone(),
        vector,
        covector,
        denominators,
    }
}

/// Candidate gradient by inverting the divergence condition with the
/// Cayley–Hamilton expansion of the Weyl operator:
/// `K^a = −4/((n−3)(n−1)c_N) Σ_{k∈{0}∪{2..N−2}} c_k (chain(N−1−k))^{ab}_{ij} D^{ij}_b`.
pub fn extract_k_general(bundle: &CurvatureBundle) -> Result<KCandidate> {
    let n = bundle.metric.dimension;
    require_dimension(ExtractionMethod::General, n)?;
    let nb = n * (n - 1) / 2;
    let c = &bundle.weyl22;
    let d = &bundle.weyl_divergence;
    let chains = chain_fields(bundle, nb - 1)?;
    let mut traces = Vec::with_capacity(nb);
    for p in 1..=nb {
        traces.push(chain_trace_expr(&chains, c, p)?);
    }
    let coeffs = newton_coefficient_exprs(&traces);
    let c_n = coeffs[nb].clone();
    let mut terms: Vec<Vec<Expr>> = vec![Vec::new(); n];
    for k in (0..=nb - 2).filter(|&k| k != 1) {
        if is_zero_expr(&coeffs[k]) {
            continue;
        }
        let contracted = field_einsum("abij,ijb->a", &[&chains[nb - 2 - k], d], &UP)?;
        for (a, acc) in terms.iter_mut().enumerate() {
            let e = contracted.get(&[a]);
            if is_zero_expr(e) {
                continue;
            }
            acc.push(mul(coeffs[k].clone(), e.clone()));
        }
    }
    let pref = ratio(-4, (n as i64 - 3) * (n as i64 - 1));
    let comps: Vec<Expr> = terms
        .into_iter()
        .map(|ts| quot(mul(pref.clone(), sum(ts)), c_n.clone()))
        .collect();
    let vector = TensorField::from_components(n, vec![Variance::Up], comps)?;
    Ok(finish_candidate(
        bundle,
        ExtractionMethod::General,
        vector,
        vec![DenominatorSpec {
            name: "characteristic_c_N".into(),
            expr: c_n,
            weight: nb,
        }],
    ))
}

/// Four-dimensional route: `K^a = 8 (chain(order−1))^{ab}_{ij} D^{ij}_b / C̄_order`.
pub fn extract_k_dim4(bundle: &CurvatureBundle, order: usize) -> Result<KCandidate> {
    let n = bundle.metric.dimension;
    require_dimension(ExtractionMethod::FourDim { order }, n)?;
    if !(2..=6).contains(&order) {
        return Err(Error::Invalid(format!(
            "dim4 chain order must lie in 2..=6, got {order}"
        )));
    }
    let c = &bundle.weyl22;
    let d = &bundle.weyl_divergence;
    let chains = chain_fields(bundle, order - 1)?;
    let numer = field_einsum("abij,ijb->a", &[&chains[order - 2], d], &UP)?;
    let cbar = chain_trace_expr(&chains, c, order)?;
    let comps: Vec<Expr> = (0..n)
        .map(|a| quot(mul(int(8), numer.get(&[a]).clone()), cbar.clone()))
        .collect();
    let vector = TensorField::from_components(n, vec![Variance::Up], comps)?;
    Ok(finish_candidate(
        bundle,
        ExtractionMethod::FourDim { order },
        vector,
        vec![DenominatorSpec {
            name: format!("chain_trace_{order}"),
            expr: cbar,
            weight: order,
        }],
    ))
}

/// Five-dimensional route with denominator `C̄_2² − 4 X`, where `X` is the
/// cross trace of `chain(2)` against the pair-swapped square of the Weyl
/// tensor.
pub fn extract_k_dim5(bundle: &CurvatureBundle) -> Result<KCandidate> {
    let n = bundle.metric.dimension;
    require_dimension(ExtractionMethod::FiveDim, n)?;
    let c = &bundle.weyl22;
    let d = &bundle.weyl_divergence;
    let chain2 = field_einsum("abij,ijcd->abcd", &[c, c], &MIXED_PAIR)?;

    let t1 = field_einsum("qjip,ipq->j", &[c, d], &UP)?;
    let q1 = field_einsum("qgip,ipq->g", &[c, d], &UP)?;
    let qt = field_einsum("abcg,cjab->gj", &[c, c], &[Variance::Down, Variance::Up])?;
    let t2 = field_einsum("g,gj->j", &[&q1, &qt], &UP)?;
    let p2 = field_einsum("qgqe->ge", &[&chain2], &[Variance::Up, Variance::Down])?;
    let m3 = field_einsum("ge,beag->ba", &[&p2, c], &[Variance::Up, Variance::Down])?;
    let t3 = field_einsum("ba,ajb->j", &[&m3, d], &UP)?;
    let m4 = field_einsum(
        "ejab,abg->ejg",
        &[c, d],
        &[Variance::Up, Variance::Up, Variance::Down],
    )?;
    let t4 = field_einsum("ge,ejg->j", &[&p2, &m4], &UP)?;
    let m5 = field_einsum(
        "bjag,aeb->jge",
        &[c, d],
        &[Variance::Up, Variance::Down, Variance::Up],
    )?;
    let t5 = field_einsum("ge,jge->j", &[&p2, &m5], &UP)?;

    let c2bar = field_einsum_scalar("abab", &[&chain2])?;
    let x = field_einsum_scalar("ge,ge", &[&p2, &qt])?;
    let denom = sum(vec![
        mul(c2bar.clone(), c2bar.clone()),
        mul(int(-4), x),
    ]);

    let comps: Vec<Expr> = (0..n)
        .map(|j| {
            let numer = sum(vec![
                prod(vec![int(5), c2bar.clone(), t1.get(&[j]).clone()]),
                mul(int(-8), t2.get(&[j]).clone()),
                mul(int(8), t3.get(&[j]).clone()),
                mul(int(-4), t4.get(&[j]).clone()),
                mul(int(-8), t5.get(&[j]).clone()),
            ]);
            quot(neg(numer), denom.clone())
        })
        .collect();
    let vector = TensorField::from_components(n, vec![Variance::Up], comps)?;
    Ok(finish_candidate(
        bundle,
        ExtractionMethod::FiveDim,
        vector,
        vec![DenominatorSpec {
            name: "quartic_scalar_combination".into(),
            expr: denom,
            weight: 4,
        }],
    ))
}

/// Six-dimensional route with denominator `C̄_3 − 4 W`, where `W` is the
/// alternative cubic Weyl scalar.
pub fn extract_k_dim6(bundle: &CurvatureBundle) -> Result<KCandidate> {
    let n = bundle.metric.dimension;
    require_dimension(ExtractionMethod::SixDim, n)?;
    let c = &bundle.weyl22;
    let d = &bundle.weyl_divergence;
    let chain2 = field_einsum("abij,ijcd->abcd", &[c, c], &MIXED_PAIR)?;

    let t1 = field_einsum("ajbc,bca->j", &[&chain2, d], &UP)?;
    let p = field_einsum("acbc->ab", &[&chain2], &[Variance::Up, Variance::Down])?;
    let t2 = field_einsum("ab,bja->j", &[&p, d], &UP)?;
    let m3 = field_einsum(
        "djbe,aecd->jbac",
        &[c, c],
        &[Variance::Up, Variance::Down, Variance::Up, Variance::Down],
    )?;
    let t3 = field_einsum("jbac,bca->j", &[&m3, d], &UP)?;

    let c3bar = field_einsum_scalar("abij,ijab", &[&chain2, c])?;
    let w6 = field_einsum_scalar("cdab,aecf,bfde", &[c, c, c])?;
    let denom = sum(vec![c3bar, mul(int(-4), w6)]);

    let comps: Vec<Expr> = (0..n)
        .map(|j| {
            let numer = sum(vec![
                t1.get(&[j]).clone(),
                mul(int(-2), t2.get(&[j]).clone()),
                mul(int(-4), t3.get(&[j]).clone()),
            ]);
            quot(mul(int(-4), numer), denom.clone())
        })
        .collect();
    let vector = TensorField::from_components(n, vec![Variance::Up], comps)?;
    Ok(finish_candidate(
        bundle,
        ExtractionMethod::SixDim,
        vector,
        vec![DenominatorSpec {
            name: "cubic_scalar_combination".into(),
            expr: denom,
            weight: 3,
        }],
    ))
}

/// Route through the double three-form `A` (two antisymmetrized Weyl
/// factors) and its divergence companion `G`.
pub fn extract_k_lovelock(bundle: &CurvatureBundle) -> Result<KCandidate> {
    let n = bundle.metric.dimension;
    require_dimension(ExtractionMethod::Lovelock, n)?;
    let c = &bundle.weyl22;
    let d = &bundle.weyl_divergence;

    let a0 = field_einsum("haij,bckh->ijkabc", &[c, c], &SIX_SLOT)?;
    let a1 = field_antisymmetrize(&a0, &[0, 1, 2]);
    let a2 = field_antisymmetrize(&a1, &[3, 4, 5]);
    let big_a = field_scale(&a2, int(4));

    let g1 = field_einsum("hca,debh->abcde", &[d, c], &FIVE_SLOT)?;
    let g2 = field_einsum("hcb,deah->abcde", &[d, c], &FIVE_SLOT)?;
    let g3 = field_einsum("hcab,deh->abcde", &[c, d], &FIVE_SLOT)?;
    let g0 = field_sub(&field_add(&g1, &g3), &g2);
    let galt = field_antisymmetrize(&g0, &[2, 3, 4]);
    let gg = field_scale(&galt, ratio(8, 3 * (n as i64 - 3)));

    let u1 = field_einsum("abcde,cdeabj->j", &[&gg, &big_a], &UP)?;
    let u2 = field_einsum("ababc,cdedej->j", &[&gg, &big_a], &UP)?;
    let u3 = field_einsum("abacd,cdebej->j", &[&gg, &big_a], &UP)?;
    let u4 = field_einsum("abcade,debcj->j", &[&big_a, &gg], &UP)?;
    let u5 = field_einsum("abcabc,dedej->j", &[&big_a, &gg], &UP)?;
    let u6 = field_einsum("abcabd,decej->j", &[&big_a, &gg], &UP)?;

    let s1 = field_einsum_scalar("abcabc,defdef", &[&big_a, &big_a])?;
    let s2 = field_einsum_scalar("abcade,defbcf", &[&big_a, &big_a])?;
    let s3 = field_einsum_scalar("abcabd,defcef", &[&big_a, &big_a])?;
    let s4 = field_einsum_scalar("abcdef,defabc", &[&big_a, &big_a])?;
    let denom = sum(vec![s1, mul(int(9), s2), mul(int(-9), s3), neg(s4)]);

    let comps: Vec<Expr> = (0..n)
        .map(|j| {
            let numer = sum(vec![
                u1.get(&[j]).clone(),
                mul(int(3), u2.get(&[j]).clone()),
                mul(int(6), u3.get(&[j]).clone()),
                mul(int(-3), u4.get(&[j]).clone()),
                neg(u5.get(&[j]).clone()),
                mul(int(6), u6.get(&[j]).clone()),
            ]);
            quot(mul(int(-6), numer), denom.clone())
        })
        .collect();
    let vector = TensorField::from_components(n, vec![Variance::Up], comps)?;
    Ok(finish_candidate(
        bundle,
        ExtractionMethod::Lovelock,
        vector,
        vec![DenominatorSpec {
            name: "expanded_quartic_scalar".into(),
            expr: denom,
            weight: 4,
        }],
    ))
}

/// Dispatch to the requested extraction route.
pub fn extract(bundle: &CurvatureBundle, method: ExtractionMethod) -> Result<KCandidate> {
    match method {
        ExtractionMethod::General => extract_k_general(bundle),
        ExtractionMethod::FourDim { order } => extract_k_dim4(bundle, order),
        ExtractionMethod::FiveDim => extract_k_dim5(bundle),
        ExtractionMethod::SixDim => extract_k_dim6(bundle),
        ExtractionMethod::Lovelock => extract_k_lovelock(bundle),
    }
}

/// Pointwise numeric route: solve the divergence condition
/// `C^{ab}_{ck} K^k = −2/(n−3) D^{ab}_c` directly with the closed-form
/// inverse of the Weyl operator.  Cross-checks the symbolic routes.
pub fn solve_k_at_point(w: &WeylPoint, divergence: &Tensor) -> Result<Tensor> {
    let n = w.dimension();
    let mode = divergence.mode();
    let factor = Scalar::from_int(-2, mode).div(&Scalar::from_int(n as i64 - 3, mode))?;
    weyl::solve_weyl_linear(w, &divergence.scale(&factor))
}

// ---------------------------------------------------------------------------
// condition residuals
// ---------------------------------------------------------------------------

/// Residuals of the three classification conditions at one point.
#[derive(Clone, Debug)]
pub struct PointConditions {
    /// `K^a` evaluated at the point.
    pub k_upper: Tensor,
    /// Trace-free Ricci condition for the rescaled metric.
    pub einstein: ResidualReport,
    /// Divergence condition `2 D^{ab}_c = −(n−3) C^{ab}_{ck} K^k`.
    pub cspace: ResidualReport,
    /// Gradient (curl) condition on the lowered candidate.
    pub curl: ResidualReport,
}

/// Precomputed symbolic derivative fields for evaluating the classification
/// conditions at many points.
pub struct ConditionEvaluator {
    /// `κ_a = K_a / 2`.
    kappa: TensorField,
    /// `∇_e κ_a` (derivative slot first).
    nabla_kappa: TensorField,
    /// `∂_e K_a` (derivative slot first).
    partials: TensorField,
}

impl ConditionEvaluator {
    pub fn new(bundle: &CurvatureBundle, candidate: &KCandidate) -> Result<Self> {
        if candidate.vector.dim() != bundle.metric.dimension {
            return Err(Error::Shape("candidate dimension mismatch".into()));
        }
        let kappa = field_scale(&candidate.covector, ratio(1, 2));
        let nabla_kappa =
            covector_covariant(&kappa, &bundle.christoffel, &bundle.metric.coordinates);
        let partials = covector_partials(&candidate.covector, &bundle.metric.coordinates);
        Ok(ConditionEvaluator {
            kappa,
            nabla_kappa,
            partials,
        })
    }

    /// Evaluate all three condition residuals at one point.
    pub fn conditions_at(
        &self,
        bundle: &CurvatureBundle,
        candidate: &KCandidate,
        binding: &Binding,
    ) -> Result<PointConditions> {
        let n = bundle.metric.dimension;
        let mut cache = EvalCache::new();
        let k_up = evaluate_field_with(&candidate.vector, binding, &mut cache)?;
        let mode = k_up.mode();
        let kap = evaluate_field_with(&self.kappa, binding, &mut cache)?;
        let nk = evaluate_field_with(&self.nabla_kappa, binding, &mut cache)?;
        let dk = evaluate_field_with(&self.partials, binding, &mut cache)?;
        let rtf = evaluate_field_with(&bundle.ricci_tracefree, binding, &mut cache)?;
        let cw = evaluate_field_with(&bundle.weyl22, binding, &mut cache)?;
        let dv = evaluate_field_with(&bundle.weyl_divergence, binding, &mut cache)?;
        let gup = evaluate_field_with(&bundle.inverse, binding, &mut cache)?;
        let mut gdata = Vec::with_capacity(n * n);
        for e in &bundle.metric.components {
            gdata.push(evaluate_with(e, binding, &mut cache)?);
        }
        let glow = Tensor::from_data(n, vec![Variance::Down, Variance::Down], gdata)?;

        // Trace-free Ricci condition for the rescaled metric:
        //   R̃_ab = (n−2) (∇_a κ_b − κ_a κ_b − (∇^c κ_c − κ^c κ_c) g_ab / n).
        let div = einsum_scalar("ab,ab", &[&gup, &nk])?;
        let ksq = einsum_scalar("ab,a,b", &[&gup, &kap, &kap])?;
        let phi = div.sub(&ksq).div(&Scalar::from_int(n as i64, mode))?;
        let kk = einsum("a,b->ab", &[&kap, &kap], &[Variance::Down, Variance::Down])?;
        let inner = nk.sub(&kk)?.sub(&glow.scale(&phi))?;
        let rhs = inner.scale(&Scalar::from_int(n as i64 - 2, mode));
        let einstein = max_abs_residual(&rtf, &rhs)?;

        // Divergence condition: 2 D^{ab}_c = −(n−3) C^{ab}_{ck} K^k.
        let ck = einsum(
            "abck,k->abc",
            &[&cw, &k_up],
            &[Variance::Up, Variance::Up, Variance::Down],
        )?;
        let lhs = dv.scale(&Scalar::from_int(2, mode));
        let rhs2 = ck.scale(&Scalar::from_int(-(n as i64 - 3), mode));
        let cspace = max_abs_residual(&lhs, &rhs2)?;

        // Gradient condition: ∂_e K_a must be symmetric.
        let curl = max_abs_residual(&dk, &dk.transpose(&[1, 0])?)?;

        Ok(PointConditions {
            k_upper: k_up,
            einstein,
            cspace,
            curl,
        })
    }
}

/// Residual of the divergence condition `2 D^{ab}_c + (n−3) C^{ab}_{ck} K^k`
/// at one point.
pub fn cspace_residual(
    bundle: &CurvatureBundle,
    candidate: &KCandidate,
    binding: &Binding,
) -> Result<ResidualReport> {
    let n = bundle.metric.dimension;
    let mut cache = EvalCache::new();
    let k_up = evaluate_field_with(&candidate.vector, binding, &mut cache)?;
    let mode = k_up.mode();
    let cw = evaluate_field_with(&bundle.weyl22, binding, &mut cache)?;
    let dv = evaluate_field_with(&bundle.weyl_divergence, binding, &mut cache)?;
    let ck = einsum(
        "abck,k->abc",
        &[&cw, &k_up],
        &[Variance::Up, Variance::Up, Variance::Down],
    )?;
    let lhs = dv.scale(&Scalar::from_int(2, mode));
    let rhs = ck.scale(&Scalar::from_int(-(n as i64 - 3), mode));
    max_abs_residual(&lhs, &rhs)
}

/// Residual of the trace-free Ricci condition for the rescaled metric at one
/// point.
pub fn einstein_condition_residual(
    bundle: &CurvatureBundle,
    candidate: &KCandidate,
    binding: &Binding,
) -> Result<ResidualReport> {
    let evaluator = ConditionEvaluator::new(bundle, candidate)?;
    Ok(evaluator.conditions_at(bundle, candidate, binding)?.einstein)
}

/// Residual of the gradient condition: the curl `∂_a K_b − ∂_b K_a` of the
/// lowered candidate, evaluated at one point.
pub fn gradient_residual(candidate: &KCandidate, binding: &Binding) -> Result<ResidualReport> {
    let partials = covector_partials(&candidate.covector, &candidate.coordinates);
    let dk = evaluate_field(&partials, binding)?;
    max_abs_residual(&dk, &dk.transpose(&[1, 0])?)
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

/// Final verdict of the classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    ConformallyEinstein,
    NotConformallyEinstein,
    DegenerateWeyl,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::ConformallyEinstein => "conformally_einstein",
            Outcome::NotConformallyEinstein => "not_conformally_einstein",
            Outcome::DegenerateWeyl => "degenerate_weyl",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::ConformallyEinstein => 0,
            Outcome::NotConformallyEinstein => 1,
            Outcome::DegenerateWeyl => 3,
            Outcome::Inconclusive => 4,
        }
    }
}

/// A labeled coordinate point at which the conditions are checked.
#[derive(Clone, Debug)]
pub struct SamplePoint {
    pub label: String,
    pub coords: Vec<BigRational>,
}

impl SamplePoint {
    pub fn new(label: impl Into<String>, coords: Vec<BigRational>) -> Self {
        SamplePoint {
            label: label.into(),
            coords,
        }
    }
}

/// Options for [`classify`].
#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    pub method: ExtractionMethod,
    pub mode: Mode,
    pub tolerance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            method: ExtractionMethod::General,
            mode: Mode::Float,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Per-point record in the final verdict.
#[derive(Clone, Debug)]
pub struct PointReport {
    pub label: String,
    /// Metric and curvature were evaluable and det g is away from zero.
    pub usable: bool,
    /// Usable and the method's denominator cleared the degeneracy threshold.
    pub healthy: bool,
    pub det_g: Option<f64>,
    /// Name and value of the method's scalar denominator.
    pub denominator: Option<(String, f64)>,
    pub einstein: Option<ResidualReport>,
    pub cspace: Option<ResidualReport>,
    pub curl: Option<ResidualReport>,
    pub k_vector: Option<Vec<f64>>,
    pub note: Option<String>,
}

impl PointReport {
    fn new(label: &str) -> Self {
        PointReport {
            label: label.to_string(),
            usable: false,
            healthy: false,
            det_g: None,
            denominator: None,
            einstein: None,
            cspace: None,
            curl: None,
            k_vector: None,
            note: None,
        }
    }
}

/// Result of [`classify`].
#[derive(Clone, Debug)]
pub struct Verdict {
    pub outcome: Outcome,
    pub method: ExtractionMethod,
    pub mode: Mode,
    pub tolerance: f64,
    pub points: Vec<PointReport>,
    pub notes: Vec<String>,
}

/// Relative residual usable across both modes: exact residuals map to zero
/// or infinity, since exact arithmetic is decisive.
pub fn effective_relative(r: &ResidualReport) -> f64 {
    match r.relative {
        Some(v) => v,
        None => {
            if r.absolute.is_zero() {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

struct Survey {
    det: f64,
    usable: bool,
    denominator: Option<(String, Scalar, f64)>,
    note: Option<String>,
}

fn survey_point(
    bundle: &CurvatureBundle,
    binding: &Binding,
    method: ExtractionMethod,
) -> Result<Survey> {
    let mut cache = EvalCache::new();
    let det = evaluate_with(&bundle.metric_det, binding, &mut cache)?;
    let det_ok = match &det {
        Scalar::Exact(_) => !det.is_zero(),
        Scalar::Float(v) => v.abs() > DET_FLOOR,
    };
    if !det_ok {
        return Ok(Survey {
            det: det.to_f64(),
            usable: false,
            denominator: None,
            note: Some("metric determinant vanishes at this point".into()),
        });
    }
    let pm = evaluate_metric(&bundle.metric, &bundle.inverse, binding)?;
    let cw = evaluate_field_with(&bundle.weyl22, binding, &mut cache)?;
    let w = WeylPoint::new(pm, cw)?;
    let den = method_denominator(&w, method)?;
    Ok(Survey {
        det: det.to_f64(),
        usable: true,
        denominator: Some(den),
        note: None,
    })
}

/// Float degeneracy threshold for a denominator of the given homogeneity
/// degree in the Weyl tensor.
fn degeneracy_threshold(w: &WeylPoint, weight: usize) -> f64 {
    match w.mode() {
        Mode::Exact => 0.0,
        Mode::Float => {
            let nb = w.bivector_count() as f64;
            let c2 = w.trace_invariant(2).to_f64();
            let s = if c2 > 0.0 {
                (c2 / nb).sqrt()
            } else {
                w.weyl().max_abs().abs_f64()
            };
            DEGENERACY_TOL * s.powi(weight as i32)
        }
    }
}

/// Numeric value and threshold of the method's scalar denominator at a
/// point: `(name, value, threshold)`.  Healthy means `|value| > threshold`
/// (in exact mode, `value != 0`).
fn method_denominator(
    w: &WeylPoint,
    method: ExtractionMethod,
) -> Result<(String, Scalar, f64)> {
    match method {
        ExtractionMethod::General => {
            let inv = weyl::characteristic_coefficients(w);
            let rep = weyl::nondegeneracy_with(w, &inv, DEGENERACY_TOL);
            Ok(("characteristic_c_N".into(), rep.c_n, rep.threshold))
        }
        ExtractionMethod::FourDim { order } => Ok((
            format!("chain_trace_{order}"),
            w.trace_invariant(order),
            degeneracy_threshold(w, order),
        )),
        ExtractionMethod::FiveDim => {
            let c = w.weyl();
            let chain2 = w.chain(2);
            let c2 = w.trace_invariant(2);
            let p2 = einsum("qgqe->ge", &[&chain2], &[Variance::Up, Variance::Down])?;
            let qt = einsum("abcg,cjab->gj", &[c, c], &[Variance::Down, Variance::Up])?;
            let x = einsum_scalar("ge,ge", &[&p2, &qt])?;
            let value = c2.mul(&c2).sub(&x.scale_int(4));
            Ok((
                "quartic_scalar_combination".into(),
                value,
                degeneracy_threshold(w, 4),
            ))
        }
        ExtractionMethod::SixDim => {
            let c = w.weyl();
            let c3 = w.trace_invariant(3);
            let w6 = einsum_scalar("cdab,aecf,bfde", &[c, c, c])?;
            let value = c3.sub(&w6.scale_int(4));
            Ok((
                "cubic_scalar_combination".into(),
                value,
                degeneracy_threshold(w, 3),
            ))
        }
        ExtractionMethod::Lovelock => {
            let c = w.weyl();
            let mode = w.mode();
            let a0 = einsum("haij,bckh->ijkabc", &[c, c], &SIX_SLOT)?;
            let a1 = antisymmetrize(&a0, &[0, 1, 2])?;
            let a2 = antisymmetrize(&a1, &[3, 4, 5])?;
            let a = a2.scale(&Scalar::from_int(4, mode));
            let s1 = einsum_scalar("abcabc,defdef", &[&a, &a])?;
            let s2 = einsum_scalar("abcade,defbcf", &[&a, &a])?;
            let s3 = einsum_scalar("abcabd,defcef", &[&a, &a])?;
            let s4 = einsum_scalar("abcdef,defabc", &[&a, &a])?;
            let value = s1.add(&s2.scale_int(9)).sub(&s3.scale_int(9)).sub(&s4);
            Ok((
                "expanded_quartic_scalar".into(),
                value,
                degeneracy_threshold(w, 4),
            ))
        }
    }
}

/// Classify a metric by extracting the candidate gradient and checking the
/// gradient and Einstein conditions at every healthy sample point.
///
/// Verdict rules:
/// - `ConformallyEinstein` requires the Einstein and curl residuals to stay
///   below the tolerance at every nondegenerate sample point;
/// - `NotConformallyEinstein` requires the Einstein residual to exceed ten
///   times the tolerance at some nondegenerate point;
/// - if the Weyl operator (or the method's denominator) is degenerate at
///   every usable point, the verdict is `DegenerateWeyl`;
/// - everything else is `Inconclusive`.
pub fn classify(
    metric: &MetricSpec,
    points: &[SamplePoint],
    options: &ClassifyOptions,
) -> Result<Verdict> {
    let n = metric.dimension;
    require_dimension(options.method, n)?;
    if points.is_empty() {
        return Err(Error::Invalid("at least one sample point is required".into()));
    }
    if options.mode == Mode::Exact && metric.has_transcendental() {
        return Err(Error::TranscendentalInExact(
            "metric components (use float mode)".into(),
        ));
    }
    let bundle = curvature_bundle(metric)?;
    let mut reports: Vec<PointReport> = Vec::with_capacity(points.len());
    let mut healthy: Vec<(usize, Binding)> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut any_usable = false;
    for sp in points {
        let mut rep = PointReport::new(&sp.label);
        match metric
            .binding(&sp.coords, options.mode)
            .and_then(|binding| survey_point(&bundle, &binding, options.method).map(|s| (binding, s)))
        {
            Ok((binding, sv)) => {
                rep.det_g = Some(sv.det);
                rep.usable = sv.usable;
                rep.note = sv.note;
                any_usable |= sv.usable;
                if let Some((name, value, threshold)) = sv.denominator {
                    let ok = match &value {
                        Scalar::Exact(_) => !value.is_zero(),
                        Scalar::Float(v) => v.abs() > threshold,
                    };
                    rep.denominator = Some((name, value.to_f64()));
                    rep.healthy = sv.usable && ok;
                    if sv.usable && !ok {
                        rep.note =
                            Some("method denominator below the degeneracy threshold".into());
                    }
                }
                if rep.healthy {
                    healthy.push((reports.len(), binding));
                }
            }
            Err(e) => {
                rep.note = Some(format!("point not usable: {e}"));
            }
        }
        reports.push(rep);
    }

    let base = |outcome: Outcome, points: Vec<PointReport>, notes: Vec<String>| Verdict {
        outcome,
        method: options.method,
        mode: options.mode,
        tolerance: options.tolerance,
        points,
        notes,
    };

    if !any_usable {
        notes.push("no usable sample points".into());
        return Ok(base(Outcome::Inconclusive, reports, notes));
    }
    if healthy.is_empty() {
        notes.push("Weyl operator degenerate at every usable sample point".into());
        return Ok(base(Outcome::DegenerateWeyl, reports, notes));
    }

    let candidate = extract(&bundle, options.method)?;
    let evaluator = ConditionEvaluator::new(&bundle, &candidate)?;
    for (idx, binding) in healthy {
        match evaluator.conditions_at(&bundle, &candidate, &binding) {
            Ok(pc) => {
                let rep = &mut reports[idx];
                rep.k_vector = Some(pc.k_upper.data().iter().map(Scalar::to_f64).collect());
                rep.einstein = Some(pc.einstein);
                rep.cspace = Some(pc.cspace);
                rep.curl = Some(pc.curl);
            }
            Err(e) => {
                reports[idx].healthy = false;
                reports[idx].note = Some(format!("condition evaluation failed: {e}"));
            }
        }
    }

    let assessed: Vec<&PointReport> = reports
        .iter()
        .filter(|r| r.healthy && r.einstein.is_some())
        .collect();
    let outcome = if assessed.is_empty() {
        notes.push("conditions could not be evaluated at any nondegenerate point".into());
        Outcome::Inconclusive
    } else {
        let tol = options.tolerance;
        let all_ok = assessed.iter().all(|r| {
            effective_relative(r.einstein.as_ref().unwrap()) < tol
                && effective_relative(r.curl.as_ref().unwrap()) < tol
        });
        let any_fail = assessed
            .iter()
            .any(|r| effective_relative(r.einstein.as_ref().unwrap()) > FAILURE_FACTOR * tol);
        if all_ok {
            Outcome::ConformallyEinstein
        } else if any_fail {
            Outcome::NotConformallyEinstein
        } else {
            Outcome::Inconclusive
        }
    };
    Ok(base(outcome, reports, notes))
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::conformal_rescale;
    use crate::symexpr::parse_expression;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn qi(a: i64) -> BigRational {
        BigRational::from_integer(a.into())
    }

    fn flat4() -> MetricSpec {
        MetricSpec::diagonal(
            ["x", "y", "z", "w"].map(String::from).to_vec(),
            vec![symexpr::one(), symexpr::one(), symexpr::one(), symexpr::one()],
            vec![],
            "flat euclidean 4d".into(),
        )
        .unwrap()
    }

    /// Static spherically symmetric 4d vacuum metric in rational coordinates
    /// (z replaces the polar angle).
    fn schwarzschild() -> MetricSpec {
        spherical4("1 - 2/r", "schwarzschild")
    }

    /// Same form with an extra 1/(4r^2) term, which breaks the vacuum
    /// equations: a control that is not conformally Einstein.
    fn perturbed() -> MetricSpec {
        spherical4("1 - 2/r + 1/(4*r^2)", "perturbed schwarzschild")
    }

    fn spherical4(f: &str, label: &str) -> MetricSpec {
        MetricSpec::diagonal(
            ["t", "r", "z", "phi"].map(String::from).to_vec(),
            vec![
                parse_expression(&format!("-({f})")).unwrap(),
                parse_expression(&format!("1/({f})")).unwrap(),
                parse_expression("r^2/(1 - z^2)").unwrap(),
                parse_expression("r^2*(1 - z^2)").unwrap(),
            ],
            vec![],
            label.into(),
        )
        .unwrap()
    }

    fn sample(r: i64) -> SamplePoint {
        SamplePoint::new(format!("r{r}"), vec![qi(0), qi(r), q(1, 3), qi(0)])
    }

    #[test]
    fn extraction_method_labels_parse_round_trip() {
        let methods = [
            ExtractionMethod::General,
            ExtractionMethod::FourDim { order: 2 },
            ExtractionMethod::FourDim { order: 5 },
            ExtractionMethod::FiveDim,
            ExtractionMethod::SixDim,
            ExtractionMethod::Lovelock,
        ];
        for m in methods {
            assert_eq!(ExtractionMethod::parse(&m.label()).unwrap(), m);
        }
        assert_eq!(
            ExtractionMethod::parse("dim4").unwrap(),
            ExtractionMethod::FourDim { order: 2 }
        );
        assert!(ExtractionMethod::parse("dim4:7").is_err());
        assert!(ExtractionMethod::parse("dim7").is_err());
    }

    #[test]
    fn rotational_vector_field_has_curl_two() {
        let m = flat4();
        let bundle = curvature_bundle(&m).unwrap();
        let vector = TensorField::from_components(
            4,
            vec![Variance::Up],
            vec![
                parse_expression("y").unwrap(),
                parse_expression("-x").unwrap(),
                symexpr::zero(),
                symexpr::zero(),
            ],
        )
        .unwrap();
        let candidate = finish_candidate(&bundle, ExtractionMethod::General, vector, vec![]);
        let binding = m
            .binding(&[qi(1), qi(2), qi(3), qi(4)], Mode::Exact)
            .unwrap();
        let r = gradient_residual(&candidate, &binding).unwrap();
        assert!(r.absolute.sub(&Scalar::from_int(2, Mode::Exact)).is_zero());
    }

    #[test]
    fn vacuum_metric_candidate_vanishes_exactly() {
        let m = schwarzschild();
        let bundle = curvature_bundle(&m).unwrap();
        let candidate = extract_k_general(&bundle).unwrap();
        let binding = m
            .binding(&[qi(0), qi(4), q(1, 3), qi(0)], Mode::Exact)
            .unwrap();
        let k = evaluate_field(&candidate.vector, &binding).unwrap();
        assert!(k.max_abs().is_zero(), "vacuum metric needs no rescaling");
        let e = einstein_condition_residual(&bundle, &candidate, &binding).unwrap();
        assert!(e.absolute.is_zero());
        let c = cspace_residual(&bundle, &candidate, &binding).unwrap();
        assert!(c.absolute.is_zero());
        let g = gradient_residual(&candidate, &binding).unwrap();
        assert!(g.absolute.is_zero());
    }

    #[test]
    fn perturbed_metric_routes_agree_with_reference_value() {
        let m = perturbed();
        let bundle = curvature_bundle(&m).unwrap();
        let binding = m
            .binding(&[qi(0), qi(4), q(1, 3), qi(0)], Mode::Float)
            .unwrap();
        let general = extract_k_general(&bundle).unwrap();
        let kg = evaluate_field(&general.vector, &binding).unwrap();
        // radial component matches the independently computed value −11/640
        let kr = kg.get(&[1]).to_f64();
        assert!(
            (kr + 11.0 / 640.0).abs() < 1e-12,
            "general K^r = {kr}, expected −11/640"
        );
        for order in 2..=3 {
            let c4 = extract_k_dim4(&bundle, order).unwrap();
            let k4 = evaluate_field(&c4.vector, &binding).unwrap();
            let r = max_abs_residual(&kg, &k4).unwrap();
            assert!(
                r.relative.unwrap() < 1e-9,
                "dim4:{order} disagrees with general: {r:?}"
            );
        }
        // pointwise numeric solve agrees as well
        let pm = evaluate_metric(&bundle.metric, &bundle.inverse, &binding).unwrap();
        let cw = evaluate_field(&bundle.weyl22, &binding).unwrap();
        let dv = evaluate_field(&bundle.weyl_divergence, &binding).unwrap();
        let w = WeylPoint::new(pm, cw).unwrap();
        let ks = solve_k_at_point(&w, &dv).unwrap();
        let r = max_abs_residual(&kg, &ks).unwrap();
        assert!(r.relative.unwrap() < 1e-9, "solve route disagrees: {r:?}");
    }

    #[test]
    fn vacuum_metric_classifies_as_conformally_einstein() {
        let m = schwarzschild();
        let points = [sample(3), sample(4), sample(5)];
        let verdict = classify(&m, &points, &ClassifyOptions::default()).unwrap();
        assert_eq!(verdict.outcome, Outcome::ConformallyEinstein);
        assert_eq!(verdict.outcome.exit_code(), 0);
        for p in &verdict.points {
            assert!(p.healthy, "{p:?}");
            let k = p.k_vector.as_ref().unwrap();
            assert!(k.iter().all(|v| v.abs() < 1e-9), "{k:?}");
        }
    }

    #[test]
    fn rescaled_vacuum_metric_remains_conformally_einstein() {
        let m = schwarzschild();
        let omega = parse_expression("1 + r^2/10").unwrap();
        let rescaled = conformal_rescale(&m, &omega).unwrap();
        let points = [sample(4), sample(5)];
        let options = ClassifyOptions {
            method: ExtractionMethod::FourDim { order: 2 },
            ..ClassifyOptions::default()
        };
        let verdict = classify(&rescaled, &points, &options).unwrap();
        assert_eq!(verdict.outcome, Outcome::ConformallyEinstein, "{verdict:?}");
        for p in &verdict.points {
            assert!(effective_relative(p.einstein.as_ref().unwrap()) < 1e-7);
            assert!(effective_relative(p.curl.as_ref().unwrap()) < 1e-8);
            let k = p.k_vector.as_ref().unwrap();
            assert!(k.iter().any(|v| v.abs() > 1e-6), "rescaling needs K != 0");
        }
    }

    #[test]
    fn perturbed_metric_classifies_as_not_conformally_einstein() {
        let m = perturbed();
        let points = [sample(3), sample(4), sample(5)];
        let verdict = classify(&m, &points, &ClassifyOptions::default()).unwrap();
        assert_eq!(verdict.outcome, Outcome::NotConformallyEinstein);
        assert_eq!(verdict.outcome.exit_code(), 1);
        let worst = verdict
            .points
            .iter()
            .map(|p| effective_relative(p.einstein.as_ref().unwrap()))
            .fold(0.0f64, f64::max);
        assert!(worst > 1e-6, "Einstein residual too small: {worst}");
    }

    #[test]
    fn flat_metric_yields_degenerate_weyl_verdict() {
        let m = flat4();
        let points = [SamplePoint::new("p", vec![qi(1), qi(2), qi(3), qi(4)])];
        for mode in [Mode::Float, Mode::Exact] {
            let options = ClassifyOptions {
                mode,
                ..ClassifyOptions::default()
            };
            let verdict = classify(&m, &points, &options).unwrap();
            assert_eq!(verdict.outcome, Outcome::DegenerateWeyl);
            assert_eq!(verdict.outcome.exit_code(), 3);
        }
    }

    #[test]
    fn method_dimension_gates_are_enforced() {
        let m = schwarzschild();
        let bundle = curvature_bundle(&m).unwrap();
        assert!(extract_k_dim5(&bundle).is_err());
        assert!(extract_k_dim6(&bundle).is_err());
        assert!(extract_k_lovelock(&bundle).is_err());
        assert!(extract_k_dim4(&bundle, 1).is_err());
        let points = [sample(4)];
        let options = ClassifyOptions {
            method: ExtractionMethod::FiveDim,
            ..ClassifyOptions::default()
        };
        assert!(classify(&m, &points, &options).is_err());
    }
}
