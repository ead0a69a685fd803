//! Symbolic curvature pipeline: metric in, Weyl tensor and its divergence
//! out. Everything stays a closed-form expression in the coordinates; the
//! numeric layer only ever substitutes points into finished fields.
//!
//! Conventions (indices written as slot lists):
//! - Gamma^a_{bc} = (1/2) g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc})
//! - R^c_{dab}    = d_a Gamma^c_{bd} - d_b Gamma^c_{ad}
//!                  + Gamma^c_{ae} Gamma^e_{bd} - Gamma^c_{be} Gamma^e_{ad}
//! - R^a_c        = R^{ab}_{cb}  (spheres come out positively curved)
//! - C_{abcd}     = R_{abcd} - 2/(n-2) (g_{a[c} R_{d]b} - g_{b[c} R_{d]a})
//!                  + 2/((n-1)(n-2)) R g_{a[c} g_{d]b}
//! - D^{ab}_c     = g^{ke} nabla_e C^{ab}_{ck}  (divergence on the last slot)

use crate::error::{Error, Result};
use crate::scalar::Mode;
use crate::symexpr::{
    self, differentiate_with, evaluate_with, expr_eq, int, ipow, mul, neg, prod, quot,
    ratio, simplify_with, sub, sum, Binding, DiffCache, EvalCache, Expr, SimplifyCache,
};
use crate::tensor::{PointMetric, Tensor, Variance};
use num_rational::BigRational;
use std::collections::HashMap;

/// A metric given in closed form on a coordinate chart.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub dimension: usize,
    pub coordinates: Vec<String>,
    /// Row-major n*n table of g_{ij}; construction enforces symmetry.
    pub components: Vec<Expr>,
    pub parameters: Vec<(String, BigRational)>,
    pub label: String,
}

impl MetricSpec {
    pub fn new(
        dimension: usize,
        coordinates: Vec<String>,
        components: Vec<Expr>,
        parameters: Vec<(String, BigRational)>,
        label: String,
    ) -> Result<Self> {
        if !(2..=8).contains(&dimension) {
            return Err(Error::Dimension(dimension));
        }
        if coordinates.len() != dimension {
            return Err(Error::Invalid(format!(
                "{} coordinates for dimension {}",
                coordinates.len(),
                dimension
            )));
        }
        if components.len() != dimension * dimension {
            return Err(Error::Shape(format!(
                "metric table needs {} entries",
                dimension * dimension
            )));
        }
        for i in 0..dimension {
            for j in (i + 1)..dimension {
                if !expr_eq(&components[i * dimension + j], &components[j * dimension + i]) {
                    return Err(Error::Invalid(format!(
                        "metric table not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(MetricSpec {
            dimension,
            coordinates,
            components,
            parameters,
            label,
        })
    }

    /// Build a diagonal metric from per-coordinate expressions.
    pub fn diagonal(
        coordinates: Vec<String>,
        diag: Vec<Expr>,
        parameters: Vec<(String, BigRational)>,
        label: String,
    ) -> Result<Self> {
        let n = coordinates.len();
        let mut components = vec![symexpr::zero(); n * n];
        for (i, d) in diag.into_iter().enumerate() {
            components[i * n + i] = d;
        }
        MetricSpec::new(n, coordinates, components, parameters, label)
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[i * self.dimension + j]
    }

    /// Variable binding for a coordinate point, with parameters included.
    pub fn binding(&self, point: &[BigRational], mode: Mode) -> Result<Binding> {
        if point.len() != self.dimension {
            return Err(Error::Invalid(format!(
                "point has {} coordinates, metric has {}",
                point.len(),
                self.dimension
            )));
        }
        let mut b = Binding::new(mode);
        for (name, value) in self.coordinates.iter().zip(point.iter()) {
            b.set_rational(name, value);
        }
        for (name, value) in &self.parameters {
            b.set_rational(name, value);
        }
        Ok(b)
    }

    /// True when any component contains a unary function node, which makes
    /// the metric float-only.
    pub fn has_transcendental(&self) -> bool {
        self.components.iter().any(symexpr::has_transcendental)
    }
}

/// A tensor-valued field: one expression per component.
#[derive(Clone, Debug)]
pub struct TensorField {
    n: usize,
    variance: Vec<Variance>,
    comps: Vec<Expr>,
}

impl TensorField {
    pub fn zeros(n: usize, variance: &[Variance]) -> Self {
        TensorField {
            n,
            variance: variance.to_vec(),
            comps: vec![symexpr::zero(); n.pow(variance.len() as u32)],
        }
    }

    pub fn from_components(n: usize, variance: Vec<Variance>, comps: Vec<Expr>) -> Result<Self> {
        if comps.len() != n.pow(variance.len() as u32) {
            return Err(Error::Shape("field component count mismatch".into()));
        }
        Ok(TensorField {
            n,
            variance,
            comps,
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

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        let mut off = 0;
        for &i in idx {
            off = off * self.n + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.comps[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], e: Expr) {
        let off = self.offset(idx);
        self.comps[off] = e;
    }
}

/// Everything derived from one metric, computed once and shared.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub metric: MetricSpec,
    /// det g, for point hygiene checks.
    pub metric_det: Expr,
    /// g^{ab}
    pub inverse: TensorField,
    /// Gamma^a_{bc}
    pub christoffel: TensorField,
    /// R^c_{dab}
    pub riemann_mixed: TensorField,
    /// R^{ab}_{cd}
    pub riemann22: TensorField,
    /// R_{ab}
    pub ricci: TensorField,
    /// R
    pub ricci_scalar: Expr,
    /// R_{ab} - R g_{ab} / n
    pub ricci_tracefree: TensorField,
    /// C^{ab}_{cd}
    pub weyl22: TensorField,
    /// D^{ab}_c = g^{ke} nabla_e C^{ab}_{ck}
    pub weyl_divergence: TensorField,
}

// ---------------------------------------------------------------------------
// symbolic matrix inverse by adjugate
// ---------------------------------------------------------------------------

/// Determinant of the submatrix selected by row/column bitmasks, memoized.
fn det_minor(
    g: &[Expr],
    n: usize,
    rows: u16,
    cols: u16,
    memo: &mut HashMap<(u16, u16), Expr>,
    cache: &mut SimplifyCache,
) -> Expr {
    if rows == 0 {
        return symexpr::one();
    }
    if let Some(d) = memo.get(&(rows, cols)) {
        return d.clone();
    }
    let first_row = (0..n).find(|i| rows & (1 << i) != 0).unwrap();
    let sub_rows = rows & !(1 << first_row);
    let mut terms: Vec<Expr> = Vec::new();
    // cofactor sign alternates over the columns present in the mask
    let mut jpos = 0i64;
    for j in 0..n {
        if cols & (1 << j) == 0 {
            continue;
        }
        let entry = &g[first_row * n + j];
        if !symexpr::is_zero_expr(entry) {
            let minor = det_minor(g, n, sub_rows, cols & !(1 << j), memo, cache);
            let sign = if jpos % 2 == 0 { 1 } else { -1 };
            terms.push(prod(vec![int(sign), entry.clone(), minor]));
        }
        jpos += 1;
    }
    let d = simplify_with(&sum(terms), cache);
    memo.insert((rows, cols), d.clone());
    d
}

/// Symbolic inverse metric via the adjugate, plus the determinant.
pub fn invert_metric(m: &MetricSpec) -> Result<(TensorField, Expr)> {
    let n = m.dimension;
    let mut memo = HashMap::new();
    let mut cache = SimplifyCache::new();
    let full: u16 = ((1u32 << n) - 1) as u16;
    let det = det_minor(&m.components, n, full, full, &mut memo, &mut cache);
    if symexpr::is_zero_expr(&det) {
        return Err(Error::Invalid("metric determinant is identically zero".into()));
    }
    let mut inv = TensorField::zeros(n, &[Variance::Up, Variance::Up]);
    for i in 0..n {
        for j in 0..=i {
            // inverse[i][j] = cofactor(j, i) / det; symmetric table
            let minor = det_minor(
                &m.components,
                n,
                full & !(1 << j),
                full & !(1 << i),
                &mut memo,
                &mut cache,
            );
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            let entry = simplify_with(&quot(mul(int(sign), minor), det.clone()), &mut cache);
            inv.set(&[i, j], entry.clone());
            inv.set(&[j, i], entry);
        }
    }
    Ok((inv, det))
}

// ---------------------------------------------------------------------------
// bundle construction
// ---------------------------------------------------------------------------

/// Christoffel symbols of the Levi-Civita connection.
pub fn christoffel(m: &MetricSpec) -> Result<TensorField> {
    let (inverse, _) = invert_metric(m)?;
    let mut cache = SimplifyCache::new();
    christoffel_with(m, &inverse, &mut cache)
}

fn christoffel_with(
    m: &MetricSpec,
    inverse: &TensorField,
    cache: &mut SimplifyCache,
) -> Result<TensorField> {
    let n = m.dimension;
    // dg[d][i][j] = d_d g_{ij}
    let mut dg: Vec<Vec<Expr>> = Vec::with_capacity(n);
    for d in 0..n {
        let mut dc = DiffCache::new(&m.coordinates[d]);
        let col: Vec<Expr> = m
            .components
            .iter()
            .map(|e| simplify_with(&differentiate_with(e, &mut dc), cache))
            .collect();
        dg.push(col);
    }
    let mut gamma = TensorField::zeros(n, &[Variance::Up, Variance::Down, Variance::Down]);
    for a in 0..n {
        for b in 0..n {
            for c in 0..=b {
                let mut terms = Vec::with_capacity(n);
                for d in 0..n {
                    let gad = inverse.get(&[a, d]);
                    if symexpr::is_zero_expr(gad) {
                        continue;
                    }
                    let bracket = sum(vec![
                        dg[b][d * n + c].clone(),
                        dg[c][d * n + b].clone(),
                        neg(dg[d][b * n + c].clone()),
                    ]);
                    terms.push(mul(gad.clone(), bracket));
                }
                let entry = simplify_with(&mul(ratio(1, 2), sum(terms)), cache);
                gamma.set(&[a, b, c], entry.clone());
                gamma.set(&[a, c, b], entry);
            }
        }
    }
    Ok(gamma)
}

/// Full curvature bundle for a metric.
pub fn curvature_bundle(m: &MetricSpec) -> Result<CurvatureBundle> {
    let n = m.dimension;
    let (inverse, metric_det) = invert_metric(m)?;
    let mut cache = SimplifyCache::new();
    let gamma = christoffel_with(m, &inverse, &mut cache)?;

    // dGamma[e][a][b][c] = d_e Gamma^a_{bc}
    let mut dgamma: Vec<Vec<Expr>> = Vec::with_capacity(n);
    for e in 0..n {
        let mut dc = DiffCache::new(&m.coordinates[e]);
        dgamma.push(
            gamma
                .components()
                .iter()
                .map(|x| simplify_with(&differentiate_with(x, &mut dc), &mut cache))
                .collect(),
        );
    }

    // R^c_{dab}, antisymmetric in (a,b)
    let mut riemann_mixed = TensorField::zeros(
        n,
        &[Variance::Up, Variance::Down, Variance::Down, Variance::Down],
    );
    let g_at = |a: usize, b: usize, c: usize| a * n * n + b * n + c;
    for c in 0..n {
        for d in 0..n {
            for a in 0..n {
                for b in 0..a {
                    let mut terms = vec![
                        dgamma[a][g_at(c, b, d)].clone(),
                        neg(dgamma[b][g_at(c, a, d)].clone()),
                    ];
                    for e in 0..n {
                        terms.push(mul(
                            gamma.get(&[c, a, e]).clone(),
                            gamma.get(&[e, b, d]).clone(),
                        ));
                        terms.push(neg(mul(
                            gamma.get(&[c, b, e]).clone(),
                            gamma.get(&[e, a, d]).clone(),
                        )));
                    }
                    let entry = simplify_with(&sum(terms), &mut cache);
                    riemann_mixed.set(&[c, d, a, b], entry.clone());
                    riemann_mixed.set(&[c, d, b, a], simplify_with(&neg(entry), &mut cache));
                }
            }
        }
    }

    // Ricci (positive on spheres): R^a_c = R^{ab}_{cb} = g^{be} R^a_{ecb}
    let mut ric_mixed = vec![symexpr::zero(); n * n];
    for a in 0..n {
        for c in 0..n {
            let mut terms = Vec::new();
            for b in 0..n {
                for e in 0..n {
                    let gbe = inverse.get(&[b, e]);
                    if symexpr::is_zero_expr(gbe) {
                        continue;
                    }
                    terms.push(mul(gbe.clone(), riemann_mixed.get(&[a, e, c, b]).clone()));
                }
            }
            ric_mixed[a * n + c] = simplify_with(&sum(terms), &mut cache);
        }
    }
    let mut ricci = TensorField::zeros(n, &[Variance::Down, Variance::Down]);
    for a in 0..n {
        for c in 0..=a {
            let mut terms = Vec::new();
            for d in 0..n {
                let gad = m.component(a, d);
                if symexpr::is_zero_expr(gad) {
                    continue;
                }
                terms.push(mul(gad.clone(), ric_mixed[d * n + c].clone()));
            }
            let entry = simplify_with(&sum(terms), &mut cache);
            ricci.set(&[a, c], entry.clone());
            ricci.set(&[c, a], entry);
        }
    }
    let ricci_scalar = simplify_with(
        &sum((0..n).map(|a| ric_mixed[a * n + a].clone()).collect()),
        &mut cache,
    );

    // trace-free Ricci
    let mut ricci_tracefree = TensorField::zeros(n, &[Variance::Down, Variance::Down]);
    for a in 0..n {
        for c in 0..=a {
            let entry = simplify_with(
                &sub(
                    ricci.get(&[a, c]).clone(),
                    mul(
                        quot(ricci_scalar.clone(), int(n as i64)),
                        m.component(a, c).clone(),
                    ),
                ),
                &mut cache,
            );
            ricci_tracefree.set(&[a, c], entry.clone());
            ricci_tracefree.set(&[c, a], entry);
        }
    }

    // all-lower Riemann, then Weyl
    let mut riemann_low =
        TensorField::zeros(n, &[Variance::Down; 4].to_vec().as_slice());
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..c {
                    let mut terms = Vec::new();
                    for e in 0..n {
                        let gae = m.component(a, e);
                        if symexpr::is_zero_expr(gae) {
                            continue;
                        }
                        terms.push(mul(gae.clone(), riemann_mixed.get(&[e, b, c, d]).clone()));
                    }
                    let entry = simplify_with(&sum(terms), &mut cache);
                    riemann_low.set(&[a, b, c, d], entry.clone());
                    riemann_low.set(&[a, b, d, c], simplify_with(&neg(entry), &mut cache));
                }
            }
        }
    }

    let half = ratio(1, 2);
    let g = |i: usize, j: usize| m.component(i, j).clone();
    let ric = |i: usize, j: usize| ricci.get(&[i, j]).clone();
    let mut weyl_low = TensorField::zeros(n, &[Variance::Down; 4].to_vec().as_slice());
    let c2 = ratio(2, (n as i64 - 2).max(1));
    let c3 = ratio(2, ((n as i64 - 1) * (n as i64 - 2)).max(1));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..c {
                    // term2 = g_{a[c} R_{d]b} - g_{b[c} R_{d]a}, brackets normalized
                    let term2 = mul(
                        half.clone(),
                        sum(vec![
                            mul(g(a, c), ric(d, b)),
                            neg(mul(g(a, d), ric(c, b))),
                            neg(mul(g(b, c), ric(d, a))),
                            mul(g(b, d), ric(c, a)),
                        ]),
                    );
                    // term3 = g_{a[c} g_{d]b}
                    let term3 = mul(
                        half.clone(),
                        sum(vec![mul(g(a, c), g(d, b)), neg(mul(g(a, d), g(c, b)))]),
                    );
                    let entry = simplify_with(
                        &sum(vec![
                            riemann_low.get(&[a, b, c, d]).clone(),
                            neg(mul(c2.clone(), term2)),
                            mul(mul(c3.clone(), ricci_scalar.clone()), term3),
                        ]),
                        &mut cache,
                    );
                    weyl_low.set(&[a, b, c, d], entry.clone());
                    weyl_low.set(&[a, b, d, c], simplify_with(&neg(entry), &mut cache));
                }
            }
        }
    }

    // raise the first two slots of both four-index tensors
    let riemann22 = raise_first_pair(&riemann_low, &inverse, &mut cache);
    let weyl22 = raise_first_pair(&weyl_low, &inverse, &mut cache);

    // D^{ab}_c = g^{ke} nabla_e C^{ab}_{ck}
    let mut weyl_divergence =
        TensorField::zeros(n, &[Variance::Up, Variance::Up, Variance::Down]);
    for a in 0..n {
        for b in 0..a {
            for c in 0..n {
                let mut terms = Vec::new();
                for k in 0..n {
                    for e in 0..n {
                        let gke = inverse.get(&[k, e]);
                        if symexpr::is_zero_expr(gke) {
                            continue;
                        }
                        let nabla = covariant_term_weyl(&weyl22, &gamma, m, e, a, b, c, k);
                        terms.push(mul(gke.clone(), nabla));
                    }
                }
                let entry = simplify_with(&sum(terms), &mut cache);
                weyl_divergence.set(&[a, b, c], entry.clone());
                weyl_divergence.set(&[b, a, c], simplify_with(&neg(entry), &mut cache));
            }
        }
    }

    Ok(CurvatureBundle {
        metric: m.clone(),
        metric_det,
        inverse,
        christoffel: gamma,
        riemann_mixed,
        riemann22,
        ricci,
        ricci_scalar,
        ricci_tracefree,
        weyl22,
        weyl_divergence,
    })
}

/// nabla_e C^{ab}_{ck} as an expression (no simplification; caller sums).
fn covariant_term_weyl(
    weyl22: &TensorField,
    gamma: &TensorField,
    m: &MetricSpec,
    e: usize,
    a: usize,
    b: usize,
    c: usize,
    k: usize,
) -> Expr {
    let n = m.dimension;
    let mut dc = DiffCache::new(&m.coordinates[e]);
    let mut terms = vec![differentiate_with(weyl22.get(&[a, b, c, k]), &mut dc)];
    for mm in 0..n {
        terms.push(mul(
            gamma.get(&[a, e, mm]).clone(),
            weyl22.get(&[mm, b, c, k]).clone(),
        ));
        terms.push(mul(
            gamma.get(&[b, e, mm]).clone(),
            weyl22.get(&[a, mm, c, k]).clone(),
        ));
        terms.push(neg(mul(
            gamma.get(&[mm, e, c]).clone(),
            weyl22.get(&[a, b, mm, k]).clone(),
        )));
        terms.push(neg(mul(
            gamma.get(&[mm, e, k]).clone(),
            weyl22.get(&[a, b, c, mm]).clone(),
        )));
    }
    sum(terms)
}

fn raise_first_pair(
    low: &TensorField,
    inverse: &TensorField,
    cache: &mut SimplifyCache,
) -> TensorField {
    let n = low.dim();
    let mut out = TensorField::zeros(
        n,
        &[Variance::Up, Variance::Up, Variance::Down, Variance::Down],
    );
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..c {
                    let mut terms = Vec::new();
                    for e in 0..n {
                        let gae = inverse.get(&[a, e]);
                        if symexpr::is_zero_expr(gae) {
                            continue;
                        }
                        for f in 0..n {
                            let gbf = inverse.get(&[b, f]);
                            if symexpr::is_zero_expr(gbf) {
                                continue;
                            }
                            terms.push(prod(vec![
                                gae.clone(),
                                gbf.clone(),
                                low.get(&[e, f, c, d]).clone(),
                            ]));
                        }
                    }
                    let entry = simplify_with(&sum(terms), cache);
                    out.set(&[a, b, c, d], entry.clone());
                    out.set(&[a, b, d, c], simplify_with(&neg(entry), cache));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// generic covariant derivative and field evaluation
// ---------------------------------------------------------------------------

/// Covariant derivative of a tensor field. The new lower derivative slot
/// comes FIRST in the result's slot order.
pub fn covariant_derivative(
    field: &TensorField,
    gamma: &TensorField,
    m: &MetricSpec,
) -> Result<TensorField> {
    let n = field.dim();
    if n != m.dimension {
        return Err(Error::Shape("field dimension mismatch".into()));
    }
    let rank = field.rank();
    let mut variance = vec![Variance::Down];
    variance.extend_from_slice(field.variance());
    let mut out = TensorField::zeros(n, &variance);
    let mut cache = SimplifyCache::new();
    for e in 0..n {
        let mut dc = DiffCache::new(&m.coordinates[e]);
        let mut idx = vec![0usize; rank];
        loop {
            let mut terms = vec![differentiate_with(field.get(&idx), &mut dc)];
            for (slot, v) in field.variance().iter().enumerate() {
                let held = idx[slot];
                let mut src = idx.clone();
                for mm in 0..n {
                    src[slot] = mm;
                    let gterm = match v {
                        Variance::Up => mul(
                            gamma.get(&[held, e, mm]).clone(),
                            field.get(&src).clone(),
                        ),
                        Variance::Down => neg(mul(
                            gamma.get(&[mm, e, held]).clone(),
                            field.get(&src).clone(),
                        )),
                    };
                    terms.push(gterm);
                }
            }
            let mut oidx = vec![e];
            oidx.extend_from_slice(&idx);
            out.set(&oidx, simplify_with(&sum(terms), &mut cache));
            if !crate::tensor::increment(&mut idx, n) {
                break;
            }
        }
    }
    Ok(out)
}

/// Evaluate a field at a point binding, sharing one evaluation cache across
/// all components so common subexpressions are computed once.
pub fn evaluate_field(field: &TensorField, binding: &Binding) -> Result<Tensor> {
    let mut cache = EvalCache::new();
    evaluate_field_with(field, binding, &mut cache)
}

pub fn evaluate_field_with(
    field: &TensorField,
    binding: &Binding,
    cache: &mut EvalCache,
) -> Result<Tensor> {
    let mut data = Vec::with_capacity(field.comps.len());
    for e in &field.comps {
        data.push(evaluate_with(e, binding, cache)?);
    }
    Tensor::from_data(field.n, field.variance.clone(), data)
}

/// Evaluate the metric and its inverse at a point.
pub fn evaluate_metric(
    m: &MetricSpec,
    inverse: &TensorField,
    binding: &Binding,
) -> Result<PointMetric> {
    let mut cache = EvalCache::new();
    let n = m.dimension;
    let mut gdata = Vec::with_capacity(n * n);
    for e in &m.components {
        gdata.push(evaluate_with(e, binding, &mut cache)?);
    }
    let lower = Tensor::from_data(n, vec![Variance::Down, Variance::Down], gdata)?;
    let upper = evaluate_field_with(inverse, binding, &mut cache)?;
    PointMetric::new(lower, upper)
}

// ---------------------------------------------------------------------------
// conformal rescale
// ---------------------------------------------------------------------------

/// Replace g by omega^2 g, as a new closed-form metric.
pub fn conformal_rescale(m: &MetricSpec, omega: &Expr) -> Result<MetricSpec> {
    let factor = ipow(omega.clone(), 2);
    let mut cache = SimplifyCache::new();
    let components = m
        .components
        .iter()
        .map(|e| simplify_with(&mul(factor.clone(), e.clone()), &mut cache))
        .collect();
    MetricSpec::new(
        m.dimension,
        m.coordinates.clone(),
        components,
        m.parameters.clone(),
        format!("{} rescaled by ({})^2", m.label, symexpr::expr_to_string(omega)),
    )
}

/// Lower an upper-index vector field with the metric.
pub fn lower_vector(field: &TensorField, m: &MetricSpec) -> Result<TensorField> {
    if field.rank() != 1 || field.variance()[0] != Variance::Up {
        return Err(Error::Variance("expected an upper vector field".into()));
    }
    let n = m.dimension;
    let mut cache = SimplifyCache::new();
    let mut out = TensorField::zeros(n, &[Variance::Down]);
    for a in 0..n {
        let mut terms = Vec::new();
        for b in 0..n {
            let gab = m.component(a, b);
            if symexpr::is_zero_expr(gab) {
                continue;
            }
            terms.push(mul(gab.clone(), field.get(&[b]).clone()));
        }
        out.set(&[a], simplify_with(&sum(terms), &mut cache));
    }
    Ok(out)
}
