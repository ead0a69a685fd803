//! Immutable symbolic expression DAG with exact rational constants.
//!
//! Nodes are reference counted and shared aggressively; differentiation,
//! evaluation and simplification all memoize on node identity so repeated
//! substructure is processed once. Expressions are pure rational functions
//! of variables plus a fixed alphabet of unary functions.

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

pub type Expr = Rc<ExprNode>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
            UnaryFn::Exp => "exp",
            UnaryFn::Ln => "ln",
            UnaryFn::Sinh => "sinh",
            UnaryFn::Cosh => "cosh",
            UnaryFn::Tanh => "tanh",
            UnaryFn::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "tan" => UnaryFn::Tan,
            "exp" => UnaryFn::Exp,
            "ln" => UnaryFn::Ln,
            "sinh" => UnaryFn::Sinh,
            "cosh" => UnaryFn::Cosh,
            "tanh" => UnaryFn::Tanh,
            "sqrt" => UnaryFn::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            UnaryFn::Sin => x.sin(),
            UnaryFn::Cos => x.cos(),
            UnaryFn::Tan => x.tan(),
            UnaryFn::Exp => x.exp(),
            UnaryFn::Ln => x.ln(),
            UnaryFn::Sinh => x.sinh(),
            UnaryFn::Cosh => x.cosh(),
            UnaryFn::Tanh => x.tanh(),
            UnaryFn::Sqrt => x.sqrt(),
        }
    }
}

#[derive(Debug)]
pub enum ExprNode {
    Const(BigRational),
    Var(String),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Quot(Expr, Expr),
    IntPow(Expr, i32),
    Func(UnaryFn, Expr),
}

// ---------------------------------------------------------------------------
// constructors (perform light local normalization)
// ---------------------------------------------------------------------------

pub fn rat(r: BigRational) -> Expr {
    Rc::new(ExprNode::Const(r))
}

pub fn int(v: i64) -> Expr {
    rat(BigRational::from_integer(BigInt::from(v)))
}

pub fn ratio(num: i64, den: i64) -> Expr {
    rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

pub fn var(name: &str) -> Expr {
    Rc::new(ExprNode::Var(name.to_string()))
}

pub fn zero() -> Expr {
    int(0)
}

pub fn one() -> Expr {
    int(1)
}

fn as_const(e: &Expr) -> Option<&BigRational> {
    match &**e {
        ExprNode::Const(r) => Some(r),
        _ => None,
    }
}

pub fn is_zero_expr(e: &Expr) -> bool {
    matches!(&**e, ExprNode::Const(r) if r.is_zero())
}

fn is_one_expr(e: &Expr) -> bool {
    matches!(&**e, ExprNode::Const(r) if r.is_one())
}

/// Sum constructor: flattens nested sums, folds constants, drops zeros.
pub fn sum(terms: Vec<Expr>) -> Expr {
    let mut acc = BigRational::zero();
    let mut out: Vec<Expr> = Vec::with_capacity(terms.len());
    for t in terms {
        match &*t {
            ExprNode::Const(r) => acc += r,
            ExprNode::Sum(inner) => {
                for s in inner {
                    match &**s {
                        ExprNode::Const(r) => acc += r,
                        _ => out.push(s.clone()),
                    }
                }
            }
            _ => out.push(t),
        }
    }
    if !acc.is_zero() {
        out.push(rat(acc));
    }
    match out.len() {
        0 => zero(),
        1 => out.pop().unwrap(),
        _ => Rc::new(ExprNode::Sum(out)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    sum(vec![a, b])
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    add(a, neg(b))
}

pub fn neg(a: Expr) -> Expr {
    mul(int(-1), a)
}

/// Product constructor: flattens, folds constants, short-circuits zero and
/// hoists quotient factors so products never contain `Quot` at top level.
pub fn prod(factors: Vec<Expr>) -> Expr {
    let mut coeff = BigRational::one();
    let mut nums: Vec<Expr> = Vec::with_capacity(factors.len());
    let mut dens: Vec<Expr> = Vec::new();
    let mut stack: Vec<Expr> = factors;
    stack.reverse();
    while let Some(f) = stack.pop() {
        match &*f {
            ExprNode::Const(r) => {
                if r.is_zero() {
                    return zero();
                }
                coeff *= r;
            }
            ExprNode::Prod(inner) => {
                for g in inner.iter().rev() {
                    stack.push(g.clone());
                }
            }
            ExprNode::Quot(n, d) => {
                stack.push(n.clone());
                dens.push(d.clone());
            }
            _ => nums.push(f),
        }
    }
    if !coeff.is_one() {
        nums.insert(0, rat(coeff));
    }
    let numerator = match nums.len() {
        0 => one(),
        1 => nums.pop().unwrap(),
        _ => Rc::new(ExprNode::Prod(nums)),
    };
    if dens.is_empty() {
        numerator
    } else {
        let denominator = match dens.len() {
            1 => dens.pop().unwrap(),
            _ => prod(dens),
        };
        quot(numerator, denominator)
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    prod(vec![a, b])
}

/// Quotient constructor. Keeps `0/x -> 0` and folds constant denominators.
/// Division by a literal zero constant is left in place and surfaces as an
/// evaluation error.
pub fn quot(n: Expr, d: Expr) -> Expr {
    if is_one_expr(&d) {
        return n;
    }
    if is_zero_expr(&n) && !is_zero_expr(&d) {
        return zero();
    }
    if let (Some(a), Some(b)) = (as_const(&n), as_const(&d)) {
        if !b.is_zero() {
            return rat(a / b);
        }
    }
    if let Some(b) = as_const(&d) {
        if !b.is_zero() {
            return mul(rat(b.recip()), n);
        }
    }
    // (a/b)/c -> a/(b*c), a/(b/c) -> (a*c)/b
    if let ExprNode::Quot(a, b) = &*n {
        return quot(a.clone(), mul(b.clone(), d));
    }
    if let ExprNode::Quot(b, c) = &*d {
        return quot(mul(n, c.clone()), b.clone());
    }
    Rc::new(ExprNode::Quot(n, d))
}

/// Integer power constructor. `x^0 -> 1` (with the 0^0 = 1 convention),
/// `x^1 -> x`, constants fold, nested integer powers multiply out.
pub fn ipow(base: Expr, k: i32) -> Expr {
    if k == 0 {
        return one();
    }
    if k == 1 {
        return base;
    }
    if let Some(r) = as_const(&base) {
        if !r.is_zero() || k > 0 {
            return rat(pow_rational(r, k));
        }
    }
    if let ExprNode::IntPow(inner, j) = &*base {
        if let Some(kj) = (*j as i64).checked_mul(k as i64) {
            if let Ok(kj32) = i32::try_from(kj) {
                return ipow(inner.clone(), kj32);
            }
        }
    }
    Rc::new(ExprNode::IntPow(base, k))
}

pub fn func(f: UnaryFn, arg: Expr) -> Expr {
    Rc::new(ExprNode::Func(f, arg))
}

fn pow_rational(r: &BigRational, k: i32) -> BigRational {
    if k >= 0 {
        r.pow(k)
    } else {
        r.recip().pow(-k)
    }
}

// ---------------------------------------------------------------------------
// structural comparison and hashing (deterministic, address independent)
// ---------------------------------------------------------------------------

fn kind_rank(e: &ExprNode) -> u8 {
    match e {
        ExprNode::Const(_) => 0,
        ExprNode::Var(_) => 1,
        ExprNode::Func(_, _) => 2,
        ExprNode::IntPow(_, _) => 3,
        ExprNode::Prod(_) => 4,
        ExprNode::Quot(_, _) => 5,
        ExprNode::Sum(_) => 6,
    }
}

/// Deterministic structural ordering; used to canonicalize term order.
pub fn cmp_exprs(a: &Expr, b: &Expr) -> Ordering {
    if Rc::ptr_eq(a, b) {
        return Ordering::Equal;
    }
    let (ra, rb) = (kind_rank(a), kind_rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (&**a, &**b) {
        (ExprNode::Const(x), ExprNode::Const(y)) => x.cmp(y),
        (ExprNode::Var(x), ExprNode::Var(y)) => x.cmp(y),
        (ExprNode::Func(f, x), ExprNode::Func(g, y)) => {
            f.name().cmp(g.name()).then_with(|| cmp_exprs(x, y))
        }
        (ExprNode::IntPow(x, j), ExprNode::IntPow(y, k)) => {
            cmp_exprs(x, y).then(j.cmp(k))
        }
        (ExprNode::Prod(xs), ExprNode::Prod(ys)) | (ExprNode::Sum(xs), ExprNode::Sum(ys)) => {
            let mut it = xs.iter().zip(ys.iter());
            for (x, y) in &mut it {
                let c = cmp_exprs(x, y);
                if c != Ordering::Equal {
                    return c;
                }
            }
            xs.len().cmp(&ys.len())
        }
        (ExprNode::Quot(xn, xd), ExprNode::Quot(yn, yd)) => {
            cmp_exprs(xn, yn).then_with(|| cmp_exprs(xd, yd))
        }
        _ => unreachable!("kind ranks matched"),
    }
}

pub fn expr_eq(a: &Expr, b: &Expr) -> bool {
    cmp_exprs(a, b) == Ordering::Equal
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

/// A variable environment plus the arithmetic mode for evaluation.
#[derive(Clone, Debug)]
pub struct Binding {
    pub mode: Mode,
    values: HashMap<String, Scalar>,
}

impl Binding {
    pub fn new(mode: Mode) -> Self {
        Binding {
            mode,
            values: HashMap::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: Scalar) {
        assert_eq!(value.mode(), self.mode, "binding value must match mode");
        self.values.insert(name.to_string(), value);
    }

    pub fn set_rational(&mut self, name: &str, value: &BigRational) {
        self.set(name, Scalar::from_rational(value, self.mode));
    }

    pub fn get(&self, name: &str) -> Option<&Scalar> {
        self.values.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.values.keys()
    }
}

/// Evaluation cache reusable across many expressions sharing structure.
pub struct EvalCache {
    // Values keyed by node address; the Expr clone keeps the node alive so
    // addresses cannot be recycled while the cache lives.
    memo: HashMap<*const ExprNode, (Expr, Scalar)>,
}

impl EvalCache {
    pub fn new() -> Self {
        EvalCache {
            memo: HashMap::new(),
        }
    }
}

impl Default for EvalCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Evaluate an expression under a binding. Exact mode rejects every unary
/// function node (including sqrt); float mode rejects non-finite results.
pub fn evaluate(e: &Expr, binding: &Binding) -> Result<Scalar> {
    let mut cache = EvalCache::new();
    evaluate_with(e, binding, &mut cache)
}

pub fn evaluate_with(e: &Expr, binding: &Binding, cache: &mut EvalCache) -> Result<Scalar> {
    let key = Rc::as_ptr(e);
    if let Some((_, v)) = cache.memo.get(&key) {
        return Ok(v.clone());
    }
    let value = match &**e {
        ExprNode::Const(r) => Scalar::from_rational(r, binding.mode),
        ExprNode::Var(name) => binding
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnboundVariable(name.clone()))?,
        ExprNode::Sum(terms) => {
            let mut acc = Scalar::zero(binding.mode);
            for t in terms {
                let v = evaluate_with(t, binding, cache)?;
                acc = acc.add(&v);
            }
            acc
        }
        ExprNode::Prod(factors) => {
            let mut acc = Scalar::one(binding.mode);
            for f in factors {
                let v = evaluate_with(f, binding, cache)?;
                acc = acc.mul(&v);
            }
            acc
        }
        ExprNode::Quot(n, d) => {
            let nv = evaluate_with(n, binding, cache)?;
            let dv = evaluate_with(d, binding, cache)?;
            nv.div(&dv)?
        }
        ExprNode::IntPow(b, k) => {
            let bv = evaluate_with(b, binding, cache)?;
            pow_scalar(&bv, *k)?
        }
        ExprNode::Func(f, arg) => {
            let av = evaluate_with(arg, binding, cache)?;
            match av {
                Scalar::Exact(_) => return Err(Error::TranscendentalInExact(f.name().into())),
                Scalar::Float(x) => Scalar::Float(f.apply(x)),
            }
        }
    };
    if let Scalar::Float(v) = value {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    cache.memo.insert(key, (e.clone(), value.clone()));
    Ok(value)
}

fn pow_scalar(base: &Scalar, k: i32) -> Result<Scalar> {
    match base {
        Scalar::Exact(r) => {
            if r.is_zero() && k < 0 {
                return Err(Error::DivisionByZero);
            }
            if r.is_zero() && k == 0 {
                return Ok(Scalar::Exact(BigRational::one()));
            }
            Ok(Scalar::Exact(pow_rational(r, k)))
        }
        Scalar::Float(f) => {
            if *f == 0.0 && k < 0 {
                return Err(Error::DivisionByZero);
            }
            Ok(Scalar::Float(f.powi(k)))
        }
    }
}

// ---------------------------------------------------------------------------
// differentiation
// ---------------------------------------------------------------------------

/// Derivative cache for one variable, reusable across expressions.
pub struct DiffCache {
    var: String,
    memo: HashMap<*const ExprNode, (Expr, Expr)>,
}

impl DiffCache {
    pub fn new(var: &str) -> Self {
        DiffCache {
            var: var.to_string(),
            memo: HashMap::new(),
        }
    }
}

pub fn differentiate(e: &Expr, variable: &str) -> Expr {
    let mut cache = DiffCache::new(variable);
    differentiate_with(e, &mut cache)
}

pub fn differentiate_with(e: &Expr, cache: &mut DiffCache) -> Expr {
    let key = Rc::as_ptr(e);
    if let Some((_, d)) = cache.memo.get(&key) {
        return d.clone();
    }
    let d = match &**e {
        ExprNode::Const(_) => zero(),
        ExprNode::Var(name) => {
            if *name == cache.var {
                one()
            } else {
                zero()
            }
        }
        ExprNode::Sum(terms) => sum(terms.iter().map(|t| differentiate_with(t, cache)).collect()),
        ExprNode::Prod(factors) => {
            let mut pieces = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let df = differentiate_with(f, cache);
                if is_zero_expr(&df) {
                    continue;
                }
                let mut fs: Vec<Expr> = Vec::with_capacity(factors.len());
                for (j, g) in factors.iter().enumerate() {
                    fs.push(if i == j { df.clone() } else { g.clone() });
                }
                pieces.push(prod(fs));
            }
            sum(pieces)
        }
        ExprNode::Quot(n, d) => {
            let dn = differentiate_with(n, cache);
            let dd = differentiate_with(d, cache);
            if is_zero_expr(&dd) {
                quot(dn, d.clone())
            } else {
                quot(
                    sub(mul(dn, d.clone()), mul(n.clone(), dd)),
                    ipow(d.clone(), 2),
                )
            }
        }
        ExprNode::IntPow(b, k) => {
            let db = differentiate_with(b, cache);
            prod(vec![int(*k as i64), ipow(b.clone(), k - 1), db])
        }
        ExprNode::Func(f, arg) => {
            let da = differentiate_with(arg, cache);
            let outer = match f {
                UnaryFn::Sin => func(UnaryFn::Cos, arg.clone()),
                UnaryFn::Cos => neg(func(UnaryFn::Sin, arg.clone())),
                UnaryFn::Tan => add(one(), ipow(func(UnaryFn::Tan, arg.clone()), 2)),
                UnaryFn::Exp => func(UnaryFn::Exp, arg.clone()),
                UnaryFn::Ln => quot(one(), arg.clone()),
                UnaryFn::Sinh => func(UnaryFn::Cosh, arg.clone()),
                UnaryFn::Cosh => func(UnaryFn::Sinh, arg.clone()),
                UnaryFn::Tanh => sub(one(), ipow(func(UnaryFn::Tanh, arg.clone()), 2)),
                UnaryFn::Sqrt => quot(ratio(1, 2), func(UnaryFn::Sqrt, arg.clone())),
            };
            mul(outer, da)
        }
    };
    cache.memo.insert(key, (e.clone(), d.clone()));
    d
}

// ---------------------------------------------------------------------------
// simplification
// ---------------------------------------------------------------------------

pub struct SimplifyCache {
    memo: HashMap<*const ExprNode, (Expr, Expr)>,
}

impl SimplifyCache {
    pub fn new() -> Self {
        SimplifyCache {
            memo: HashMap::new(),
        }
    }
}

impl Default for SimplifyCache {
    fn default() -> Self {
        Self::new()
    }
}

pub fn simplify(e: &Expr) -> Expr {
    let mut cache = SimplifyCache::new();
    simplify_with(e, &mut cache)
}

pub fn simplify_with(e: &Expr, cache: &mut SimplifyCache) -> Expr {
    let key = Rc::as_ptr(e);
    if let Some((_, s)) = cache.memo.get(&key) {
        return s.clone();
    }
    let s = match &**e {
        ExprNode::Const(_) | ExprNode::Var(_) => e.clone(),
        ExprNode::Sum(terms) => {
            let parts: Vec<Expr> = terms.iter().map(|t| simplify_with(t, cache)).collect();
            collect_sum(parts)
        }
        ExprNode::Prod(factors) => {
            let parts: Vec<Expr> = factors.iter().map(|f| simplify_with(f, cache)).collect();
            collect_prod(parts)
        }
        ExprNode::Quot(n, d) => {
            let ns = simplify_with(n, cache);
            let ds = simplify_with(d, cache);
            cancel_quot(ns, ds)
        }
        ExprNode::IntPow(b, k) => ipow(simplify_with(b, cache), *k),
        ExprNode::Func(f, arg) => func(*f, simplify_with(arg, cache)),
    };
    cache.memo.insert(key, (e.clone(), s.clone()));
    s
}

/// Split a term into (rational coefficient, structural core).
fn coeff_core(t: &Expr) -> (BigRational, Expr) {
    match &**t {
        ExprNode::Const(r) => (r.clone(), one()),
        ExprNode::Prod(fs) => {
            if let ExprNode::Const(r) = &*fs[0] {
                let rest: Vec<Expr> = fs[1..].to_vec();
                let core = match rest.len() {
                    0 => one(),
                    1 => rest[0].clone(),
                    _ => Rc::new(ExprNode::Prod(rest)),
                };
                (r.clone(), core)
            } else {
                (BigRational::one(), t.clone())
            }
        }
        _ => (BigRational::one(), t.clone()),
    }
}

/// Combine structurally identical summands: x + 2*x -> 3*x.
fn collect_sum(parts: Vec<Expr>) -> Expr {
    let flat = sum(parts);
    let terms: Vec<Expr> = match &*flat {
        ExprNode::Sum(ts) => ts.clone(),
        _ => return flat,
    };
    let mut buckets: Vec<(Expr, BigRational)> = Vec::with_capacity(terms.len());
    for t in &terms {
        let (c, core) = coeff_core(t);
        match buckets.binary_search_by(|(k, _)| cmp_exprs(k, &core)) {
            Ok(i) => buckets[i].1 += c,
            Err(i) => buckets.insert(i, (core, c)),
        }
    }
    let mut out = Vec::with_capacity(buckets.len());
    for (core, c) in buckets {
        if c.is_zero() {
            continue;
        }
        if is_one_expr(&core) {
            out.push(rat(c));
        } else if c.is_one() {
            out.push(core);
        } else {
            out.push(mul(rat(c), core));
        }
    }
    sum(out)
}

/// Combine identical factors into integer powers: x * x^2 -> x^3.
fn collect_prod(parts: Vec<Expr>) -> Expr {
    let flat = prod(parts);
    match &*flat {
        ExprNode::Prod(_) => {}
        ExprNode::Quot(n, d) => return cancel_quot(n.clone(), d.clone()),
        _ => return flat,
    }
    let factors: Vec<Expr> = match &*flat {
        ExprNode::Prod(fs) => fs.clone(),
        _ => unreachable!(),
    };
    let mut coeff = BigRational::one();
    let mut powers: Vec<(Expr, i64)> = Vec::with_capacity(factors.len());
    for f in &factors {
        let (base, k): (Expr, i64) = match &**f {
            ExprNode::Const(r) => {
                coeff *= r;
                continue;
            }
            ExprNode::IntPow(b, k) => (b.clone(), *k as i64),
            _ => (f.clone(), 1),
        };
        match powers.binary_search_by(|(e, _)| cmp_exprs(e, &base)) {
            Ok(i) => powers[i].1 += k,
            Err(i) => powers.insert(i, (base, k)),
        }
    }
    if coeff.is_zero() {
        return zero();
    }
    let mut out: Vec<Expr> = Vec::with_capacity(powers.len() + 1);
    if !coeff.is_one() {
        out.push(rat(coeff));
    }
    for (base, k) in powers {
        if k == 0 {
            continue;
        }
        out.push(ipow(base, i32::try_from(k).expect("power fits i32")));
    }
    prod(out)
}

/// Factor list of an expression as (coefficient, [(base, power)]).
fn factor_list(e: &Expr) -> (BigRational, Vec<(Expr, i64)>) {
    let mut coeff = BigRational::one();
    let mut list: Vec<(Expr, i64)> = Vec::new();
    let push = |base: Expr, k: i64, list: &mut Vec<(Expr, i64)>| {
        match list.binary_search_by(|(b, _)| cmp_exprs(b, &base)) {
            Ok(i) => list[i].1 += k,
            Err(i) => list.insert(i, (base, k)),
        }
    };
    match &**e {
        ExprNode::Const(r) => coeff = r.clone(),
        ExprNode::Prod(fs) => {
            for f in fs {
                match &**f {
                    ExprNode::Const(r) => coeff *= r,
                    ExprNode::IntPow(b, k) => push(b.clone(), *k as i64, &mut list),
                    _ => push(f.clone(), 1, &mut list),
                }
            }
        }
        ExprNode::IntPow(b, k) => push(b.clone(), *k as i64, &mut list),
        _ => push(e.clone(), 1, &mut list),
    }
    (coeff, list)
}

fn rebuild_factors(coeff: BigRational, list: Vec<(Expr, i64)>) -> Expr {
    let mut out: Vec<Expr> = Vec::with_capacity(list.len() + 1);
    out.push(rat(coeff));
    for (base, k) in list {
        if k == 0 {
            continue;
        }
        out.push(ipow(base, i32::try_from(k).expect("power fits i32")));
    }
    prod(out)
}

/// Cancel structurally identical factors between numerator and denominator.
fn cancel_quot(n: Expr, d: Expr) -> Expr {
    if is_one_expr(&d) {
        return n;
    }
    if expr_eq(&n, &d) && !is_zero_expr(&n) {
        return one();
    }
    let (nc, mut nf) = factor_list(&n);
    let (dc, mut df) = factor_list(&d);
    if dc.is_zero() {
        return quot(n, d);
    }
    let mut cancelled = false;
    for (base, dk) in df.iter_mut() {
        if let Ok(i) = nf.binary_search_by(|(b, _)| cmp_exprs(b, base)) {
            let common = nf[i].1.min(*dk);
            if common > 0 {
                nf[i].1 -= common;
                *dk -= common;
                cancelled = true;
            }
        }
    }
    if !cancelled && nc.is_one() && dc.is_one() {
        return quot(n, d);
    }
    let num = rebuild_factors(nc / dc, nf);
    df.retain(|(_, k)| *k != 0);
    if df.is_empty() {
        return num;
    }
    quot(num, rebuild_factors(BigRational::one(), df))
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 256;

pub fn parse_expression(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(Error::Syntax {
            offset: p.pos,
            msg: format!("unexpected `{}`", p.src[p.pos] as char),
        });
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Error::Syntax {
                offset: self.pos,
                msg: "expression nests too deeply".into(),
            });
        }
        let mut acc = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    acc = add(acc, rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    acc = sub(acc, rhs);
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut acc = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    acc = mul(acc, rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    acc = quot(acc, rhs);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(neg(inner));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let k = self.parse_int_literal()?;
            return Ok(ipow(base, k));
        }
        Ok(base)
    }

    /// Exponent position: an optionally negative integer literal only.
    fn parse_int_literal(&mut self) -> Result<i32> {
        let start = self.pos;
        let mut negative = false;
        if self.src.get(self.pos) == Some(&b'-') {
            negative = true;
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self
            .src
            .get(self.pos)
            .map_or(false, |c| c.is_ascii_digit())
        {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(Error::NonIntegerExponent { offset: start });
        }
        // a decimal point here means the exponent is not an integer
        if self.src.get(self.pos) == Some(&b'.') {
            return Err(Error::NonIntegerExponent { offset: start });
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
        let mag: i64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            msg: "exponent out of range".into(),
        })?;
        let val = if negative { -mag } else { mag };
        i32::try_from(val).map_err(|_| Error::Syntax {
            offset: start,
            msg: "exponent out of range".into(),
        })
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Syntax {
                        offset: self.pos,
                        msg: "expected `)`".into(),
                    });
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_name(),
            Some(c) => Err(Error::Syntax {
                offset: self.pos,
                msg: format!("unexpected `{}`", c as char),
            }),
            None => Err(Error::Syntax {
                offset: self.pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .map_or(false, |c| c.is_ascii_digit())
        {
            self.pos += 1;
        }
        let int_part = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let frac_start = self.pos;
            while self
                .src
                .get(self.pos)
                .map_or(false, |c| c.is_ascii_digit())
            {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(Error::Syntax {
                    offset: self.pos,
                    msg: "expected digits after decimal point".into(),
                });
            }
            let frac = std::str::from_utf8(&self.src[frac_start..self.pos]).unwrap();
            let numer: BigInt = format!("{int_part}{frac}").parse().unwrap();
            let denom = BigInt::from(10).pow(frac.len() as u32);
            return Ok(rat(BigRational::new(numer, denom)));
        }
        let numer: BigInt = int_part.parse().unwrap();
        Ok(rat(BigRational::from_integer(numer)))
    }

    fn parse_name(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.src.get(self.pos).map_or(false, |c| {
            c.is_ascii_alphanumeric() || *c == b'_'
        }) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if self.peek() == Some(b'(') {
            let f = UnaryFn::from_name(&name).ok_or(Error::UnknownFunction {
                name: name.clone(),
                offset: start,
            })?;
            self.pos += 1;
            let arg = self.parse_expr()?;
            if self.peek() != Some(b')') {
                return Err(Error::Syntax {
                    offset: self.pos,
                    msg: "expected `)`".into(),
                });
            }
            self.pos += 1;
            return Ok(func(f, arg));
        }
        Ok(var(&name))
    }
}

// ---------------------------------------------------------------------------
// printing (round-trips through parse_expression)
// ---------------------------------------------------------------------------

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(e, 0, &mut s);
    s
}

/// prec: 0 top, 1 sum operand, 2 product operand, 3 denominator, 4 power base
fn write_expr(e: &Expr, prec: u8, out: &mut String) {
    match &**e {
        ExprNode::Const(r) => {
            let negative = r.is_negative();
            let fractional = !r.denom().is_one();
            let needs_parens = (negative && prec >= 2) || (fractional && prec >= 2);
            if needs_parens {
                out.push('(');
            }
            let _ = write!(out, "{}", r);
            if needs_parens {
                out.push(')');
            }
        }
        ExprNode::Var(name) => out.push_str(name),
        ExprNode::Func(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(arg, 0, out);
            out.push(')');
        }
        ExprNode::Sum(terms) => {
            let needs_parens = prec >= 2;
            if needs_parens {
                out.push('(');
            }
            for (i, t) in terms.iter().enumerate() {
                if i == 0 {
                    write_expr(t, 1, out);
                    continue;
                }
                let (c, core) = coeff_core(t);
                if c.is_negative() {
                    out.push_str(" - ");
                    let flipped = if is_one_expr(&core) {
                        rat(-c)
                    } else if (-c.clone()).is_one() {
                        core
                    } else {
                        mul(rat(-c), core)
                    };
                    write_expr(&flipped, 1, out);
                } else {
                    out.push_str(" + ");
                    write_expr(t, 1, out);
                }
            }
            if needs_parens {
                out.push(')');
            }
        }
        ExprNode::Prod(factors) => {
            let needs_parens = prec >= 3;
            if needs_parens {
                out.push('(');
            }
            // leading -1 coefficient prints as unary minus
            let mut rest: &[Expr] = factors;
            if let ExprNode::Const(r) = &*factors[0] {
                if *r == -BigRational::one() && factors.len() > 1 {
                    out.push('-');
                    rest = &factors[1..];
                }
            }
            for (i, f) in rest.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                }
                write_expr(f, 2, out);
            }
            if needs_parens {
                out.push(')');
            }
        }
        ExprNode::Quot(n, d) => {
            let needs_parens = prec >= 3;
            if needs_parens {
                out.push('(');
            }
            write_expr(n, 2, out);
            out.push('/');
            write_expr(d, 3, out);
            if needs_parens {
                out.push(')');
            }
        }
        ExprNode::IntPow(b, k) => {
            let atomic = matches!(
                &**b,
                ExprNode::Var(_) | ExprNode::Func(_, _)
            ) || matches!(&**b, ExprNode::Const(r) if !r.is_negative() && r.denom().is_one());
            if atomic {
                write_expr(b, 4, out);
            } else {
                out.push('(');
                write_expr(b, 0, out);
                out.push(')');
            }
            let _ = write!(out, "^{}", k);
        }
    }
}

/// Collect every distinct variable name appearing in an expression.
pub fn variables(e: &Expr) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    let mut visited: HashMap<*const ExprNode, Expr> = HashMap::new();
    fn walk(
        e: &Expr,
        seen: &mut Vec<String>,
        visited: &mut HashMap<*const ExprNode, Expr>,
    ) {
        let key = Rc::as_ptr(e);
        if visited.contains_key(&key) {
            return;
        }
        visited.insert(key, e.clone());
        match &**e {
            ExprNode::Var(name) => {
                if !seen.iter().any(|s| s == name) {
                    seen.push(name.clone());
                }
            }
            ExprNode::Const(_) => {}
            ExprNode::Sum(v) | ExprNode::Prod(v) => {
                for x in v {
                    walk(x, seen, visited);
                }
            }
            ExprNode::Quot(a, b) => {
                walk(a, seen, visited);
                walk(b, seen, visited);
            }
            ExprNode::IntPow(a, _) => walk(a, seen, visited),
            ExprNode::Func(_, a) => walk(a, seen, visited),
        }
    }
    walk(e, &mut seen, &mut visited);
    seen.sort();
    seen
}

/// True when the expression contains any unary function node, i.e. cannot
/// be evaluated in exact mode.
pub fn has_transcendental(e: &Expr) -> bool {
    let mut visited: HashMap<*const ExprNode, Expr> = HashMap::new();
    fn walk(e: &Expr, visited: &mut HashMap<*const ExprNode, Expr>) -> bool {
        let key = Rc::as_ptr(e);
        if visited.contains_key(&key) {
            return false;
        }
        visited.insert(key, e.clone());
        match &**e {
            ExprNode::Func(_, _) => true,
            ExprNode::Const(_) | ExprNode::Var(_) => false,
            ExprNode::Sum(v) | ExprNode::Prod(v) => v.iter().any(|x| walk(x, visited)),
            ExprNode::Quot(a, b) => walk(a, visited) || walk(b, visited),
            ExprNode::IntPow(a, _) => walk(a, visited),
        }
    }
    walk(e, &mut visited)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(mode: Mode) -> Binding {
        Binding::new(mode)
    }

    #[test]
    fn parse_shape_matches_grammar() {
        let e = parse_expression("1 - 2*M/r").unwrap();
        // 1 + (-2*M)/r
        match &*e {
            ExprNode::Sum(terms) => assert_eq!(terms.len(), 2),
            other => panic!("expected sum, got {other:?}"),
        }
        let mut env = b(Mode::Exact);
        env.set("M", Scalar::from_int(1, Mode::Exact));
        env.set("r", Scalar::from_int(4, Mode::Exact));
        let v = evaluate(&e, &env).unwrap();
        assert_eq!(format!("{}", v), "1/2");
    }

    #[test]
    fn derivative_of_schwarzschild_profile() {
        let e = parse_expression("1 - 2*M/r").unwrap();
        let d = simplify(&differentiate(&e, "r"));
        let mut env = b(Mode::Exact);
        env.set("M", Scalar::from_int(1, Mode::Exact));
        env.set("r", Scalar::from_int(4, Mode::Exact));
        // d/dr (1 - 2M/r) = 2M/r^2 = 1/8 at r=4
        assert_eq!(format!("{}", evaluate(&d, &env).unwrap()), "1/8");
    }

    #[test]
    fn power_precedence_and_unary_minus() {
        // ^ binds tighter than unary minus: -x^2 = -(x^2)
        let e = parse_expression("-x^2").unwrap();
        let mut env = b(Mode::Exact);
        env.set("x", Scalar::from_int(3, Mode::Exact));
        assert_eq!(format!("{}", evaluate(&e, &env).unwrap()), "-9");
    }

    #[test]
    fn non_integer_exponent_rejected() {
        match parse_expression("2^x") {
            Err(Error::NonIntegerExponent { .. }) => {}
            other => panic!("expected NonIntegerExponent, got {other:?}"),
        }
    }

    #[test]
    fn negative_exponent_allowed() {
        let e = parse_expression("r^-2").unwrap();
        let mut env = b(Mode::Exact);
        env.set("r", Scalar::from_int(4, Mode::Exact));
        assert_eq!(format!("{}", evaluate(&e, &env).unwrap()), "1/16");
    }

    #[test]
    fn unknown_function_reports_offset() {
        match parse_expression("1 + foo(x)") {
            Err(Error::UnknownFunction { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 4);
            }
            other => panic!("expected UnknownFunction, got {other:?}"),
        }
    }

    #[test]
    fn exact_mode_rejects_transcendental() {
        let e = parse_expression("sin(x)").unwrap();
        let mut env = b(Mode::Exact);
        env.set("x", Scalar::from_int(0, Mode::Exact));
        match evaluate(&e, &env) {
            Err(Error::TranscendentalInExact(name)) => assert_eq!(name, "sin"),
            other => panic!("expected TranscendentalInExact, got {other:?}"),
        }
        // sqrt counts as transcendental for exact purposes
        let s = parse_expression("sqrt(x)").unwrap();
        assert!(matches!(
            evaluate(&s, &env),
            Err(Error::TranscendentalInExact(_))
        ));
    }

    #[test]
    fn float_mode_evaluates_functions() {
        let e = parse_expression("exp(2*x) + sin(x)").unwrap();
        let mut env = b(Mode::Float);
        env.set("x", Scalar::Float(0.5));
        let v = evaluate(&e, &env).unwrap().to_f64();
        assert!((v - (1.0f64.exp() + 0.5f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_reported() {
        let e = parse_expression("1/(x - 1)").unwrap();
        let mut env = b(Mode::Exact);
        env.set("x", Scalar::from_int(1, Mode::Exact));
        assert!(matches!(evaluate(&e, &env), Err(Error::DivisionByZero)));
    }

    #[test]
    fn unbound_variable_reported() {
        let e = parse_expression("a + b").unwrap();
        let mut env = b(Mode::Exact);
        env.set("a", Scalar::from_int(1, Mode::Exact));
        assert!(matches!(
            evaluate(&e, &env),
            Err(Error::UnboundVariable(name)) if name == "b"
        ));
    }

    #[test]
    fn simplify_collects_terms_and_powers() {
        let e = parse_expression("x + x + y*y*y - 2*x").unwrap();
        let s = simplify(&e);
        assert_eq!(expr_to_string(&s), "y^3");
        let q = parse_expression("(x*y)/(x*z)").unwrap();
        assert_eq!(expr_to_string(&simplify(&q)), "y/z");
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "1 - 2*M/r",
            "r^2*(1 - z^2)",
            "-(x + y)/(2*z)",
            "exp(2*x) + (3/4)*y^-2",
            "1 + 2/r + 1/(4*r^2)",
            "0.25*x - 1.5",
        ] {
            let e = parse_expression(src).unwrap();
            let printed = expr_to_string(&e);
            let back = parse_expression(&printed)
                .unwrap_or_else(|err| panic!("reparse `{printed}`: {err}"));
            assert!(
                expr_eq(&e, &back),
                "round trip failed: `{src}` -> `{printed}`"
            );
        }
    }

    #[test]
    fn decimals_are_exact_rationals() {
        let e = parse_expression("0.1").unwrap();
        let env = b(Mode::Exact);
        assert_eq!(format!("{}", evaluate(&e, &env).unwrap()), "1/10");
    }

    #[test]
    fn zero_power_convention() {
        let e = parse_expression("x^0").unwrap();
        let env = b(Mode::Exact);
        assert_eq!(format!("{}", evaluate(&e, &env).unwrap()), "1");
    }

    #[test]
    fn trailing_garbage_is_syntax_error() {
        match parse_expression("x^2^3") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }
}
