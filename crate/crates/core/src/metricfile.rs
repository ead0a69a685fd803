//! Line-oriented text format for metric definitions.
//!
//! A metric file has up to five sections; `#` starts a comment that runs to
//! the end of the line.
//!
//! ```text
//! [metric]
//! dimension = 4
//! coordinates = t, r, z, phi
//!
//! [components]          # 0-based, lower triangle (i <= j); omitted = 0
//! g 0 0 = -(1 - 2*m/r)
//! g 1 1 = 1/(1 - 2*m/r)
//!
//! [params]              # name = rational
//! m = 1
//!
//! [points]              # label = one rational or decimal per coordinate
//! p0 = 0, 4, 1/3, 0
//!
//! [conformal]           # optional rescaling factor
//! omega = 1 + r^2/10
//! ```
//!
//! When a conformal factor is present, [`MetricFile::to_metric_spec`] returns
//! the rescaled metric `omega² g`; [`MetricFile::to_base_spec`] ignores it.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::conformal::SamplePoint;
use crate::curvature::{conformal_rescale, MetricSpec};
use crate::error::{Error, Result};
use crate::symexpr::{self, expr_eq, expr_to_string, parse_expression, Expr};

/// Parsed model of a metric file.
#[derive(Clone, Debug)]
pub struct MetricFile {
    pub dimension: usize,
    pub coordinates: Vec<String>,
    /// Lower-triangle component expressions, keyed by `(i, j)` with `i <= j`.
    /// Entries not present are zero.
    pub components: BTreeMap<(usize, usize), Expr>,
    pub parameters: Vec<(String, BigRational)>,
    pub points: Vec<(String, Vec<BigRational>)>,
    pub conformal: Option<Expr>,
}

impl PartialEq for MetricFile {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.coordinates == other.coordinates
            && self.parameters == other.parameters
            && self.points == other.points
            && self.components.len() == other.components.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|((k1, e1), (k2, e2))| k1 == k2 && expr_eq(e1, e2))
            && match (&self.conformal, &other.conformal) {
                (None, None) => true,
                (Some(a), Some(b)) => expr_eq(a, b),
                _ => false,
            }
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::MetricFile {
        line,
        msg: msg.into(),
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse a rational written as `p/q`, an integer, or a decimal.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let t = s.trim();
    let (negative, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let digits = |x: &str| -> Option<BigInt> {
        if x.is_empty() || !x.bytes().all(|c| c.is_ascii_digit()) {
            None
        } else {
            x.parse().ok()
        }
    };
    let value = if let Some((a, b)) = t.split_once('/') {
        let n = digits(a.trim())?;
        let d = digits(b.trim())?;
        if d.is_zero() {
            return None;
        }
        BigRational::new(n, d)
    } else if let Some((w, f)) = t.split_once('.') {
        let whole = if w.is_empty() {
            BigInt::zero()
        } else {
            digits(w)?
        };
        let frac = digits(f)?;
        let scale = BigInt::from(10).pow(f.len() as u32);
        BigRational::from_integer(whole) + BigRational::new(frac, scale)
    } else {
        BigRational::from_integer(digits(t)?)
    };
    Some(if negative { -value } else { value })
}

/// Canonical text for a rational: integer when the denominator is one,
/// otherwise `p/q`.
pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Metric,
    Components,
    Params,
    Points,
    Conformal,
}

impl MetricFile {
    /// Parse the sectioned text format.  Errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<MetricFile> {
        let mut section = Section::None;
        let mut dimension: Option<(usize, usize)> = None; // (value, line)
        let mut coordinates: Option<(Vec<String>, usize)> = None;
        let mut components: Vec<((usize, usize), Expr, usize)> = Vec::new();
        let mut parameters: Vec<(String, BigRational, usize)> = Vec::new();
        let mut points: Vec<(String, Vec<BigRational>, usize)> = Vec::new();
        let mut conformal: Option<(Expr, usize)> = None;

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(lineno, "unterminated section header"))?
                    .trim();
                section = match name {
                    "metric" => Section::Metric,
                    "components" => Section::Components,
                    "params" => Section::Params,
                    "points" => Section::Points,
                    "conformal" => Section::Conformal,
                    other => return Err(err(lineno, format!("unknown section `[{other}]`"))),
                };
                continue;
            }
            let (lhs, rhs) = line
                .split_once('=')
                .ok_or_else(|| err(lineno, "expected `key = value`"))?;
            let lhs = lhs.trim();
            let rhs = rhs.trim();
            if rhs.is_empty() {
                return Err(err(lineno, "missing value after `=`"));
            }
            match section {
                Section::None => {
                    return Err(err(lineno, "content before the first section header"));
                }
                Section::Metric => match lhs {
                    "dimension" => {
                        if dimension.is_some() {
                            return Err(err(lineno, "duplicate `dimension`"));
                        }
                        let d: usize = rhs
                            .parse()
                            .map_err(|_| err(lineno, format!("bad dimension `{rhs}`")))?;
                        dimension = Some((d, lineno));
                    }
                    "coordinates" => {
                        if coordinates.is_some() {
                            return Err(err(lineno, "duplicate `coordinates`"));
                        }
                        let names: Vec<String> =
                            rhs.split(',').map(|s| s.trim().to_string()).collect();
                        for name in &names {
                            if !is_identifier(name) {
                                return Err(err(
                                    lineno,
                                    format!("bad coordinate name `{name}`"),
                                ));
                            }
                        }
                        coordinates = Some((names, lineno));
                    }
                    other => {
                        return Err(err(lineno, format!("unknown [metric] key `{other}`")));
                    }
                },
                Section::Components => {
                    let tokens: Vec<&str> = lhs.split_whitespace().collect();
                    if tokens.len() != 3 || tokens[0] != "g" {
                        return Err(err(lineno, "component lines look like `g <i> <j> = <expr>`"));
                    }
                    let i: usize = tokens[1]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad row index `{}`", tokens[1])))?;
                    let j: usize = tokens[2]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad column index `{}`", tokens[2])))?;
                    if i > j {
                        return Err(err(
                            lineno,
                            format!("use the lower triangle: need i <= j, got g {i} {j}"),
                        ));
                    }
                    if components.iter().any(|(key, _, _)| *key == (i, j)) {
                        return Err(err(lineno, format!("duplicate component g {i} {j}")));
                    }
                    let e = parse_expression(rhs)
                        .map_err(|e| err(lineno, format!("bad expression: {e}")))?;
                    components.push(((i, j), e, lineno));
                }
                Section::Params => {
                    if !is_identifier(lhs) {
                        return Err(err(lineno, format!("bad parameter name `{lhs}`")));
                    }
                    if parameters.iter().any(|(n, _, _)| n == lhs) {
                        return Err(err(lineno, format!("duplicate parameter `{lhs}`")));
                    }
                    let v = parse_rational(rhs)
                        .ok_or_else(|| err(lineno, format!("bad rational `{rhs}`")))?;
                    parameters.push((lhs.to_string(), v, lineno));
                }
                Section::Points => {
                    if !is_identifier(lhs) {
                        return Err(err(lineno, format!("bad point label `{lhs}`")));
                    }
                    if points.iter().any(|(n, _, _)| n == lhs) {
                        return Err(err(lineno, format!("duplicate point `{lhs}`")));
                    }
                    let values: Result<Vec<BigRational>> = rhs
                        .split(',')
                        .map(|v| {
                            parse_rational(v)
                                .ok_or_else(|| err(lineno, format!("bad coordinate value `{}`", v.trim())))
                        })
                        .collect();
                    points.push((lhs.to_string(), values?, lineno));
                }
                Section::Conformal => {
                    if lhs != "omega" {
                        return Err(err(lineno, format!("unknown [conformal] key `{lhs}`")));
                    }
                    if conformal.is_some() {
                        return Err(err(lineno, "duplicate `omega`"));
                    }
                    let e = parse_expression(rhs)
                        .map_err(|e| err(lineno, format!("bad expression: {e}")))?;
                    conformal = Some((e, lineno));
                }
            }
        }

        let (dimension, dim_line) =
            dimension.ok_or_else(|| err(1, "missing [metric] `dimension`"))?;
        let (coordinates, coord_line) =
            coordinates.ok_or_else(|| err(1, "missing [metric] `coordinates`"))?;
        if coordinates.len() != dimension {
            return Err(err(
                coord_line,
                format!(
                    "{} coordinates listed for dimension {dimension}",
                    coordinates.len()
                ),
            ));
        }
        for (idx, name) in coordinates.iter().enumerate() {
            if coordinates[..idx].contains(name) {
                return Err(err(coord_line, format!("repeated coordinate `{name}`")));
            }
        }
        for (name, _, line) in &parameters {
            if coordinates.contains(name) {
                return Err(err(
                    *line,
                    format!("parameter `{name}` shadows a coordinate"),
                ));
            }
        }
        let known: Vec<&String> = coordinates
            .iter()
            .chain(parameters.iter().map(|(n, _, _)| n))
            .collect();
        let check_vars = |e: &Expr, line: usize| -> Result<()> {
            for v in symexpr::variables(e) {
                if !known.iter().any(|k| **k == v) {
                    return Err(err(line, format!("unknown variable `{v}`")));
                }
            }
            Ok(())
        };
        let mut table = BTreeMap::new();
        for ((i, j), e, line) in components {
            if j >= dimension {
                return Err(err(
                    line,
                    format!("component g {i} {j} out of range for dimension {dimension}"),
                ));
            }
            check_vars(&e, line)?;
            table.insert((i, j), e);
        }
        if table.is_empty() {
            return Err(err(dim_line, "no metric components given"));
        }
        for (label, coords, line) in &points {
            if coords.len() != dimension {
                return Err(err(
                    *line,
                    format!(
                        "point `{label}` has {} values, dimension is {dimension}",
                        coords.len()
                    ),
                ));
            }
        }
        if let Some((e, line)) = &conformal {
            check_vars(e, *line)?;
        }
        Ok(MetricFile {
            dimension,
            coordinates,
            components: table,
            parameters: parameters.into_iter().map(|(n, v, _)| (n, v)).collect(),
            points: points.into_iter().map(|(n, v, _)| (n, v)).collect(),
            conformal: conformal.map(|(e, _)| e),
        })
    }

    /// Serialize back to the text format.  `parse(to_text(mf)) == mf`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[metric]\n");
        out.push_str(&format!("dimension = {}\n", self.dimension));
        out.push_str(&format!("coordinates = {}\n", self.coordinates.join(", ")));
        out.push_str("\n[components]\n");
        for ((i, j), e) in &self.components {
            out.push_str(&format!("g {i} {j} = {}\n", expr_to_string(e)));
        }
        if !self.parameters.is_empty() {
            out.push_str("\n[params]\n");
            for (name, v) in &self.parameters {
                out.push_str(&format!("{name} = {}\n", rational_to_string(v)));
            }
        }
        if !self.points.is_empty() {
            out.push_str("\n[points]\n");
            for (label, coords) in &self.points {
                let values: Vec<String> = coords.iter().map(rational_to_string).collect();
                out.push_str(&format!("{label} = {}\n", values.join(", ")));
            }
        }
        if let Some(e) = &self.conformal {
            out.push_str("\n[conformal]\n");
            out.push_str(&format!("omega = {}\n", expr_to_string(e)));
        }
        out
    }

    /// The metric without any conformal factor applied.
    pub fn to_base_spec(&self, label: &str) -> Result<MetricSpec> {
        let n = self.dimension;
        let mut comps = vec![symexpr::zero(); n * n];
        for ((i, j), e) in &self.components {
            comps[i * n + j] = e.clone();
            comps[j * n + i] = e.clone();
        }
        MetricSpec::new(
            n,
            self.coordinates.clone(),
            comps,
            self.parameters.clone(),
            label.to_string(),
        )
    }

    /// The metric to analyze: the conformal factor, when present, is applied
    /// as `omega² g`.
    pub fn to_metric_spec(&self, label: &str) -> Result<MetricSpec> {
        let base = self.to_base_spec(label)?;
        match &self.conformal {
            Some(omega) => conformal_rescale(&base, omega),
            None => Ok(base),
        }
    }

    /// Sample points in the form the classifier takes.
    pub fn sample_points(&self) -> Vec<SamplePoint> {
        self.points
            .iter()
            .map(|(label, coords)| SamplePoint::new(label.clone(), coords.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
# spherically symmetric vacuum example
[metric]
dimension = 4
coordinates = t, r, z, phi

[components]
g 0 0 = -(1 - 2*m/r)   # lapse
g 1 1 = 1/(1 - 2*m/r)
g 2 2 = r^2/(1 - z^2)
g 3 3 = r^2*(1 - z^2)

[params]
m = 1

[points]
p0 = 0, 4, 1/3, 0
p1 = 0, 5.5, -0.25, 1/2

[conformal]
omega = 1 + r^2/10
";

    #[test]
    fn parse_complete_file_and_round_trip() {
        let mf = MetricFile::parse(EXAMPLE).unwrap();
        assert_eq!(mf.dimension, 4);
        assert_eq!(mf.coordinates, ["t", "r", "z", "phi"]);
        assert_eq!(mf.components.len(), 4);
        assert_eq!(mf.parameters.len(), 1);
        assert_eq!(mf.points.len(), 2);
        assert_eq!(
            mf.points[1].1[1],
            BigRational::new(11.into(), 2.into()),
            "decimals become exact rationals"
        );
        assert!(mf.conformal.is_some());
        let again = MetricFile::parse(&mf.to_text()).unwrap();
        assert_eq!(mf, again);
    }

    #[test]
    fn omitted_components_are_zero_and_table_is_symmetric() {
        let text = "\
[metric]
dimension = 4
coordinates = t, r, z, phi
[components]
g 0 1 = r
g 2 2 = 1
";
        let mf = MetricFile::parse(text).unwrap();
        let spec = mf.to_base_spec("test").unwrap();
        assert!(expr_eq(spec.component(0, 1), spec.component(1, 0)));
        assert!(symexpr::is_zero_expr(spec.component(3, 3)));
    }

    #[test]
    fn conformal_factor_rescales_the_spec() {
        let mf = MetricFile::parse(EXAMPLE).unwrap();
        let base = mf.to_base_spec("base").unwrap();
        let spec = mf.to_metric_spec("rescaled").unwrap();
        assert!(!expr_eq(base.component(1, 1), spec.component(1, 1)));
        let mode = crate::scalar::Mode::Exact;
        let binding = spec.binding(&mf.points[0].1, mode).unwrap();
        let b = crate::symexpr::evaluate_with(
            base.component(2, 2),
            &binding,
            &mut crate::symexpr::EvalCache::new(),
        )
        .unwrap();
        let s = crate::symexpr::evaluate_with(
            spec.component(2, 2),
            &binding,
            &mut crate::symexpr::EvalCache::new(),
        )
        .unwrap();
        // omega = 1 + 16/10 = 13/5 at r = 4, so the rescaled entry gains (13/5)^2
        let factor = crate::scalar::Scalar::from_rational(
            &BigRational::new(169.into(), 25.into()),
            mode,
        );
        assert!(s.sub(&b.mul(&factor)).is_zero());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases: [(&str, usize, &str); 8] = [
            ("g 0 0 = 1\n", 1, "before the first section"),
            ("[metric]\ndimensions = 4\n", 2, "unknown [metric] key"),
            (
                "[metric]\ndimension = 4\ncoordinates = t, r\n",
                3,
                "coordinates listed",
            ),
            (
                "[metric]\ndimension = 4\ncoordinates = t, r, z, phi\n[components]\ng 1 0 = 1\n",
                5,
                "lower triangle",
            ),
            (
                "[metric]\ndimension = 4\ncoordinates = t, r, z, phi\n[components]\ng 0 5 = 1\n",
                5,
                "out of range",
            ),
            (
                "[metric]\ndimension = 4\ncoordinates = t, r, z, phi\n[components]\ng 0 0 = q\n",
                5,
                "unknown variable `q`",
            ),
            (
                "[metric]\ndimension = 4\ncoordinates = t, r, z, phi\n[components]\ng 0 0 = 1\n[points]\np = 1, 2\n",
                7,
                "has 2 values",
            ),
            (
                "[metric]\ndimension = 4\ncoordinates = t, r, z, phi\n[components]\ng 0 0 = 1\ng 0 0 = 2\n",
                6,
                "duplicate component",
            ),
        ];
        for (text, line, needle) in cases {
            match MetricFile::parse(text) {
                Err(Error::MetricFile { line: l, msg }) => {
                    assert_eq!(l, line, "wrong line for {text:?}: {msg}");
                    assert!(msg.contains(needle), "missing `{needle}` in `{msg}`");
                }
                other => panic!("expected a metric-file error, got {other:?}"),
            }
        }
    }

    #[test]
    fn rational_forms_parse() {
        for (text, num, den) in [
            ("3/4", 3, 4),
            ("-3/4", -3, 4),
            ("0.25", 1, 4),
            ("-1.5", -3, 2),
            ("+2", 2, 1),
            (".5", 1, 2),
        ] {
            assert_eq!(
                parse_rational(text).unwrap(),
                BigRational::new(num.into(), den.into()),
                "{text}"
            );
        }
        for bad in ["1/0", "a", "1.2.3", "--1", "1/ "] {
            assert!(parse_rational(bad).is_none(), "{bad}");
        }
    }
}
